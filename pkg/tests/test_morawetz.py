import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from convexscatter.errors import AtFocus, NeverPasses
from convexscatter.geometry import Ball, Scene, two_balls
from convexscatter.morawetz import (MorawetzWeight, angle_functions, b_squared, bilaplacian_mass,
                                    boundary_certificate, chi, coercivity, coercivity_on_set, exterior_volume,
                                    grad_chi, hessian_chi, lambda2, laplacian_chi, m_alpha, minimal_c1,
                                    minimal_c1_search)

W1 = MorawetzWeight(1.0)
coord = st.floats(-4, 4, allow_nan=False)
point = st.tuples(coord, coord, coord).map(np.array)


def chi_oracle(x, c1):
    """Sum of distances to (+-c1, 0, 0), written independently of the module."""
    c = np.array([c1, 0.0, 0.0])
    return float(np.linalg.norm(x - c) + np.linalg.norm(x + c))


def fd_gradient(f, x, h):
    e = np.eye(3)
    return np.array([(f(x + h * e[i]) - f(x - h * e[i])) / (2 * h) for i in range(3)])


def fd_hessian(f, x, h):
    e = np.eye(3)
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            H[i, j] = (f(x + h * e[i] + h * e[j]) - f(x + h * e[i] - h * e[j])
                       - f(x - h * e[i] + h * e[j]) + f(x - h * e[i] - h * e[j])) / (4 * h * h)
    return H


# -- closed forms ---------------------------------------------------------------------

def test_weight_at_worked_point():
    x = np.array([0.0, 1.0, 0.0])
    assert chi(W1, x) == pytest.approx(2 * math.sqrt(2), abs=1e-15)
    np.testing.assert_allclose(grad_chi(W1, x), [0, math.sqrt(2), 0], atol=1e-15)
    ev = np.linalg.eigvalsh(hessian_chi(W1, x))
    np.testing.assert_allclose(ev, [math.sqrt(2) / 2, math.sqrt(2) / 2, math.sqrt(2)], atol=1e-15)
    assert coercivity(W1, x) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    s = 2 / math.sqrt(2)
    assert s - lambda2(W1, x) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    a, b = angle_functions(W1, x)
    assert a == pytest.approx(0.0, abs=1e-15) and b == pytest.approx(1.0)


def test_weight_on_the_axis_outside_the_foci():
    x = np.array([3.0, 0.0, 0.0])
    assert chi(W1, x) == pytest.approx(6.0)
    np.testing.assert_allclose(grad_chi(W1, x), [2, 0, 0], atol=1e-15)
    assert b_squared(W1, x) == 0.0
    assert coercivity(W1, x) == 0.0


def test_at_focus_raises():
    with pytest.raises(AtFocus):
        chi(W1, [1.0, 0, 0])
    with pytest.raises(ValueError):
        MorawetzWeight(0.0)


def test_for_scene_aligns_with_the_trapped_segment():
    scene = Scene([Ball([0, -3, 1], 1), Ball([0, 3, 1], 1)])
    w = MorawetzWeight.for_scene(scene, 2.0)
    cp, cm = w.foci
    np.testing.assert_allclose(sorted([cp[1], cm[1]]), [-2, 2], atol=1e-9)
    np.testing.assert_allclose(cp[[0, 2]], [0, 1], atol=1e-9)


def test_bilaplacian_point_mass():
    # Δ(2/r) = -8π δ, so the point mass of each focus is -8π
    assert bilaplacian_mass == pytest.approx(-8 * math.pi)
    # flux of ∇(Δχ) through a small sphere around one focus
    rng = np.random.default_rng(0)
    v = rng.normal(size=(20_000, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    eps = 1e-3
    x = np.array([1.0, 0, 0]) + eps * v
    h = 1e-6
    g = np.stack([(laplacian_chi(W1, x + h * e) - laplacian_chi(W1, x - h * e)) / (2 * h) for e in np.eye(3)], 1)
    flux = 4 * math.pi * eps**2 * np.mean(np.einsum("ij,ij->i", g, v))
    assert flux == pytest.approx(bilaplacian_mass, rel=2e-2)


@settings(max_examples=200, deadline=None)
@given(point, st.floats(0.2, 3.0))
def test_closed_forms_match_finite_differences(x, c1):
    w = MorawetzWeight(c1)
    cp, cm = w.foci
    assume(min(np.linalg.norm(x - cp), np.linalg.norm(x - cm)) > 0.2)
    assert chi(w, x) == pytest.approx(chi_oracle(x, c1), rel=1e-14)
    f = lambda y: chi_oracle(y, c1)  # noqa: E731
    np.testing.assert_allclose(grad_chi(w, x), fd_gradient(f, x, 1e-5), rtol=1e-6, atol=1e-8)
    H = hessian_chi(w, x)
    np.testing.assert_allclose(H, fd_hessian(f, x, 1e-4), rtol=1e-5, atol=1e-5)
    assert np.trace(H) == pytest.approx(float(laplacian_chi(w, x)), rel=1e-14)
    gx = lambda y: grad_chi(w, y)  # noqa: E731
    np.testing.assert_allclose(np.array([(gx(x + 1e-6 * e) - gx(x - 1e-6 * e)) / 2e-6 for e in np.eye(3)]),
                               H, rtol=1e-6, atol=1e-6)


@settings(max_examples=200, deadline=None)
@given(point, st.floats(0.2, 3.0))
def test_spectral_identity_and_positivity(x, c1):
    w = MorawetzWeight(c1)
    cp, cm = w.foci
    assume(min(np.linalg.norm(x - cp), np.linalg.norm(x - cm)) > 1e-3)
    ev = np.linalg.eigvalsh(hessian_chi(w, x))
    s = 1 / np.linalg.norm(x - cp) + 1 / np.linalg.norm(x - cm)
    scale = max(1.0, s)
    assert ev[0] >= -1e-12 * scale
    assert abs(ev[0] - (s - lambda2(w, x))) < 1e-8 * scale
    assert abs(ev[0] - coercivity(w, x)) < 1e-8 * scale


@settings(max_examples=100, deadline=None)
@given(point, point, st.floats(0.2, 3.0))
def test_chi_is_convex(x, y, c1):
    w = MorawetzWeight(c1)
    for p in (x, y):
        assume(min(np.linalg.norm(p - f) for f in w.foci) > 1e-3)
    # monotone gradient and the tangent-plane inequality
    assert np.dot(grad_chi(w, x) - grad_chi(w, y), x - y) >= -1e-9
    assert chi(w, y) >= chi(w, x) + np.dot(grad_chi(w, x), y - x) - 1e-9


def test_laplacian_is_harmonic_away_from_foci():
    rng = np.random.default_rng(1)
    x = rng.uniform(-3, 3, (500, 3))
    x = x[np.min([np.linalg.norm(x - f, axis=1) for f in W1.foci], axis=0) > 0.5]
    h = 1e-3
    lap = -6 * laplacian_chi(W1, x)
    for e in np.eye(3):
        lap = lap + laplacian_chi(W1, x + h * e) + laplacian_chi(W1, x - h * e)
    assert np.max(np.abs(lap / (h * h))) < 1e-4


# -- boundary certificate --------------------------------------------------------------

def test_certificate_foci_at_ball_centres_is_sharp_zero():
    cert = boundary_certificate(two_balls(), MorawetzWeight(2.0), 100_000)
    assert cert.passed
    assert -1e-10 <= cert.min_flux <= 1e-6
    d = cert.to_dict()
    assert list(d) == sorted(d)


def test_certificate_small_c1_fails_at_inner_pole():
    cert = boundary_certificate(two_balls(), MorawetzWeight(0.1), 20_000)
    assert not cert.passed
    assert cert.min_flux == pytest.approx(-2.0, abs=1e-9)
    assert abs(abs(cert.argmin[0]) - 1.0) < 1e-9


def test_certificate_rejects_zero_samples():
    with pytest.raises(ValueError):
        boundary_certificate(two_balls(), MorawetzWeight(2.0), 0)


def _axisymmetric_minimal_c1(d, r, tol=1e-6):
    """Oracle: planar section of two balls at (+-d, 0), dense angle scan and bisection."""
    th = np.linspace(0, 2 * np.pi, 200_001)
    nu = np.stack([np.cos(th), np.sin(th)], 1)
    p = np.array([d, 0.0]) + r * nu

    def ok(c1):
        g = sum((p - c) / np.linalg.norm(p - c, axis=1)[:, None] for c in ([c1, 0], [-c1, 0]))
        return np.min(np.einsum("ij,ij->i", g, nu)) >= -1e-10

    a, b = 1e-6, d
    while b - a > tol:
        m = 0.5 * (a + b)
        a, b = (a, m) if ok(m) else (m, b)
    return b


def test_minimal_c1_two_balls():
    res = minimal_c1_search(two_balls(), tol=1e-4)
    assert res.c1 == pytest.approx(_axisymmetric_minimal_c1(2.0, 1.0), abs=2e-4)
    assert res.c1 <= 2.0 + 1e-4
    assert res.monotone
    assert minimal_c1(two_balls(), tol=1e-2) <= 2.0 + 1e-2


def test_minimal_c1_scales_linearly():
    a = minimal_c1(two_balls(), tol=1e-4)
    b = minimal_c1(two_balls(12.0, 3.0), tol=3e-4)
    assert b == pytest.approx(3 * a, abs=1e-3)


def test_minimal_c1_never_passes_below_upper():
    with pytest.raises(NeverPasses):
        minimal_c1_search(two_balls(), upper=0.5)


# -- coercivity set and m(alpha) --------------------------------------------------------

def test_coercivity_scales_with_alpha():
    w = MorawetzWeight(5.0)
    vals = [coercivity_on_set(w, 3.0, a, two_balls())[0] for a in (0.1, 0.01)]
    ratios = [v / a for v, a in zip(vals, (0.1, 0.01))]
    assert min(ratios) > 0
    assert max(ratios) / min(ratios) < 1.5


def test_m_alpha_decreases_to_zero():
    w = MorawetzWeight(5.0)
    est = [m_alpha(two_balls(), w, 4.0, a, 200_000, seed=3)[0] for a in (0.1, 0.01, 0.001)]
    assert est[0] > est[1] > est[2]
    assert est[2] < 0.1 * est[0]
    vol, err = exterior_volume(two_balls(), 4.0, 200_000, seed=3)
    assert est[0] < vol
    assert abs(vol - (4 / 3 * math.pi * (64 - 2))) < 5 * err


def test_m_alpha_requires_foci_outside_ball():
    with pytest.raises(ValueError):
        m_alpha(two_balls(), MorawetzWeight(1.0), 4.0, 0.1, 1000)
    with pytest.raises(ValueError):
        m_alpha(two_balls(), MorawetzWeight(5.0), 4.0, 1.5, 1000)
