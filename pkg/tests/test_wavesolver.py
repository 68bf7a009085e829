import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convexscatter.errors import Blowup, FociInsideObstacle, ResolutionTooCoarse
from convexscatter.experiments import gaussian_data, shell_data
from convexscatter.geometry import Ball, Scene, two_balls
from convexscatter.morawetz import MorawetzWeight
from convexscatter.wavesolver import (APRIORI_FLUX_C, CSV_COLUMNS, WaveField, apriori_flux_bound_check, apriori_ratio,
                                      boundary_flux, build_grid, energy, evolve, flux_integral,
                                      flux_time_average, laplacian, local_energy_average, lp_norm,
                                      morawetz_residual, normal_derivative, step, synchronized_velocity)


@pytest.fixture(scope="module")
def grid():
    return build_grid(two_balls(), 0.2, 4.0)


# -- grid -------------------------------------------------------------------------------

def test_grid_mask_matches_level_functions(grid):
    X = np.stack(np.meshgrid(*grid.axes(), indexing="ij"), -1).reshape(-1, 3)
    inside = two_balls().inside(X, strict=True).reshape(grid.shape)
    assert np.array_equal(grid.mask, ~inside)
    assert not grid.active[0].any() and not grid.active[:, -1].any()
    assert np.all(grid.mask[grid.active])


def test_grid_boundary_cells_touch_obstacles(grid):
    b = grid.boundary_cells
    assert len(b) > 0
    for i, j, k in b[::25]:
        nb = [(i + 1, j, k), (i - 1, j, k), (i, j + 1, k), (i, j - 1, k), (i, j, k + 1), (i, j, k - 1)]
        assert any(not grid.mask[n] for n in nb)
    # foot points lie on the obstacle surfaces
    phi = np.minimum(*(body.phi(grid.foot_points) for body in two_balls().bodies))
    assert np.max(np.abs(phi)) < 1e-8


def test_surface_quadrature_area(grid):
    assert grid.surface.area == pytest.approx(8 * math.pi, rel=1e-12)
    assert np.allclose(np.linalg.norm(grid.surface.normals, axis=1), 1)


def test_grid_resolution_checks():
    with pytest.raises(ResolutionTooCoarse):
        build_grid(two_balls(), 0.25, 4.0)
    with pytest.raises(ResolutionTooCoarse):
        build_grid(Scene([Ball([-3, 0, 0], 0.3), Ball([3, 0, 0], 0.3)]), 0.1, 4.0)
    with pytest.raises(ValueError):
        build_grid(two_balls(), 0.2)


def test_grid_describe_and_unmasked(grid):
    d = grid.describe()
    assert d["h"] == 0.2 and tuple(d["shape"]) == grid.shape
    free = grid.unmasked()
    assert free.mask.all() and free.active.sum() == (grid.shape[0] - 2) ** 3


# -- operators ----------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=10, max_size=10))
def test_laplacian_exact_on_quadratics(c):
    h = 0.1
    x = np.arange(12) * h
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    u = (c[0] + c[1] * X + c[2] * Y + c[3] * Z + c[4] * X * X + c[5] * Y * Y + c[6] * Z * Z
         + c[7] * X * Y + c[8] * Y * Z + c[9] * X * Z)
    lap = laplacian(u, h)
    np.testing.assert_allclose(lap[1:-1, 1:-1, 1:-1], 2 * (c[4] + c[5] + c[6]), atol=1e-8)


def test_dirichlet_invariant_and_zero_data(grid):
    f = WaveField.zeros(grid)
    for _ in range(5):
        step(f)
    assert not f.u.any()
    u0, u1 = gaussian_data(grid, (0, 2.0, 0), 0.4, 1.0)
    f = WaveField.from_data(grid, u0, u1)
    for _ in range(20):
        step(f)
        assert not f.u[~grid.active].any()


def test_step_rejects_large_dt(grid):
    f = WaveField.zeros(grid)
    with pytest.raises(ValueError):
        step(f, 0.95 * grid.h / math.sqrt(3))
    with pytest.raises(ValueError):
        step(f, -1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_guard(grid):
    # a huge quintic amplitude makes the explicit scheme unstable
    u0, u1 = gaussian_data(grid, (0, 2.0, 0), 0.5, 30.0)
    f = WaveField.from_data(grid, u0, u1)
    with pytest.raises(Blowup):
        for _ in range(200):
            step(f)


def test_energy_parts():
    free = build_grid(Scene([]), 0.1, 2.5)
    u0, _ = gaussian_data(free, (0, 0, 0), 0.5, 1.0)
    f = WaveField.from_data(free, u0, np.zeros(free.shape))
    tot, kin, grad, l6 = energy(f)
    assert kin == 0
    assert tot == pytest.approx(0.5 * grad + l6 / 6)
    # continuum gradient energy of exp(-|y|^2/s^2) is 3 (pi/2)^(3/2) s
    assert grad == pytest.approx(3 * (math.pi / 2) ** 1.5 * 0.5, rel=0.02)
    assert lp_norm(f, 6) ** 6 == pytest.approx(l6)


def test_leapfrog_invariant_is_exact_linear(grid):
    # the linear leapfrog conserves ½<v+, v-> + ½<u, -Δ_h u> exactly (v± straddle u)
    u0, u1 = shell_data(grid, (0, 2.0, 0), 0.8, 0.3, 1.0)
    f = WaveField.from_data(grid, u0, u1, quintic=False)
    step(f)
    dv = grid.cell_volume
    q = []
    for _ in range(100):
        v_minus, u_n = f.v.copy(), f.u.copy()
        step(f)
        q.append(0.5 * np.sum(f.v * v_minus) * dv + 0.5 * np.sum(-laplacian(u_n, grid.h) * u_n * grid.active) * dv)
    q = np.array(q)
    assert np.max(np.abs(q - q[0])) < 1e-12 * q[0]


def test_synchronized_velocity_is_second_order(grid):
    # free oscillation u = cos(t) * mode: the synchronized velocity should be -sin(t) * mode
    free = build_grid(Scene([]), 0.2, 2.0)
    n = free.shape[0]
    # discrete sine mode vanishing on the outer shell cells 0 and n-1
    mode = np.sin(np.pi * np.arange(n) / (n - 1))
    M = mode[:, None, None] * mode[None, :, None] * mode[None, None, :] * free.active
    f = WaveField.from_data(free, M, np.zeros(free.shape), quintic=False)
    for _ in range(40):
        step(f)
    omega = math.sqrt(np.sum(-laplacian(M, free.h) * M * free.active) / np.sum(M * M))
    ut = synchronized_velocity(f)
    expect = -omega * math.sin(omega * f.t) * M
    assert np.max(np.abs(ut - expect)) < 5e-3


# -- boundary flux ----------------------------------------------------------------------

def test_normal_derivative_of_distance_profile():
    scene = Scene([Ball([-2, 0, 0], 1), Ball([2, 0, 0], 1)])
    g = build_grid(scene, 0.1, 4.0)
    X = g.mesh()
    rho = np.minimum(*[np.sqrt((X[0] - c) ** 2 + X[1] ** 2 + X[2] ** 2) for c in (-2, 2)])
    u = np.where(g.active, rho - 1.0, 0.0)
    f = WaveField.from_data(g, u, np.zeros(g.shape))
    dn = normal_derivative(f)
    # n points into the obstacle, u grows away from it: dn = -1
    # stencils that touch masked cells cost O(h) pointwise; the mean is much tighter
    assert np.max(np.abs(dn + 1)) < 0.05 and abs(np.mean(dn + 1)) < 3e-3
    assert boundary_flux(f) == pytest.approx(8 * math.pi, rel=2e-2)


def test_flux_is_zero_before_first_arrival(grid):
    # data supported at distance > 1 from both balls
    u0, _ = gaussian_data(grid, (0, 3.0, 0), 0.2, 1.0)
    x, y, z = grid.mesh()
    u0[np.sqrt(x**2 + (y - 3.0) ** 2 + z**2) > 1.0] = 0
    f = WaveField.from_data(grid, u0, np.zeros(grid.shape), quintic=False)
    s = evolve(f, 5, every=1)
    assert max(s.flux) < 1e-10


def test_flux_time_average_and_window_helpers(grid):
    u0, u1 = shell_data(grid, (0, 2.0, 0), 0.8, 0.3, 1.0)
    f = WaveField.from_data(grid, u0, u1, quintic=False)
    s = evolve(f, 60, every=2)
    T = s.t[-1]
    avg = flux_time_average(s, T)
    assert avg == pytest.approx(flux_integral(s, (0, T)) / T)
    assert avg == pytest.approx(s.flux_avg[-1])
    with pytest.raises(ValueError):
        flux_time_average(s, 0.0)
    with pytest.raises(ValueError):
        flux_time_average(s, 2 * T)
    with pytest.raises(ValueError):
        local_energy_average(s, s.A + 1, T)
    assert local_energy_average(s, s.A, T) > 0
    r = apriori_ratio(s, (0, T))
    got, bound = apriori_flux_bound_check(s, (0, T), r)
    assert got == pytest.approx(bound)


def test_flux_scales_quadratically_with_amplitude(grid):
    ratios = []
    ints = []
    for amp in (1.0, 2.0):
        u0, u1 = shell_data(grid, (0, 2.0, 0), 0.8, 0.3, amp)
        s = evolve(WaveField.from_data(grid, u0, u1, quintic=False), 40, every=2)
        ints.append(flux_integral(s, (0, s.t[-1])))
        ratios.append(apriori_ratio(s, (0, s.t[-1])))
    assert ints[1] == pytest.approx(4 * ints[0], rel=1e-10)
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-10)


def test_zero_field_apriori():
    g = build_grid(two_balls(), 0.2, 4.0)
    s = evolve(WaveField.zeros(g), 3, every=1)
    assert apriori_flux_bound_check(s, (0, s.t[-1]), 1.0) == (0.0, 0.0)


# -- series ---------------------------------------------------------------------------------

def test_series_csv_and_columns(grid):
    u0, u1 = gaussian_data(grid, (0, 2.0, 0), 0.4, 1.0)
    s = evolve(WaveField.from_data(grid, u0, u1), 6, every=3)
    lines = s.to_csv().strip().split("\n")
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 1 + 3
    assert np.isnan(s.morawetz_lhs).all()
    with pytest.raises(ValueError):
        evolve(WaveField.zeros(grid), 1, every=0)


def test_morawetz_series_small_mismatch(grid):
    w = MorawetzWeight(0.5)
    u0, u1 = gaussian_data(grid, (0, 1.6, 0), 0.5, 1.0)
    f = WaveField.from_data(grid, u0, u1)
    s = evolve(f, 30, every=1, weight=w)
    lhs, rhs, mis = morawetz_residual(s, w, (0.0, s.t[-1]))
    assert lhs > 0 and mis < 0.05
    with pytest.raises(ValueError):
        morawetz_residual(s, MorawetzWeight(0.7), (0.0, s.t[-1]))


def test_focus_in_obstacle_is_rejected(grid):
    f = WaveField.zeros(grid)
    with pytest.raises(FociInsideObstacle):
        evolve(f, 1, weight=MorawetzWeight(2.0))


@pytest.mark.parametrize("kind, centre, width", [
    ("gauss", (-0.7, 0.3, -0.4), 0.4),
    ("gauss", (0.2, -1.8, 0.9), 0.35),
    ("shell", (0.3, -2.6, 0.2), 0.3),
])
def test_frozen_apriori_constant_bounds_unseen_pulses(kind, centre, width):
    # pulses not used in the fit; windows of length 1, 2 and 4
    g = build_grid(two_balls(), 0.2, 6.0)
    data = gaussian_data(g, centre, width, 1.0) if kind == "gauss" else shell_data(g, centre, 1.0, width, 1.0)
    f = WaveField.from_data(g, *data, quintic=False)
    s = evolve(f, int(6 / f.dt) + 1, every=1)
    for length in (1, 2, 4):
        for a in np.arange(0, 6 - length + 1e-9, 0.5):
            got, bound = apriori_flux_bound_check(s, (a, a + length))
            assert got <= bound
            assert apriori_ratio(s, (a, a + length)) <= APRIORI_FLUX_C


def _staircase_error(h, T=2.0, omega=2.0, sigma=0.6):
    """L2 error of u = cos(omega t) (|x|^2 - 1) exp(-|x - c|^2/sigma^2) outside the unit ball."""
    scene = Scene([Ball([0, 0, 0], 1.0)])
    g = build_grid(scene, h, 4.5)
    X, Y, Z = g.mesh()
    c = np.array([0.0, 1.6, 0.0])
    q = X**2 + Y**2 + Z**2 - 1
    r2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    E = np.exp(-r2 / sigma**2)
    gqE = -8 * (X * (X - c[0]) + Y * (Y - c[1]) + Z * (Z - c[2])) / sigma**2 * E  # 2 grad q . grad E
    B = q * E
    lapB = 6 * E + gqE + q * (4 * r2 / sigma**4 - 6 / sigma**2) * E
    src = lambda t: -math.cos(omega * t) * (omega**2 * B + lapB) * g.active  # noqa: E731
    f = WaveField.from_data(g, B * g.active, np.zeros(g.shape), quintic=False)
    n = int(round(T / f.dt))
    for _ in range(n):
        step(f, T / n, src)
    err = (f.u - math.cos(omega * T) * B) * g.active
    return math.sqrt(float(np.sum(err * err)) * h**3)


def test_manufactured_solution_with_staircase_boundary_converges():
    # the staircase boundary costs O(h); the bulk scheme alone is second order
    e1, e2 = _staircase_error(0.2), _staircase_error(0.1)
    assert math.log2(e1 / e2) >= 1.0
