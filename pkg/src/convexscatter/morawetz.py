"""The two-focus Morawetz weight ``chi(x) = |x - c| + |x + c|``.

Closed-form derivatives, the spectral split of its Hessian, the boundary sign
certificate ``grad chi . (-n) >= 0`` and the volume of the region where the
Hessian is not coercive.

The weight lives in the scene's trapped-axis frame: the foci sit at
``origin +- c1 * axis``. Because ``chi`` depends on ``x`` only through
distances to the foci, every formula below is evaluated directly in world
coordinates. ``bilaplacian_mass`` records the distributional identity
``Delta^2 chi = -8 pi (delta_c + delta_{-c})``; only its smooth shadow (the
harmonicity of ``Delta chi`` away from the foci) is ever checked numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import AtFocus, NeverPasses
from .geometry import Scene, intersect_body

CERTIFICATE_TOL = 1e-10
FOCUS_RTOL = 1e-9
DEFAULT_BOUNDARY_SAMPLES = 100_000
C1_UPPER_FACTOR = 1e3

bilaplacian_mass = -8.0 * math.pi


@dataclass(frozen=True)
class MorawetzWeight:
    """Weight with foci at ``origin +- c1 * axis``."""

    c1: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        o = np.asarray(self.origin, dtype=float).reshape(3)
        a = np.asarray(self.axis, dtype=float).reshape(3)
        a = a / np.linalg.norm(a)
        object.__setattr__(self, "c1", float(self.c1))
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "axis", a)

    @classmethod
    def for_scene(cls, scene: Scene, c1: float) -> "MorawetzWeight":
        """Weight aligned with the trapped segment, centred at its midpoint."""
        seg = scene.trapped
        return cls(c1, seg.midpoint, seg.axis)

    @property
    def foci(self) -> tuple[np.ndarray, np.ndarray]:
        """``(+c, -c)`` in world coordinates."""
        off = self.c1 * self.axis
        return self.origin + off, self.origin - off

    @property
    def focus_tol(self) -> float:
        return FOCUS_RTOL * max(1.0, self.c1)

    def _legs(self, x):
        """Vectors to the foci and their lengths; raises AtFocus near a focus."""
        x = np.asarray(x, dtype=float)
        cp, cm = self.foci
        dp = x - cp
        dm = x - cm
        rp = np.linalg.norm(dp, axis=-1)
        rm = np.linalg.norm(dm, axis=-1)
        if np.any(rp < self.focus_tol) or np.any(rm < self.focus_tol):
            raise AtFocus(f"point within {self.focus_tol:g} of a focus (c1={self.c1:g})")
        return dp, dm, rp, rm


def chi(w: MorawetzWeight, x) -> np.ndarray:
    _, _, rp, rm = w._legs(x)
    return rp + rm


def grad_chi(w: MorawetzWeight, x) -> np.ndarray:
    dp, dm, rp, rm = w._legs(x)
    return dp / rp[..., None] + dm / rm[..., None]


def laplacian_chi(w: MorawetzWeight, x) -> np.ndarray:
    _, _, rp, rm = w._legs(x)
    return 2.0 / rp + 2.0 / rm


def hessian_chi(w: MorawetzWeight, x) -> np.ndarray:
    """Sum over the foci of ``(Id - u u^T) / r``; symmetric positive semidefinite."""
    dp, dm, rp, rm = w._legs(x)
    eye = np.eye(3)
    out = np.zeros(dp.shape + (3,))
    for d, r in ((dp, rp), (dm, rm)):
        u = d / r[..., None]
        out += (eye - u[..., :, None] * u[..., None, :]) / r[..., None, None]
    return out


def angle_functions(w: MorawetzWeight, x):
    """``(a, b) = (cos theta, sin theta)`` of the angle between the focal directions.

    ``b`` is computed from the cross product so it stays accurate where the
    point is close to the focal axis.
    """
    dp, dm, rp, rm = w._legs(x)
    up = dp / rp[..., None]
    um = dm / rm[..., None]
    a = np.clip(np.einsum("...i,...i->...", up, um), -1.0, 1.0)
    b = np.clip(np.linalg.norm(np.cross(up, um), axis=-1), 0.0, 1.0)
    return a, b


def _discriminant(w: MorawetzWeight, x) -> np.ndarray:
    """``s^2 - 4 b^2 / (r+ r-)`` rewritten as ``(1/r+ - 1/r-)^2 + 4 a^2 / (r+ r-)``."""
    _, _, rp, rm = w._legs(x)
    a, _ = angle_functions(w, x)
    return (1.0 / rp - 1.0 / rm) ** 2 + 4.0 * a * a / (rp * rm)


def lambda2(w: MorawetzWeight, x) -> np.ndarray:
    """Largest eigenvalue of the focal quadratic form ``Q``.

    With ``s = 1/|x-c| + 1/|x+c|`` one has ``D^2 chi = s Id - Q`` on the plane
    of the focal directions, so ``lambda_min(D^2 chi) = s - lambda2``.
    """
    _, _, rp, rm = w._legs(x)
    s = 1.0 / rp + 1.0 / rm
    return 0.5 * (s + np.sqrt(_discriminant(w, x)))


def coercivity(w: MorawetzWeight, x) -> np.ndarray:
    """Smallest eigenvalue of the Hessian of ``chi`` at ``x``.

    Evaluated as ``s - lambda2`` in a cancellation-free form:
    ``2 (b^2 / (r+ r-)) / (s + sqrt(disc))``.
    """
    _, _, rp, rm = w._legs(x)
    _, b = angle_functions(w, x)
    s = 1.0 / rp + 1.0 / rm
    return 2.0 * b * b / (rp * rm) / (s + np.sqrt(_discriminant(w, x)))


def b_squared(w: MorawetzWeight, x) -> np.ndarray:
    return angle_functions(w, x)[1] ** 2


# ---------------------------------------------------------------------------
# boundary sign certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightCertificate:
    c1: float
    samples: int
    min_flux: float
    argmin: tuple
    status: str
    seed: int
    tolerance: float = CERTIFICATE_TOL

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "argmin": [float(v) for v in self.argmin],
            "c1": self.c1,
            "min_flux": self.min_flux,
            "samples": self.samples,
            "seed": self.seed,
            "status": self.status,
            "tolerance": self.tolerance,
        }


def _axis_crossings(scene: Scene, w: MorawetzWeight):
    """Points where the focal line crosses each boundary, with inward normals.

    The certificate's minimum is typically attained exactly there, so these
    points are always added to the quasi-uniform samples.
    """
    far = 4.0 * (scene.bounding_radius + w.c1 + float(np.linalg.norm(w.origin)))
    pts, nrm = [], []
    for body in scene.bodies:
        o = np.stack([w.origin - far * w.axis, w.origin + far * w.axis])
        d = np.stack([w.axis, -w.axis])
        t = intersect_body(body, o, d, body.diameter / 256)
        for k in range(2):
            if np.isfinite(t[k]):
                p = o[k] + t[k] * d[k]
                pts.append(p)
                nrm.append(body.inward_normal(p))
    if not pts:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.array(pts), np.array(nrm)


def flux_sign(w: MorawetzWeight, points, inward_normals) -> np.ndarray:
    """``grad chi . (-n)`` with ``n`` pointing into the obstacle."""
    return -np.einsum("...i,...i->...", grad_chi(w, points), inward_normals)


def boundary_certificate(scene: Scene, w: MorawetzWeight,
                         samples: int = DEFAULT_BOUNDARY_SAMPLES, seed: int = 0) -> WeightCertificate:
    """Check ``grad chi . (-n) >= -tol`` on ``samples`` points per boundary.

    Samples are Fibonacci-sphere directions pushed to the boundary through the
    radial parametrization, plus the focal-line crossings. The sampling is
    deterministic; ``seed`` is carried for provenance only.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    pts, nrm = [], []
    for body in scene.bodies:
        p, n, _ = body.boundary_samples(samples)
        pts.append(p)
        nrm.append(n)
    ap, an = _axis_crossings(scene, w)
    pts = np.concatenate(pts + [ap])
    nrm = np.concatenate(nrm + [an])
    vals = flux_sign(w, pts, nrm)
    i = int(np.argmin(vals))
    m = float(vals[i]) + 0.0  # drop the sign of -0.0
    return WeightCertificate(
        c1=w.c1,
        samples=int(samples),
        min_flux=m,
        argmin=tuple(float(v) for v in pts[i]),
        status="pass" if m >= -CERTIFICATE_TOL else "fail",
        seed=int(seed),
    )


@dataclass(frozen=True)
class C1Search:
    """Outcome of :func:`minimal_c1_search`.

    ``monotone`` is False when some probe above the returned value failed,
    i.e. pass status was observed not to be monotone in ``c1``.
    """

    c1: float
    lower: float
    upper: float
    evaluations: int
    monotone: bool
    probes: tuple

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "evaluations": self.evaluations,
            "lower": self.lower,
            "monotone": self.monotone,
            "probes": [[float(c), bool(p)] for c, p in self.probes],
            "upper": self.upper,
        }


def _passes(scene, c1, samples) -> bool:
    try:
        return boundary_certificate(scene, MorawetzWeight.for_scene(scene, c1), samples).passed
    except AtFocus:
        return False


def minimal_c1_search(scene: Scene, tol: float = 1e-3, samples: int = 20_000,
                      upper: float | None = None, probes: int = 8) -> C1Search:
    """Bisection for the smallest certified ``c1`` on ``[gap/2, 1e3 A]``.

    After bisection, ``probes`` geometrically spaced values between the result
    and the upper bound are certified as well; any failure among them is
    reported through ``monotone=False`` rather than hidden.
    """
    lo = scene.gap / 2.0
    hi = C1_UPPER_FACTOR * scene.bounding_radius if upper is None else float(upper)
    evals = 1
    if not _passes(scene, hi, samples):
        raise NeverPasses(f"certificate fails at the search upper bound c1={hi:g}")
    if _passes(scene, lo, samples):
        result = lo
        evals += 1
    else:
        evals += 1
        a, b = lo, hi
        while b - a > tol:
            mid = 0.5 * (a + b)
            evals += 1
            if _passes(scene, mid, samples):
                b = mid
            else:
                a = mid
        result = b
    grid = np.geomspace(result, hi, probes + 2)[1:-1] if probes else np.array([])
    checks = tuple((float(c), _passes(scene, float(c), samples)) for c in grid)
    evals += len(checks)
    return C1Search(float(result), float(lo), float(hi), evals, all(p for _, p in checks), checks)


def minimal_c1(scene: Scene, tol: float = 1e-3, samples: int = 20_000, upper: float | None = None) -> float:
    return minimal_c1_search(scene, tol, samples, upper).c1


# ---------------------------------------------------------------------------
# coercivity set and m(alpha)
# ---------------------------------------------------------------------------

def _check_foci_outside(w: MorawetzWeight, A: float):
    for f in w.foci:
        if np.linalg.norm(f) <= A:
            raise ValueError(f"focus {f.tolist()} lies inside B(0, {A:g})")


def coercivity_on_set(w: MorawetzWeight, A: float, alpha: float, scene: Scene | None = None,
                      spacing: float = 0.05) -> tuple[float, int]:
    """Minimum Hessian eigenvalue over grid points of ``S(alpha)``.

    ``S(alpha) = Omega ∩ B(0, A) ∩ {b^2 >= alpha}``, sampled on a Cartesian
    grid. Returns ``(min eigenvalue, number of points in the set)``.
    """
    g = np.arange(-A, A + 0.5 * spacing, spacing)
    x = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    x = x[np.linalg.norm(x, axis=1) <= A]
    if scene is not None:
        x = x[~scene.inside(x, strict=False)]
    cp, cm = w.foci
    far = (np.linalg.norm(x - cp, axis=1) > w.focus_tol) & (np.linalg.norm(x - cm, axis=1) > w.focus_tol)
    x = x[far]
    x = x[b_squared(w, x) >= alpha]
    if x.shape[0] == 0:
        return math.inf, 0
    return float(np.min(coercivity(w, x))), int(x.shape[0])


def m_alpha(scene: Scene, w: MorawetzWeight, A: float, alpha: float, samples: int = 1_000_000,
            seed: int = 0):
    """Monte-Carlo volume of ``(Omega ∩ B(0, A)) \\ S(alpha)``.

    Returns ``(estimate, standard_error)``. A fixed seed reuses the same
    points for every ``alpha``, so estimates are monotone in ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if samples < 1:
        raise ValueError("samples must be positive")
    _check_foci_outside(w, A)

    def count(g, n):
        x = _rng.uniform_ball(g, n, np.zeros(3), A)
        keep = ~scene.inside(x, strict=False)
        return int(np.count_nonzero(keep & (b_squared(w, x) < alpha)))

    k = sum(_rng.chunked_map(count, samples, seed))
    f = k / samples
    vol = 4.0 / 3.0 * math.pi * A**3
    return vol * f, vol * math.sqrt(f * (1.0 - f) / samples)


def exterior_volume(scene: Scene, A: float, samples: int = 1_000_000, seed: int = 0):
    """Monte-Carlo volume of ``Omega ∩ B(0, A)``."""
    def count(g, n):
        x = _rng.uniform_ball(g, n, np.zeros(3), A)
        return int(np.count_nonzero(~scene.inside(x, strict=False)))

    k = sum(_rng.chunked_map(count, samples, seed))
    f = k / samples
    vol = 4.0 / 3.0 * math.pi * A**3
    return vol * f, vol * math.sqrt(f * (1.0 - f) / samples)
