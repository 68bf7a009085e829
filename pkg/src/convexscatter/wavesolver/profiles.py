"""Scale cores, profile data and the asymptotic comparisons built on them.

A scale core ``(lambda_n, t_n, x_n)`` transports reference data by
``(lambda^{-1/2} u0((x - x_n)/lambda), lambda^{-3/2} u1((x - x_n)/lambda))``,
an isometry of ``H^1 x L^2``. The Dirichlet projection onto the exterior
domain is replaced by a smooth cutoff that vanishes on a ``2h`` collar of the
obstacles; the energy it removes is reported with every profile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ResolutionTooCoarse, SupportClipped
from ..geometry import Ball, Scene
from .grid import ExteriorGrid, build_grid
from .solver import WaveField, energy, lp_norm, step

SUPPORT_FRACTION = 0.9
COLLAR_INNER = 2.0
COLLAR_OUTER = 4.0
MIN_CELLS_PER_SCALE = 16


@dataclass(frozen=True)
class ScaleCore:
    """One term ``(lambda_n, t_n, x_n)`` of a scale-core sequence."""

    n: int
    lam: float
    t: float = 0.0
    x: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "x", tuple(float(v) for v in np.asarray(self.x, dtype=float).reshape(3)))

    def conjugate(self) -> "ScaleCore":
        """The core whose transform inverts this one: ``(1/lambda, -t/lambda, -x/lambda)``."""
        return ScaleCore(self.n, 1.0 / self.lam, -self.t / self.lam, tuple(-v / self.lam for v in self.x))

    def transform_point(self, y) -> np.ndarray:
        """Reference point ``y`` to physical ``x_n + lambda y``."""
        return np.asarray(self.x) + self.lam * np.asarray(y, dtype=float)

    def describe(self) -> dict:
        return {"lam": self.lam, "n": self.n, "t": self.t, "x": list(self.x)}


def orthogonality(a: ScaleCore, b: ScaleCore) -> float:
    """``log(lam_a/lam_b + lam_b/lam_a + |t_a - t_b|/lam_a + |x_a - x_b|/lam_a)``.

    Two core sequences are orthogonal when this diverges along the sequence.
    Both scale ratios appear, so concentration and dilation are treated alike;
    equal cores give ``log 2``.
    """
    dx = float(np.linalg.norm(np.subtract(a.x, b.x)))
    return math.log(a.lam / b.lam + b.lam / a.lam + abs(a.t - b.t) / a.lam + dx / a.lam)


@dataclass(frozen=True)
class GaussianData:
    """Reference data ``u0 = amp0 exp(-|y|²/σ²)``, ``u1 = amp1 exp(-|y|²/σ²)``."""

    sigma: float = 0.5
    amp0: float = 1.0
    amp1: float = 0.0

    @property
    def support_radius(self) -> float:
        # exp(-25) ~ 1e-11: the data is numerically zero beyond 5 sigma
        return 5.0 * self.sigma

    def profile(self, y2):
        g = np.exp(-y2 / self.sigma**2)
        return self.amp0 * g, self.amp1 * g

    def gradient_norm2(self) -> float:
        """``∫ |∇u0|²`` in closed form."""
        return 3.0 * (math.pi / 2.0) ** 1.5 * self.sigma * self.amp0**2

    def velocity_norm2(self) -> float:
        """``∫ u1²`` in closed form."""
        return (math.pi / 2.0) ** 1.5 * self.sigma**3 * self.amp1**2


def obstacle_distance(scene: Scene, grid: ExteriorGrid) -> np.ndarray:
    """Distance from each cell centre to the nearest obstacle (``inf`` without obstacles).

    Exact for balls; ``phi / |∇phi|`` for other bodies, which is accurate on
    the thin collar where it is used.
    """
    X, Y, Z = grid.mesh()
    d = np.full(grid.shape, np.inf)
    for body in scene.bodies:
        if isinstance(body, Ball):
            c = body.center
            db = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) - body.radius
        else:
            pts = np.stack(np.broadcast_arrays(X, Y, Z), axis=-1)
            db = body.phi(pts) / np.linalg.norm(body.grad(pts), axis=-1)
        d = np.minimum(d, db)
    return d


def collar_cutoff(grid: ExteriorGrid) -> np.ndarray:
    """Smooth step from 0 at distance ``2h`` to 1 at ``4h`` from the obstacles."""
    if not grid.scene.bodies:
        return np.ones(grid.shape)
    d = obstacle_distance(grid.scene, grid)
    s = np.clip((d - COLLAR_INNER * grid.h) / ((COLLAR_OUTER - COLLAR_INNER) * grid.h), 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _check_support(grid: ExteriorGrid, centre, radius: float):
    lo, hi = grid.lo, grid.hi
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    c = np.asarray(centre, dtype=float)
    if np.any(np.abs(c - mid) + radius > SUPPORT_FRACTION * half):
        raise SupportClipped(
            f"support ball of radius {radius:g} at {c.tolist()} leaves {SUPPORT_FRACTION:g} of the box")


def make_profile_data(base: GaussianData, core: ScaleCore, grid: ExteriorGrid,
                      quintic: bool = False, collar: bool = True, cfl: float = 0.5) -> WaveField:
    """Transported and cut-off data as an initial :class:`WaveField`.

    ``notes`` on the returned field records the energy before and after the
    collar cutoff; ``collar_loss`` is the signed relative change, negative
    when the cutoff steepens data that reaches the collar.
    """
    lam = core.lam
    _check_support(grid, core.x, lam * base.support_radius)
    X, Y, Z = grid.mesh()
    x = core.x
    y2 = ((X - x[0]) ** 2 + (Y - x[1]) ** 2 + (Z - x[2]) ** 2) / lam**2
    u0, u1 = base.profile(y2)
    u0 = u0 * lam**-0.5
    u1 = u1 * lam**-1.5
    free = WaveField(grid, np.asarray(u0, dtype=float), np.asarray(u1, dtype=float) * np.ones(grid.shape),
                     quintic=quintic, cfl=cfl)
    e_full = energy(free)[0]
    if collar:
        cut = collar_cutoff(grid)
        u0 = u0 * cut
        u1 = u1 * cut
    f = WaveField.from_data(grid, u0 * np.ones(grid.shape), u1 * np.ones(grid.shape), quintic=quintic, cfl=cfl)
    e_cut = energy(f)[0]
    f.notes = {"energy_uncut": e_full, "energy": e_cut,
               "collar_loss": (e_full - e_cut) / e_full if e_full > 0 else 0.0}
    return f


def difference_energy(a: WaveField, b: WaveField, mask: np.ndarray) -> float:
    """``∫_Ω |∇(u_a - u_b)|² + |∂_t(u_a - u_b)|²`` restricted to cells of ``mask``.

    Face differences count only when both cells lie in ``mask``.
    """
    h = a.grid.h
    w = a.u - b.u
    wt = a.v - b.v
    grad = 0.0
    for ax in range(3):
        d = np.diff(w, axis=ax)
        both = np.logical_and(np.delete(mask, 0, axis=ax), np.delete(mask, -1, axis=ax))
        grad += float(np.sum(d[both] ** 2))
    return grad * h + float(np.sum(wt[mask] ** 2)) * h**3


def default_horizon(scene: Scene, base: GaussianData, core: ScaleCore) -> float:
    """Time for the transported data to sweep completely past the obstacles."""
    return float(np.linalg.norm(core.x)) + scene.bounding_radius + core.lam * base.support_radius


def compare_to_free(scene: Scene, base: GaussianData, cores, grid_for, horizon=None,
                    every: int = 5) -> list[float]:
    """Sup-in-time energy gap between exterior and free linear evolutions.

    Parameters
    ----------
    grid_for : callable
        ``grid_for(core) -> ExteriorGrid`` for ``scene``; the free run uses the
        same box without obstacles.
    horizon : callable, optional
        ``horizon(core) -> T``; defaults to :func:`default_horizon`.
    """
    out = []
    for core in cores:
        grid = grid_for(core)
        if grid.scene is not scene:
            raise ValueError("grid_for must build grids for the given scene")
        T = default_horizon(scene, base, core) if horizon is None else float(horizon(core))
        ext = make_profile_data(base, core, grid, quintic=False)
        free_grid = grid.unmasked()
        free = WaveField(free_grid, ext.u.copy(), ext.v.copy(), quintic=False, cfl=ext.cfl)
        dt = ext.dt
        steps = int(math.ceil(T / dt))
        gap = difference_energy(ext, free, grid.mask)
        for k in range(1, steps + 1):
            step(ext, dt)
            step(free, dt)
            if k % every == 0 or k == steps:
                gap = max(gap, difference_energy(ext, free, grid.mask))
        out.append(gap)
    return out


def nonconcentration_scan(scene: Scene, base: GaussianData, core: ScaleCore, C: float, T: float,
                          grid: ExteriorGrid, every: int = 2) -> float:
    """``sup ‖u(t)‖_{L⁶(Ω)}`` over ``C lambda <= |t - t_n| <= T`` for a linear profile.

    The evolution starts from the transported data at ``t = t_n``; with
    ``u1 = 0`` the solution is even in ``t - t_n``, so forward time suffices.
    """
    if core.lam < MIN_CELLS_PER_SCALE * grid.h:
        raise ResolutionTooCoarse(
            f"lambda={core.lam:g} is resolved by fewer than {MIN_CELLS_PER_SCALE} cells at h={grid.h:g}")
    if base.amp1 != 0.0:
        raise ValueError("the scan assumes data at rest (u1 = 0)")
    if grid.scene is not scene:
        raise ValueError("grid must be built for the given scene")
    f = make_profile_data(base, core, grid, quintic=False)
    dt = f.dt
    t0 = C * core.lam
    best = lp_norm(f, 6) if t0 <= 0 else 0.0
    steps = int(math.ceil(T / dt))
    for k in range(1, steps + 1):
        step(f, dt)
        if f.t >= t0 and (k % every == 0 or k == steps):
            best = max(best, lp_norm(f, 6))
    return best


def translation_grid(scene: Scene, base: GaussianData, core: ScaleCore, h: float,
                     pad: float = 3.0) -> ExteriorGrid:
    """Elongated box holding the obstacles and the transported data on the first axis.

    The transverse half-width is chosen so that wall reflections cannot reach
    the obstacles before :func:`default_horizon`.
    """
    A = scene.bounding_radius
    xn = float(core.x[0])
    r = core.lam * base.support_radius
    T = default_horizon(scene, base, core)
    lo_x = min(-A, xn - r) - pad
    hi_x = max(A, xn + r) + pad
    half_x = 0.5 * (hi_x - lo_x)
    # room for the support ball inside SUPPORT_FRACTION of the box
    # (one extra cell absorbs the rounding of the box to whole cells)
    grow = max(0.0, (abs(xn - 0.5 * (lo_x + hi_x)) + r) / SUPPORT_FRACTION - half_x) + h
    lo_x -= grow
    hi_x += grow
    Y = max(A + pad, r / SUPPORT_FRACTION + h, 0.5 * math.sqrt(max(T * T - xn * xn, 0.0)) + pad)
    return build_grid(scene, h, bounds=((lo_x, -Y, -Y), (hi_x, Y, Y)))
