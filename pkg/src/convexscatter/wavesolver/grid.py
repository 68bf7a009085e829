"""Cell-centred Cartesian grid over the exterior domain.

A cell belongs to the domain when its centre lies outside every obstacle.
The outermost layer of cells is held at zero and plays the role of the
homogeneous Dirichlet wall of the box, so its centres are where the
discrete solution vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ResolutionTooCoarse
from ..geometry import Scene

MIN_CELLS_PER_BODY = 8
GAP_CELLS = 8
SURFACE_POINTS_PER_CELL = 2.0


@dataclass
class SurfaceQuadrature:
    """Boundary points with inward normals, area weights and owning body index."""

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    body: np.ndarray

    @property
    def area(self) -> float:
        return float(self.weights.sum())


@dataclass
class ExteriorGrid:
    """Masked grid; ``lo`` is the lower corner of the box (not a cell centre)."""

    scene: Scene
    h: float
    lo: np.ndarray
    shape: tuple
    mask: np.ndarray
    active: np.ndarray
    boundary_cells: np.ndarray
    foot_points: np.ndarray
    cell_normals: np.ndarray
    surface: SurfaceQuadrature
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.h * np.asarray(self.shape)

    @property
    def L(self) -> float:
        """Largest box half-width."""
        return float(np.max(self.hi - self.lo)) / 2.0

    @property
    def cell_volume(self) -> float:
        return self.h**3

    def axes(self):
        """1-d arrays of cell-centre coordinates along x, y, z."""
        return tuple(self.lo[i] + self.h * (np.arange(self.shape[i]) + 0.5) for i in range(3))

    def mesh(self):
        """Broadcastable (sparse) coordinate arrays."""
        x, y, z = self.axes()
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def radius(self) -> np.ndarray:
        """``|x|`` at every cell centre (cached)."""
        if "radius" not in self._cache:
            x, y, z = self.mesh()
            self._cache["radius"] = np.sqrt(x * x + y * y + z * z)
        return self._cache["radius"]

    def index_coords(self, points) -> np.ndarray:
        """Fractional array indices of world points, shape ``(3, n)``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return ((p - self.lo) / self.h - 0.5).T

    def unmasked(self) -> "ExteriorGrid":
        """The same box with no obstacles (used for free-space comparison runs)."""
        return build_grid(Scene([]), self.h, bounds=(self.lo, self.hi))

    def describe(self) -> dict:
        return {
            "active_cells": int(self.active.sum()),
            "h": self.h,
            "hi": [float(v) for v in self.hi],
            "lo": [float(v) for v in self.lo],
            "shape": [int(n) for n in self.shape],
        }


def _check_resolution(scene: Scene, h: float):
    for i, body in enumerate(scene.bodies):
        span = 2.0 * float(np.min(body.semiaxes))
        if span / h < MIN_CELLS_PER_BODY:
            raise ResolutionTooCoarse(
                f"obstacle {i + 1} spans {span / h:.2f} cells at h={h:g}; "
                f"at least {MIN_CELLS_PER_BODY} are required")
    if len(scene.bodies) == 2 and not h < scene.gap / GAP_CELLS:
        raise ResolutionTooCoarse(f"h={h:g} must be below gap/{GAP_CELLS} = {scene.gap / GAP_CELLS:g}")


def _surface_quadrature(scene: Scene, h: float) -> SurfaceQuadrature:
    pts, nrm, wts, idx = [], [], [], []
    for i, body in enumerate(scene.bodies):
        # rough area from a coarse pass, then about SURFACE_POINTS_PER_CELL points per h^2
        _, _, w = body.boundary_samples(2000)
        n = max(2000, int(math.ceil(SURFACE_POINTS_PER_CELL * w.sum() / h**2)))
        p, nv, w = body.boundary_samples(n)
        pts.append(p)
        nrm.append(nv)
        wts.append(w)
        idx.append(np.full(n, i, dtype=int))
    if not pts:
        z = np.zeros((0, 3))
        return SurfaceQuadrature(z, z.copy(), np.zeros(0), np.zeros(0, dtype=int))
    return SurfaceQuadrature(np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts),
                             np.concatenate(idx))


def build_grid(scene: Scene, h: float, L: float | None = None, bounds=None) -> ExteriorGrid:
    """Mask a box by the obstacle level functions.

    Parameters
    ----------
    scene : Scene
    h : float
        Cell size.
    L : float, optional
        Half-width of the cube ``[-L, L]^3``.
    bounds : (lo, hi), optional
        Per-axis box corners, used instead of ``L`` for elongated boxes.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    _check_resolution(scene, h)
    if bounds is None:
        if L is None or not L > 0:
            raise ValueError("either L > 0 or bounds is required")
        lo_req, hi_req = np.full(3, -float(L)), np.full(3, float(L))
    else:
        lo_req, hi_req = (np.asarray(b, dtype=float).reshape(3) for b in bounds)
    shape = tuple(int(round((hi_req[i] - lo_req[i]) / h)) for i in range(3))
    if min(shape) < 3:
        raise ValueError("box is too small for the spacing")
    lo = lo_req.copy()

    mask = np.ones(shape, dtype=bool)
    y = lo[1] + h * (np.arange(shape[1]) + 0.5)
    z = lo[2] + h * (np.arange(shape[2]) + 0.5)
    yy, zz = np.meshgrid(y, z, indexing="ij")
    for body in scene.bodies:
        r = body.circumradius
        xs = lo[0] + h * (np.arange(shape[0]) + 0.5)
        near = np.flatnonzero(np.abs(xs - body.center[0]) <= r + h)
        for i in near:
            pts = np.stack([np.full_like(yy, xs[i]), yy, zz], axis=-1)
            mask[i] &= body.phi(pts) > 0

    active = mask.copy()
    active[0, :, :] = active[-1, :, :] = False
    active[:, 0, :] = active[:, -1, :] = False
    active[:, :, 0] = active[:, :, -1] = False

    # active cells with an obstacle-masked face neighbour
    obstacle = ~mask
    touch = np.zeros(shape, dtype=bool)
    for ax in range(3):
        sl_a = [slice(None)] * 3
        sl_b = [slice(None)] * 3
        sl_a[ax], sl_b[ax] = slice(1, None), slice(None, -1)
        touch[tuple(sl_a)] |= obstacle[tuple(sl_b)]
        touch[tuple(sl_b)] |= obstacle[tuple(sl_a)]
    bidx = np.argwhere(touch & active)
    centres = lo + h * (bidx + 0.5)
    feet = np.zeros_like(centres)
    normals = np.zeros_like(centres)
    for k, c in enumerate(centres):
        best = None
        for body in scene.bodies:
            p = body.project(c)
            d = float(np.linalg.norm(p - c))
            if best is None or d < best[0]:
                best = (d, p, body)
        feet[k] = best[1]
        normals[k] = best[2].inward_normal(best[1])

    return ExteriorGrid(scene, float(h), lo, shape, mask, active, bidx, feet, normals,
                        _surface_quadrature(scene, h))
