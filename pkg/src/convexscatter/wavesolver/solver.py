"""Leapfrog evolution of ``u_tt - Delta u + u^5 = 0`` on an :class:`ExteriorGrid`.

The velocity is staggered: after the first step ``v`` lives half a step
behind ``u`` (``field.lag = dt/2``). :func:`energy` evaluates the stored
pair, so its deviation from the conserved value is first order in ``dt``;
:func:`synchronized_velocity` removes the lag when a diagnostic needs
``u_t`` at the same instant as ``u``.

The gradient energy sums squared differences over cell faces, which is the
summation-by-parts partner of the 7-point Laplacian. With that pairing the
semi-discrete energy is conserved exactly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import Blowup, FociInsideObstacle
from ..morawetz import MorawetzWeight, grad_chi
from .grid import ExteriorGrid

MAX_CFL = 0.9
BLOWUP_LIMIT = 1e6
GUARD_EVERY = 10
DEFAULT_EVERY = 5
FLUX_OFFSET_CELLS = 1.5

CSV_COLUMNS = ("t", "E", "E_kin", "E_grad", "L6", "local_E_A", "flux", "flux_avg",
               "strichartz_acc", "morawetz_lhs", "morawetz_rhs")


@dataclass
class WaveField:
    """State ``(u, v)`` at time ``t``; ``lag`` is how far ``v`` trails ``u``."""

    grid: ExteriorGrid
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    quintic: bool = True
    lag: float = 0.0
    cfl: float = 0.5
    steps: int = 0
    notes: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, grid: ExteriorGrid, quintic: bool = True, cfl: float = 0.5) -> "WaveField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape), quintic=quintic, cfl=cfl)

    @classmethod
    def from_data(cls, grid: ExteriorGrid, u0, u1, quintic: bool = True, cfl: float = 0.5) -> "WaveField":
        a = grid.active
        u = np.where(a, np.asarray(u0, dtype=float), 0.0)
        v = np.where(a, np.asarray(u1, dtype=float), 0.0)
        return cls(grid, u, v, quintic=quintic, cfl=cfl)

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.h / math.sqrt(3.0)

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.u.copy(), self.v.copy(), self.t, self.quintic, self.lag,
                         self.cfl, self.steps, dict(self.notes))


def laplacian(u: np.ndarray, h: float, out: np.ndarray | None = None) -> np.ndarray:
    """7-point Laplacian; cells beyond the array count as zero."""
    if out is None:
        out = np.empty_like(u)
    np.multiply(u, -6.0, out=out)
    out[1:] += u[:-1]
    out[:-1] += u[1:]
    out[:, 1:] += u[:, :-1]
    out[:, :-1] += u[:, 1:]
    out[:, :, 1:] += u[:, :, :-1]
    out[:, :, :-1] += u[:, :, 1:]
    out *= 1.0 / (h * h)
    return out


def acceleration(field: WaveField, source=None, out: np.ndarray | None = None) -> np.ndarray:
    """``Delta u - u^5 (+ source)`` on active cells, zero elsewhere."""
    a = laplacian(field.u, field.grid.h, out)
    if field.quintic:
        a -= field.u**5
    if source is not None:
        a += source(field.t)
    a *= field.grid.active
    return a


def step(field: WaveField, dt: float | None = None, source=None) -> WaveField:
    """Advance ``field`` in place by one leapfrog step and return it.

    ``source(t)``, when given, returns a forcing array added to the
    acceleration (used by manufactured-solution tests).
    """
    h = field.grid.h
    dt = field.dt if dt is None else float(dt)
    if dt <= 0 or dt > MAX_CFL * h / math.sqrt(3.0) * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} violates 0 < dt <= {MAX_CFL}*h/sqrt(3)")
    a = acceleration(field, source)
    field.v += (field.lag + 0.5 * dt) * a
    field.u += dt * field.v
    field.t += dt
    field.lag = 0.5 * dt
    field.steps += 1
    if field.steps % GUARD_EVERY == 0:
        _guard(field)
    return field


def _guard(field: WaveField):
    m = float(np.max(np.abs(field.u)))
    if not math.isfinite(m) or m > BLOWUP_LIMIT:
        raise Blowup(f"max|u| = {m:g} at t = {field.t:g}; check the CFL number and masking")


def synchronized_velocity(field: WaveField, source=None) -> np.ndarray:
    """``u_t`` at the time of ``u``: the stored velocity advanced by the lag."""
    if field.lag == 0.0:
        return field.v.copy()
    return field.v + field.lag * acceleration(field, source)


def energy(field: WaveField, synchronized: bool = False):
    """``(total, kinetic, gradient, L6_sixth)`` with total = ½ gradient + ½ kinetic + ⅙ L6_sixth.

    ``kinetic = ∫ v²``, ``gradient = ∫ |∇u|²`` (face differences) and
    ``L6_sixth = ∫ u⁶``, all by midpoint quadrature over the domain cells.
    A linear field (``quintic=False``) has no potential term in its total.
    """
    g = field.grid
    dv = g.cell_volume
    v = synchronized_velocity(field) if synchronized else field.v
    kin = float(np.sum(v * v)) * dv
    grad = _face_energy(field.u).sum() * g.h
    l6 = float(np.sum(field.u**6)) * dv
    pot = l6 / 6.0 if field.quintic else 0.0
    return 0.5 * grad + 0.5 * kin + pot, kin, float(grad), l6


def _face_energy(u: np.ndarray) -> np.ndarray:
    """Per-cell sum of squared differences across its three upper faces."""
    out = np.zeros_like(u)
    d = np.diff(u, axis=0)
    out[:-1] += d * d
    out[-1] += u[-1] ** 2
    d = np.diff(u, axis=1)
    out[:, :-1] += d * d
    out[:, -1] += u[:, -1] ** 2
    d = np.diff(u, axis=2)
    out[:, :, :-1] += d * d
    out[:, :, -1] += u[:, :, -1] ** 2
    # faces below index 0 are between zero-valued cells and the outside
    out[0] += u[0] ** 2
    out[:, 0] += u[:, 0] ** 2
    out[:, :, 0] += u[:, :, 0] ** 2
    return out


def local_energy_density(u: np.ndarray, h: float) -> np.ndarray:
    """``|∇u|² + u⁶`` per cell, with the gradient from the cell's upper faces."""
    return _face_energy(u) / (h * h) + u**6


def lp_norm(field: WaveField, p: float) -> float:
    return float(np.sum(np.abs(field.u) ** p) * field.grid.cell_volume) ** (1.0 / p)


# ---------------------------------------------------------------------------
# boundary flux
# ---------------------------------------------------------------------------

def normal_derivative(field: WaveField, u: np.ndarray | None = None) -> np.ndarray:
    """``∂_n u`` at the surface quadrature points (``n`` into the obstacle).

    Trilinear samples at distances ``d, 2d, 3d`` into the domain along ``-n``
    are fitted by a quadratic and differentiated at the surface.
    """
    g = field.grid
    s = g.surface
    if s.points.shape[0] == 0:
        return np.zeros(0)
    u = field.u if u is None else u
    d = FLUX_OFFSET_CELLS * g.h
    f = []
    for k in (1, 2, 3):
        pts = s.points - k * d * s.normals
        f.append(ndimage.map_coordinates(u, g.index_coords(pts), order=1, mode="constant", cval=0.0))
    # derivative along -n, then flip to the obstacle-pointing normal
    return -(-2.5 * f[0] + 4.0 * f[1] - 1.5 * f[2]) / d


def boundary_flux(field: WaveField) -> float:
    """``∫_{∂Ω} |∂_n u|²`` by the surface quadrature."""
    dn = normal_derivative(field)
    return float(np.sum(field.grid.surface.weights * dn * dn))


# ---------------------------------------------------------------------------
# Morawetz multiplier terms on the grid
# ---------------------------------------------------------------------------

@dataclass
class _WeightFields:
    units: tuple
    inv_r: tuple
    lap: np.ndarray
    grad: np.ndarray
    surface_dn_chi: np.ndarray
    foci_coords: np.ndarray


def _weight_fields(grid: ExteriorGrid, w: MorawetzWeight) -> _WeightFields:
    key = ("weight", w.c1, tuple(w.origin), tuple(w.axis))
    if key in grid._cache:
        return grid._cache[key]
    X = grid.mesh()
    units, inv = [], []
    for f in w.foci:
        d = [X[i] - f[i] for i in range(3)]
        r = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if np.any(r[grid.active] < w.focus_tol):
            raise FociInsideObstacle("a focus coincides with a cell centre; shift c1 or the grid")
        ir = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
        units.append(tuple(di * ir for di in d))
        inv.append(ir)
    lap = 2.0 * (inv[0] + inv[1])
    grad = np.stack([units[0][i] + units[1][i] for i in range(3)])
    s = grid.surface
    dn_chi = np.einsum("ij,ij->i", grad_chi(w, s.points), s.normals) if s.points.shape[0] else np.zeros(0)
    fc = np.stack([grid.index_coords(f)[:, 0] for f in w.foci], axis=1)
    for k, f in enumerate(w.foci):
        base = np.floor(fc[:, k]).astype(int)
        for off in np.ndindex(2, 2, 2):
            idx = base + np.array(off)
            if np.any(idx < 0) or np.any(idx >= np.array(grid.shape)) or not grid.active[tuple(idx)]:
                raise FociInsideObstacle(
                    f"focus {f.tolist()} is masked or too close to an obstacle or the box wall")
    wf = _WeightFields(tuple(units), tuple(inv), lap, grad, dn_chi, fc)
    grid._cache[key] = wf
    return wf


def _central_gradient(u: np.ndarray, h: float):
    g = []
    for ax in range(3):
        d = np.zeros_like(u)
        hi = [slice(None)] * 3
        lo = [slice(None)] * 3
        mid = [slice(None)] * 3
        hi[ax], lo[ax], mid[ax] = slice(2, None), slice(None, -2), slice(1, -1)
        d[tuple(mid)] = (u[tuple(hi)] - u[tuple(lo)]) / (2.0 * h)
        g.append(d)
    return g


def morawetz_terms(field: WaveField, w: MorawetzWeight, ut: np.ndarray | None = None):
    """Instantaneous ``(bracket, rate)`` of the momentum identity.

    ``bracket = ∫ -u_t ∇u·∇χ - ½ Δχ u u_t`` and ``rate`` is the integrand
    in time of the right-hand side: the Hessian term, the point masses
    ``2π (u(c)² + u(-c)²)``, the ``⅓ ∫ u⁶ Δχ`` term and the boundary term
    ``-½ ∫ |∂_n u|² ∂_n χ``.
    """
    g = field.grid
    wf = _weight_fields(g, w)
    u = field.u
    ut = synchronized_velocity(field) if ut is None else ut
    dv = g.cell_volume
    gu = _central_gradient(u, g.h)
    gdot = gu[0] * wf.grad[0] + gu[1] * wf.grad[1] + gu[2] * wf.grad[2]
    bracket = float(np.sum(g.active * (-ut * gdot - 0.5 * wf.lap * u * ut))) * dv
    g2 = gu[0] ** 2 + gu[1] ** 2 + gu[2] ** 2
    hess = np.zeros_like(u)
    for un, ir in zip(wf.units, wf.inv_r):
        proj = gu[0] * un[0] + gu[1] * un[1] + gu[2] * un[2]
        hess += (g2 - proj * proj) * ir
    bulk = float(np.sum(g.active * (hess + u**6 * wf.lap / 3.0))) * dv
    uc = ndimage.map_coordinates(u, wf.foci_coords, order=1, mode="constant", cval=0.0)
    point = 2.0 * math.pi * float(np.sum(uc * uc))
    dn = normal_derivative(field)
    bdry = -0.5 * float(np.sum(g.surface.weights * dn * dn * wf.surface_dn_chi))
    return bracket, bulk + point + bdry


# ---------------------------------------------------------------------------
# evolution with diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsSeries:
    """Sampled diagnostics of one evolution (see ``CSV_COLUMNS``)."""

    A: float
    weight: MorawetzWeight | None = None
    t: list = field(default_factory=list)
    E: list = field(default_factory=list)
    E_kin: list = field(default_factory=list)
    E_grad: list = field(default_factory=list)
    L6: list = field(default_factory=list)
    local_E_A: list = field(default_factory=list)
    flux: list = field(default_factory=list)
    flux_avg: list = field(default_factory=list)
    strichartz_acc: list = field(default_factory=list)
    morawetz_lhs: list = field(default_factory=list)
    morawetz_rhs: list = field(default_factory=list)
    _l10: list = field(default_factory=list, repr=False)
    _rate: list = field(default_factory=list, repr=False)
    _flux_int: float = field(default=0.0, repr=False)

    def __len__(self):
        return len(self.t)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def record(self, f: WaveField, grid_radius: np.ndarray):
        tot, kin, grad, l6 = energy(f)
        self.t.append(f.t)
        self.E.append(tot)
        self.E_kin.append(kin)
        self.E_grad.append(grad)
        self.L6.append(l6 ** (1.0 / 6.0))
        dens = local_energy_density(f.u, f.grid.h)
        self.local_E_A.append(float(np.sum(dens[grid_radius <= self.A])) * f.grid.cell_volume)
        fl = boundary_flux(f)
        self.flux.append(fl)
        l10 = math.sqrt(float(np.sum(f.u**10)) * f.grid.cell_volume)
        if len(self.t) > 1:
            dt = self.t[-1] - self.t[-2]
            self._flux_int += 0.5 * dt * (self.flux[-2] + fl)
            acc = self.strichartz_acc[-1] + 0.5 * dt * (self._l10[-1] + l10)
        else:
            acc = 0.0
        self._l10.append(l10)
        self.strichartz_acc.append(acc)
        span = self.t[-1] - self.t[0]
        self.flux_avg.append(self._flux_int / span if span > 0 else fl)
        if self.weight is not None:
            bracket, rate = morawetz_terms(f, self.weight)
            self.morawetz_lhs.append(bracket)
            if self._rate:
                dt = self.t[-1] - self.t[-2]
                self.morawetz_rhs.append(self.morawetz_rhs[-1] + 0.5 * dt * (self._rate[-1] + rate))
            else:
                self.morawetz_rhs.append(0.0)
            self._rate.append(rate)
        else:
            self.morawetz_lhs.append(math.nan)
            self.morawetz_rhs.append(math.nan)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for i in range(len(self.t)):
            wr.writerow([repr(float(getattr(self, c)[i])) for c in CSV_COLUMNS])
        return buf.getvalue()

    def energy_drift(self) -> float:
        """``max |E(t) - E(0)| / E(0)`` over the samples."""
        E = self.array("E")
        if E.size == 0 or E[0] == 0:
            return 0.0
        return float(np.max(np.abs(E - E[0])) / abs(E[0]))


def evolve(field: WaveField, steps: int, dt: float | None = None, every: int = DEFAULT_EVERY,
           A: float | None = None, weight: MorawetzWeight | None = None, source=None) -> DiagnosticsSeries:
    """Run ``steps`` leapfrog steps, sampling diagnostics every ``every`` steps.

    ``A`` is the radius of the local-energy ball (default: the scene's
    bounding radius). With ``weight`` set, the momentum-identity bracket and
    the time-integrated right-hand side are recorded as well.
    """
    if steps < 0 or every < 1:
        raise ValueError("steps must be >= 0 and every >= 1")
    g = field.grid
    A = g.scene.bounding_radius if A is None else float(A)
    series = DiagnosticsSeries(A=A, weight=weight)
    radius = g.radius()
    series.record(field, radius)
    for k in range(1, steps + 1):
        step(field, dt, source)
        if k % every == 0 or k == steps:
            series.record(field, radius)
    _guard(field)
    return series


def _trapezoid_until(t: np.ndarray, y: np.ndarray, T: float) -> float:
    if T <= t[0]:
        return 0.0
    if T > t[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"T={T:g} exceeds the simulated range {t[-1]:g}")
    keep = t <= T
    tt = np.append(t[keep], T) if t[keep][-1] < T else t[keep]
    yy = np.interp(tt, t, y)
    return float(np.sum(0.5 * np.diff(tt) * (yy[1:] + yy[:-1])))


def flux_time_average(series: DiagnosticsSeries, T: float) -> float:
    """``(1/T) ∫_0^T ∫_{∂Ω} |∂_n u|²`` by the trapezoid rule over the samples."""
    if not T > 0:
        raise ValueError("T must be positive")
    t = series.array("t") - series.t[0]
    return _trapezoid_until(t, series.array("flux"), T) / T


def local_energy_average(series: DiagnosticsSeries, A: float, T: float) -> float:
    """``(1/T) ∫_0^T ∫_{Ω∩B(0,A)} |∇u|² + u⁶``; ``A`` must match the recorded radius."""
    if not math.isclose(A, series.A):
        raise ValueError(f"series was recorded with A={series.A:g}, not {A:g}")
    if not T > 0:
        raise ValueError("T must be positive")
    t = series.array("t") - series.t[0]
    return _trapezoid_until(t, series.array("local_E_A"), T) / T


def _sample_index(series: DiagnosticsSeries, t: float) -> int:
    ts = series.array("t")
    i = int(np.argmin(np.abs(ts - t)))
    tol = 0.51 * (ts[1] - ts[0]) if ts.size > 1 else 0.0
    if abs(ts[i] - t) > tol:
        raise ValueError(f"time {t:g} is outside the sampled range")
    return i


def morawetz_residual(series: DiagnosticsSeries, w: MorawetzWeight, window):
    """``(lhs, rhs, mismatch)`` of the momentum identity over ``window``.

    The mismatch is ``|lhs - rhs| / max(|lhs|, |rhs|, E(0))``.
    """
    if series.weight is None or series.weight.c1 != w.c1 or not (
            np.allclose(series.weight.origin, w.origin) and np.allclose(series.weight.axis, w.axis)):
        raise ValueError("the series was not recorded with this weight")
    i0, i1 = (_sample_index(series, s) for s in window)
    lhs = series.morawetz_lhs[i1] - series.morawetz_lhs[i0]
    rhs = series.morawetz_rhs[i1] - series.morawetz_rhs[i0]
    scale = max(abs(lhs), abs(rhs), abs(series.E[0]))
    if scale == 0:
        return 0.0, 0.0, 0.0
    return lhs, rhs, abs(lhs - rhs) / scale


def flux_integral(series: DiagnosticsSeries, window) -> float:
    t = series.array("t")
    a, b = window
    return _trapezoid_until(t, series.array("flux"), b) - _trapezoid_until(t, series.array("flux"), a)


def apriori_ratio(series: DiagnosticsSeries, window) -> float:
    """``∫∫ |∂_n u|² / ((1 + Δt) E)`` over ``window``; 0 for zero energy."""
    E = abs(series.E[0])
    if E == 0:
        return 0.0
    return flux_integral(series, window) / ((1.0 + window[1] - window[0]) * E)


# Fitted once for two unit balls at (+-2, 0, 0) on h = 0.2, L = 6: linear
# Gaussian and shell pulses, windows of length 1, 2 and 4 inside [0, 6]. The
# largest ratio seen was 0.184; the frozen value leaves headroom for regression.
APRIORI_FLUX_C = 0.25


def apriori_flux_bound_check(series: DiagnosticsSeries, window, C: float = APRIORI_FLUX_C):
    """``(flux integral, C (1 + Δt) E)``; the bound holds when the first is not larger."""
    return flux_integral(series, window), C * (1.0 + window[1] - window[0]) * abs(series.E[0])
