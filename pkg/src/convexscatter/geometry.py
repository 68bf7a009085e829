"""Strictly convex obstacles, ray/boundary intersection and the trapped segment.

Obstacles come from one analytic family: the superellipsoid
``sum |y_i / a_i|^p = 1`` in a body frame ``y = R^T (x - center)``, with the
ellipsoid (``p = 2``) and the ball (equal semiaxes) as special cases. The level
function is scaled so that it is roughly a signed distance near the boundary;
it is negative inside, and its gradient and Hessian are exact.

Normals returned by this module point *into* the obstacle (outward for the
exterior domain), which is the convention of the multiplier identities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import optimize

from . import rng as _rng
from .errors import DegenerateRay, NoConvergence, OffSurface, ScatterError, TangentHit

BOUNDARY_RTOL = 1e-9
TANGENCY_TOL = 1e-7
BRACKET_DIVISOR = 64
DOMAIN_MARGIN_DIAMETERS = 4.0


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _angle(u, v) -> float:
    """Angle between two vectors, accurate near 0 and pi."""
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))


class ConvexBody:
    """Superellipsoid ``sum |y_i/a_i|^p <= 1`` with even ``p >= 2``.

    Parameters
    ----------
    center : array_like, shape (3,)
    semiaxes : array_like, shape (3,)
    exponent : int
        Even integer ``>= 2``. Values above 2 give bodies whose curvature
        vanishes at the face centres (see :func:`min_curvature`).
    rotation : array_like, shape (3, 3), optional
        Orthonormal frame; columns are the body axes in world coordinates.
    """

    kind = "superellipsoid"

    def __init__(self, center, semiaxes, exponent=4, rotation=None):
        self.center = _as_points(center).reshape(3)
        self.semiaxes = _as_points(semiaxes).reshape(3)
        self.exponent = int(exponent)
        if self.exponent < 2 or self.exponent % 2:
            raise ValueError(f"exponent must be an even integer >= 2, got {exponent}")
        if np.any(self.semiaxes <= 0):
            raise ValueError("semiaxes must be positive")
        rot = np.eye(3) if rotation is None else _as_points(rotation).reshape(3, 3)
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-10) or np.linalg.det(rot) < 0:
            raise ValueError("rotation must be a proper orthonormal frame")
        self.rotation = rot
        # level-function scale: keeps |grad phi| of order one on the boundary
        self._scale = float(np.prod(self.semiaxes) ** (1.0 / 3.0))
        for arr in (self.center, self.semiaxes, self.rotation):
            arr.setflags(write=False)

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"

    # -- level function -------------------------------------------------
    def to_local(self, x) -> np.ndarray:
        return (_as_points(x) - self.center) @ self.rotation

    def phi(self, x) -> np.ndarray:
        y = self.to_local(x) / self.semiaxes
        p = self.exponent
        return self._scale / p * (np.sum(np.abs(y) ** p, axis=-1) - 1.0)

    def grad(self, x) -> np.ndarray:
        y = self.to_local(x) / self.semiaxes
        p = self.exponent
        g = self._scale * np.sign(y) * np.abs(y) ** (p - 1) / self.semiaxes
        return g @ self.rotation.T

    def hess(self, x) -> np.ndarray:
        y = self.to_local(x) / self.semiaxes
        p = self.exponent
        d = self._scale * (p - 1) * np.abs(y) ** (p - 2) / self.semiaxes**2
        R = self.rotation
        return np.einsum("ij,...j,kj->...ik", R, d, R)

    # -- geometry ---------------------------------------------------------
    @property
    def circumradius(self) -> float:
        if self.exponent == 2:
            return float(self.semiaxes.max())
        return float(np.linalg.norm(self.semiaxes))

    @property
    def diameter(self) -> float:
        return 2.0 * self.circumradius

    @property
    def boundary_tol(self) -> float:
        return BOUNDARY_RTOL * self.diameter

    def radial_distance(self, u) -> np.ndarray:
        """Distance from the centre to the boundary along world unit vectors ``u``."""
        w = _as_points(u) @ self.rotation
        return np.sum(np.abs(w / self.semiaxes) ** self.exponent, axis=-1) ** (-1.0 / self.exponent)

    def radial_point(self, u) -> np.ndarray:
        u = _as_points(u)
        return self.center + u * self.radial_distance(u)[..., None]

    def inward_normal(self, x) -> np.ndarray:
        g = self.grad(x)
        return -g / np.linalg.norm(g, axis=-1, keepdims=True)

    def contains(self, x, strict=True) -> np.ndarray:
        f = self.phi(x)
        return f < -self.boundary_tol if strict else f <= self.boundary_tol

    def principal_curvatures(self, x) -> np.ndarray:
        """The two principal curvatures at boundary point(s) ``x`` (ascending)."""
        x = _as_points(x)
        g = self.grad(x)
        gn = np.linalg.norm(g, axis=-1, keepdims=True)
        nu = g / gn
        P = np.eye(3) - nu[..., :, None] * nu[..., None, :]
        S = P @ self.hess(x) @ P / gn[..., None]
        ev = np.linalg.eigvalsh(S)
        # one eigenvalue belongs to the normal direction and is ~0; drop it
        idx = np.argsort(np.abs(ev), axis=-1)[..., 1:]
        k = np.take_along_axis(ev, idx, axis=-1)
        return np.sort(k, axis=-1)

    def boundary_samples(self, n: int):
        """Quasi-uniform boundary points with surface-area weights.

        Returns ``(points, inward_normals, weights)``; the weights integrate
        functions over the surface (``sum(weights)`` approximates the area).
        """
        u = _rng.fibonacci_sphere(n) @ self.rotation.T
        rho = self.radial_distance(u)
        pts = self.center + u * rho[:, None]
        n_in = self.inward_normal(pts)
        cos = -np.einsum("ij,ij->i", u, n_in)
        w = (4.0 * np.pi / n) * rho**2 / cos
        return pts, n_in, w

    def project(self, y, tol=1e-14, maxiter=100) -> np.ndarray:
        """Closest boundary point to an exterior point ``y`` (KKT Newton)."""
        y = _as_points(y).reshape(3)
        d = y - self.center
        if np.linalg.norm(d) == 0:
            d = self.rotation[:, 0]
        x = self.radial_point(_normalize(d))
        g = self.grad(x)
        mu = np.linalg.norm(y - x) / np.linalg.norm(g)

        def residual(x, mu):
            return np.concatenate([x - y + mu * self.grad(x), [self.phi(x)]])

        r = residual(x, mu)
        scale = max(1.0, np.linalg.norm(y - self.center))
        for _ in range(maxiter):
            if np.linalg.norm(r) < tol * scale:
                break
            J = np.zeros((4, 4))
            J[:3, :3] = np.eye(3) + mu * self.hess(x)
            J[:3, 3] = self.grad(x)
            J[3, :3] = self.grad(x)
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            while lam > 1e-6:
                xn, mun = x + lam * step[:3], mu + lam * step[3]
                rn = residual(xn, mun)
                if np.linalg.norm(rn) < np.linalg.norm(r) or lam < 2e-6:
                    break
                lam *= 0.5
            x, mu, r = xn, mun, rn
        if np.linalg.norm(r) > 1e-8 * scale or self.contains(y, strict=False):
            res = optimize.minimize(
                lambda z: float(np.sum((z - y) ** 2)), x, method="SLSQP",
                constraints=[{"type": "eq", "fun": lambda z: float(self.phi(z))}],
                options={"ftol": 1e-15, "maxiter": 500},
            )
            x = res.x
        return x

    # -- transforms / serialization ----------------------------------------
    def _copy(self, center=None, semiaxes=None):
        center = self.center if center is None else center
        semiaxes = self.semiaxes if semiaxes is None else semiaxes
        return ConvexBody(center, semiaxes, self.exponent, self.rotation)

    def scaled(self, s: float) -> "ConvexBody":
        return self._copy(self.center * s, self.semiaxes * s)

    def translated(self, v) -> "ConvexBody":
        return self._copy(self.center + _as_points(v))

    def describe(self) -> str:
        c = ",".join(repr(float(v)) for v in self.center)
        a = ",".join(repr(float(v)) for v in self.semiaxes)
        parts = [self.kind, f"center={c}", f"semiaxes={a}"]
        if self.kind == "superellipsoid":
            parts.append(f"exponent={self.exponent}")
        if not np.array_equal(self.rotation, np.eye(3)):
            parts.append("rotation=" + ",".join(repr(float(v)) for v in self.rotation.ravel()))
        return " ".join(parts)


class Ellipsoid(ConvexBody):
    kind = "ellipsoid"

    def __init__(self, center, semiaxes, rotation=None):
        super().__init__(center, semiaxes, 2, rotation)

    def _copy(self, center=None, semiaxes=None):
        center = self.center if center is None else center
        semiaxes = self.semiaxes if semiaxes is None else semiaxes
        return Ellipsoid(center, semiaxes, self.rotation)


class Ball(Ellipsoid):
    kind = "ball"

    def __init__(self, center, radius):
        super().__init__(center, [radius] * 3)
        self.radius = float(radius)

    def _copy(self, center=None, semiaxes=None):
        center = self.center if center is None else center
        radius = self.radius if semiaxes is None else float(np.asarray(semiaxes)[0])
        return Ball(center, radius)

    def describe(self) -> str:
        c = ",".join(repr(float(v)) for v in self.center)
        return f"ball center={c} radius={self.radius!r}"

    def project(self, y, tol=None, maxiter=None):
        d = _as_points(y) - self.center
        return self.center + self.radius * d / np.linalg.norm(d)


def min_curvature(body: ConvexBody, samples: int = 10_000) -> float:
    """Smallest principal curvature over quasi-uniform boundary samples."""
    pts, _, _ = body.boundary_samples(samples)
    return float(body.principal_curvatures(pts).min())


def surface_normal(body: ConvexBody, x) -> np.ndarray:
    """Unit normal at boundary point ``x``, pointing into the obstacle."""
    x = _as_points(x).reshape(3)
    if abs(float(body.phi(x))) > body.boundary_tol:
        raise OffSurface(f"point {x.tolist()} is not on the boundary (phi={float(body.phi(x)):.3e})")
    return body.inward_normal(x)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _as_points(self.origin).reshape(3)
        d = _as_points(self.direction).reshape(3)
        nd = np.linalg.norm(d)
        if not np.isfinite(nd) or nd == 0:
            raise ValueError("ray direction must be a nonzero vector")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / nd)

    def at(self, t):
        return self.origin + np.multiply.outer(t, self.direction)


@dataclass(frozen=True)
class Hit:
    time: float
    point: np.ndarray
    normal: np.ndarray
    obstacle: int  # 1-based


@dataclass(frozen=True)
class TrappedSegment:
    p: np.ndarray
    q: np.ndarray
    gap: float
    normality_defect: float
    line_defect: float
    far_points: tuple

    @property
    def axis(self) -> np.ndarray:
        return (self.q - self.p) / self.gap

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p + self.q)


class Scene:
    """Up to two disjoint convex bodies; the trapped segment is computed lazily.

    Tracing also accepts zero or one body (for escape-time sanity checks), but
    the trapped segment and the multiplier tools require exactly two.
    """

    def __init__(self, bodies):
        self.bodies = tuple(bodies)
        if len(self.bodies) > 2:
            raise ValueError("at most two obstacles are supported")

    def __repr__(self):
        return f"Scene({list(self.bodies)!r})"

    @property
    def bounding_radius(self) -> float:
        if not self.bodies:
            return 0.0
        return max(float(np.linalg.norm(b.center)) + b.circumradius for b in self.bodies)

    @cached_property
    def trapped(self) -> TrappedSegment:
        return trapped_ray(self)

    @property
    def gap(self) -> float:
        return self.trapped.gap

    @property
    def bracket_step(self) -> float:
        if len(self.bodies) == 2:
            return self.gap / BRACKET_DIVISOR
        if self.bodies:
            return min(b.diameter for b in self.bodies) / BRACKET_DIVISOR
        return 1.0

    def inside(self, x, strict=True) -> np.ndarray:
        x = _as_points(x)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for b in self.bodies:
            out |= b.contains(x, strict=strict)
        return out

    def scaled(self, s: float) -> "Scene":
        return Scene([b.scaled(s) for b in self.bodies])

    def describe(self) -> dict:
        return {f"body{i + 1}": b.describe() for i, b in enumerate(self.bodies)}


def two_balls(separation: float = 4.0, radius: float = 1.0) -> Scene:
    """Two equal balls centred at ``(+-separation/2, 0, 0)``."""
    h = separation / 2.0
    return Scene([Ball([-h, 0, 0], radius), Ball([h, 0, 0], radius)])


# ---------------------------------------------------------------------------
# ray / boundary intersection
# ---------------------------------------------------------------------------

def _sphere_chord(center, radius, o, d):
    oc = o - center
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - radius**2
    disc = b * b - c
    ok = disc > 0
    s = np.sqrt(np.where(ok, disc, 0.0))
    return ok, -b - s, -b + s


def intersect_body(body: ConvexBody, o, d, step: float, skip=None) -> np.ndarray:
    """First ``t > 0`` with ``phi(o + t d) = 0`` for each ray; ``inf`` when none.

    Coarse bracketing at spacing ``<= step`` over the chord of the body's
    circumscribed sphere, then bisection and a bracket-safeguarded Newton
    polish. When no sample is inside, the convexity of ``phi`` along the line
    is used to look for a thin intersection between samples. Rays flagged in
    ``skip`` (typically leaving this body's boundary) report ``inf``.
    """
    o = np.atleast_2d(_as_points(o))
    d = np.atleast_2d(_as_points(d))
    n = o.shape[0]
    out = np.full(n, np.inf)
    ok, t_in, t_out = _sphere_chord(body.center, body.circumradius * (1 + 1e-9), o, d)
    ok &= t_out > 0
    if skip is not None:
        ok &= ~np.asarray(skip, dtype=bool)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return out
    o, d = o[idx], d[idx]
    lo = np.maximum(t_in[idx], 0.0)
    hi = t_out[idx]
    k = max(8, int(math.ceil(2 * body.circumradius / step)) + 1)
    frac = np.linspace(0.0, 1.0, k)
    ts = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    g = body.phi(o[:, None, :] + ts[..., None] * d[:, None, :])
    neg = g < 0
    has = neg.any(axis=1)
    first = np.argmax(neg, axis=1)
    a = np.where(has, ts[np.arange(len(idx)), np.maximum(first - 1, 0)], 0.0)
    b = np.where(has, ts[np.arange(len(idx)), first], 0.0)

    # thin intersections: minimise the convex line profile near the lowest sample
    miss = np.flatnonzero(~has)
    if miss.size:
        m = np.argmin(g[miss], axis=1)
        ta = ts[miss, np.maximum(m - 1, 0)]
        tb = ts[miss, np.minimum(m + 1, k - 1)]
        om, dm = o[miss], d[miss]
        invphi = (math.sqrt(5) - 1) / 2
        for _ in range(80):
            c1 = tb - invphi * (tb - ta)
            c2 = ta + invphi * (tb - ta)
            f1 = body.phi(om + c1[:, None] * dm)
            f2 = body.phi(om + c2[:, None] * dm)
            left = f1 < f2
            tb = np.where(left, c2, tb)
            ta = np.where(left, ta, c1)
        tm = 0.5 * (ta + tb)
        fm = body.phi(om + tm[:, None] * dm)
        found = fm < 0
        sel = miss[found]
        has[sel] = True
        a[sel] = ts[sel, np.maximum(m[found] - 1, 0)]
        b[sel] = tm[found]

    sel = np.flatnonzero(has)
    if sel.size == 0:
        return out
    o, d, a, b = o[sel], d[sel], a[sel], b[sel]
    for _ in range(64):
        mid = 0.5 * (a + b)
        fm = body.phi(o + mid[:, None] * d)
        inside = fm < 0
        b = np.where(inside, mid, b)
        a = np.where(inside, a, mid)
        if np.all(b - a <= 1e-15 * np.maximum(1.0, b)):
            break
    t = 0.5 * (a + b)
    for _ in range(2):
        x = o + t[:, None] * d
        slope = np.einsum("ij,ij->i", body.grad(x), d)
        with np.errstate(divide="ignore", invalid="ignore"):
            tn = t - body.phi(x) / slope
        good = np.isfinite(tn) & (tn >= a) & (tn <= b)
        t = np.where(good, tn, t)
    out[idx[sel]] = t
    return out


def _touch_time(body: ConvexBody, ray: Ray) -> float:
    """Time of an exact tangential touch (phi never negative), else ``inf``."""
    ok, t_in, t_out = _sphere_chord(body.center, body.circumradius * (1 + 1e-9),
                                    ray.origin[None, :], ray.direction[None, :])
    if not ok[0] or t_out[0] <= 0:
        return math.inf
    lo, hi = max(float(t_in[0]), 0.0), float(t_out[0])
    res = optimize.minimize_scalar(lambda t: float(body.phi(ray.origin + t * ray.direction)),
                                   bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x) if abs(float(res.fun)) <= body.boundary_tol else math.inf


def first_hit(scene: Scene, ray: Ray) -> Hit | None:
    """First boundary point met by ``ray``; ``None`` if it escapes.

    Raises
    ------
    TangentHit
        The contact is grazing (``|direction . normal| < 1e-7``).
    DegenerateRay
        The origin is on a boundary and the direction points into that body,
        or the origin is strictly inside an obstacle.
    """
    o = ray.origin[None, :]
    d = ray.direction[None, :]
    best_t, best_i = np.inf, -1
    for i, body in enumerate(scene.bodies):
        f = float(body.phi(ray.origin))
        skip = False
        if f < -body.boundary_tol:
            raise DegenerateRay(f"ray origin lies inside obstacle {i + 1}")
        if abs(f) <= body.boundary_tol:
            c = float(np.dot(body.inward_normal(ray.origin), ray.direction))
            if c > TANGENCY_TOL:
                raise DegenerateRay(f"ray starts on obstacle {i + 1} pointing inward")
            skip = True
        if skip:
            continue
        t = intersect_body(body, o, d, scene.bracket_step)[0]
        if not math.isfinite(t):
            t = _touch_time(body, ray)
        if t < best_t:
            best_t, best_i = t, i
    if best_i < 0:
        return None
    body = scene.bodies[best_i]
    x = ray.origin + best_t * ray.direction
    n = body.inward_normal(x)
    hit = Hit(float(best_t), x, n, best_i + 1)
    if abs(float(np.dot(n, ray.direction))) < TANGENCY_TOL:
        raise TangentHit(f"grazing contact with obstacle {best_i + 1}", hit)
    return hit


# ---------------------------------------------------------------------------
# trapped segment (closest pair of boundary points)
# ---------------------------------------------------------------------------

def _far_intersection(body: ConvexBody, p, d):
    """Exit point of the line through boundary point ``p`` travelling along ``d`` into the body."""
    def g(s):
        return float(body.phi(p + s * d))

    s_hi = 2.0 * body.diameter
    s_lo = 1e-9 * body.diameter
    if g(s_lo) >= 0:
        # d does not enter the body at p; walk to the first interior sample
        ss = np.linspace(s_lo, s_hi, 4097)
        vals = body.phi(p + ss[:, None] * d)
        inside = np.flatnonzero(vals < 0)
        if inside.size == 0:
            return None
        s_lo = ss[inside[0]]
    s = optimize.brentq(g, s_lo, s_hi, xtol=1e-15 * body.diameter, rtol=4 * np.finfo(float).eps)
    return p + s * d


def trapped_ray(scene: Scene, tol: float = 1e-13, maxiter: int = 20_000) -> TrappedSegment:
    """Closest pair ``(p, q)`` between the two boundaries and its normality defects.

    Alternating closest-point projection from axis-aligned seeds, then a
    Newton polish of the stationarity system. ``normality_defect`` is the
    largest angle between the segment and the boundary normals at ``p`` and
    ``q``; ``line_defect`` also includes the two far-side crossings of the
    full line (the condition that line meets both boundaries only normally).
    """
    if len(scene.bodies) != 2:
        raise ValueError("trapped_ray needs exactly two obstacles")
    b1, b2 = scene.bodies
    if bool(b2.contains(b1.center, strict=False)) or bool(b1.contains(b2.center, strict=False)):
        raise ScatterError("obstacles overlap")
    scale = max(b1.diameter, b2.diameter)

    seeds = [b2.center - b1.center]
    for k in range(3):
        for s in (1.0, -1.0):
            seeds.append(s * np.eye(3)[k])
    best = None
    for seed in seeds:
        p = b1.radial_point(_normalize(seed))
        q = b2.project(p)
        for it in range(maxiter):
            p_new = b1.project(q)
            q_new = b2.project(p_new)
            delta = np.linalg.norm(p_new - p) + np.linalg.norm(q_new - q)
            p, q = p_new, q_new
            if delta < tol * scale:
                break
        gap = float(np.linalg.norm(q - p))
        if best is None or gap < best[2] - 1e-12 * scale:
            best = (p, q, gap, it)
    p, q, gap, iters = best
    if gap <= 0 or b1.contains(q, strict=False) or b2.contains(p, strict=False):
        raise ScatterError("obstacles overlap or touch")
    if iters >= maxiter - 1:
        raise NoConvergence("alternating projection did not converge")

    def system(z):
        P, Q, m1, m2 = z[:3], z[3:6], z[6], z[7]
        return np.concatenate([Q - P - m1 * b1.grad(P), P - Q - m2 * b2.grad(Q),
                               [b1.phi(P), b2.phi(Q)]])

    def jac(z):
        P, Q, m1, m2 = z[:3], z[3:6], z[6], z[7]
        J = np.zeros((8, 8))
        J[:3, :3] = -np.eye(3) - m1 * b1.hess(P)
        J[:3, 3:6] = np.eye(3)
        J[:3, 6] = -b1.grad(P)
        J[3:6, :3] = np.eye(3)
        J[3:6, 3:6] = -np.eye(3) - m2 * b2.hess(Q)
        J[3:6, 7] = -b2.grad(Q)
        J[6, :3] = b1.grad(P)
        J[7, 3:6] = b2.grad(Q)
        return J

    m1 = gap / np.linalg.norm(b1.grad(p))
    m2 = gap / np.linalg.norm(b2.grad(q))
    sol = optimize.root(system, np.concatenate([p, q, [m1, m2]]), jac=jac, method="hybr",
                        options={"xtol": 1e-15})
    if sol.success and np.linalg.norm(sol.x[3:6] - sol.x[:3]) <= gap * (1 + 1e-9):
        p, q = sol.x[:3], sol.x[3:6]
        gap = float(np.linalg.norm(q - p))

    axis = (q - p) / gap
    nu1 = -b1.inward_normal(p)
    nu2 = -b2.inward_normal(q)
    defect = max(_angle(axis, nu1), _angle(-axis, nu2))

    far1 = _far_intersection(b1, p, -axis)
    far2 = _far_intersection(b2, q, axis)
    line_def = defect
    fars = []
    for body, fp in ((b1, far1), (b2, far2)):
        if fp is None:
            continue
        fars.append(fp)
        nu = -body.inward_normal(fp)
        a = _angle(axis, nu)
        line_def = max(line_def, min(a, math.pi - a))
    return TrappedSegment(p, q, gap, defect, line_def, tuple(fars))


# ---------------------------------------------------------------------------
# cap / spherical-shell volume
# ---------------------------------------------------------------------------

def cap_slab_volume(x0, r: float, R: float, t: float, samples: int, seed: int = 0):
    """Monte-Carlo volume of ``B(x0, r) ∩ {t - R <= |x| <= t + R}``.

    Returns ``(estimate, standard_error)``; ``(0, 0)`` when the triangle
    inequality already separates the ball from the shell.
    """
    if r <= 0 or R <= 0 or t <= 0:
        raise ValueError("r, R and t must be positive")
    if samples < 10_000:
        raise ValueError("at least 1e4 samples are required")
    x0 = _as_points(x0).reshape(3)
    d0 = float(np.linalg.norm(x0))
    if d0 - r > t + R or d0 + r < t - R:
        return 0.0, 0.0
    vball = 4.0 / 3.0 * math.pi * r**3
    if d0 + r <= t + R and d0 - r >= t - R:
        return vball, 0.0

    def count(g, n):
        pts = _rng.uniform_ball(g, n, x0, r)
        rad = np.linalg.norm(pts, axis=1)
        return int(np.count_nonzero((rad >= t - R) & (rad <= t + R)))

    k = sum(_rng.chunked_map(count, samples, seed))
    f = k / samples
    return vball * f, vball * math.sqrt(f * (1 - f) / samples)
