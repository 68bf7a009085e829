"""Broken-ray (billiard) flow between the obstacles and its trapping statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from . import rng as _rng
from .errors import DegenerateRay, StoryMismatch, TangentHit
from .geometry import TANGENCY_TOL, Ray, Scene, first_hit, intersect_body

MAX_BOUNCES = 1_000_000

ESCAPED, HORIZON, GRAZING = "escaped", "horizon", "grazing"


def reflect(xi, n):
    """Mirror ``xi`` across the plane with unit normal ``n``: ``xi - 2 (xi.n) n``."""
    xi = np.asarray(xi, dtype=float)
    n = np.asarray(n, dtype=float)
    return xi - 2.0 * np.sum(xi * n, axis=-1, keepdims=True) * n


@dataclass
class Trajectory:
    """A broken ray.

    ``points[0]`` is the start, ``points[1:-1]`` the reflection points and
    ``points[-1]`` the end point. ``directions[k]`` leaves ``points[k]`` and
    ``flight_times[k]`` is the time spent on that leg, so
    ``points[k+1] == points[k] + flight_times[k] * directions[k]``.
    ``story`` holds the (1-based) obstacle index of every reflection.
    """

    points: np.ndarray
    directions: np.ndarray
    flight_times: np.ndarray
    story: tuple
    terminal: str
    grazing: int = 0

    @property
    def bounces(self) -> int:
        return len(self.story)

    @property
    def total_time(self) -> float:
        return float(self.flight_times.sum())

    def to_rows(self):
        """Rows ``(k, x, y, z, xi_x, xi_y, xi_z, t, obstacle)`` for CSV output."""
        rows = []
        for k in range(len(self.directions)):
            obst = self.story[k - 1] if 0 < k <= len(self.story) else 0
            rows.append((k, *self.points[k], *self.directions[k], self.flight_times[k], obst))
        return rows


def _escape_distance(p, d, R):
    """Time until the free line leaves ``B(0, R)`` moving outward (0 if already)."""
    b = np.einsum("ij,ij->i", p, d)
    c = np.einsum("ij,ij->i", p, p) - R * R
    disc = b * b - c
    s = np.where(disc >= 0, -b + np.sqrt(np.maximum(disc, 0.0)), -b)
    return np.maximum(s, 0.0)


def trace(scene: Scene, ray: Ray, horizon: float, escape_radius: float) -> Trajectory:
    """Follow ``ray`` through reflections until it escapes or time runs out.

    A grazing contact stops the trajectory with ``terminal == "grazing"``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if escape_radius <= scene.bounding_radius:
        raise ValueError("escape radius must exceed the scene bounding radius")
    pts = [ray.origin.copy()]
    dirs = [ray.direction.copy()]
    times = []
    story = []
    elapsed = 0.0
    cur = ray
    terminal = HORIZON
    while True:
        if len(story) >= MAX_BOUNCES:
            terminal = HORIZON
            break
        try:
            hit = first_hit(scene, cur)
        except TangentHit as exc:
            hit = exc.hit
            if elapsed + hit.time <= horizon:
                times.append(hit.time)
                pts.append(hit.point)
                terminal = GRAZING
                break
        if hit is None:
            s = float(_escape_distance(cur.origin[None], cur.direction[None], escape_radius)[0])
            if elapsed + s <= horizon:
                terminal = ESCAPED
            else:
                s = horizon - elapsed
            times.append(s)
            pts.append(cur.origin + s * cur.direction)
            break
        if elapsed + hit.time > horizon:
            s = horizon - elapsed
            times.append(s)
            pts.append(cur.origin + s * cur.direction)
            break
        elapsed += hit.time
        times.append(hit.time)
        pts.append(hit.point)
        story.append(hit.obstacle)
        new_dir = reflect(cur.direction, hit.normal)
        new_dir /= np.linalg.norm(new_dir)
        dirs.append(new_dir)
        cur = Ray(hit.point, new_dir)
    return Trajectory(np.array(pts), np.array(dirs), np.array(times), tuple(story), terminal)


@dataclass
class BatchResult:
    """Outcome of :func:`propagate` for ``m`` rays."""

    escape_time: np.ndarray      # inf where the ray had not escaped by the horizon
    end_points: np.ndarray
    end_directions: np.ndarray
    bounces: np.ndarray
    hits_any: np.ndarray
    grazing: np.ndarray
    min_distance: np.ndarray | None = None
    legs: list = field(default_factory=list)


def propagate(scene: Scene, origins, directions, horizon: float, escape_radius: float = np.inf,
              record: bool = False, window=None) -> BatchResult:
    """Vectorised billiard flow for many rays.

    Grazing contacts pass straight through (no reflection) and are counted.
    With ``window=(t_a, t_b, target)`` the smallest distance from ``target``
    reached while the elapsed time lies in ``[t_a, t_b]`` is tracked.
    With ``record=True`` every reflection is kept as
    ``(ray_index, point, new_direction, leg_time, obstacle)`` for
    :func:`trajectories_from_batch`.
    """
    x = np.array(origins, dtype=float).reshape(-1, 3)
    d = np.array(directions, dtype=float).reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    m = x.shape[0]
    if np.any(scene.inside(x, strict=True)):
        raise DegenerateRay("ray origin inside an obstacle")
    elapsed = np.zeros(m)
    last = np.full(m, -1)
    bounces = np.zeros(m, dtype=np.int64)
    grazing = np.zeros(m, dtype=np.int64)
    escape = np.full(m, np.inf)
    end_x = np.empty((m, 3))
    end_d = np.empty((m, 3))
    active = np.ones(m, dtype=bool)
    step = scene.bracket_step
    mind = None
    if window is not None:
        t_a, t_b, target = window
        target = np.asarray(target, dtype=float)
        mind = np.full(m, np.inf)

    # rays starting on a boundary must leave it
    for bi, body in enumerate(scene.bodies):
        on = np.abs(body.phi(x)) <= body.boundary_tol
        if on.any():
            c = np.einsum("ij,ij->i", body.inward_normal(x[on]), d[on])
            if np.any(c > TANGENCY_TOL):
                raise DegenerateRay("ray starts on a boundary pointing inward")
            last[on] = bi

    legs = []

    def track(ia, p, dd, s0, s1):
        if mind is None:
            return
        lo = np.maximum(s0, t_a)
        hi = np.minimum(s1, t_b)
        ok = hi >= lo
        if not ok.any():
            return
        j = ia[ok]
        pp, dv = p[ok], dd[ok]
        a, b = lo[ok] - s0[ok], hi[ok] - s0[ok]
        s = np.clip(np.einsum("ij,ij->i", target - pp, dv), a, b)
        dist = np.linalg.norm(pp + s[:, None] * dv - target, axis=1)
        mind[j] = np.minimum(mind[j], dist)

    while active.any():
        ia = np.flatnonzero(active)
        p, dd = x[ia], d[ia]
        t_hit = np.full(ia.size, np.inf)
        which = np.full(ia.size, -1)
        for bi, body in enumerate(scene.bodies):
            t = intersect_body(body, p, dd, step, skip=(last[ia] == bi))
            closer = t < t_hit
            t_hit[closer] = t[closer]
            which[closer] = bi
        free = ~np.isfinite(t_hit)
        late = ~free & (elapsed[ia] + t_hit > horizon)
        capped = bounces[ia] >= MAX_BOUNCES

        # free flight to escape or to the horizon
        if free.any():
            j = ia[free]
            s = _escape_distance(p[free], dd[free], escape_radius)
            esc = elapsed[j] + s <= horizon
            s = np.where(esc, s, horizon - elapsed[j])
            track(j, p[free], dd[free], elapsed[j], elapsed[j] + s)
            escape[j[esc]] = (elapsed[j] + s)[esc]
            end_x[j] = p[free] + s[:, None] * dd[free]
            end_d[j] = dd[free]
            active[j] = False
        stop = late | (capped & ~free)
        if stop.any():
            j = ia[stop]
            s = horizon - elapsed[j]
            track(j, p[stop], dd[stop], elapsed[j], elapsed[j] + s)
            end_x[j] = p[stop] + s[:, None] * dd[stop]
            end_d[j] = dd[stop]
            active[j] = False
        go = ~free & ~stop
        if not go.any():
            break
        j = ia[go]
        th = t_hit[go]
        track(j, p[go], dd[go], elapsed[j], elapsed[j] + th)
        hp = p[go] + th[:, None] * dd[go]
        nd = dd[go].copy()
        wb = which[go]
        for bi, body in enumerate(scene.bodies):
            sel = wb == bi
            if not sel.any():
                continue
            n_in = body.inward_normal(hp[sel])
            c = np.einsum("ij,ij->i", nd[sel], n_in)
            tangent = np.abs(c) < TANGENCY_TOL
            refl = reflect(nd[sel], n_in)
            refl /= np.linalg.norm(refl, axis=1, keepdims=True)
            nd[sel] = np.where(tangent[:, None], nd[sel], refl)
            grazing[j[sel][tangent]] += 1
        x[j] = hp
        d[j] = nd
        elapsed[j] += th
        last[j] = wb
        bounces[j] += 1
        if record:
            legs.append((j, hp, nd, th, wb + 1))

    return BatchResult(escape, end_x, end_d, bounces, bounces > 0, grazing, mind, legs)


def trajectories_from_batch(origins, directions, result: BatchResult, horizon: float,
                            escape_radius: float) -> list[Trajectory]:
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    m = origins.shape[0]
    pts = [[origins[i]] for i in range(m)]
    dirs = [[directions[i]] for i in range(m)]
    times = [[] for _ in range(m)]
    story = [[] for _ in range(m)]
    for j, hp, nd, th, ob in result.legs:
        for k, i in enumerate(j):
            pts[i].append(hp[k])
            dirs[i].append(nd[k])
            times[i].append(th[k])
            story[i].append(int(ob[k]))
    out = []
    for i in range(m):
        last = pts[i][-1]
        end = result.end_points[i]
        times[i].append(float(np.linalg.norm(end - last)))
        pts[i].append(end)
        term = ESCAPED if np.isfinite(result.escape_time[i]) else HORIZON
        out.append(Trajectory(np.array(pts[i]), np.array(dirs[i]), np.array(times[i]),
                              tuple(story[i]), term, int(result.grazing[i])))
    return out


def trace_many(scene: Scene, origins, directions, horizon: float, escape_radius: float) -> list[Trajectory]:
    res = propagate(scene, origins, directions, horizon, escape_radius, record=True)
    return trajectories_from_batch(origins, directions, res, horizon, escape_radius)


# ---------------------------------------------------------------------------
# non-reconcentration
# ---------------------------------------------------------------------------

def monotonicity_certificate(traj1: Trajectory, traj2: Trajectory, n: int | None = None):
    """Induction inequality for two same-story rays from the same point.

    Returns ``(lhs, rhs, margin)`` with
    ``lhs = (x1^n - x2^n).(xi1^n - xi2^n)`` at the ``n``-th reflection and
    ``rhs = sum_{k<n} (t1^k + t2^k)(1 - xi1^k.xi2^k)``; ``margin = lhs - rhs``
    is non-negative for convex obstacles. ``n`` defaults to the full story.
    """
    if not np.allclose(traj1.points[0], traj2.points[0], rtol=0, atol=1e-12):
        raise StoryMismatch("trajectories do not start at the same point")
    if n is None:
        if traj1.story != traj2.story:
            raise StoryMismatch(f"stories differ: {traj1.story} vs {traj2.story}")
        n = len(traj1.story)
    elif traj1.story[:n] != traj2.story[:n] or len(traj1.story) < n:
        raise StoryMismatch("stories differ within the first n reflections")
    x1, x2 = traj1.points[n], traj2.points[n]
    d1, d2 = traj1.directions[n], traj2.directions[n]
    lhs = float(np.dot(x1 - x2, d1 - d2))
    t1, t2 = traj1.flight_times[:n], traj2.flight_times[:n]
    cos = np.einsum("ij,ij->i", traj1.directions[:n], traj2.directions[:n])
    rhs = float(np.sum((t1 + t2) * (1.0 - cos)))
    return lhs, rhs, lhs - rhs


def shared_story_length(traj1: Trajectory, traj2: Trajectory) -> int:
    n = 0
    for a, b in zip(traj1.story, traj2.story):
        if a != b:
            break
        n += 1
    return n


@dataclass(frozen=True)
class DirectionCap:
    center: np.ndarray
    angular_radius: float   # radius of the geodesic disc with the same measure
    measure: float          # solid angle
    story: tuple


def _tangent_basis(c):
    a = np.eye(3)[np.argmin(np.abs(c))]
    e1 = np.cross(c, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(c, e1)


def _flow_point(scene, x, dirs, t):
    res = propagate(scene, np.broadcast_to(x, dirs.shape), dirs, t)
    return res.end_points


def reconcentration_probe(scene: Scene, x, x0, t: float, eps: float,
                          angular_resolution: float = 0.02, azimuths: int = 48):
    """Direction caps from ``x`` whose rays pass within ``eps`` of ``x0`` at a time in ``[t-eps, t+eps]``.

    The sphere of directions is scanned at ``angular_resolution``; local
    minima of the miss distance at time ``t`` are polished to exact
    connecting directions, and the cap around each one is delimited by
    bisection in angle along ``azimuths`` rays. Returns ``(caps, total_measure)``.
    """
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if t <= 0:
        raise ValueError("t must be positive")
    if scene.inside(x0[None], strict=True)[0]:
        return [], 0.0
    n = max(64, int(math.ceil(4 * math.pi / angular_resolution**2)))
    grid = _rng.fibonacci_sphere(n)
    miss = np.linalg.norm(_flow_point(scene, x, grid, t) - x0, axis=1)

    tree = cKDTree(grid)
    _, nbr = tree.query(grid, k=9)
    is_min = np.all(miss[:, None] <= miss[nbr[:, 1:]], axis=1)
    cand = np.flatnonzero(is_min & (miss < 0.5 * t))
    cand = cand[np.argsort(miss[cand])]

    centers = []
    for ci in cand:
        c = grid[ci]
        e1, e2 = _tangent_basis(c)

        def resid(ab, c=c, e1=e1, e2=e2):
            v = c + ab[0] * e1 + ab[1] * e2
            v = v / np.linalg.norm(v)
            return _flow_point(scene, x, v[None], t)[0] - x0

        sol = optimize.least_squares(resid, np.zeros(2), x_scale=angular_resolution,
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        if np.linalg.norm(sol.fun) > 1e-9 * max(1.0, t):
            continue
        v = c + sol.x[0] * e1 + sol.x[1] * e2
        v /= np.linalg.norm(v)
        if any(np.arccos(np.clip(np.dot(v, w), -1, 1)) < 1e-7 for w in centers):
            continue
        centers.append(v)

    caps = []
    window = (t - eps, t + eps, x0)
    for c in centers:
        e1, e2 = _tangent_basis(c)
        th = 2 * np.pi * (np.arange(azimuths) + 0.5) / azimuths
        ax = np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2

        def reaches(rho):
            v = np.cos(rho)[:, None] * c + np.sin(rho)[:, None] * ax
            r = propagate(scene, np.broadcast_to(x, v.shape), v, t + eps, window=window)
            return r.min_distance < eps

        if not reaches(np.zeros(1))[0]:
            continue
        lo = np.zeros(azimuths)
        hi = np.full(azimuths, eps / max(t, 1e-12))
        # expand until every azimuth leaves the cap
        for _ in range(60):
            inside = reaches(hi)
            if not inside.any():
                break
            lo = np.where(inside, hi, lo)
            hi = np.where(inside, np.minimum(2 * hi, np.pi), hi)
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            inside = reaches(mid)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        rho = 0.5 * (lo + hi)
        measure = float(np.sum(1.0 - np.cos(rho)) * 2 * np.pi / azimuths)
        story = trace_many(scene, x[None], c[None], t, np.inf)[0].story
        caps.append(DirectionCap(c, float(np.arccos(1 - measure / (2 * np.pi))), measure, story))
    return caps, float(sum(cp.measure for cp in caps))


# ---------------------------------------------------------------------------
# weak trapping
# ---------------------------------------------------------------------------

@dataclass
class TrappingReport:
    base_point: np.ndarray
    horizon: float
    escape_radius: float
    samples: int
    trapped: int
    trapped_fraction: float
    confidence: tuple
    hit_fraction: float
    cap_centers: list
    seed: int

    def to_dict(self) -> dict:
        return {
            "base_point": [float(v) for v in self.base_point],
            "horizon": float(self.horizon),
            "escape_radius": float(self.escape_radius),
            "samples": int(self.samples),
            "trapped": int(self.trapped),
            "trapped_fraction": float(self.trapped_fraction),
            "wilson_95": [float(v) for v in self.confidence],
            "hit_fraction": float(self.hit_fraction),
            "cap_centers": [{"center": [float(v) for v in c], "count": int(k)} for c, k in self.cap_centers],
            "seed": int(self.seed),
        }


def cluster_directions(dirs, max_angle: float = math.radians(10.0)):
    """Greedy angular clustering; returns ``[(unit_center, count), ...]`` by size."""
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    remaining = np.arange(len(dirs))
    out = []
    cos_max = math.cos(max_angle)
    while remaining.size:
        seed = dirs[remaining[0]]
        member = dirs[remaining] @ seed >= cos_max
        c = dirs[remaining[member]].sum(axis=0)
        c /= np.linalg.norm(c)
        member = dirs[remaining] @ c >= cos_max
        member[0] = True
        c = dirs[remaining[member]].sum(axis=0)
        out.append((c / np.linalg.norm(c), int(member.sum())))
        remaining = remaining[~member]
    out.sort(key=lambda ck: -ck[1])
    return out


def escape_times(scene: Scene, x0, escape_radius: float, horizon: float, samples: int, seed: int):
    """Uniform random directions from ``x0`` and their escape times (``inf`` = still trapped)."""
    x0 = np.asarray(x0, dtype=float)

    def job(g, n):
        dirs = _rng.uniform_sphere(g, n)
        res = propagate(scene, np.broadcast_to(x0, dirs.shape), dirs, horizon, escape_radius)
        return dirs, res.escape_time, res.hits_any

    parts = _rng.chunked_map(job, samples, seed)
    dirs = np.concatenate([p[0] for p in parts])
    esc = np.concatenate([p[1] for p in parts])
    hits = np.concatenate([p[2] for p in parts])
    return dirs, esc, hits


def trapping_report(scene: Scene, x0, escape_radius: float, horizons, samples: int,
                    seed: int = 0) -> list[TrappingReport]:
    """Fraction of directions from ``x0`` not yet escaped at each horizon.

    The same sample set is used for every horizon, so the fractions are
    non-increasing in the horizon.
    """
    if escape_radius <= scene.bounding_radius:
        raise ValueError("escape radius must exceed the scene bounding radius")
    if samples <= 0:
        raise ValueError("samples must be positive")
    horizons = sorted(float(h) for h in horizons)
    dirs, esc, hits = escape_times(scene, x0, escape_radius, horizons[-1], samples, seed)
    out = []
    for T in horizons:
        alive = esc > T
        k = int(alive.sum())
        out.append(TrappingReport(
            np.asarray(x0, dtype=float), T, escape_radius, samples, k, k / samples,
            _rng.wilson_interval(k, samples), float(hits.mean()),
            cluster_directions(dirs[alive]) if k else [], seed,
        ))
    return out
