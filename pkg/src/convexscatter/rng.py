"""Seeded counter-based random streams and a deterministic chunked map.

Every stochastic routine draws from Philox streams spawned from a single
integer seed. Work is split into fixed-size chunks, each with its own stream,
so results do not depend on how many worker threads process the chunks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

THREADS_ENV = "CONVEXSCATTER_THREADS"
CHUNK = 8192

_threads: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    _threads = None if n is None else max(1, int(n))


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for ``(seed, stream)``; streams are independent."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def chunked_map(func, total: int, seed: int, chunk: int = CHUNK, threads: int | None = None):
    """Apply ``func(rng, n)`` to consecutive chunks; returns list of results in order."""
    sizes = chunk_sizes(total, chunk)
    jobs = [(generator(seed, i), n) for i, n in enumerate(sizes)]
    threads = get_threads() if threads is None else threads
    if threads <= 1 or len(jobs) <= 1:
        return [func(g, n) for g, n in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: func(*job), jobs))


def uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def uniform_ball(rng: np.random.Generator, n: int, center, radius: float) -> np.ndarray:
    d = uniform_sphere(rng, n)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return np.asarray(center, dtype=float) + d * r[:, None]


def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, float(centre - half))
    hi = 1.0 if k == n else min(1.0, float(centre + half))
    return lo, hi
