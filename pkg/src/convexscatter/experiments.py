"""One function per experiment kind; each returns artifacts and a summary.

Artifacts are text payloads (CSV or JSON) keyed by file name. They contain
no timestamps and are produced from the config and seed alone, so two runs
with the same inputs write byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform

import numpy as np
import scipy

from . import __version__
from .billiards import reconcentration_probe, trace, trapping_report
from .config import ScenarioConfig
from .errors import ScatterError
from .geometry import Ray, Scene, cap_slab_volume
from .morawetz import (MorawetzWeight, boundary_certificate, exterior_volume, m_alpha,
                       minimal_c1_search)
from .wavesolver import (GaussianData, ScaleCore, WaveField, build_grid, compare_to_free, evolve,
                         flux_time_average, morawetz_residual, nonconcentration_scan, translation_grid)

MANIFEST = "manifest.json"
SUMMARY = "summary.json"

# thresholds used by ``report``
ENERGY_DRIFT_MAX = 0.01
MORAWETZ_MISMATCH_MAX = 0.05
TRAPPED_FRACTION_MAX = 1e-3
RECONCENTRATION_FACTOR = 5.0
M_ALPHA_FINAL_RATIO = 0.1
FREE_GAP_FINAL_RATIO = 0.25
VOLUME_SIGMA_FACTOR = 1.2


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _require_two(scene: Scene, kind: str):
    if len(scene.bodies) != 2:
        raise ScatterError(f"{kind} needs exactly two bodies (body1, body2)")


# ---------------------------------------------------------------------------
# billiards and geometry
# ---------------------------------------------------------------------------

def run_trace(cfg: ScenarioConfig):
    p = cfg.params
    traj = trace(cfg.scene, Ray(p["origin"], p["direction"]), p["horizon"], p["escape_radius"])
    rows = traj.to_rows()
    csv_text = _csv(["k", "x", "y", "z", "xi_x", "xi_y", "xi_z", "t", "obstacle"], rows)
    summary = {"bounces": traj.bounces, "grazing": traj.grazing, "story": list(traj.story),
               "terminal": traj.terminal, "total_time": traj.total_time}
    return {"trajectory.csv": csv_text}, summary


def run_trap_report(cfg: ScenarioConfig):
    p = cfg.params
    reports = trapping_report(cfg.scene, p["x0"], p["escape_radius"], p["horizons"], p["samples"], cfg.seed)
    payload = {"reports": [r.to_dict() for r in reports], "samples": p["samples"], "seed": cfg.seed}
    fractions = [r.trapped_fraction for r in reports]
    summary = {
        "horizons": [r.horizon for r in reports],
        "non_increasing": all(b <= a for a, b in zip(fractions, fractions[1:])),
        "trapped_fractions": fractions,
    }
    return {"trapping_report.json": dumps(payload)}, summary


def run_reconcentrate(cfg: ScenarioConfig):
    p = cfg.params
    rows, totals = [], []
    for eps in p["eps"]:
        caps, total = reconcentration_probe(cfg.scene, p["x"], p["x0"], p["t"], eps, p["angular_resolution"])
        totals.append(total)
        for c in caps:
            rows.append((eps, *c.center, c.angular_radius, c.measure, " ".join(map(str, c.story))))
    csv_text = _csv(["eps", "cx", "cy", "cz", "angular_radius", "measure", "story"], rows)
    factors = [a / b if b > 0 else math.inf for a, b in zip(totals, totals[1:])]
    summary = {"eps": list(p["eps"]), "shrink_factors": factors, "total_measure": totals}
    return {"caps.csv": csv_text}, summary


def run_volume_lemma(cfg: ScenarioConfig):
    p = cfg.params
    rows = []
    i = 0
    for t in p["ts"]:
        for R in p["Rs"]:
            for r in p["rs"]:
                eps = max(r, R) / t
                if eps > p["eps0"] or t - R <= 0:
                    continue
                est, err = cap_slab_volume((t, 0.0, 0.0), r, R, t, p["samples"], seed=cfg.seed + i)
                i += 1
                scale = t * t * R * eps
                rows.append((t, R, r, eps, est, err, est / scale, err / scale))
    D = max((row[6] for row in rows), default=0.0)
    csv_text = _csv(["t", "R", "r", "eps", "volume", "stderr", "ratio", "ratio_stderr"], rows)
    summary = {"D": D, "cases": len(rows),
               "max_upper_over_D": max(((row[6] + row[7]) / D for row in rows), default=0.0) if D else 0.0}
    return {"volume_lemma.csv": csv_text}, summary


# ---------------------------------------------------------------------------
# multiplier
# ---------------------------------------------------------------------------

def run_certify_weight(cfg: ScenarioConfig):
    _require_two(cfg.scene, cfg.kind)
    p = cfg.params
    w = MorawetzWeight.for_scene(cfg.scene, p["c1"])
    cert = boundary_certificate(cfg.scene, w, p["samples"], cfg.seed)
    return {"certificate.json": dumps(cert.to_dict())}, {"min_flux": cert.min_flux, "status": cert.status}


def run_minimal_c1(cfg: ScenarioConfig):
    _require_two(cfg.scene, cfg.kind)
    p = cfg.params
    res = minimal_c1_search(cfg.scene, p["tol"], p["samples"])
    return {"minimal_c1.json": dumps(res.to_dict())}, {"c1": res.c1, "monotone": res.monotone}


def run_m_alpha(cfg: ScenarioConfig):
    _require_two(cfg.scene, cfg.kind)
    p = cfg.params
    w = MorawetzWeight.for_scene(cfg.scene, p["c1"])
    rows = []
    for a in p["alphas"]:
        est, err = m_alpha(cfg.scene, w, p["A"], a, p["samples"], cfg.seed)
        rows.append((a, est, err))
    vol, verr = exterior_volume(cfg.scene, p["A"], p["samples"], cfg.seed)
    ests = [r[1] for r in rows]
    summary = {"alphas": list(p["alphas"]), "estimates": ests, "region_volume": vol,
               "strictly_decreasing": all(b < a for a, b in zip(ests, ests[1:]))}
    return {"m_alpha.csv": _csv(["alpha", "volume", "stderr"], rows)}, summary


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def shell_data(grid, center, radius: float, sigma: float, amplitude: float):
    """Outgoing spherical shell ``F(r - t)/r`` with a Gaussian ``F`` (about ``center``)."""
    X, Y, Z = grid.mesh()
    c = np.asarray(center, dtype=float)
    r = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
    r = np.maximum(r, 0.5 * grid.h)
    F = amplitude * np.exp(-((r - radius) ** 2) / (2.0 * sigma**2))
    dF = -(r - radius) / sigma**2 * F
    return F / r, -dF / r


def gaussian_data(grid, center, sigma: float, amplitude: float):
    X, Y, Z = grid.mesh()
    c = np.asarray(center, dtype=float)
    r2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    u0 = amplitude * np.exp(-r2 / sigma**2)
    return u0, np.zeros(grid.shape)


def _extrema(series):
    out = {}
    for name in ("E", "E_kin", "E_grad", "L6", "local_E_A", "flux", "strichartz_acc"):
        a = series.array(name)
        out[name] = {"max": float(a.max()), "min": float(a.min())}
    return out


def run_solve(cfg: ScenarioConfig):
    p = cfg.params
    grid = build_grid(cfg.scene, p["h"], p["L"])
    u0, u1 = shell_data(grid, p["center"], p["shell_radius"], p["sigma"], p["amplitude"])
    f = WaveField.from_data(grid, u0, u1, quintic=p["quintic"], cfl=p["cfl"])
    weight = MorawetzWeight.for_scene(cfg.scene, p["c1"]) if p["c1"] > 0 and len(cfg.scene.bodies) == 2 else None
    A = p["A"] if p["A"] > 0 else None
    series = evolve(f, p["steps"], every=p["every"], A=A, weight=weight)
    T = series.t[-1] - series.t[0]
    # (1/T) ∫ flux over the last three dyadic windows [0, T/4], [0, T/2], [0, T]
    windows = [T / 4, T / 2, T] if T > 0 else []
    summary = {"energy_drift": series.energy_drift(), "extrema": _extrema(series),
               "final_time": series.t[-1], "grid": grid.describe(),
               "flux_averages": {"T": windows, "average": [flux_time_average(series, w) for w in windows]}}
    if weight is not None:
        lhs, rhs, mis = morawetz_residual(series, weight, (series.t[0], series.t[-1]))
        summary["morawetz"] = {"lhs": lhs, "mismatch": mis, "rhs": rhs}
    return {"diagnostics.csv": series.to_csv()}, summary


def morawetz_run(scene: Scene, h: float, L: float, c1: float, T: float, center, sigma: float,
                 amplitude: float, quintic: bool = True, cfl: float = 0.5):
    """Evolve a Gaussian at rest and return ``(series, (lhs, rhs, mismatch))`` over ``[0, T]``."""
    grid = build_grid(scene, h, L)
    u0, u1 = gaussian_data(grid, center, sigma, amplitude)
    f = WaveField.from_data(grid, u0, u1, quintic=quintic, cfl=cfl)
    w = MorawetzWeight.for_scene(scene, c1)
    steps = int(round(T / f.dt))
    series = evolve(f, steps, every=1, weight=w)
    return series, morawetz_residual(series, w, (0.0, series.t[-1]))


def run_morawetz_check(cfg: ScenarioConfig):
    _require_two(cfg.scene, cfg.kind)
    p = cfg.params
    rows = []
    for level, h in enumerate((p["h"], p["h"] / 2)):
        series, (lhs, rhs, mis) = morawetz_run(cfg.scene, h, p["L"], p["c1"], p["T"], p["center"],
                                               p["sigma"], p["amplitude"], p["quintic"], p["cfl"])
        rows.append((h, lhs, rhs, mis))
    ratio = rows[1][3] / rows[0][3] if rows[0][3] > 0 else 0.0
    summary = {"mismatch": [r[3] for r in rows], "refinement_ratio": ratio}
    return {"morawetz.csv": _csv(["h", "lhs", "rhs", "mismatch"], rows)}, summary


def run_compare_free(cfg: ScenarioConfig):
    _require_two(cfg.scene, cfg.kind)
    p = cfg.params
    base = GaussianData(sigma=p["sigma"])
    cores = [ScaleCore(i, p["lam"], 0.0, (d, 0.0, 0.0)) for i, d in enumerate(p["distances"])]
    gaps = compare_to_free(cfg.scene, base, cores, lambda c: translation_grid(cfg.scene, base, c, p["h"]))
    rows = [(c.x[0], c.lam, g) for c, g in zip(cores, gaps)]
    summary = {"gaps": gaps, "strictly_decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}
    return {"compare_free.csv": _csv(["distance", "lam", "gap"], rows)}, summary


def run_nonconcentration(cfg: ScenarioConfig):
    p = cfg.params
    lams, Cs = p["lams"], p["C"]
    if len(Cs) == 1:
        Cs = Cs * len(lams)
    if len(Cs) != len(lams):
        raise ScatterError("C must have one entry or one per lambda")
    grid = build_grid(cfg.scene, p["h"], p["L"])
    base = GaussianData(sigma=p["sigma"])
    rows = []
    for i, (lam, C) in enumerate(zip(lams, Cs)):
        sup = nonconcentration_scan(cfg.scene, base, ScaleCore(i, lam, 0.0, p["center"]), C, p["T"], grid)
        rows.append((lam, C, sup))
    sups = [r[2] for r in rows]
    summary = {"decreasing": all(b < a for a, b in zip(sups, sups[1:])), "sups": sups}
    return {"nonconcentration.csv": _csv(["lam", "C", "sup_L6"], rows)}, summary


RUNNERS = {
    "trace": run_trace,
    "trap-report": run_trap_report,
    "reconcentrate": run_reconcentrate,
    "certify-weight": run_certify_weight,
    "minimal-c1": run_minimal_c1,
    "m-alpha": run_m_alpha,
    "solve": run_solve,
    "compare-free": run_compare_free,
    "nonconcentration": run_nonconcentration,
    "morawetz-check": run_morawetz_check,
    "volume-lemma": run_volume_lemma,
}


def manifest(cfg: ScenarioConfig, artifacts) -> dict:
    return {
        "artifacts": sorted(list(artifacts) + [SUMMARY]),
        "config": cfg.resolved(),
        "kind": cfg.kind,
        "scene": cfg.scene.describe(),
        "seed": cfg.seed,
        "versions": {"convexscatter": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "scipy": scipy.__version__},
    }


def run(cfg: ScenarioConfig, out_dir: str) -> dict:
    """Execute ``cfg`` and write its artifacts, summary and manifest into ``out_dir``."""
    artifacts, summary = RUNNERS[cfg.kind](cfg)
    os.makedirs(out_dir, exist_ok=True)
    files = dict(artifacts)
    files[SUMMARY] = dumps(summary)
    files[MANIFEST] = dumps(manifest(cfg, artifacts))
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return summary
