"""Command line entry point.

Usage::

    convexscatter run CONFIG [--seed N] [--out DIR] [--threads N]
    convexscatter report DIR

Exit codes: 0 success, 1 domain error, 2 config or usage error. The thread
count can also come from the ``CONVEXSCATTER_THREADS`` environment variable;
the flag wins. Config grammar: see :mod:`convexscatter.config`.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as _config
from . import experiments as _exp
from . import rng as _rng
from .errors import ConfigError, MissingManifest, ScatterError

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _report_lines(kind: str, summary: dict) -> list[str]:
    lines = []
    if kind == "certify-weight":
        ok = summary["status"] == "pass"
        lines.append(f"{_verdict(ok)} certify-weight: min_flux={summary['min_flux']:.3e}")
    elif kind == "trap-report":
        fr = summary["trapped_fractions"]
        for T, f in zip(summary["horizons"], fr):
            lines.append(f"  T={T:g}: trapped_fraction={f:.6g}")
        lines.append(f"{_verdict(summary['non_increasing'])} trapped fraction non-increasing in T")
        if summary["horizons"][-1] >= 160:
            lines.append(f"{_verdict(fr[-1] <= _exp.TRAPPED_FRACTION_MAX)} "
                         f"trapped fraction <= {_exp.TRAPPED_FRACTION_MAX:g} at T={summary['horizons'][-1]:g}")
    elif kind == "solve":
        drift = summary["energy_drift"]
        lines.append(f"{_verdict(drift < _exp.ENERGY_DRIFT_MAX)} energy drift={drift:.3e}")
        lines.append(f"  {'quantity':<16}{'min':>14}{'max':>14}")
        for name, mm in summary["extrema"].items():
            lines.append(f"  {name:<16}{mm['min']:>14.6g}{mm['max']:>14.6g}")
        avg = summary.get("flux_averages", {}).get("average", [])
        if len(avg) == 3:
            ok = avg[0] > avg[1] > avg[2]
            lines.append(f"{_verdict(ok)} dyadic flux averages decreasing: {[f'{a:.4g}' for a in avg]}")
        if "morawetz" in summary:
            m = summary["morawetz"]["mismatch"]
            lines.append(f"{_verdict(m < _exp.MORAWETZ_MISMATCH_MAX)} Morawetz mismatch={m:.3e}")
    elif kind == "morawetz-check":
        m0, m1 = summary["mismatch"]
        lines.append(f"{_verdict(m0 < _exp.MORAWETZ_MISMATCH_MAX)} Morawetz mismatch={m0:.3e} at h")
        lines.append(f"{_verdict(summary['refinement_ratio'] <= 0.6)} "
                     f"refinement ratio={summary['refinement_ratio']:.3f} (mismatch at h/2: {m1:.3e})")
    elif kind == "reconcentrate":
        for e, m in zip(summary["eps"], summary["total_measure"]):
            lines.append(f"  eps={e:g}: cap measure={m:.6g}")
        if summary["shrink_factors"]:
            ok = all(f >= _exp.RECONCENTRATION_FACTOR for f in summary["shrink_factors"])
            lines.append(f"{_verdict(ok)} cap measure shrink factors {summary['shrink_factors']}")
    elif kind == "m-alpha":
        est = summary["estimates"]
        ok = summary["strictly_decreasing"] and (len(est) < 2 or est[-1] < _exp.M_ALPHA_FINAL_RATIO * est[0])
        lines.append(f"{_verdict(ok)} m(alpha) estimates {est}")
    elif kind == "compare-free":
        g = summary["gaps"]
        ok = summary["strictly_decreasing"] and (len(g) < 2 or g[-1] < _exp.FREE_GAP_FINAL_RATIO * g[0])
        lines.append(f"{_verdict(ok)} energy gaps {g}")
    elif kind == "volume-lemma":
        ok = summary["max_upper_over_D"] < _exp.VOLUME_SIGMA_FACTOR
        lines.append(f"{_verdict(ok)} D={summary['D']:.4g}, max (ratio+1 sigma)/D="
                     f"{summary['max_upper_over_D']:.3f} over {summary['cases']} cases")
    elif kind == "minimal-c1":
        lines.append(f"  minimal c1={summary['c1']:.6g} (pass status monotone above it: {summary['monotone']})")
    elif kind == "nonconcentration":
        lines.append(f"{_verdict(summary['decreasing'])} sup L6 norms {summary['sups']}")
    elif kind == "trace":
        lines.append(f"  terminal={summary['terminal']} bounces={summary['bounces']} "
                     f"time={summary['total_time']:.6g}")
    return lines


def report(directory: str, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    path = os.path.join(directory, _exp.MANIFEST)
    if not os.path.isfile(path):
        raise MissingManifest(f"no {_exp.MANIFEST} in {directory!r}")
    with open(path, encoding="utf-8") as fh:
        man = json.load(fh)
    with open(os.path.join(directory, _exp.SUMMARY), encoding="utf-8") as fh:
        summary = json.load(fh)
    kind = man["kind"]
    print(f"{kind} (seed {man['seed']})", file=stream)
    for line in _report_lines(kind, summary):
        print(line, file=stream)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads for sampling (default: ${_rng.THREADS_ENV} or 1)")
    parser = argparse.ArgumentParser(prog="convexscatter", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="output directory (default: config 'out' or <config>_out)")
    p_rep = sub.add_parser("report", parents=[common], help="summarize an output directory")
    p_rep.add_argument("directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        _rng.set_threads(args.threads)
    try:
        if args.command == "report":
            return report(args.directory)
        cfg = _config.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative", "--seed")
            cfg.seed = args.seed
        out = args.out or cfg.out or os.path.splitext(os.path.basename(args.config))[0] + "_out"
        try:
            summary = _exp.run(cfg, out)
        except ScatterError as exc:
            raise type(exc)(f"{cfg.kind} experiment ({args.config}): {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"{cfg.kind} experiment rejected a parameter: {exc}") from exc
        print(f"{cfg.kind}: wrote {out}")
        for line in _report_lines(cfg.kind, json.loads(_exp.dumps(summary))):
            print(line)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScatterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    finally:
        _rng.set_threads(None)


if __name__ == "__main__":
    sys.exit(main())
