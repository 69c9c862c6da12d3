"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 usage or input error,
3 configuration error.  Every data file written is a deterministic
function of the arguments and the seed; wall-clock runtimes go to a
separate ``*.meta.json`` file next to a verification report.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import CHECK_IDS, ConfigError, RunConfig, load_config
from .contour import ContourError, forest_from_contour, jccp_forest
from .epi import NoSurvivorError, check_conditional_decomposition, reconstructed_tree, incidence_series, write_incidence_csv
from .measure import Exponential, MeasureError
from .path import PathError, read_paths_csv, write_paths_csv
from .scale import ScaleError, build_scale_table
from .sim import ForestSpec, SimulationError, simulate_forests
from .tree import TreeError, read_forests_jsonl, write_forests_jsonl
from .verify import checks
from .verify.report import RunReport, TestResult
from .verify.stats import InsufficientSample

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 3

REGISTRY = {
    "scale": checks.check_scale,
    "identities": checks.check_identities,
    "survival-lemma": checks.check_survival_lemma,
    "width-reversal": checks.check_width_reversal,
    "geometric-equivalence": checks.check_geometric_equivalence,
    "contour-transform": checks.check_contour_transform,
    "contour-law": checks.check_contour_law,
    "over-undershoot": checks.check_over_undershoot,
    "reversal-invariance": checks.check_reversal_invariance,
    "measure-change": checks.check_measure_change,
    "conditional-decomposition": check_conditional_decomposition,
    "calibration": checks.calibration,
}
# calibration repeats width-reversal over many seeds; it runs only on request
ALL_CHECKS = tuple(c for c in CHECK_IDS if c != "calibration")


class UsageError(Exception):
    pass


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _read(path: str):
    try:
        return open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _seed(args, cfg: RunConfig) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    if not 0 <= seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    return seed


def _threads(args, cfg: RunConfig) -> int | None:
    # None lets the simulators fall back to FORESTDUAL_THREADS
    return args.threads if args.threads is not None else cfg.threads


# subcommands -----------------------------------------------------------------------


def cmd_simulate(args, cfg: RunConfig) -> int:
    mu = cfg.require_measure()
    sim = cfg.simulate
    n = args.n if args.n is not None else sim.get("n", 1)
    spec = ForestSpec(mu, sim.get("ancestor", "standard"), cfg.T, sim.get("stopping", "first-survivor"), sim.get("tilted", False))
    batch = simulate_forests(spec, n, _seed(args, cfg), "simulate", _threads(args, cfg))
    forests = list(batch)
    with _output(args.out) as fh:
        write_forests_jsonl(forests, fh)
    if args.contour:
        with _output(args.contour) as fh:
            write_paths_csv((jccp_forest(f) for f in forests), fh)
    return EXIT_OK


def cmd_scale_table(args, cfg: RunConfig) -> int:
    if args.b is not None or args.d is not None:
        if args.b is None or args.d is None:
            raise UsageError("--b and --d go together")
        mu = Exponential(args.b, args.d)
    else:
        mu = cfg.require_measure()
    x_max = args.xmax if args.xmax is not None else cfg.scale.get("x_max", 5.0)
    h = args.h if args.h is not None else cfg.scale.get("h", 1e-3)
    W = build_scale_table(mu, x_max, h, method=args.method)
    Wt = build_scale_table(mu, x_max, h, tilted=True, method=args.method)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "W", "W_tilde"])
        for x, a, b in zip(W.x.tolist(), W.W.tolist(), Wt.W.tolist()):
            w.writerow([repr(x), repr(a), repr(b)])
    return EXIT_OK


def cmd_contour(args, cfg: RunConfig) -> int:
    with _read(args.input) as fh:
        forests = read_forests_jsonl(fh)
    with _output(args.out) as fh:
        write_paths_csv((jccp_forest(f, args.truncate) for f in forests), fh)
    return EXIT_OK


def cmd_forest_from_contour(args, cfg: RunConfig) -> int:
    with _read(args.input) as fh:
        paths = read_paths_csv(fh)
    forests = [forest_from_contour(p) for p in paths]
    with _output(args.out) as fh:
        write_forests_jsonl(forests, fh)
    return EXIT_OK


def run_check(check_id: str, cfg: RunConfig, seed: int, threads: int | None) -> RunReport:
    fn = REGISTRY[check_id]
    kwargs = cfg.check_options(check_id, fn)
    params = inspect.signature(fn).parameters
    if "mu" in params:
        kwargs["mu"] = cfg.require_measure()
    if "T" in params:
        kwargs.setdefault("T", cfg.T)
    if "seed" in params:
        kwargs["seed"] = seed
    if "threads" in params:
        kwargs["threads"] = threads
    try:
        return fn(**kwargs)
    except (InsufficientSample, SimulationError, ScaleError, MeasureError) as exc:
        report = RunReport(check_id, seed, {"measure": cfg.measure.to_dict() if cfg.measure else None})
        report.notes.append(f"error: {exc}")
        report.add(TestResult("completed", "exact", 1, 0))
        return report


def cmd_verify(args, cfg: RunConfig) -> int:
    seed = _seed(args, cfg)
    threads = _threads(args, cfg)
    if args.check == "all":
        ids = list(cfg.verify.get("checks", ALL_CHECKS))
    elif args.check in REGISTRY:
        ids = [args.check]
    else:
        raise UsageError(f"unknown check {args.check!r}; choose from all, {', '.join(REGISTRY)}")
    reports = []
    for cid in ids:
        r = run_check(cid, cfg, seed, threads)
        print(r.summary(), flush=True)
        reports.append(r)
    passed = all(r.passed for r in reports)
    if args.out:
        doc = {"seed": seed, "passed": passed, "checks": [r.to_dict(with_meta=False) for r in reports]}
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        meta = {r.check_id: r.meta for r in reports}
        Path(args.out).with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_epi(args, cfg: RunConfig) -> int:
    T = cfg.T
    if args.forests:
        with _read(args.forests) as fh:
            forests = read_forests_jsonl(fh)
    else:
        mu = cfg.require_measure()
        n = args.n if args.n is not None else cfg.epi.get("n", 1)
        left, _, _, _ = checks.dual_specs(mu, T)
        forests = list(simulate_forests(left, n, _seed(args, cfg), "epi", _threads(args, cfg)))
    bin_width = args.bin if args.bin is not None else cfg.epi.get("bin", T / 20)
    trees = []
    for i, f in enumerate(forests):
        try:
            trees.append(reconstructed_tree(f, T))
        except NoSurvivorError:
            raise UsageError(f"forest {i} has no individual alive at T = {T}") from None
    with _output(args.out) as fh:
        for t in trees:
            fh.write(t.newick() + "\n")
    if args.coalescence:
        with _output(args.coalescence) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["forest", "index", "depth"])
            for i, t in enumerate(trees):
                for k, h in enumerate(t.depths):
                    w.writerow([i, k, repr(h)])
    if args.incidence:
        total = sum((incidence_series(f, bin_width, T) for f in forests), np.zeros(1, dtype=np.int64))
        with _output(args.incidence) as fh:
            write_incidence_csv(total, bin_width, fh)
    return EXIT_OK


# parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
    common.add_argument("--threads", type=int, help="worker threads (default: config, then FORESTDUAL_THREADS, then 1)")

    p = argparse.ArgumentParser(prog="forestdual", description="Splitting-tree forests, contours and their time-reversal dualities.")
    p.add_argument("--version", action="version", version=f"forestdual {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate forests and write them as JSONL")
    s.add_argument("--n", type=int, help="number of forests")
    s.add_argument("--out", help="forest JSONL (default stdout)")
    s.add_argument("--contour", help="also write the contours as CSV")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("scale-table", parents=[common], help="tabulate W and W-tilde as CSV")
    s.add_argument("--b", type=float, help="birth rate of an exponential measure")
    s.add_argument("--d", type=float, help="death rate of an exponential measure")
    s.add_argument("--xmax", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--method", choices=["auto", "closed", "volterra"], default="auto")
    s.add_argument("--out")
    s.set_defaults(func=cmd_scale_table)

    s = sub.add_parser("contour", parents=[common], help="forest JSONL to contour CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--truncate", type=float, help="truncate the trees at this level first")
    s.set_defaults(func=cmd_contour)

    s = sub.add_parser("forest-from-contour", parents=[common], help="contour CSV back to forest JSONL")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_forest_from_contour)

    s = sub.add_parser("verify", parents=[common], help="run verification checks")
    s.add_argument("--check", default="all", help=f"'all' or one of: {', '.join(REGISTRY)}")
    s.add_argument("--out", help="report JSON (runtimes go to <out>.meta.json)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("epi", parents=[common], help="reconstructed trees, coalescence times and incidence")
    s.add_argument("--n", type=int, help="number of forests to simulate")
    s.add_argument("--forests", help="read forests from JSONL instead of simulating")
    s.add_argument("--out", help="Newick file, one reconstructed tree per line (default stdout)")
    s.add_argument("--coalescence", help="CSV of coalescence depths")
    s.add_argument("--incidence", help="CSV of the incidence series summed over forests")
    s.add_argument("--bin", type=float, help="incidence bin width (default T/20)")
    s.set_defaults(func=cmd_epi)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("n", "threads"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name} must be positive", file=sys.stderr)
            return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UsageError, TreeError, ContourError, PathError, ScaleError, MeasureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
