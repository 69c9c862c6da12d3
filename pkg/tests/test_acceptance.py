"""Acceptance criteria at their stated sizes and tolerances.

Each criterion records one PASS/FAIL line (shown in the pytest terminal
summary, or printed when this file is run as a script).  The runtime
budget is part of each criterion.
"""

import json
import time

import pytest

from forestdual.cli import run as cli_run
from forestdual.epi import check_conditional_decomposition
from forestdual.measure import Exponential, PointMasses
from forestdual.verify import (
    calibration,
    check_contour_transform,
    check_identities,
    check_measure_change,
    check_over_undershoot,
    check_reversal_invariance,
    check_scale,
    check_survival_lemma,
    check_width_reversal,
)

pytestmark = pytest.mark.slow

BD21 = Exponential(2.0, 1.0)
ATOMS = PointMasses(((1.0, 0.6), (2.0, 0.9)))  # m = 2.4
LINES: list[str] = []


def record(number, title, reports, budget_s, extra=""):
    start = time.perf_counter()
    reports = [r() for r in reports]
    elapsed = time.perf_counter() - start
    ok = all(r.passed and not r.skipped for r in reports) and all(r.audit() for r in reports) and elapsed < budget_s
    n_tests = sum(len(r.tests) for r in reports)
    failed = [f"{r.check_id}:{t.name}" for r in reports for t in r.failures()]
    detail = f"{n_tests} tests, {elapsed:.1f} s of {budget_s:.0f} s" + (f", {extra}" if extra else "")
    if failed:
        detail += f"; failed {', '.join(failed)}"
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}"
    LINES.append(line)
    print(line)
    return ok


def test_criterion_1_scale():
    assert record(1, "scale solver", [lambda: check_scale(x_max=5.0, h=1e-3, tol=1e-6)], 5)


def test_criterion_2_identities():
    assert record(2, "deterministic identities", [lambda: check_identities(n=10_000, seed=0)], 60)


def test_criterion_3_survival():
    assert record(3, "survival probabilities", [lambda: check_survival_lemma(BD21, 1.0, n=100_000, seed=0)], 120)


def test_criterion_4_width_reversal():
    runs = [lambda mu=mu: check_width_reversal(mu, 1.0, n=10_000, seed=0) for mu in (BD21, Exponential(1.0, 1.0), ATOMS)]
    assert record(4, "width reversal", runs, 600, "measures (2,1), (1,1), two atoms")


def test_criterion_5_contour_transform():
    assert record(5, "contour transform", [lambda: check_contour_transform(BD21, 1.0, n=10_000, seed=0)], 600)


def test_criterion_6_over_undershoot():
    assert record(6, "over/undershoot laws", [lambda: check_over_undershoot(BD21, n=100_000, seed=0)], 180)


def test_criterion_7_appendix_lemmas():
    runs = [
        lambda: check_reversal_invariance(BD21, 1.0, n=100_000, seed=0),
        lambda: check_measure_change(BD21, a=1.0, x=0.5, n=100_000, seed=0),
    ]
    assert record(7, "reversal invariance and measure change", runs, 180)


def test_criterion_8_conditional_decomposition():
    holder = {}

    def go():
        holder["r"] = check_conditional_decomposition(BD21, 1.0, n=200_000, m=20_000, seed=0)
        return holder["r"]

    ok = record(8, "conditional decomposition", [go], 900)
    p = holder["r"].params
    LINES[-1] += f" (strata: N=0 {p['stratum_N0']}, N=1 {p['stratum_N1']})"
    assert ok


def test_criterion_9_null_calibration():
    holder = {}

    def go():
        holder["r"] = calibration(BD21, 1.0, n=10_000, seeds=200, max_rate=0.05)
        return holder["r"]

    ok = record(9, "null calibration", [go], 1800)
    LINES[-1] += f" (rejection rate {holder['r'].tests[0].statistic:.3f})"
    assert ok


def test_criterion_10_reproducibility(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"measure": {"kind": "exponential", "b": 2.0, "d": 1.0}, "simulate": {"n": 200}, "epi": {"n": 100}, "verify": {"options": {"width-reversal": {"n": 2000}}}}))
    start = time.perf_counter()
    runs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        d.mkdir()
        codes = [
            cli_run(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(d / "f.jsonl"), "--contour", str(d / "p.csv")]),
            cli_run(["forest-from-contour", "--in", str(d / "p.csv"), "--out", str(d / "g.jsonl")]),
            cli_run(["scale-table", "--b", "2", "--d", "1", "--xmax", "2", "--h", "0.001", "--out", str(d / "w.csv")]),
            cli_run(["epi", "--config", str(cfg), "--seed", "7", "--out", str(d / "t.nwk"), "--incidence", str(d / "i.csv"), "--coalescence", str(d / "h.csv")]),
            cli_run(["verify", "--check", "width-reversal", "--config", str(cfg), "--seed", "7", "--out", str(d / "report.json"), "--threads", str(1 + 2 * k)]),
        ]
        files = sorted(p.name for p in d.iterdir() if not p.name.endswith(".meta.json"))
        runs.append((codes, {n: (d / n).read_bytes() for n in files}))
    elapsed = time.perf_counter() - start
    ok = runs[0][0] == runs[1][0] == [0] * 5 and runs[0][1] == runs[1][1] and runs[0][1]["f.jsonl"] == runs[0][1]["g.jsonl"]
    line = f"{'PASS' if ok else 'FAIL'} criterion 10 (CLI reproducibility): {len(runs[0][1])} data files byte-identical across repeats, {elapsed:.1f} s"
    LINES.append(line)
    print(line)
    assert ok


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    tests.sort(key=lambda f: int(f.__name__.split("_")[2]))
    failures = 0
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
        except AssertionError:
            failures += 1
    print("\n".join(["", "summary:"] + LINES))
    sys.exit(1 if failures else 0)
