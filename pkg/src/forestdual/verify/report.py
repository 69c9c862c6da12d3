"""Run reports: stored statistics, critical values and pass flags."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


class TestResult:
    """One statistical or exact test.

    ``kind`` fixes how ``critical`` follows from the stored numbers: see
    ``recompute_critical``.  The test passes iff statistic <= critical.
    """

    __test__ = False  # not a pytest class

    def __init__(self, name: str, kind: str, statistic: float, critical: float, **extra):
        self.name = name
        self.kind = kind
        self.statistic = float(statistic)
        self.critical = float(critical)
        self.extra = extra

    @property
    def passed(self) -> bool:
        return self.statistic <= self.critical

    def recompute_critical(self) -> float:
        e = self.extra
        if self.kind == "ks":
            n, m = e["n"], e["m"]
            return float(stats.kstwobign.isf(e["alpha"]) / math.sqrt(n * m / (n + m)))
        if self.kind == "ks1":
            return float(stats.kstwobign.isf(e["alpha"]) / math.sqrt(e["n"]))
        if self.kind == "chi2":
            return float(stats.chi2.isf(e["alpha"], e["df"]))
        if self.kind in ("binomial", "bound"):
            return self.critical
        if self.kind == "exact":
            return 0.0
        if self.kind == "correlation":
            return e["sigmas"] / math.sqrt(e["n"])
        if self.kind == "interval":
            return e["sigmas"] * e["sigma"] + e["bias"]
        raise ValueError(f"unknown test kind {self.kind!r}")

    def recompute_statistic(self) -> float:
        """Statistics that are simple functions of stored summaries."""
        e = self.extra
        if self.kind == "binomial":
            return max(abs(e["estimate"] - e["expected"]) - e["bias"], 0.0) / e["sigma"]
        if self.kind == "interval":
            return abs(e["left"] - e["right"])
        if self.kind == "correlation":
            return abs(e["r"])
        return self.statistic

    def audit(self, rtol: float = 1e-9) -> bool:
        """True when the stored pass flag follows from the stored numbers."""
        crit = self.recompute_critical()
        stat = self.recompute_statistic()
        ok_c = math.isclose(crit, self.critical, rel_tol=rtol, abs_tol=1e-15)
        ok_s = math.isclose(stat, self.statistic, rel_tol=rtol, abs_tol=1e-12)
        return ok_c and ok_s and ((stat <= crit) == self.passed)

    def to_dict(self) -> dict:
        return _clean({"name": self.name, "kind": self.kind, "statistic": self.statistic, "critical": self.critical, "passed": self.passed, **self.extra})

    @classmethod
    def from_dict(cls, d: dict) -> "TestResult":
        d = dict(d)
        d.pop("passed", None)
        return cls(d.pop("name"), d.pop("kind"), d.pop("statistic"), d.pop("critical"), **d)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: {self.kind} statistic {self.statistic:.6g} vs critical {self.critical:.6g}"


@dataclass
class RunReport:
    """Outcome of one check.

    Everything except ``meta`` (wall-clock runtime) is a deterministic
    function of the seed and parameters.
    """

    check_id: str
    seed: int
    params: dict = field(default_factory=dict)
    n_samples: int = 0
    tests: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    skipped: bool = False
    meta: dict = field(default_factory=dict)

    def add(self, result: TestResult) -> TestResult:
        self.tests.append(result)
        return result

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.tests)

    def audit(self) -> bool:
        return all(t.audit() for t in self.tests)

    def test(self, name: str) -> TestResult:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    def failures(self) -> list:
        return [t for t in self.tests if not t.passed]

    def to_dict(self, with_meta: bool = True) -> dict:
        d = {
            "check_id": self.check_id,
            "seed": self.seed,
            "params": self.params,
            "n_samples": self.n_samples,
            "passed": self.passed,
            "skipped": self.skipped,
            "tests": [t.to_dict() for t in self.tests],
            "notes": list(self.notes),
        }
        if with_meta:
            d["meta"] = self.meta
        return _clean(d)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            d["check_id"],
            d["seed"],
            d.get("params", {}),
            d.get("n_samples", 0),
            [TestResult.from_dict(t) for t in d.get("tests", [])],
            d.get("notes", []),
            d.get("skipped", False),
            d.get("meta", {}),
        )

    def to_json(self, with_meta: bool = True) -> str:
        return json.dumps(self.to_dict(with_meta), indent=2, sort_keys=True)

    def summary(self) -> str:
        if self.skipped:
            return f"SKIP {self.check_id}: " + "; ".join(self.notes)
        flag = "PASS" if self.passed else "FAIL"
        bad = self.failures()
        tail = f" (failed: {', '.join(t.name for t in bad)})" if bad else ""
        return f"{flag} {self.check_id}: {len(self.tests)} tests, n={self.n_samples}{tail}"


def bonferroni(alpha: float, k: int) -> float:
    return alpha / max(int(k), 1)
