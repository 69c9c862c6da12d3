"""Verification harness: test statistics, reports and the checks."""

from .checks import (
    calibration,
    check_contour_law,
    check_contour_transform,
    check_geometric_equivalence,
    check_identities,
    check_measure_change,
    check_over_undershoot,
    check_reversal_invariance,
    check_scale,
    check_survival_lemma,
    check_width_reversal,
    dual_specs,
    survival_prediction,
)
from .report import RunReport, TestResult
from .stats import InsufficientSample, chi2_geometric, ks_two_sample

__all__ = [
    "InsufficientSample",
    "RunReport",
    "TestResult",
    "calibration",
    "check_contour_law",
    "check_contour_transform",
    "check_geometric_equivalence",
    "check_identities",
    "check_measure_change",
    "check_over_undershoot",
    "check_reversal_invariance",
    "check_scale",
    "check_survival_lemma",
    "check_width_reversal",
    "chi2_geometric",
    "dual_specs",
    "ks_two_sample",
    "survival_prediction",
]
