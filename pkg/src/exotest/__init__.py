"""Bootstrap tests of treatment exogeneity in censored duration models."""

__version__ = "0.1.0"

from .bootstrap import BootstrapConfig, TestReport, run_test
from .dataset import DataError, Dataset, DegenerateDataError, cell_audit, min_cell_check, parse_csv
from .montecarlo import DgpParams, dgp_sample, kendall_tau_b, warp_speed, warp_speed_study
from .survival import SurvivalCurve, conditional_km, km_eval, km_fit, km_quantile, logrank
from .teststats import compute_statistics, run_pipeline

__all__ = [
    "BootstrapConfig", "TestReport", "run_test",
    "DataError", "Dataset", "DegenerateDataError", "cell_audit", "min_cell_check", "parse_csv",
    "DgpParams", "dgp_sample", "kendall_tau_b", "warp_speed", "warp_speed_study",
    "SurvivalCurve", "conditional_km", "km_eval", "km_fit", "km_quantile", "logrank",
    "compute_statistics", "run_pipeline",
]
