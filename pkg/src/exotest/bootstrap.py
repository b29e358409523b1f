"""Censored-data bootstrap (Types A and B) under the strengthened null."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .dataset import Dataset, DegenerateDataError, cell_groups
from .survival import StratifiedFit, conditional_km, km_eval, km_quantile
from .teststats import WEIGHT_SCHEMES, compute_statistics, run_pipeline

log = logging.getLogger(__name__)

KINDS = ("A", "B")
STATISTICS = ("ks", "cm")
MAX_RETRIES = 100


@dataclass(frozen=True)
class BootstrapConfig:
    kind: str = "A"
    B: int = 1000
    statistic: str = "cm"
    seed: int = rng_mod.DEFAULT_SEED
    gamma: float = 0.0
    weights: str = "constant"

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        object.__setattr__(self, "statistic", self.statistic.lower())
        if self.kind not in KINDS:
            raise ValueError(f"bootstrap kind must be A or B, got {self.kind!r}")
        if self.statistic not in STATISTICS:
            raise ValueError(f"statistic must be ks or cm, got {self.statistic!r}")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.weights not in WEIGHT_SCHEMES:
            raise ValueError(f"weights must be one of {WEIGHT_SCHEMES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class TestReport:
    config: BootstrapConfig
    t_obs: float
    t_star: np.ndarray
    p_value: float
    warnings: int = 0

    __test__ = False  # not a pytest class

    def to_dict(self, include_t_star: bool = True) -> dict:
        out = {
            "statistic": self.config.statistic,
            "kind": self.config.kind,
            "B": self.config.B,
            "seed": self.config.seed,
            "gamma": self.config.gamma,
            "weights": self.config.weights,
            "t_obs": self.t_obs,
            "p_value": self.p_value,
            "warnings": self.warnings,
        }
        if include_t_star:
            out["t_star"] = self.t_star.tolist()
        return out

    def to_json(self, include_t_star: bool = True) -> str:
        return json.dumps(self.to_dict(include_t_star), indent=2) + "\n"


def censoring_fit(data: Dataset, groups: dict | None = None) -> StratifiedFit:
    """Per-(x, z) product-limit fit of the censoring distribution (delta == 0 are the events)."""
    return conditional_km(data, "xz", event_code=0, groups=groups)


@dataclass
class Resample:
    data: Dataset
    both_infinite: int = 0
    t_candidate: np.ndarray = field(default=None, repr=False)


def resample(data: Dataset, fit_T: StratifiedFit, fit_C: StratifiedFit, kind: str,
             stream: np.random.Generator, groups: dict | None = None) -> Resample:
    """Draw one bootstrap sample; covariates are copied, (Y*, delta*) are regenerated.

    Two uniform vectors are drawn per call, durations first, so that Types A
    and B consume the stream identically.
    """
    kind = kind.upper()
    if kind not in KINDS:
        raise ValueError(f"bootstrap kind must be A or B, got {kind!r}")
    if groups is None:
        groups = cell_groups(data, "xz")
    n = data.n
    u_t = stream.random(n)
    u_c = stream.random(n)
    t_cand = np.empty(n)
    c_star = np.empty(n)
    y_star = np.empty(n)
    both_inf = 0
    for key, idx in groups.items():
        curve_t, curve_c = fit_T[key], fit_C[key]
        t_cand[idx] = km_quantile(curve_t, u_t[idx])
        if kind == "A":
            c_star[idx] = km_quantile(curve_c, u_c[idx])
        else:
            lo = km_eval(curve_c, data.y[idx])
            drawn = km_quantile(curve_c, lo + (1.0 - lo) * u_c[idx])
            c_star[idx] = np.where(data.delta[idx] == 1, drawn, data.y[idx])
        y_cell = np.minimum(t_cand[idx], c_star[idx])
        lost = ~np.isfinite(y_cell)
        if lost.any():
            # no finite candidate: park the row at the cell's last follow-up time, censored
            both_inf += int(lost.sum())
            y_cell[lost] = data.y[idx].max()
        y_star[idx] = y_cell
    delta_star = (y_star == t_cand).astype(np.int64)
    return Resample(data.replace(y=y_star, delta=delta_star), both_inf, t_cand)


def bootstrap_replicate(data, fit_T, fit_C, groups, kind, seed, b, gamma, weights, key_prefix=()):
    """One bootstrap statistic pair, retrying on degenerate draws. Returns (ks, cm, warnings)."""
    warnings = 0
    for attempt in range(MAX_RETRIES):
        stream = rng_mod.substream(seed, *key_prefix, b, attempt)
        draw = resample(data, fit_T, fit_C, kind, stream, groups)
        warnings += int(draw.both_infinite > 0)
        try:
            stats = compute_statistics(draw.data, gamma, weights)
        except DegenerateDataError:
            warnings += 1
            continue
        return stats.ks, stats.cm, warnings
    raise DegenerateDataError(
        f"bootstrap replicate {b} degenerate after {MAX_RETRIES} consecutive attempts")


def _bootstrap_chunk(args):
    data, fit_T, fit_C, groups, kind, seed, bs, gamma, weights = args
    return [bootstrap_replicate(data, fit_T, fit_C, groups, kind, seed, b, gamma, weights,
                                (rng_mod.BOOTSTRAP,)) for b in bs]


def chunked(items, k):
    k = max(1, min(k, len(items)))
    size = -(-len(items) // k)
    return [items[i:i + size] for i in range(0, len(items), size)]


def p_value(t_obs: float, t_star) -> float:
    t_star = np.asarray(t_star, dtype=float)
    return float(np.count_nonzero(t_star > t_obs)) / t_star.size


def run_test(data: Dataset, config: BootstrapConfig, threads: int = 1) -> TestReport:
    """Observed statistic, ``B`` bootstrap replicates and the upper-tail p-value.

    Replicate ``b`` uses the random substream keyed by ``(seed, b, attempt)``,
    so the report is identical for any ``threads``.
    """
    pipe = run_pipeline(data, config.gamma, config.weights)
    t_obs = pipe.statistics[config.statistic]
    groups = cell_groups(data, "xz")
    fit_T = pipe.fit_txz
    fit_C = censoring_fit(data, groups)
    bs = list(range(1, config.B + 1))
    tasks = [(data, fit_T, fit_C, groups, config.kind, config.seed, chunk,
              config.gamma, config.weights) for chunk in chunked(bs, threads)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = [r for part in pool.map(_bootstrap_chunk, tasks) for r in part]
    else:
        results = [r for task in tasks for r in _bootstrap_chunk(task)]
    col = STATISTICS.index(config.statistic)
    t_star = np.array([r[col] for r in results])
    warnings = sum(r[2] for r in results) + pipe.statistics.empty_cells
    if warnings:
        log.warning("%d degenerate bootstrap draws were redrawn or patched", warnings)
    return TestReport(config, t_obs, t_star, p_value(t_obs, t_star), warnings)
