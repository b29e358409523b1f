"""Estimated conditional ranks and their marginal / (x,w)-conditional CDFs."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, cell_groups
from .survival import StratifiedFit, SurvivalCurve, km_eval, km_fit

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RankedSample:
    v_hat: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray

    @property
    def n(self) -> int:
        return int(self.v_hat.shape[0])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("v_hat,delta,x,w,z\n")
        for row in zip(self.v_hat.tolist(), self.delta.tolist(), self.x.tolist(),
                       self.w.tolist(), self.z.tolist()):
            out.write(f"{row[0]!r},{row[1]},{row[2]},{row[3]},{row[4]}\n")
        return out.getvalue()


def estimate_ranks(data: Dataset, fit_txz: StratifiedFit, groups: dict | None = None) -> RankedSample:
    """Plug each follow-up time into its own (x,z) cell's product-limit CDF."""
    if fit_txz.scheme != "xz":
        raise ValueError("ranks need a fit stratified on (x, z)")
    if groups is None:
        groups = cell_groups(data, "xz")
    v = np.empty(data.n)
    for key, idx in groups.items():
        if key not in fit_txz:
            raise KeyError(f"no fitted curve for (x, z) cell {key}")
        v[idx] = km_eval(fit_txz[key], data.y[idx])
    return RankedSample(v, data.delta, data.x, data.w, data.z)


def rank_marginal_cdf(ranks: RankedSample) -> SurvivalCurve:
    return km_fit(ranks.v_hat, ranks.delta, event_code=1)


@dataclass(frozen=True)
class CondProbTable:
    """``probs[(x, w)][z]`` is the share of cell ``(x, w)`` observed with treatment ``z``."""

    probs: dict[tuple[int, int], dict[int, float]]

    def __getitem__(self, key):
        return self.probs[tuple(key)]


def p_z_given_xw(data, groups: dict | None = None) -> CondProbTable:
    if groups is None:
        groups = cell_groups(data, "xwz")
    counts: dict[tuple[int, int], dict[int, int]] = {}
    for (x, w, z), idx in groups.items():
        counts.setdefault((x, w), {})[z] = idx.size
    probs = {}
    for xw, by_z in counts.items():
        total = sum(by_z.values())
        probs[xw] = {z: c / total for z, c in by_z.items()}
    return CondProbTable(probs)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function, 0 left of ``points[0]``."""

    points: np.ndarray
    values: np.ndarray

    def __call__(self, v):
        idx = np.searchsorted(self.points, v, side="right") - 1
        if np.ndim(idx) == 0:
            return float(self.values[idx]) if idx >= 0 else 0.0
        out = np.zeros(idx.shape)
        hit = idx >= 0
        out[hit] = self.values[idx[hit]]
        return out

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)


@dataclass(frozen=True, eq=False)
class RankCdfSet:
    marginal: SurvivalCurve
    conditional: dict[tuple[int, int], StepFunction]
    by_cell: dict[tuple[int, int, int], SurvivalCurve] = field(default_factory=dict)
    empty_cells: tuple[tuple[int, int, int], ...] = ()


def _cell_rank_curves(ranks: RankedSample, groups=None) -> dict[tuple[int, int, int], SurvivalCurve]:
    if groups is None:
        groups = cell_groups(ranks, "xwz")
    return {key: km_fit(ranks.v_hat[idx], ranks.delta[idx], event_code=1)
            for key, idx in groups.items()}


def _mix(curves: dict[tuple[int, int, int], SurvivalCurve],
         probs: CondProbTable) -> dict[tuple[int, int], StepFunction]:
    out = {}
    for xw, by_z in probs.probs.items():
        members = []
        for z, p in by_z.items():
            if p <= 0:
                continue
            key = (xw[0], xw[1], z)
            if key not in curves:
                raise ValueError(f"cell {key} has positive weight but no observations")
            members.append((p, curves[key]))
        points = np.unique(np.concatenate([c.jump_times for _, c in members]))
        values = np.zeros(points.shape)
        for p, c in members:
            values += p * km_eval(c, points)
        out[xw] = StepFunction(points, values)
    return out


def rank_conditional_cdf(ranks: RankedSample, probs: CondProbTable) -> dict[tuple[int, int], StepFunction]:
    """Mixture over z of per-(x,w,z) product-limit CDFs of the ranks, weighted by ``probs``."""
    return _mix(_cell_rank_curves(ranks), probs)


def rank_cdfs(ranks: RankedSample, probs: CondProbTable, groups=None) -> RankCdfSet:
    curves = _cell_rank_curves(ranks, groups)
    empty = tuple(k for k, c in curves.items() if c.jump_times.size == 0)
    for key in empty:
        log.debug("cell (x, w, z) = %s has no events; its rank CDF is identically 0", key)
    return RankCdfSet(
        marginal=rank_marginal_cdf(ranks),
        conditional=_mix(curves, probs),
        by_cell=curves,
        empty_cells=empty,
    )


def uniform_distance(curve: SurvivalCurve, upper: float = 1.0) -> float:
    """``sup_{v in [0, upper]} |F(v) - v|`` for a step CDF, checking both sides of each jump."""
    pts = curve.jump_times
    keep = pts <= upper
    pts, right = pts[keep], curve.cdf_values[keep]
    left = np.r_[0.0, right[:-1]]
    cands = [np.abs(right - pts), np.abs(left - pts), [abs(upper - (right[-1] if right.size else 0.0))]]
    return float(max(np.max(c) if len(c) else 0.0 for c in cands))
