"""Kolmogorov-Smirnov and weighted Cramer-von Mises exogeneity statistics."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, DegenerateDataError, cell_groups
from .ranks import RankCdfSet, RankedSample, estimate_ranks, p_z_given_xw, rank_cdfs
from .survival import conditional_km

WEIGHT_SCHEMES = ("constant", "empirical")


@dataclass(frozen=True, eq=False)
class EvalGrid:
    points: np.ndarray
    gamma: float

    @property
    def upper(self) -> float:
        return 1.0 - self.gamma


def make_grid(ranks: RankedSample, gamma: float = 0.0) -> EvalGrid:
    """Distinct ranks not above ``1 - gamma``, with 0 prepended.

    Every curve involved is a step function jumping only at observed ranks,
    so this grid carries every value the sup or the integral can see.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    v = ranks.v_hat
    pts = np.unique(np.r_[0.0, v[v <= 1.0 - gamma]])
    return EvalGrid(pts, float(gamma))


@dataclass(frozen=True, eq=False)
class DSurface:
    """``values[k, j]`` is conditional minus marginal rank CDF for ``cells[k]`` at ``points[j]``."""

    cells: tuple[tuple[int, int], ...]
    points: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("v,x,w,d_hat\n")
        pts = self.points.tolist()
        for k, (x, w) in enumerate(self.cells):
            for v, d in zip(pts, self.values[k].tolist()):
                out.write(f"{v!r},{x},{w},{d!r}\n")
        return out.getvalue()

    def scaled(self, factor: float) -> "DSurface":
        return DSurface(self.cells, self.points, factor * self.values)


def d_surface(cdfs: RankCdfSet, grid: EvalGrid) -> DSurface:
    cells = tuple(sorted(cdfs.conditional))
    marginal = cdfs.marginal(grid.points)
    values = np.vstack([cdfs.conditional[c](grid.points) - marginal for c in cells])
    return DSurface(cells, grid.points, values)


def ks_statistic(d: DSurface, n: int) -> float:
    if d.values.size == 0:
        raise ValueError("empty D surface")
    return math.sqrt(n) * float(np.max(np.abs(d.values)))


@dataclass(frozen=True)
class WeightTable:
    weights: dict[tuple[int, int], float]
    scheme: str

    def __getitem__(self, key) -> float:
        return self.weights[tuple(key)]


def make_weights(data, scheme: str = "constant") -> WeightTable:
    """Cell weights over nonempty (x, w): all ones, or empirical cell proportions."""
    if scheme not in WEIGHT_SCHEMES:
        raise ValueError(f"weight scheme must be one of {WEIGHT_SCHEMES}, got {scheme!r}")
    groups = cell_groups(data, "xw")
    n = sum(idx.size for idx in groups.values())
    if scheme == "constant":
        return WeightTable({k: 1.0 for k in groups}, scheme)
    return WeightTable({k: idx.size / n for k, idx in groups.items()}, scheme)


def cm_statistic(d: DSurface, cdfs: RankCdfSet, weights: WeightTable, n: int) -> float:
    """``n * sum_cells weight * sum_j D(v_j)^2 * jump_j`` over the conditional CDF's jumps in the grid range."""
    upper = float(d.points[-1]) if d.points.size else 0.0
    total = 0.0
    for k, cell in enumerate(d.cells):
        wt = weights[cell]
        if wt < 0:
            raise ValueError(f"negative weight for cell {cell}")
        cond = cdfs.conditional[cell]
        keep = cond.points <= upper
        pts = cond.points[keep]
        jumps = cond.jumps[keep]
        idx = np.searchsorted(d.points, pts)
        if np.any(idx >= d.points.size) or np.any(d.points[np.minimum(idx, d.points.size - 1)] != pts):
            raise ValueError("conditional CDF jumps are not on the evaluation grid")
        total += wt * float(np.sum(d.values[k, idx] ** 2 * jumps))
    return n * total


@dataclass(frozen=True)
class Statistics:
    ks: float
    cm: float
    empty_cells: int = 0

    def __getitem__(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True, eq=False)
class Pipeline:
    """Every intermediate of one statistic evaluation, for inspection and export."""

    fit_txz: object
    ranks: RankedSample
    cdfs: RankCdfSet
    grid: EvalGrid
    surface: DSurface
    weights: WeightTable
    statistics: Statistics


def run_pipeline(data: Dataset, gamma: float = 0.0, weights: str = "constant") -> Pipeline:
    """Fit conditional KMs, estimate ranks, and compute both statistics.

    Raises
    ------
    DegenerateDataError
        If some (x, z) stratum has no events, so its CDF is identically 0
        and its ranks carry no information.
    """
    groups_xz = cell_groups(data, "xz")
    fit = conditional_km(data, "xz", event_code=1, groups=groups_xz)
    dead = [k for k, c in fit.items() if c.jump_times.size == 0]
    if dead:
        raise DegenerateDataError(f"(x, z) strata without events: {dead}")
    ranks = estimate_ranks(data, fit, groups_xz)
    groups_xwz = cell_groups(data, "xwz")
    cdfs = rank_cdfs(ranks, p_z_given_xw(data, groups_xwz), groups_xwz)
    grid = make_grid(ranks, gamma)
    surface = d_surface(cdfs, grid)
    wt = make_weights(data, weights)
    stats = Statistics(
        ks=ks_statistic(surface, data.n),
        cm=cm_statistic(surface, cdfs, wt, data.n),
        empty_cells=len(cdfs.empty_cells),
    )
    return Pipeline(fit, ranks, cdfs, grid, surface, wt, stats)


def compute_statistics(data: Dataset, gamma: float = 0.0, weights: str = "constant") -> Statistics:
    return run_pipeline(data, gamma, weights).statistics
