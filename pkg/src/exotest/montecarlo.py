"""Simulation design, warp-speed size/power studies and supporting utilities."""

from __future__ import annotations

import io
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from . import rng as rng_mod
from .bootstrap import KINDS, STATISTICS, bootstrap_replicate, censoring_fit, chunked
from .dataset import Dataset, DegenerateDataError, cell_groups
from .teststats import run_pipeline

MAX_RETRIES = 100


def inverse_normal_cdf(u):
    """Standard normal quantile on the open interval (0, 1)."""
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ValueError("inverse_normal_cdf needs 0 < u < 1")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out


def expit(a):
    return special.expit(a)


def kendall_tau_b(a, b) -> float:
    """Tie-corrected Kendall's tau-b; ``nan`` if either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("kendall_tau_b needs two equal-length 1-d inputs")
    if a.size == 0:
        raise ValueError("kendall_tau_b needs at least one pair")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return math.nan
    return float(stats.kendalltau(a, b, variant="b").statistic)


@dataclass(frozen=True)
class DgpParams:
    alpha: float = 0.0
    eta: float = 2.4
    lam: float = -5.7
    n: int = 500

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def key(self) -> tuple[int, ...]:
        """Stream key derived from the parameter values, not from a grid position."""
        bits = [struct.unpack("<Q", struct.pack("<d", float(v)))[0]
                for v in (self.alpha, self.eta, self.lam)]
        return (*bits, int(self.n))


@dataclass(frozen=True, eq=False)
class LatentDataset:
    data: Dataset
    u_t: np.ndarray
    t: np.ndarray
    c: np.ndarray

    @property
    def censoring_rate(self) -> float:
        return float(np.mean(self.data.delta == 0))


def dgp_sample(params: DgpParams, stream: np.random.Generator) -> LatentDataset:
    """Binary covariate, instrument and treatment; log-normal durations, exponential censoring."""
    n = params.n
    u_t = stream.random(n)
    u_c = stream.random(n)
    x = (stream.random(n) < 0.45).astype(np.int64)
    w = (stream.random(n) < expit(0.9 - 0.3 * x)).astype(np.int64)
    z_index = -2.0 + 0.2 * x + params.eta * w + params.alpha * (u_t - 0.5)
    z = (stream.random(n) < expit(z_index)).astype(np.int64)
    # stream.random is on [0, 1); nudge an exact 0 so the quantile stays finite
    u_t = np.where(u_t == 0.0, np.nextafter(0.0, 1.0), u_t)
    t = np.exp(4.0 - 0.5 * x - z + special.ndtri(u_t))
    c = -np.log1p(-u_c) / np.exp(params.lam + 0.9 * x + 0.8 * z)
    c = np.where(c > 0, c, np.nextafter(0.0, 1.0))
    y = np.minimum(t, c)
    delta = (t <= c).astype(np.int64)
    return LatentDataset(Dataset(y, delta, x, w, z), u_t, t, c)


def simulate(params: DgpParams, seed: int) -> LatentDataset:
    return dgp_sample(params, rng_mod.substream(seed, rng_mod.SIMULATE, *params.key()))


@dataclass(frozen=True)
class StudyResult:
    alpha: float
    eta: float
    lam: float
    n: int
    statistic: str
    boot_kind: str
    reject_rate: float
    mean_cens: float
    tau_wz: float
    tau_zu: float
    M: int
    crit_value: float


CSV_COLUMNS = ("alpha", "eta", "lambda", "n", "statistic", "boot_kind", "reject_rate",
               "mean_cens", "tau_wz", "tau_zu", "crit_value")


def results_to_csv(results) -> str:
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in results:
        row = asdict(r)
        row["lambda"] = row.pop("lam")
        out.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                           for c in CSV_COLUMNS) + "\n")
    return out.getvalue()


def critical_value(t_star, nominal: float) -> float:
    """Order statistic ``ceil((1 - nominal) * M)`` of the pooled bootstrap statistics."""
    t_sorted = np.sort(np.asarray(t_star, dtype=float))
    k = math.ceil(round((1.0 - nominal) * t_sorted.size, 9))
    return float(t_sorted[min(max(k, 1), t_sorted.size) - 1])


@dataclass(frozen=True, eq=False)
class WarpSpeedRun:
    """Raw per-replication output for one parameter point.

    ``t_obs[s]`` holds the statistic ``s`` on each simulated dataset and
    ``t_star[(kind, s)]`` the single bootstrap statistic drawn for it.
    """

    params: DgpParams
    t_obs: dict[str, np.ndarray]
    t_star: dict[tuple[str, str], np.ndarray]
    censoring: np.ndarray
    tau_wz: np.ndarray
    tau_zu: np.ndarray
    warnings: int

    @property
    def M(self) -> int:
        return int(self.censoring.size)

    def reject_rate(self, statistic: str, kind: str, nominal: float = 0.05) -> float:
        crit = critical_value(self.t_star[(kind, statistic)], nominal)
        return float(np.mean(self.t_obs[statistic] > crit))

    def bootstrap_pvalues(self, statistic: str, kind: str) -> np.ndarray:
        """Each dataset's statistic against the pooled bootstrap statistics."""
        pooled = np.sort(self.t_star[(kind, statistic)])
        above = pooled.size - np.searchsorted(pooled, self.t_obs[statistic], side="right")
        return above / pooled.size

    def monte_carlo_pvalues(self, statistic: str) -> np.ndarray:
        """Each dataset's statistic against the other simulated statistics' upper tail."""
        obs = self.t_obs[statistic]
        pooled = np.sort(obs)
        return (pooled.size - np.searchsorted(pooled, obs, side="right")) / pooled.size

    def results(self, nominal: float = 0.05, statistics=STATISTICS, kinds=KINDS) -> list[StudyResult]:
        out = []
        for s in statistics:
            for k in kinds:
                out.append(StudyResult(
                    alpha=self.params.alpha, eta=self.params.eta, lam=self.params.lam,
                    n=self.params.n, statistic=s, boot_kind=k,
                    reject_rate=self.reject_rate(s, k, nominal),
                    mean_cens=float(np.mean(self.censoring)),
                    tau_wz=float(np.nanmean(self.tau_wz)),
                    tau_zu=float(np.nanmean(self.tau_zu)),
                    M=self.M,
                    crit_value=critical_value(self.t_star[(k, s)], nominal),
                ))
        return out


def _mc_replication(params: DgpParams, m: int, seed: int, kinds, gamma, weights):
    base = (rng_mod.MONTE_CARLO, *params.key(), m)
    warnings = 0
    for attempt in range(MAX_RETRIES):
        latent = dgp_sample(params, rng_mod.substream(seed, *base, attempt, 0))
        data = latent.data
        try:
            pipe = run_pipeline(data, gamma, weights)
        except DegenerateDataError:
            warnings += 1
            continue
        groups = cell_groups(data, "xz")
        fit_c = censoring_fit(data, groups)
        stars = {}
        for kind in kinds:
            ks, cm, wn = bootstrap_replicate(data, pipe.fit_txz, fit_c, groups, kind, seed, 0,
                                             gamma, weights, (*base, attempt, 1 + KINDS.index(kind)))
            warnings += wn
            stars[kind] = (ks, cm)
        return {
            "ks": pipe.statistics.ks,
            "cm": pipe.statistics.cm,
            "stars": stars,
            "cens": latent.censoring_rate,
            "tau_wz": kendall_tau_b(data.w, data.z),
            "tau_zu": kendall_tau_b(data.z, latent.u_t),
            "warnings": warnings,
        }
    raise DegenerateDataError(f"replication {m} degenerate after {MAX_RETRIES} attempts")


def _mc_chunk(args):
    params, ms, seed, kinds, gamma, weights = args
    return [_mc_replication(params, m, seed, kinds, gamma, weights) for m in ms]


def warp_speed(params: DgpParams, M: int = 1000, seed: int = rng_mod.DEFAULT_SEED,
               kinds=KINDS, gamma: float = 0.0, weights: str = "constant",
               threads: int = 1) -> WarpSpeedRun:
    """Simulate ``M`` datasets, each with its statistics and one bootstrap draw per kind."""
    if M < 1:
        raise ValueError("M must be at least 1")
    kinds = tuple(k.upper() for k in kinds)
    tasks = [(params, chunk, seed, kinds, gamma, weights)
             for chunk in chunked(list(range(M)), threads)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reps = [r for part in pool.map(_mc_chunk, tasks) for r in part]
    else:
        reps = [r for task in tasks for r in _mc_chunk(task)]
    t_obs = {s: np.array([r[s] for r in reps]) for s in STATISTICS}
    t_star = {(k, s): np.array([r["stars"][k][STATISTICS.index(s)] for r in reps])
              for k in kinds for s in STATISTICS}
    return WarpSpeedRun(
        params=params,
        t_obs=t_obs,
        t_star=t_star,
        censoring=np.array([r["cens"] for r in reps]),
        tau_wz=np.array([r["tau_wz"] for r in reps]),
        tau_zu=np.array([r["tau_zu"] for r in reps]),
        warnings=sum(r["warnings"] for r in reps),
    )


def warp_speed_study(grid, M: int = 1000, statistics=STATISTICS, kinds=KINDS,
                     nominal: float = 0.05, seed: int = rng_mod.DEFAULT_SEED,
                     gamma: float = 0.0, weights: str = "constant",
                     threads: int = 1) -> list[StudyResult]:
    """Rejection rates over a grid of parameter points, one row per (point, statistic, kind)."""
    if not 0.0 < nominal < 1.0:
        raise ValueError("nominal level must lie in (0, 1)")
    statistics = tuple(s.lower() for s in statistics)
    kinds = tuple(k.upper() for k in kinds)
    out = []
    for params in grid:
        run = warp_speed(params, M, seed, kinds, gamma, weights, threads)
        out.extend(run.results(nominal, statistics, kinds))
    return out


# cell counts (x=HSGED, w, z) and censoring rates shaped like the white-men stratum
JTPA_LIKE_CELLS = {
    (0, 0, 0): (171, 0.895), (0, 0, 1): (32, 0.906),
    (1, 0, 0): (141, 0.908), (1, 0, 1): (22, 0.909),
    (0, 1, 0): (152, 0.875), (0, 1, 1): (255, 0.906),
    (1, 1, 0): (126, 0.873), (1, 1, 1): (228, 0.899),
}


def jtpa_like_counts(scale: float = 1.0) -> dict[tuple[int, int, int], tuple[int, int]]:
    """``(count, n_censored)`` per cell after scaling; every cell keeps at least two rows and one event."""
    out = {}
    for key, (count, rate) in JTPA_LIKE_CELLS.items():
        c = max(2, int(round(count * scale)))
        cens = min(c - 1, int(round(c * rate)))
        out[key] = (c, cens)
    return out


def jtpa_like_fixture(seed: int = 0, scale: float = 1.0) -> Dataset:
    """Synthetic follow-up data in days with heavy administrative censoring near day 600."""
    stream = np.random.default_rng(seed)
    rows_y, rows_d, rows_x, rows_w, rows_z = [], [], [], [], []
    for (x, w, z), (count, cens) in jtpa_like_counts(scale).items():
        events = count - cens
        y_event = np.ceil(stream.uniform(1.0, 550.0, events))
        y_cens = np.ceil(stream.uniform(540.0, 700.0, cens))
        rows_y += [y_event, y_cens]
        rows_d += [np.ones(events, np.int64), np.zeros(cens, np.int64)]
        for col, v in ((rows_x, x), (rows_w, w), (rows_z, z)):
            col.append(np.full(count, v, np.int64))
    y = np.concatenate(rows_y)
    perm = stream.permutation(y.size)
    cols = [np.concatenate(c)[perm] for c in (rows_d, rows_x, rows_w, rows_z)]
    return Dataset(y[perm], *cols)
