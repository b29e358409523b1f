"""Product-limit estimation, stratified fits and the k-sample log-rank test."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import special

from .dataset import Dataset, cell_groups

SCHEMES = ("xz", "xwz")


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous product-limit CDF stored at its jump times.

    Only times carrying at least one event are stored. ``cdf_values[k]`` is
    the estimated CDF at ``jump_times[k]``; the curve is 0 before the first
    jump and flat after the last one.
    """

    jump_times: np.ndarray
    cdf_values: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    n_total: int

    def __call__(self, t):
        return km_eval(self, t)

    def quantile(self, u):
        return km_quantile(self, u)

    @property
    def plateau(self) -> float:
        return float(self.cdf_values[-1]) if self.cdf_values.size else 0.0

    def to_csv(self, header: bool = True) -> str:
        out = io.StringIO()
        if header:
            out.write("t,cdf,at_risk,events\n")
        for t, f, r, d in zip(self.jump_times.tolist(), self.cdf_values.tolist(),
                              self.at_risk.tolist(), self.events.tolist()):
            out.write(f"{t!r},{f!r},{r},{d}\n")
        return out.getvalue()


def km_fit(times, deltas, event_code: int = 1) -> SurvivalCurve:
    """Kaplan-Meier CDF of ``times`` where rows with ``delta == event_code`` are events.

    ``event_code=0`` fits the censoring distribution. Observations tied with
    an event time stay in that time's risk set regardless of status.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(deltas)
    if t.ndim != 1 or d.ndim != 1:
        raise ValueError("times and deltas must be one-dimensional")
    if t.size == 0:
        raise ValueError("km_fit needs at least one observation")
    if t.shape != d.shape:
        raise ValueError(f"length mismatch: {t.size} times vs {d.size} deltas")
    if event_code not in (0, 1):
        raise ValueError("event_code must be 0 or 1")

    n = t.size
    order = np.argsort(t, kind="stable")
    ts = t[order]
    ev = (d[order] == event_code).astype(np.int64)
    starts = np.flatnonzero(np.r_[True, ts[1:] != ts[:-1]])
    events = np.add.reduceat(ev, starts)
    keep = events > 0
    starts, events = starts[keep], events[keep]
    at_risk = n - starts
    surv = np.cumprod(1.0 - events / at_risk)
    return SurvivalCurve(
        jump_times=ts[starts],
        cdf_values=1.0 - surv,
        at_risk=at_risk,
        events=events,
        n_total=n,
    )


def km_eval(curve: SurvivalCurve, t):
    """Evaluate the right-continuous step CDF at ``t`` (scalar or array)."""
    idx = np.searchsorted(curve.jump_times, t, side="right") - 1
    if np.ndim(idx) == 0:
        return float(curve.cdf_values[idx]) if idx >= 0 else 0.0
    vals = np.zeros(idx.shape)
    hit = idx >= 0
    vals[hit] = curve.cdf_values[idx[hit]]
    return vals


def km_quantile(curve: SurvivalCurve, u):
    """Generalized inverse: smallest jump time with CDF >= ``u``, else ``inf``."""
    idx = np.searchsorted(curve.cdf_values, u, side="left")
    padded = np.append(curve.jump_times, np.inf)
    out = padded[idx]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class StratifiedFit:
    scheme: str
    curves: dict[tuple[int, ...], SurvivalCurve]

    def __getitem__(self, key) -> SurvivalCurve:
        return self.curves[tuple(key)]

    def __contains__(self, key) -> bool:
        return tuple(key) in self.curves

    def __len__(self) -> int:
        return len(self.curves)

    def keys(self):
        return self.curves.keys()

    def items(self):
        return self.curves.items()

    def to_csv(self) -> str:
        cols = ",".join(self.scheme)
        out = io.StringIO()
        out.write(f"{cols},t,cdf,at_risk,events\n")
        for key, curve in self.curves.items():
            prefix = ",".join(str(k) for k in key)
            for line in curve.to_csv(header=False).splitlines():
                out.write(f"{prefix},{line}\n")
        return out.getvalue()


def conditional_km(data: Dataset, scheme: str = "xz", event_code: int = 1,
                   groups: dict | None = None) -> StratifiedFit:
    """Fit one product-limit curve per nonempty cell of ``scheme``.

    ``groups`` may pass precomputed row indices from :func:`cell_groups`.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if groups is None:
        groups = cell_groups(data, scheme)
    curves = {key: km_fit(data.y[idx], data.delta[idx], event_code)
              for key, idx in groups.items()}
    return StratifiedFit(scheme, curves)


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    df: int
    p_value: float


def chi2_sf(stat: float, df: int) -> float:
    """Upper-tail chi-square probability via the regularized incomplete gamma."""
    if stat <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, stat / 2.0))


def logrank(times, deltas, group) -> LogRankResult:
    """k-sample log-rank test (observed minus expected events, hypergeometric variance)."""
    t = np.asarray(times, dtype=float)
    d = np.asarray(deltas).astype(bool)
    g = np.asarray(group)
    if t.size == 0:
        raise ValueError("logrank needs at least one observation")
    if not (t.shape == d.shape == g.shape):
        raise ValueError("times, deltas and group must have equal lengths")
    labels, gi = np.unique(g, return_inverse=True)
    k = labels.size
    if k < 2:
        raise ValueError("logrank needs at least two groups")

    event_times = np.unique(t[d])
    # at-risk counts per (event time, group)
    at_risk = np.empty((event_times.size, k))
    events = np.zeros((event_times.size, k))
    for j in range(k):
        tj = np.sort(t[gi == j])
        at_risk[:, j] = tj.size - np.searchsorted(tj, event_times, side="left")
        ej = t[(gi == j) & d]
        np.add.at(events[:, j], np.searchsorted(event_times, ej), 1.0)

    n_tot = at_risk.sum(axis=1)
    d_tot = events.sum(axis=1)
    frac = at_risk / n_tot[:, None]
    observed_minus_expected = (events - d_tot[:, None] * frac).sum(axis=0)
    scale = np.where(n_tot > 1, d_tot * (n_tot - d_tot) / np.maximum(n_tot - 1, 1), 0.0)
    cov = (np.einsum("t,tg->g", scale, frac)[:, None] * np.eye(k)
           - np.einsum("t,tg,th->gh", scale, frac, frac))
    u = observed_minus_expected[:-1]
    v = cov[:-1, :-1]
    stat = float(u @ np.linalg.pinv(v) @ u) if np.any(u) else 0.0
    stat = max(stat, 0.0)
    return LogRankResult(chi_square=stat, df=k - 1, p_value=chi2_sf(stat, k - 1))
