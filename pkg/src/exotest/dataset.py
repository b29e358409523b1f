"""Observation data model, CSV ingestion and per-cell descriptive audit."""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

HEADER = ("y", "delta", "x", "w", "z")


class DataError(ValueError):
    """Raised for malformed or invalid input data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateDataError(RuntimeError):
    """Raised when a stratum cannot support estimation (e.g. it has no events)."""


class Observation(NamedTuple):
    y: float
    delta: int
    x: int
    w: int
    z: int


@dataclass(frozen=True)
class Dataset:
    """Columnar store of ``(y, delta, x, w, z)`` observations.

    Rows keep their original order. Level sets are the sorted distinct codes
    present in the data.
    """

    y: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    levels_x: tuple[int, ...] = field(init=False)
    levels_w: tuple[int, ...] = field(init=False)
    levels_z: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float)
        cols = {"y": y}
        for name in ("delta", "x", "w", "z"):
            cols[name] = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
        n = y.shape[0]
        if n == 0:
            raise DataError("dataset is empty")
        for name, col in cols.items():
            if col.ndim != 1 or col.shape[0] != n:
                raise DataError(f"column {name!r} has the wrong shape")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise DataError("follow-up times must be finite and positive")
        if np.any((cols["delta"] != 0) & (cols["delta"] != 1)):
            raise DataError("delta must be 0 or 1")
        for name in ("x", "w", "z"):
            if np.any(cols[name] < 0):
                raise DataError(f"{name} codes must be non-negative")
        for name, col in cols.items():
            col.setflags(write=False)
            object.__setattr__(self, name, col)
        for name in ("x", "w", "z"):
            levels = tuple(int(v) for v in np.unique(cols[name]))
            object.__setattr__(self, f"levels_{name}", levels)

    @classmethod
    def from_observations(cls, observations) -> "Dataset":
        rows = list(observations)
        if not rows:
            raise DataError("dataset is empty")
        y, delta, x, w, z = zip(*rows)
        return cls(np.array(y, float), np.array(delta), np.array(x), np.array(w), np.array(z))

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Observation]:
        for row in zip(self.y.tolist(), self.delta.tolist(), self.x.tolist(),
                       self.w.tolist(), self.z.tolist()):
            yield Observation(*row)

    @property
    def observations(self) -> list[Observation]:
        return list(self)

    def cell_codes(self, scheme: str) -> np.ndarray:
        """Stack the codes named by ``scheme`` (e.g. ``"xz"``) into an ``(n, k)`` array."""
        return np.column_stack([getattr(self, c) for c in scheme])

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.y[index], self.delta[index], self.x[index], self.w[index], self.z[index])

    def replace(self, y=None, delta=None) -> "Dataset":
        return Dataset(self.y if y is None else y, self.delta if delta is None else delta,
                       self.x, self.w, self.z)


def cell_groups(data, scheme: str) -> dict[tuple[int, ...], np.ndarray]:
    """Map each nonempty cell under ``scheme`` to the (sorted) row indices it holds.

    ``data`` is anything carrying integer ``x``, ``w``, ``z`` columns.
    """
    cols = [np.asarray(getattr(data, c)) for c in scheme]
    levels = [getattr(data, f"levels_{c}", None) or tuple(np.unique(col).tolist())
              for c, col in zip(scheme, cols)]
    n = cols[0].shape[0]
    flat = np.zeros(n, dtype=np.int64)
    for col, lev in zip(cols, levels):
        flat = flat * len(lev) + np.searchsorted(lev, col)
    order = np.argsort(flat, kind="stable")
    sflat = flat[order]
    starts = np.flatnonzero(np.r_[True, sflat[1:] != sflat[:-1]])
    bounds = np.r_[starts, n]
    groups = {}
    for j, s in enumerate(starts):
        first = order[s]
        key = tuple(int(col[first]) for col in cols)
        groups[key] = order[s:bounds[j + 1]]
    return groups


def _parse_float(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"cannot parse follow-up time {token!r}", line) from None
    if not np.isfinite(value):
        raise DataError(f"follow-up time {token!r} is not finite", line)
    if value <= 0:
        raise DataError(f"non-positive follow-up time {token!r}", line)
    return value


def _parse_code(token: str, name: str, line: int) -> int:
    token = token.strip()
    if not token.isdigit():
        raise DataError(f"{name} must be a non-negative integer, got {token!r}", line)
    return int(token)


def parse_csv(source) -> Dataset:
    """Parse ``y,delta,x,w,z`` CSV text (a string or a text stream).

    Raises
    ------
    DataError
        On an empty file, a bad header, or any malformed row; the message
        carries the 1-based line number.
    """
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError("empty file")
    header = tuple(h.strip() for h in lines[0].lstrip("\ufeff").split(","))
    if header != HEADER:
        raise DataError(f"expected header {','.join(HEADER)}", 1)
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 5:
            raise DataError(f"expected 5 fields, got {len(parts)}", lineno)
        y = _parse_float(parts[0].strip(), lineno)
        delta = _parse_code(parts[1], "delta", lineno)
        if delta not in (0, 1):
            raise DataError(f"delta must be 0 or 1, got {delta}", lineno)
        rows.append((y, delta, _parse_code(parts[2], "x", lineno),
                     _parse_code(parts[3], "w", lineno), _parse_code(parts[4], "z", lineno)))
    if not rows:
        raise DataError("no data rows")
    return Dataset.from_observations(rows)


def read_csv(path) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh)


def to_csv(data: Dataset, extra: dict[str, np.ndarray] | None = None) -> str:
    """Serialize a dataset; ``repr`` of floats keeps the round trip exact."""
    extra = extra or {}
    out = io.StringIO()
    out.write(",".join(HEADER + tuple(extra)) + "\n")
    extra_cols = [np.asarray(v).tolist() for v in extra.values()]
    for i, obs in enumerate(data):
        fields = [repr(obs.y), str(obs.delta), str(obs.x), str(obs.w), str(obs.z)]
        fields += [repr(float(col[i])) for col in extra_cols]
        out.write(",".join(fields) + "\n")
    return out.getvalue()


@dataclass(frozen=True)
class CellStats:
    count: int
    censoring_rate: float


def cell_audit(data: Dataset) -> dict[tuple[int, int, int], CellStats]:
    """Count and censoring rate for every nonempty ``(x, w, z)`` cell, in sorted key order."""
    table = {}
    for key, idx in cell_groups(data, "xwz").items():
        censored = int(np.sum(data.delta[idx] == 0))
        table[key] = CellStats(count=int(idx.size), censoring_rate=censored / idx.size)
    return table


def min_cell_check(data: Dataset, threshold: int = 5) -> list[tuple[str, tuple[int, ...], int]]:
    """List ``(scheme, cell, count)`` for nonempty (x,z) and (x,w,z) cells below ``threshold``."""
    if threshold < 1:
        raise ValueError("threshold must be a positive integer")
    small = []
    for scheme in ("xz", "xwz"):
        counts = Counter(map(tuple, data.cell_codes(scheme).tolist()))
        for key in sorted(counts):
            if counts[key] < threshold:
                small.append((scheme, key, counts[key]))
    return small
