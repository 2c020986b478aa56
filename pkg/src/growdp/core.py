"""Shared data model: histograms over a finite universe, growing streams, linear queries."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels

SIMPLEX_TOL = 1e-9
RENORM_TOL = 1e-12


@dataclass(frozen=True)
class Universe:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"universe size must be a positive integer, got {self.size}")


@dataclass(frozen=True, eq=False)
class Histogram:
    """Fractional histogram of a database of ``size`` records.

    ``exact`` marks concrete databases, whose weights are integer multiples
    of ``1/size``; public estimates set it to False.
    """

    weights: np.ndarray
    size: int
    exact: bool = True

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if self.size < 1:
            raise ValueError("histogram size must be positive")
        if np.any(w < 0):
            raise ValueError("histogram weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        if abs(total - 1.0) > RENORM_TOL:
            w = w / total
        if self.exact:
            scaled = w * self.size
            if np.any(np.abs(scaled - np.round(scaled)) > SIMPLEX_TOL):
                raise ValueError("exact histogram weights must be multiples of 1/size")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "Histogram":
        c = np.asarray(counts)
        if np.any(c < 0) or np.any(c != np.round(c)):
            raise ValueError("counts must be nonnegative integers")
        total = int(c.sum())
        if total < 1:
            raise ValueError("a database needs at least one record")
        return cls(c / total, total, exact=True)

    @classmethod
    def uniform(cls, n_types: int, size: int = 1) -> "Histogram":
        return cls(np.full(n_types, 1.0 / n_types), size, exact=False)

    @property
    def n_types(self) -> int:
        return self.weights.shape[0]

    @property
    def universe(self) -> Universe:
        return Universe(self.n_types)

    def counts(self) -> np.ndarray:
        if not self.exact:
            raise ValueError("only exact histograms have integer counts")
        return np.round(self.weights * self.size).astype(np.int64)

    def allclose(self, other: "Histogram", tol: float = SIMPLEX_TOL) -> bool:
        return self.n_types == other.n_types and bool(
            np.all(np.abs(self.weights - other.weights) <= tol)
        )

    def __repr__(self):
        return f"Histogram({np.array2string(self.weights, precision=6)}, size={self.size}, exact={self.exact})"


@dataclass(frozen=True, eq=False)
class LinearQuery:
    weights: np.ndarray
    id: str = ""

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("query weights must be a vector")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("linear query weights must lie in [0, 1]")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def complement(self) -> "LinearQuery":
        return LinearQuery(1.0 - self.weights, f"1-{self.id}" if self.id else "")

    @classmethod
    def counting(cls, members: Iterable[int], n_types: int, id: str = "") -> "LinearQuery":
        w = np.zeros(n_types)
        w[list(members)] = 1.0
        return cls(w, id)


@dataclass(frozen=True)
class QueryEvent:
    t: int
    j: int
    query: LinearQuery

    def __lt__(self, other: "QueryEvent") -> bool:
        return (self.t, self.j) < (other.t, other.j)


def _weights(x) -> np.ndarray:
    if isinstance(x, (Histogram, LinearQuery)):
        return x.weights
    return np.asarray(x, dtype=np.float64)


def evaluate(query, x) -> float:
    """Answer of a linear query on a histogram, ``<f, x>``."""
    f = _weights(query)
    w = _weights(x)
    if f.shape != w.shape:
        raise ValueError(f"dimension mismatch: query has {f.shape[0]} types, histogram {w.shape[0]}")
    return float(f @ w)


def add_entry(x: Histogram, i: int) -> Histogram:
    """Histogram after one record of type ``i`` (0-based) joins a database of size ``x.size``."""
    if not 0 <= i < x.n_types:
        raise IndexError(f"type index {i} out of range for universe of size {x.n_types}")
    t = x.size
    if x.exact:
        c = x.counts()
        c[i] += 1
        return Histogram(c / (t + 1), t + 1, exact=True)
    w = x.weights * t
    w[i] += 1.0
    w /= t + 1
    return Histogram(w, t + 1, exact=False)


def sensitivity(t: int) -> float:
    """Sensitivity of a linear query on a database of size ``t``."""
    if t < 1:
        raise ValueError("database size must be at least 1")
    return 1.0 / t


def relative_entropy(x, y) -> float:
    """KL divergence ``sum x_i ln(x_i / y_i)`` with ``0 ln 0 = 0``."""
    xw, yw = _weights(x), _weights(y)
    if xw.shape != yw.shape:
        raise ValueError("histograms live on different universes")
    return _kernels.relative_entropy(xw, yw)


@dataclass(frozen=True)
class DatabaseStream:
    """A database of ``n`` records that gains one record per time step.

    ``arrivals[k]`` is the (0-based) type of the record arriving at time ``n + k + 1``.
    """

    n: int
    initial_counts: tuple
    arrivals: tuple = field(default=())

    def __post_init__(self):
        counts = tuple(int(c) for c in self.initial_counts)
        if any(c < 0 for c in counts) or sum(counts) != self.n:
            raise ValueError("initial counts must be nonnegative and sum to n")
        arrivals = tuple(int(a) for a in self.arrivals)
        if any(not 0 <= a < len(counts) for a in arrivals):
            raise ValueError("arrival index out of range")
        object.__setattr__(self, "initial_counts", counts)
        object.__setattr__(self, "arrivals", arrivals)

    @property
    def n_types(self) -> int:
        return len(self.initial_counts)

    @property
    def horizon(self) -> int:
        """Last time step covered by the stream."""
        return self.n + len(self.arrivals)

    def counts_at(self, t: int) -> np.ndarray:
        if not self.n <= t <= self.horizon:
            raise ValueError(f"time {t} outside [{self.n}, {self.horizon}]")
        c = np.array(self.initial_counts, dtype=np.int64)
        np.add.at(c, np.array(self.arrivals[: t - self.n], dtype=np.int64), 1)
        return c

    def histogram_at(self, t: int) -> Histogram:
        return Histogram.from_counts(self.counts_at(t))

    def histograms(self, until: int | None = None) -> Iterator[tuple[int, Histogram]]:
        """Yield ``(t, x_t)`` for ``t = n..until`` incrementally."""
        until = self.horizon if until is None else min(until, self.horizon)
        x = Histogram.from_counts(self.initial_counts)
        yield self.n, x
        for k, a in enumerate(self.arrivals[: until - self.n]):
            x = add_entry(x, a)
            yield self.n + k + 1, x

    def records(self) -> list[int]:
        """Initial multiset (sorted) followed by the arrivals, as type indices."""
        init = [i for i, c in enumerate(self.initial_counts) for _ in range(c)]
        return init + list(self.arrivals)

    def to_jsonl(self, path) -> None:
        lines = [json.dumps({"n": self.n, "N": self.n_types, "initial": list(self.initial_counts)})]
        lines += [json.dumps({"arrival": a}) for a in self.arrivals]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "DatabaseStream":
        rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        if not rows:
            raise ValueError(f"{path}: empty stream file")
        head = rows[0]
        if set(head) != {"n", "N", "initial"}:
            raise ValueError(f"{path}: header must have exactly n, N, initial")
        if len(head["initial"]) != head["N"]:
            raise ValueError(f"{path}: initial counts length differs from N")
        arrivals = []
        for row in rows[1:]:
            if set(row) != {"arrival"}:
                raise ValueError(f"{path}: unexpected line {row}")
            arrivals.append(row["arrival"])
        return cls(head["n"], tuple(head["initial"]), tuple(arrivals))


def _substitution_distance(a: Sequence[int], b: Sequence[int]) -> int:
    diff = np.asarray(a) - np.asarray(b)
    return int(diff[diff > 0].sum())


def neighboring(a: DatabaseStream, b: DatabaseStream) -> bool:
    """True iff the streams agree up to some time and differ by one substituted record afterwards."""
    if a.n != b.n or a.n_types != b.n_types:
        return False
    m = min(len(a.arrivals), len(b.arrivals))
    changes = _substitution_distance(a.initial_counts, b.initial_counts)
    changes += sum(1 for u, v in zip(a.arrivals[:m], b.arrivals[:m]) if u != v)
    return changes == 1
