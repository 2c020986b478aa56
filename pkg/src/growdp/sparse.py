"""Sparse-vector machines for a growing database.

``AboveThreshold`` halts on the first query above the threshold, ``NumericAboveThreshold``
also releases a noisy value when it halts, and ``NumericSparse`` chains such runs forever.

The machines consume true query values ``f(x_t)`` computed by the caller and
assume every query has sensitivity ``1/t`` at time ``t``. Noise scales shrink
as the database grows. At time ``t`` the threshold noise has scale ``2/xi_t``;
query noise uses twice that scale and numeric releases four times it.

Random draws are addressed by ``(t, j, tag)`` where ``j`` counts queries seen
at time ``t`` by the machine, so the same seed gives the same trace whatever
else happens in the process.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .accountant import atg_loss, natg_loss, nsg_ledger
from .noise import NoiselessSource, RandomSource


class Kind(enum.Enum):
    BELOW = "below"
    ABOVE = "above"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class SparseAnswer:
    kind: Kind
    value: float | None = None

    @property
    def is_hard(self) -> bool:
        return self.kind is not Kind.BELOW


BELOW = SparseAnswer(Kind.BELOW)
ABOVE = SparseAnswer(Kind.ABOVE)


class HaltedError(RuntimeError):
    """Raised when a halted Above Threshold run receives another query."""


@dataclass(frozen=True)
class SparseConfig:
    threshold: float
    xi: Callable
    noiseless: bool = False


class _Clock:
    """Tracks the current time and the query index within it."""

    def __init__(self):
        self.t = None
        self.j = 0

    def tick(self, t: int) -> int:
        if self.t is not None and t < self.t:
            raise ValueError(f"time went backwards: {t} after {self.t}")
        if t != self.t:
            self.t = t
            self.j = 0
        self.j += 1
        return self.j


class _Run:
    """One Above Threshold run; ``numeric`` adds the noisy answer on halt."""

    def __init__(self, config: SparseConfig, rng: RandomSource, numeric: bool):
        self.config = config
        self.rng = rng
        self.numeric = numeric
        self.t0 = None
        self.t_halt = None
        self.threshold_time = None
        self.noisy_threshold = None
        self.threshold_draws = 0

    @property
    def halted(self) -> bool:
        return self.t_halt is not None

    def step(self, t: int, j: int, value: float) -> SparseAnswer:
        if self.halted:
            raise HaltedError("this run already answered above threshold")
        xi_t = self.config.xi(t)
        if self.t0 is None:
            self.t0 = t
        if t != self.threshold_time:
            self.noisy_threshold = self.config.threshold + self.rng.derive(t, j, "threshold").laplace(2.0 / xi_t)
            self.threshold_time = t
            self.threshold_draws += 1
        nu = self.rng.derive(t, j, "query").laplace(4.0 / xi_t)
        if value + nu < self.noisy_threshold:
            return BELOW
        self.t_halt = t
        if not self.numeric:
            return ABOVE
        return SparseAnswer(Kind.NUMERIC, value + self.rng.derive(t, j, "answer").laplace(8.0 / xi_t))


def _source(config: SparseConfig, rng: RandomSource | None) -> RandomSource:
    if config.noiseless or rng is None:
        if not config.noiseless:
            raise ValueError("a random source is required unless the config is noiseless")
        return NoiselessSource()
    return rng


class AboveThreshold:
    """Reports the first query whose noisy value clears the noisy threshold, then halts."""

    numeric = False

    def __init__(self, config: SparseConfig, rng: RandomSource | None = None):
        self.config = config
        self._clock = _Clock()
        self._run = _Run(config, _source(config, rng), self.numeric)

    @property
    def halted(self) -> bool:
        return self._run.halted

    @property
    def start_time(self):
        return self._run.t0

    @property
    def threshold_draws(self) -> int:
        return self._run.threshold_draws

    def step(self, t: int, value: float) -> SparseAnswer:
        if self.halted:
            raise HaltedError("stepping a halted run")
        j = self._clock.tick(t)
        return self._run.step(t, j, float(value))

    def privacy_report(self) -> float:
        if self._run.t0 is None:
            return 0.0
        return atg_loss(self.config.xi, self._run.t0)


class NumericAboveThreshold(AboveThreshold):
    """Above Threshold that releases a noisy value for the query that halts it."""

    numeric = True

    def privacy_report(self) -> float:
        if self._run.t0 is None:
            return 0.0
        if not self.halted:
            return atg_loss(self.config.xi, self._run.t0)
        return natg_loss(self.config.xi, self._run.t0, self._run.t_halt)


class NumericSparse:
    """Numeric Sparse: a chain of Numeric Above Threshold runs that never halts.

    ``hard_counts[t]`` counts numeric answers released at time ``t``. A new
    run starts lazily with the next query after a halt and draws its own
    threshold on that query, even within the same time step.
    """

    def __init__(self, config: SparseConfig, rng: RandomSource | None = None, n: int | None = None):
        self.config = config
        self.rng = _source(config, rng)
        self.n = n
        self.hard_counts: dict[int, int] = {}
        self.runs = 0
        self.threshold_draws = 0
        self._clock = _Clock()
        self._run = None

    def step(self, t: int, value: float) -> SparseAnswer:
        if self.n is None:
            self.n = t
        elif t < self.n:
            raise ValueError(f"time {t} precedes start {self.n}")
        j = self._clock.tick(t)
        if self._run is None:
            self._run = _Run(self.config, self.rng, numeric=True)
            self.runs += 1
        before = self._run.threshold_draws
        ans = self._run.step(t, j, float(value))
        self.threshold_draws += self._run.threshold_draws - before
        if ans.is_hard:
            self.hard_counts[t] = self.hard_counts.get(t, 0) + 1
            self._run = None
        return ans

    @property
    def hard_total(self) -> int:
        return sum(self.hard_counts.values())

    def privacy_report(self) -> float:
        if self.n is None:
            return 0.0
        return nsg_ledger(self.config.xi, self.hard_counts, self.n)


def privacy_report(state) -> float:
    """Privacy loss spent so far by any of the sparse-vector machines."""
    return state.privacy_report()


def _weighted_tail(xi: Callable, alpha: float, weights: Mapping[int, float], divisor: float) -> float:
    return math.fsum(w * math.exp(-alpha * xi(t) / divisor) for t, w in weights.items() if w)


def accuracy_beta(xi: Callable, alpha: float, query_counts: Mapping[int, int],
                  hard_counts: Mapping[int, int], n: int, divisor: float = 8.0) -> float:
    """Failure-probability bound for Numeric Sparse given observed per-time query and hard counts.

    Values above 1 are valid but vacuous.
    """
    weights = {t: query_counts.get(t, 0) + 2 * hard_counts.get(t, 0)
               for t in set(query_counts) | set(hard_counts)}
    return math.exp(-alpha * xi(n) / divisor) + _weighted_tail(xi, alpha, weights, divisor)


def accuracy_beta_budget(xi: Callable, alpha: float, budget: Mapping[int, float], n: int,
                         divisor: float = 8.0) -> float:
    """Failure-probability bound for a stream respecting cumulative query budget ``sum k_t``."""
    return math.exp(-alpha * xi(n) / divisor) + 3 * _weighted_tail(xi, alpha, budget, divisor)


def atg_halt_positions(values: np.ndarray, times: np.ndarray, threshold: float, xi_values: np.ndarray,
                       u_threshold: np.ndarray, u_query: np.ndarray) -> np.ndarray:
    """Vectorized Above Threshold over many independent runs sharing one query sequence.

    ``u_threshold`` has shape ``(runs, len(values))`` but only the entries at
    a time step's first query are used; ``u_query`` has the same shape.
    Returns the 0-based halt index per run, ``len(values)`` for runs that never halt.
    """
    from . import _kernels
    return _kernels.atg_halt_batch(np.ascontiguousarray(values, dtype=np.float64),
                                   np.ascontiguousarray(times, dtype=np.int64), float(threshold),
                                   np.ascontiguousarray(xi_values, dtype=np.float64),
                                   np.ascontiguousarray(u_threshold, dtype=np.float64),
                                   np.ascontiguousarray(u_query, dtype=np.float64))
