"""Private multiplicative weights for a growing database.

A public histogram ``y`` answers easy queries for free. A shared Numeric
Sparse instance flags hard queries, whose noisy answers drive a
multiplicative-weights step on ``y``. Each new record mixes ``y`` towards
uniform with weight ``1/t``, and the number of hard queries is capped by a
budget that grows with the database.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .accountant import budget_b
from .core import Histogram, LinearQuery, evaluate
from .noise import NoiseFunction, NoiselessSource, RandomSource, xi_pmwg
from .sparse import Kind, NumericSparse, SparseConfig

__all__ = [
    "PMWG",
    "PMWGConfig",
    "TranscriptEntry",
    "budget_b",
    "budget_cap",
    "mw_update",
    "per_step_query_budget",
    "replay_public_histogram",
    "theorem_query_budget",
    "uniform_update",
]


@dataclass(frozen=True)
class PMWGConfig:
    alpha: float
    eps: float
    n: int
    N: int
    delta: float = 0.0
    p: float | None = None
    noiseless: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.n < 2 or self.N < 1:
            raise ValueError("need n >= 2 and N >= 1")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if self.p is not None and not 0.25 <= self.p < 1:
            raise ValueError("noise exponent must lie in [1/4, 1)")

    def noise(self) -> NoiseFunction:
        return xi_pmwg(self.alpha, self.n, self.N, self.eps, self.delta, self.p)

    @property
    def threshold(self) -> float:
        return 2 * self.alpha / 3

    @property
    def learning_rate(self) -> float:
        return self.alpha / 6


def uniform_update(y, t_prev: int, t_now: int) -> np.ndarray:
    """Mix ``y`` towards uniform as the database grows from ``t_prev`` to ``t_now`` records."""
    if t_now < t_prev:
        raise ValueError(f"time went backwards: {t_now} < {t_prev}")
    w = y.weights if isinstance(y, Histogram) else y
    return _kernels.uniform_update(np.asarray(w, dtype=np.float64), int(t_prev), int(t_now))


def mw_update(y, r, rate: float) -> np.ndarray:
    """Multiplicative-weights step ``y_i * exp(-rate * r_i)``, renormalized and kept strictly positive."""
    if rate <= 0:
        raise ValueError("learning rate must be positive")
    w = y.weights if isinstance(y, Histogram) else y
    rv = r.weights if isinstance(r, LinearQuery) else r
    return _kernels.mw_update(np.asarray(w, dtype=np.float64), np.asarray(rv, dtype=np.float64), float(rate))


def budget_cap(alpha: float, N: int, sum_b: float) -> float:
    """Cumulative hard-query allowance ``(36/alpha^2)(ln N + sum b)``."""
    return 36.0 / alpha**2 * (math.log(N) + sum_b)


def _budget_exponents(config: PMWGConfig, taus: np.ndarray) -> np.ndarray:
    a, e, n, N = config.alpha, config.eps, config.n, config.N
    log_nn = math.log(N * n)
    if config.delta == 0 and config.p is None:
        return a**3 * e * np.sqrt(n * taus) / (8262 * log_nn)
    p = 0.5 if config.p is None else config.p
    q = 1 - p
    if config.delta == 0:
        return a**3 * q**2 * e * n**q * taus**p / (6048 * log_nn)
    return a**2 * q * e * n**q * taus**p / (1152 * math.sqrt(log_nn) * math.sqrt(math.log(1 / config.delta)))


def theorem_query_budget(config: PMWGConfig, t: int, kappa: float = 1.0) -> float:
    """Cumulative number of queries up to time ``t`` under which the accuracy guarantee holds.

    Reported for diagnostics only; the algorithm never enforces it.
    """
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    if t < config.n:
        return 0.0
    taus = np.arange(config.n, t + 1, dtype=np.float64)
    with np.errstate(over="ignore"):
        return float(kappa * np.exp(_budget_exponents(config, taus)).sum())


def per_step_query_budget(config: PMWGConfig, t: int, kappa: float = 1.0) -> float:
    """The summand ``k_t`` of ``theorem_query_budget``."""
    with np.errstate(over="ignore"):
        return float(kappa * np.exp(_budget_exponents(config, np.array([float(t)]))[0]))


@dataclass(frozen=True)
class TranscriptEntry:
    """Public record of one answered query."""

    t: int
    j: int
    query: np.ndarray
    released: float | None
    hard: bool


class PMWG:
    """Online query answering on a growing database.

    Call ``answer(t, f, x_t)`` for each query in ``(t, j)`` order. The
    return value is the released answer, or ``None`` once the hard-query
    budget has been exhausted (after which every call returns ``None``).
    """

    def __init__(self, config: PMWGConfig, rng: RandomSource | None = None):
        self.config = config
        self.xi = config.noise()
        if config.noiseless or rng is None:
            if not config.noiseless:
                raise ValueError("a random source is required unless the config is noiseless")
            rng = NoiselessSource()
        self.nsg = NumericSparse(SparseConfig(config.threshold, self.xi, config.noiseless),
                                 rng.derive("nsg"), n=config.n)
        self.y = np.full(config.N, 1.0 / config.N)
        self.t = config.n
        self.j = 0
        self.sum_b = 0.0
        self.hard_counts: dict[int, int] = {}
        self.hard_total = 0
        self.exhausted = False
        self.transcript: list[TranscriptEntry] = []

    @property
    def public_histogram(self) -> Histogram:
        return Histogram(self.y, self.t, exact=False)

    @property
    def cap(self) -> float:
        return budget_cap(self.config.alpha, self.config.N, self.sum_b)

    def eps_spent(self) -> float:
        return self.nsg.privacy_report()

    def advance(self, t: int) -> None:
        """Move the public histogram forward to time ``t``."""
        if t < self.t:
            raise ValueError(f"query at time {t} after time {self.t}")
        if t == self.t:
            return
        self.y = uniform_update(self.y, self.t, t)
        self.sum_b += math.fsum(budget_b(tau, self.config.N) for tau in range(self.t + 1, t + 1))
        self.t = t
        self.j = 0

    def answer(self, t: int, f, x_t) -> float | None:
        if self.exhausted:
            return None
        self.advance(t)
        self.j += 1
        fw = f.weights if isinstance(f, LinearQuery) else np.asarray(f, dtype=np.float64)
        f_true = evaluate(fw, x_t)
        f_pub = float(fw @ self.y)
        a1 = self.nsg.step(t, f_true - f_pub)
        a2 = self.nsg.step(t, f_pub - f_true)
        if not a1.is_hard and not a2.is_hard:
            self.transcript.append(TranscriptEntry(t, self.j, fw, f_pub, False))
            return f_pub
        self.hard_counts[t] = self.hard_counts.get(t, 0) + 1
        self.hard_total += 1
        if self.hard_total > self.cap:
            self.exhausted = True
            self.transcript.append(TranscriptEntry(t, self.j, fw, None, True))
            return None
        released = f_pub + a1.value if a1.kind is Kind.NUMERIC else f_pub - a2.value
        self.y = self._mw_step(self.y, fw, released, f_pub)
        self.transcript.append(TranscriptEntry(t, self.j, fw, released, True))
        return released

    def _mw_step(self, y, fw, released, f_pub):
        r = fw if released < f_pub else 1.0 - fw
        return mw_update(y, r, self.config.learning_rate)


def replay_public_histogram(transcript, n: int, N: int, alpha: float) -> list[np.ndarray]:
    """Rebuild the public histogram after each transcript entry using public information only."""
    y = np.full(N, 1.0 / N)
    t = n
    out = []
    for e in transcript:
        if e.t != t:
            y = uniform_update(y, t, e.t)
            t = e.t
        if e.hard and e.released is not None:
            f_pub = float(e.query @ y)
            r = e.query if e.released < f_pub else 1.0 - e.query
            y = mw_update(y, r, alpha / 6)
        out.append(y.copy())
    return out
