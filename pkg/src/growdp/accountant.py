"""Privacy-loss bookkeeping.

Basic and zCDP-based composition plus the closed-form privacy ledgers of
the growing-database sparse-vector family and of PMWG. All logarithms are
natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class PrivacyBudget:
    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")


@dataclass
class PrivacyLedger:
    """Append-only record of ``(label, eps)`` privacy events."""

    events: list = field(default_factory=list)

    def record(self, label, eps: float) -> None:
        if eps < 0:
            raise ValueError("privacy events must be nonnegative")
        self.events.append((label, float(eps)))

    def epsilons(self) -> np.ndarray:
        return np.array([e for _, e in self.events], dtype=np.float64)

    def __len__(self):
        return len(self.events)

    def basic(self) -> PrivacyBudget:
        return basic_compose(self)

    def cdp(self, delta: float) -> PrivacyBudget:
        return cdp_compose(self, delta)


def _eps_values(events) -> np.ndarray:
    if isinstance(events, PrivacyLedger):
        return events.epsilons()
    vals = np.array([e[1] if isinstance(e, tuple) else e for e in events], dtype=np.float64)
    if np.any(vals < 0):
        raise ValueError("privacy events must be nonnegative")
    return vals


def basic_compose(events) -> PrivacyBudget:
    """Sum of per-event epsilons, delta = 0."""
    return PrivacyBudget(float(math.fsum(_eps_values(events))), 0.0)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def cdp_compose(events, delta: float) -> PrivacyBudget:
    """``(eps, delta)`` guarantee for composing pure-DP events through zCDP."""
    _check_delta(delta)
    sq = math.fsum(_eps_values(events) ** 2)
    eps = 0.5 * sq + math.sqrt(2 * sq * math.log(1 / delta))
    return PrivacyBudget(eps, delta)


def cdp_simplified_bound(events, delta: float) -> float:
    """``2 sqrt(sum eps_i^2 ln(1/delta))``; dominates ``cdp_compose`` when delta <= 1/e and sum eps_i^2 <= 1."""
    _check_delta(delta)
    sq = math.fsum(_eps_values(events) ** 2)
    return 2 * math.sqrt(sq * math.log(1 / delta))


def zcdp_of_pure(eps: float) -> float:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return 0.5 * eps * eps


def zcdp_compose(rhos: Iterable[float]) -> float:
    rhos = list(rhos)
    if any(r < 0 for r in rhos):
        raise ValueError("rho must be nonnegative")
    return math.fsum(rhos)


def dp_of_zcdp(rho: float, delta: float) -> PrivacyBudget:
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    _check_delta(delta)
    return PrivacyBudget(rho + 2 * math.sqrt(rho * math.log(1 / delta)), delta)


def _xd(xi: Callable, t: int) -> float:
    return xi(t) / t


def atg_loss(xi: Callable, n0: int) -> float:
    """Pure-DP loss of one Above Threshold run started at time ``n0``."""
    return _xd(xi, n0)


def natg_loss(xi: Callable, t0: int, t_halt: int) -> float:
    """Loss of a Numeric Above Threshold run from ``t0`` that halted at ``t_halt``."""
    if t_halt < t0:
        raise ValueError("halt time precedes start time")
    return _xd(xi, t0) + _xd(xi, t_halt) / 8


def nsg_ledger(xi: Callable, hard_counts: Mapping[int, int], n: int) -> float:
    """Loss of Numeric Sparse started at ``n`` with ``hard_counts[t]`` hard answers at time ``t``."""
    total = _xd(xi, n)
    terms = []
    for t, h in sorted(hard_counts.items()):
        if h < 0:
            raise ValueError("hard counts must be nonnegative")
        if t < n:
            raise ValueError(f"hard query at time {t} precedes start {n}")
        terms.append(h * _xd(xi, t))
    return total + 9 / 8 * math.fsum(terms)


def budget_b(t: int, N: float) -> float:
    """Per-step growth ``b_t`` of the PMWG hard-query allowance."""
    if t <= 1:
        raise ValueError("b_t needs t >= 2")
    return math.log(N) / t + math.log(t - 1) / t + math.log(t / (t - 1))


def pmwg_eps_bound(xi: Callable, alpha: float, N: float, n: int, horizon: int) -> float:
    """PMWG privacy loss when every per-step hard-query allowance is used up to ``horizon``."""
    if horizon < n:
        raise ValueError("horizon must be at least n")
    k = 81 / (2 * alpha**2)
    head = (1 + k * math.log(N)) * _xd(xi, n)
    ts = np.arange(n + 1, horizon + 1, dtype=np.float64)
    if ts.size == 0:
        return head
    b = np.log(N) / ts + np.log(ts - 1) / ts + np.log(ts / (ts - 1))
    xd = np.array([xi(t) for t in ts]) / ts
    return head + k * math.fsum(b * xd)


def pmwg_eps_closed_bound(c: float, alpha: float, N: float, n: int) -> float:
    """Integral bound ``162 c (ln N + ln n) / (alpha^2 sqrt n)`` for ``xi_t = c sqrt(t)``, valid for n >= 21."""
    return 162 * c * (math.log(N) + math.log(n)) / (alpha**2 * math.sqrt(n))
