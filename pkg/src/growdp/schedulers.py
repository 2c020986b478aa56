"""Rerunning a static mechanism as the database grows.

``schedule_fixed``/``run_fixed`` rerun the mechanism at geometrically
spaced epoch starts with a decaying privacy budget, which keeps accuracy
fixed over time. ``schedule_improver``/``run_improver`` rerun it at every
step with a budget shrinking like ``t^-(1/2+c)``, trading a higher start-up
error for accuracy that improves as the database grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .accountant import PrivacyLedger, basic_compose, cdp_compose
from .blackbox import BlackBoxContract, ErmProblem, GridERM
from .core import DatabaseStream, QueryEvent, evaluate
from .noise import NoiselessSource, RandomSource

CEIL_TOL = 1e-12


def _check_budget(eps: float, delta: float, beta: float) -> None:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if delta > 0 and eps > 1:
        raise ValueError("the zCDP composition guarantee needs eps <= 1")
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")


def _ceil(v: float) -> int:
    # (1+gamma)^i n is often an integer up to rounding noise, e.g. 1.1**3 * 1000
    return math.ceil(v * (1 - CEIL_TOL))


@dataclass(frozen=True)
class Epoch:
    index: int
    start: int
    eps: float
    beta: float
    alpha: float
    skipped_eps: float = 0.0


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch parameters for the fixed-accuracy scheduler."""

    gamma: float
    n: int
    eps: float
    delta: float
    beta: float
    contract: BlackBoxContract

    def eps_i(self, i):
        g = self.gamma
        i = np.asarray(i, dtype=np.float64)
        lg = math.log1p(g)
        if self.delta == 0:
            return g**2 * (i + 1) * np.exp(-(i + 2) * lg) * self.eps
        return g**1.5 * (i + 1) * np.exp(-(i + 1.5) * lg) * self.eps / (3 * math.sqrt(math.log(1 / self.delta)))

    def beta_i(self, i):
        return (self.beta / (1 + self.beta)) ** (np.asarray(i, dtype=np.float64) + 1)

    def alpha_i(self, i: int) -> float:
        return self.contract.alpha(float(self.eps_i(i)), (1 + self.gamma) ** i * self.n, float(self.beta_i(i)))

    def start(self, i: int) -> int:
        return _ceil((1 + self.gamma) ** i * self.n)

    def epochs(self, horizon: int) -> list[Epoch]:
        """Epochs starting at or before ``horizon``; indices sharing a start merge into the last one."""
        out = []
        i = 0
        skipped = 0.0
        while self.start(i) <= horizon:
            if self.start(i + 1) == self.start(i):
                skipped += float(self.eps_i(i))
            else:
                out.append(Epoch(i, self.start(i), float(self.eps_i(i)), float(self.beta_i(i)), self.alpha_i(i), skipped))
                skipped = 0.0
            i += 1
        return out

    @property
    def drift_bound(self) -> float:
        """Largest change of any linear query within one epoch."""
        return self.gamma / (1 + self.gamma)


def growth_rate(eps: float, delta: float, beta: float, n: int, contract: BlackBoxContract) -> float:
    e = 2 * contract.p + 1 if delta == 0 else 1.5 * contract.p + 1
    return contract.g ** (1 / e) * (math.log(1 / beta) / (eps * n)) ** (contract.p / e)


def schedule_fixed(eps: float, delta: float, beta: float, n: int, contract: BlackBoxContract) -> EpochSchedule:
    _check_budget(eps, delta, beta)
    if n < 1:
        raise ValueError("n must be positive")
    gamma = growth_rate(eps, delta, beta, n, contract)
    if not 0 < gamma < 1:
        raise ValueError(f"growth rate {gamma:.4g} is outside (0, 1); n is too small for this contract")
    return EpochSchedule(gamma, n, eps, delta, beta, contract)


@dataclass(frozen=True)
class ImproverSchedule:
    """Per-step parameters for the improving-accuracy scheduler."""

    c: float
    n: int
    eps: float
    delta: float
    beta: float
    contract: BlackBoxContract

    def eps_t(self, t):
        return math.sqrt(self.c) / (3 * math.sqrt(math.log(1 / self.delta))) * self.eps / np.power(t, 0.5 + self.c)

    def beta_t(self, t):
        return self.beta / (2 * np.power(t, 2.0))

    def alpha_t(self, t: int) -> float:
        """Accuracy the contract promises for the run at time ``t``."""
        return self.contract.alpha(float(self.eps_t(t)), t, float(self.beta_t(t)))

    def alpha_envelope(self, t) -> float:
        """Reported rate ``g ln^p'(1/beta) (sqrt(ln(1/delta)) / (sqrt(c) eps t^(1/2-2c)))^p``."""
        k = self.contract
        base = math.sqrt(math.log(1 / self.delta)) / (math.sqrt(self.c) * self.eps * np.power(t, 0.5 - 2 * self.c))
        return k.g * math.log(1 / self.beta) ** k.p_beta * base**k.p


def schedule_improver(eps: float, delta: float, beta: float, n: int, contract: BlackBoxContract,
                      c: float = 0.1) -> ImproverSchedule:
    if delta <= 0:
        raise ValueError("the improving scheduler needs delta > 0")
    _check_budget(eps, delta, beta)
    if c <= 0:
        raise ValueError("c must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    return ImproverSchedule(c, n, eps, delta, beta, contract)


@dataclass(frozen=True)
class AnswerRecord:
    t: int
    j: int
    query_id: str
    true: float
    released: float
    abs_error: float
    epoch: int
    eps_spent_cum: float
    alpha_promised: float


@dataclass
class SchedulerRun:
    records: list
    ledger: PrivacyLedger
    calls: int

    def total_eps(self, delta: float = 0.0) -> float:
        if delta > 0:
            return cdp_compose(self.ledger, delta).eps
        return basic_compose(self.ledger).eps


def _events_by_time(events: Iterable[QueryEvent]) -> dict[int, list[QueryEvent]]:
    out: dict[int, list[QueryEvent]] = {}
    for ev in sorted(events):
        out.setdefault(ev.t, []).append(ev)
    return out


def _spent(ledger: PrivacyLedger, delta: float) -> float:
    return cdp_compose(ledger, delta).eps if delta > 0 else basic_compose(ledger).eps


def run_fixed(schedule: EpochSchedule, mechanism, stream: DatabaseStream, events: Iterable[QueryEvent],
              rng: RandomSource | None = None, horizon: int | None = None) -> SchedulerRun:
    """Answer ``events`` by rerunning ``mechanism`` at each epoch start."""
    rng = rng or NoiselessSource()
    horizon = stream.horizon if horizon is None else min(horizon, stream.horizon)
    starts = {e.start: e for e in schedule.epochs(horizon)}
    by_t = _events_by_time(events)
    ledger = PrivacyLedger()
    records, calls = [], 0
    current, answerer, spent = None, None, 0.0
    for t, x in stream.histograms(horizon):
        if t in starts:
            current = starts[t]
            if current.skipped_eps:
                ledger.record(("scheduler", t, "merged"), current.skipped_eps)
            answerer = mechanism.run(x, current.eps, current.alpha, current.beta, rng.derive("epoch", current.index))
            ledger.record(("scheduler", t, current.index), current.eps)
            spent = _spent(ledger, schedule.delta)
            calls += 1
        for ev in by_t.get(t, ()):
            truth = evaluate(ev.query, x)
            released = answerer(ev.query)
            records.append(AnswerRecord(t, ev.j, ev.query.id, truth, released, abs(released - truth),
                                        current.index, spent, current.alpha + schedule.drift_bound))
    return SchedulerRun(records, ledger, calls)


def run_improver(schedule: ImproverSchedule, mechanism, stream: DatabaseStream, events: Iterable[QueryEvent],
                 rng: RandomSource | None = None, horizon: int | None = None) -> SchedulerRun:
    """Answer ``events`` by rerunning ``mechanism`` at every time step."""
    rng = rng or NoiselessSource()
    horizon = stream.horizon if horizon is None else min(horizon, stream.horizon)
    by_t = _events_by_time(events)
    ledger = PrivacyLedger()
    records, calls = [], 0
    for t, x in stream.histograms(horizon):
        eps_t, beta_t = float(schedule.eps_t(t)), float(schedule.beta_t(t))
        alpha_t = schedule.alpha_t(t)
        answerer = mechanism.run(x, eps_t, alpha_t, beta_t, rng.derive("step", t))
        ledger.record(("improver", t), eps_t)
        calls += 1
        queries = by_t.get(t, ())
        if not queries:
            continue
        spent = _spent(ledger, schedule.delta)
        for ev in queries:
            truth = evaluate(ev.query, x)
            released = answerer(ev.query)
            records.append(AnswerRecord(t, ev.j, ev.query.id, truth, released, abs(released - truth),
                                        t, spent, alpha_t))
    return SchedulerRun(records, ledger, calls)


def improver_cdp_total(schedule: ImproverSchedule, horizon: int) -> float:
    """CDP-composed privacy loss of all runs from ``n`` to ``horizon``."""
    ts = np.arange(schedule.n, horizon + 1, dtype=np.float64)
    return cdp_compose(schedule.eps_t(ts), schedule.delta).eps


@dataclass(frozen=True)
class RiskPoint:
    t: int
    theta_index: int
    theta: float
    excess_risk: float
    eps_t: float


def run_ermg(problem: ErmProblem, stream: DatabaseStream, eps: float, delta: float, beta: float,
             c: float = 0.1, rng: RandomSource | None = None, horizon: int | None = None) -> list[RiskPoint]:
    """Private ERM on a growing database: grid ERM rerun at every step by the improving scheduler.

    Excess risk is measured against the exact grid minimizer on the current data.
    """
    rng = rng or NoiselessSource()
    mech = GridERM(problem)
    schedule = schedule_improver(eps, delta, beta, stream.n, mech.contract, c)
    horizon = stream.horizon if horizon is None else min(horizon, stream.horizon)
    out = []
    for t, x in stream.histograms(horizon):
        eps_t = float(schedule.eps_t(t))
        k = mech.run(x, eps_t, 0.0, float(schedule.beta_t(t)), rng.derive("step", t))
        theta = problem.grid[k]
        out.append(RiskPoint(t, k, float(np.ravel(theta)[0]), problem.excess_risk(k, x), eps_t))
    return out
