"""Invariant checks backing the ``validate`` subcommand and the acceptance suite.

Each check returns a small report dictionary with an ``ok`` flag.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .accountant import cdp_compose, dp_of_zcdp, zcdp_of_pure
from .core import Histogram, add_entry, relative_entropy
from .noise import RandomSource
from .pmwg import uniform_update


def count_vectors(n_types: int, total: int) -> np.ndarray:
    """All length-``n_types`` nonnegative integer vectors summing to ``total``."""
    rows = []
    for bars in itertools.combinations(range(total + n_types - 1), n_types - 1):
        prev, row = -1, []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(total + n_types - 1 - prev - 1)
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, n_types)


def binary_queries(n_types: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n_types)))


def epoch_drift(max_types: int = 4, max_size: int = 12, gammas=(0.25, 0.5, 1.0)) -> dict:
    """Exhaustive check that ``|x_tau(f) - x_t(f)| <= gamma/(1+gamma)`` for ``t <= tau <= (1+gamma) t``.

    Only the multiset of arrivals matters for ``x_tau``, so streams are
    enumerated as (initial counts, added counts) pairs.
    """
    violations, checked, worst_slack = 0, 0, math.inf
    for N in range(1, max_types + 1):
        F = binary_queries(N)
        for t in range(1, max_size + 1):
            base = count_vectors(N, t)
            for gamma in gammas:
                bound = gamma / (1 + gamma)
                for k in range(0, int(math.floor(gamma * t + 1e-12)) + 1):
                    add = count_vectors(N, k)
                    # (base, add) pairs -> difference of histograms
                    diff = (base[:, None, :] + add[None, :, :]) / (t + k) - base[:, None, :] / t
                    gaps = np.abs(diff @ F.T)
                    checked += gaps.size
                    violations += int((gaps > bound + 1e-12).sum())
                    worst_slack = min(worst_slack, float(bound - gaps.max()))
    return {"ok": violations == 0, "violations": violations, "checked": checked, "min_slack": worst_slack}


def epoch_drift_tight_case() -> Fraction:
    """Exact drift for ``x_2 = (1, 0)`` after one arrival of type 2 (``tau = 3``), ``f = (1, 0)``."""
    before = Fraction(2, 2)
    after = Fraction(2, 3)
    return before - after


def entropy_increase(instances: int = 10_000, max_types: int = 5, max_size: int = 20,
                     rng: RandomSource | None = None, tol: float = 1e-9) -> dict:
    """Random check of the one-arrival relative-entropy increase bound.

    For exact ``x`` of size ``t``, positive ``y`` and any arrival ``i``:
    ``RE(x'||y') - RE(x||y) <= ln N/(t+1) + ln t/(t+1) + ln((t+1)/t)`` where
    ``y'`` is ``y`` mixed towards uniform for one step.
    """
    gen = (rng or RandomSource(0)).derive("entropy-increase").generator()
    violations, worst = 0, -math.inf
    for _ in range(instances):
        N = int(gen.integers(1, max_types + 1))
        t = int(gen.integers(1, max_size + 1))
        counts = gen.multinomial(t, gen.dirichlet(np.ones(N)))
        x = Histogram.from_counts(counts)
        y = gen.dirichlet(np.full(N, 0.5))
        y = np.maximum(y, 1e-12)
        y /= y.sum()
        y_next = uniform_update(y, t, t + 1)
        before = relative_entropy(x, y)
        bound = math.log(N) / (t + 1) + math.log(t) / (t + 1) + math.log((t + 1) / t)
        for i in range(N):
            lhs = relative_entropy(add_entry(x, i), y_next) - before
            worst = max(worst, lhs - bound)
            if lhs > bound + tol:
                violations += 1
    return {"ok": violations == 0, "violations": violations, "instances": instances, "max_excess": worst}


def cdp_identity(k: int = 7, eps0: float = 0.13, delta: float = 1e-5) -> dict:
    """CDP composition of ``k`` equal events equals the zCDP pipeline at ``rho = k eps0^2 / 2``."""
    lhs = cdp_compose([eps0] * k, delta).eps
    rhs = dp_of_zcdp(k * zcdp_of_pure(eps0), delta).eps
    return {"ok": abs(lhs - rhs) <= 1e-12, "lhs": lhs, "rhs": rhs}


def run_all(quick: bool = True) -> dict:
    """Every invariant suite, at a reduced size when ``quick``."""
    reports = {
        "epoch_drift": epoch_drift(3 if quick else 4, 8 if quick else 12),
        "entropy_increase": entropy_increase(1000 if quick else 10_000),
        "cdp_identity": cdp_identity(),
    }
    tight = epoch_drift_tight_case()
    reports["epoch_drift_tight"] = {"ok": tight == Fraction(1, 3), "value": str(tight)}
    return reports
