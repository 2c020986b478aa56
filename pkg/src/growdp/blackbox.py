"""Static epsilon-DP mechanisms that the schedulers rerun as the database grows.

Each mechanism exposes ``contract`` (its accuracy guarantee, in the
``alpha >= g (1/(eps n))^p ln^p'' n ln^p'(1/beta)`` form) and
``run(x, eps, alpha, beta, rng)``, which returns an answerer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .core import Histogram, LinearQuery
from .noise import RandomSource

MAX_CANDIDATES = 10**6


@dataclass(frozen=True)
class BlackBoxContract:
    """Accuracy contract of a static mechanism.

    ``p_beta`` defaults to ``p`` and ``p_n`` to 0, which reduces the
    extended form to ``alpha >= g (ln(1/beta) / (eps n))^p``.
    """

    p: float
    g: float
    p_beta: float | None = None
    p_n: float = 0.0

    def __post_init__(self):
        if self.p <= 0 or self.g <= 0:
            raise ValueError("contract needs p > 0 and g > 0")
        if self.p_beta is None:
            object.__setattr__(self, "p_beta", self.p)

    def alpha(self, eps: float, n: float, beta: float) -> float:
        """Smallest accuracy the contract promises at budget ``eps`` on ``n`` records."""
        val = self.g * (1.0 / (eps * n)) ** self.p * math.log(1 / beta) ** self.p_beta
        if self.p_n:
            val *= math.log(n) ** self.p_n
        return val


class Answerer(Protocol):
    def __call__(self, f) -> float: ...


class StaticMechanism(Protocol):
    contract: BlackBoxContract

    def run(self, x: Histogram, eps: float, alpha: float, beta: float, rng: RandomSource): ...


def exponential_mechanism(utilities, sensitivity: float, eps: float, rng: RandomSource) -> int:
    """Index sampled with probability proportional to ``exp(eps u / (2 sensitivity))``.

    A noiseless source returns the first maximizer; ``eps = inf`` does too.
    """
    u = np.asarray(utilities, dtype=np.float64)
    if u.size == 0:
        raise ValueError("no candidates")
    if not np.all(np.isfinite(u)):
        raise ValueError("utilities must be finite")
    if sensitivity <= 0:
        raise ValueError("utility sensitivity must be positive")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if rng.noiseless or math.isinf(eps):
        return int(np.argmax(u))
    logits = eps * (u - u.max()) / (2 * sensitivity)
    w = np.exp(logits)
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, rng.uniform() * cdf[-1], side="right"))
    return min(idx, u.size - 1)


def _query_matrix(queries: Sequence) -> np.ndarray:
    rows = [q.weights if isinstance(q, LinearQuery) else np.asarray(q, dtype=np.float64) for q in queries]
    if not rows:
        raise ValueError("query class must be nonempty")
    return np.vstack(rows)


class QueryTable:
    """Answers for a fixed query class, looked up by the query's id or weights."""

    def __init__(self, queries: Sequence, values):
        self.queries = list(queries)
        self.values = np.asarray(values, dtype=np.float64)
        self._by_id = {q.id: k for k, q in enumerate(self.queries) if isinstance(q, LinearQuery) and q.id}

    def __call__(self, f) -> float:
        if isinstance(f, int):
            return float(self.values[f])
        if isinstance(f, LinearQuery) and f.id in self._by_id:
            return float(self.values[self._by_id[f.id]])
        w = f.weights if isinstance(f, LinearQuery) else np.asarray(f)
        for k, q in enumerate(self.queries):
            qw = q.weights if isinstance(q, LinearQuery) else np.asarray(q)
            if np.array_equal(qw, w):
                return float(self.values[k])
        raise KeyError("query not in the released class")


class SyntheticAnswerer:
    """Answers any linear query from a synthetic histogram."""

    def __init__(self, weights: np.ndarray):
        self.weights = weights

    def __call__(self, f) -> float:
        w = f.weights if isinstance(f, LinearQuery) else np.asarray(f, dtype=np.float64)
        return float(w @ self.weights)


class LaplaceRelease:
    """Adds ``Lap(k / (eps t))`` to each of the ``k`` query answers.

    With ``beta <= 1/e`` the union bound gives
    ``alpha = k ln(k/beta)/(eps t) <= k (1 + ln k) ln(1/beta) / (eps t)``,
    i.e. the contract ``p = 1, g = k (1 + ln k)``.
    """

    def __init__(self, queries: Sequence):
        self.queries = list(queries)
        self.matrix = _query_matrix(self.queries)
        k = len(self.queries)
        self.contract = BlackBoxContract(p=1.0, g=k * (1 + math.log(k)))

    def run(self, x: Histogram, eps: float, alpha: float = 0.0, beta: float = 0.0,
            rng: RandomSource | None = None) -> QueryTable:
        return QueryTable(self.queries, laplace_release(x, self.matrix, eps, rng))


def laplace_release(x: Histogram, queries, eps: float, rng: RandomSource) -> np.ndarray:
    """Noisy answers ``f(x) + Lap(k/(eps t))`` for every query in ``queries``."""
    Q = queries if isinstance(queries, np.ndarray) else _query_matrix(queries)
    if eps <= 0:
        raise ValueError("eps must be positive")
    k = Q.shape[0]
    truth = Q @ x.weights
    return truth + rng.derive("laplace-release").laplace_array(k / (eps * x.size), k)


def smalldb_size(k: int, alpha: float) -> int:
    """Synthetic database size ``max(1, ceil(ln k / alpha^2))``."""
    if k < 1 or not 0 < alpha <= 1:
        raise ValueError("need k >= 1 and alpha in (0, 1]")
    return max(1, math.ceil(math.log(k) / alpha**2 - 1e-12))


def multiset_histograms(n_types: int, m: int, limit: int = MAX_CANDIDATES) -> np.ndarray:
    """All size-``m`` multisets over ``n_types`` types, as rows of fractional weights."""
    count = math.comb(n_types + m - 1, m)
    if count > limit:
        raise ValueError(f"{count} candidate databases exceeds the limit of {limit}")
    out = np.zeros((count, n_types))
    for row, combo in enumerate(itertools.combinations_with_replacement(range(n_types), m)):
        np.add.at(out[row], list(combo), 1.0)
    return out / m


def smalldb_utilities(x: Histogram, Q: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """``-max_f |f(x) - f(z)|`` for each candidate row ``z``."""
    return -np.max(np.abs(candidates @ Q.T - Q @ x.weights), axis=1)


class SmallDB:
    """Exponential mechanism over all small synthetic databases.

    Declares the contract ``p = 1/3, g = (64 ln N ln k)^(1/3)``; the
    harness measures how well this mechanism actually meets it.
    """

    def __init__(self, queries: Sequence, n_types: int, max_candidates: int = MAX_CANDIDATES):
        self.queries = list(queries)
        self.matrix = _query_matrix(self.queries)
        self.n_types = n_types
        self.max_candidates = max_candidates
        k = len(self.queries)
        self.contract = BlackBoxContract(p=1 / 3, g=(64 * math.log(max(n_types, 2)) * math.log(max(k, 2))) ** (1 / 3))
        self._cache: dict[int, np.ndarray] = {}

    def candidates(self, m: int) -> np.ndarray:
        if m not in self._cache:
            self._cache[m] = multiset_histograms(self.n_types, m, self.max_candidates)
        return self._cache[m]

    def run(self, x: Histogram, eps: float, alpha: float, beta: float = 0.0,
            rng: RandomSource | None = None) -> SyntheticAnswerer:
        m = smalldb_size(self.matrix.shape[0], min(alpha, 1.0))
        cands = self.candidates(m)
        u = smalldb_utilities(x, self.matrix, cands)
        idx = exponential_mechanism(u, 1.0 / x.size, eps, rng.derive("smalldb"))
        return SyntheticAnswerer(cands[idx])


def smalldb(x: Histogram, queries: Sequence, eps: float, alpha: float, rng: RandomSource,
            beta: float = 0.0) -> SyntheticAnswerer:
    return SmallDB(queries, x.n_types).run(x, eps, alpha, beta, rng)


@dataclass(frozen=True, eq=False)
class ErmProblem:
    """Empirical risk minimization over a finite parameter grid.

    ``loss_matrix[g, i]`` is the loss of grid point ``g`` on a record of type
    ``i`` and must lie in [0, 1].
    """

    grid: np.ndarray
    points: np.ndarray
    loss_matrix: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.loss_matrix, dtype=np.float64)
        if L.ndim != 2 or L.shape[0] == 0:
            raise ValueError("loss matrix must be a nonempty (grid, universe) array")
        if L.shape[0] != len(self.grid) or L.shape[1] != len(self.points):
            raise ValueError("loss matrix shape does not match grid and universe")
        if np.any(L < 0) or np.any(L > 1):
            raise ValueError("losses must lie in [0, 1]")
        object.__setattr__(self, "loss_matrix", L)

    @classmethod
    def from_loss(cls, grid, points, loss: Callable) -> "ErmProblem":
        grid = np.asarray(grid, dtype=np.float64)
        points = np.asarray(points, dtype=np.float64)
        L = np.array([[loss(th, z) for z in points] for th in grid], dtype=np.float64)
        return cls(grid, points, L)

    @classmethod
    def squared_loss_1d(cls, grid_size: int = 101, points=None) -> "ErmProblem":
        """``min(1, (theta - z)^2)`` on an evenly spaced grid over [0, 1]."""
        grid = np.linspace(0.0, 1.0, grid_size)
        points = grid.copy() if points is None else np.asarray(points, dtype=np.float64)
        L = np.minimum(1.0, (grid[:, None] - points[None, :]) ** 2)
        return cls(grid, points, L)

    @property
    def n_types(self) -> int:
        return self.loss_matrix.shape[1]

    def risks(self, x: Histogram) -> np.ndarray:
        """Empirical risk of every grid point on ``x``."""
        return self.loss_matrix @ x.weights

    def excess_risk(self, index: int, x: Histogram) -> float:
        r = self.risks(x)
        return float(r[index] - r.min())


def grid_erm(x: Histogram, problem: ErmProblem, eps: float, rng: RandomSource) -> int:
    """Grid index chosen by the exponential mechanism with utility ``-risk`` and sensitivity ``1/t``."""
    return exponential_mechanism(-problem.risks(x), 1.0 / x.size, eps, rng.derive("grid-erm"))


class GridERM:
    """Exponential-mechanism ERM as a black box.

    Excess risk is at most ``2 (ln G + ln(1/beta)) / (eps t)`` with probability
    ``1 - beta``, so for ``beta <= 1/e`` the contract is ``p = p' = 1`` with
    ``g = 2 (1 + ln G)``.
    """

    def __init__(self, problem: ErmProblem):
        self.problem = problem
        self.contract = BlackBoxContract(p=1.0, g=2 * (1 + math.log(len(problem.grid))), p_beta=1.0)

    def run(self, x: Histogram, eps: float, alpha: float = 0.0, beta: float = 0.0,
            rng: RandomSource | None = None) -> int:
        return grid_erm(x, self.problem, eps, rng)
