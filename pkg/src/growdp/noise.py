"""Seeded randomness, Laplace sampling and time-varying noise scales."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from . import _kernels


def _path_key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    value = int(part)
    if value < 0:
        raise ValueError("derivation path integers must be nonnegative")
    return value


class RandomSource:
    """Randomness addressed by ``(seed, path)``.

    Every draw is a pure function of the master seed and the derivation
    path, so the order in which derived sources are used never changes the
    values they produce. Use a fresh path for every independent draw.
    """

    noiseless = False

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.path = tuple(path)
        self._key = tuple(_path_key(p) for p in self.path)

    def derive(self, *path) -> "RandomSource":
        return type(self)(self.seed, self.path + path)

    def _sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self._key)

    def uniform(self) -> float:
        """One uniform draw in the open interval (0, 1)."""
        bits = int(self._sequence().generate_state(1, np.uint64)[0])
        return ((bits >> 11) + 0.5) / 9007199254740992.0

    def laplace(self, scale: float) -> float:
        if scale <= 0:
            raise ValueError("Laplace scale must be positive")
        return float(_kernels.laplace_from_uniform(np.array([self.uniform()]), scale)[0])

    def generator(self) -> np.random.Generator:
        """A numpy generator for bulk draws, seeded from this path."""
        return np.random.Generator(np.random.Philox(self._sequence()))

    def uniforms(self, size) -> np.ndarray:
        u = self.generator().random(size)
        # Generator.random is on [0, 1); keep the inverse CDF finite
        return np.where(u == 0.0, 2.0**-54, u)

    def laplace_array(self, scale: float, size) -> np.ndarray:
        if scale <= 0:
            raise ValueError("Laplace scale must be positive")
        return _kernels.laplace_from_uniform(self.uniforms(size), scale)

    def __repr__(self):
        return f"{type(self).__name__}(seed={self.seed}, path={self.path})"


class NoiselessSource(RandomSource):
    """Test double: every Laplace draw is exactly zero.

    Uniform draws return 1/2 (the Laplace median) and the exponential
    mechanism degenerates to its argmax.
    """

    noiseless = True

    def __init__(self, seed: int = 0, path: tuple = ()):
        super().__init__(seed, path)

    def uniform(self) -> float:
        return 0.5

    def laplace(self, scale: float) -> float:
        if scale <= 0:
            raise ValueError("Laplace scale must be positive")
        return 0.0

    def uniforms(self, size) -> np.ndarray:
        return np.full(size, 0.5)

    def laplace_array(self, scale: float, size) -> np.ndarray:
        return np.zeros(size)


def sample_laplace(scale: float, rng: RandomSource) -> float:
    """Draw from the Laplace density ``exp(-|z|/scale) / (2 scale)`` by inverse CDF."""
    return rng.laplace(scale)


@dataclass(frozen=True)
class NoiseFunction:
    """Noise scale ``xi_t = c * t**p``.

    Sparse-vector privacy needs ``xi`` nondecreasing and ``xi_t / t``
    nonincreasing, which is exactly ``0 <= p <= 1``.
    """

    c: float
    p: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"noise coefficient must be positive, got {self.c}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise exponent must lie in [0, 1], got {self.p}")

    def __call__(self, t):
        return self.c * np.power(t, self.p) if isinstance(t, np.ndarray) else self.c * t**self.p

    def times_sensitivity(self, t):
        """``xi_t * Delta_t`` for linear queries, ``c * t**(p - 1)``."""
        return self(t) / t


def check_noise_contract(xi, t_start: int, t_stop: int) -> None:
    """Raise if ``xi`` breaks monotonicity on ``[t_start, t_stop]``."""
    ts = np.arange(t_start, t_stop + 1, dtype=np.float64)
    vals = np.array([xi(t) for t in ts])
    if np.any(vals <= 0):
        raise ValueError("noise function must be positive")
    if np.any(np.diff(vals) < -1e-12 * vals[:-1]):
        raise ValueError("noise function must be nondecreasing")
    prod = vals / ts
    if np.any(np.diff(prod) > 1e-12 * prod[:-1]):
        raise ValueError("xi_t * Delta_t must be nonincreasing")


def xi_pmwg(alpha: float, n: int, N: int, eps: float, delta: float = 0.0,
            p: float | None = None) -> NoiseFunction:
    """Noise function used by the growing-database multiplicative weights algorithm.

    With ``p=None`` the square-root schedule is used; passing ``p`` in
    ``[1/4, 1)`` selects the generalized calibration.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if N < 1 or n < 1:
        raise ValueError("N and n must be at least 1")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    log_nn = math.log(N * n)
    if log_nn <= 0:
        raise ValueError("N * n must exceed 1")
    if p is None:
        if delta == 0:
            c = alpha**2 * math.sqrt(n) * eps / (162 * log_nn)
        else:
            c = alpha * math.sqrt(n) * eps / (48 * math.sqrt(log_nn) * math.sqrt(math.log(1 / delta)))
        return NoiseFunction(c, 0.5)
    if not 0.25 <= p < 1:
        raise ValueError("generalized noise exponent must lie in [1/4, 1)")
    q = 1 - p
    if delta == 0:
        c = alpha**2 * q**2 * n**q * eps / (126 * log_nn)
    else:
        c = alpha * q * n**q * eps / (24 * math.sqrt(log_nn) * math.sqrt(math.log(1 / delta)))
    return NoiseFunction(c, p)
