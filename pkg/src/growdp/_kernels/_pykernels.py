"""Numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for loop.
"""
import numpy as np

__all__ = ["laplace_from_uniform", "mw_update", "uniform_update", "relative_entropy", "atg_halt_batch"]

POSITIVITY_FLOOR = 1e-300


def laplace_from_uniform(u, scale):
    u = np.asarray(u, dtype=np.float64)
    c = u - 0.5
    return -scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))


def mw_update(y, r, rate):
    y = np.asarray(y, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    w = y * np.exp(-rate * r)
    w /= w.sum()
    if w.min() < POSITIVITY_FLOOR:
        w = np.maximum(w, POSITIVITY_FLOOR)
        w /= w.sum()
    return w


def uniform_update(y, t_prev, t_now):
    y = np.asarray(y, dtype=np.float64)
    if t_now == t_prev:
        return y.copy()
    n_types = y.shape[0]
    return (t_prev / t_now) * y + ((t_now - t_prev) / t_now) / n_types


def relative_entropy(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    support = x > 0
    if np.any(y[support] <= 0):
        raise ValueError("relative entropy undefined: y vanishes on the support of x")
    xs = x[support]
    return float(np.sum(xs * np.log(xs / y[support])))


def atg_halt_batch(values, times, threshold, xi, u_thr, u_query):
    """Halt position of Above Threshold for each row of pre-drawn uniforms.

    ``values``/``times``/``xi`` have one entry per query; ``u_thr`` and
    ``u_query`` are (runs, queries). Returns the 0-based index of the first
    query answered above threshold, or ``len(values)`` if the run never halts.
    """
    values = np.asarray(values, dtype=np.float64)
    times = np.asarray(times, dtype=np.int64)
    xi = np.asarray(xi, dtype=np.float64)
    u_thr = np.asarray(u_thr, dtype=np.float64)
    u_query = np.asarray(u_query, dtype=np.float64)
    runs, q = u_query.shape
    halted = np.full(runs, q, dtype=np.int64)
    alive = np.ones(runs, dtype=bool)
    noisy_thr = np.empty(runs)
    for j in range(q):
        if j == 0 or times[j] != times[j - 1]:
            noisy_thr = threshold + laplace_from_uniform(u_thr[:, j], 2.0 / xi[j])
        nu = laplace_from_uniform(u_query[:, j], 4.0 / xi[j])
        above = alive & (values[j] + nu >= noisy_thr)
        halted[above] = j
        alive &= ~above
    return halted
