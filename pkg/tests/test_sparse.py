import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growdp.noise import NoiseFunction, RandomSource
from growdp.sparse import (
    AboveThreshold,
    HaltedError,
    Kind,
    NumericAboveThreshold,
    NumericSparse,
    SparseConfig,
    accuracy_beta,
    accuracy_beta_budget,
    atg_halt_positions,
    privacy_report,
)

SQRT = NoiseFunction(1.0, 0.5)


class TableSource(RandomSource):
    """Serves uniforms from ``table[(t, j, tag)]`` so a test controls every draw."""

    table: dict = {}
    calls: list = []

    def uniform(self):
        key = self.path[-3:]
        type(self).calls.append(key)
        return type(self).table[key]


def noiseless(threshold, xi=SQRT):
    return SparseConfig(threshold, xi, noiseless=True)


def test_noiseless_atg_trace():
    atg = AboveThreshold(noiseless(0.5))
    kinds = [atg.step(100, v).kind for v in (0.3, 0.4, 0.6)]
    assert kinds == [Kind.BELOW, Kind.BELOW, Kind.ABOVE]
    assert atg.halted
    with pytest.raises(HaltedError):
        atg.step(101, 0.9)


def test_noiseless_nsg_trace():
    nsg = NumericSparse(noiseless(0.2), n=100)
    out = [nsg.step(100, v) for v in (0.1, 0.3, 0.1, 0.25)]
    assert [a.kind for a in out] == [Kind.BELOW, Kind.NUMERIC, Kind.BELOW, Kind.NUMERIC]
    assert out[1].value == 0.3 and out[3].value == 0.25
    assert nsg.hard_counts == {100: 2}
    assert nsg.runs == 2
    assert privacy_report(nsg) == pytest.approx(0.325, abs=1e-12)


def test_tie_is_above():
    natg = NumericAboveThreshold(noiseless(0.5))
    ans = natg.step(10, 0.5)
    assert ans.kind is Kind.NUMERIC and ans.value == 0.5


def test_privacy_reports():
    assert NumericSparse(noiseless(10.0)).privacy_report() == 0.0
    nsg = NumericSparse(noiseless(10.0), n=100)
    assert nsg.privacy_report() == pytest.approx(0.1)
    nsg.step(100, 0.0)
    assert nsg.privacy_report() == pytest.approx(0.1)
    natg = NumericAboveThreshold(noiseless(0.5))
    natg.step(100, 0.1)
    assert natg.privacy_report() == pytest.approx(0.1)
    natg.step(400, 0.9)
    assert natg.privacy_report() == pytest.approx(0.10625, abs=1e-12)


def test_random_source_required():
    with pytest.raises(ValueError):
        AboveThreshold(SparseConfig(0.5, SQRT))


def test_time_cannot_go_backwards():
    atg = AboveThreshold(noiseless(5.0))
    atg.step(10, 0.0)
    with pytest.raises(ValueError):
        atg.step(9, 0.0)


def test_threshold_redrawn_once_per_time_step():
    TableSource.table = {(t, j, tag): 0.5 for t in range(1, 20) for j in range(1, 4)
                         for tag in ("threshold", "query", "answer")}
    TableSource.calls = []
    atg = AboveThreshold(SparseConfig(100.0, SQRT), TableSource(0))
    for t in range(5, 10):
        for _ in range(3):
            atg.step(t, 0.0)
    thr = [k for k in TableSource.calls if k[2] == "threshold"]
    assert thr == [(t, 1, "threshold") for t in range(5, 10)]
    assert atg.threshold_draws == 5


def test_nsg_new_run_redraws_threshold_within_step():
    TableSource.table = {(7, j, tag): 0.5 for j in range(1, 6) for tag in ("threshold", "query", "answer")}
    TableSource.calls = []
    nsg = NumericSparse(SparseConfig(0.2, SQRT), TableSource(0))
    for v in (0.1, 0.3, 0.1, 0.25, 0.0):
        nsg.step(7, v)
    thr = [k[1] for k in TableSource.calls if k[2] == "threshold"]
    assert thr == [1, 3, 5]
    assert nsg.threshold_draws == 3


def _kernel_inputs(seed, q=12, runs=1000):
    g = np.random.default_rng(seed)
    times = np.sort(g.integers(10, 15, size=q))
    values = g.random(q)
    u_thr = g.random((runs, q))
    u_q = g.random((runs, q))
    return values, times, u_thr, u_q


def test_kernel_agrees_with_state_machine():
    values, times, u_thr, u_q = _kernel_inputs(3)
    xi = NoiseFunction(10.0, 0.5)
    halts = atg_halt_positions(values, times, 0.9, xi(times.astype(float)), u_thr, u_q)
    js = []
    for k, t in enumerate(times):
        js.append(1 if k == 0 or t != times[k - 1] else js[-1] + 1)
    for run in range(u_q.shape[0]):
        TableSource.table = {}
        for k, (t, j) in enumerate(zip(times, js)):
            TableSource.table[(int(t), j, "threshold")] = u_thr[run, k]
            TableSource.table[(int(t), j, "query")] = u_q[run, k]
        atg = AboveThreshold(SparseConfig(0.9, xi), TableSource(0))
        got = len(values)
        for k, (t, v) in enumerate(zip(times, values)):
            if atg.step(int(t), v).is_hard:
                got = k
                break
        assert got == halts[run]
    assert 0 < np.mean(halts < len(values)) < 1


def test_accuracy_beta_examples():
    xi = SQRT
    assert accuracy_beta(xi, 1.0, {}, {}, 100) == pytest.approx(math.exp(-1.25))
    val = accuracy_beta(xi, 1.0, {100: 10}, {100: 1}, 100)
    assert val == pytest.approx(13 * math.exp(-1.25), rel=1e-12)
    # a tail bound chosen so that alpha * xi_n / 8 = ln(1/u)
    u = 0.01
    c = 8 * math.log(1 / u) / (0.5 * math.sqrt(100))
    assert accuracy_beta(NoiseFunction(c, 0.5), 0.5, {}, {}, 100) == pytest.approx(u, rel=1e-12)
    assert accuracy_beta_budget(xi, 1.0, {100: 2.0}, 100) == pytest.approx(7 * math.exp(-1.25), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.95), st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_noiseless_nsg_matches_comparison(threshold, values):
    nsg = NumericSparse(noiseless(threshold), n=1)
    for k, v in enumerate(values):
        ans = nsg.step(1 + k // 3, v)
        assert ans.is_hard == (v >= threshold)
        if ans.is_hard:
            assert ans.value == v
    assert nsg.hard_total == sum(v >= threshold for v in values)


def test_seeded_runs_reproduce():
    cfg = SparseConfig(0.3, SQRT)

    def trace(seed):
        nsg = NumericSparse(cfg, RandomSource(seed))
        return [(a.kind, a.value) for a in (nsg.step(t, 0.25) for t in range(100, 160))]

    assert trace(4) == trace(4)
    assert trace(4) != trace(5)
