import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growdp.accountant import budget_b
from growdp.core import Histogram, LinearQuery, add_entry
from growdp.noise import RandomSource
from growdp.pmwg import (
    PMWG,
    PMWGConfig,
    budget_cap,
    mw_update,
    per_step_query_budget,
    replay_public_histogram,
    theorem_query_budget,
    uniform_update,
)


def test_uniform_update_examples():
    y = np.array([1 - 1e-12, 1e-12])
    np.testing.assert_allclose(uniform_update(y, 1, 2), [0.75, 0.25], atol=1e-12)
    np.testing.assert_array_equal(uniform_update(y, 5, 5), y)
    np.testing.assert_allclose(uniform_update(np.full(4, 0.25), 3, 17), np.full(4, 0.25))
    with pytest.raises(ValueError):
        uniform_update(y, 3, 2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6), st.integers(1, 50), st.integers(0, 50), st.integers(0, 50))
def test_uniform_update_composes(ws, t0, d1, d2):
    y = np.array(ws) / sum(ws)
    once = uniform_update(y, t0, t0 + d1 + d2)
    twice = uniform_update(uniform_update(y, t0, t0 + d1), t0 + d1, t0 + d1 + d2)
    np.testing.assert_allclose(once, twice, atol=1e-14)
    assert once.sum() == pytest.approx(1.0)


def test_mw_update_examples():
    y = np.array([0.5, 0.5])
    np.testing.assert_allclose(mw_update(y, [1, 0], 1.0), [0.268941, 0.731059], atol=1e-6)
    np.testing.assert_allclose(mw_update(y, [1, 0], 1.0)[0], 1 / (1 + math.e), rtol=1e-12)
    z = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(mw_update(z, np.zeros(3), 0.7), z, rtol=1e-14)
    np.testing.assert_allclose(mw_update(z, np.full(3, 0.4), 0.7), z, rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-6, 1), min_size=2, max_size=8), st.data(), st.floats(1e-3, 5))
def test_mw_update_stays_on_simplex(ws, data, rate):
    y = np.array(ws) / sum(ws)
    r = np.array(data.draw(st.lists(st.floats(0, 1), min_size=len(ws), max_size=len(ws))))
    z = mw_update(y, r, rate)
    assert z.sum() == pytest.approx(1.0) and np.all(z > 0)


def test_budget_cap_and_query_budget():
    assert budget_cap(0.5, math.e, 0.0) == pytest.approx(144.0)
    cfg = PMWGConfig(0.5, 1.0, 100, 16)
    assert theorem_query_budget(cfg, 100) == pytest.approx(math.exp(12.5 / (8262 * math.log(1600))), rel=1e-12)
    assert theorem_query_budget(cfg, 100) == pytest.approx(1.000205, abs=1e-6)
    assert theorem_query_budget(cfg, 99) == 0.0
    assert theorem_query_budget(cfg, 102, kappa=2) == pytest.approx(
        2 * sum(per_step_query_budget(cfg, t) for t in (100, 101, 102)), rel=1e-12)
    with pytest.raises(ValueError):
        theorem_query_budget(cfg, 100, kappa=0.5)


def test_query_budget_variants_are_positive():
    for kw in (dict(p=0.5), dict(p=0.75), dict(delta=1e-3), dict(delta=1e-3, p=0.3)):
        cfg = PMWGConfig(0.5, 1.0, 100, 16, **kw)
        assert 1.0 < theorem_query_budget(cfg, 100) < 1.1


def test_config_validation():
    for kw in (dict(alpha=0), dict(eps=0), dict(n=1), dict(delta=1.0), dict(p=0.1)):
        base = dict(alpha=0.5, eps=1.0, n=10, N=4)
        base.update(kw)
        with pytest.raises(ValueError):
            PMWGConfig(**base)
    with pytest.raises(ValueError):
        PMWG(PMWGConfig(0.5, 1.0, 10, 4))


def noiseless_pmwg(alpha=0.3, n=10, N=2):
    return PMWG(PMWGConfig(alpha, 1.0, n, N, noiseless=True))


def test_hard_query_trace():
    alg = noiseless_pmwg(0.3)
    alg.y = np.array([0.2, 0.8])
    x = Histogram([0.5, 0.5], 10)
    a = alg.answer(10, [1, 0], x)
    assert a == pytest.approx(0.5)
    assert alg.hard_total == 1 and alg.hard_counts == {10: 1}
    # released >= f(y) so the update direction is 1 - f, which raises y[0]
    np.testing.assert_allclose(alg.y, mw_update(np.array([0.2, 0.8]), [0, 1], 0.05))
    assert alg.y[0] > 0.2


def test_easy_query_trace():
    alg = noiseless_pmwg(0.3)
    alg.y = np.array([0.2, 0.8])
    x = Histogram([0.25, 0.75], 4 * 10, exact=False)
    assert alg.answer(10, [1, 0], x) == pytest.approx(0.2)
    assert alg.hard_total == 0
    np.testing.assert_array_equal(alg.y, [0.2, 0.8])
    x2 = Histogram([0.2, 0.8], 10)
    assert alg.answer(10, [1, 0], x2) == pytest.approx(0.2)


def test_budget_exhaustion_is_permanent():
    alg = noiseless_pmwg(1.0, n=10, N=1)
    # ln 1 = 0 and no growth, so the cap is 0 and the first hard query exhausts it
    assert alg.cap == 0
    alg2 = PMWG(PMWGConfig(1.0, 1.0, 10, 2, noiseless=True))
    x = Histogram([1.0, 0.0], 10)
    answers = []
    for _ in range(40):
        # reset the public histogram so every query has gap 1 > 2/3 and is hard
        alg2.y = np.array([1e-9, 1 - 1e-9])
        answers.append(alg2.answer(10, [1, 0], x))
    assert answers[0] is not None
    first_none = answers.index(None)
    assert all(a is None for a in answers[first_none:])
    assert alg2.exhausted and alg2.hard_total == math.floor(alg2.cap) + 1
    assert alg2.answer(11, [0, 1], x) is None


def test_sum_b_tracks_growth():
    alg = noiseless_pmwg(0.5, n=10, N=4)
    alg.advance(13)
    assert alg.sum_b == pytest.approx(sum(budget_b(t, 4) for t in (11, 12, 13)))
    assert alg.cap == pytest.approx(budget_cap(0.5, 4, alg.sum_b))
    with pytest.raises(ValueError):
        alg.advance(12)


def test_noisy_replay_matches_internal_state():
    cfg = PMWGConfig(0.5, 50.0, 20, 4)
    alg = PMWG(cfg, RandomSource(3))
    x = Histogram.from_counts([20, 0, 0, 0])
    ys = []
    g = np.random.default_rng(0)
    for t in range(20, 60):
        if t > 20:
            x = add_entry(x, int(g.integers(4)))
        for _ in range(3):
            alg.answer(t, g.random(4), x)
            ys.append(alg.y.copy())
    assert alg.hard_total > 0
    replay = replay_public_histogram(alg.transcript, cfg.n, cfg.N, cfg.alpha)
    for a, b in zip(ys, replay):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_eps_spent_matches_sparse_ledger():
    cfg = PMWGConfig(0.5, 1.0, 20, 4)
    alg = PMWG(cfg, RandomSource(9))
    x = Histogram.from_counts([20, 0, 0, 0])
    for t in range(20, 30):
        alg.answer(t, LinearQuery([1, 0, 0, 0]), x if t == 20 else add_entry(x, 0))
        if t > 20:
            x = add_entry(x, 0)
    xi = cfg.noise()
    want = xi(20) / 20 + 9 / 8 * sum(h * xi(t) / t for t, h in alg.nsg.hard_counts.items())
    assert alg.eps_spent() == pytest.approx(want, rel=1e-12)
