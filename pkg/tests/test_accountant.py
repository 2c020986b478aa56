import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growdp.accountant import (
    PrivacyBudget,
    PrivacyLedger,
    atg_loss,
    basic_compose,
    budget_b,
    cdp_compose,
    cdp_simplified_bound,
    dp_of_zcdp,
    natg_loss,
    nsg_ledger,
    pmwg_eps_bound,
    pmwg_eps_closed_bound,
    zcdp_compose,
    zcdp_of_pure,
)
from growdp.noise import NoiseFunction, xi_pmwg

SQRT = NoiseFunction(1.0, 0.5)
INV_E = math.exp(-1)


def test_basic_compose():
    assert basic_compose([0.1, 0.2, 0.3]).eps == pytest.approx(0.6, abs=1e-12)
    assert basic_compose([]).eps == 0
    assert basic_compose([0.01] * 100).eps == pytest.approx(1.0, abs=1e-12)


def test_ledger_records_and_totals():
    led = PrivacyLedger()
    led.record(("pmwg", 100, 1), 0.1)
    led.record(("pmwg", 101, 1), 0.1)
    assert len(led) == 2
    assert led.basic().eps == pytest.approx(0.2)
    assert led.cdp(INV_E).eps == pytest.approx(0.21, abs=1e-12)
    with pytest.raises(ValueError):
        led.record("neg", -1)


def test_cdp_examples():
    assert cdp_compose([0.1, 0.1], INV_E).eps == pytest.approx(0.21, abs=1e-9)
    assert cdp_compose([], 0.1).eps == 0
    e0, d = 0.3, 1e-3
    assert cdp_compose([e0], d).eps == pytest.approx(0.5 * e0**2 + e0 * math.sqrt(2 * math.log(1 / d)), abs=1e-12)
    with pytest.raises(ValueError):
        cdp_compose([0.1], 0.0)


def test_zcdp_pipeline():
    assert zcdp_of_pure(0.2) == pytest.approx(0.02)
    assert zcdp_compose([0.01, 0.01]) == pytest.approx(0.02)
    assert dp_of_zcdp(0.02, INV_E).eps == pytest.approx(0.302843, abs=1e-6)
    assert dp_of_zcdp(0.02, INV_E).eps == pytest.approx(0.02 + 2 * math.sqrt(0.02), abs=1e-12)
    with pytest.raises(ValueError):
        zcdp_of_pure(-1)
    with pytest.raises(ValueError):
        dp_of_zcdp(-0.1, 0.1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), st.floats(1e-4, 1.0), st.floats(1e-9, 0.9))
def test_cdp_equals_zcdp_pipeline_for_equal_events(k, eps0, delta):
    lhs = cdp_compose([eps0] * k, delta).eps
    rhs = dp_of_zcdp(k * zcdp_of_pure(eps0), delta).eps
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 0.3), min_size=1, max_size=11), st.floats(1e-9, INV_E))
def test_cdp_below_simplified_bound(events, delta):
    if sum(e * e for e in events) > 1:
        return
    assert cdp_compose(events, delta).eps <= cdp_simplified_bound(events, delta) + 1e-12


def test_budget_validation():
    with pytest.raises(ValueError):
        PrivacyBudget(-1)
    with pytest.raises(ValueError):
        PrivacyBudget(1, 1.0)


def test_sparse_ledgers():
    assert atg_loss(SQRT, 100) == pytest.approx(0.1)
    assert natg_loss(SQRT, 100, 400) == pytest.approx(0.10625, abs=1e-12)
    assert nsg_ledger(SQRT, {100: 2}, 100) == pytest.approx(0.325, abs=1e-12)
    assert nsg_ledger(SQRT, {}, 100) == pytest.approx(0.1, abs=1e-12)
    with pytest.raises(ValueError):
        nsg_ledger(SQRT, {99: 1}, 100)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.integers(100, 300), st.integers(0, 5), max_size=8),
       st.dictionaries(st.integers(100, 300), st.integers(0, 5), max_size=8))
def test_nsg_ledger_additive(a, b):
    if set(a) & set(b):
        return
    base = nsg_ledger(SQRT, {}, 100)
    both = nsg_ledger(SQRT, {**a, **b}, 100)
    assert both - base == pytest.approx((nsg_ledger(SQRT, a, 100) - base) + (nsg_ledger(SQRT, b, 100) - base), abs=1e-12)


def test_budget_b_examples():
    assert budget_b(2, math.e) == pytest.approx(0.5 + math.log(2), abs=1e-12)
    assert budget_b(2, math.e) == pytest.approx(1.193147, abs=1e-6)
    assert budget_b(101, 16) == pytest.approx(0.082998, abs=1e-6)
    vals = [budget_b(t, 3) for t in range(3, 2000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        budget_b(1, 3)


def _pmwg_bound_oracle(xi, alpha, N, n, horizon):
    k = 81 / (2 * alpha**2)
    total = (1 + k * math.log(N)) * xi(n) / n
    for t in range(n + 1, horizon + 1):
        b = math.log(N) / t + math.log(t - 1) / t + math.log(t / (t - 1))
        total += k * b * xi(t) / t
    return total


def test_pmwg_eps_bound():
    assert pmwg_eps_bound(SQRT, 1.0, 1, 100, 100) == pytest.approx(0.1, abs=1e-15)
    xi = xi_pmwg(0.5, 100, 16, 1.0)
    seq = [pmwg_eps_bound(xi, 0.5, 16, 100, h) for h in (100, 150, 400, 1000)]
    assert all(a <= b for a, b in zip(seq, seq[1:]))
    assert seq[-1] == pytest.approx(_pmwg_bound_oracle(xi, 0.5, 16, 100, 1000), rel=1e-12)
    assert seq[-1] <= 1.0
    assert seq[-1] <= pmwg_eps_closed_bound(xi.c, 0.5, 16, 100)


@pytest.mark.parametrize("n", [21, 50, 200])
def test_pmwg_partial_sums_below_closed_bound(n):
    xi = xi_pmwg(0.3, n, 8, 1.0)
    assert pmwg_eps_bound(xi, 0.3, 8, n, 50 * n) <= pmwg_eps_closed_bound(xi.c, 0.3, 8, n)
