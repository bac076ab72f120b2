import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from qcva.access import MatrixAccess
from qcva.finance import (
    BsmParams,
    CvaInstance,
    build_cva_instance,
    bsm_payoff_variance,
    bsm_price,
    cva_exact,
    cva_moments,
    cva_quantum_additive,
    cva_quantum_relative,
    cva_quantum_setting1,
    cva_variance_bound,
    gbm_paths,
    gbm_terminal_density,
    portfolio_price_quantum,
)

ATM = BsmParams(100.0, 100.0, 0.05, 0.2, 1.0)


def fixture_2x2(R=0.4):
    return CvaInstance([[0.1, 0.2], [0.3, 0.1]], [[5.0, -2.0], [1.0, 4.0]], R)


def test_bsm_matches_frozen_quadrature(oracles):
    assert bsm_price(ATM) == pytest.approx(oracles["bsm_atm"]["price"], rel=1e-12)
    assert bsm_payoff_variance(ATM)[0] == pytest.approx(oracles["bsm_atm"]["payoff_variance"], rel=1e-10)


def test_bsm_limits():
    deep = BsmParams(1e4, 1.0, 0.05, 0.2, 1.0)
    assert bsm_price(deep) == pytest.approx(1e4 - math.exp(-0.05), rel=1e-12)
    assert bsm_price(BsmParams(100.0, 1e6, 0.05, 0.2, 1.0)) < 1e-12
    assert bsm_price(ATM, t_now=1.0, S=120.0) == 20.0
    assert bsm_price(ATM, t_now=2.0, S=80.0) == 0.0


def test_zero_volatility_limit():
    p = BsmParams(100.0, 100.0, 0.05, 0.0, 1.0)
    assert bsm_payoff_variance(p)[0] == 0.0
    assert bsm_price(p) == pytest.approx(100 - 100 * math.exp(-0.05))
    assert bsm_payoff_variance(BsmParams(100.0, 100.0, 0.05, 1e-6, 1.0))[0] < 1e-6


@settings(max_examples=30)
@given(st.floats(50, 150), st.floats(50, 150), st.floats(0, 0.1), st.floats(0.05, 0.6), st.floats(0.1, 3))
def test_variance_below_bound(S0, K, r, s, T):
    var, lam = bsm_payoff_variance(BsmParams(S0, K, r, s, T))
    assert 0 <= var <= lam


def test_density_normalised_and_shaped():
    total, _ = integrate.quad(lambda v: gbm_terminal_density(v, 1.0, ATM), 0, np.inf, limit=200)
    assert abs(total - 1) < 1e-4
    grid = np.linspace(1, 400, 4000)
    mode = grid[np.argmax(gbm_terminal_density(grid, 1.0, ATM))]
    assert mode < 100 * math.exp(0.05)
    with pytest.raises(ValueError):
        gbm_terminal_density(0.0, 1.0, ATM)


def test_density_matches_simulation(rng):
    x = gbm_paths(ATM, [2.0], 200_000, rng)[:, 0]
    cdf = lambda v: integrate.quad(lambda s: gbm_terminal_density(s, 2.0, ATM), 0, v)[0]
    ks = stats.kstest(x[:2000], np.vectorize(cdf)).statistic
    assert ks <= 0.04
    m = math.log(100) + (0.05 - 0.02) * 2
    assert stats.kstest(x, stats.lognorm(s=0.2 * math.sqrt(2), scale=math.exp(m)).cdf).statistic <= 0.01


def test_instance_mass_and_shapes():
    phi = np.full(8, 0.02)
    inst = build_cva_instance(ATM, phi, 256, 0.4)
    assert inst.Q.shape == (8, 256) and inst.V.shape == (8, 256)
    assert abs(inst.q_norm - phi.sum()) < 1e-6
    assert np.all(inst.V >= 0)
    assert np.allclose(inst.Q.sum(axis=1), phi)
    with pytest.raises(ValueError):
        build_cva_instance(ATM, [0.6, 0.6], 4, 0.4)
    with pytest.raises(ValueError):
        build_cva_instance(ATM, [0.1], 6, 0.4)


def test_instance_degenerate_grid():
    inst = build_cva_instance(ATM, [0.3], 1, 0.4)
    assert inst.Q[0, 0] == 0.3
    S = inst.grid[0, 0]
    assert inst.V[0, 0] == pytest.approx(math.exp(-0.05) * max(S - 100, 0))


def test_zero_default_means_zero_cva():
    inst = build_cva_instance(ATM, np.zeros(4), 8, 0.4)
    assert np.all(inst.Q == 0) and cva_exact(inst) == 0.0


def test_cva_exact_fixture(oracles):
    assert cva_exact(fixture_2x2()) == pytest.approx(oracles["cva_2x2"]["cva"], abs=1e-15)
    assert cva_exact(fixture_2x2(R=1.0)) == 0.0
    neg = CvaInstance([[0.5, 0.5]], [[-1.0, -2.0]], 0.4)
    assert cva_exact(neg) == 0.0


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.floats(0.1, 10), st.floats(0, 0.9))
def test_cva_exact_properties(seed, lam, R):
    r = np.random.default_rng(seed)
    Q = r.random((3, 4))
    Q *= 0.9 / Q.sum()
    V = r.normal(0, 5, (3, 4))
    inst = CvaInstance(Q, V, R)
    loop = sum((1 - R) * Q[t, j] * max(V[t, j], 0) for t in range(3) for j in range(4))
    assert cva_exact(inst) == pytest.approx(loop, rel=1e-12, abs=1e-15)
    assert cva_exact(inst.scale_exposures(lam)) == pytest.approx(lam * cva_exact(inst), rel=1e-12, abs=1e-15)
    if cva_exact(inst) > 0:
        assert cva_exact(inst.with_recovery(R + 0.05)) < cva_exact(inst)


def test_instance_validation():
    with pytest.raises(ValueError):
        CvaInstance([[0.6, 0.6]], [[1.0, 1.0]], 0.4)
    with pytest.raises(ValueError):
        CvaInstance([[0.1]], [[1.0]], 0.4, q_norm=0.2)


def test_variance_bound_single_period():
    vb = cva_variance_bound(ATM, [0.05], 0.4)
    var, lam = bsm_payoff_variance(ATM)
    assert vb.sigma_cva**2 == pytest.approx(lam)
    assert vb.payoff_variance_max == pytest.approx(var)


def test_payoff_variance_alone_does_not_bound_cva_variance():
    # deep in the money, default likely but not certain: mixture variance wins
    p = BsmParams(100.0, 10.0, 0.05, 0.2, 1.0)
    inst = build_cva_instance(p, [0.5], 64, 0.0)
    _, var = cva_moments(inst)
    vb = cva_variance_bound(p, [0.5], 0.0)
    assert var > vb.payoff_variance_max
    assert var <= vb.sigma_cva**2


def test_portfolio_pricing_one_hot(rng):
    Q = MatrixAccess.from_columns([[0.0, 1.0, 0.0, 0.0]])
    V = MatrixAccess.from_columns([[1.0, 7.0, 3.0, 2.0]])
    res = portfolio_price_quantum(Q, V, 0.1, 0.1, rng)
    assert abs(res.value - 7.0) <= 0.1 * 7.0
    assert res.trace.notes["z_max"] == pytest.approx(7.0)


def test_portfolio_pricing_random(rng):
    ok = 0
    for t in range(40):
        r = np.random.default_rng([11, t])
        q = r.random((2, 4))
        q /= q.sum(axis=1, keepdims=True)
        v = r.random((2, 4)) * 10
        res = portfolio_price_quantum(MatrixAccess.from_columns(q), MatrixAccess.from_columns(v), 0.1, 0.1, r)
        exact = float(np.sum(q * v))
        ok += abs(res.value - exact) <= 0.1 * exact
    assert ok >= 38


def test_portfolio_rejects_unnormalised():
    with pytest.raises(ValueError):
        portfolio_price_quantum(MatrixAccess.from_columns([[0.5, 0.4]]), MatrixAccess.from_columns([[1.0, 1.0]]), 0.1, 0.1)


def test_setting1_on_fixture():
    ok = 0
    for t in range(60):
        res = cva_quantum_setting1(fixture_2x2(), 0.1, 0.05, np.random.default_rng([5, t]))
        ok += abs(res.value - 0.72) <= 0.072
    assert ok >= 57


def test_trivial_fixtures_return_zero(rng):
    neg = CvaInstance([[0.5, 0.5]], [[-1.0, -2.0]], 0.4)
    for inst in (fixture_2x2(R=1.0), neg):
        assert cva_quantum_setting1(inst, 0.1, 0.1, rng).value == 0.0
        assert cva_quantum_additive(inst, 1.0, 0.05, 0.1, rng).value == 0.0
        assert cva_quantum_relative(inst, 1.0, 0.1, 0.1, rng).value == 0.0
    assert cva_quantum_relative(neg, 1.0, 0.1, 0.1, rng).degenerate


def test_constant_exposure_point_mass_is_exact(rng):
    inst = CvaInstance([[0.0, 0.3]], [[5.0, 5.0]], 0.4)
    assert cva_quantum_additive(inst, 1.0, 0.01, 0.1, rng).value == pytest.approx(0.9, abs=1e-8)
    assert cva_quantum_relative(inst, 1.0, 0.1, 0.1, rng).value == pytest.approx(0.9, rel=1e-8)


def test_additive_and_relative_on_fixture():
    inst = fixture_2x2()
    mean, var = cva_moments(inst)
    sigma = math.sqrt(var) / 0.6
    B = var / mean**2
    ok_a = ok_r = 0
    for t in range(40):
        ok_a += abs(cva_quantum_additive(inst, sigma, 0.05, 0.05, np.random.default_rng([1, t])).value - 0.72) <= 0.05
        ok_r += abs(cva_quantum_relative(inst, B, 0.1, 0.05, np.random.default_rng([2, t])).value - 0.72) <= 0.072
    assert ok_a >= 38 and ok_r >= 38


def test_relative_queries_do_not_depend_on_default_mass():
    base = CvaInstance([[0.1, 0.2], [0.3, 0.1]], [[5.0, 2.0], [1.0, 4.0]], 0.4)
    half = CvaInstance(base.Q / 2, base.V, 0.4)
    a = cva_quantum_relative(base, 2.0, 0.1, 0.1, 0).total_queries
    b = cva_quantum_relative(half, 2.0, 0.1, 0.1, 0).total_queries
    assert a == b
