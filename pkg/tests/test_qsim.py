import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcva.access import Kind, vector_access
from qcva.config import powering_repetitions
from qcva.estimators import norm_preparation
from qcva.qsim.qae import (
    Preparation,
    amplitude_estimate,
    error_bound,
    full_engine_distribution,
    grid_size,
    outcome_distribution,
    power_median,
    qae_exponential_relative,
    sample_outcomes,
)
from qcva.qsim.search import max_find, min_find
from qcva.qsim.state import NormError, Register, RegisterError, SparseState, norm_monitor


def _state():
    layout = (Register("index", 3), Register("flag", 1))
    return SparseState.zero(layout).hadamard_uniform("index", 4)


def test_uniform_superposition():
    s = _state()
    assert len(s) == 4 and abs(s.norm() - 1) < 1e-15
    assert set(s.values("index")) == {1, 2, 3, 4}


def test_rotation_is_unitary_on_both_flag_values():
    s = _state().rotate("index", "flag", lambda x: x / 8)
    assert abs(s.probability(s.values("flag") == 1) - (1 + 2 + 3 + 4) / 32) < 1e-12
    back = s.rotate("index", "flag", lambda x: x / 8)
    # R^2 is a rotation by twice the angle, still norm 1
    assert abs(back.norm() - 1) < 1e-12


def test_rotation_rejects_out_of_range():
    with pytest.raises(ValueError, match="outside"):
        _state().rotate("index", "flag", lambda x: x.astype(float))


def test_reflections():
    s = _state()
    assert np.allclose(s.reflect_about(s).amps, -s.amps)
    flagged = s.reflect_flag("flag")
    assert np.allclose(flagged.amps, -s.amps)


def test_register_overflow_detected():
    s = _state()
    with pytest.raises(RegisterError):
        s.xor_into("flag", np.full(len(s), 2))


def test_norm_violation_raises():
    s = _state()
    saved = (norm_monitor.max_deviation, norm_monitor.checks)
    with pytest.raises(NormError):
        s.phase(np.ones(len(s), bool), factor=1.1)
    # the deliberate violation must not pollute the global hygiene record
    norm_monitor.max_deviation, norm_monitor.checks = saved


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_preparation_amplitude_is_mean(us):
    u = np.asarray(us)
    if u.max() == 0:
        return
    u = u / u.max()
    prep = norm_preparation(vector_access(u, Kind.QA))
    assert abs(prep.amplitude - np.mean(vector_access(u, Kind.QA).payload())) < 1e-12
    assert prep.cost == {"QA": 2}
    assert norm_monitor.max_deviation <= 1e-9


def test_grid_size():
    assert [grid_size(k) for k in (1, 2, 3, 16, 17)] == [1, 2, 4, 16, 32]


@pytest.mark.parametrize("a", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_outcome_law_sums_to_one(a):
    p = outcome_distribution(a, 64)
    assert abs(p.sum() - 1) < 1e-12 and np.all(p >= -1e-15)


def test_full_engine_matches_closed_form():
    u = np.array([0.2, 0.7, 1.0, 0.35])
    prep = norm_preparation(vector_access(u, Kind.QA))
    for M in (8, 32):
        assert np.allclose(full_engine_distribution(prep, M), outcome_distribution(prep.amplitude, M), atol=1e-12)


def test_large_grid_sampler_matches_exact_law(rng):
    M, a = 2**17, 0.3
    y = sample_outcomes(a, M, rng, size=40_000)
    # compare against the exact law on the central window and the remaining mass
    p = outcome_distribution(a, M)
    top = np.argsort(p)[-8:]
    for k in top:
        f = np.mean(y == k)
        assert abs(f - p[k]) < 5 * math.sqrt(p[k] * (1 - p[k]) / y.size) + 1e-4
    rest = 1 - p[top].sum()
    assert abs(np.mean(~np.isin(y, top)) - rest) < 5 * math.sqrt(rest / y.size) + 1e-3


def test_qae_charges_2m_minus_1_preparations(rng):
    h = vector_access([0.5, 1.0], Kind.QA)
    prep = norm_preparation(h)
    amplitude_estimate(prep, 10, rng)
    assert h.counter == 2 * (2 * 16 - 1)


def test_error_bound_holds_often(rng):
    prep = norm_preparation(vector_access([0.3, 1.0, 0.05, 0.6], Kind.QA))
    a = prep.amplitude
    est = amplitude_estimate(prep, 32, rng, shots=2000)
    assert np.mean(np.abs(est - a) <= error_bound(a, 32)) >= 8 / math.pi**2 - 0.03


def test_exact_amplitudes_recovered(rng):
    # a in {0, 1/2, 1} sits exactly on the outcome grid sin^2(pi y / M)
    for u in ([0.0, 0.0], [1.0, 0.0], [1.0, 1.0]):
        prep = norm_preparation(vector_access(u, Kind.QA))
        assert amplitude_estimate(prep, 64, rng) == pytest.approx(prep.amplitude, abs=1e-12)


def test_power_median_reps():
    assert powering_repetitions(0.1) == 2 * math.ceil(9 * math.log(10)) + 1
    res = power_median(lambda r: 1.0, 0.1, 0)
    assert res.value == 1.0 and res.repetitions == powering_repetitions(0.1)


def test_exponential_search_relative_error(rng):
    prep = norm_preparation(vector_access(np.r_[np.zeros(63), 1.0], Kind.QA))
    res = qae_exponential_relative(prep, 0.05, 0.1, rng)
    assert abs(res.value - 1 / 64) <= 0.05 / 64


def test_preparation_probe_is_not_charged():
    h = vector_access([0.5], Kind.QA)
    prep = norm_preparation(h)
    _ = prep.amplitude
    assert h.counter == 0
    prep.charge(3)
    assert h.counter == 6


def test_min_find_small(rng):
    h = vector_access([3, 1, 4, 1, 5], Kind.QA)
    idx, val = max_find(h, 0.05, rng)
    assert (idx, val) == (5, 5.0)
    res = min_find(vector_access([3, 1, 4, 1, 5], Kind.QA), 0.05, rng)
    assert res.value == 1.0 and res.index in (2, 4)


@pytest.mark.parametrize("engine", ["analytic", "full"])
def test_min_find_engines(engine):
    ok = 0
    for t in range(30):
        r = np.random.default_rng([7, t])
        p = r.permutation(16) + 1.0
        ok += min_find(vector_access(p, Kind.QA), 0.05, r, engine=engine).value == 1.0
    assert ok >= 28


def test_custom_preparation_cost():
    h = vector_access([0.25, 0.75], Kind.QA)

    def build():
        from qcva.access import controlled_rotation, qa_apply, uniform_prepare

        s = uniform_prepare(2, extra=(Register("data", h.width), Register("flag", 1)))
        s = qa_apply(h, s)
        s = controlled_rotation(s, "data", "flag")
        return qa_apply(h, s)

    prep = Preparation(build, [h])
    assert prep.cost == {"QA": 2} and abs(prep.amplitude - 0.5) < 1e-12
