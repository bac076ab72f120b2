import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcva.access import (
    AccessError,
    DegenerateDistributionError,
    Kind,
    MatrixAccess,
    QueryMeter,
    affine_access,
    band_of,
    comparator_access,
    positive_part_access,
    product_access,
    qa_apply,
    qc_compare,
    qs_prepare,
    sa_counts,
    sa_sample,
    uniform_prepare,
    va_query,
    va_read_many,
    vector_access,
)
from qcva.qsim.state import Register


def test_va_counts_one_per_query():
    h = vector_access([0.5, 1.5, 2.0], Kind.VA)
    assert va_query(h, 2) == 1.5
    va_read_many(h, [1, 3, 3])
    assert h.counter == 4


def test_indices_are_one_based():
    h = vector_access([1.0, 2.0], Kind.VA)
    with pytest.raises(IndexError):
        va_query(h, 0)
    with pytest.raises(IndexError):
        va_query(h, 3)


def test_kind_mismatch_is_rejected():
    h = vector_access([1.0], Kind.SA)
    with pytest.raises(AccessError):
        va_query(h, 1)


def test_sample_access_rejects_zero_vector():
    with pytest.raises(DegenerateDistributionError):
        vector_access([0.0, 0.0], Kind.SA)
    with pytest.raises(DegenerateDistributionError):
        vector_access([0.0, 0.0], Kind.QS)


def test_sa_sample_law(rng):
    h = vector_access([1.0, -3.0, 0.0, 4.0], Kind.SA)
    j = sa_sample(h, rng, size=80_000)
    freq = np.bincount(j, minlength=5)[1:] / j.size
    assert np.allclose(freq, [0.125, 0.375, 0.0, 0.5], atol=0.01)
    assert h.counter == 80_000


def test_sa_counts_matches_sampling(rng):
    h = vector_access([1.0, 3.0], Kind.SA)
    c = sa_counts(h, rng, 10_000)
    assert c.sum() == 10_000 and abs(c[1] / 10_000 - 0.75) < 0.02


def test_qa_apply_xors_and_uncomputes():
    h = vector_access([0.25, 0.5, 0.75], Kind.QA)
    st0 = uniform_prepare(3, extra=(Register("data", h.width),))
    st1 = qa_apply(h, st0)
    assert np.allclose(h.decode(st1.values("data")), [0.25, 0.5, 0.75])
    st2 = qa_apply(h, st1)
    assert np.all(st2.values("data") == 0)
    assert h.counter == 2


def test_qs_prepare_amplitudes():
    h = vector_access([1.0, 0.0, 3.0], Kind.QS)
    st = qs_prepare(h)
    assert abs(st.amplitude(index=1) - 0.5) < 1e-12
    assert abs(st.amplitude(index=3) - np.sqrt(0.75)) < 1e-12
    assert h.counter == 1


def test_band_of():
    assert list(band_of([0.0, 0.5, 1.0, 1.9, 2.0, 3.9, 4.0])) == [0, 0, 1, 1, 2, 2, 3]


def test_comparator_writes_only_in_band():
    h = vector_access([0.5, 1.5, 3.0], Kind.QA)
    qc = comparator_access(h)
    st = uniform_prepare(3, extra=(Register("data", h.width), Register("band", h.width)))
    st = qa_apply(h, st)
    out = qc_compare(qc, st, 2)
    hit = h.decode(out.values("band"))
    assert list(hit) == [0.0, 0.0, 3.0]
    assert qc.counter == 1 and comparator_access(h) is qc


def test_derived_handles_charge_roots():
    u = vector_access([1.0, -2.0], Kind.QA)
    v = vector_access([3.0, 4.0], Kind.QA)
    pos = positive_part_access(u)
    assert list(pos.payload()) == [1.0, 0.0]
    prod = product_access(pos, v, scale=0.5, cap=1.0)
    assert list(prod.payload()) == [1.0, 0.0]
    st = uniform_prepare(2, extra=(Register("data", prod.width),))
    meter = QueryMeter(prod)
    qa_apply(prod, st)
    assert u.counter == 2 and v.counter == 2
    assert meter.counts() == {"QA": 4}
    aff = affine_access(v, shift=-3.0, scale=2.0)
    assert list(aff.payload()) == [0.0, 2.0]


def test_derived_comparator_charges_root_comparator():
    v = vector_access([0.5, 2.5], Kind.QA)
    plus = positive_part_access(affine_access(v, shift=-1.0))
    meter = QueryMeter(v)
    qc = comparator_access(plus)
    qc.charge(3)
    assert meter.counts() == {"QC": 3}


def test_meter_rollback():
    h = vector_access([1.0], Kind.VA)
    m = QueryMeter(h)
    va_query(h, 1)
    m.rollback()
    assert h.counter == 0


def test_matrix_access_column_stacking():
    A = np.arange(1.0, 7.0).reshape(2, 3)  # 2 x 3
    M = MatrixAccess(A, Kind.VA)
    for i in (1, 2):
        for j in (1, 2, 3):
            assert M.query(i, j) == A[i - 1, j - 1]
            assert M.vec_index(i, j) == (j - 1) * 2 + i
    cols = MatrixAccess.from_columns([[1.0, 2.0], [3.0, 4.0]], Kind.VA)
    assert list(cols.vec.payload()) == [1.0, 2.0, 3.0, 4.0]


@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=16))
def test_payload_is_quantized_input(xs):
    h = vector_access(xs, Kind.QA)
    assert np.all(np.abs(h.payload() - np.asarray(xs)) <= 2.0**-33)
