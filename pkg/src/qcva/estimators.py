"""Quantum mean and inner-product estimators plus their classical baselines.

Every quantum estimator is assembled from counted oracles, a state
preparation circuit and amplitude estimation; reported query counts come from
the oracle counters.
"""

from __future__ import annotations

import math

import numpy as np

from .access import (
    Kind,
    MatrixAccess,
    OracleHandle,
    QueryMeter,
    affine_access,
    comparator_access,
    controlled_rotation,
    positive_part_access,
    product_access,
    qa_apply,
    qc_compare,
    qs_prepare,
    sa_counts,
    uniform_prepare,
    va_read_many,
)
from .config import DEFAULT_CONSTANTS, EstimatorConstants
from .fixedpoint import decode_codes, encode_codes
from .qsim.qae import Preparation, power_median, qae_exponential_relative, qae_median
from .qsim.search import max_find
from .qsim.state import Register
from .results import AlgorithmTrace, EstimateResult


class PreconditionError(ValueError):
    pass


def _check_unit(eps: float, name: str = "epsilon") -> None:
    if not 0 < eps < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {eps}")


def _result(meter, value, eps, delta, mode, reps=0, trace=None, degenerate=False, width=0) -> EstimateResult:
    q = meter.counts()
    return EstimateResult(
        value=float(value),
        target_epsilon=eps,
        target_delta=delta,
        mode=mode,
        queries=q,
        gate_estimate=int(sum(q.values()) * width),
        repetitions=reps,
        degenerate=degenerate,
        trace=trace or AlgorithmTrace(),
    )


# -- state preparations ---------------------------------------------------------


def norm_preparation(h: OracleHandle) -> Preparation:
    """(1/sqrt N) sum_j |j>|0>(sqrt(1-u_j)|0> + sqrt(u_j)|1>): two QA queries."""

    def build():
        st = uniform_prepare(h.n, "index", extra=(Register("data", h.width), Register("flag", 1)))
        st = qa_apply(h, st, "index", "data")
        st = controlled_rotation(st, "data", "flag", h.c1, h.c2, h.signed)
        return qa_apply(h, st, "index", "data")

    return Preparation(build, [h], name=f"norm[{h.name}]")


def sampling_preparation(hu: OracleHandle, hv: OracleHandle) -> Preparation:
    """sum_j sqrt(u_j/|u|_1)|j>|0>(sqrt(1-v_j)|0> + sqrt(v_j)|1>): one QS, two QA queries."""

    def build():
        st = qs_prepare(hu, "index", extra=(Register("data", hv.width), Register("flag", 1)))
        st = qa_apply(hv, st, "index", "data")
        st = controlled_rotation(st, "data", "flag", hv.c1, hv.c2, hv.signed)
        return qa_apply(hv, st, "index", "data")

    return Preparation(build, [hu, hv], name=f"sample[{hu.name},{hv.name}]")


def level_preparation(hu: OracleHandle, hv: OracleHandle, qc: OracleHandle, level: int) -> Preparation:
    """Sampling state for the band-l truncation v_{l,j} = v_j / 2^l on band l, else 0.

    Circuit: QS(u), QA(v) into `data`, QC(v, l) into `band`, reversible
    division by 2^l into `scaled`, rotation onto the flag, then uncompute
    `scaled`, `band` and `data`.
    """
    c1, c2 = hv.c1, hv.c2
    scale = 2.0**-level

    def divide(codes):
        return encode_codes(decode_codes(codes, c1, c2, hv.signed) * scale, c1, c2)

    def build():
        extra = (
            Register("data", hv.width),
            Register("band", hv.width),
            Register("scaled", c1 + c2),
            Register("flag", 1),
        )
        st = qs_prepare(hu, "index", extra=extra)
        st = qa_apply(hv, st, "index", "data")
        st = qc_compare(qc, st, level, "data", "band")
        st = st.compute(divide, ["band"], "scaled")
        st = controlled_rotation(st, "scaled", "flag", c1, c2)
        st = st.compute(divide, ["band"], "scaled")
        st = qc_compare(qc, st, level, "data", "band")
        return qa_apply(hv, st, "index", "data")

    return Preparation(build, [hu, hv, qc], name=f"level{level}[{hv.name}]")


def sample_preparation(hu: OracleHandle, hv: OracleHandle) -> Preparation:
    """sum_j sqrt(u_j/|u|_1)|j>|v_j>, measured to draw the random variable m."""

    def build():
        st = qs_prepare(hu, "index", extra=(Register("data", hv.width),))
        return qa_apply(hv, st, "index", "data")

    return Preparation(build, [hu, hv], flag=None, name=f"chi[{hu.name},{hv.name}]")


def draw_samples(prep: Preparation, hv: OracleHandle, k: int, rng) -> np.ndarray:
    """k independent measurements of the data register, each a fresh preparation."""
    codes = prep.state.measure(["data"], rng, size=k)[:, 0]
    prep.charge(k)
    return hv.decode(codes)


def sample_mean(prep: Preparation, hv: OracleHandle, k: int, rng) -> float:
    """Mean of k measured values, drawn as multinomial outcome counts."""
    uniq, counts = prep.state.measure_counts(["data"], rng, k)
    prep.charge(k)
    return float(counts @ hv.decode(uniq[:, 0])) / k


# -- norm and inner products with query access -------------------------------------


def _norm_estimate(h, epsilon, delta, rng, engine, constants):
    prep = norm_preparation(h)
    res = qae_exponential_relative(prep, epsilon, delta, rng, engine, constants)
    return h.n * res.value, res


def norm_estimate(
    h: OracleHandle,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Relative-error estimate of ||u||_1 for u in [0,1]^N with max_j u_j = 1.

    Amplitude estimation on the norm state gives a = ||u||_1 / N >= 1/N.
    """
    _check_unit(epsilon)
    _check_unit(delta, "delta")
    h._require(Kind.QA)
    u = h.payload()
    if np.any(u < 0) or np.any(u > 1):
        raise PreconditionError("entries must lie in [0, 1]")
    if u.max() != 1.0:
        raise PreconditionError(f"largest entry must be exactly 1, got {u.max()}; divide by the maximum first")
    meter = QueryMeter(h)
    value, res = _norm_estimate(h, epsilon, delta, rng, engine, constants)
    return _result(meter, value, epsilon, delta, "relative", res.repetitions, res.trace, res.degenerate, h.c1 + h.c2)


def find_z_max(hu: OracleHandle, hv: OracleHandle, delta: float, rng=None, constants=DEFAULT_CONSTANTS):
    """max_j u_j v_j by maximum finding over the product oracle."""
    return max_find(product_access(hu, hv), delta, rng, constants=constants)


def inner_product_relative(
    hu: OracleHandle,
    hv: OracleHandle,
    z_max: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Relative-error estimate of u.v given z_max = max_j u_j v_j.

    The norm estimator runs on z / z_max, whose largest entry is 1; the
    product oracle is capped at 1 so that the rotation stays well defined.
    """
    _check_unit(epsilon)
    _check_unit(delta, "delta")
    for h in (hu, hv):
        h._require(Kind.QA)
        if h.signed:
            raise PreconditionError(f"{h.name} has negative entries; inner products here need non-negative inputs")
    meter = QueryMeter(hu, hv)
    if z_max == 0:
        return _result(meter, 0.0, epsilon, delta, "relative", 0, AlgorithmTrace(notes={"z_max": 0.0}))
    if z_max < 0:
        raise PreconditionError(f"z_max must be non-negative, got {z_max}")
    hz = product_access(hu, hv, scale=1.0 / z_max, cap=1.0)
    gamma, res = _norm_estimate(hz, epsilon, delta, rng, engine, constants)
    trace = res.trace
    trace.notes["z_max"] = float(z_max)
    return _result(meter, z_max * gamma, epsilon, delta, "relative", res.repetitions, trace, res.degenerate, hu.c1 + hu.c2)


def trace_estimate(
    A: MatrixAccess,
    B: MatrixAccess,
    z_max: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """tr(A^T B) = vec(A) . vec(B) to relative error epsilon."""
    if (A.rows, A.cols) != (B.rows, B.cols):
        raise ValueError(f"shape mismatch: {A.rows}x{A.cols} vs {B.rows}x{B.cols}")
    return inner_product_relative(A.vec, B.vec, z_max, epsilon, delta, rng, engine, constants)


# -- sampling access ------------------------------------------------------------


def _check_sampling_pair(hu, hv, lo_open=False):
    hu._require(Kind.QS)
    hv._require(Kind.QA)
    if hu.n != hv.n:
        raise ValueError(f"length mismatch: {hu.n} vs {hv.n}")


def mean_sampling(
    hu: OracleHandle,
    hv: OracleHandle,
    epsilon: float,
    delta: float,
    mode: str = "additive",
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Estimate (u.v)/||u||_1 for v in [0,1] with QS(u), QA(v).

    additive: K > 3 pi / epsilon, median of R(delta) runs.
    relative: exponential search over K.
    """
    _check_unit(epsilon)
    _check_unit(delta, "delta")
    _check_sampling_pair(hu, hv)
    v = hv.payload()
    if np.any((v < 0) | (v > 1)):
        j = int(np.argmax((v < 0) | (v > 1))) + 1
        raise PreconditionError(f"v_{j} = {v[j - 1]} lies outside [0, 1]")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(hu, hv)
    prep = sampling_preparation(hu, hv)
    if mode == "additive":
        K = math.floor(constants.qae_k_factor / epsilon) + 1
        med, R = qae_median(prep, K, delta, rng, engine, constants)
        trace = AlgorithmTrace(stages=[{"K": K, "median": med, "runs": R}])
        return _result(meter, med, epsilon, delta, "additive", R, trace, width=hv.c1 + hv.c2)
    if mode == "relative":
        res = qae_exponential_relative(prep, epsilon, delta, rng, engine, constants)
        return _result(meter, res.value, epsilon, delta, "relative", res.repetitions, res.trace, res.degenerate, hv.c1 + hv.c2)
    raise ValueError(f"mode must be 'additive' or 'relative', got {mode!r}")


def bounded_l2_levels(epsilon: float) -> int:
    return math.ceil(math.log2(1 / epsilon))


def mean_bounded_l2(
    hu: OracleHandle,
    hv: OracleHandle,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Additive estimate of E[m] = (u.v)/||u||_1 for non-negative, unbounded v.

    The range of v is cut into dyadic bands l = 0..k, k = ceil(log2(1/epsilon));
    band l contributes 2^l E[m_l] where m_l = v/2^l on the band and 0 elsewhere,
    so every m_l lies in [0, 1].  Each band is estimated by amplitude
    estimation at a common K > 3 pi sqrt(k+1) / epsilon with failure budget
    delta/(k+1).  The per-band errors (pi/K)(2 sqrt(a_l) + pi/K), weighted by
    2^l, sum by Cauchy-Schwarz to at most about
    (2 epsilon / 3) sqrt(1 + 2 E[m^2]); the mass above 2^k that no band covers
    is at most E[m^2] / 2^k <= epsilon E[m^2].  Together the error stays below
    epsilon (sqrt(E[m^2]) + 1)^2 with probability at least 1 - delta.
    Multiply the result by ||u||_1 for u.v.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    _check_unit(delta, "delta")
    _check_sampling_pair(hu, hv)
    if hv.signed:
        raise PreconditionError(f"{hv.name} must be non-negative")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(hu, hv)
    k = bounded_l2_levels(epsilon)
    K = math.floor(constants.qae_k_factor * math.sqrt(k + 1) / epsilon) + 1
    d_level = delta / (k + 1)
    qc = comparator_access(hv)
    meter.track(qc)
    trace = AlgorithmTrace(dyadic_levels=list(range(k + 1)))
    gamma, reps = 0.0, 0
    for level in range(k + 1):
        prep = level_preparation(hu, hv, qc, level)
        med, R = qae_median(prep, K, d_level, rng, engine, constants)
        reps += R
        trace.level_estimates.append(med)
        gamma += 2.0**level * med
    # diagnostic only: exact mass that falls above the top band
    u, v = hu.payload(), hv.payload()
    top = v >= 2.0**k
    trace.dropped_mass = float(np.sum(u[top] * v[top]) / hu.norm)
    trace.notes.update({"K": K, "k": k, "delta_level": d_level})
    return _result(meter, gamma, epsilon, delta, "additive", reps, trace, width=hv.c1 + hv.c2)


# Constant in the bounded-variance additive error split.  After recentring at
# sigma*m0 with |m0 - E[m']| <= 3, the second moments x+ and x- of the two
# parts satisfy x+ + x- <= (1 + 9)/16, so the two bounded-l2 error units sum to
# at most (x+ + x-) + 2 sqrt(2 (x+ + x-)) + 2 = 2.625 + 2 sqrt(1.25).
_ADDITIVE_SPLIT = 2.625 + 2 * math.sqrt(1.25)


def mean_bounded_var_additive(
    hu: OracleHandle,
    hv: OracleHandle,
    sigma: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Additive estimate of (v.u)/||u||_1 given Var(m) <= sigma^2.

    One run: draw a sample m0 of m/sigma, form v~ = (v - sigma m0)/(4 sigma),
    estimate the means of its positive and negative parts with the bounded-l2
    estimator, and return sigma (m0 + 4 E[v~+] - 4 E[v~-]).  A run succeeds
    with probability above 3/4 (Chebyshev for m0 at three standard deviations
    plus the two inner failure budgets); the median of R(delta) runs gives
    confidence 1 - delta.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_unit(delta, "delta")
    _check_sampling_pair(hu, hv)
    rng = np.random.default_rng(rng)
    meter = QueryMeter(hu, hv)
    # epsilon is in the units of v; the inner error is capped below 1/2 as the
    # bounded-l2 estimator requires, which only tightens the guarantee
    eps_in = min(epsilon / (4 * sigma * _ADDITIVE_SPLIT), 0.25)
    d_in = constants.bounded_var_inner_delta
    chi = sample_preparation(hu, hv)
    runs = []

    def one_run(r):
        sample = float(draw_samples(chi, hv, 1, r)[0])  # sigma * m0
        shifted = affine_access(hv, shift=-sample, scale=1.0 / (4 * sigma), name="v~")
        plus = positive_part_access(shifted)
        minus = positive_part_access(affine_access(hv, shift=-sample, scale=-1.0 / (4 * sigma), name="-v~"))
        ep = mean_bounded_l2(hu, plus, eps_in, d_in, r, engine, constants)
        em = mean_bounded_l2(hu, minus, eps_in, d_in, r, engine, constants)
        value = sample + 4 * sigma * (ep.value - em.value)
        runs.append({"m0": sample / sigma, "plus": ep.value, "minus": em.value, "value": value})
        return EstimateResult(value, epsilon, delta, "additive", repetitions=ep.repetitions + em.repetitions)

    med = power_median(one_run, delta, rng, constants)
    mid = runs[int(np.argsort([x["value"] for x in runs])[len(runs) // 2])]
    trace = AlgorithmTrace(m0=mid["m0"], parts={"plus": mid["plus"], "minus": mid["minus"]}, stages=runs)
    trace.notes.update({"epsilon_inner": eps_in, "runs": len(runs)})
    return _result(meter, med.value, epsilon, delta, "additive", med.repetitions, trace, width=hv.c1 + hv.c2)


def mean_bounded_var_relative(
    hu: OracleHandle,
    hv: OracleHandle,
    B: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Relative estimate of (v.u)/||u||_1 given Var(m) <= B E[m]^2, v >= 0.

    One run: the mean m~ of k = ceil(32 B) measured samples lands within
    E[m]/2 of E[m] with probability >= 7/8 (Chebyshev), which bounds the
    second moment of v' = v/m~ by 4(1 + B).  The bounded-l2 estimator on v'
    at epsilon' = epsilon / (1.5 (2 sqrt(1+B) + 1)^2) then gives
    |m~ E[v'] - E[m]| <= epsilon E[m].  The median of R(delta) runs gives
    confidence 1 - delta.  A zero coarse mean makes the run degenerate.
    """
    if B <= 0:
        raise ValueError(f"B must be positive, got {B}")
    _check_unit(epsilon)
    _check_unit(delta, "delta")
    _check_sampling_pair(hu, hv)
    if hv.signed:
        raise PreconditionError(f"{hv.name} must be non-negative")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(hu, hv)
    k = math.ceil(32 * B)
    eps_in = epsilon / (1.5 * (2 * math.sqrt(1 + B) + 1) ** 2)
    d_in = constants.bounded_var_inner_delta
    chi = sample_preparation(hu, hv)
    runs = []

    def one_run(r):
        m_tilde = sample_mean(chi, hv, k, r)
        if m_tilde <= 0:
            runs.append({"coarse_mean": m_tilde, "inner": None, "value": 0.0, "degenerate": True})
            return 0.0
        scaled = affine_access(hv, scale=1.0 / m_tilde, name="v/m~")
        inner = mean_bounded_l2(hu, scaled, eps_in, d_in, r, engine, constants)
        value = m_tilde * inner.value
        runs.append({"coarse_mean": m_tilde, "inner": inner.value, "value": value, "degenerate": False})
        return value

    med = power_median(one_run, delta, rng, constants)
    n_deg = sum(x["degenerate"] for x in runs)
    degenerate = n_deg * 2 > len(runs)
    mid = runs[int(np.argsort([x["value"] for x in runs])[len(runs) // 2])]
    trace = AlgorithmTrace(k_samples=k, coarse_mean=mid["coarse_mean"], stages=runs)
    trace.notes.update({"epsilon_inner": eps_in, "degenerate_runs": n_deg})
    value = 0.0 if degenerate else med.value
    return _result(meter, value, epsilon, delta, "relative", med.repetitions, trace, degenerate, hv.c1 + hv.c2)


# -- classical baselines ----------------------------------------------------------


def classical_l1_inner(
    hu: OracleHandle,
    hv: OracleHandle,
    epsilon: float,
    delta: float,
    rng=None,
    v_max: float | None = None,
) -> EstimateResult:
    """u.v to additive epsilon from l1-sampling of u and queries to v.

    Z = sgn(u_j) ||u||_1 v_j with j ~ |u_j|/||u||_1 has mean u.v and second
    moment at most ||u||_1^2 ||v||_max^2.  The estimate is the median of
    ceil(6 ln(1/delta)) group means, each over ceil(9 ||u||_1^2 ||v||_max^2 / (2 eps^2))
    samples.  Without a supplied v_max the whole of v is read once to find it.
    """
    _check_unit(epsilon)
    _check_unit(delta, "delta")
    hu._require(Kind.SA)
    hv._require(Kind.VA)
    if hu.n != hv.n:
        raise ValueError(f"length mismatch: {hu.n} vs {hv.n}")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(hu, hv)
    if v_max is None:
        v_max = float(np.max(np.abs(va_read_many(hv, np.arange(1, hv.n + 1)))))
    norm = hu.norm
    groups = math.ceil(6 * math.log(1 / delta))
    per_group = max(1, math.ceil(9 * norm**2 * v_max**2 / (2 * epsilon**2)))
    signs = np.sign(hu.payload())  # the sign of u_j accompanies each l1 sample
    v = hv.payload()
    means = []
    for _ in range(groups):
        counts = sa_counts(hu, rng, per_group)
        hv.charge(per_group)  # one query of v per sample
        means.append(norm * float(np.sum(counts * signs * v)) / per_group)
    trace = AlgorithmTrace(notes={"groups": groups, "samples_per_group": per_group, "samples": groups * per_group})
    return _result(meter, float(np.median(means)), epsilon, delta, "additive", groups, trace)


def classical_mc_mean(sampler, payoff, n_samples: int, rng=None):
    """Sample mean and unbiased sample variance of payoff(sampler(rng, n))."""
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    rng = np.random.default_rng(rng)
    x = np.asarray(payoff(sampler(rng, n_samples)), dtype=float)
    return float(x.mean()), float(x.var(ddof=1))


def chebyshev_sample_size(variance: float, epsilon: float, delta: float) -> int:
    """n with Var / (n eps^2) <= delta."""
    return max(2, math.ceil(variance / (delta * epsilon**2)))
