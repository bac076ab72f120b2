"""BSM pricing, CVA instance construction, exact CVA and the quantum CVA pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .access import (
    Kind,
    MatrixAccess,
    QueryMeter,
    positive_part_access,
    product_access,
    vector_access,
)
from .config import DEFAULT_C1, DEFAULT_C2, DEFAULT_CONSTANTS, EstimatorConstants
from .estimators import (
    PreconditionError,
    inner_product_relative,
    mean_bounded_var_additive,
    mean_bounded_var_relative,
    trace_estimate,
)
from .qsim.search import max_find
from .results import AlgorithmTrace, EstimateResult


@dataclass(frozen=True)
class BsmParams:
    S0: float
    K_strike: float
    r: float
    sigma: float
    T_maturity: float
    alpha_drift: float | None = None  # real-world drift, only for P-measure paths

    def __post_init__(self):
        for name in ("S0", "K_strike", "T_maturity"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")

    def to_dict(self) -> dict:
        return {
            "S0": self.S0,
            "K_strike": self.K_strike,
            "r": self.r,
            "sigma": self.sigma,
            "T_maturity": self.T_maturity,
            "alpha_drift": self.alpha_drift,
        }


# -- closed forms -----------------------------------------------------------------


def bsm_price(p: BsmParams, t_now: float = 0.0, S=None):
    """European call value at time t_now for spot S (default S0).

    At or past maturity the intrinsic value is returned; sigma = 0 gives the
    deterministic limit max(S - K e^{-r e}, 0).
    """
    x = np.asarray(p.S0 if S is None else S, dtype=float)
    e = p.T_maturity - t_now
    K = p.K_strike
    if e <= 0:
        out = np.maximum(x - K, 0.0)
    elif p.sigma == 0:
        out = np.maximum(x - K * math.exp(-p.r * e), 0.0)
    else:
        sd = p.sigma * math.sqrt(e)
        with np.errstate(divide="ignore"):
            d_plus = (np.log(x / K) + (p.r + 0.5 * p.sigma**2) * e) / sd
        d_minus = d_plus - sd
        out = x * norm.cdf(d_plus) - K * math.exp(-p.r * e) * norm.cdf(d_minus)
    return float(out) if out.ndim == 0 else out


def lambda_tilde_sq(p: BsmParams, t: float | None = None) -> float:
    """e^{2rt + sigma^2 t} S0^2 + K^2, an upper bound on Var((S_t - K)^+)."""
    t = p.T_maturity if t is None else t
    return math.exp(2 * p.r * t + p.sigma**2 * t) * p.S0**2 + p.K_strike**2


def bsm_payoff_variance(p: BsmParams, t: float | None = None) -> tuple[float, float]:
    """Exact risk-neutral Var((S_t - K)^+) and its bound lambda~^2 (t defaults to maturity)."""
    t = p.T_maturity if t is None else t
    S0, K, r, s = p.S0, p.K_strike, p.r, p.sigma
    bound = lambda_tilde_sq(p, t)
    if s == 0:
        return 0.0, bound
    sd = s * math.sqrt(t)
    lk = math.log(S0 / K)
    d_tilde = (lk + t * (r + 1.5 * s**2)) / sd
    d_plus = (lk + t * (r + 0.5 * s**2)) / sd
    d_minus = d_plus - sd
    second = (
        math.exp(2 * r * t + s**2 * t) * S0**2 * norm.cdf(d_tilde)
        - 2 * K * S0 * math.exp(r * t) * norm.cdf(d_plus)
        + K**2 * norm.cdf(d_minus)
    )
    first = S0 * math.exp(r * t) * norm.cdf(d_plus) - K * norm.cdf(d_minus)
    return float(max(second - first**2, 0.0)), bound


def _log_moments(t: float, p: BsmParams, mu: float | None):
    mu = p.r if mu is None else mu
    return math.log(p.S0) + (mu - 0.5 * p.sigma**2) * t, p.sigma * math.sqrt(t)


def gbm_terminal_density(v, t: float, p: BsmParams, mu: float | None = None):
    """Lognormal density of S_t under drift mu (risk-neutral r by default)."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("price levels must be positive")
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    m, sd = _log_moments(t, p, mu)
    out = np.exp(-((np.log(v) - m) ** 2) / (2 * sd**2)) / (v * sd * math.sqrt(2 * math.pi))
    return float(out) if out.ndim == 0 else out


def gbm_paths(p: BsmParams, times, n_paths: int, rng, mu: float | None = None) -> np.ndarray:
    """Exact GBM samples at the given times, shape (n_paths, len(times))."""
    mu = p.r if mu is None else mu
    times = np.asarray(times, dtype=float)
    dt = np.diff(np.concatenate([[0.0], times]))
    z = rng.standard_normal((n_paths, len(times)))
    incr = (mu - 0.5 * p.sigma**2) * dt + p.sigma * np.sqrt(dt) * z
    return p.S0 * np.exp(np.cumsum(incr, axis=1))


# -- CVA instances --------------------------------------------------------------


@dataclass
class CvaInstance:
    """Joint default-and-state probabilities Q and discounted exposures V, both T x N.

    Row t holds period t; vec(.) is the row-major flatten, which stacks the
    per-period columns q^(1), ..., q^(T) of the N x T layout.
    """

    Q: np.ndarray
    V: np.ndarray
    R: float
    q_norm: float | None = None
    times: np.ndarray | None = None
    grid: np.ndarray | None = None
    params: BsmParams | None = None
    default_probs: np.ndarray | None = None
    discounted: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.V = np.atleast_2d(np.asarray(self.V, dtype=float))
        if self.Q.shape != self.V.shape:
            raise ValueError(f"Q has shape {self.Q.shape} but V has shape {self.V.shape}")
        if np.any(self.Q < 0):
            raise ValueError("Q must be non-negative")
        if not 0 <= self.R <= 1:
            raise ValueError(f"recovery rate must lie in [0, 1], got {self.R}")
        total = float(self.Q.sum())
        if self.q_norm is None:
            self.q_norm = total
        elif abs(self.q_norm - total) > 1e-10:
            raise ValueError(f"q_norm {self.q_norm} disagrees with the sum of Q ({total})")
        if self.q_norm > 1 + 1e-9:
            raise ValueError(f"total default probability {self.q_norm} exceeds 1")

    @property
    def periods(self) -> int:
        return self.Q.shape[0]

    @property
    def states(self) -> int:
        return self.Q.shape[1]

    @property
    def vec_q(self) -> np.ndarray:
        return self.Q.ravel()

    @property
    def vec_v(self) -> np.ndarray:
        return self.V.ravel()

    def with_recovery(self, R: float) -> "CvaInstance":
        return CvaInstance(self.Q, self.V, R, self.q_norm, self.times, self.grid, self.params, self.default_probs, self.discounted, dict(self.meta))

    def scale_exposures(self, lam: float) -> "CvaInstance":
        return CvaInstance(self.Q, lam * self.V, self.R, self.q_norm, self.times, self.grid, self.params, self.default_probs, self.discounted, dict(self.meta))


def _check_default_probs(phi) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if np.any(phi < 0):
        raise ValueError("default probabilities must be non-negative")
    if phi.sum() > 1 + 1e-12:
        raise ValueError(f"default probabilities sum to {phi.sum()} > 1")
    return phi


def state_grid(p: BsmParams, t: float, n_states: int, n_std: float = 6.0, mu: float | None = None):
    """Log-spaced price grid over +-n_std log-standard deviations and exact cell masses.

    Cell boundaries are the log-midpoints between grid points; the outer cells
    extend to 0 and infinity, so the masses sum to one.
    """
    m, sd = _log_moments(t, p, mu)
    if n_states == 1 or sd == 0:
        # point mass at the median price
        mass = np.zeros(n_states)
        mass[0] = 1.0
        return np.full(n_states, math.exp(m)), mass
    logs = np.linspace(m - n_std * sd, m + n_std * sd, n_states)
    edges = np.concatenate([[-np.inf], 0.5 * (logs[1:] + logs[:-1]), [np.inf]])
    cdf = norm.cdf((edges - m) / sd)
    return np.exp(logs), np.diff(cdf)


def build_cva_instance(
    p: BsmParams,
    default_probs,
    N_states: int,
    R: float,
    n_std: float = 6.0,
    mu: float | None = None,
) -> CvaInstance:
    """Q_{t,j} = phi_t * P(S_{t_k} in cell j), V_{t,j} = e^{-r t_k} BSM(T - t_k, S_j).

    Periods are t_k = k T / T_periods for k = 1..T_periods, T_periods = len(default_probs).
    """
    phi = _check_default_probs(default_probs)
    if N_states < 1 or N_states & (N_states - 1):
        raise ValueError(f"N_states must be a power of two, got {N_states}")
    T = len(phi)
    times = p.T_maturity * np.arange(1, T + 1) / T
    Q = np.empty((T, N_states))
    V = np.empty((T, N_states))
    grid = np.empty((T, N_states))
    for k, t in enumerate(times):
        S, mass = state_grid(p, t, N_states, n_std, mu)
        grid[k] = S
        Q[k] = phi[k] * mass
        V[k] = math.exp(-p.r * t) * np.asarray(bsm_price(p, t_now=t, S=S))
    return CvaInstance(Q, V, R, None, times, grid, p, phi, True, {"n_std": n_std, "mu": mu})


# -- exact CVA and moments ------------------------------------------------------


def cva_exact(inst: CvaInstance) -> float:
    """(1 - R) vec(Q) . vec(V^+)."""
    return float((1 - inst.R) * np.dot(inst.vec_q, np.maximum(inst.vec_v, 0.0)))


def cva_moments(inst: CvaInstance) -> tuple[float, float]:
    """Mean and variance of the loss (1-R) V^+ over the joint default/state law.

    Paths without default inside the horizon (mass 1 - ||vec Q||_1) lose nothing.
    """
    x = (1 - inst.R) * np.maximum(inst.vec_v, 0.0)
    q = inst.vec_q
    mean = float(q @ x)
    return mean, max(float(q @ x**2) - mean**2, 0.0)


@dataclass
class VarianceBound:
    sigma_cva: float  # Var(CVA) <= sigma_cva^2 (1-R)^2
    B_rel: float | None  # Var(CVA) <= B_rel E[CVA]^2
    lambda_tilde_sq: float
    payoff_variance_max: float = 0.0  # max_k Var(f(S_{t_k})), reported for reference

    def __post_init__(self):
        if self.sigma_cva < 0 or self.lambda_tilde_sq < 0 or (self.B_rel is not None and self.B_rel < 0):
            raise ValueError("variance bounds must be non-negative")


def cva_variance_bound(p: BsmParams, default_probs, R: float, expected_cva: float | None = None) -> VarianceBound:
    """sigma^2 = T^2 max_k lambda~^2(t_k) with T the number of periods.

    The loss has second moment (1-R)^2 sum_t phi_t E[(V_t^+)^2] and
    E[(V_t^+)^2] <= E[f(S_T)^2] <= lambda~^2(T), so this dominates Var(CVA)
    for every default law.  The payoff variance alone does not: when default
    is likely but not certain and the option is deep in the money, the
    mixture variance sum q x^2 - (sum q x)^2 exceeds Var(f).
    """
    phi = _check_default_probs(default_probs)
    T = len(phi)
    times = p.T_maturity * np.arange(1, T + 1) / T
    lam = max(lambda_tilde_sq(p, t) for t in times)
    pv = float(max(bsm_payoff_variance(p, t)[0] for t in times))
    sigma_sq = T**2 * lam
    B = None
    if expected_cva is not None and expected_cva > 0:
        B = sigma_sq * (1 - R) ** 2 / expected_cva**2
    return VarianceBound(math.sqrt(sigma_sq), B, lam, pv)


# -- quantum pipelines ------------------------------------------------------------


def _zero_result(eps, delta, mode, note) -> EstimateResult:
    return EstimateResult(0.0, eps, delta, mode, trace=AlgorithmTrace(notes={"short_circuit": note}))


def portfolio_price_quantum(
    Q: MatrixAccess,
    V: MatrixAccess,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
    search_engine: str = "analytic",
) -> EstimateResult:
    """E[TV] = sum_k q^(k) . v^(k) = tr(Q^T V) for N x K matrices with unit columns in Q.

    z_max by maximum finding at delta/2, then the trace estimator at delta/2.
    """
    q = Q.vec.payload().reshape(Q.cols, Q.rows)
    if not np.allclose(q.sum(axis=1), 1.0, atol=1e-9):
        raise PreconditionError("every column of Q must sum to 1")
    if V.vec.signed:
        raise PreconditionError("V must be non-negative")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(Q.vec, V.vec)
    found = max_find(product_access(Q.vec, V.vec), delta / 2, rng, search_engine, constants)
    find_q = meter.counts()
    est = trace_estimate(Q, V, found.value, epsilon, delta / 2, rng, engine, constants)
    est.trace.notes.update({"z_max": found.value, "find_queries": find_q, "trace_queries": est.queries})
    est.queries = meter.counts()
    est.target_delta = delta
    return est


def instance_access(inst: CvaInstance, setting: int, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2):
    """Oracles on vec(Q) and vec(V): setting 1 is QA/QA, setting 2 is QS/QA."""
    kq = Kind.QA if setting == 1 else Kind.QS
    return vector_access(inst.vec_q, kq, c1, c2, name="vecQ"), vector_access(inst.vec_v, Kind.QA, c1, c2, name="vecV")


def cva_quantum_setting1(
    inst: CvaInstance,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
    search_engine: str = "analytic",
) -> EstimateResult:
    """Relative-error CVA with query access to vec(Q) and vec(V)."""
    if inst.R == 1:
        return _zero_result(epsilon, delta, "relative", "R = 1")
    rng = np.random.default_rng(rng)
    hq, hv = instance_access(inst, 1)
    pos = positive_part_access(hv)
    meter = QueryMeter(hq, hv)
    found = max_find(product_access(hq, pos), delta / 2, rng, search_engine, constants)
    find_q = meter.counts()
    est = inner_product_relative(hq, pos, found.value, epsilon, delta / 2, rng, engine, constants)
    out = est.scaled(1 - inst.R)
    out.queries = meter.counts()
    out.target_delta = delta
    out.trace.notes.update({"z_max": found.value, "find_queries": find_q})
    return out


def cva_quantum_additive(
    inst: CvaInstance,
    sigma_cva: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Additive-error CVA given Var(CVA) <= sigma_cva^2 (1-R)^2.

    The estimator targets the mean of V^+ under q/||q||_1.  With q = ||q||_1
    <= 1 that law has variance at most sigma^2 / q, and an error eps_m on its
    mean becomes (1-R) q eps_m on the CVA, so eps_m = eps / ((1-R) q).
    """
    if sigma_cva <= 0:
        raise ValueError(f"sigma_cva must be positive, got {sigma_cva}")
    if inst.R == 1:
        return _zero_result(epsilon, delta, "additive", "R = 1")
    if inst.q_norm == 0:
        return _zero_result(epsilon, delta, "additive", "no default mass")
    rng = np.random.default_rng(rng)
    hq, hv = instance_access(inst, 2)
    pos = positive_part_access(hv)
    meter = QueryMeter(hq, hv)
    q = inst.q_norm
    sigma_m = sigma_cva / math.sqrt(q)
    eps_m = epsilon / ((1 - inst.R) * q)
    est = mean_bounded_var_additive(hq, pos, sigma_m, eps_m, delta, rng, engine, constants)
    out = est.scaled((1 - inst.R) * q)
    out.queries = meter.counts()
    out.target_epsilon = epsilon
    out.trace.notes.update({"sigma_mean": sigma_m, "epsilon_mean": eps_m})
    return out


def cva_quantum_relative(
    inst: CvaInstance,
    B_rel: float,
    epsilon: float,
    delta: float,
    rng=None,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Relative-error CVA given Var(CVA) <= B E[CVA]^2.

    Writing S1 = q.x, S2 = q.x^2 for x = V^+, the normalised law has
    Var/mean^2 = q S2 / S1^2 - 1 <= S2 / S1^2 - 1, the same ratio for the CVA,
    so B carries over unchanged and the (1-R) factor cancels.
    """
    if B_rel <= 0:
        raise ValueError(f"B_rel must be positive, got {B_rel}")
    if inst.R == 1:
        return _zero_result(epsilon, delta, "relative", "R = 1")
    if inst.q_norm == 0:
        out = _zero_result(epsilon, delta, "relative", "no default mass")
        out.degenerate = True
        return out
    rng = np.random.default_rng(rng)
    hq, hv = instance_access(inst, 2)
    pos = positive_part_access(hv)
    meter = QueryMeter(hq, hv)
    est = mean_bounded_var_relative(hq, pos, B_rel, epsilon, delta, rng, engine, constants)
    out = est.scaled((1 - inst.R) * inst.q_norm)
    out.queries = meter.counts()
    return out


def cva_classical_mc(inst: CvaInstance, n_samples: int, rng=None) -> EstimateResult:
    """Plain Monte Carlo over the joint default/state law; one sample per query."""
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")
    rng = np.random.default_rng(rng)
    q = inst.vec_q
    probs = np.append(q, max(1.0 - q.sum(), 0.0))
    probs /= probs.sum()
    counts = rng.multinomial(n_samples, probs)
    x = np.append((1 - inst.R) * np.maximum(inst.vec_v, 0.0), 0.0)
    mean = float(counts @ x) / n_samples
    var = (float(counts @ x**2) - n_samples * mean**2) / (n_samples - 1)
    return EstimateResult(mean, float("nan"), float("nan"), "sample", {"samples": n_samples}, trace=AlgorithmTrace(notes={"sample_variance": max(var, 0.0)}))


__all__ = [
    "BsmParams",
    "CvaInstance",
    "VarianceBound",
    "bsm_price",
    "bsm_payoff_variance",
    "lambda_tilde_sq",
    "gbm_terminal_density",
    "gbm_paths",
    "state_grid",
    "build_cva_instance",
    "cva_exact",
    "cva_moments",
    "cva_variance_bound",
    "portfolio_price_quantum",
    "instance_access",
    "cva_quantum_setting1",
    "cva_quantum_additive",
    "cva_quantum_relative",
    "cva_classical_mc",
]
