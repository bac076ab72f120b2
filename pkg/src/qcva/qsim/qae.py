"""Canonical amplitude estimation, the powering lemma and exponential search.

A run at resolution K uses a phase register of M = 2^ceil(log2 K) points and
returns sin^2(pi y / M) for a measured y.  With omega = arcsin(sqrt(a)) / pi
the outcome law is

    P(y) = 1/2 [F(y/M - omega) + F(y/M + omega)],
    F(x) = sin^2(M pi x) / (M^2 sin^2(pi x)).

Two engines produce samples from this law.  "full" simulates the Grover
iterate Q = (1 - 2|chi><chi|) V on the sparse state for every power k < M and
applies the inverse Fourier transform over k.  "amp" reads a off the prepared
state and samples P(y) directly.  Either way a run is charged 2M - 1
applications of the preparation circuit: one for |chi> and a U, U^dagger pair
inside each of the M - 1 Grover iterates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..access import QueryMeter
from ..config import DEFAULT_CONSTANTS, EstimatorConstants, powering_repetitions
from ..results import AlgorithmTrace, EstimateResult
from .state import SparseState

ENGINES = ("amp", "full")
EXACT_GRID_LIMIT = 2**16


@dataclass
class QaeConfig:
    K: int
    repetitions: int = 1
    rng_seed: int | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be at least 1, got {self.K}")
        if self.repetitions < 1 or self.repetitions % 2 == 0:
            raise ValueError(f"repetitions must be a positive odd integer, got {self.repetitions}")

    @property
    def grid(self) -> int:
        return grid_size(self.K)


def grid_size(K: int) -> int:
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    return 1 << max(0, math.ceil(math.log2(K)))


def error_bound(a: float, K: int) -> float:
    """2 pi sqrt(a(1-a)) / K + pi^2 / K^2."""
    return 2 * math.pi * math.sqrt(max(a * (1 - a), 0.0)) / K + math.pi**2 / K**2


class Preparation:
    """A state-preparation circuit U_chi with the good subspace flagged by |1>.

    `build` runs the circuit on fresh registers using counted oracles.  The
    first build is done once to learn the circuit and its per-application
    query cost; that probe is rolled back so that only charged applications
    appear on the counters.
    """

    def __init__(self, build, handles, flag: str = "flag", name: str = "U_chi"):
        self._build = build
        self.handles = tuple(handles)
        self.flag = flag
        self.name = name
        self._state = None
        self._cost = None

    def _materialise(self) -> None:
        meter = QueryMeter(*self.handles)
        st = self._build()
        self._cost = [(r, d) for r, d in meter.deltas() if d]
        meter.rollback()
        self._state = st

    @property
    def state(self) -> SparseState:
        if self._state is None:
            self._materialise()
        return self._state

    @property
    def cost(self) -> dict:
        """Root queries per application of the circuit, keyed by oracle kind."""
        if self._cost is None:
            self._materialise()
        out: dict = {}
        for r, d in self._cost:
            out[r.kind.value] = out.get(r.kind.value, 0) + d
        return out

    @property
    def good_mask(self) -> np.ndarray:
        return self.state.values(self.flag) == 1

    @property
    def amplitude(self) -> float:
        st = self.state
        return float(min(max(st.probability(self.good_mask), 0.0), 1.0))

    def charge(self, applications: int) -> None:
        if self._cost is None:
            self._materialise()
        for r, d in self._cost:
            r.charge(d * applications)


# -- outcome law ---------------------------------------------------------------


def _fejer_offsets(t: np.ndarray, M: int) -> np.ndarray:
    """F(t/M) for real offsets t measured in grid units."""
    r = np.mod(t, M)
    on_grid = (r < 1e-9) | (M - r < 1e-9)
    s_small = np.sin(np.pi * t / M)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(np.pi * t) ** 2 / (M**2 * s_small**2)
    return np.where(on_grid, 1.0, val)


def outcome_distribution(a: float, M: int) -> np.ndarray:
    """P(y) for y = 0..M-1."""
    omega = math.asin(math.sqrt(min(max(a, 0.0), 1.0))) / math.pi
    y = np.arange(M, dtype=float)
    p = 0.5 * (_fejer_offsets(y - M * omega, M) + _fejer_offsets(y + M * omega, M))
    return p / p.sum()


@lru_cache(maxsize=4096)
def _cached_cdf(a: float, M: int) -> np.ndarray:
    c = np.cumsum(outcome_distribution(a, M))
    c[-1] = 1.0
    return c


def _sample_offsets_large(f: float, M: int, size: int, rng, window: int) -> np.ndarray:
    """Offsets d from p(d) = sin^2(pi(d-f)) / (M^2 sin^2(pi(d-f)/M)), d in (-M/2, M/2].

    Points with |d| <= window (and d = M/2) are sampled exactly; the tails by
    rejection from the envelope sin^2(pi f) / (4 (|d|-1)|d|), which dominates
    because sin(pi x / M) >= 2x/M for 0 <= x <= M/2 and (|d| - 1/2)^2 >= (|d|-1)|d|.
    """
    if f == 0.0:
        return np.zeros(size, dtype=np.int64)
    W = window
    d_win = np.concatenate([np.arange(-W, W + 1), [M // 2]]).astype(np.int64)
    p_win = _fejer_offsets(d_win - f, M)
    win_mass = float(p_win.sum())
    tail_mass = max(0.0, 1.0 - win_mass)
    out = np.empty(size, dtype=np.int64)
    in_win = rng.random(size) * (win_mass + tail_mass) < win_mass
    n_win = int(in_win.sum())
    if n_win:
        cdf = np.cumsum(p_win) / win_mass
        cdf[-1] = 1.0
        out[in_win] = d_win[np.searchsorted(cdf, rng.random(n_win), side="right")]
    pending = np.nonzero(~in_win)[0]
    top = M // 2 - 1
    while pending.size:
        k = pending.size
        side = np.where(rng.random(k) < 0.5, 1, -1)
        u = rng.random(k)
        D = np.floor(W / np.maximum(u, 1e-300)) + 1  # P(D >= m) = W / (m - 1)
        ok = D <= top
        Dc = np.where(ok, D, W + 1).astype(np.int64)
        d = side * Dc
        x = d - f
        ratio = 4.0 * (Dc - 1) * Dc / (M**2 * np.sin(np.pi * x / M) ** 2)
        acc = ok & (rng.random(k) < ratio)
        out[pending[acc]] = d[acc]
        pending = pending[~acc]
    return out


def sample_outcomes(a: float, M: int, rng, size: int = 1, window: int = 64) -> np.ndarray:
    """Draw phase-register outcomes y in [0, M) from the canonical QAE law."""
    a = float(min(max(a, 0.0), 1.0))
    if M <= EXACT_GRID_LIMIT:
        return np.searchsorted(_cached_cdf(a, M), rng.random(size), side="right").astype(np.int64)
    omega = math.asin(math.sqrt(a)) / math.pi
    branch = rng.random(size) < 0.5
    out = np.empty(size, dtype=np.int64)
    for sign, sel in ((1, branch), (-1, ~branch)):
        k = int(sel.sum())
        if not k:
            continue
        c = (sign * M * omega) % M
        n0 = int(np.floor(c + 0.5))
        f = c - n0
        d = _sample_offsets_large(f, M, k, rng, window)
        out[sel] = (n0 + d) % M
    return out


def outcomes_to_estimates(y, M: int) -> np.ndarray:
    return np.sin(np.pi * np.asarray(y, dtype=float) / M) ** 2


def full_engine_distribution(prep: Preparation, M: int, constants: EstimatorConstants = DEFAULT_CONSTANTS) -> np.ndarray:
    """Phase-register law from explicit Grover powers on the sparse state."""
    if M > constants.full_engine_max_grid:
        raise ValueError(f"full engine limited to M <= {constants.full_engine_max_grid}, got {M}")
    chi = prep.state
    psi = chi
    stack = np.empty((M, len(chi)), dtype=complex)
    for k in range(M):
        stack[k] = psi.amps
        if k + 1 < M:
            psi = psi.reflect_flag(prep.flag).reflect_about(chi)
    amp = np.fft.fft(stack, axis=0) / M
    p = np.sum(np.abs(amp) ** 2, axis=1)
    return p / p.sum()


def amplitude_estimate(
    prep: Preparation,
    K: int,
    rng,
    engine: str = "amp",
    shots: int | None = None,
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
):
    """One (or `shots` independent) amplitude-estimation runs at resolution K.

    Returns a float for a single run, otherwise an array of estimates.
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    rng = np.random.default_rng(rng)
    M = grid_size(K)
    n = 1 if shots is None else int(shots)
    if engine == "full":
        p = full_engine_distribution(prep, M, constants)
        y = rng.choice(M, size=n, p=p)
    else:
        y = sample_outcomes(prep.amplitude, M, rng, size=n, window=constants.sampler_window)
    prep.charge((2 * M - 1) * n)
    est = outcomes_to_estimates(y, M)
    return float(est[0]) if shots is None else est


def qae_median(prep: Preparation, K: int, delta: float, rng, engine: str = "amp", constants=DEFAULT_CONSTANTS):
    """Median of R(delta) runs at a fixed K: (median, repetitions)."""
    R = powering_repetitions(delta, constants)
    est = amplitude_estimate(prep, K, rng, engine, shots=R, constants=constants)
    return float(np.median(est)), R


def power_median(estimator, delta: float, rng, constants: EstimatorConstants = DEFAULT_CONSTANTS) -> EstimateResult:
    """Median of R = 2 ceil(c ln(1/delta)) + 1 independent runs.

    `estimator(rng)` returns a float or an EstimateResult; query counts of
    EstimateResult runs are summed.
    """
    rng = np.random.default_rng(rng)
    R = powering_repetitions(delta, constants)
    values, queries, reps = [], {}, 0
    eps = float("nan")
    for _ in range(R):
        out = estimator(rng)
        if isinstance(out, EstimateResult):
            values.append(out.value)
            for k, v in out.queries.items():
                queries[k] = queries.get(k, 0) + v
            reps += max(out.repetitions, 1)
            eps = out.target_epsilon
        else:
            values.append(float(out))
            reps += 1
    return EstimateResult(
        value=float(np.median(values)),
        target_epsilon=eps,
        target_delta=delta,
        mode="median",
        queries=queries,
        repetitions=reps,
        trace=AlgorithmTrace(notes={"runs": R}),
    )


def qae_additive(prep: Preparation, epsilon: float, delta: float, rng, engine: str = "amp", constants=DEFAULT_CONSTANTS):
    """|a~ - a| <= epsilon w.p. 1 - delta with K > 3 pi / epsilon."""
    K = math.floor(constants.qae_k_factor / epsilon) + 1
    med, R = qae_median(prep, K, delta, rng, engine, constants)
    return med, R, K


def qae_exponential_relative(
    prep: Preparation,
    epsilon: float,
    delta: float,
    rng,
    engine: str = "amp",
    constants: EstimatorConstants = DEFAULT_CONSTANTS,
) -> EstimateResult:
    """Relative-error estimate of a without knowing a in advance.

    K doubles from K0.  Stage i takes the median of R(delta_i) runs with
    delta_i = delta / ((i+1)(i+2)), so the stage failure probabilities sum to
    at most delta.  The search stops at the first stage whose median m is
    positive with K sqrt(m) >= 3 pi / e.  On a successful stage
    |m - a| <= pi/K (2 sqrt(a) + pi/K) and pi/K <= e sqrt(m)/3, which forces
    sqrt(m) <= sqrt(a) / (1 - e/3) and then
    |m - a| <= e a (2 - e/3) / (3 (1 - e/3)^2) <= 0.88 e a  for e <= 1/2.
    Requests with epsilon above 1/2 run at e = 1/2.  If K exceeds K_max with
    every median zero, a = 0 is reported with the degenerate flag.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(*prep.handles)
    target = constants.qae_k_factor / min(epsilon, 0.5)
    K = constants.exp_search_k0
    stage, reps = 0, 0
    trace = AlgorithmTrace()
    value, degenerate = 0.0, True
    while K <= constants.exp_search_k_max:
        d_i = delta / ((stage + 1) * (stage + 2))
        med, R = qae_median(prep, K, d_i, rng, engine, constants)
        reps += R
        trace.stages.append({"K": K, "median": med, "delta": d_i, "runs": R})
        if med > 0 and K * math.sqrt(med) >= target:
            value, degenerate = med, False
            break
        K *= 2
        stage += 1
    counts = meter.counts()
    return EstimateResult(
        value=value,
        target_epsilon=epsilon,
        target_delta=delta,
        mode="relative",
        queries=counts,
        gate_estimate=0,
        repetitions=reps,
        degenerate=degenerate,
        trace=trace,
    )
