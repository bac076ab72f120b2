"""Durr-Hoyer minimum and maximum finding over a counted QA oracle.

One attempt starts from a uniformly random threshold index and repeatedly
runs a BBHT search (unknown number of marked items) for an index whose value
beats the threshold, moving the threshold whenever the classical check
succeeds.  The search scale m grows by 8/7 after each miss and is capped at
sqrt(N); each round draws its Grover iteration count uniformly from
[0, ceil(m)).  An attempt stops after `budget_factor * ceil(sqrt(N))` Grover
iterations.  Attempts are repeated ceil(log2(1/delta)) times and the best
threshold wins, which a classical comparison of the values read along the
way decides for free.

Query accounting: a Grover iteration costs two oracle queries (compute and
uncompute the comparison), reading the value at a measured index to check it
costs one, and reading the final value costs one.

Engines: "full" runs Grover on the sparse state (index register plus data
register, phase oracle by compute-compare-uncompute); "analytic" uses the closed form
P(marked) = sin^2((2j+1) theta), sin^2 theta = t/N, with uniform outcomes
inside the marked and unmarked sets, which is exactly the law of the full
engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..access import Kind, OracleHandle, QueryMeter, qa_apply, uniform_prepare
from ..config import DEFAULT_CONSTANTS, EstimatorConstants
from .state import Register

SEARCH_ENGINES = ("analytic", "full")


@dataclass
class SearchResult:
    index: int
    value: float
    queries: dict
    attempts: int
    iterations_per_attempt: list = field(default_factory=list)
    # Grover iterations spent before each attempt reached its final threshold
    iterations_to_final: list = field(default_factory=list)

    @property
    def mean_iterations(self) -> float:
        return float(np.mean(self.iterations_per_attempt)) if self.iterations_per_attempt else 0.0

    @property
    def total_queries(self) -> int:
        return int(sum(self.queries.values()))

    def __iter__(self):
        # allows  idx, val = min_find(...)
        yield self.index
        yield self.value


def _grover_full(h: OracleHandle, better, j: int, rng) -> int:
    """Measure the index register after j Grover iterations marking `better`.

    The phase oracle queries u_j into a data register, flips the phase of
    branches whose data value satisfies the comparator, and uncomputes the
    data register: two queries per iteration, charged by qa_apply.  The
    diffusion step reflects about the uniform superposition (up to a global
    sign, which has no observable effect).
    """
    st = uniform_prepare(h.n, "index", extra=(Register("data", h.width),))
    start = st
    for _ in range(j):
        st = qa_apply(h, st, "index", "data")
        st = st.phase(better(h.decode(st.values("data"))), what="comparator phase")
        st = qa_apply(h, st, "index", "data")
        st = st.reflect_about(start)
    return int(st.measure(["index"], rng)[0])


def _find_extreme(h: OracleHandle, delta: float, rng, sign: int, engine: str, constants: EstimatorConstants):
    if h.kind is not Kind.QA:
        raise ValueError(f"extreme finding needs QA access, got {h.kind.value}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if engine not in SEARCH_ENGINES:
        raise ValueError(f"unknown engine {engine!r}; choose from {SEARCH_ENGINES}")
    rng = np.random.default_rng(rng)
    meter = QueryMeter(h)
    N = h.n
    vals = h.payload()  # used only to evaluate comparator circuits and the analytic law
    key = sign * vals  # minimise key
    root_n = math.sqrt(N)
    budget = int(math.ceil(constants.min_find_budget_factor * math.ceil(root_n)))
    attempts = max(1, math.ceil(math.log2(1 / delta)))
    best_idx, best_key = None, math.inf
    iters_log, to_final = [], []
    for _ in range(attempts):
        y = int(rng.integers(1, N + 1))
        h.charge(1)  # read u_y to set the threshold
        thr = key[y - 1]
        used, m, hit_at = 0, 1.0, 0
        while used < budget:
            j = int(rng.integers(0, math.ceil(m)))
            j = min(j, budget - used)
            better_mask = key < thr
            t = int(better_mask.sum())
            if engine == "full":
                cand = _grover_full(h, lambda v, thr=thr: sign * v < thr, j, rng)
            else:
                h.charge(2 * j)
                theta = math.asin(math.sqrt(t / N))
                if t and rng.random() < math.sin((2 * j + 1) * theta) ** 2:
                    cand = int(rng.choice(np.nonzero(better_mask)[0])) + 1
                elif t == N:
                    cand = int(rng.integers(1, N + 1))
                else:
                    cand = int(rng.choice(np.nonzero(~better_mask)[0])) + 1
            used += j
            h.charge(1)  # read u_cand to check it
            if key[cand - 1] < thr:
                y, thr, m = cand, key[cand - 1], 1.0
                hit_at = used
            else:
                m = min(constants.min_find_growth * m, root_n)
        iters_log.append(used)
        to_final.append(hit_at)
        if thr < best_key:
            best_idx, best_key = y, thr
    h.charge(1)  # final read of the winning value
    return SearchResult(best_idx, float(vals[best_idx - 1]), meter.counts(), attempts, iters_log, to_final)


def min_find(h: OracleHandle, delta: float, rng, engine: str = "analytic", constants: EstimatorConstants = DEFAULT_CONSTANTS) -> SearchResult:
    """Index and value of a minimum entry, correct with probability >= 1 - delta."""
    return _find_extreme(h, delta, rng, +1, engine, constants)


def max_find(h: OracleHandle, delta: float, rng, engine: str = "analytic", constants: EstimatorConstants = DEFAULT_CONSTANTS) -> SearchResult:
    """Index and value of a maximum entry, correct with probability >= 1 - delta."""
    return _find_extreme(h, delta, rng, -1, engine, constants)
