"""Seeded repetition of randomized experiments.

Trial i of a sweep draws from default_rng([master_seed, i]), so any single
trial can be replayed without running the ones before it.
"""

from __future__ import annotations

import numpy as np


def trial_rng(master_seed: int, trial: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, trial, *stream])


def run_trials(fn, n_trials: int, master_seed: int = 0, stream=()) -> list:
    """[fn(rng_i) for i in range(n_trials)], in trial order."""
    return [fn(trial_rng(master_seed, i, *stream)) for i in range(n_trials)]


def failure_rate(errors, tolerance) -> float:
    errors = np.asarray(errors, dtype=float)
    return float(np.mean(~(errors <= tolerance)))


def loglog_slope(x, y) -> tuple[float, float]:
    """OLS slope of log y on log x and its standard error."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    n = lx.size
    if n < 3:
        raise ValueError("need at least 3 points for a slope with a standard error")
    A = np.vstack([lx, np.ones(n)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    s2 = float(resid @ resid) / (n - 2)
    se = float(np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2)))
    return float(coef[0]), se
