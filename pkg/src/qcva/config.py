"""Tunable constants shared by the simulator and the estimators.

Every constant hidden inside an O(.) bound lives here so scaling experiments
can vary them without touching algorithm code.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

# Fixed-point widths used by every oracle unless overridden.
DEFAULT_C1 = 16
DEFAULT_C2 = 32


@dataclass(frozen=True)
class EstimatorConstants:
    # K > qae_k_factor / eps for one amplitude-estimation call.
    qae_k_factor: float = 3 * math.pi
    # Median repetitions R = 2 * ceil(powering_coeff * ln(1/delta)) + 1.
    powering_coeff: float = 9.0
    # Exponential search over K for relative-error amplitude estimation.
    exp_search_k0: int = 2
    exp_search_k_max: int = 2**26
    # Durr-Hoyer: growth of the BBHT search scale and the per-attempt budget.
    min_find_growth: float = 8 / 7
    min_find_budget_factor: float = 4.0
    # Success probability assumed for one Durr-Hoyer attempt when boosting.
    min_find_attempt_success: float = 0.5
    # Inner failure budget for a single run of the bounded-variance estimators;
    # the outer median needs per-run success above 1/2.
    bounded_var_inner_delta: float = 0.05
    # Window (grid points each side of the peak) evaluated exactly by the
    # amplitude sampler before falling back to rejection sampling in the tails.
    sampler_window: int = 64
    # Largest phase register the full-state QAE engine will simulate.
    full_engine_max_grid: int = 2**12

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "EstimatorConstants":
        return replace(self, **kw)


DEFAULT_CONSTANTS = EstimatorConstants()


@dataclass(frozen=True)
class Precision:
    c1: int = DEFAULT_C1
    c2: int = DEFAULT_C2

    @property
    def width(self) -> int:
        return self.c1 + self.c2


def powering_repetitions(delta: float, constants: EstimatorConstants = DEFAULT_CONSTANTS) -> int:
    """Odd median count for the powering lemma."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 2 * math.ceil(constants.powering_coeff * math.log(1 / delta)) + 1
