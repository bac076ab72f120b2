from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass
class AlgorithmTrace:
    """Intermediate quantities of the mean estimators, kept for diagnostics."""

    m0: float | None = None
    k_samples: int | None = None
    coarse_mean: float | None = None
    dyadic_levels: list = field(default_factory=list)
    level_estimates: list = field(default_factory=list)
    level_grid: list = field(default_factory=list)
    dropped_mass: float | None = None
    parts: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EstimateResult:
    value: float
    target_epsilon: float
    target_delta: float
    mode: str  # "additive" | "relative" | "exact"
    queries: dict = field(default_factory=dict)
    gate_estimate: int = 0
    repetitions: int = 0
    degenerate: bool = False
    trace: AlgorithmTrace = field(default_factory=AlgorithmTrace)

    @property
    def total_queries(self) -> int:
        return int(sum(self.queries.values()))

    def scaled(self, factor: float) -> "EstimateResult":
        out = EstimateResult(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        out.value = self.value * factor
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_queries"] = self.total_queries
        return d


def merge_queries(*dicts) -> dict:
    out: dict = {}
    for d in dicts:
        for k, v in d.items():
            out[k] = out.get(k, 0) + v
    return out
