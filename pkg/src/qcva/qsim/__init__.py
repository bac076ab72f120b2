"""Simulated quantum machine: sparse states, amplitude estimation, search.

The state module has no package dependencies; the algorithm modules build on
`qcva.access`, which itself needs the state module, so they are loaded on
first attribute access.
"""

from importlib import import_module

from .state import NormError, Register, SparseState, norm_monitor

_LAZY = {
    "Preparation": "qae",
    "QaeConfig": "qae",
    "amplitude_estimate": "qae",
    "error_bound": "qae",
    "grid_size": "qae",
    "outcome_distribution": "qae",
    "power_median": "qae",
    "qae_additive": "qae",
    "qae_exponential_relative": "qae",
    "qae_median": "qae",
    "sample_outcomes": "qae",
    "SearchResult": "search",
    "max_find": "search",
    "min_find": "search",
}

__all__ = ["NormError", "Register", "SparseState", "norm_monitor", *_LAZY]


def __getattr__(name):
    if name in _LAZY:
        return getattr(import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
