"""Experiment runners behind the command line: each returns table rows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .access import Kind, vector_access
from .config import DEFAULT_CONSTANTS
from .credit import CdsQuote, bootstrap, default_probabilities, quote_residuals
from .estimators import chebyshev_sample_size, classical_l1_inner
from .finance import (
    BsmParams,
    CvaInstance,
    build_cva_instance,
    bsm_payoff_variance,
    bsm_price,
    cva_classical_mc,
    cva_exact,
    cva_moments,
    cva_quantum_additive,
    cva_quantum_relative,
    cva_quantum_setting1,
    cva_variance_bound,
)
from .trials import loglog_slope, trial_rng


class ConfigError(ValueError):
    pass


BSM_COLUMNS = ["S0", "K", "r", "sigma", "T", "price", "variance", "lambda_tilde_sq"]

DEFAULT_BSM_GRID = [
    {"S0": 100.0, "K": 100.0, "r": 0.05, "sigma": 0.2, "T": 1.0},
    {"S0": 100.0, "K": 90.0, "r": 0.05, "sigma": 0.2, "T": 1.0},
    {"S0": 100.0, "K": 110.0, "r": 0.05, "sigma": 0.2, "T": 1.0},
    {"S0": 100.0, "K": 100.0, "r": 0.05, "sigma": 0.4, "T": 2.0},
    {"S0": 100.0, "K": 100.0, "r": 0.05, "sigma": 0.0, "T": 1.0},
]


def _params(row: dict) -> BsmParams:
    try:
        return BsmParams(float(row["S0"]), float(row["K"]), float(row["r"]), float(row["sigma"]), float(row["T"]))
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r} in {row}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_bsm(config: dict) -> list[dict]:
    rows = []
    for spec in config.get("rows", DEFAULT_BSM_GRID):
        p = _params(spec)
        var, lam = bsm_payoff_variance(p)
        rows.append({"S0": p.S0, "K": p.K_strike, "r": p.r, "sigma": p.sigma, "T": p.T_maturity,
                     "price": bsm_price(p), "variance": var, "lambda_tilde_sq": lam})
    return rows


# -- bootstrap ------------------------------------------------------------------


def quotes_from_config(config: dict) -> list[CdsQuote]:
    from .credit import read_quotes_csv

    if "quotes_file" in config:
        return read_quotes_csv(config["quotes_file"])
    if "quotes" not in config:
        raise ConfigError("bootstrap needs 'quotes' or 'quotes_file'")
    try:
        return [CdsQuote(float(q["maturity"]), float(q["spread_bp"]) / 1e4) for q in config["quotes"]]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad quote: {exc}") from None


def run_bootstrap(config: dict):
    quotes = quotes_from_config(config)
    R, r = float(config.get("R", 0.4)), float(config.get("r", 0.0))
    freq = int(config.get("payment_frequency", 4))
    curve = bootstrap(quotes, R, r, freq)
    res = quote_residuals(curve, quotes, R, r, freq)
    hazard_rows = [
        {"t_start": curve.knots[i], "t_end": curve.knots[i + 1], "hazard": curve.rates[i],
         "maturity": q.maturity, "spread_bp": q.spread * 1e4, "residual": res[i]}
        for i, q in enumerate(quotes)
    ]
    grid = np.asarray(config.get("period_grid", np.arange(0, math.ceil(quotes[-1].maturity) + 1)), dtype=float)
    phi = default_probabilities(curve, grid)
    phi_rows = [{"t_start": grid[i], "t_end": grid[i + 1], "phi": phi[i]} for i in range(phi.size)]
    return curve, hazard_rows, phi_rows


# -- CVA instances ----------------------------------------------------------------

FIXTURE_2X2 = {"Q": [[0.1, 0.2], [0.3, 0.1]], "V": [[5.0, -2.0], [1.0, 4.0]], "R": 0.4}

DEFAULT_BSM_INSTANCE = {
    "S0": 100.0, "K": 100.0, "r": 0.05, "sigma": 0.2, "T": 1.0,
    "N_states": 64, "default_probs": [0.02, 0.02, 0.02, 0.02], "R": 0.4,
}


def instance_from_config(spec: dict | None) -> CvaInstance:
    spec = spec or {"fixture": "2x2"}
    if spec.get("fixture") == "2x2":
        return CvaInstance(FIXTURE_2X2["Q"], FIXTURE_2X2["V"], spec.get("R", FIXTURE_2X2["R"]))
    if "Q" in spec:
        return CvaInstance(spec["Q"], spec["V"], float(spec["R"]))
    if "dir" in spec:
        from .io import load_instance

        return load_instance(spec["dir"])
    full = {**DEFAULT_BSM_INSTANCE, **spec}
    p = _params(full)
    phi = full["default_probs"]
    if "hazard" in full:
        from .credit import HazardCurve

        curve = HazardCurve.flat(float(full["hazard"]), p.T_maturity)
        n = int(full.get("T_periods", 4))
        phi = default_probabilities(curve, p.T_maturity * np.arange(n + 1) / n)
    try:
        return build_cva_instance(p, phi, int(full["N_states"]), float(full["R"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def variance_inputs(inst: CvaInstance, how: str = "bound"):
    """(sigma_cva, B_rel) from the closed-form bound or from brute-force moments."""
    mean, var = cva_moments(inst)
    if how == "exact" or inst.params is None:
        lgd = 1 - inst.R
        sigma = math.sqrt(var) / lgd if var > 0 and lgd > 0 else 1.0
        B = var / mean**2 if mean > 0 and var > 0 else 1.0
        return sigma, B
    vb = cva_variance_bound(inst.params, inst.default_probs, inst.R, mean if mean > 0 else None)
    return vb.sigma_cva, (vb.B_rel if vb.B_rel else 1.0)


CVA_METHODS = ("setting1", "additive", "relative", "classical_mc")
CVA_COLUMNS = ["method", "trial", "value", "exact", "abs_error", "rel_error", "tolerance", "within_tolerance", "queries", "repetitions", "degenerate"]


@dataclass
class CvaConfig:
    instance: dict | None = None
    epsilon_rel: float = 0.1
    epsilon_abs: float | None = None  # default: epsilon_rel * exact CVA
    delta: float = 0.05
    variance: str = "bound"
    methods: list = field(default_factory=lambda: list(CVA_METHODS))

    @classmethod
    def from_dict(cls, d: dict) -> "CvaConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown cva config keys {sorted(unknown)}")
        cfg = cls(**d)
        if not 0 < cfg.epsilon_rel < 0.5 or not 0 < cfg.delta < 1:
            raise ConfigError("need epsilon_rel in (0, 0.5) and delta in (0, 1)")
        bad = set(cfg.methods) - set(CVA_METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}; choose from {CVA_METHODS}")
        return cfg


def run_cva(cfg: CvaConfig, trials: int, seed: int, engine: str = "amp", constants=DEFAULT_CONSTANTS):
    inst = instance_from_config(cfg.instance)
    exact = cva_exact(inst)
    eps_abs = cfg.epsilon_abs if cfg.epsilon_abs is not None else cfg.epsilon_rel * exact
    sigma, B = variance_inputs(inst, cfg.variance)
    rows = [{"method": "exact", "trial": "", "value": exact, "exact": exact, "abs_error": 0.0, "rel_error": 0.0,
             "tolerance": 0.0, "within_tolerance": True, "queries": 0, "repetitions": 0, "degenerate": False}]
    traces = []
    for m_i, method in enumerate(cfg.methods):
        for t in range(trials):
            rng = trial_rng(seed, t, m_i)
            if method == "setting1":
                res, tol = cva_quantum_setting1(inst, cfg.epsilon_rel, cfg.delta, rng, engine, constants), cfg.epsilon_rel * exact
            elif method == "additive":
                res, tol = cva_quantum_additive(inst, sigma, eps_abs, cfg.delta, rng, engine, constants), eps_abs
            elif method == "relative":
                res, tol = cva_quantum_relative(inst, B, cfg.epsilon_rel, cfg.delta, rng, engine, constants), cfg.epsilon_rel * exact
            else:
                _, var = cva_moments(inst)
                n = chebyshev_sample_size(var, eps_abs, cfg.delta) if var > 0 else 2
                res, tol = cva_classical_mc(inst, n, rng), eps_abs
            err = abs(res.value - exact)
            rows.append({"method": method, "trial": t, "value": res.value, "exact": exact, "abs_error": err,
                         "rel_error": err / exact if exact else float("nan"), "tolerance": tol,
                         "within_tolerance": bool(err <= tol), "queries": res.total_queries,
                         "repetitions": res.repetitions, "degenerate": res.degenerate})
            traces.append({"method": method, "trial": t, "queries": res.queries, "notes": res.trace.notes})
    return rows, traces


# -- scaling sweep ----------------------------------------------------------------

SCALING_METHODS = ("classical_mc", "classical_l1_inner", "cva_quantum_additive", "cva_quantum_relative")
DEFAULT_EPS_GRID = [0.2, 0.1, 0.05, 0.025, 0.0125]


@dataclass
class ScalingConfig:
    epsilons: list = field(default_factory=lambda: list(DEFAULT_EPS_GRID))  # relative to the exact CVA
    methods: list = field(default_factory=lambda: list(SCALING_METHODS))
    instance: dict | None = None
    delta: float = 0.1
    pilot_samples: int = 10_000

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scaling config keys {sorted(unknown)}")
        cfg = cls(**d)
        if len(cfg.epsilons) < 4:
            raise ConfigError(f"scaling needs at least 4 epsilon points, got {len(cfg.epsilons)}")
        if any(not 0 < e < 0.5 for e in cfg.epsilons) or not 0 < cfg.delta < 1:
            raise ConfigError("epsilons must lie in (0, 0.5) and delta in (0, 1)")
        bad = set(cfg.methods) - set(SCALING_METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}; choose from {SCALING_METHODS}")
        return cfg


def _scaling_queries(method, inst, exact, sigma, B, eps, delta, rng, engine, pilot):
    eps_abs = eps * exact
    if method == "classical_mc":
        # pilot run for the sample variance, then n = ceil(var / (delta eps^2)) samples
        var = cva_classical_mc(inst, pilot, rng).trace.notes["sample_variance"]
        n = chebyshev_sample_size(var, eps_abs, delta)
        res = cva_classical_mc(inst, n, rng)
        return res, n
    if method == "classical_l1_inner":
        x = (1 - inst.R) * np.maximum(inst.vec_v, 0.0)
        hu = vector_access(inst.vec_q, Kind.SA, name="vecQ")
        hv = vector_access(x, Kind.VA, name="lossV")
        res = classical_l1_inner(hu, hv, eps_abs, delta, rng, v_max=float(x.max()))
        return res, res.total_queries
    if method == "cva_quantum_additive":
        res = cva_quantum_additive(inst, sigma, eps_abs, delta, rng, engine)
        return res, res.total_queries
    res = cva_quantum_relative(inst, B, eps, delta, rng, engine)
    return res, res.total_queries


def run_scaling(cfg: ScalingConfig, trials: int, seed: int, engine: str = "amp"):
    inst = instance_from_config(cfg.instance or DEFAULT_BSM_INSTANCE)
    exact = cva_exact(inst)
    if exact <= 0:
        raise ConfigError("scaling needs an instance with positive CVA")
    sigma, B = variance_inputs(inst, "bound")
    points, slopes = [], []
    for m_i, method in enumerate(cfg.methods):
        means = []
        for e_i, eps in enumerate(cfg.epsilons):
            qs, errs = [], []
            for t in range(trials):
                res, q = _scaling_queries(method, inst, exact, sigma, B, eps, cfg.delta, trial_rng(seed, t, m_i, e_i), engine, cfg.pilot_samples)
                qs.append(q)
                errs.append(abs(res.value - exact) / exact)
            means.append(float(np.mean(qs)))
            points.append({"method": method, "epsilon": eps, "mean_queries": means[-1], "mean_rel_error": float(np.mean(errs)), "trials": trials})
        slope, se = loglog_slope(1 / np.asarray(cfg.epsilons), means)
        slopes.append({"method": method, "slope": slope, "stderr": se, "points": len(cfg.epsilons)})
    return points, slopes
