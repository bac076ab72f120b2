"""Piecewise-constant hazard curves bootstrapped from CDS spreads."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq


class CalibrationError(ValueError):
    pass


class ArbitrageError(CalibrationError):
    pass


@dataclass(frozen=True)
class CdsQuote:
    maturity: float  # years
    spread: float  # per-annum fraction, 0.01 = 100bp

    def __post_init__(self):
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if self.spread < 0:
            raise ValueError(f"spread must be non-negative, got {self.spread}")


@dataclass
class HazardCurve:
    knots: np.ndarray  # 0 = T_0 < T_1 < ... < T_n
    rates: np.ndarray  # h_i on (T_{i-1}, T_i]; the last rate extends past T_n

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.knots[0] != 0 or np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must start at 0 and increase strictly")
        if len(self.rates) != len(self.knots) - 1:
            raise ValueError(f"{len(self.knots)} knots need {len(self.knots) - 1} rates, got {len(self.rates)}")
        if np.any(self.rates < 0):
            raise ValueError("hazard rates must be non-negative")

    @classmethod
    def flat(cls, h: float, horizon: float = 1.0) -> "HazardCurve":
        return cls([0.0, horizon], [h])

    def integrated(self, t) -> np.ndarray:
        """int_0^t h(u) du, the last rate continuing beyond the final knot."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be non-negative")
        lo, hi = self.knots[:-1], self.knots[1:].copy()
        hi[-1] = np.inf
        covered = np.clip(t[..., None] - lo, 0.0, hi - lo)
        return covered @ self.rates

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "rates": self.rates.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HazardCurve":
        return cls(d["knots"], d["rates"])


def survival(curve: HazardCurve, t):
    """S(t) = exp(-int_0^t h), the whole accumulated hazard negated."""
    out = np.exp(-curve.integrated(t))
    return float(out) if np.ndim(out) == 0 else out


def flat_discount(r: float):
    return lambda t: np.exp(-r * np.asarray(t, dtype=float))


def payment_schedule(maturity: float, frequency: int = 4) -> np.ndarray:
    """Payment dates Delta, 2 Delta, ..., ending exactly at maturity (short final stub)."""
    step = 1.0 / frequency
    n = math.ceil(maturity * frequency - 1e-9)
    times = step * np.arange(1, n + 1)
    times[-1] = maturity
    return times


def cds_leg_values(spread: float, curve: HazardCurve, discount, schedule, R: float) -> tuple[float, float]:
    """Fixed (premium) and floating (protection) leg values.

    Accrual fractions are the gaps between payment dates; default inside a
    period is assumed midway, so the fixed leg earns half a period on it.
    """
    times = np.asarray(schedule, dtype=float)
    if times.size == 0:
        raise ValueError("empty payment schedule")
    prev = np.concatenate([[0.0], times[:-1]])
    alpha = times - prev
    if np.any(alpha <= 0):
        raise ValueError("schedule must be strictly increasing and positive")
    Z = np.asarray(discount(times), dtype=float)
    S_prev, S = np.asarray(survival(curve, prev)), np.asarray(survival(curve, times))
    v_fix = spread * float(np.sum(alpha * Z * (S + 0.5 * (S_prev - S))))
    v_float = (1 - R) * float(np.sum(Z * (S_prev - S)))
    return v_fix, v_float


def fair_spread(curve: HazardCurve, maturity: float, R: float, r: float, frequency: int = 4, discount=None) -> float:
    discount = discount or flat_discount(r)
    sched = payment_schedule(maturity, frequency)
    annuity, v_float = cds_leg_values(1.0, curve, discount, sched, R)
    return v_float / annuity


def bootstrap(
    quotes,
    R: float,
    r: float,
    payment_frequency: int = 4,
    discount=None,
    h_max: float = 10.0,
) -> HazardCurve:
    """Solve h_1, h_2, ... in turn so that each quoted CDS has zero value.

    Within segment i the contract value V_fix - V_float is decreasing in h_i,
    so a sign change on [0, h_max] brackets the unique root.
    """
    quotes = list(quotes)
    if not quotes:
        raise ValueError("no quotes")
    if not 0 < R < 1:
        raise ValueError(f"recovery rate must lie in (0, 1), got {R}")
    mats = [q.maturity for q in quotes]
    if any(b <= a for a, b in zip(mats, mats[1:])):
        raise ValueError("quotes must be strictly increasing in maturity")
    discount = discount or flat_discount(r)
    knots, rates = [0.0], []
    for i, q in enumerate(quotes):
        sched = payment_schedule(q.maturity, payment_frequency)
        trial_knots = knots + [q.maturity]

        def value(h, i=i, q=q, sched=sched, trial_knots=trial_knots):
            curve = HazardCurve(trial_knots, rates + [h])
            fix, flt = cds_leg_values(q.spread, curve, discount, sched, R)
            return fix - flt

        lo, hi = value(0.0), value(h_max)
        if lo == 0:
            h = 0.0
        elif lo < 0:
            raise ArbitrageError(f"quote {i} (maturity {q.maturity}, spread {q.spread}) implies a negative hazard rate")
        elif hi > 0:
            raise CalibrationError(f"quote {i} (maturity {q.maturity}, spread {q.spread}) has no root in (0, {h_max}]")
        else:
            h = brentq(value, 0.0, h_max, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        knots, rates = trial_knots, rates + [h]
    return HazardCurve(knots, rates)


def quote_residuals(curve: HazardCurve, quotes, R: float, r: float, payment_frequency: int = 4, discount=None) -> np.ndarray:
    discount = discount or flat_discount(r)
    out = []
    for q in quotes:
        fix, flt = cds_leg_values(q.spread, curve, discount, payment_schedule(q.maturity, payment_frequency), R)
        out.append(fix - flt)
    return np.array(out)


def default_probabilities(curve: HazardCurve, grid) -> np.ndarray:
    """phi_i = S(t_{i-1}) - S(t_i) on the grid t_0 < t_1 < ... < t_T."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("period grid must be strictly increasing")
    S = np.atleast_1d(survival(curve, grid))
    return np.maximum(S[:-1] - S[1:], 0.0)


# -- file formats ---------------------------------------------------------------


def read_quotes_csv(path) -> list[CdsQuote]:
    """CSV with columns maturity, spread_bp."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = {"maturity", "spread_bp"} - set(rows[0] if rows else {})
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return [CdsQuote(float(r["maturity"]), float(r["spread_bp"]) / 1e4) for r in rows]


def write_curve_json(curve: HazardCurve, path) -> None:
    Path(path).write_text(json.dumps(curve.to_dict(), indent=2) + "\n")


def read_curve_json(path) -> HazardCurve:
    return HazardCurve.from_dict(json.loads(Path(path).read_text()))
