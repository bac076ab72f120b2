"""Zero-coupon discounting and the extended-Vasicek long-run mean."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class DoubleDiscountError(ValueError):
    pass


@dataclass
class TermStructure:
    mode: str = "flat"  # "flat" | "curve"
    r_flat: float = 0.0
    times: np.ndarray | None = None  # tabulation of f(0, t), starting at 0
    forwards: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("flat", "curve"):
            raise ValueError(f"mode must be 'flat' or 'curve', got {self.mode!r}")
        if self.mode == "curve":
            if self.times is None or self.forwards is None:
                raise ValueError("curve mode needs times and forwards")
            self.times = np.asarray(self.times, dtype=float)
            self.forwards = np.asarray(self.forwards, dtype=float)
            if self.times.shape != self.forwards.shape or self.times.size < 2:
                raise ValueError("times and forwards must be equal-length arrays with at least 2 points")
            if self.times[0] != 0 or np.any(np.diff(self.times) <= 0):
                raise ValueError("tabulated times must start at 0 and increase strictly")

    @classmethod
    def flat(cls, r: float) -> "TermStructure":
        return cls("flat", r)

    @classmethod
    def from_forwards(cls, times, forwards) -> "TermStructure":
        return cls("curve", 0.0, times, forwards)

    def forward(self, t):
        if self.mode == "flat":
            return np.full_like(np.asarray(t, dtype=float), self.r_flat)
        self._check_range(t)
        return np.interp(t, self.times, self.forwards)

    def _check_range(self, t) -> None:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be non-negative")
        if self.mode == "curve" and np.any(t > self.times[-1]):
            raise ValueError(f"t beyond the tabulated range [0, {self.times[-1]}]")


def zcb(ts: TermStructure, t):
    """Z(0, t): e^{-rt} for a flat rate, else exp(-trapezoid integral of f(0, .))."""
    ts._check_range(t)
    t = np.asarray(t, dtype=float)
    if ts.mode == "flat":
        out = np.exp(-ts.r_flat * t)
    else:
        # cumulative trapezoid on the tabulation, then the partial last panel
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts.times) * (ts.forwards[1:] + ts.forwards[:-1]))])
        k = np.clip(np.searchsorted(ts.times, t, side="right") - 1, 0, len(ts.times) - 1)
        f_t = np.interp(t, ts.times, ts.forwards)
        integral = cum[k] + 0.5 * (t - ts.times[k]) * (ts.forwards[k] + f_t)
        out = np.exp(-integral)
    return float(out) if out.ndim == 0 else out


class DiscountedExposures(np.ndarray):
    """Exposure matrix carrying a flag that it has already been discounted."""

    discounted = True

    def __array_finalize__(self, obj):
        pass


def discount_exposures(V_future, ts: TermStructure, grid) -> DiscountedExposures:
    """Scale row t of the undiscounted exposure matrix by Z(0, t)."""
    if getattr(V_future, "discounted", False):
        raise DoubleDiscountError("exposures are already discounted")
    V = np.atleast_2d(np.asarray(V_future, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if grid.shape != (V.shape[0],):
        raise ValueError(f"grid of length {grid.size} does not match {V.shape[0]} exposure rows")
    Z = np.asarray(zcb(ts, grid)).reshape(-1, 1)
    return (V * Z).view(DiscountedExposures)


def hull_white_theta(ts: TermStructure, alpha: float, sigma_f: float, t):
    """theta_t = f_t(0, t)/alpha + f(0, t) + sigma_f^2 (1 - e^{-2 alpha t}) / (2 alpha^2).

    The slope of the forward curve is taken by second-order finite differences
    on the tabulation (one-sided second-order stencils at the ends).
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    t = np.asarray(t, dtype=float)
    if ts.mode == "flat":
        f, df = np.full_like(t, ts.r_flat), np.zeros_like(t)
    else:
        ts._check_range(t)
        slope = np.gradient(ts.forwards, ts.times, edge_order=2)
        f = np.interp(t, ts.times, ts.forwards)
        df = np.interp(t, ts.times, slope)
    out = df / alpha + f + sigma_f**2 / (2 * alpha**2) * (1 - np.exp(-2 * alpha * t))
    return float(out) if out.ndim == 0 else out


def read_forward_csv(path) -> TermStructure:
    """CSV with columns t, f."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or {"t", "f"} - set(rows[0]):
        raise ValueError(f"{path}: expected columns t, f")
    return TermStructure.from_forwards([float(r["t"]) for r in rows], [float(r["f"]) for r in rows])


__all__ = ["TermStructure", "zcb", "discount_exposures", "hull_white_theta", "DiscountedExposures", "DoubleDiscountError", "read_forward_csv"]
