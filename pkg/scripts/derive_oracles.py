"""Derive the frozen reference values used by the tests.

Everything here is computed with mpmath at 30 digits, independently of the
package code (no scipy, no qcva imports).  Output: tests/data/oracles.json.

    python3 scripts/derive_oracles.py
"""

from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30


def lognormal_pdf(s, S0, r, sigma, T):
    m = mp.log(S0) + (r - sigma**2 / 2) * T
    sd = sigma * mp.sqrt(T)
    return mp.exp(-((mp.log(s) - m) ** 2) / (2 * sd**2)) / (s * sd * mp.sqrt(2 * mp.pi))


def call_moments(S0, K, r, sigma, T):
    """Discounted price and undiscounted payoff variance by quadrature over S_T."""
    f = lambda s: lognormal_pdf(s, S0, r, sigma, T)
    m1 = mp.quad(lambda s: (s - K) * f(s), [K, 2 * K, 5 * K, mp.inf])
    m2 = mp.quad(lambda s: (s - K) ** 2 * f(s), [K, 2 * K, 5 * K, mp.inf])
    return mp.exp(-r * T) * m1, m2 - m1**2


def cds_hazard_single(spread, R, r, maturity, freq):
    """Flat hazard pricing one CDS to zero: premium leg with midway accrual, protection leg."""
    n = int(mp.ceil(maturity * freq - mp.mpf("1e-9")))
    times = [mp.mpf(i + 1) / freq for i in range(n)]
    times[-1] = mp.mpf(maturity)

    def value(h):
        fix = flt = mp.mpf(0)
        prev = mp.mpf(0)
        for t in times:
            Sp, S, Z = mp.exp(-h * prev), mp.exp(-h * t), mp.exp(-r * t)
            fix += (t - prev) * Z * (S + (Sp - S) / 2)
            flt += Z * (Sp - S)
            prev = t
        return spread * fix - (1 - R) * flt

    return mp.findroot(value, spread / (1 - R))


def lognormal_tail_mass(n_std):
    return 2 * mp.ncdf(-n_std)


def main() -> None:
    price, var = call_moments(100, 100, mp.mpf("0.05"), mp.mpf("0.2"), 1)
    h1 = cds_hazard_single(mp.mpf("0.01"), mp.mpf("0.4"), mp.mpf("0.02"), 5, 4)
    out = {
        "bsm_atm": {"S0": 100, "K": 100, "r": 0.05, "sigma": 0.2, "T": 1, "price": float(price), "payoff_variance": float(var)},
        "cds_single_quote": {"spread": 0.01, "R": 0.4, "r": 0.02, "maturity": 5, "frequency": 4, "hazard": float(h1)},
        "cva_2x2": {"Q": [[0.1, 0.2], [0.3, 0.1]], "V": [[5, -2], [1, 4]], "R": 0.4, "cva": float(mp.mpf("0.6") * (mp.mpf("0.5") + mp.mpf("0.3") + mp.mpf("0.4")))},
        "grid_tail_mass_6sd": float(lognormal_tail_mass(6)),
    }
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
