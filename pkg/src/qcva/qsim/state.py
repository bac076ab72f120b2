"""Sparse statevector over named integer registers.

Basis labels are rows of an int64 matrix, one column per register, so every
gate in this package is a vectorised numpy operation over the support of the
state.  Arithmetic gates write into registers by XOR, which keeps them
permutations of the basis and therefore trivially unitary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

NORM_TOL = 1e-9
PRUNE_TOL = 1e-15


class NormMonitor:
    """Largest deviation of ||psi|| from 1 seen after any unitary."""

    def __init__(self):
        self.max_deviation = 0.0
        self.checks = 0

    def record(self, dev: float) -> None:
        self.checks += 1
        if dev > self.max_deviation:
            self.max_deviation = dev

    def reset(self) -> None:
        self.max_deviation = 0.0
        self.checks = 0


norm_monitor = NormMonitor()


class NormError(RuntimeError):
    pass


class RegisterError(ValueError):
    pass


@dataclass(frozen=True)
class Register:
    name: str
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= 62:
            raise RegisterError(f"register {self.name!r} width {self.width} outside 1..62")


class SparseState:
    def __init__(self, layout, labels, amps, check: bool = True):
        self.layout = tuple(r if isinstance(r, Register) else Register(*r) for r in layout)
        names = [r.name for r in self.layout]
        if len(set(names)) != len(names):
            raise RegisterError(f"duplicate register names in {names}")
        self._col = {r.name: i for i, r in enumerate(self.layout)}
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1, len(self.layout))
        self.amps = np.asarray(amps, dtype=complex).ravel()
        if self.labels.shape[0] != self.amps.shape[0]:
            raise ValueError("label and amplitude counts differ")
        if check:
            self._check_widths()

    # construction -------------------------------------------------------

    @classmethod
    def zero(cls, layout) -> "SparseState":
        layout = tuple(r if isinstance(r, Register) else Register(*r) for r in layout)
        return cls(layout, np.zeros((1, len(layout)), dtype=np.int64), np.ones(1, dtype=complex))

    @classmethod
    def from_register_amplitudes(cls, layout, reg: str, values, amps) -> "SparseState":
        """State with `reg` holding `values[i]` at amplitude `amps[i]`, other registers zero."""
        layout = tuple(r if isinstance(r, Register) else Register(*r) for r in layout)
        col = [r.name for r in layout].index(reg)
        values = np.asarray(values, dtype=np.int64)
        labels = np.zeros((values.size, len(layout)), dtype=np.int64)
        labels[:, col] = values
        st = cls(layout, labels, amps)
        st._after_unitary("prepare")
        return st

    def copy(self) -> "SparseState":
        return SparseState(self.layout, self.labels.copy(), self.amps.copy(), check=False)

    # inspection ---------------------------------------------------------

    @property
    def names(self):
        return [r.name for r in self.layout]

    def width_of(self, reg: str) -> int:
        return self.layout[self.col(reg)].width

    def col(self, reg: str) -> int:
        try:
            return self._col[reg]
        except KeyError:
            raise RegisterError(f"no register named {reg!r}; layout is {self.names}") from None

    def values(self, reg: str) -> np.ndarray:
        return self.labels[:, self.col(reg)]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def probability(self, mask) -> float:
        return float(np.sum(self.probabilities()[np.asarray(mask, dtype=bool)]))

    def amplitude(self, **regs) -> complex:
        row = np.zeros(len(self.layout), dtype=np.int64)
        for name, v in regs.items():
            row[self.col(name)] = v
        hit = np.all(self.labels == row, axis=1)
        return complex(self.amps[hit].sum())

    def to_dict(self) -> dict:
        return {tuple(int(x) for x in lab): complex(a) for lab, a in zip(self.labels, self.amps)}

    def __len__(self) -> int:
        return self.amps.shape[0]

    def __repr__(self) -> str:
        return f"SparseState({len(self)} labels, layout={[(r.name, r.width) for r in self.layout]})"

    # bookkeeping --------------------------------------------------------

    def _check_widths(self) -> None:
        for r in self.layout:
            v = self.labels[:, self._col[r.name]]
            if v.size and (v.min() < 0 or v.max() >= (1 << r.width)):
                raise RegisterError(f"register {r.name!r} holds a value outside {r.width} bits")

    def _after_unitary(self, what: str) -> None:
        dev = abs(self.norm() - 1.0)
        norm_monitor.record(dev)
        if dev > NORM_TOL:
            raise NormError(f"norm drifted by {dev:.3e} after {what}")

    def merge_duplicates(self) -> "SparseState":
        if len(self) <= 1:
            return self
        uniq, inv = np.unique(self.labels, axis=0, return_inverse=True)
        if uniq.shape[0] == len(self):
            return self
        amps = np.zeros(uniq.shape[0], dtype=complex)
        np.add.at(amps, inv.ravel(), self.amps)
        keep = np.abs(amps) > PRUNE_TOL
        return SparseState(self.layout, uniq[keep], amps[keep], check=False)

    def with_register(self, name: str, width: int) -> "SparseState":
        """Append a fresh register initialised to |0>."""
        labels = np.hstack([self.labels, np.zeros((len(self), 1), dtype=np.int64)])
        return SparseState(self.layout + (Register(name, width),), labels, self.amps.copy(), check=False)

    def without_register(self, name: str) -> "SparseState":
        """Drop a register that is |0> on every branch (an uncomputed ancilla)."""
        c = self.col(name)
        if np.any(self.labels[:, c] != 0):
            raise RegisterError(f"register {name!r} is entangled; uncompute it before discarding")
        keep = [i for i in range(len(self.layout)) if i != c]
        return SparseState(tuple(self.layout[i] for i in keep), self.labels[:, keep], self.amps.copy(), check=False)

    # gates --------------------------------------------------------------

    def xor_into(self, reg: str, values) -> "SparseState":
        """|.., b, ..> -> |.., b XOR values[row], ..>; values given per basis row."""
        c = self.col(reg)
        values = np.asarray(values, dtype=np.int64)
        if values.size and (values.min() < 0 or values.max() >= (1 << self.layout[c].width)):
            raise RegisterError(f"value does not fit register {reg!r} of width {self.layout[c].width}")
        labels = self.labels.copy()
        labels[:, c] ^= values
        out = SparseState(self.layout, labels, self.amps.copy(), check=False)
        out._after_unitary(f"xor into {reg}")
        return out

    def compute(self, fn, sources, target: str) -> "SparseState":
        """Reversible evaluation: target ^= fn(*source_columns)."""
        cols = [self.values(s) for s in sources]
        return self.xor_into(target, fn(*cols))

    def phase(self, mask, factor=-1.0, what: str = "phase") -> "SparseState":
        amps = self.amps.copy()
        amps[np.asarray(mask, dtype=bool)] *= factor
        out = SparseState(self.layout, self.labels.copy(), amps, check=False)
        out._after_unitary(what)
        return out

    def reflect_zero(self, registers) -> "SparseState":
        """1 - 2|0><0| on the given registers."""
        if isinstance(registers, str):
            registers = [registers]
        mask = np.ones(len(self), dtype=bool)
        for r in registers:
            mask &= self.values(r) == 0
        return self.phase(mask, what="reflect_zero")

    def reflect_flag(self, flag: str) -> "SparseState":
        """1 - 2 (1 x |0><0|) on a single flag qubit."""
        if self.width_of(flag) != 1:
            raise RegisterError(f"flag register {flag!r} must be one qubit")
        return self.phase(self.values(flag) == 0, what="reflect_flag")

    def reflect_about(self, chi: "SparseState") -> "SparseState":
        """1 - 2|chi><chi|."""
        if self.layout != chi.layout:
            raise RegisterError("reflection target has a different register layout")
        if self.labels.shape == chi.labels.shape and np.array_equal(self.labels, chi.labels):
            overlap = np.vdot(chi.amps, self.amps)
            out = SparseState(self.layout, self.labels.copy(), self.amps - 2 * overlap * chi.amps, check=False)
        else:
            both = np.vstack([self.labels, chi.labels])
            uniq, inv = np.unique(both, axis=0, return_inverse=True)
            inv = inv.ravel()
            a = np.zeros(uniq.shape[0], dtype=complex)
            b = np.zeros(uniq.shape[0], dtype=complex)
            a[inv[: len(self)]] = self.amps
            b[inv[len(self):]] = chi.amps
            overlap = np.vdot(b, a)
            out = SparseState(self.layout, uniq, a - 2 * overlap * b, check=False)
        out._after_unitary("reflect_about")
        return out

    def hadamard_uniform(self, reg: str, n: int, offset: int = 1) -> "SparseState":
        """Map |0> on `reg` to the uniform superposition over offset..offset+n-1.

        Only defined on branches where `reg` is zero, which is how every
        state preparation in this package uses it.
        """
        c = self.col(reg)
        if np.any(self.labels[:, c] != 0):
            raise RegisterError(f"register {reg!r} must start in |0>")
        if offset + n - 1 >= (1 << self.layout[c].width):
            raise RegisterError(f"register {reg!r} too narrow for {n} values")
        rows = len(self)
        labels = np.repeat(self.labels, n, axis=0)
        labels[:, c] = np.tile(np.arange(offset, offset + n, dtype=np.int64), rows)
        amps = np.repeat(self.amps, n) / np.sqrt(n)
        out = SparseState(self.layout, labels, amps, check=False)
        out._after_unitary("uniform superposition")
        return out

    def rotate(self, source: str, flag: str, decode) -> "SparseState":
        """Controlled rotation |x>|0> -> |x>(sqrt(1-p)|0> + sqrt(p)|1>), p = decode(x).

        On flag |1> the orthogonal completion (-sqrt(p)|0> + sqrt(1-p)|1>) is
        used, so the gate is a proper unitary on both flag values.
        """
        if self.width_of(flag) != 1:
            raise RegisterError(f"flag register {flag!r} must be one qubit")
        p = np.asarray(decode(self.values(source)), dtype=float)
        bad = (p < 0) | (p > 1) | ~np.isfinite(p)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ValueError(
                f"rotation source {source!r} holds {p[i]} outside [0, 1] on branch {tuple(int(x) for x in self.labels[i])}"
            )
        c, s = np.sqrt(1.0 - p), np.sqrt(p)
        fcol = self.col(flag)
        f = self.labels[:, fcol]
        lab0 = self.labels.copy()
        lab0[:, fcol] = 0
        lab1 = self.labels.copy()
        lab1[:, fcol] = 1
        a0 = np.where(f == 0, c, -s) * self.amps
        a1 = np.where(f == 0, s, c) * self.amps
        labels = np.vstack([lab0, lab1])
        amps = np.concatenate([a0, a1])
        keep = np.abs(amps) > PRUNE_TOL
        out = SparseState(self.layout, labels[keep], amps[keep], check=False)
        if np.any(f != 0):
            out = out.merge_duplicates()
        out._after_unitary("controlled rotation")
        return out

    # measurement --------------------------------------------------------

    def marginal(self, registers) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values of the given registers and their probabilities."""
        if isinstance(registers, str):
            registers = [registers]
        cols = [self.col(r) for r in registers]
        sub = self.labels[:, cols]
        uniq, inv = np.unique(sub, axis=0, return_inverse=True)
        probs = np.zeros(uniq.shape[0])
        np.add.at(probs, inv.ravel(), self.probabilities())
        return uniq, probs

    def measure(self, registers, rng, size=None):
        """Sample outcomes of the given registers (the state is not collapsed)."""
        uniq, probs = self.marginal(registers)
        probs = probs / probs.sum()
        idx = rng.choice(len(probs), size=size, p=probs)
        return uniq[idx]

    def measure_counts(self, registers, rng, shots: int):
        """Outcome counts of `shots` independent measurements of the given registers."""
        uniq, probs = self.marginal(registers)
        return uniq, rng.multinomial(shots, probs / probs.sum())
