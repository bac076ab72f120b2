"""Counted classical and quantum access to vectors and matrices.

Estimators only ever see `OracleHandle` objects.  Each logical query bumps a
counter by one, so reported query complexity is measured rather than
computed from a formula.  Derived handles (positive part, rescalings,
element-wise products) are built from root handles; one query of a derived
handle costs two queries of every root it reads (compute, then uncompute).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .config import DEFAULT_C1, DEFAULT_C2
from .fixedpoint import FixedPoint, decode_codes, encode, encode_codes, encode_signed, quantize
from .qsim.state import Register, SparseState

DERIVED_QUERY_COST = 2


class Kind(str, Enum):
    VA = "VA"
    SA = "SA"
    QA = "QA"
    QS = "QS"
    QC = "QC"


class AccessError(ValueError):
    pass


class DegenerateDistributionError(AccessError):
    pass


def index_width(n: int) -> int:
    """Bits needed for 1-based indices 1..n."""
    return max(1, int(n).bit_length())


def band_of(x) -> np.ndarray:
    """Dyadic band: 0 for [0,1), l for [2^(l-1), 2^l) when l > 0."""
    x = np.asarray(x, dtype=float)
    _, e = np.frexp(np.where(x >= 1, x, 1.0))
    return np.where(x >= 1, e, 0).astype(np.int64)


class OracleHandle:
    """Access object over a fixed-point vector.

    Indices are 1-based throughout, matching |j> for j = 1..n in the index
    register of every prepared state.
    """

    derived = False

    def __init__(self, kind, values, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, name: str | None = None):
        self.kind = Kind(kind)
        raw = np.asarray(values, dtype=float).ravel()
        if raw.size == 0:
            raise AccessError("cannot build access to an empty vector")
        self.c1, self.c2 = int(c1), int(c2)
        self.signed = bool(np.any(raw < 0))
        if self.signed and self.kind is Kind.QS:
            raise AccessError("sample access needs non-negative weights")
        self._codes = encode_codes(raw, self.c1, self.c2, signed=self.signed)
        self._values = decode_codes(self._codes, self.c1, self.c2, signed=self.signed)
        self.n = raw.size
        self.name = name or self.kind.value
        self.counter = 0
        self._comparator = None
        if self.kind is Kind.QS:
            self.norm = float(self._values.sum())
            if self.norm <= 0:
                raise DegenerateDistributionError("quantum sample access needs a non-zero vector")
        if self.kind is Kind.SA:
            w = np.abs(self._values)
            total = w.sum()
            if total <= 0:
                raise DegenerateDistributionError("sampling access needs a non-zero vector")
            self.norm = float(total)
            # prefix sums built once; construction cost is not charged per query
            self._cdf = np.cumsum(w) / total
            self._cdf[-1] = 1.0

    # -- bookkeeping ------------------------------------------------------

    @property
    def width(self) -> int:
        """Data-register width: magnitude bits plus a sign bit if signed."""
        return self.c1 + self.c2 + int(self.signed)

    def roots(self) -> list["OracleHandle"]:
        return [self]

    def charge(self, k: int = 1) -> None:
        if k < 0:
            raise ValueError("cannot charge a negative number of queries")
        self.counter += int(k)

    def decode(self, codes) -> np.ndarray:
        return decode_codes(codes, self.c1, self.c2, signed=self.signed)

    def encode(self, values) -> np.ndarray:
        return encode_codes(values, self.c1, self.c2, signed=self.signed)

    def payload(self) -> np.ndarray:
        """Decoded payload for precondition checks and test oracles.  Not a query."""
        return self._values.copy()

    def _check_index(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        if np.any((j < 1) | (j > self.n)):
            bad = int(np.ravel(j)[np.argmax(np.ravel((j < 1) | (j > self.n)))])
            raise IndexError(f"index {bad} outside 1..{self.n}")
        return j

    def _require(self, *kinds) -> None:
        if self.kind not in kinds:
            raise AccessError(f"{self.name} is {self.kind.value} access; operation needs {'/'.join(k.value for k in kinds)}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.kind.value}, n={self.n}, queries={self.counter})"


class DerivedHandle(OracleHandle):
    """Quantum query access to fn(root values) at two root queries per query."""

    derived = True

    def __init__(self, inputs, fn, name: str, c1: int | None = None, c2: int | None = None):
        inputs = list(inputs)
        n = inputs[0].n
        if any(h.n != n for h in inputs):
            raise AccessError("derived access needs inputs of equal length")
        roots = []
        for h in inputs:
            for r in h.roots():
                if all(r is not x for x in roots):
                    roots.append(r)
        self._roots = roots
        vals = fn(*[h._values for h in inputs])
        super().__init__(Kind.QA, vals, c1 or inputs[0].c1, c2 or inputs[0].c2, name=name)

    def roots(self) -> list[OracleHandle]:
        return list(self._roots)

    def charge(self, k: int = 1) -> None:
        super().charge(k)
        for r in self._roots:
            r.charge(DERIVED_QUERY_COST * k)


# -- constructors -------------------------------------------------------------


def vector_access(values, kind, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, name=None) -> OracleHandle:
    return OracleHandle(kind, values, c1, c2, name=name)


class ComparatorHandle(OracleHandle):
    """QC(u, l) view of a vector.

    On a derived vector the comparator acts on the computed value, and each
    call is also charged once to the comparator of every root vector, so
    meters over the roots see it.
    """

    def roots(self) -> list[OracleHandle]:
        if not self._source_roots:
            return [self]
        return [comparator_access(r) for r in self._source_roots]

    def charge(self, k: int = 1) -> None:
        super().charge(k)
        for r in self._source_roots:
            comparator_access(r).charge(k)


def comparator_access(h: OracleHandle) -> OracleHandle:
    """Element-wise bounded access QC(u, l); one handle is shared per vector."""
    if h.kind is Kind.QC:
        return h
    if h._comparator is None:
        qc = ComparatorHandle.__new__(ComparatorHandle)
        qc.__dict__.update(h.__dict__)
        qc.kind = Kind.QC
        qc.name = f"QC({h.name})"
        qc.counter = 0
        qc._comparator = None
        qc._source_roots = h.roots() if h.derived else []
        h._comparator = qc
    return h._comparator


def positive_part_access(h: OracleHandle) -> OracleHandle:
    h._require(Kind.QA)
    return DerivedHandle([h], lambda v: np.maximum(v, 0.0), name=f"({h.name})+")


def affine_access(h: OracleHandle, shift: float = 0.0, scale: float = 1.0, name=None) -> OracleHandle:
    """Access to (v + shift) * scale, computed reversibly from v."""
    h._require(Kind.QA)
    return DerivedHandle([h], lambda v: (v + shift) * scale, name=name or f"affine({h.name})")


def product_access(hu: OracleHandle, hv: OracleHandle, scale: float = 1.0, cap: float | None = None, name=None) -> OracleHandle:
    """Access to z_j = u_j v_j * scale, optionally capped at `cap`."""
    hu._require(Kind.QA)
    hv._require(Kind.QA)

    def fn(u, v):
        z = u * v * scale
        return np.minimum(z, cap) if cap is not None else z

    return DerivedHandle([hu, hv], fn, name=name or f"({hu.name}*{hv.name})")


# -- the access models --------------------------------------------------------


def va_query(h: OracleHandle, j: int) -> float:
    """Classical query j -> u_j."""
    h._require(Kind.VA)
    j = int(h._check_index(j))
    h.charge(1)
    return float(h._values[j - 1])


def va_query_fixed(h: OracleHandle, j: int):
    """Classical query returning the stored encoding itself."""
    v = va_query(h, j)
    return encode_signed(v, h.c1, h.c2) if h.signed else encode(v, h.c1, h.c2)


def va_read_many(h: OracleHandle, idx) -> np.ndarray:
    """Vectorised classical queries, one charge per index."""
    h._require(Kind.VA)
    idx = h._check_index(idx)
    h.charge(idx.size)
    return h._values[idx - 1]


def sa_sample(h: OracleHandle, rng, size=None):
    """Draw j with probability |v_j| / ||v||_1 (inverse-CDF)."""
    h._require(Kind.SA)
    rng = np.random.default_rng(rng)
    u = rng.random(size)
    j = np.searchsorted(h._cdf, u, side="right") + 1
    j = np.minimum(j, h.n)
    h.charge(1 if size is None else int(np.prod(size)))
    return int(j) if size is None else j


def sa_counts(h: OracleHandle, rng, n_samples: int) -> np.ndarray:
    """Histogram of n_samples draws; equal in law to tallying sa_sample."""
    h._require(Kind.SA)
    rng = np.random.default_rng(rng)
    p = np.abs(h._values) / h.norm
    h.charge(n_samples)
    return rng.multinomial(n_samples, p / p.sum())


def qa_apply(h: OracleHandle, state: SparseState, index_reg: str = "index", data_reg: str = "data") -> SparseState:
    """|j>|b> -> |j>|b XOR u_j>, one query per invocation."""
    h._require(Kind.QA)
    if state.width_of(data_reg) != h.width:
        raise AccessError(f"data register {data_reg!r} has width {state.width_of(data_reg)}, oracle writes {h.width} bits")
    j = h._check_index(state.values(index_reg))
    codes = h._codes[j - 1]
    h.charge(1)
    return state.xor_into(data_reg, codes)


def qs_prepare(h: OracleHandle, index_reg: str = "index", extra=()) -> SparseState:
    """Prepare sum_j sqrt(v_j / ||v||_1) |j>, with extra registers in |0>."""
    h._require(Kind.QS)
    support = np.nonzero(h._values > 0)[0]
    amps = np.sqrt(h._values[support] / h.norm)
    layout = (Register(index_reg, index_width(h.n)),) + tuple(r if isinstance(r, Register) else Register(*r) for r in extra)
    h.charge(1)
    return SparseState.from_register_amplitudes(layout, index_reg, support + 1, amps)


def uniform_prepare(n: int, index_reg: str = "index", extra=()) -> SparseState:
    """Hadamard layer: uniform superposition over |1>..|n>; no oracle query."""
    layout = (Register(index_reg, index_width(n)),) + tuple(r if isinstance(r, Register) else Register(*r) for r in extra)
    return SparseState.zero(layout).hadamard_uniform(index_reg, n, offset=1)


def qc_compare(qc: OracleHandle, state: SparseState, level: int, src_reg: str = "data", out_reg: str = "band") -> SparseState:
    """Copy the source value into out_reg iff it lies in dyadic band `level`."""
    qc._require(Kind.QC)
    if level < 0 or int(level) != level:
        raise ValueError(f"band level must be a non-negative integer, got {level}")
    if state.width_of(out_reg) != qc.width:
        raise AccessError(f"output register {out_reg!r} must have width {qc.width}")
    codes = state.values(src_reg)
    vals = qc.decode(codes)
    hit = (band_of(vals) == level) & (vals >= 0)
    qc.charge(1)
    return state.xor_into(out_reg, np.where(hit, codes, 0))


def controlled_rotation(state: SparseState, source_reg: str, flag: str, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, signed: bool = False) -> SparseState:
    """|u>|0> -> |u>(sqrt(1-Q(u))|0> + sqrt(Q(u))|1>); requires Q(u) in [0,1] on every branch."""
    return state.rotate(source_reg, flag, lambda codes: decode_codes(codes, c1, c2, signed=signed))


# -- matrices -----------------------------------------------------------------


class MatrixAccess:
    """Access to an n x m matrix through its column-stacked vectorisation.

    Entry (i, j) (row i, column j, both 1-based) sits at vec index
    (j - 1) * n + i.
    """

    def __init__(self, matrix, kind=Kind.QA, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, name=None):
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2:
            raise AccessError("matrix access needs a 2-d array")
        self.rows, self.cols = a.shape
        self.vec = OracleHandle(kind, a.ravel(order="F"), c1, c2, name=name or f"vec[{kind}]")

    @classmethod
    def from_columns(cls, columns, kind=Kind.QA, c1: int = DEFAULT_C1, c2: int = DEFAULT_C2, name=None) -> "MatrixAccess":
        """Build from a K x N array whose k-th row is the k-th column vector."""
        return cls(np.asarray(columns, dtype=float).T, kind, c1, c2, name)

    def vec_index(self, i: int, j: int) -> int:
        if not (1 <= i <= self.rows and 1 <= j <= self.cols):
            raise IndexError(f"entry ({i}, {j}) outside {self.rows}x{self.cols}")
        return (j - 1) * self.rows + i

    def query(self, i: int, j: int) -> float:
        return va_query(self.vec, self.vec_index(i, j))

    @property
    def kind(self):
        return self.vec.kind


# -- counting -----------------------------------------------------------------


def unique_roots(handles) -> list[OracleHandle]:
    out = []
    for h in handles:
        if h is None:
            continue
        for r in h.roots():
            for x in (r, comparator_access(r)):
                if all(x is not y for y in out):
                    out.append(x)
    return out


class QueryMeter:
    """Counter deltas over the root handles behind a set of handles."""

    def __init__(self, *handles):
        self.roots = unique_roots(handles)
        self.start = [r.counter for r in self.roots]

    def track(self, *handles) -> None:
        for r in unique_roots(handles):
            if all(r is not x for x in self.roots):
                self.roots.append(r)
                self.start.append(r.counter)

    def deltas(self) -> list[tuple[OracleHandle, int]]:
        return [(r, r.counter - s) for r, s in zip(self.roots, self.start)]

    def counts(self) -> dict:
        out = {}
        for r, d in self.deltas():
            if d:
                out[r.kind.value] = out.get(r.kind.value, 0) + d
        return out

    def total(self) -> int:
        return sum(d for _, d in self.deltas())

    def rollback(self) -> None:
        for r, s in zip(self.roots, self.start):
            r.counter = s


def total_queries(handles) -> int:
    return sum(r.counter for r in unique_roots(handles))


__all__ = [
    "Kind",
    "OracleHandle",
    "DerivedHandle",
    "ComparatorHandle",
    "MatrixAccess",
    "QueryMeter",
    "AccessError",
    "DegenerateDistributionError",
    "vector_access",
    "comparator_access",
    "positive_part_access",
    "affine_access",
    "product_access",
    "va_query",
    "va_query_fixed",
    "va_read_many",
    "sa_sample",
    "sa_counts",
    "qa_apply",
    "qs_prepare",
    "uniform_prepare",
    "qc_compare",
    "controlled_rotation",
    "band_of",
    "index_width",
    "quantize",
    "FixedPoint",
]
