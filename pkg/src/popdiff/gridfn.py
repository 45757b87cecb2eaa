"""Functions on (F_p^n)^k, symmetrized quadratic factors, and their atoms.

Grid points are k x n matrices over F_p; the dense index encoding is
row-major base p with entry (0, 0) least significant (see _grid). Grid
functions store one value per index, in exact-rational, float, or
complex-float form; conversions between value kinds are always explicit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import DEFAULT_GUARD
from ._grid import digit_table
from .errors import (
    BadMagic,
    CorruptLength,
    DimensionMismatch,
    NotSymmetric,
    TooLarge,
    VersionMismatch,
)
from .ffalg import FpMatrix, mat_rank, row_space_rank, rref, validate_odd_prime
from .patterns import SubspaceBasis

RATIONAL = "rational"
FLOAT = "float"
COMPLEX = "complex"
_KINDS = (RATIONAL, FLOAT, COMPLEX)


# ---------------------------------------------------------------------------
# Grid points


def grid_size(p: int, k: int, n: int) -> int:
    return p ** (k * n)


def grid_encode(X: FpMatrix) -> int:
    """Index of a k x n point: digit (i*n + j) is entry (i, j), (0,0) least
    significant. Every file format and report depends on this encoding."""
    idx = 0
    m = X.rows * X.cols
    for pos in range(m - 1, -1, -1):
        i, j = divmod(pos, X.cols)
        idx = idx * X.p + X[i, j]
    return idx


def grid_decode(p: int, k: int, n: int, index: int) -> FpMatrix:
    entries = []
    for _ in range(k * n):
        entries.append(index % p)
        index //= p
    return FpMatrix(k, n, entries, p)


@dataclass(frozen=True)
class GridPoint:
    X: FpMatrix
    n: int

    def __post_init__(self):
        if self.X.cols != self.n:
            raise DimensionMismatch("point has wrong number of columns")

    @property
    def index(self) -> int:
        return grid_encode(self.X)

    @classmethod
    def from_index(cls, p: int, k: int, n: int, index: int) -> "GridPoint":
        return cls(grid_decode(p, k, n, index), n)


# ---------------------------------------------------------------------------
# Grid functions


class GridFunction:
    """Dense function (F_p^n)^k -> values, indexed by grid_encode."""

    __slots__ = ("p", "k", "n", "values", "kind")

    def __init__(self, p: int, k: int, n: int, values, kind: str, guard: int = DEFAULT_GUARD):
        validate_odd_prime(p)
        if kind not in _KINDS:
            raise ValueError(f"unknown value kind {kind!r}")
        size = grid_size(p, k, n)
        if size > guard:
            raise TooLarge(f"p^(kn) = {size} exceeds guard {guard}")
        if kind == RATIONAL:
            arr = np.empty(size, dtype=object)
            arr[:] = [Fraction(v) for v in values]
        elif kind == FLOAT:
            arr = np.asarray(values, dtype=np.float64).copy()
        else:
            arr = np.asarray(values, dtype=np.complex128).copy()
        if arr.shape != (size,):
            raise DimensionMismatch(f"need {size} values, got shape {arr.shape}")
        arr.setflags(write=False)
        self.p, self.k, self.n = p, k, n
        self.values = arr
        self.kind = kind

    # -- constructors --------------------------------------------------

    @classmethod
    def constant(cls, p: int, k: int, n: int, value, kind: str = FLOAT, guard: int = DEFAULT_GUARD) -> "GridFunction":
        size = grid_size(p, k, n)
        if size > guard:
            raise TooLarge(f"p^(kn) = {size} exceeds guard {guard}")
        return cls(p, k, n, [value] * size, kind, guard=guard)

    @classmethod
    def from_callable(cls, p: int, k: int, n: int, fn: Callable[[FpMatrix], object], kind: str = FLOAT) -> "GridFunction":
        vals = [fn(grid_decode(p, k, n, i)) for i in range(grid_size(p, k, n))]
        return cls(p, k, n, vals, kind)

    @classmethod
    def indicator(cls, p: int, k: int, n: int, indices, kind: str = RATIONAL) -> "GridFunction":
        vals = np.zeros(grid_size(p, k, n), dtype=np.int64)
        vals[np.asarray(list(indices), dtype=np.int64)] = 1
        return cls(p, k, n, vals, kind)

    def with_values(self, values, kind: str | None = None) -> "GridFunction":
        return GridFunction(self.p, self.k, self.n, values, kind or self.kind)

    # -- basics ---------------------------------------------------------

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def tensor(self) -> np.ndarray:
        """Reshape to (p,)*kn; axis 0 is the least significant digit."""
        # index = sum d_j p^j means C-order reshape puts digit 0 last; use
        # Fortran-style ordering so axis j corresponds to digit j.
        return self.values.reshape((self.p,) * (self.k * self.n), order="F")

    def mean(self):
        if self.kind == RATIONAL:
            return Fraction(sum(self.values, Fraction(0)), 1) / self.size
        if self.kind == FLOAT:
            return math.fsum(self.values) / self.size
        return complex(math.fsum(self.values.real), math.fsum(self.values.imag)) / self.size

    def l2_norm_sq(self):
        if self.kind == RATIONAL:
            return sum((v * v for v in self.values), Fraction(0)) / self.size
        return math.fsum(np.abs(self.values) ** 2) / self.size

    def is_unit_interval(self, tol: float = 0.0) -> bool:
        if self.kind == RATIONAL:
            return all(0 <= v <= 1 for v in self.values)
        if self.kind == FLOAT:
            return bool(np.all(self.values >= -tol) and np.all(self.values <= 1 + tol))
        return False

    def is_one_bounded(self, tol: float = 1e-12) -> bool:
        if self.kind == RATIONAL:
            return all(abs(v) <= 1 for v in self.values)
        return bool(np.all(np.abs(self.values) <= 1 + tol))

    # -- explicit conversions --------------------------------------------

    def to_float(self) -> "GridFunction":
        return GridFunction(self.p, self.k, self.n, np.array([float(v) for v in self.values]) if self.kind == RATIONAL else self.values.real, FLOAT)

    def to_rational(self, limit_denominator: int | None = None) -> "GridFunction":
        if self.kind == RATIONAL:
            return self
        if self.kind == COMPLEX:
            raise ValueError("complex grid functions have no rational form")
        vals = [Fraction(float(v)) if limit_denominator is None else Fraction(float(v)).limit_denominator(limit_denominator) for v in self.values]
        return GridFunction(self.p, self.k, self.n, vals, RATIONAL)

    def to_complex(self) -> "GridFunction":
        return GridFunction(self.p, self.k, self.n, self.values.astype(np.complex128) if self.kind != RATIONAL else np.array([complex(v) for v in self.values]), COMPLEX)


# ---------------------------------------------------------------------------
# Quadratic factors


@dataclass(frozen=True)
class QuadraticFactor:
    """Lists (r_i), (M_i symmetric), (N_j skew) of length-n data defining the
    maps X -> X r_i, X M_i X^T, X N_j X^T on k x n grid points."""

    p: int
    n: int
    b1: tuple[tuple[int, ...], ...]
    b2: tuple[FpMatrix, ...]
    b3: tuple[FpMatrix, ...]

    def __post_init__(self):
        validate_odd_prime(self.p)
        object.__setattr__(self, "b1", tuple(tuple(x % self.p for x in r) for r in self.b1))
        for r in self.b1:
            if len(r) != self.n:
                raise DimensionMismatch("linear part has wrong length")
        for M in self.b2:
            if M.rows != self.n or M.p != self.p or not M.is_symmetric():
                raise NotSymmetric("b2 entries must be symmetric n x n over F_p")
        for N in self.b3:
            if N.rows != self.n or N.p != self.p or not N.is_skew():
                raise NotSymmetric("b3 entries must be skew-symmetric n x n over F_p")

    @property
    def complexity(self) -> tuple[int, int, int]:
        return (len(self.b1), len(self.b2), len(self.b3))

    def to_json_obj(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "b1": [list(r) for r in self.b1],
            "b2": [M.to_lists() for M in self.b2],
            "b3": [N.to_lists() for N in self.b3],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "QuadraticFactor":
        p = obj["p"]
        return cls(
            p,
            obj["n"],
            tuple(tuple(r) for r in obj["b1"]),
            tuple(FpMatrix.from_rows(M, p) for M in obj["b2"]),
            tuple(FpMatrix.from_rows(N, p) for N in obj["b3"]),
        )


@dataclass(frozen=True)
class FactorImage:
    b1: tuple[tuple[int, ...], ...]
    b2: tuple[FpMatrix, ...]
    b3: tuple[FpMatrix, ...]

    def key(self) -> tuple:
        return (self.b1, tuple(M.entries for M in self.b2), tuple(N.entries for N in self.b3))


def factor_eval(factor: QuadraticFactor, X: FpMatrix) -> FactorImage:
    """Componentwise image (X r_i, X M_i X^T, X N_j X^T)."""
    if X.cols != factor.n or X.p != factor.p:
        raise DimensionMismatch("point shape does not match the factor")
    Xt = X.transpose()
    b1 = tuple(
        tuple(sum(X[a, j] * r[j] for j in range(factor.n)) % factor.p for a in range(X.rows))
        for r in factor.b1
    )
    b2 = tuple(X.mul(M).mul(Xt) for M in factor.b2)
    b3 = tuple(X.mul(N).mul(Xt) for N in factor.b3)
    for M in b2:
        assert M.is_symmetric()
    for N in b3:
        assert N.is_skew()
    return FactorImage(b1, b2, b3)


def _sym_coord_index(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i, k)]


def _skew_coord_index(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def factor_image_coords(factor: QuadraticFactor, k: int) -> np.ndarray:
    """Canonical image coordinates for every grid index; shape (P, ncoords).

    Coordinates: all k entries of each X r_i, then upper-triangle (incl.
    diagonal) of each X M_i X^T, then strict upper triangle of each X N_j X^T.
    """
    p, n = factor.p, factor.n
    P = grid_size(p, k, n)
    X = digit_table(p, k * n).reshape(P, k, n)
    cols: list[np.ndarray] = []
    for r in factor.b1:
        rv = np.asarray(r, dtype=np.int64)
        cols.append((X @ rv) % p)  # (P, k)
    for M in factor.b2:
        Mm = np.array(M.to_lists(), dtype=np.int64)
        Q = np.einsum("xan,nm,xbm->xab", X, Mm, X) % p
        cols.append(np.stack([Q[:, i, j] for i, j in _sym_coord_index(k)], axis=1))
    for N in factor.b3:
        Nm = np.array(N.to_lists(), dtype=np.int64)
        Q = np.einsum("xan,nm,xbm->xab", X, Nm, X) % p
        if k > 1:
            cols.append(np.stack([Q[:, i, j] for i, j in _skew_coord_index(k)], axis=1))
    if not cols:
        return np.zeros((P, 0), dtype=np.int64)
    flat = [c if c.ndim == 2 else c[:, None] for c in cols]
    return np.concatenate(flat, axis=1)


def atom_partition(factor: QuadraticFactor, k: int) -> tuple[np.ndarray, int]:
    """Atom id per grid index (one pass over the image map), and atom count."""
    coords = factor_image_coords(factor, k)
    _, inverse = np.unique(coords, axis=0, return_inverse=True)
    return inverse, int(inverse.max()) + 1 if len(inverse) else 0


def factor_rank(factor: QuadraticFactor, guard: int = 10**7) -> int:
    """Largest r with the linear parts independent and every nontrivial
    combination of the quadratic parts of rank >= r; 0 if the linear part is
    dependent, n if there are no quadratic parts."""
    p, n = factor.p, factor.n
    d1, d2, d3 = factor.complexity
    if d1 and row_space_rank([list(r) for r in factor.b1], p) < d1:
        return 0
    if d2 + d3 == 0:
        return n
    if p ** (d2 + d3) > guard:
        raise TooLarge(f"p^(d2+d3) = {p ** (d2 + d3)} exceeds guard {guard}")
    mats = list(factor.b2) + list(factor.b3)
    best = n
    for idx in range(1, p ** (d2 + d3)):
        digits = []
        t = idx
        for _ in mats:
            digits.append(t % p)
            t //= p
        comb = FpMatrix.zero(n, n, p)
        for c, M in zip(digits, mats):
            if c:
                comb = comb.add(M.scale_by(c))
        best = min(best, mat_rank(comb))
        if best == 0:
            break
    return best


def conditional_expectation(f: GridFunction, factor: QuadraticFactor) -> GridFunction:
    """Projection of f onto the atoms of the factor: constant on each fiber
    of the image map, mean preserved exactly (rational kind) or to float
    accuracy."""
    if f.kind == COMPLEX:
        raise ValueError("conditional expectation is defined for rational or float values")
    atom, count = atom_partition(factor, f.k)
    if f.kind == RATIONAL:
        sums = [Fraction(0)] * count
        sizes = [0] * count
        for a, v in zip(atom, f.values):
            sums[a] += v
            sizes[a] += 1
        means = [s / c for s, c in zip(sums, sizes)]
        out = [means[a] for a in atom]
        return f.with_values(out)
    sums = np.bincount(atom, weights=f.values, minlength=count)
    sizes = np.bincount(atom, minlength=count)
    return f.with_values(sums[atom] / sizes[atom])


# ---------------------------------------------------------------------------
# The linear-kernel subspace H


def linear_kernel_H(factor: QuadraticFactor, k: int) -> dict:
    """H = {D in (F_p^n)^k : D r_i = 0 for all i}, as an exact indicator,
    together with the annihilator characters spanning H-perp."""
    p, n = factor.p, factor.n
    coords_rows = [list(r) for r in factor.b1]
    red, _ = rref(coords_rows, p) if coords_rows else ([], [])
    rank = len(red)
    P = grid_size(p, k, n)
    if factor.b1:
        X = digit_table(p, k * n).reshape(P, k, n)
        R = np.array([list(r) for r in factor.b1], dtype=np.int64).T  # (n, d1)
        vals = np.einsum("xan,nd->xad", X, R) % p
        member = np.all(vals == 0, axis=(1, 2))
    else:
        member = np.ones(P, dtype=bool)
    indicator = GridFunction(p, k, n, member.astype(np.int64), RATIONAL)
    # H-perp inside F_p^{kn}: row a tensored with each r_i
    basis = []
    for row_vec in red:
        for a in range(k):
            v = [0] * (k * n)
            for j in range(n):
                v[a * n + j] = row_vec[j]
            basis.append(tuple(v))
    h_perp = SubspaceBasis(p, k * n, tuple(basis), "grid-characters")
    density = Fraction(int(member.sum()), P)
    assert density == Fraction(1, p ** (k * rank))
    return {"H": indicator, "H_perp": h_perp, "density": density, "rank": rank}


def h_coset_labels(factor: QuadraticFactor, k: int) -> np.ndarray:
    """Coset label of each grid index for the subgroup H (values of D r_i)."""
    p, n = factor.p, factor.n
    P = grid_size(p, k, n)
    if not factor.b1:
        return np.zeros((P, 1), dtype=np.int64)
    X = digit_table(p, k * n).reshape(P, k, n)
    R = np.array([list(r) for r in factor.b1], dtype=np.int64).T
    return (np.einsum("xan,nd->xad", X, R) % p).reshape(P, -1)


# ---------------------------------------------------------------------------
# Phase functions


def phase_function(r: Sequence[int], M: FpMatrix, p: int, k: int, n: int) -> GridFunction:
    """g(x) = e_p(r^T x + x^T M x) on the kn-flattening of the grid."""
    m = k * n
    if M.rows != m or M.cols != m or M.p != p:
        raise DimensionMismatch("M must be kn x kn over F_p")
    if not M.is_symmetric():
        raise NotSymmetric("phase matrix must be symmetric")
    if len(r) != m:
        raise DimensionMismatch("r must have length kn")
    digits = digit_table(p, m)
    rv = np.asarray([x % p for x in r], dtype=np.int64)
    Mm = np.array(M.to_lists(), dtype=np.int64)
    t = (digits @ rv + np.einsum("xi,ij,xj->x", digits, Mm, digits)) % p
    vals = np.exp(2j * np.pi * t / p)
    return GridFunction(p, k, n, vals, COMPLEX)


def block_factor_from_phase(r: Sequence[int], M: FpMatrix, k: int, n: int) -> QuadraticFactor:
    """The factor on whose atoms the phase function is constant: the n-blocks
    of r, the diagonal blocks and symmetrized off-diagonal blocks of M, and
    the skew parts of the off-diagonal blocks."""
    p = M.p
    inv2 = pow(2, -1, p)
    b1 = tuple(tuple(r[i * n + j] % p for j in range(n)) for i in range(k))
    b2 = []
    b3 = []
    blocks = [[[[M[i * n + a, j * n + b] for b in range(n)] for a in range(n)] for j in range(k)] for i in range(k)]
    for i in range(k):
        b2.append(FpMatrix.from_rows(blocks[i][i], p))
    for i in range(k):
        for j in range(i + 1, k):
            Mij = FpMatrix.from_rows(blocks[i][j], p)
            b2.append(Mij.add(Mij.transpose()).scale_by(inv2))
            b3.append(Mij.sub(Mij.transpose()).scale_by(inv2))
    b3 = [N for N in b3 if any(N.flatten())]
    b2 = [S for S in b2 if any(S.flatten())]
    return QuadraticFactor(p, n, b1, tuple(b2), tuple(b3))


# ---------------------------------------------------------------------------
# PLGF grid-function files

_MAGIC = b"PLGF"
_VERSION = 1
_KIND_CODE = {RATIONAL: 0, FLOAT: 1, COMPLEX: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def write_grid_function(f: GridFunction, path) -> None:
    """Binary format: magic 'PLGF', version byte, p/k/n uint32 LE, kind byte,
    then the dense payload (rationals as int64 numerator/denominator pairs,
    floats as float64, complex as float64 pairs)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B", _VERSION))
        fh.write(struct.pack("<III", f.p, f.k, f.n))
        fh.write(struct.pack("<B", _KIND_CODE[f.kind]))
        if f.kind == RATIONAL:
            out = np.empty(2 * f.size, dtype="<i8")
            for i, v in enumerate(f.values):
                if not (-(2**63) <= v.numerator < 2**63 and v.denominator < 2**63):
                    raise OverflowError("rational value does not fit int64 pairs")
                out[2 * i] = v.numerator
                out[2 * i + 1] = v.denominator
            fh.write(out.tobytes())
        elif f.kind == FLOAT:
            fh.write(f.values.astype("<f8").tobytes())
        else:
            inter = np.empty(2 * f.size, dtype="<f8")
            inter[0::2] = f.values.real
            inter[1::2] = f.values.imag
            fh.write(inter.tobytes())


def read_grid_function(path) -> GridFunction:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise BadMagic(f"expected PLGF magic, got {blob[:4]!r}")
    if len(blob) < 18:
        raise CorruptLength("truncated header")
    version = blob[4]
    if version != _VERSION:
        raise VersionMismatch(f"unsupported version {version}")
    p, k, n = struct.unpack("<III", blob[5:17])
    kind_code = blob[17]
    if kind_code not in _CODE_KIND:
        raise VersionMismatch(f"unknown value kind byte {kind_code}")
    kind = _CODE_KIND[kind_code]
    size = p ** (k * n)
    payload = blob[18:]
    unit = {RATIONAL: 16, FLOAT: 8, COMPLEX: 16}[kind]
    if len(payload) != unit * size:
        raise CorruptLength(f"payload is {len(payload)} bytes, expected {unit * size}")
    if kind == RATIONAL:
        raw = np.frombuffer(payload, dtype="<i8")
        vals = [Fraction(int(raw[2 * i]), int(raw[2 * i + 1])) for i in range(size)]
    elif kind == FLOAT:
        vals = np.frombuffer(payload, dtype="<f8")
    else:
        raw = np.frombuffer(payload, dtype="<f8")
        vals = raw[0::2] + 1j * raw[1::2]
    return GridFunction(p, k, n, vals, kind)
