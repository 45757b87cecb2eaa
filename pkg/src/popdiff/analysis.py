"""Gowers norms, pattern counting, popular-difference search, and exhaustive
equidistribution measurements for four-point matrix patterns.

Counting has two backends: exact rationals (verification) and float64
(sweeps); reports name the backend used. Equidistribution deviations are
multiplicative: max over observed cells of |observed/predicted - 1|.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import DEFAULT_GUARD
from ._grid import digit_table, encode_digits, linear_perm
from .errors import DimensionMismatch, NotAutomorphism, NotMeasurable, TooLarge
from .ffalg import FpMatrix, is_invertible, row_space_rank
from .gridfn import (
    COMPLEX,
    FLOAT,
    RATIONAL,
    GridFunction,
    GridPoint,
    QuadraticFactor,
    conditional_expectation,
    factor_image_coords,
    grid_decode,
    grid_size,
    h_coset_labels,
)
from .patterns import (
    PatternSpec,
    check_spectral,
    constraint_spaces,
    matrix_tuple_ambient,
    orth_complement,
    vector_tuple_ambient,
)

FLOAT_SLACK = 1e-9  # documented slack for float-mode threshold comparisons


# ---------------------------------------------------------------------------
# Reports


@dataclass
class PatternCountReport:
    alpha: object
    counts: dict[int, object]
    max_d: object
    argmax_d: int
    threshold: object
    threshold_hits: int
    points: int
    epsilon: float
    backend: str

    def to_json_obj(self) -> dict:
        enc = lambda v: f"{v.numerator}/{v.denominator}" if isinstance(v, Fraction) else v
        return {
            "alpha": enc(self.alpha),
            "beta_max": enc(self.max_d),
            "max_d": enc(self.max_d),
            "argmax": self.argmax_d,
            "threshold": enc(self.threshold),
            "hits": self.threshold_hits,
            "points": self.points,
            "eps": self.epsilon,
            "backend": self.backend,
        }


@dataclass
class EquidistributionReport:
    support_ok: bool
    predicted_cell_probability: Fraction
    max_multiplicative_deviation: float
    cells_observed: int
    predicted_support_size: int
    support_equal: bool
    prediction_reliable: bool = True
    extras: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        q = self.predicted_cell_probability
        return {
            "support_ok": self.support_ok,
            "support_equal": self.support_equal,
            "predicted_cell_probability": f"{q.numerator}/{q.denominator}",
            "max_multiplicative_deviation": self.max_multiplicative_deviation,
            "cells_observed": self.cells_observed,
            "predicted_support_size": self.predicted_support_size,
            "prediction_reliable": self.prediction_reliable,
            **{k: v for k, v in self.extras.items() if isinstance(v, (int, float, bool, str, list))},
        }


# ---------------------------------------------------------------------------
# Shift helpers


def _digits_of(f_or_p, m: int, index: int) -> np.ndarray:
    p = f_or_p if isinstance(f_or_p, int) else f_or_p.p
    return digit_table(p, m)[index]


def translate(f: GridFunction, shift: FpMatrix) -> np.ndarray:
    """Array of f(X + shift) indexed by X."""
    m = f.k * f.n
    digs = [shift[i, j] for i in range(f.k) for j in range(f.n)]
    # digit pos = i*n + j matches grid_encode
    T = f.tensor()
    rolled = np.roll(T, shift=tuple(-d for d in digs), axis=tuple(range(m)))
    return rolled.reshape(-1, order="F")


def _as_point(spec_p: int, k: int, n: int, d) -> FpMatrix:
    if isinstance(d, FpMatrix):
        return d
    if isinstance(d, GridPoint):
        return d.X
    return grid_decode(spec_p, k, n, int(d))


def _pattern_shift_mats(spec: PatternSpec, D: FpMatrix, points: int) -> list[FpMatrix]:
    shifts = [spec.M1.mul(D), spec.M2.mul(D)]
    if points == 4:
        shifts.append(spec.M1.add(spec.M2).mul(D))
    return shifts


# ---------------------------------------------------------------------------
# Counting


def pattern_count(f: GridFunction, spec: PatternSpec, d, points: int = 4):
    """Average over X of f(X) f(X+M1 D) f(X+M2 D) [f(X+(M1+M2) D)]."""
    if points not in (3, 4):
        raise ValueError("points must be 3 or 4")
    if f.p != spec.p:
        raise DimensionMismatch("function and pattern moduli differ")
    D = _as_point(spec.p, spec.k, f.n, d)
    if D.rows != spec.k or D.cols != f.n:
        raise DimensionMismatch("difference has wrong shape")
    prod = f.values.copy()
    for S in _pattern_shift_mats(spec, D, points):
        prod = prod * translate(f, S)
    if f.kind == RATIONAL:
        return sum(prod, Fraction(0)) / f.size
    return math.fsum(prod) / f.size


def popular_search(
    f: GridFunction,
    spec: PatternSpec,
    epsilon: float,
    points: int = 4,
    guard: int = DEFAULT_GUARD,
) -> PatternCountReport:
    """Exhaustive popular-difference report over every difference D.

    Threshold alpha^points - epsilon; the argmax over nonzero D breaks ties
    toward the smallest encoded index. Exact backend compares with strict >=;
    float backend allows the documented 1e-9 slack.
    """
    P = f.size
    if P * P > guard:
        raise TooLarge(f"p^(2kn) = {P * P} exceeds guard {guard}")
    alpha = f.mean()
    exact = f.kind == RATIONAL
    threshold = alpha**points - (Fraction(epsilon).limit_denominator(10**9) if exact else epsilon)
    counts: dict[int, object] = {}
    best_val = None
    best_idx = -1
    hits = 0
    for idx in range(P):
        beta = pattern_count(f, spec, idx, points)
        counts[idx] = beta
        if idx == 0:
            continue
        if (beta >= threshold) if exact else (beta >= threshold - FLOAT_SLACK):
            hits += 1
        if best_val is None or beta > best_val:
            best_val, best_idx = beta, idx
    return PatternCountReport(
        alpha=alpha,
        counts=counts,
        max_d=best_val,
        argmax_d=best_idx,
        threshold=threshold,
        threshold_hits=hits,
        points=points,
        epsilon=float(epsilon),
        backend="exact" if exact else "float",
    )


# ---------------------------------------------------------------------------
# Gowers norms


def _translate_vals(values: np.ndarray, p: int, m: int, h_index: int) -> np.ndarray:
    digs = digit_table(p, m)[h_index]
    T = values.reshape((p,) * m, order="F")
    return np.roll(T, shift=tuple(-int(d) for d in digs), axis=tuple(range(m))).reshape(-1, order="F")


def gowers_norm(f: GridFunction, s: int, mode: str = "recursive", guard: int = DEFAULT_GUARD) -> float:
    """Gowers U^s norm of f on the full group F_p^{kn}; U^1 is |mean|.

    mode='recursive' averages the 2^{s-1}-th power of the U^{s-1} norm of
    multiplicative derivatives; mode='direct' evaluates the expanded
    2^s-fold correlation (p^{(s+1)kn} work, guarded).
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    p, m = f.p, f.k * f.n
    vals = f.values.astype(np.complex128) if f.kind != COMPLEX else f.values
    if mode == "recursive":
        power = _gowers_power_recursive(vals, p, m, s)
    elif mode == "direct":
        if f.size ** (s + 1) > guard:
            raise TooLarge(f"p^((s+1)kn) = {f.size ** (s + 1)} exceeds guard {guard}")
        power = _gowers_power_direct(vals, p, m, s)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    power = max(power.real if isinstance(power, complex) else power, 0.0)
    return power ** (1.0 / 2**s)


def _gowers_power_recursive(vals: np.ndarray, p: int, m: int, s: int) -> float:
    if s == 1:
        return abs(vals.mean()) ** 2
    P = p**m
    total = 0.0
    for h in range(P):
        deriv = vals * np.conj(_translate_vals(vals, p, m, h))
        total += _gowers_power_recursive(deriv, p, m, s - 1)
    return total / P


def _gowers_power_direct(vals: np.ndarray, p: int, m: int, s: int) -> float:
    P = p**m
    shifted = [_translate_vals(vals, p, m, h) for h in range(P)]
    add = np.empty((P, P), dtype=np.int64)
    digs = digit_table(p, m)
    for h in range(P):
        add[h] = encode_digits(digs + digs[h], p)
    total = 0.0
    for h_tuple in itertools.product(range(P), repeat=s):
        prod = np.ones(P, dtype=np.complex128)
        for omega in itertools.product((0, 1), repeat=s):
            shift = 0
            for w, h in zip(omega, h_tuple):
                if w:
                    shift = add[shift, h]
            term = shifted[shift]
            if sum(omega) % 2:
                term = np.conj(term)
            prod = prod * term
        total += prod.mean().real
    return total / P**s


# ---------------------------------------------------------------------------
# Generalized von Neumann


def von_neumann_check(fs: list[GridFunction], autos: list[FpMatrix], slack: float = FLOAT_SLACK) -> dict:
    """lhs = |E_{X,D} prod f_i(X + A_i D)| against min_i ||f_i||_{U^{s-1}}."""
    s = len(fs)
    if s < 2 or len(autos) != s:
        raise ValueError("need s >= 2 functions with one automorphism each")
    base = fs[0]
    for f in fs:
        if (f.p, f.k, f.n) != (base.p, base.k, base.n):
            raise DimensionMismatch("functions live on different grids")
        if not f.is_one_bounded():
            raise ValueError("functions must be 1-bounded")
    for A in autos:
        if not is_invertible(A):
            raise NotAutomorphism("each A_i must be invertible")
    for A, B in itertools.combinations(autos, 2):
        if not is_invertible(A.sub(B)):
            raise NotAutomorphism("each A_i - A_j must be invertible")
    p, k, n = base.p, base.k, base.n
    P = grid_size(p, k, n)
    acc = 0.0 + 0.0j
    for d_idx in range(P):
        D = grid_decode(p, k, n, d_idx)
        prod = np.ones(P, dtype=np.complex128)
        for f, A in zip(fs, autos):
            prod = prod * translate(f, A.mul(D)).astype(np.complex128)
        acc += prod.mean()
    lhs = abs(acc / P)
    rhs = min(gowers_norm(f, s - 1) for f in fs)
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + slack, "slack": slack}


# ---------------------------------------------------------------------------
# Equidistribution reports


def _deviation(counts: np.ndarray, total: int, predicted: Fraction) -> float:
    obs = counts / total
    return float(np.max(np.abs(obs / float(predicted) - 1.0))) if len(counts) else 0.0


def linear_quadratic_distribution(
    Gamma: list, Phi: list[FpMatrix], n: int, p: int, guard: int = DEFAULT_GUARD
) -> EquidistributionReport:
    """Exact joint histogram of (r_i^T x)_i and (x^T M_i x)_i over F_p^n."""
    if p**n > guard:
        raise TooLarge(f"p^n = {p ** n} exceeds guard {guard}")
    P = p**n
    x = digit_table(p, n)
    cols = []
    for r in Gamma:
        rv = np.asarray([c % p for c in r], dtype=np.int64)
        cols.append(((x @ rv) % p)[:, None])
    for M in Phi:
        if not M.is_symmetric():
            raise DimensionMismatch("Phi entries must be symmetric")
        Mm = np.array(M.to_lists(), dtype=np.int64)
        cols.append((np.einsum("xi,ij,xj->x", x, Mm, x) % p)[:, None])
    d1, d2 = len(Gamma), len(Phi)
    coords = np.concatenate(cols, axis=1) if cols else np.zeros((P, 0), dtype=np.int64)
    cells, counts = np.unique(coords, axis=0, return_counts=True)
    rank_r = row_space_rank([[c % p for c in r] for r in Gamma], p) if Gamma else 0
    support_size = p ** (rank_r + d2)
    predicted = Fraction(1, support_size)
    # support restriction: the Gamma part must lie in the row space image
    support_ok = True
    if d1 and rank_r < d1:
        gamma_rows = [[c % p for c in r] for r in Gamma]
        # observed (a_1..a_d1) must be a consistent image: rank of [Gamma | a]
        # as a column-augmented system equals rank of Gamma^T
        gt = [list(col) for col in zip(*gamma_rows)]
        for cell in cells:
            aug = gt + [[int(v) for v in cell[:d1]]]
            if row_space_rank([list(r) for r in zip(*aug)], p) != rank_r:
                support_ok = False
                break
    return EquidistributionReport(
        support_ok=support_ok,
        predicted_cell_probability=predicted,
        max_multiplicative_deviation=_deviation(counts, P, predicted),
        cells_observed=len(cells),
        predicted_support_size=support_size,
        support_equal=len(cells) == support_size,
    )


def factor_image_distribution(factor: QuadraticFactor, k: int, guard: int = DEFAULT_GUARD) -> EquidistributionReport:
    """Histogram of the factor image map over all grid points (atom sizes)."""
    p, n = factor.p, factor.n
    if p ** (k * n) > guard:
        raise TooLarge("grid exceeds guard")
    coords = factor_image_coords(factor, k)
    cells, counts = np.unique(coords, axis=0, return_counts=True)
    d1, d2, d3 = factor.complexity
    dim = k * d1 + (k * (k + 1) // 2) * d2 + (k * (k - 1) // 2) * d3
    predicted = Fraction(1, p**dim)
    return EquidistributionReport(
        support_ok=True,
        predicted_cell_probability=predicted,
        max_multiplicative_deviation=_deviation(counts, coords.shape[0], predicted),
        cells_observed=len(cells),
        predicted_support_size=p**dim,
        support_equal=len(cells) == p**dim,
    )


def _family_slices(factor: QuadraticFactor, k: int) -> list[tuple[str, slice]]:
    """Coordinate slices of factor_image_coords by family entry."""
    out = []
    pos = 0
    for i in range(len(factor.b1)):
        out.append(("b1", slice(pos, pos + k)))
        pos += k
    sdim = k * (k + 1) // 2
    for i in range(len(factor.b2)):
        out.append(("b2", slice(pos, pos + sdim)))
        pos += sdim
    kdim = k * (k - 1) // 2
    for i in range(len(factor.b3)):
        out.append(("b3", slice(pos, pos + kdim)))
        pos += kdim
    return out


def _expand_matrix_coords(slot_cols: list[np.ndarray], k: int, p: int, kind: str) -> np.ndarray:
    """Expand packed (upper-triangle) matrix coordinates of the 4 slots into
    full k x k flattenings, shape (cells, 4 k^2)."""
    out = []
    for cols in slot_cols:
        full = np.zeros((cols.shape[0], k * k), dtype=np.int64)
        t = 0
        if kind == "b2":
            for i in range(k):
                for j in range(i, k):
                    full[:, i * k + j] = cols[:, t]
                    full[:, j * k + i] = cols[:, t]
                    t += 1
        else:
            for i in range(k):
                for j in range(i + 1, k):
                    full[:, i * k + j] = cols[:, t]
                    full[:, j * k + i] = (-cols[:, t]) % p
                    t += 1
        out.append(full)
    return np.concatenate(out, axis=1)


def _modp_rank(mat: np.ndarray, p: int) -> int:
    """Rank over F_p by vectorized elimination (few columns, many rows)."""
    A = np.array(mat, dtype=np.int64) % p
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        piv = np.nonzero(A[rank:, c])[0]
        if len(piv) == 0:
            continue
        r = rank + int(piv[0])
        A[[rank, r]] = A[[r, rank]]
        inv = pow(int(A[rank, c]), -1, p)
        A[rank] = A[rank] * inv % p
        mask = A[:, c] != 0
        mask[rank] = False
        if mask.any():
            A[mask] = (A[mask] - np.outer(A[mask, c], A[rank])) % p
        rank += 1
        if rank == min(rows, cols):
            break
    return rank


def pattern_tuple_distribution(
    factor: QuadraticFactor,
    J: FpMatrix,
    restrict_to_H: bool = False,
    guard: int = DEFAULT_GUARD,
) -> EquidistributionReport:
    """Exact joint histogram of the factor images along the pattern
    (X, X+D, X+JD, X+(I+J)D) over all (X, D), with D restricted to the
    linear-kernel subspace H when requested.

    The observed support is checked exactly against Psi^{d1} x (Lambda-perp)^{d2}
    x (LambdaPrime-perp)^{d3} (diagonal b1 blocks under the H restriction).
    When J fails the spectral gate the report is still produced with
    prediction_reliable=False and the observed support dimension recorded.
    """
    p, n = factor.p, factor.n
    k = J.rows
    P = grid_size(p, k, n)
    if P * P > guard:
        raise TooLarge(f"p^(2kn) = {P * P} exceeds guard {guard}")
    d1, d2, d3 = factor.complexity

    coords = factor_image_coords(factor, k)
    digs = digit_table(p, k * n)
    I = FpMatrix.identity(k, p)
    jperm = linear_perm(p, k, n, J.to_lists())
    ijperm = linear_perm(p, k, n, I.add(J).to_lists())

    if restrict_to_H:
        labels = h_coset_labels(factor, k)
        d_indices = np.nonzero(np.all(labels == 0, axis=1))[0]
    else:
        d_indices = np.arange(P)

    tups = []
    tup_counts = []
    total = 0
    for d in d_indices:
        shift = digs[d]
        perm1 = encode_digits(digs + shift, p)
        perm2 = encode_digits(digs + digs[jperm[d]], p)
        perm3 = encode_digits(digs + digs[ijperm[d]], p)
        tup = np.concatenate([coords, coords[perm1], coords[perm2], coords[perm3]], axis=1)
        cells, counts = np.unique(tup, axis=0, return_counts=True)
        total += P
        tups.append(cells)
        tup_counts.append(counts)
    all_cells, inverse = np.unique(np.concatenate(tups, axis=0), axis=0, return_inverse=True)
    counts_arr = np.zeros(len(all_cells), dtype=np.int64)
    np.add.at(counts_arr, inverse, np.concatenate(tup_counts))

    spaces = constraint_spaces(J)
    sym_amb = matrix_tuple_ambient(p, k, 4, "symmetric")
    skew_amb = matrix_tuple_ambient(p, k, 4, "skew")
    lam_perp = orth_complement(spaces["Lambda"], sym_amb)
    lamp_perp = orth_complement(spaces["LambdaPrime"], skew_amb)
    psi = spaces["Psi"]
    psi_perp = orth_complement(psi, vector_tuple_ambient(p, k, 4))

    spectral_ok = is_invertible(J) and check_spectral(PatternSpec(p, k, I, J))
    reliable = spectral_ok and is_invertible(I.add(J)) and is_invertible(I.sub(J))

    # membership vectorized: a tuple of images lies in the predicted space iff
    # it pairs to zero with every generator of the dual space
    ncoords = coords.shape[1]
    fam = _family_slices(factor, k)
    support_ok = True
    quad_mats = []
    for kind, sl in fam:
        slot_cols = [all_cells[:, s * ncoords + sl.start : s * ncoords + sl.stop] for s in range(4)]
        if kind == "b1":
            vecs = np.concatenate(slot_cols, axis=1)
            if restrict_to_H:
                for s in range(1, 4):
                    if not np.array_equal(slot_cols[s], slot_cols[0]):
                        support_ok = False
            elif psi_perp.dim:
                W = np.array([list(w) for w in psi_perp.basis], dtype=np.int64)
                support_ok &= bool(np.all(vecs @ W.T % p == 0))
        else:
            full = _expand_matrix_coords(slot_cols, k, p, kind)
            space = spaces["Lambda"] if kind == "b2" else spaces["LambdaPrime"]
            if kind == "b2":
                quad_mats.append(full)
            if space.dim:
                W = np.array([list(w) for w in space.basis], dtype=np.int64)
                support_ok &= bool(np.all(full @ W.T % p == 0))

    if restrict_to_H:
        support_dim = k * d1 + lam_perp.dim * d2 + lamp_perp.dim * d3
    else:
        support_dim = psi.dim * d1 + lam_perp.dim * d2 + lamp_perp.dim * d3
    predicted = Fraction(1, p**support_dim)
    observed_quad_dim = _modp_rank(np.concatenate(quad_mats, axis=0), p) if quad_mats else 0
    return EquidistributionReport(
        support_ok=support_ok,
        predicted_cell_probability=predicted,
        max_multiplicative_deviation=_deviation(counts_arr, total, predicted),
        cells_observed=len(all_cells),
        predicted_support_size=p**support_dim,
        support_equal=support_ok and len(all_cells) == p**support_dim,
        prediction_reliable=reliable,
        extras={
            "spectral_ok": spectral_ok,
            "restricted_to_H": restrict_to_H,
            "observed_quad_support_dim": observed_quad_dim,
            "lambda_perp_dim": lam_perp.dim,
            "lambda_prime_perp_dim": lamp_perp.dim,
            "psi_dim": psi.dim,
        },
    )


def abstract_atom_distribution(
    factor: QuadraticFactor, k: int, guard: int = DEFAULT_GUARD
) -> EquidistributionReport:
    """Exact joint histogram of (B(X), B(D), (X M_i D^T)_i, (X N_j D^T)_j)."""
    p, n = factor.p, factor.n
    P = grid_size(p, k, n)
    if P * P > guard:
        raise TooLarge(f"p^(2kn) = {P * P} exceeds guard {guard}")
    d1, d2, d3 = factor.complexity
    coords = factor_image_coords(factor, k)
    X = digit_table(p, k * n).reshape(P, k, n)
    cross = []
    for M in list(factor.b2) + list(factor.b3):
        Mm = np.array(M.to_lists(), dtype=np.int64)
        cross.append(np.einsum("xan,nm,ybm->xyab", X, Mm, X) % p)  # X M D^T
    cell_counts: dict[bytes, int] = {}
    for d in range(P):
        parts = [coords, np.broadcast_to(coords[d], coords.shape)]
        for arr in cross:
            parts.append(arr[:, d].reshape(P, k * k))
        tup = np.concatenate(parts, axis=1)
        cells, counts = np.unique(tup, axis=0, return_counts=True)
        for cell, cnt in zip(cells, counts):
            key = cell.tobytes()
            cell_counts[key] = cell_counts.get(key, 0) + int(cnt)
    dim = 2 * k * d1 + (2 * (k * (k + 1) // 2) + k * k) * d2 + (2 * (k * (k - 1) // 2) + k * k) * d3
    predicted = Fraction(1, p**dim)
    counts_arr = np.array(list(cell_counts.values()), dtype=np.int64)
    return EquidistributionReport(
        support_ok=True,
        predicted_cell_probability=predicted,
        max_multiplicative_deviation=_deviation(counts_arr, P * P, predicted),
        cells_observed=len(cell_counts),
        predicted_support_size=p**dim,
        support_equal=len(cell_counts) == p**dim,
    )


# ---------------------------------------------------------------------------
# Structured pattern average (the positivity chain, instantiated)


def structured_pattern_average(
    f: GridFunction, factor: QuadraticFactor, J: FpMatrix, guard: int = DEFAULT_GUARD
) -> dict:
    """lhs = E_{X,D} f(X) f(X+D) f(X+JD) f(X+(I+J)D) 1_H(D), exactly, against
    the bound p^{-k d1} (E f)^4 (1 - tol); tol is derived from the measured
    multiplicative deviation of the restricted pattern-tuple distribution."""
    p, n, k = f.p, f.n, f.k
    if factor.p != p or factor.n != n or J.rows != k:
        raise DimensionMismatch("factor / pattern shape mismatch")
    if f.kind not in (RATIONAL, FLOAT):
        raise ValueError("f must be [0,1]-valued rational or float")
    proj = conditional_expectation(f, factor)
    if f.kind == RATIONAL:
        if any(a != b for a, b in zip(proj.values, f.values)):
            raise NotMeasurable("f is not constant on the atoms of the factor")
    else:
        if not np.allclose(proj.values.astype(float), f.values.astype(float), atol=1e-10):
            raise NotMeasurable("f is not constant on the atoms of the factor")
    P = f.size
    if P * P > guard:
        raise TooLarge("pair enumeration exceeds guard")
    labels = h_coset_labels(factor, k)
    d_indices = np.nonzero(np.all(labels == 0, axis=1))[0]
    I = FpMatrix.identity(k, p)
    digs = digit_table(p, k * n)
    jperm = linear_perm(p, k, n, J.to_lists())
    ijperm = linear_perm(p, k, n, I.add(J).to_lists())
    exact = f.kind == RATIONAL
    acc = Fraction(0) if exact else 0.0
    for d in d_indices:
        perm1 = encode_digits(digs + digs[d], p)
        perm2 = encode_digits(digs + digs[jperm[d]], p)
        perm3 = encode_digits(digs + digs[ijperm[d]], p)
        prod = f.values * f.values[perm1] * f.values[perm2] * f.values[perm3]
        acc += sum(prod, Fraction(0)) if exact else math.fsum(prod)
    lhs = acc / (P * P)
    d1 = len(factor.b1)
    dev = pattern_tuple_distribution(factor, J, restrict_to_H=True, guard=guard).max_multiplicative_deviation
    tol = min(0.9, 4.0 * dev)
    mean = f.mean()
    if exact:
        bound = Fraction(1, p ** (k * d1)) * mean**4 * (1 - Fraction(tol).limit_denominator(10**9))
    else:
        bound = (1.0 / p ** (k * d1)) * mean**4 * (1.0 - tol)
    return {"lhs": lhs, "bound": bound, "tol": tol, "deviation": dev, "holds": lhs >= bound}
