"""The rotated-squares counterexample pipeline over F_5.

Stages: exact verification of the generic-direction core (the 73/5^5 table),
the unique-triangle hypergraphon dressing that kills linearly dependent
directions, and the random-affine assembly that kills axis directions.
Exact rational arithmetic for everything certifiable; seeded Monte Carlo
(with standard errors reported) for the asymptotic-only content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import DEFAULT_GUARD
from ._grid import digit_table
from .errors import DependentDirections, TooLarge
from .ffalg import FpMatrix, mat_inverse, nullspace, row_space_rank
from .gridfn import FLOAT, GridFunction
from .patterns import PatternSpec, SubspaceBasis
from .analysis import EquidistributionReport, FLOAT_SLACK

P5 = 5

# the 10-point core set in F_5^2 and the vectors cutting out its 5-dim support
S_POINTS = ((0, 2), (0, 3), (0, 4), (1, 0), (1, 3), (1, 4), (2, 1), (2, 2), (3, 0), (3, 1))
LAMBDA2_ORTHO = (
    (1, 0, -1, 0, -1, 0, 1, 0),
    (0, 1, 0, -1, 0, -1, 0, 1),
    (1, 0, -3, 0, 3, 0, -1, 0),
)
REMARK_VECTOR = (0, 0, 0, 1, 0, -4, 0, -3)

# diagonalized pattern: (x,y), (x+a,y+b), (x+2a,y-2b), (x+3a,y-b)
SHIFT_COEFFS = ((0, 0), (1, 1), (2, -2), (3, -1))

# F2 and F3 table-index maps: coefficients (alpha, beta) of alpha*x + beta*y
F2_COMBOS = ((-1, -1), (-2, 2), (2, 1))
F3_COMBOS = ((-1, -2), (-2, -1), (2, 2))


@dataclass(frozen=True)
class CexCore:
    S: tuple[tuple[int, int], ...]
    g1: np.ndarray  # 5x5 0/1 table, g1[u, v]
    Lambda2: SubspaceBasis

    def __post_init__(self):
        assert len(self.S) == 10


def build_core() -> CexCore:
    g1 = np.zeros((5, 5), dtype=np.int64)
    for u, v in S_POINTS:
        g1[u, v] = 1
    g1.setflags(write=False)
    ortho_rows = [[x % P5 for x in v] for v in LAMBDA2_ORTHO]
    basis = nullspace(ortho_rows, P5, ncols=8)
    lam2 = SubspaceBasis(P5, 8, tuple(tuple(v) for v in basis), "eight-tuples")
    assert lam2.dim == 5
    assert lam2.contains(REMARK_VECTOR)
    return CexCore(S_POINTS, g1, lam2)


def lambda2_points(core: CexCore) -> np.ndarray:
    """All 5^5 points of the support subspace, shape (3125, 8)."""
    coeffs = digit_table(P5, 5)
    basis = np.array([list(v) for v in core.Lambda2.basis], dtype=np.int64)
    return (coeffs @ basis) % P5


def core_expectation_table(core: CexCore) -> dict:
    """Exact per-shift averages of the four-fold g1 product over the support
    subspace; the sup over shifts is the generic-direction pattern density."""
    pts = lambda2_points(core)
    g1 = core.g1
    table: dict[int, Fraction] = {}
    for aa in range(5):
        vals = (
            g1[pts[:, 0], pts[:, 1]]
            * g1[(pts[:, 2] + aa) % 5, pts[:, 3]]
            * g1[(pts[:, 4] + 4 * aa) % 5, pts[:, 5]]
            * g1[(pts[:, 6] + 9 * aa) % 5, pts[:, 7]]
        )
        table[aa] = Fraction(int(vals.sum()), len(pts))
    sup = max(table.values())
    argmax = max(table, key=lambda a: (table[a], -a))
    mean_g1 = Fraction(int(core.g1.sum()), 25)
    return {
        "table": table,
        "sup": sup,
        "argmax": argmax,
        "mean_g1": mean_g1,
        "strict": sup < mean_g1**4,
    }


# ---------------------------------------------------------------------------
# Diagonalization of the rotated-squares pattern


def diagonalize_rotated_square() -> dict:
    """The change of variables (x,y) -> (x-2y, x+2y) turning rotated squares
    into the diagonal pattern with matrices (I, diag(2,-2)); returns the
    diagonalized PatternSpec plus the exact identity checks."""
    p = P5
    gamma = FpMatrix.from_rows([[1, -2], [1, 2]], p)
    # matrix reproducing the third point (x+b, y-a) of the rotated square
    m2_pattern = FpMatrix.from_rows([[0, 1], [-1, 0]], p)
    diag = FpMatrix.from_rows([[2, 0], [0, -2]], p)
    conj = gamma.mul(m2_pattern).mul(mat_inverse(gamma))
    # second coordinates of the diagonal pattern are y, y+b, y-2b, y-b
    mults = [cy % p for _, cy in SHIFT_COEFFS]
    spec = PatternSpec(p, 2, FpMatrix.identity(2, p), diag)
    return {
        "spec": spec,
        "gamma": gamma,
        "gamma_invertible": True,
        "conjugation_identity": conj == diag,
        "second_coordinate_multipliers": tuple(mults),
        "second_coordinates_ok": tuple(mults) == (0, 1, (-2) % p, (-1) % p),
        "negated_matrix_conjugate": gamma.mul(m2_pattern.neg()).mul(mat_inverse(gamma)).to_lists(),
    }


# ---------------------------------------------------------------------------
# f1 and the eight-tuple distribution


def _digit_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    digs = digit_table(P5, n)
    pows = P5 ** np.arange(n, dtype=np.int64)
    return digs, pows


def f1_matrix(core: CexCore, n: int, guard: int = DEFAULT_GUARD) -> np.ndarray:
    """f1 as a (5^n, 5^n) 0/1 matrix indexed by (x index, y index)."""
    if 5 ** (2 * n) > guard:
        raise TooLarge(f"5^(2n) = {5 ** (2 * n)} exceeds guard {guard}")
    digs, _ = _digit_arrays(n)
    xx = np.einsum("xi,xi->x", digs, digs) % 5
    xy = (digs @ digs.T) % 5
    return core.g1[xx[:, None], xy].astype(np.uint8)


def build_f1(core: CexCore, n: int, guard: int = DEFAULT_GUARD) -> GridFunction:
    """f1(x, y) = g1(x.x, x.y) as a grid function on (F_5^n)^2."""
    F = f1_matrix(core, n, guard)
    # grid index for k=2 is ix + 5^n * iy
    values = F.T.reshape(-1).astype(np.float64)
    return GridFunction(5, 2, n, values, FLOAT, guard=guard)


def f1_exact_mean(core: CexCore, n: int, guard: int = DEFAULT_GUARD) -> Fraction:
    F = f1_matrix(core, n, guard)
    return Fraction(int(F.sum()), F.size)


def _add_perm(n: int, vec: np.ndarray) -> np.ndarray:
    digs, pows = _digit_arrays(n)
    return ((digs + vec) % 5) @ pows


def f1_pattern_count_exact(core: CexCore, n: int, a, b, guard: int = DEFAULT_GUARD) -> Fraction:
    """beta_1(a, b): exact four-point density of f1 at the difference (a, b)."""
    F = f1_matrix(core, n, guard)
    a = np.asarray(a, dtype=np.int64) % 5
    b = np.asarray(b, dtype=np.int64) % 5
    count = _pattern_count_matrix(F, n, a, b)
    return Fraction(count, F.size)


def _pattern_count_matrix(F: np.ndarray, n: int, a: np.ndarray, b: np.ndarray) -> int:
    prod = F.astype(np.int64)
    for cx, cy in SHIFT_COEFFS[1:]:
        px = _add_perm(n, (cx * a) % 5)
        py = _add_perm(n, (cy * b) % 5)
        prod = prod * F[px][:, py]
    return int(prod.sum())


def eight_tuple_distribution(a, b, n: int, guard: int = DEFAULT_GUARD) -> EquidistributionReport:
    """Exact histogram of the eight quadratic/bilinear values along the
    diagonal pattern, for fixed independent directions a, b.

    The support is checked exactly against the predicted coset of the
    five-dimensional subspace; the report also records whether every coset
    point is attained and whether the observed points affinely span it.
    """
    core = build_core()
    a = np.asarray(a, dtype=np.int64) % 5
    b = np.asarray(b, dtype=np.int64) % 5
    if len(a) != n or len(b) != n:
        raise DependentDirections("direction vectors must have length n")
    if not a.any() or not b.any() or row_space_rank([list(a), list(b)], 5) < 2:
        raise DependentDirections("a, b must be nonzero and not multiples of each other")
    if 5 ** (2 * n) > guard:
        raise TooLarge(f"5^(2n) = {5 ** (2 * n)} exceeds guard {guard}")
    digs, _ = _digit_arrays(n)
    P = 5**n
    la = (digs @ a) % 5
    lb = (digs @ b) % 5
    q = np.einsum("xi,xi->x", digs, digs) % 5
    va_y = (digs @ a) % 5  # a . y as y ranges
    # joint histogram of the five primitive forms (x.a, x.b, x.x, x.y, a.y)
    hist = np.zeros(5**5, dtype=np.int64)
    base3 = (la * 5 + lb) * 5 + q
    for xi in range(P):
        u = (digs[xi] @ digs.T) % 5  # x.y over all y
        codes = base3[xi] * 25 + u * 5 + va_y
        hist += np.bincount(codes, minlength=5**5)
    cells5 = np.nonzero(hist)[0]
    counts = hist[cells5]

    aa = int(a @ a % 5)
    ab = int(a @ b % 5)
    # map observed 5-tuples (s, t, q, u, v) to the 8-tuple
    s_ = cells5 // (5**4) % 5
    t_ = cells5 // (5**3) % 5
    q_ = cells5 // (5**2) % 5
    u_ = cells5 // 5 % 5
    v_ = cells5 % 5
    T = np.stack(
        [
            q_,
            u_,
            (q_ + 2 * s_ + aa) % 5,
            (u_ + t_ + v_ + ab) % 5,
            (q_ + 4 * s_ + 4 * aa) % 5,
            (u_ - 2 * t_ + 2 * v_ - 4 * ab) % 5,
            (q_ + 6 * s_ + 9 * aa) % 5,
            (u_ - t_ + 3 * v_ - 3 * ab) % 5,
        ],
        axis=1,
    )
    base8 = np.array([0, 0, aa, ab, 4 * aa % 5, -4 * ab % 5, 9 * aa % 5, -3 * ab % 5]) % 5
    ortho = np.array([[x % 5 for x in w] for w in LAMBDA2_ORTHO], dtype=np.int64)
    support_ok = bool(np.all((T - base8) @ ortho.T % 5 == 0))
    # affine hull of the observed tuples
    diffs = (T - T[0]) % 5
    hull_dim = row_space_rank([list(map(int, r)) for r in diffs], 5)
    predicted = Fraction(1, 5**5)
    return EquidistributionReport(
        support_ok=support_ok,
        predicted_cell_probability=predicted,
        max_multiplicative_deviation=_max_dev(counts, 5 ** (2 * n), predicted),
        cells_observed=len(cells5),
        predicted_support_size=5**5,
        support_equal=support_ok and len(cells5) == 5**5,
        extras={
            "hull_dim": hull_dim,
            "hull_equal": support_ok and hull_dim == 5,
            "missing_cells": 5**5 - len(cells5),
        },
    )


def _max_dev(counts: np.ndarray, total: int, predicted: Fraction) -> float:
    obs = counts / total
    return float(np.max(np.abs(obs / float(predicted) - 1.0))) if len(counts) else 0.0


# ---------------------------------------------------------------------------
# Progression-free sets and the hypergraphon


def is_3ap_free(s, L: int) -> bool:
    """No x, t with t != 0 and x, x+t, x+2t all in s (progressions mod L)."""
    ss = set(v % L for v in s)
    for x in ss:
        for t in range(1, L):
            if (x + t) % L in ss and (x + 2 * t) % L in ss:
                return False
    return True


def ap3_free_set(L: int, method: str = "greedy") -> tuple[int, ...]:
    """A 3-AP-free subset of Z/LZ; 'exhaustive-max' is a maximum one (L <= 30),
    'behrend' uses the digit-sphere construction inside [0, L/2)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if method == "greedy":
        out: list[int] = []
        for v in range(L):
            if is_3ap_free(out + [v], L):
                out.append(v)
        result = tuple(out)
    elif method == "exhaustive-max":
        if L > 30:
            raise TooLarge("exhaustive-max supports L <= 30")
        result = tuple(_max_ap3_free(L))
    elif method == "behrend":
        result = tuple(_behrend_set(L))
    else:
        raise ValueError(f"unknown method {method!r}")
    assert is_3ap_free(result, L)
    return result


def _max_ap3_free(L: int) -> list[int]:
    """Branch and bound over elements in increasing order."""
    best: list[int] = []

    def extend(start: int, chosen: list[int]):
        nonlocal best
        if len(chosen) + (L - start) <= len(best):
            return
        if start == L:
            if len(chosen) > len(best):
                best = list(chosen)
            return
        chosen.append(start)
        if is_3ap_free(chosen, L):
            extend(start + 1, chosen)
        chosen.pop()
        extend(start + 1, chosen)

    extend(0, [])
    return best


def _behrend_set(L: int) -> list[int]:
    """Digit-sphere set inside [0, ceil(L/2)): no mod-L 3-AP since sums stay
    below L."""
    half = (L + 1) // 2
    best: list[int] = [0] if half else []
    for d in range(2, 8):
        base = 2 * d - 1
        m = 1
        while base ** (m + 1) <= half:
            m += 1
        if base**m > half:
            continue
        from collections import defaultdict

        spheres = defaultdict(list)
        for val in range(base**m):
            digits = []
            t = val
            ok = True
            for _ in range(m):
                digits.append(t % base)
                if t % base >= d:
                    ok = False
                    break
                t //= base
            if not ok:
                continue
            spheres[sum(x * x for x in digits)].append(val)
        for sphere in spheres.values():
            cand = [v for v in sphere if v < half]
            if len(cand) > len(best):
                best = cand
    return sorted(best)


@dataclass(frozen=True)
class Hypergraphon:
    """Tripartite cell indicator built from a 3-AP-free set: the cells
    (s, s+t, s+2t) mod L for t in the set; every edge lies in a unique
    triangle."""

    L: int
    lam: tuple[int, ...]

    def __post_init__(self):
        if not is_3ap_free(self.lam, self.L):
            raise ValueError("the difference set must be 3-AP-free mod L")

    @property
    def tensor(self) -> np.ndarray:
        G = np.zeros((self.L, self.L, self.L), dtype=np.int64)
        for s in range(self.L):
            for t in self.lam:
                G[s, (s + t) % self.L, (s + 2 * t) % self.L] = 1
        return G

    def g2_values(self, cu: np.ndarray, cv: np.ndarray, cw: np.ndarray) -> np.ndarray:
        return self.tensor[cu, cv, cw]

    def cells(self, u: np.ndarray) -> np.ndarray:
        return np.floor(self.L * u).astype(np.int64) % self.L


def unique_triangle_check(h: Hypergraphon) -> bool:
    """Every edge of each bipartite part has exactly one completing vertex."""
    L, lam = h.L, set(h.lam)
    lam2 = set((2 * t) % L for t in h.lam)
    for s in range(L):
        for t in h.lam:
            u, v = s, (s + t) % L
            # UV edge: w with v-w ... w - v in lam and w - u in 2*lam
            comps = [w for w in range(L) if (w - v) % L in lam and (w - u) % L in lam2]
            if len(comps) != 1:
                return False
            v2, w2 = s, (s + t) % L
            # VW edge: u with v2 - u in lam and w2 - u in 2*lam
            comps = [uu for uu in range(L) if (v2 - uu) % L in lam and (w2 - uu) % L in lam2]
            if len(comps) != 1:
                return False
            u3, w3 = s, (s + 2 * t) % L
            # UW edge: v with v - u3 in lam and w3 - v in lam
            comps = [vv for vv in range(L) if (vv - u3) % L in lam and (w3 - vv) % L in lam]
            if len(comps) != 1:
                return False
    return True


# four-cell patterns arising from the dependent-direction collisions
_PATTERN_SUBSCRIPTS = {
    "A": "avc,bvd,aef,bec->",
    "B": "avc,bef,bgc,hvf->",
    "C": "avc,aef,bvf,beh->",
    "D": "avc,bec,def,ahf->",
}


def hypergraph_expectations(h: Hypergraphon) -> dict:
    """Exact mean and four-cell pattern expectations of the hypergraphon.

    mean = |lam| / L^2; the unique-triangle-forced pattern equals
    |lam| / L^6 exactly; the loose pattern is at most L^{-4}.
    """
    if h.L > 30:
        raise TooLarge("exact pattern enumeration supports L <= 30")
    G = h.tensor
    L = h.L
    mean = Fraction(int(G.sum()), L**3)
    table: dict[str, Fraction] = {}
    for name, sub in _PATTERN_SUBSCRIPTS.items():
        nvars = len(set(sub.replace(",", "").replace("->", "")))
        cnt = int(np.einsum(sub, G, G, G, G, optimize=True))
        table[name] = Fraction(cnt, L**nvars)
    patternA = table["A"]
    patternB = table["B"]
    return {
        "L": L,
        "lam": list(h.lam),
        "mean_g2": mean,
        "patternA": patternA,
        "patternA_expected": Fraction(len(h.lam), L**6),
        "patternA_matches": patternA == Fraction(len(h.lam), L**6),
        "patternB": patternB,
        "patternB_bound_holds": patternB <= Fraction(1, L**4),
        "unique_triangles_ok": unique_triangle_check(h),
        "pattern_table": table,
    }


# ---------------------------------------------------------------------------
# Dressing


@dataclass(frozen=True)
class DressingParams:
    seed: int
    n: int
    L: int
    gamma: int

    def __post_init__(self):
        if not (1 <= self.gamma <= self.n):
            raise ValueError("gamma must satisfy 1 <= gamma <= n")

    @property
    def beta(self) -> Fraction:
        return Fraction(3, 5) ** self.gamma


def _uniform_table(master_seed: int, seed_index: int, table_id: int, size: int) -> np.ndarray:
    rng = np.random.default_rng([int(master_seed), int(seed_index), int(table_id)])
    return rng.random(size)


def _combo_index(n: int, alpha: int, beta: int) -> np.ndarray:
    """(P, P) array of indices of alpha*x + beta*y over all (x, y)."""
    digs, pows = _digit_arrays(n)
    comb = (alpha * digs[:, None, :] + beta * digs[None, :, :]) % 5
    return comb @ pows


def dressed_h_matrix(core: CexCore, h: Hypergraphon, n: int, master_seed: int, seed_index: int,
                     guard: int = DEFAULT_GUARD) -> np.ndarray:
    """One sample of h = f1 * F2 * F3 as a (5^n, 5^n) 0/1 matrix."""
    if 5 ** (2 * n) > guard:
        raise TooLarge("grid exceeds guard")
    P = 5**n
    F = f1_matrix(core, n, guard)
    out = F.copy()
    for block, combos in enumerate((F2_COMBOS, F3_COMBOS)):
        vals = []
        for tid, (alpha, beta) in enumerate(combos):
            tab = _uniform_table(master_seed, seed_index, 3 * block + tid, P)
            cells = h.cells(tab)
            vals.append(cells[_combo_index(n, alpha, beta)])
        out = out * h.g2_values(vals[0], vals[1], vals[2]).astype(np.uint8)
    return out


def _class_offsets():
    """Table-index offsets (coefficient pairs on (a, b)) for the four pattern
    points, per table family."""
    offs = {"X": [], "Y": [], "Z": [], "Xp": [], "Yp": [], "Zp": []}
    for cx, cy in SHIFT_COEFFS:
        offs["X"].append((-cx, -cy))
        offs["Y"].append((-2 * cx, 2 * cy))
        offs["Z"].append((2 * cx, cy))
        offs["Xp"].append((-cx, -2 * cy))
        offs["Yp"].append((-2 * cx, -cy))
        offs["Zp"].append((2 * cx, 2 * cy))
    return offs


def class_pattern_expectations(h: Hypergraphon, lam_class) -> tuple[Fraction, Fraction]:
    """Exact expectations of the two four-fold g2 products for difference
    class b = lam_class * a (lam_class in F_5, or the symbols 'a0'/'0b'),
    derived from the table-index collision structure."""
    offs = _class_offsets()

    def scalar_offset(pair):
        ca, cb = pair
        if lam_class == "a0":
            return ca % 5  # b = 0: offsets are multiples of a
        if lam_class == "0b":
            return cb % 5  # a = 0
        return (ca + cb * lam_class) % 5

    G = h.tensor
    out = []
    for fams in (("X", "Y", "Z"), ("Xp", "Yp", "Zp")):
        letters = {}
        subs = []
        alphabet = iter("abcdefghijklmnopqrstuvwx")
        for t in range(4):
            term = ""
            for fam in fams:
                key = (fam, scalar_offset(offs[fam][t]))
                if key not in letters:
                    letters[key] = next(alphabet)
                term += letters[key]
            subs.append(term)
        nvars = len(letters)
        cnt = int(np.einsum(",".join(subs) + "->", G, G, G, G, optimize=True))
        out.append(Fraction(cnt, h.L**nvars))
    return out[0], out[1]


def dress_and_measure(
    core: CexCore,
    h: Hypergraphon,
    n: int,
    seeds: int,
    master_seed: int,
    differences: list | None = None,
    guard: int = DEFAULT_GUARD,
) -> dict:
    """Monte Carlo means (with standard errors) of alpha_h and beta_h over
    seeded dressings, against the exact product-formula predictions.

    Differences are (label, a, b) triples; the default list has one generic
    pair plus one representative of each dependency class b = lambda * a,
    b = 0, and a = 0. The within-3-SE comparison carries the documented
    1e-9 absolute slack: at desk scale several predictions are below the
    per-seed resolution and the honest measured value is exactly zero.
    """
    P = 5**n
    exps = hypergraph_expectations(h)
    mean_g2 = exps["mean_g2"]
    if differences is None:
        a = np.zeros(n, dtype=np.int64)
        a[0] = 1
        b = np.zeros(n, dtype=np.int64)
        b[1 % n] = 1
        differences = [("generic", a, b)]
        for lam in (1, 2, 3, 4):
            differences.append((f"b={lam}a", a, (lam * a) % 5))
        differences.append(("b=0", a, np.zeros(n, dtype=np.int64)))
        differences.append(("a=0", np.zeros(n, dtype=np.int64), b))

    alphas = []
    betas = {label: [] for label, _, _ in differences}
    for sidx in range(seeds):
        hm = dressed_h_matrix(core, h, n, master_seed, sidx, guard)
        alphas.append(hm.sum() / hm.size)
        for label, a, b in differences:
            betas[label].append(_pattern_count_matrix(hm, n, np.asarray(a) % 5, np.asarray(b) % 5) / hm.size)

    def mc(vals):
        arr = np.asarray(vals, dtype=np.float64)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        return float(arr.mean()), se

    alpha_mean, alpha_se = mc(alphas)
    alpha_pred = f1_exact_mean(core, n) * mean_g2**2
    report = {
        "n": n,
        "L": h.L,
        "seeds": seeds,
        "master_seed": master_seed,
        "alpha": {
            "measured": alpha_mean,
            "se": alpha_se,
            "predicted": float(alpha_pred),
            "within": abs(alpha_mean - float(alpha_pred)) <= 3 * alpha_se + FLOAT_SLACK,
            "series": [float(a) for a in alphas],
        },
        "differences": [],
    }
    for label, a, b in differences:
        beta1 = f1_pattern_count_exact(core, n, a, b, guard)
        if label == "generic":
            factor = mean_g2**8
        elif label == "b=0":
            e1, e2 = class_pattern_expectations(h, "a0")
            factor = e1 * e2
        elif label == "a=0":
            e1, e2 = class_pattern_expectations(h, "0b")
            factor = e1 * e2
        else:
            lam = int(label.split("=")[1].rstrip("a"))
            e1, e2 = class_pattern_expectations(h, lam)
            factor = e1 * e2
        pred = beta1 * factor
        m, se = mc(betas[label])
        report["differences"].append(
            {
                "label": label,
                "a": [int(x) for x in np.asarray(a) % 5],
                "b": [int(x) for x in np.asarray(b) % 5],
                "measured": m,
                "se": se,
                "predicted": float(pred),
                "beta1_exact": f"{beta1.numerator}/{beta1.denominator}",
                "within": abs(m - float(pred)) <= 3 * se + FLOAT_SLACK,
                "series": [float(x) for x in betas[label]],
            }
        )
    return report


# ---------------------------------------------------------------------------
# Final assembly


def has_nontrivial_4ap(digits: tuple[int, ...], p: int = 5) -> bool:
    dset = set(digits)
    for x in range(p):
        for t in range(1, p):
            if all((x + i * t) % p in dset for i in range(4)):
                return True
    return False


def _random_affine(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform invertible affine map of F_5^n by rejection; returns (A, A^{-1}, c)."""
    while True:
        A = rng.integers(0, 5, size=(n, n))
        M = FpMatrix.from_rows(A.tolist(), 5)
        try:
            Minv = mat_inverse(M)
        except Exception:
            continue
        c = rng.integers(0, 5, size=n)
        return A, np.array(Minv.to_lists(), dtype=np.int64), c


def _membership_masks(n: int, gamma: int, master_seed: int, seed_index: int) -> tuple[np.ndarray, np.ndarray]:
    """mask1[ix, iy] = [x in phi(y) T], mask2[ix, iy] = [y in phi'(x) T]."""
    P = 5**n
    digs, _ = _digit_arrays(n)
    masks = []
    for which, table_id in (("phi", 101), ("phiprime", 102)):
        mask = np.zeros((P, P), dtype=np.uint8)
        for g in range(P):
            rng = np.random.default_rng([int(master_seed), int(seed_index), table_id, g])
            _, Ainv, c = _random_affine(rng, n)
            w = (Ainv @ (digs.T - c[:, None])) % 5  # (n, P): preimages of all points
            member = np.all(w[:gamma, :] < 3, axis=0)
            mask[:, g] = member
        masks.append(mask)
    # mask for x in phi(y)T is indexed [x, y]; phi' mask needs transposing
    return masks[0], masks[1].T


def final_assembly(
    core: CexCore,
    h: Hypergraphon,
    params: DressingParams,
    seed_index: int = 0,
    guard: int = DEFAULT_GUARD,
) -> dict:
    """One seeded end-to-end sample: f = h * [x in phi(y)T] * [y in phi'(x)T],
    with the exact subchecks on the digit set {0,1,2} and the 4.15 exponent."""
    n, gamma = params.n, params.gamma
    hm = dressed_h_matrix(core, h, n, params.seed, seed_index, guard)
    m1, m2 = _membership_masks(n, gamma, params.seed, seed_index)
    fm = hm * m1 * m2
    P = 5**n
    alpha_f = fm.sum() / fm.size
    beta = float(params.beta)
    exponent = math.log(25 / 3) / math.log(5 / 3)
    subchecks = {
        "digit_set_4ap_free": not has_nontrivial_4ap((0, 1, 2)),
        "exponent_value": exponent,
        "exponent_ok": exponent >= 4.15,
        "gamma_bound_ok": all((3 / 25) ** g <= ((3 / 5) ** g) ** 4.15 for g in range(1, 13)),
    }
    sparse = sparse_pattern_max(fm, n)
    return {
        "n": n,
        "gamma": gamma,
        "L": h.L,
        "seed": params.seed,
        "seed_index": seed_index,
        "alpha_f": float(alpha_f),
        "alpha_h": float(hm.sum() / hm.size),
        "beta_T": beta,
        "support_size": int(fm.sum()),
        "subchecks": subchecks,
        "max_nonzero_beta": sparse["max_beta"],
        "argmax_ab": sparse["argmax"],
        "max_ratio_to_alpha4": (sparse["max_beta"] / alpha_f**4) if alpha_f > 0 else float("inf"),
    }


def sparse_pattern_max(fm: np.ndarray, n: int, chunk_pairs: int = 2_000_000) -> dict:
    """Exhaustive max over nonzero differences (a, b) of the pattern count of
    the 0/1 matrix fm, via enumeration of support-point pairs (the first two
    pattern points determine (a, b), and membership of the other two points
    is checked against the support set). Pairs are processed in chunks so a
    dense support stays within memory."""
    P = 5**n
    xs, ys = np.nonzero(fm)
    K = len(xs)
    if K == 0:
        return {"max_beta": 0.0, "argmax": None, "support": 0}
    digs, pows = _digit_arrays(n)
    packed = np.sort(xs.astype(np.int64) * P + ys.astype(np.int64))
    hit_codes: dict[int, int] = {}
    rows_per_chunk = max(1, chunk_pairs // K)
    for start in range(0, K, rows_per_chunk):
        sel = np.arange(start, min(start + rows_per_chunk, K))
        idx1 = np.repeat(sel, K)
        idx2 = np.tile(np.arange(K), len(sel))
        x1, y1 = xs[idx1], ys[idx1]
        x2, y2 = xs[idx2], ys[idx2]
        da = (digs[x2] - digs[x1]) % 5
        db = (digs[y2] - digs[y1]) % 5
        nonzero = (da.any(axis=1)) | (db.any(axis=1))
        x1, y1, da, db = x1[nonzero], y1[nonzero], da[nonzero], db[nonzero]
        if len(x1) == 0:
            continue
        p3 = (((digs[x1] + 2 * da) % 5) @ pows) * P + ((digs[y1] - 2 * db) % 5) @ pows
        p4 = (((digs[x1] + 3 * da) % 5) @ pows) * P + ((digs[y1] - db) % 5) @ pows
        ok = np.isin(p3, packed) & np.isin(p4, packed)
        if not ok.any():
            continue
        codes = (da[ok] @ pows) * P + (db[ok] @ pows)
        vals, counts = np.unique(codes, return_counts=True)
        for v, c in zip(vals, counts):
            hit_codes[int(v)] = hit_codes.get(int(v), 0) + int(c)
    if not hit_codes:
        return {"max_beta": 0.0, "argmax": None, "support": K}
    best_code = max(hit_codes, key=lambda v: (hit_codes[v], -v))
    a_idx, b_idx = best_code // P, best_code % P
    return {
        "max_beta": float(hit_codes[best_code] / (P * P)),
        "argmax": [list(map(int, digs[a_idx])), list(map(int, digs[b_idx]))],
        "support": K,
    }


def cex_report(params: DressingParams, seeds: int = 50, guard: int = DEFAULT_GUARD) -> dict:
    """End-to-end report: exact certified inequalities (core table, hypergraph
    identities, digit-set subchecks) plus the per-seed exhaustive max of
    beta(a, b) / alpha^4 for the assembled function.

    The absolute constant of the no-popular-difference statement is labelled
    not certified: it needs L and gamma beyond desk scale."""
    core = build_core()
    lam = ap3_free_set(params.L, "exhaustive-max" if params.L <= 13 else "greedy")
    h = Hypergraphon(params.L, lam)
    table = core_expectation_table(core)
    exps = hypergraph_expectations(h)
    below = 0
    ratios = []
    alphas = []
    for sidx in range(seeds):
        rep = final_assembly(core, h, params, sidx, guard)
        ratios.append(rep["max_ratio_to_alpha4"])
        alphas.append(rep["alpha_f"])
        if rep["max_ratio_to_alpha4"] < 1.0:
            below += 1
    return {
        "params": {"n": params.n, "L": params.L, "gamma": params.gamma, "seed": params.seed},
        "seeds": seeds,
        "certified": {
            "core_sup": f"{table['sup'].numerator}/{table['sup'].denominator}",
            "core_mean": f"{table['mean_g1'].numerator}/{table['mean_g1'].denominator}",
            "core_ratio_num_den": [73, 80],
            "core_strict": table["strict"],
            "hypergraph_patternA_matches": exps["patternA_matches"],
            "hypergraph_patternB_bound": exps["patternB_bound_holds"],
            "unique_triangles": exps["unique_triangles_ok"],
            "digit_set_4ap_free": not has_nontrivial_4ap((0, 1, 2)),
            "exponent_ok": math.log(25 / 3) / math.log(5 / 3) >= 4.15,
        },
        "monte_carlo": {
            "seeds_with_max_ratio_below_1": below,
            "mean_alpha_f": float(np.mean(alphas)),
            "max_ratio_quantiles": [float(np.min(ratios)), float(np.median(ratios)), float(np.max(ratios))],
        },
        "scope": {
            "constant_c_certified": False,
            "note": "the assembled no-popular-difference constant requires L and gamma beyond desk scale; only the component inequalities above are certified exactly",
        },
    }
