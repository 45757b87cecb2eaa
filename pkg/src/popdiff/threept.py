"""Three-point patterns over finite abelian groups: Bohr sets, smoothed
counting, the regularity-decomposition contract, popular-difference search,
and lifting popular differences from Z/pZ back to integer boxes.

Groups are either cyclic Z_N or vector groups (F_p^n)^k; characters are
indexed by the same element space and all R/Z distances are exact rationals
(multiples of 1/N or 1/p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import DEFAULT_GUARD
from ._grid import digit_table, encode_digits, linear_perm
from .analysis import FLOAT_SLACK, PatternCountReport
from .errors import NoPrimeInWindow, NonConvergent, NotAutomorphism, TooLarge
from .ffalg import FpMatrix, is_invertible


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for the full 64-bit range."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Groups


class FiniteGroupSpec:
    """A finite abelian group with a pair of automorphisms.

    kind 'Z_N': elements and characters are Z/NZ, automorphisms are unit
    multipliers. kind 'vector': elements are (F_p^n)^k grid indices,
    automorphisms are k x k matrices over F_p.
    """

    def __init__(self, kind: str, *, N: int | None = None, M1=None, M2=None,
                 p: int | None = None, k: int = 1, n: int = 1, guard: int = DEFAULT_GUARD):
        self.kind = kind
        if kind == "Z_N":
            self.N = int(N)
            self.size = self.N
            self.modulus = self.N
            self.M1 = int(M1) % self.N
            self.M2 = int(M2) % self.N
            for M in (self.M1, self.M2, (self.M1 - self.M2) % self.N):
                if math.gcd(M, self.N) != 1:
                    raise NotAutomorphism(f"{M} is not a unit mod {self.N}")
        elif kind == "vector":
            self.p, self.k, self.n = int(p), int(k), int(n)
            self.size = self.p ** (self.k * self.n)
            if self.size > guard:
                raise TooLarge(f"group order {self.size} exceeds guard {guard}")
            self.modulus = self.p
            self.M1 = M1 if isinstance(M1, FpMatrix) else FpMatrix.from_rows(M1, self.p)
            self.M2 = M2 if isinstance(M2, FpMatrix) else FpMatrix.from_rows(M2, self.p)
            for M in (self.M1, self.M2, self.M1.sub(self.M2)):
                if not is_invertible(M):
                    raise NotAutomorphism("M1, M2, M1 - M2 must be invertible")
        else:
            raise ValueError(f"unknown group kind {kind!r}")

    # -- index arithmetic ------------------------------------------------

    def apply(self, which: int, idx: np.ndarray) -> np.ndarray:
        """Indices of M_which applied to the given elements."""
        M = self.M1 if which == 1 else self.M2
        if self.kind == "Z_N":
            return (np.asarray(idx) * M) % self.N
        perm = linear_perm(self.p, self.k, self.n, M.to_lists())
        return perm[np.asarray(idx)]

    def add_perm(self, shift_idx: int) -> np.ndarray:
        """Permutation q with q[x] = x + shift."""
        if self.kind == "Z_N":
            return (np.arange(self.N) + shift_idx) % self.N
        digs = digit_table(self.p, self.k * self.n)
        return encode_digits(digs + digs[shift_idx], self.p)

    def neg(self, idx: np.ndarray) -> np.ndarray:
        if self.kind == "Z_N":
            return (-np.asarray(idx)) % self.N
        digs = digit_table(self.p, self.k * self.n)
        return encode_digits((-digs[np.asarray(idx)]) % self.p, self.p)

    def char_numerators(self, xi_idx: int) -> np.ndarray:
        """Pairing numerators <xi, x> over all x; the character value is
        e(num / modulus)."""
        if self.kind == "Z_N":
            return (xi_idx * np.arange(self.N)) % self.N
        digs = digit_table(self.p, self.k * self.n)
        return (digs @ digs[xi_idx]) % self.p

    def char_compose_perm(self, which: int) -> np.ndarray:
        """Permutation c with c[xi] = index of the character x -> xi(M_which x)."""
        if self.kind == "Z_N":
            M = self.M1 if which == 1 else self.M2
            return (np.arange(self.N) * M) % self.N
        M = (self.M1 if which == 1 else self.M2).transpose()
        return linear_perm(self.p, self.k, self.n, M.to_lists())

    def char_compose(self, xi_idx: int, which: int) -> int:
        return int(self.char_compose_perm(which)[xi_idx])

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Fourier coefficients f_hat(xi) = E_x f(x) e(-<xi, x>/modulus)."""
        if self.kind == "Z_N":
            return np.fft.fft(np.asarray(values, dtype=np.complex128)) / self.N
        m = self.k * self.n
        T = np.asarray(values, dtype=np.complex128).reshape((self.p,) * m, order="F")
        return np.fft.fftn(T).reshape(-1, order="F") / self.size

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        if self.kind == "Z_N":
            return np.fft.ifft(np.asarray(coeffs)) * self.N
        m = self.k * self.n
        T = np.asarray(coeffs, dtype=np.complex128).reshape((self.p,) * m, order="F")
        return np.fft.ifftn(T).reshape(-1, order="F") * self.size

    def char_sum_index(self, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
        if self.kind == "Z_N":
            return (xi1 + xi2) % self.N
        digs = digit_table(self.p, self.k * self.n)
        return encode_digits(digs[xi1] + digs[xi2], self.p)

    def to_json_obj(self) -> dict:
        if self.kind == "Z_N":
            return {"kind": "Z_N", "N": self.N, "M1": self.M1, "M2": self.M2}
        return {"kind": "vector", "p": self.p, "k": self.k, "n": self.n,
                "M1": self.M1.to_lists(), "M2": self.M2.to_lists()}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FiniteGroupSpec":
        if obj["kind"] == "Z_N":
            return cls("Z_N", N=obj["N"], M1=obj["M1"], M2=obj["M2"])
        return cls("vector", p=obj["p"], k=obj.get("k", 1), n=obj.get("n", 1),
                   M1=obj["M1"], M2=obj["M2"])


# ---------------------------------------------------------------------------
# Bohr sets


@dataclass(frozen=True)
class BohrSet:
    """B(S, delta) = {x : max_{xi in S} ||<xi, x>/modulus||_{R/Z} < delta}."""

    group: FiniteGroupSpec
    S: tuple[int, ...]
    delta: Fraction
    members: tuple[int, ...]

    @property
    def measure(self) -> Fraction:
        return Fraction(len(self.members), self.group.size)

    def indicator(self) -> np.ndarray:
        ind = np.zeros(self.group.size, dtype=np.int64)
        ind[list(self.members)] = 1
        return ind

    def mass(self) -> np.ndarray:
        """Uniform probability mass on the members (float)."""
        w = np.zeros(self.group.size)
        w[list(self.members)] = 1.0 / len(self.members)
        return w


def bohr_set(group: FiniteGroupSpec, S, delta) -> BohrSet:
    delta = Fraction(delta).limit_denominator(10**12) if not isinstance(delta, Fraction) else delta
    if not (0 < delta <= Fraction(1, 2)):
        raise ValueError("delta must lie in (0, 1/2]")
    den = group.modulus
    member = np.ones(group.size, dtype=bool)
    S = tuple(sorted(set(int(x) for x in S)))
    # dist/den < delta, as an integer bound (delta may have a huge denominator)
    bound = (delta.numerator * den - 1) // delta.denominator
    for xi in S:
        num = group.char_numerators(xi)
        dist = np.minimum(num, den - num)
        member &= dist <= bound
    members = tuple(int(i) for i in np.nonzero(member)[0])
    B = BohrSet(group, S, delta, members)
    assert 0 in B.members
    neg = set(int(x) for x in group.neg(np.array(members, dtype=np.int64)))
    assert neg == set(members), "Bohr sets are symmetric"
    return B


def convolved_measure(B: BohrSet) -> np.ndarray:
    """nu = mu_B * mu_B as an exact-mass float array (mass 1/|B|^2 per pair)."""
    members = np.array(B.members, dtype=np.int64)
    size = B.group.size
    if B.group.kind == "Z_N":
        sums = (members[:, None] + members[None, :]) % size
    else:
        digs = digit_table(B.group.p, B.group.k * B.group.n)
        sums = encode_digits(digs[members][:, None, :] + digs[members][None, :, :], B.group.p)
    counts = np.bincount(sums.reshape(-1), minlength=size)
    return counts / (len(members) ** 2)


def derived_bohr(B: BohrSet, group: FiniteGroupSpec | None = None) -> BohrSet:
    """B' = {r : M1 r and M2 r in B} realized as the Bohr set on the composed
    characters; the set equality with the direct definition is checked
    exhaustively."""
    g = group or B.group
    T_prime = set()
    for xi in B.S:
        T_prime.add(g.char_compose(xi, 1))
        T_prime.add(g.char_compose(xi, 2))
    Bp = bohr_set(g, sorted(T_prime), B.delta)
    in_B = np.zeros(g.size, dtype=bool)
    in_B[list(B.members)] = True
    r = np.arange(g.size)
    direct = in_B[g.apply(1, r)] & in_B[g.apply(2, r)]
    assert set(np.nonzero(direct)[0].tolist()) == set(Bp.members)
    assert len(Bp.S) <= 2 * len(B.S)
    return Bp


# ---------------------------------------------------------------------------
# Smoothed three-point counting


def smoothed_3pt_count(f: np.ndarray, group: FiniteGroupSpec, B: BohrSet, tol: float = FLOAT_SLACK) -> dict:
    """integral of f(x) f(x+M1 d) f(x+M2 d) against nu(d) = mu_B * mu_B,
    computed by direct convolution and by character sums; the two must agree
    to the stated tolerance."""
    f = np.asarray(f, dtype=np.float64)
    N = group.size
    nu = convolved_measure(B)
    support = np.nonzero(nu)[0]
    direct = 0.0
    for d in support:
        s1 = group.add_perm(int(group.apply(1, np.array([d]))[0]))
        s2 = group.add_perm(int(group.apply(2, np.array([d]))[0]))
        direct += float(nu[d]) * float(np.mean(f * f[s1] * f[s2]))
    F = group.fft(f)
    nu_t = group.fft(nu) * N  # sum_d nu(d) e(-<eta, d>); real for symmetric nu
    xi = np.arange(N)
    comp1 = group.char_compose_perm(1)
    comp2 = group.char_compose_perm(2)
    fourier = 0.0
    for xi2 in range(N):
        neg_idx = group.neg(group.char_sum_index(np.full(N, xi2), xi))
        eta = group.char_sum_index(np.full(N, comp1[xi2]), comp2[xi])
        fourier += float(np.real(np.sum(F[neg_idx] * F[xi2] * F[xi] * np.conj(nu_t[eta]))))
    agree = abs(direct - fourier) <= tol
    return {"value": direct, "direct": direct, "fourier": fourier, "agree": agree}


# ---------------------------------------------------------------------------
# Regularity decomposition (Bohr-smoothing construction; only the measured
# contracts are promised)


@dataclass
class RegularityDecomposition:
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    T: tuple[int, ...]
    gamma1: Fraction
    gamma2: float
    lipschitz_C: float
    stages: int
    contracts: dict = field(default_factory=dict)


def _default_omega1(x: float) -> float:
    return 2.0 * x


def _default_omega2(x: float) -> float:
    return x * x


def regularity_decompose(
    f: np.ndarray,
    group: FiniteGroupSpec,
    epsilon: float,
    delta: float = 0.5,
    S0=(),
    omega1=None,
    omega2=None,
    lipschitz_target: float = 2.0,
) -> RegularityDecomposition:
    """Split f = f1 + f2 + f3 with f1 = f * mu_B * mu_B for a Bohr set B on
    the large spectrum, f3 the small-coefficient Fourier tail, f2 the rest.

    Only the measured contracts are promised: mean(f1) = mean(f), all parts
    1-bounded, ||f2||_2 <= epsilon, ||f3^||_inf <= gamma2, and the Bohr
    Lipschitz bound |f1(x+r) - f1(x)| <= C epsilon on B(T, gamma1). The
    radius gamma1 shrinks until they hold; with the default polynomial
    growth functions this terminates at desk scale (a fast exponential
    omega2 collapses immediately to the trivial split f1 = f).
    """
    omega1 = omega1 or _default_omega1
    omega2 = omega2 or _default_omega2
    f = np.asarray(f, dtype=np.float64)
    if f.min() < 0 or f.max() > 1:
        raise ValueError("f must be [0,1]-valued")
    N = group.size
    S0 = tuple(sorted(set(int(x) for x in S0)))
    mean = float(f.mean())
    F = group.fft(f)
    gamma1 = Fraction(1, max(2, math.ceil(omega1(len(S0) + 1.0 / delta + 1.0 / epsilon))))
    cap = math.ceil(epsilon**-2 * delta**-2)
    for stage in range(1, cap + 1):
        gamma2 = 1.0 / omega2(float(1 / gamma1))
        large = np.nonzero(np.abs(F) > gamma2)[0]
        T = tuple(sorted(set(S0) | set(int(x) for x in large)))
        B = bohr_set(group, T, gamma1)
        nu = convolved_measure(B)
        nu_hat = np.real(group.fft(nu)) * N
        F1 = F * nu_hat
        f1 = np.real(group.ifft(F1))
        rest = F - F1
        mask_large = np.zeros(N, dtype=bool)
        mask_large[list(T)] = True
        f2 = np.real(group.ifft(np.where(mask_large, rest, 0)))
        f3 = np.real(group.ifft(np.where(mask_large, 0, rest)))
        # measured contracts
        l2_f2 = math.sqrt(float(np.mean(f2**2)))
        fhat3_inf = float(np.max(np.abs(group.fft(f3)))) if N else 0.0
        sup_lip = 0.0
        for r in B.members:
            if r == 0:
                continue
            perm = group.add_perm(r)
            sup_lip = max(sup_lip, float(np.max(np.abs(f1[perm] - f1))))
        bounds_ok = (
            f1.min() >= -1e-9
            and f1.max() <= 1 + 1e-9
            and np.max(np.abs(f2)) <= 1 + 1e-9
            and np.max(np.abs(f3)) <= 1 + 1e-9
        )
        contracts = {
            "mean_preserved": abs(float(f1.mean()) - mean) <= 1e-12,
            "one_bounded": bool(bounds_ok),
            "l2_f2": l2_f2,
            "l2_ok": l2_f2 <= epsilon,
            "fhat3_inf": fhat3_inf,
            "fourier_ok": fhat3_inf <= gamma2 + 1e-12,
            "lipschitz_sup": sup_lip,
            "lipschitz_ok": sup_lip <= lipschitz_target * epsilon,
        }
        if all(v for k, v in contracts.items() if k.endswith("ok") or k == "mean_preserved"):
            return RegularityDecomposition(
                f1=f1, f2=f2, f3=f3, T=T, gamma1=gamma1, gamma2=gamma2,
                lipschitz_C=(sup_lip / epsilon if epsilon else 0.0), stages=stage,
                contracts=contracts,
            )
        gamma1 = gamma1 / 2
    raise NonConvergent(f"no compliant decomposition within {cap} stages")


# ---------------------------------------------------------------------------
# Popular three-point search


def popular_3pt_search(indicator: np.ndarray, group: FiniteGroupSpec, epsilon: float) -> PatternCountReport:
    """Exhaustive report of 3-point densities over every nonzero difference."""
    f = np.asarray(indicator, dtype=np.float64)
    N = group.size
    alpha = float(f.mean())
    threshold = alpha**3 - epsilon
    counts: dict[int, float] = {}
    hits = 0
    best_val, best_idx = None, -1
    for d in range(N):
        s1 = group.add_perm(int(group.apply(1, np.array([d]))[0]))
        s2 = group.add_perm(int(group.apply(2, np.array([d]))[0]))
        beta = float(np.mean(f * f[s1] * f[s2]))
        counts[d] = beta
        if d == 0:
            continue
        if beta >= threshold - FLOAT_SLACK:
            hits += 1
        if best_val is None or beta > best_val:
            best_val, best_idx = beta, d
    return PatternCountReport(
        alpha=alpha, counts=counts, max_d=best_val, argmax_d=best_idx,
        threshold=threshold, threshold_hits=hits, points=3, epsilon=float(epsilon),
        backend="float",
    )


# ---------------------------------------------------------------------------
# Lifting to integer boxes


def _int_det(rows: list[list[int]]) -> Fraction:
    n = len(rows)
    mat = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if mat[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            mat[c], mat[piv] = mat[piv], mat[c]
            det = -det
        det *= mat[c][c]
        for i in range(c + 1, n):
            fct = mat[i][c] / mat[c][c]
            mat[i] = [a - fct * b for a, b in zip(mat[i], mat[c])]
    return det


def lift_to_interval(A, N: int, M1, M2, epsilon: float, guard: int = DEFAULT_GUARD) -> dict:
    """Popular-difference search for A inside the integer box [N]^k, via the
    embedding into (Z/pZ)^k for a prime N < p < (1 + eps/k) N.

    Differences are restricted to the Bohr set on the 2k coordinate
    functionals of M1, M2 with radius eps/(2k); points too close to the box
    boundary are discarded, and every returned triple is audited to lie in
    [N]^k with all three points in A.
    """
    A = list(A)
    if not A:
        raise ValueError("A must be nonempty")
    first = A[0]
    k = 1 if isinstance(first, int) else len(first)
    pts = [(a,) if isinstance(a, int) else tuple(a) for a in A]
    M1r = [[int(M1)]] if k == 1 and not isinstance(M1, (list, tuple)) else [list(r) for r in M1]
    M2r = [[int(M2)]] if k == 1 and not isinstance(M2, (list, tuple)) else [list(r) for r in M2]
    for name, M in (("M1", M1r), ("M2", M2r), ("M1-M2", [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(M1r, M2r)])):
        if _int_det(M) == 0:
            raise NotAutomorphism(f"{name} is singular over Q")

    eps_eff = float(epsilon)
    widened = False
    while True:
        lo, hi = N, math.floor((1 + eps_eff / k) * N)
        p = next((q for q in range(lo + 1, hi + 1) if is_prime(q)), None)
        if p is not None:
            break
        widened = True
        eps_eff *= 2
        if eps_eff / k >= 1:
            p = next(q for q in range(N + 1, 2 * N + 2) if is_prime(q))
            break
    if p is None:
        raise NoPrimeInWindow("no prime found")
    if p**k > guard:
        raise TooLarge(f"p^k = {p ** k} exceeds guard {guard}")
    for name, M in (("M1", M1r), ("M2", M2r), ("M1-M2", [[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(M1r, M2r)])):
        if not is_invertible(FpMatrix.from_rows(M, p)):
            raise NotAutomorphism(f"{name} is singular mod {p}")

    group = FiniteGroupSpec("vector", p=p, k=k, n=1, M1=M1r, M2=M2r, guard=guard)
    pows = p ** np.arange(k, dtype=np.int64)
    A_idx = np.array([sum((c % p) * int(w) for c, w in zip(pt, pows)) for pt in pts], dtype=np.int64)
    in_A = np.zeros(group.size, dtype=bool)
    in_A[A_idx] = True
    A_set = set(pts)

    S0 = sorted(set(
        int(np.array(row, dtype=np.int64) % p @ pows) for row in M1r
    ) | set(
        int(np.array(row, dtype=np.int64) % p @ pows) for row in M2r
    ))
    delta0 = Fraction(1, 1) * Fraction(eps_eff).limit_denominator(10**6) / (2 * k)
    delta0 = min(delta0, Fraction(1, 2))
    B = bohr_set(group, S0, delta0)

    digs = digit_table(p, k)
    lo_band = math.ceil(eps_eff / k * p)
    hi_band = math.floor((1 - eps_eff / k) * p)
    x_all = np.arange(group.size)
    band = np.all((digs >= lo_band) & (digs <= hi_band), axis=1)

    def signed(v: int) -> int:
        return v - p if v > p // 2 else v

    best = {"d": None, "count": -1, "triples": []}
    audit_total = 0
    audit_pass = 0
    for d in B.members:
        if d == 0:
            continue
        m1d = int(group.apply(1, np.array([d]))[0])
        m2d = int(group.apply(2, np.array([d]))[0])
        s1 = group.add_perm(m1d)
        s2 = group.add_perm(m2d)
        ok = in_A & in_A[s1] & in_A[s2] & band
        xs = x_all[ok]
        m1_shift = [signed(int(v)) for v in digs[m1d]]
        m2_shift = [signed(int(v)) for v in digs[m2d]]
        triples = []
        good = 0
        for x in xs:
            base = tuple(int(c) for c in digs[x])
            t1 = tuple(c + s for c, s in zip(base, m1_shift))
            t2 = tuple(c + s for c, s in zip(base, m2_shift))
            audit_total += 1
            if all(1 <= c <= N for c in base + t1 + t2) and base in A_set and t1 in A_set and t2 in A_set:
                audit_pass += 1
                good += 1
                triples.append((base, t1, t2))
        if good > best["count"]:
            best = {"d": [signed(int(v)) for v in digs[d]], "count": good, "triples": triples[:10]}
    return {
        "p": p,
        "k": k,
        "epsilon_effective": eps_eff,
        "widened": widened,
        "bohr_size": len(B.members),
        "best_d": best["d"],
        "best_count": best["count"] if best["count"] >= 0 else 0,
        "audit_total": audit_total,
        "audit_pass": audit_pass,
        "audit_ok": audit_total == audit_pass,
        "sample_triples": [list(map(list, t)) for t in best["triples"]],
    }
