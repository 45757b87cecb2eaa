import os
import tempfile
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from popdiff.errors import BadMagic, CorruptLength, NotSymmetric, TooLarge, VersionMismatch
from popdiff.ffalg import FpMatrix
from popdiff.gridfn import (
    COMPLEX,
    FLOAT,
    RATIONAL,
    GridFunction,
    GridPoint,
    QuadraticFactor,
    atom_partition,
    block_factor_from_phase,
    conditional_expectation,
    factor_eval,
    factor_rank,
    grid_decode,
    grid_encode,
    grid_size,
    h_coset_labels,
    linear_kernel_H,
    phase_function,
    read_grid_function,
    write_grid_function,
)
from popdiff._grid import add_perm, digit_table


@given(st.sampled_from([(3, 1, 2), (5, 2, 1), (3, 2, 2), (7, 1, 1)]), st.data())
@settings(max_examples=40, deadline=None)
def test_encode_decode_bijection(shape, data):
    p, k, n = shape
    idx = data.draw(st.integers(0, grid_size(p, k, n) - 1))
    X = grid_decode(p, k, n, idx)
    assert grid_encode(X) == idx
    assert GridPoint(X, n).index == idx


def test_encoding_is_row_major_lsd_first():
    # digit (row i, col j) sits at position i*n + j, (0,0) least significant
    X = FpMatrix.from_rows([[1, 2], [3, 4]], 5)
    assert grid_encode(X) == 1 + 2 * 5 + 3 * 25 + 4 * 125


def test_gridfunction_guard():
    with pytest.raises(TooLarge):
        GridFunction.constant(5, 2, 7, 0.0, FLOAT)


def random_rational(p, k, n, seed):
    rng = np.random.default_rng(seed)
    vals = [Fraction(int(x), 7) for x in rng.integers(0, 8, grid_size(p, k, n))]
    return GridFunction(p, k, n, vals, RATIONAL)


def test_factor_eval_examples():
    p, n = 5, 3
    M = FpMatrix.identity(n, p)
    fac = QuadraticFactor(p, n, ((1, 2, 0),), (M,), ())
    zero = FpMatrix.zero(2, n, p)
    img0 = factor_eval(fac, zero)
    assert all(v == (0, 0) for v in img0.b1) and img0.b2[0] == FpMatrix.zero(2, 2, p)
    # k = 1: the quadratic image is the scalar form x^T M x
    x = FpMatrix.from_rows([[1, 2, 3]], p)
    img = factor_eval(fac, x)
    assert img.b2[0].to_lists() == [[(1 + 4 + 9) % 5]]
    # parity: quadratic part even, linear part odd
    imgneg = factor_eval(fac, x.neg())
    assert imgneg.b2 == img.b2
    assert imgneg.b1[0] == tuple((-v) % p for v in img.b1[0])


def test_factor_symmetry_validation():
    p = 5
    with pytest.raises(NotSymmetric):
        QuadraticFactor(p, 2, (), (FpMatrix.from_rows([[0, 1], [0, 0]], p),), ())
    with pytest.raises(NotSymmetric):
        QuadraticFactor(p, 2, (), (), (FpMatrix.from_rows([[0, 1], [1, 0]], p),))


def test_factor_rank_examples():
    p = 5
    assert factor_rank(QuadraticFactor(p, 4, (), (FpMatrix.identity(4, p),), ())) == 4
    assert factor_rank(QuadraticFactor(p, 2, ((1, 0), (2, 0)), (), ())) == 0
    d1 = FpMatrix.from_rows([[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]], p)
    d2 = FpMatrix.from_rows([[0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]], p)
    assert factor_rank(QuadraticFactor(p, 4, (), (d1, d2), ())) == 1


def test_conditional_expectation_contracts():
    p, k, n = 3, 1, 3
    fac = QuadraticFactor(p, n, ((1, 0, 0),), (FpMatrix.identity(n, p),), ())
    f = random_rational(p, k, n, 0)
    g = conditional_expectation(f, fac)
    assert g.mean() == f.mean()
    # constant on atoms
    atom, _ = atom_partition(fac, k)
    by = {}
    for a, v in zip(atom, g.values):
        by.setdefault(a, set()).add(v)
    assert all(len(s) == 1 for s in by.values())
    # exact Pythagoras
    diff = f.with_values([a - b for a, b in zip(f.values, g.values)])
    assert f.l2_norm_sq() == g.l2_norm_sq() + diff.l2_norm_sq()
    # idempotent
    g2 = conditional_expectation(g, fac)
    assert all(a == b for a, b in zip(g.values, g2.values))
    # trivial factor projects to the constant mean
    c = conditional_expectation(f, QuadraticFactor(p, n, (), (), ()))
    assert all(v == f.mean() for v in c.values)
    # already measurable functions are unchanged
    g3 = conditional_expectation(g, fac)
    assert all(a == b for a, b in zip(g.values, g3.values))


def test_refinement_energy_monotone():
    p, k, n = 3, 1, 3
    coarse = QuadraticFactor(p, n, ((1, 0, 0),), (), ())
    fine = QuadraticFactor(p, n, ((1, 0, 0), (0, 1, 0)), (FpMatrix.identity(n, p),), ())
    for seed in range(5):
        f = random_rational(p, k, n, seed)
        e_coarse = conditional_expectation(f, coarse).l2_norm_sq()
        e_fine = conditional_expectation(f, fine).l2_norm_sq()
        assert e_fine >= e_coarse


def test_linear_kernel_H():
    p, k, n = 5, 1, 2
    fac = QuadraticFactor(p, n, ((1, 0),), (), ())
    H = linear_kernel_H(fac, k)
    assert H["density"] == Fraction(1, 5)
    members = [i for i, v in enumerate(H["H"].values) if v == 1]
    assert members == [grid_encode(FpMatrix.from_rows([[0, t]], p)) for t in range(5)]
    assert H["H_perp"].dim == 1
    # trivial factor: everything
    H0 = linear_kernel_H(QuadraticFactor(p, n, (), (), ()), k)
    assert H0["density"] == 1


def test_h_coset_identity_exhaustive():
    # 1_H(D) equals the sum over cosets of 1_C(X+D) 1_C(X), for all X, D
    for p, n in [(3, 3), (5, 2)]:
        fac = QuadraticFactor(p, n, ((1,) + (0,) * (n - 1),), (), ())
        lab = h_coset_labels(fac, 1)
        ind = linear_kernel_H(fac, 1)["H"].values
        P = grid_size(p, 1, n)
        digs = digit_table(p, n)
        for d in range(P):
            perm = add_perm(p, n, digs[d])
            same = np.all(lab[perm] == lab, axis=1)
            assert all(bool(s) == (ind[d] == 1) for s in same)


def test_phase_function_examples():
    p, k, n = 3, 2, 2
    m = k * n
    # r = 0, M = 0: the constant 1
    g0 = phase_function([0] * m, FpMatrix.zero(m, m, p), p, k, n)
    assert np.allclose(g0.values, 1.0)
    rng = np.random.default_rng(4)
    for _ in range(5):
        r = [int(x) for x in rng.integers(0, p, m)]
        raw = rng.integers(0, p, (m, m))
        M = FpMatrix.from_rows(((raw + raw.T) % p).tolist(), p)
        g = phase_function(r, M, p, k, n)
        assert abs(g.l2_norm_sq() - 1) < 1e-12
        # constant on the atoms of the block factor
        fac = block_factor_from_phase(r, M, k, n)
        atom, _ = atom_partition(fac, k)
        by = {}
        for a, v in zip(atom, np.round(g.values, 9)):
            by.setdefault(a, set()).add(v)
        assert all(len(s) == 1 for s in by.values())
    with pytest.raises(NotSymmetric):
        phase_function([0] * m, FpMatrix.from_rows(np.triu(np.ones((m, m), dtype=int), 1).tolist(), p), p, k, n)


def test_plgf_roundtrip_and_errors():
    p, k, n = 3, 1, 2
    fns = [
        random_rational(p, k, n, 1),
        GridFunction(p, k, n, np.linspace(0, 1, 9), FLOAT),
        GridFunction(p, k, n, np.exp(2j * np.pi * np.arange(9) / 9), COMPLEX),
    ]
    for f in fns:
        with tempfile.NamedTemporaryFile(suffix=".plgf", delete=False) as t:
            path = t.name
        try:
            write_grid_function(f, path)
            g = read_grid_function(path)
            assert g.kind == f.kind and (g.p, g.k, g.n) == (p, k, n)
            if f.kind == RATIONAL:
                assert all(a == b for a, b in zip(f.values, g.values))
            else:
                assert np.array_equal(f.values, g.values)
            # truncation
            blob = open(path, "rb").read()
            open(path, "wb").write(blob[:-3])
            with pytest.raises(CorruptLength):
                read_grid_function(path)
            # bad magic
            open(path, "wb").write(b"XXXX" + blob[4:])
            with pytest.raises(BadMagic):
                read_grid_function(path)
            # bad version
            open(path, "wb").write(blob[:4] + bytes([99]) + blob[5:])
            with pytest.raises(VersionMismatch):
                read_grid_function(path)
        finally:
            os.unlink(path)


def test_atom_sizes_near_uniform_prop42():
    # exhaustive factor-image histogram stays within the predicted band
    from popdiff.analysis import factor_image_distribution

    p, k, n = 3, 1, 4
    fac = QuadraticFactor(p, n, ((1, 0, 0, 0),), (FpMatrix.identity(n, p),), ())
    rep = factor_image_distribution(fac, k)
    assert rep.support_equal
    assert rep.max_multiplicative_deviation < 1.0
    # deviation shrinks when n grows
    fac5 = QuadraticFactor(p, 5, ((1, 0, 0, 0, 0),), (FpMatrix.identity(5, p),), ())
    rep5 = factor_image_distribution(fac5, k)
    assert rep5.max_multiplicative_deviation < rep.max_multiplicative_deviation
