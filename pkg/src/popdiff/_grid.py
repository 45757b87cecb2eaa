"""Index arithmetic for dense enumeration of F_p^m.

Grid elements are encoded as integers in [0, p^m) with base-p digits,
digit 0 least significant. A k x n matrix X over F_p flattens row-major,
so digit (i*n + j) is entry (row i, col j) and (0, 0) is least significant.
"""

from __future__ import annotations

import functools

import numpy as np


@functools.lru_cache(maxsize=None)
def digit_table(p: int, m: int) -> np.ndarray:
    """All p^m digit vectors, shape (p^m, m), digit 0 least significant."""
    idx = np.arange(p**m, dtype=np.int64)
    digits = np.empty((p**m, m), dtype=np.int64)
    for j in range(m):
        digits[:, j] = (idx // p**j) % p
    digits.setflags(write=False)
    return digits


@functools.lru_cache(maxsize=None)
def pow_vector(p: int, m: int) -> np.ndarray:
    v = p ** np.arange(m, dtype=np.int64)
    v.setflags(write=False)
    return v


def encode_digits(digits: np.ndarray, p: int) -> np.ndarray:
    """Inverse of digit_table row lookup; digits may have any leading shape."""
    m = digits.shape[-1]
    return (digits % p) @ pow_vector(p, m)


def add_perm(p: int, m: int, shift_digits) -> np.ndarray:
    """Permutation array q with q[x] = index of (x + shift)."""
    digits = digit_table(p, m)
    shifted = (digits + np.asarray(shift_digits, dtype=np.int64)) % p
    return encode_digits(shifted, p)


def linear_perm(p: int, k: int, n: int, M_rows) -> np.ndarray:
    """Permutation (or collapse) q with q[x] = index of M @ X for X = grid point x.

    M_rows is a k x k integer matrix acting on the k rows of the k x n point.
    """
    m = k * n
    digits = digit_table(p, m).reshape(-1, k, n)
    M = np.asarray(M_rows, dtype=np.int64)
    out = np.einsum("ab,xbn->xan", M, digits) % p
    return encode_digits(out.reshape(-1, m), p)


def negate_perm(p: int, m: int) -> np.ndarray:
    digits = digit_table(p, m)
    return encode_digits((-digits) % p, p)
