"""Pure-Python/numpy Slater–Condon kernels; same interface as the compiled module."""
from __future__ import annotations

import numpy as np


def _below(bits: int, p: int) -> int:
    return (bits & ((1 << p) - 1)).bit_count()


def _occ(bits: int) -> list[int]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length() - 1)
        bits ^= low
    return out


def _diag(b: int, h, g) -> float:
    occ = _occ(b)
    if not occ:
        return 0.0
    ix = np.asarray(occ)
    pair = g[np.ix_(ix, ix, ix, ix)]
    return float(h[ix, ix].sum() + 0.5 * np.einsum("ijij->", pair))


def _element(bi: int, bj: int, h, g) -> float:
    diff = bi ^ bj
    nd = diff.bit_count()
    if nd == 0:
        return _diag(bi, h, g)
    if nd == 2:
        p = (bi & diff).bit_length() - 1
        q = (bj & diff).bit_length() - 1
        b = bi ^ (1 << p)
        sign = -1 if (_below(bi, p) + _below(b, q)) & 1 else 1
        occ = _occ(b)
        return sign * (h[q, p] + (g[q, occ, p, occ].sum() if occ else 0.0))
    if nd == 4:
        p, r = _occ(bi & diff)
        q, s = _occ(bj & diff)
        k = _below(bi, p)
        b = bi ^ (1 << p)
        k += _below(b, r)
        b ^= 1 << r
        k += _below(b, s)
        b |= 1 << s
        k += _below(b, q)
        return (-1 if k & 1 else 1) * g[q, s, p, r]
    return 0.0


def _connected(bits: np.ndarray, i: int) -> np.ndarray:
    """Indices j >= i whose string differs from bits[i] by at most a double."""
    nd = np.bitwise_count(bits[i:] ^ bits[i])
    return i + np.flatnonzero(nd <= 4)


def hamiltonian_diagonal(bits, h, g) -> np.ndarray:
    return np.array([_diag(int(b), h, g) for b in bits])


def hamiltonian_dense(bits, h, g) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint64)
    n = len(bits)
    H = np.zeros((n, n))
    for i in range(n):
        bi = int(bits[i])
        for j in _connected(bits, i):
            v = _element(bi, int(bits[j]), h, g)
            H[i, j] = H[j, i] = v
    return H


def hamiltonian_upper(bits, h, g):
    bits = np.asarray(bits, dtype=np.uint64)
    rows, cols, vals = [], [], []
    for i in range(len(bits)):
        bi = int(bits[i])
        js = _connected(bits, i)
        rows.append(np.full(len(js), i, dtype=np.int64))
        cols.append(js.astype(np.int64))
        vals.append(np.array([_element(bi, int(bits[j]), h, g) for j in js]))
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
