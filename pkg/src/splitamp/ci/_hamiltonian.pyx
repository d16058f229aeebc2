# cython: boundscheck=False, wraparound=False, cdivision=True
"""Slater–Condon matrix elements on 64-bit spin-orbital strings (compiled)."""
import numpy as np
cimport numpy as cnp

ctypedef unsigned long long u64

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int _below(u64 bits, int p) noexcept nogil:
    return __builtin_popcountll(bits & ((<u64>1 << p) - 1))


cdef double _diag(u64 b, const double[:, ::1] h, const double[:, :, :, ::1] g) noexcept nogil:
    cdef double e = 0.0
    cdef u64 x = b, y
    cdef int i, j
    while x:
        i = __builtin_ctzll(x)
        x &= x - 1
        e += h[i, i]
        y = x
        while y:
            j = __builtin_ctzll(y)
            y &= y - 1
            e += g[i, j, i, j]
    return e


cdef double _element(u64 bi, u64 bj, const double[:, ::1] h,
                     const double[:, :, :, ::1] g) noexcept nogil:
    """<J|H|I> without the core energy; zero if more than a double apart."""
    cdef u64 diff = bi ^ bj
    cdef int nd = __builtin_popcountll(diff)
    cdef u64 rem, add, x, b
    cdef int p, r, q, s, k, sign
    cdef double v
    if nd == 0:
        return _diag(bi, h, g)
    if nd == 2:
        rem = bi & diff
        add = bj & diff
        p = __builtin_ctzll(rem)
        q = __builtin_ctzll(add)
        b = bi ^ (<u64>1 << p)
        sign = 1 - 2 * ((_below(bi, p) + _below(b, q)) & 1)
        v = h[q, p]
        x = b
        while x:
            k = __builtin_ctzll(x)
            x &= x - 1
            v += g[q, k, p, k]
        return sign * v
    if nd == 4:
        rem = bi & diff
        add = bj & diff
        p = __builtin_ctzll(rem)
        rem &= rem - 1
        r = __builtin_ctzll(rem)
        q = __builtin_ctzll(add)
        add &= add - 1
        s = __builtin_ctzll(add)
        # a+_q a+_s a_r a_p applied right to left
        k = _below(bi, p)
        b = bi ^ (<u64>1 << p)
        k += _below(b, r)
        b ^= (<u64>1 << r)
        k += _below(b, s)
        b |= (<u64>1 << s)
        k += _below(b, q)
        sign = 1 - 2 * (k & 1)
        return sign * g[q, s, p, r]
    return 0.0


def hamiltonian_diagonal(const u64[::1] bits, const double[:, ::1] h, const double[:, :, :, ::1] g):
    cdef Py_ssize_t n = bits.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _diag(bits[i], h, g)
    return out


def hamiltonian_dense(const u64[::1] bits, const double[:, ::1] h, const double[:, :, :, ::1] g):
    cdef Py_ssize_t n = bits.shape[0], i, j
    out = np.zeros((n, n))
    cdef double[:, ::1] H = out
    cdef double v
    with nogil:
        for i in range(n):
            for j in range(i, n):
                if __builtin_popcountll(bits[i] ^ bits[j]) <= 4:
                    v = _element(bits[i], bits[j], h, g)
                    H[i, j] = v
                    H[j, i] = v
    return out


def hamiltonian_upper(const u64[::1] bits, const double[:, ::1] h, const double[:, :, :, ::1] g):
    """Upper-triangle COO triplets (including the diagonal)."""
    cdef Py_ssize_t n = bits.shape[0], i, j, nnz = 0, k = 0
    with nogil:
        for i in range(n):
            for j in range(i, n):
                if __builtin_popcountll(bits[i] ^ bits[j]) <= 4:
                    nnz += 1
    rows_a = np.empty(nnz, dtype=np.int64)
    cols_a = np.empty(nnz, dtype=np.int64)
    vals_a = np.empty(nnz)
    cdef cnp.int64_t[::1] rows = rows_a
    cdef cnp.int64_t[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    with nogil:
        for i in range(n):
            for j in range(i, n):
                if __builtin_popcountll(bits[i] ^ bits[j]) <= 4:
                    rows[k] = i
                    cols[k] = j
                    vals[k] = _element(bits[i], bits[j], h, g)
                    k += 1
    return rows_a, cols_a, vals_a
