# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Pauli-trace kernels.

A Pauli string over n qubits is encoded as a base-4 integer (I=0, X=1, Y=2,
Z=3), qubit 0 in the most significant digit.  Each string has exactly one
nonzero per row: row ``r`` couples to column ``r ^ xmask`` with value
``(-i)**ny * (-1)**popcount(r & zmask)``.  The kernels work on the real
``(-1)**popcount`` part and leave the ``(-i)**ny`` phase to the caller.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil noexcept


cdef inline void _masks(int64_t code, int n, uint64_t* xmask, uint64_t* zmask) noexcept nogil:
    cdef int p
    cdef int64_t d
    cdef uint64_t x = 0, z = 0
    for p in range(n):
        d = (code >> (2 * p)) & 3
        if d == 1 or d == 2:
            x |= (<uint64_t>1) << p
        if d >= 2:
            z |= (<uint64_t>1) << p
    xmask[0] = x
    zmask[0] = z


def trace_sums(const double[:, ::1] g, const int64_t[::1] codes, int n):
    """``S[k] = sum_c g[c ^ x_k, c] * (-1)**popcount(c & z_k)`` for every code."""
    cdef Py_ssize_t dim = g.shape[0]
    cdef Py_ssize_t k, c, K = codes.shape[0]
    cdef uint64_t x, z
    cdef double s
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(K):
            _masks(codes[k], n, &x, &z)
            s = 0.0
            for c in range(dim):
                if __builtin_parityll(c & z):
                    s -= g[c ^ x, c]
                else:
                    s += g[c ^ x, c]
            o[k] = s
    return out


def trace_sums_batch(const double[:, :, ::1] gs, const int64_t[::1] codes, int n):
    """:func:`trace_sums` over a stack of equally sized matrices."""
    cdef Py_ssize_t R = gs.shape[0], dim = gs.shape[1]
    cdef Py_ssize_t r, k, c, K = codes.shape[0]
    cdef uint64_t x, z
    cdef double s
    out = np.empty((R, K), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for k in range(K):
            _masks(codes[k], n, &x, &z)
            for r in range(R):
                s = 0.0
                for c in range(dim):
                    if __builtin_parityll(c & z):
                        s -= gs[r, c ^ x, c]
                    else:
                        s += gs[r, c ^ x, c]
                o[r, k] = s
    return out


def scatter(const int64_t[::1] codes, const double[::1] weights, int n):
    """Dense ``sum_k w_k * P_k`` where ``P_k`` carries only the sign pattern."""
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef Py_ssize_t k, r, K = codes.shape[0]
    cdef uint64_t x, z
    cdef double w
    out = np.zeros((dim, dim), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for k in range(K):
            _masks(codes[k], n, &x, &z)
            w = weights[k]
            for r in range(dim):
                if __builtin_parityll(r & z):
                    o[r, r ^ x] -= w
                else:
                    o[r, r ^ x] += w
    return out
