# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled occupation-basis kernels; see ``_kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int _popcount(int64_t w) noexcept nogil:
    return __builtin_popcountll(<unsigned long long>w)


cdef inline int64_t _find(const int64_t[::1] states, int64_t word) noexcept nogil:
    cdef int64_t lo = 0, hi = states.shape[0] - 1, mid
    while lo <= hi:
        mid = (lo + hi) >> 1
        if states[mid] < word:
            lo = mid + 1
        elif states[mid] > word:
            hi = mid - 1
        else:
            return mid
    return -1


def build_table(states, int n_modes):
    cdef const int64_t[::1] st = np.ascontiguousarray(states, dtype=np.int64)
    cdef int64_t dim = st.shape[0]
    cdef int64_t n_occ = _popcount(st[0]) if dim > 0 else 0
    cdef int64_t size = dim * n_occ * (n_modes - n_occ + 1)
    src_a = np.empty(size, dtype=np.int64)
    dst_a = np.empty(size, dtype=np.int64)
    pq_a = np.empty(size, dtype=np.int64)
    sign_a = np.empty(size, dtype=np.float64)
    cdef int64_t[::1] src = src_a
    cdef int64_t[::1] dst = dst_a
    cdef int64_t[::1] pq = pq_a
    cdef double[::1] sign = sign_a
    cdef int64_t n = 0, s, w, new, between
    cdef int p, q, lo, hi
    with nogil:
        for q in range(n_modes):
            for p in range(n_modes):
                for s in range(dim):
                    w = st[s]
                    if not (w >> q) & 1:
                        continue
                    if p == q:
                        src[n] = s
                        dst[n] = s
                        pq[n] = p * n_modes + q
                        sign[n] = 1.0
                        n += 1
                        continue
                    if (w >> p) & 1:
                        continue
                    new = (w ^ (<int64_t>1 << q)) | (<int64_t>1 << p)
                    lo = p if p < q else q
                    hi = q if p < q else p
                    between = ((<int64_t>1 << hi) - 1) ^ ((<int64_t>1 << (lo + 1)) - 1)
                    src[n] = s
                    dst[n] = _find(st, new)
                    pq[n] = p * n_modes + q
                    sign[n] = -1.0 if _popcount(w & between) & 1 else 1.0
                    n += 1
    return src_a[:n], dst_a[:n], pq_a[:n], sign_a[:n]


def apply_one_body(t_flat, src, dst, pq, sign, x):
    cdef const double[::1] t = np.ascontiguousarray(t_flat, dtype=np.float64)
    cdef const int64_t[::1] s_ = src
    cdef const int64_t[::1] d_ = dst
    cdef const int64_t[::1] k_ = pq
    cdef const double[::1] g_ = sign
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out_a = np.zeros(xv.shape[0], dtype=np.float64)
    cdef double[::1] out = out_a
    cdef int64_t e, n = s_.shape[0]
    cdef double c
    with nogil:
        for e in range(n):
            c = t[k_[e]]
            if c != 0.0:
                out[d_[e]] += c * g_[e] * xv[s_[e]]
    return out_a


def excite_all(src, dst, pq, sign, x, int n_pq):
    cdef const int64_t[::1] s_ = src
    cdef const int64_t[::1] d_ = dst
    cdef const int64_t[::1] k_ = pq
    cdef const double[::1] g_ = sign
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out_a = np.zeros((n_pq, xv.shape[0]), dtype=np.float64)
    cdef double[:, ::1] out = out_a
    cdef int64_t e, n = s_.shape[0]
    with nogil:
        for e in range(n):
            out[k_[e], d_[e]] += g_[e] * xv[s_[e]]
    return out_a


def contract(src, dst, pq, sign, z):
    cdef const int64_t[::1] s_ = src
    cdef const int64_t[::1] d_ = dst
    cdef const int64_t[::1] k_ = pq
    cdef const double[::1] g_ = sign
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    out_a = np.zeros(zv.shape[1], dtype=np.float64)
    cdef double[::1] out = out_a
    cdef int64_t e, n = s_.shape[0]
    with nogil:
        for e in range(n):
            out[d_[e]] += g_[e] * zv[k_[e], s_[e]]
    return out_a
