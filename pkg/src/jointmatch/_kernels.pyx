# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``.

Signatures and semantics match the fallback exactly; see that module for
the contract of each function.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

CLAMP = 1e-12


def softmax_rows(logits):
    cdef double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], c = z.shape[1], i, k
    out_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double m, s
    for i in range(n):
        m = z[i, 0]
        for k in range(1, c):
            if z[i, k] > m:
                m = z[i, k]
        s = 0.0
        for k in range(c):
            out[i, k] = exp(z[i, k] - m)
            s += out[i, k]
        for k in range(c):
            out[i, k] /= s
    return out_arr


def xent_backward(logits, targets, weights, double denom):
    cdef double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef int64_t[::1] t = np.ascontiguousarray(targets, dtype=np.int64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], c = z.shape[1], i, k
    probs_arr = np.empty((n, c), dtype=np.float64)
    d_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] p = probs_arr
    cdef double[:, ::1] d = d_arr
    cdef double m, s, scale, loss = 0.0
    for i in range(n):
        m = z[i, 0]
        for k in range(1, c):
            if z[i, k] > m:
                m = z[i, k]
        s = 0.0
        for k in range(c):
            p[i, k] = exp(z[i, k] - m)
            s += p[i, k]
        for k in range(c):
            p[i, k] /= s
        if w[i] != 0.0:
            loss += w[i] * ((log(s) + m) - z[i, t[i]])
        scale = w[i] / denom
        for k in range(c):
            d[i, k] = p[i, k] * scale
        d[i, t[i]] = (p[i, t[i]] - 1.0) * scale
    return loss / denom, d_arr, probs_arr


def select_pseudo(probs, thresholds):
    cdef double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], c = p.shape[1], i, k, best
    labels_arr = np.empty(n, dtype=np.int64)
    conf_arr = np.empty(n, dtype=np.float64)
    passed_arr = np.empty(n, dtype=np.bool_)
    cdef int64_t[::1] labels = labels_arr
    cdef double[::1] conf = conf_arr
    cdef cnp.npy_bool[::1] passed = passed_arr
    for i in range(n):
        best = 0
        for k in range(1, c):
            if p[i, k] > p[i, best]:
                best = k
        labels[i] = best
        conf[i] = p[i, best]
        passed[i] = p[i, best] >= th[best]
    return labels_arr, conf_arr, passed_arr


cdef inline uint64_t _mix64(uint64_t x) nogil:
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return x ^ (x >> 31)


def hash_buckets(token_ids, Py_ssize_t n_buckets):
    cdef int64_t[::1] ids = np.ascontiguousarray(token_ids, dtype=np.int64)
    out_arr = np.empty(ids.shape[0], dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t j
    for j in range(ids.shape[0]):
        out[j] = <int64_t>(_mix64(<uint64_t>ids[j]) % <uint64_t>n_buckets)
    return out_arr


def hashed_bow(flat, offsets, Py_ssize_t n_buckets):
    cdef int64_t[::1] f = np.ascontiguousarray(flat, dtype=np.int64)
    cdef int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = off.shape[0] - 1, i, j, k
    out_arr = np.zeros((n, n_buckets), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double norm
    for i in range(n):
        for j in range(off[i], off[i + 1]):
            out[i, <Py_ssize_t>(_mix64(<uint64_t>f[j]) % <uint64_t>n_buckets)] += 1.0
        norm = 0.0
        for k in range(n_buckets):
            norm += out[i, k] * out[i, k]
        if norm > 0.0:
            norm = sqrt(norm)
            for k in range(n_buckets):
                out[i, k] /= norm
    return out_arr


def augment_tokens(flat, offsets, syn_flat, syn_offsets, uniforms,
                   double replace_rate, double drop_rate,
                   Py_ssize_t window, double shuffle_rate):
    cdef int64_t[::1] f = np.ascontiguousarray(flat, dtype=np.int64)
    cdef int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int64_t[::1] sf = np.ascontiguousarray(syn_flat, dtype=np.int64)
    cdef int64_t[::1] so = np.ascontiguousarray(syn_offsets, dtype=np.int64)
    cdef double[:, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = off.shape[0] - 1, i, j, k, r, w0, w1, lo, hi, pos, start
    out_arr = np.empty(f.shape[0], dtype=np.int64)
    rows_arr = np.empty(f.shape[0], dtype=np.int64)
    new_off_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef int64_t[::1] rows = rows_arr
    cdef int64_t[::1] new_off = new_off_arr
    cdef int64_t tok, tmp
    pos = 0
    for i in range(n):
        start = pos
        for j in range(off[i], off[i + 1]):
            tok = f[j]
            lo = so[tok]
            hi = so[tok + 1]
            if hi > lo and u[j, 0] < replace_rate:
                k = <Py_ssize_t>(u[j, 1] * (hi - lo))
                if k >= hi - lo:
                    k = hi - lo - 1
                tok = sf[lo + k]
            if u[j, 2] < drop_rate:
                continue
            out[pos] = tok
            rows[pos] = j
            pos += 1
        if pos == start and off[i + 1] > off[i]:
            j = off[i]
            tok = f[j]
            lo = so[tok]
            hi = so[tok + 1]
            if hi > lo and u[j, 0] < replace_rate:
                k = <Py_ssize_t>(u[j, 1] * (hi - lo))
                if k >= hi - lo:
                    k = hi - lo - 1
                tok = sf[lo + k]
            out[pos] = tok
            rows[pos] = j
            pos += 1
        if window > 1:
            w0 = start
            while w0 < pos:
                w1 = w0 + window
                if w1 > pos:
                    w1 = pos
                if w1 - w0 >= 2 and u[rows[w0], 3] < shuffle_rate:
                    k = w1 - 1
                    while k > w0:
                        r = w0 + <Py_ssize_t>(u[rows[k], 4] * (k - w0 + 1))
                        if r > k:
                            r = k
                        tmp = out[k]
                        out[k] = out[r]
                        out[r] = tmp
                        k -= 1
                w0 += window
        new_off[i + 1] = pos
    return out_arr[:pos].copy(), new_off_arr
