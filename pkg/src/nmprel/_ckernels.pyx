# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, hypot

cnp.import_array()


cdef inline void _delta(double sx, double sy, double sw, double sh,
                        double dx, double dy, double dw, double dh,
                        double[:, ::1] out, Py_ssize_t row, Py_ssize_t col) noexcept nogil:
    out[row, col] = ((dx + dw / 2.0) - (sx + sw / 2.0)) / sw
    out[row, col + 1] = ((dy + dh / 2.0) - (sy + sh / 2.0)) / sh
    out[row, col + 2] = log(dw / sw)
    out[row, col + 3] = log(dh / sh)


cdef void _pair_row(const double[:, ::1] boxes, Py_ssize_t i, Py_ssize_t j,
                    double diag, double[:, ::1] out, Py_ssize_t e) noexcept nogil:
    cdef double ax = boxes[i, 0], ay = boxes[i, 1], aw = boxes[i, 2], ah = boxes[i, 3]
    cdef double bx = boxes[j, 0], by = boxes[j, 1], bw = boxes[j, 2], bh = boxes[j, 3]
    cdef double ux = ax if ax < bx else bx
    cdef double uy = ay if ay < by else by
    cdef double ax2 = ax + aw, ay2 = ay + ah, bx2 = bx + bw, by2 = by + bh
    cdef double uw = (ax2 if ax2 > bx2 else bx2) - ux
    cdef double uh = (ay2 if ay2 > by2 else by2) - uy
    cdef double iw = (ax2 if ax2 < bx2 else bx2) - (ax if ax > bx else bx)
    cdef double ih = (ay2 if ay2 < by2 else by2) - (ay if ay > by else by)
    cdef double inter = iw * ih if (iw > 0 and ih > 0) else 0.0
    _delta(ax, ay, aw, ah, bx, by, bw, bh, out, e, 0)
    _delta(ax, ay, aw, ah, ux, uy, uw, uh, out, e, 4)
    _delta(bx, by, bw, bh, ux, uy, uw, uh, out, e, 8)
    cdef double overlap = inter / (aw * ah + bw * bh - inter)
    out[e, 12] = overlap if overlap < 1.0 else 1.0
    out[e, 13] = hypot((bx + bw / 2.0) - (ax + aw / 2.0), (by + bh / 2.0) - (ay + ah / 2.0)) / diag


def pair_features(boxes, src, dst, double image_w, double image_h):
    cdef const double[:, ::1] b = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef const cnp.int64_t[::1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef const cnp.int64_t[::1] d = np.ascontiguousarray(dst, dtype=np.int64)
    cdef Py_ssize_t n_edges = s.shape[0], e
    result = np.empty((n_edges, 14), dtype=np.float64)
    cdef double[:, ::1] out = result
    cdef double diag = hypot(image_w, image_h)
    with nogil:
        for e in range(n_edges):
            _pair_row(b, s[e], d[e], diag, out, e)
    return result


def threshold_edges(boxes, double image_w, double image_h, double t1, double t2):
    cdef const double[:, ::1] b = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0], i, j, k = 0
    scratch_arr = np.empty((1, 14), dtype=np.float64)
    cdef double[:, ::1] scratch = scratch_arr
    pairs_arr = np.empty((n * (n - 1) if n > 1 else 0, 2), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] pairs = pairs_arr
    cdef double diag = hypot(image_w, image_h)
    with nogil:
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                _pair_row(b, i, j, diag, scratch, 0)
                if scratch[0, 13] < t1 or scratch[0, 12] > t2:
                    pairs[k, 0] = i
                    pairs[k, 1] = j
                    k += 1
    return pairs_arr[:k].copy()


def segment_sum(values, index, Py_ssize_t n):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const cnp.int64_t[::1] idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef Py_ssize_t rows = v.shape[0], cols = v.shape[1], r, c, t
    result = np.zeros((n, cols), dtype=np.float64)
    cdef double[:, ::1] out = result
    for r in range(rows):
        t = idx[r]
        if t < 0 or t >= n:
            raise IndexError(f"segment index {t} out of range for {n} segments")
    with nogil:
        for r in range(rows):
            t = idx[r]
            for c in range(cols):
                out[t, c] += v[r, c]
    return result


cdef bint _augment(Py_ssize_t r, const cnp.uint8_t[:, ::1] compat,
                   cnp.int64_t[::1] owner, cnp.uint8_t[::1] seen) noexcept:
    cdef Py_ssize_t c, n_cols = compat.shape[1]
    for c in range(n_cols):
        if not compat[r, c] or seen[c]:
            continue
        seen[c] = 1
        if owner[c] < 0 or _augment(owner[c], compat, owner, seen):
            owner[c] = r
            return True
    return False


def max_matching(compat):
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(compat, dtype=np.uint8)
    cdef Py_ssize_t n_rows = m.shape[0], n_cols = m.shape[1], r
    owner_arr = np.full(n_cols, -1, dtype=np.int64)
    seen_arr = np.zeros(n_cols, dtype=np.uint8)
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef cnp.uint8_t[::1] seen = seen_arr
    cdef Py_ssize_t hits = 0
    for r in range(n_rows):
        seen[:] = 0
        if _augment(r, m, owner, seen):
            hits += 1
    return hits
