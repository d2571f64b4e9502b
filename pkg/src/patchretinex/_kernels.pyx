# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Must stay numerically identical to ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

# 8-neighbour offsets; the order is part of the sampler contract
cdef int DY[8]
cdef int DX[8]
DY[:] = [-1, -1, -1, 0, 0, 1, 1, 1]
DX[:] = [-1, 0, 1, -1, 1, -1, 0, 1]


def correlate_rows(const double[:, ::1] padded, const double[::1] weights):
    cdef Py_ssize_t rows = padded.shape[0]
    cdef Py_ssize_t taps = weights.shape[0]
    cdef Py_ssize_t cols = padded.shape[1] - taps + 1
    if cols < 1:
        raise ValueError("padded rows shorter than the kernel")
    out = np.zeros((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double w
    with nogil:
        for i in range(rows):
            for k in range(taps):
                w = weights[k]
                for j in range(cols):
                    o[i, j] += w * padded[i, j + k]
    return out


def correlate2d(const double[:, ::1] padded, const double[:, ::1] kernel):
    cdef Py_ssize_t kh = kernel.shape[0]
    cdef Py_ssize_t kw = kernel.shape[1]
    cdef Py_ssize_t rows = padded.shape[0] - kh + 1
    cdef Py_ssize_t cols = padded.shape[1] - kw + 1
    if rows < 1 or cols < 1:
        raise ValueError("padded image smaller than the kernel")
    out = np.zeros((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, a, b
    cdef double w
    with nogil:
        for i in range(rows):
            for a in range(kh):
                for b in range(kw):
                    w = kernel[a, b]
                    for j in range(cols):
                        o[i, j] += w * padded[i + a, j + b]
    return out


cdef inline int _step(Py_ssize_t h, Py_ssize_t w, Py_ssize_t y, Py_ssize_t x,
                      double draw) noexcept nogil:
    cdef int cand[8]
    cdef int n = 0
    cdef int d, idx
    cdef Py_ssize_t ny, nx
    for d in range(8):
        ny = y + DY[d]
        nx = x + DX[d]
        if 0 <= ny < h and 0 <= nx < w:
            cand[n] = d
            n += 1
    idx = <int>(draw * n)
    if idx >= n:
        idx = n - 1
    return cand[idx]


def walk_paths(Py_ssize_t height, Py_ssize_t width, Py_ssize_t ty, Py_ssize_t tx,
               const double[:, ::1] draws):
    cdef Py_ssize_t npaths = draws.shape[0]
    cdef Py_ssize_t steps = draws.shape[1]
    out = np.empty((npaths, steps + 1, 2), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] o = out
    cdef Py_ssize_t p, s, y, x
    cdef int d
    with nogil:
        for p in range(npaths):
            y = ty
            x = tx
            o[p, steps, 0] = y
            o[p, steps, 1] = x
            for s in range(steps):
                d = _step(height, width, y, x, draws[p, s])
                y += DY[d]
                x += DX[d]
                o[p, steps - 1 - s, 0] = y
                o[p, steps - 1 - s, 1] = x
    return out


def path_retinex(const double[:, ::1] logimg, Py_ssize_t ty, Py_ssize_t tx,
                 const double[:, ::1] draws, double threshold):
    cdef Py_ssize_t h = logimg.shape[0]
    cdef Py_ssize_t w = logimg.shape[1]
    cdef Py_ssize_t npaths = draws.shape[0]
    cdef Py_ssize_t steps = draws.shape[1]
    cdef Py_ssize_t p, s, y, x, ny, nx
    cdef int d
    cdef double total = 0.0
    cdef double acc, diff
    with nogil:
        for p in range(npaths):
            y = ty
            x = tx
            acc = 0.0
            for s in range(steps):
                d = _step(h, w, y, x, draws[p, s])
                ny = y + DY[d]
                nx = x + DX[d]
                # forward pair (ny, nx) -> (y, x) contributes log I(ny,nx) - log I(y,x)
                diff = logimg[ny, nx] - logimg[y, x]
                if fabs(diff) >= threshold:
                    acc += diff
                y = ny
                x = nx
            total += acc
    return total / npaths
