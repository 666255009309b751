# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled im2col / col2im kernels.

Same column layout and accumulation order as conv_numpy, so results are
bit-identical across backends; only the data movement is faster here.
"""

import numpy as np

cimport cython

ctypedef fused real:
    float
    double


def im2col(x, int kh, int kw, int sh, int sw, int ph, int pw, int oh, int ow):
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    x = np.ascontiguousarray(x)
    cdef int n = x.shape[0], c = x.shape[1]
    cols = np.empty((c * kh * kw, n * oh * ow), dtype=x.dtype)
    if x.dtype == np.float32:
        _im2col_impl[float](x, cols, kh, kw, sh, sw, oh, ow)
    else:
        _im2col_impl[double](x, cols, kh, kw, sh, sw, oh, ow)
    return cols


def col2im(cols, int n, int c, int h, int w, int kh, int kw, int sh, int sw,
           int ph, int pw, int oh, int ow):
    cols = np.ascontiguousarray(cols)
    out = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    if cols.dtype == np.float32:
        _col2im_impl[float](cols, out, kh, kw, sh, sw, oh, ow)
    else:
        _col2im_impl[double](cols, out, kh, kw, sh, sw, oh, ow)
    if ph or pw:
        out = np.ascontiguousarray(out[:, :, ph:ph + h, pw:pw + w])
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _im2col_impl(real[:, :, :, ::1] x, real[:, ::1] cols, int kh, int kw,
                       int sh, int sw, int oh, int ow) noexcept nogil:
    cdef int n = x.shape[0], c = x.shape[1]
    cdef int ci, i, j, b, r, q, row, col
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                row = (ci * kh + i) * kw + j
                for b in range(n):
                    for r in range(oh):
                        col = (b * oh + r) * ow
                        for q in range(ow):
                            cols[row, col + q] = x[b, ci, r * sh + i, q * sw + j]


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _col2im_impl(real[:, ::1] cols, real[:, :, :, ::1] out, int kh, int kw,
                       int sh, int sw, int oh, int ow) noexcept nogil:
    cdef int n = out.shape[0], c = out.shape[1]
    cdef int ci, i, j, b, r, q, row, col
    # (i, j)-major accumulation matches the NumPy backend's block adds.
    for i in range(kh):
        for j in range(kw):
            for ci in range(c):
                row = (ci * kh + i) * kw + j
                for b in range(n):
                    for r in range(oh):
                        col = (b * oh + r) * ow
                        for q in range(ow):
                            out[b, ci, r * sh + i, q * sw + j] += cols[row, col + q]
