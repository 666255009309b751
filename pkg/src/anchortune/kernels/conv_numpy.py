"""Pure-NumPy im2col / col2im kernels.

Fallback backend used when the compiled extension is unavailable. Both
backends share the same column layout, rows indexed by (channel, ki, kj)
and columns by (sample, out_row, out_col), and accumulate col2im blocks in
(ki, kj)-major order, so their outputs are bit-identical.
"""

import numpy as np


def im2col(x, kh, kw, sh, sw, ph, pw, oh, ow):
    """Unfold padded input windows into a (C*kh*kw, N*oh*ow) matrix."""
    n, c, h, w = x.shape
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((c, kh, kw, n, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = x[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw]
            cols[:, i, j] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, n * oh * ow)


def col2im(cols, n, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow):
    """Scatter-add a column matrix back onto the (padded) input grid.

    Inverse accumulation of :func:`im2col`; overlapping windows sum.
    """
    cols = cols.reshape(c, kh, kw, n, oh, ow)
    out = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] += cols[
                :, i, j
            ].transpose(1, 0, 2, 3)
    if ph or pw:
        out = out[:, :, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(out)
