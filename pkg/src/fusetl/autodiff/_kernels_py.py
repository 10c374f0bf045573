"""Pure-numpy im2col/col2im.

Column layout is ``(N, C, K, K, OH, OW)`` over an already padded input.
``col2im`` accumulates kernel offsets in row-major ``(kh, kw)`` order, the
same order the compiled kernels use, so both backends agree bit for bit.
"""

import numpy as np


def im2col(xp, k, stride, oh, ow):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, k, k, oh, ow), dtype=xp.dtype)
    h_end = stride * (oh - 1) + 1
    w_end = stride * (ow - 1) + 1
    for kh in range(k):
        for kw in range(k):
            cols[:, :, kh, kw] = xp[:, :, kh:kh + h_end:stride, kw:kw + w_end:stride]
    return cols


def col2im(cols, hp, wp, stride):
    n, c, k, _, oh, ow = cols.shape
    dxp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    h_end = stride * (oh - 1) + 1
    w_end = stride * (ow - 1) + 1
    for kh in range(k):
        for kw in range(k):
            dxp[:, :, kh:kh + h_end:stride, kw:kw + w_end:stride] += cols[:, :, kh, kw]
    return dxp
