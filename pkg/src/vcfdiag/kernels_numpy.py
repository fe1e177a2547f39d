"""Pure-numpy array kernels (fallback backend).

Same contract as ``vcfdiag.kernels_numba``: inputs are already padded,
``im2col``/``col2im`` move data between image and column layouts, and the
pooling pair returns/consumes flat within-window argmax indices. All outputs
are bit-compatible with the numba flavor up to float summation order in
``col2im``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

NAME = "numpy"


def _out_hw(hp: int, wp: int, kh: int, kw: int, stride: int) -> tuple[int, int]:
    return (hp - kh) // stride + 1, (wp - kw) // stride + 1


def im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N, C*kh*kw, Ho*Wo) patch matrix."""
    n, c, hp, wp = xp.shape
    ho, wo = _out_hw(hp, wp, kh, kw, stride)
    s0, s1, s2, s3 = xp.strides
    windows = as_strided(
        xp,
        shape=(n, c, kh, kw, ho, wo),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
    )
    # reshape of the overlapping view forces the copy into column layout
    return windows.reshape(n, c * kh * kw, ho * wo)


def col2im(
    cols: np.ndarray, n: int, c: int, hp: int, wp: int, kh: int, kw: int, stride: int
) -> np.ndarray:
    """Scatter-add a column matrix back to (N, C, Hp, Wp)."""
    ho, wo = _out_hw(hp, wp, kh, kw, stride)
    cols6 = cols.reshape(n, c, kh, kw, ho, wo)
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                cols6[:, :, i, j]
            )
    return xp


def maxpool_forward(
    xp: np.ndarray, kh: int, kw: int, stride: int
) -> tuple[np.ndarray, np.ndarray]:
    """Max over sliding windows; also returns flat argmax per window."""
    n, c, hp, wp = xp.shape
    ho, wo = _out_hw(hp, wp, kh, kw, stride)
    s0, s1, s2, s3 = xp.strides
    windows = as_strided(
        xp,
        shape=(n, c, ho, wo, kh, kw),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
    )
    flat = windows.reshape(n, c, ho, wo, kh * kw)
    idx = flat.argmax(axis=-1).astype(np.int64)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool_backward(
    dout: np.ndarray,
    idx: np.ndarray,
    n: int,
    c: int,
    hp: int,
    wp: int,
    kh: int,
    kw: int,
    stride: int,
) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    ho, wo = _out_hw(hp, wp, kh, kw, stride)
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    ni, ci, hi, wi = np.indices((n, c, ho, wo), sparse=False)
    rows = hi * stride + idx // kw
    cols = wi * stride + idx % kw
    np.add.at(dxp, (ni, ci, rows, cols), dout)
    return dxp
