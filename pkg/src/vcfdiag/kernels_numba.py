"""Numba-jitted array kernels (default backend).

Loop implementations of the data-movement kernels behind convolution and
pooling. Single-threaded on purpose: accumulation order is fixed, so results
are reproducible run to run.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def im2col(xp, kh, kw, stride):
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = np.empty((n, c * kh * kw, ho * wo), dtype=xp.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oh in range(ho):
                        src_h = oh * stride + i
                        base = oh * wo
                        for ow in range(wo):
                            cols[b, row, base + ow] = xp[b, ch, src_h, ow * stride + j]
    return cols


@njit(cache=True)
def col2im(cols, n, c, hp, wp, kh, kw, stride):
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    xp = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oh in range(ho):
                        src_h = oh * stride + i
                        base = oh * wo
                        for ow in range(wo):
                            xp[b, ch, src_h, ow * stride + j] += cols[b, row, base + ow]
    return xp


@njit(cache=True)
def maxpool_forward(xp, kh, kw, stride):
    n, c, hp, wp = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    out = np.empty((n, c, ho, wo), dtype=xp.dtype)
    idx = np.empty((n, c, ho, wo), dtype=np.int64)
    for b in range(n):
        for ch in range(c):
            for oh in range(ho):
                for ow in range(wo):
                    best = xp[b, ch, oh * stride, ow * stride]
                    best_k = 0
                    for i in range(kh):
                        for j in range(kw):
                            v = xp[b, ch, oh * stride + i, ow * stride + j]
                            if v > best:
                                best = v
                                best_k = i * kw + j
                    out[b, ch, oh, ow] = best
                    idx[b, ch, oh, ow] = best_k
    return out, idx


@njit(cache=True)
def maxpool_backward(dout, idx, n, c, hp, wp, kh, kw, stride):
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    dxp = np.zeros((n, c, hp, wp), dtype=dout.dtype)
    for b in range(n):
        for ch in range(c):
            for oh in range(ho):
                for ow in range(wo):
                    k = idx[b, ch, oh, ow]
                    dxp[b, ch, oh * stride + k // kw, ow * stride + k % kw] += dout[
                        b, ch, oh, ow
                    ]
    return dxp
