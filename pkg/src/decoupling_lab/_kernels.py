"""Fused loops for weighted power sums.

Every loop runs in a fixed index order so results do not depend on how work
is split between processes.
"""
from __future__ import annotations

import numba
import numpy as np


def half_powers(ps) -> np.ndarray:
    """p/2 as an integer where that is exact, else 0 (which selects ``pow``)."""
    out = np.zeros(len(ps), dtype=np.int64)
    for k, p in enumerate(ps):
        h = 0.5 * p
        if h == int(h) and h >= 1:
            out[k] = int(h)
    return out


@numba.njit(cache=True)
def _pow_abs2(a, p, half):
    if half > 0:
        v = a
        for _ in range(half - 1):
            v *= a
        return v
    return a ** (0.5 * p)


@numba.njit(cache=True)
def accumulate_powers(F, w, tot, ps, halves, out):
    """out[k] += sum |F|^ps[k] w over the block, and tot += F."""
    n0, n1 = F.shape
    nk = ps.shape[0]
    acc = np.zeros(nk)
    for i in range(n0):
        for j in range(n1):
            z = F[i, j]
            tot[i, j] += z
            a = z.real * z.real + z.imag * z.imag
            wij = w[i, j]
            for k in range(nk):
                acc[k] += _pow_abs2(a, ps[k], halves[k]) * wij
    for k in range(nk):
        out[k] += acc[k]


@numba.njit(cache=True)
def power_sums(F, w, ps, halves, out):
    """out[k] += sum |F|^ps[k] w over the block."""
    n0, n1 = F.shape
    nk = ps.shape[0]
    acc = np.zeros(nk)
    for i in range(n0):
        for j in range(n1):
            z = F[i, j]
            a = z.real * z.real + z.imag * z.imag
            wij = w[i, j]
            for k in range(nk):
                acc[k] += _pow_abs2(a, ps[k], halves[k]) * wij
    for k in range(nk):
        out[k] += acc[k]


@numba.njit(cache=True)
def abs_power(F, p, half, out):
    n0, n1 = F.shape
    for i in range(n0):
        for j in range(n1):
            z = F[i, j]
            out[i, j] = _pow_abs2(z.real * z.real + z.imag * z.imag, p, half)
