"""Pure-numpy fallback for the compiled Pauli kernels (same signatures)."""
from __future__ import annotations

import numpy as np


def _masks(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    codes = np.asarray(codes, dtype=np.int64)
    x = np.zeros_like(codes)
    z = np.zeros_like(codes)
    for p in range(n):
        d = (codes >> (2 * p)) & 3
        x |= ((d == 1) | (d == 2)).astype(np.int64) << p
        z |= (d >= 2).astype(np.int64) << p
    return x, z


def _parity_signs(dim: int) -> np.ndarray:
    # signs[z, c] = (-1)**popcount(c & z)
    idx = np.arange(dim, dtype=np.int64)
    and_ = idx[:, None] & idx[None, :]
    par = np.zeros_like(and_)
    while np.any(and_):
        par ^= and_ & 1
        and_ >>= 1
    return 1.0 - 2.0 * par


def trace_sums(g: np.ndarray, codes: np.ndarray, n: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    dim = g.shape[0]
    cols = np.arange(dim)
    signs = _parity_signs(dim)
    xs, zs = _masks(codes, n)
    out = np.empty(len(xs))
    for k, (x, z) in enumerate(zip(xs, zs)):
        out[k] = g[cols ^ x, cols] @ signs[z]
    return out


def trace_sums_batch(gs: np.ndarray, codes: np.ndarray, n: int) -> np.ndarray:
    gs = np.asarray(gs, dtype=np.float64)
    dim = gs.shape[1]
    cols = np.arange(dim)
    signs = _parity_signs(dim)
    xs, zs = _masks(codes, n)
    out = np.empty((gs.shape[0], len(xs)))
    for k, (x, z) in enumerate(zip(xs, zs)):
        out[:, k] = gs[:, cols ^ x, cols] @ signs[z]
    return out


def scatter(codes: np.ndarray, weights: np.ndarray, n: int) -> np.ndarray:
    dim = 1 << n
    rows = np.arange(dim)
    signs = _parity_signs(dim)
    xs, zs = _masks(codes, n)
    out = np.zeros((dim, dim))
    for x, z, w in zip(xs, zs, np.asarray(weights, dtype=np.float64)):
        out[rows, rows ^ x] += w * signs[z]
    return out
