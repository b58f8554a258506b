"""Iterative radix-2 FFT, vectorized over leading axes."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["fft", "ifft"]


@lru_cache(maxsize=None)
def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(size, sign):
    half = size // 2
    return np.exp(sign * 2j * np.pi * np.arange(half) / size)


def _transform(x, sign):
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    lead = x.shape[:-1]
    a = x[..., _bit_reverse(n)]
    b = np.empty_like(a)
    size = 2
    while size <= n:
        half = size // 2
        blocks = a.reshape(lead + (n // size, 2, half))
        odd = blocks[..., 1, :] * _twiddles(size, sign)
        out = b.reshape(lead + (n // size, 2, half))
        np.add(blocks[..., 0, :], odd, out=out[..., 0, :])
        np.subtract(blocks[..., 0, :], odd, out=out[..., 1, :])
        a, b = b, a
        size *= 2
    return a


def fft(x):
    """Forward DFT ``X[k] = sum_n x[n] exp(-2 pi i k n / N)``, unnormalized."""
    return _transform(x, -1)


def ifft(x):
    """Inverse of :func:`fft` (divides by ``N``)."""
    x = np.asarray(x)
    return _transform(x, +1) / x.shape[-1]

