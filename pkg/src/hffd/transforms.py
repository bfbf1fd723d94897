"""Frequency analyses for face feature extraction.

Single-level orthonormal 2D Haar decomposition, orthonormal 2D DCT-II,
and JPEG-style zigzag coefficient ordering.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn


@dataclass(frozen=True)
class SubBandSet:
    """The four half-resolution sub-bands of one wavelet decomposition level."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        shapes = {self.ll.shape, self.lh.shape, self.hl.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ValueError(f"sub-band shapes differ: {sorted(shapes)}")

    @property
    def shape(self):
        return self.ll.shape


def dwt_haar_2d(image: np.ndarray) -> SubBandSet:
    """Single-level orthonormal 2D Haar decomposition.

    Each non-overlapping 2x2 block [[a, b], [c, d]] contributes one
    coefficient per band:

        ll = (a + b + c + d) / 2      hl = (a - b + c - d) / 2
        lh = (a + b - c - d) / 2      hh = (a - b - c + d) / 2

    The scaling makes the transform orthonormal, so energy is preserved
    and `idwt_haar_2d` reconstructs the input exactly.

    Raises:
        ValueError: if the input is not a 2D matrix with even dimensions.
    """
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D matrix, got shape {x.shape}")
    h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"dimensions must be even, got {h}x{w}")
    a = x[0::2, 0::2]
    b = x[0::2, 1::2]
    c = x[1::2, 0::2]
    d = x[1::2, 1::2]
    return SubBandSet(
        ll=(a + b + c + d) / 2.0,
        lh=(a + b - c - d) / 2.0,
        hl=(a - b + c - d) / 2.0,
        hh=(a - b - c + d) / 2.0,
    )


def idwt_haar_2d(bands: SubBandSet) -> np.ndarray:
    """Exact inverse of `dwt_haar_2d`."""
    ll = np.asarray(bands.ll, dtype=np.float64)
    lh = np.asarray(bands.lh, dtype=np.float64)
    hl = np.asarray(bands.hl, dtype=np.float64)
    hh = np.asarray(bands.hh, dtype=np.float64)
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise ValueError("sub-band shapes differ")
    h, w = ll.shape
    out = np.empty((2 * h, 2 * w), dtype=np.float64)
    out[0::2, 0::2] = (ll + hl + lh + hh) / 2.0
    out[0::2, 1::2] = (ll - hl + lh - hh) / 2.0
    out[1::2, 0::2] = (ll + hl - lh - hh) / 2.0
    out[1::2, 1::2] = (ll - hl - lh + hh) / 2.0
    return out


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal (separable) 2D DCT-II of a square block."""
    x = np.asarray(block, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return dctn(x, type=2, norm="ortho")


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of `dct2` (orthonormal 2D DCT-III)."""
    x = np.asarray(coeffs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    return idctn(x, type=2, norm="ortho")


@lru_cache(maxsize=None)
def zigzag_order(n: int) -> tuple:
    """(row, col) pairs of an NxN grid in JPEG zigzag order.

    Anti-diagonals are traversed starting at (0, 0); odd diagonals run
    top-right to bottom-left, even ones bottom-left to top-right, so the
    sequence orders coefficients by increasing spatial frequency.
    """
    if n < 1:
        raise ValueError("grid size must be positive")
    order = []
    for s in range(2 * n - 1):
        lo = max(0, s - n + 1)
        hi = min(s, n - 1)
        rows = range(lo, hi + 1) if s % 2 else range(hi, lo - 1, -1)
        order.extend((r, s - r) for r in rows)
    return tuple(order)


@lru_cache(maxsize=None)
def _zigzag_gather(n: int):
    order = zigzag_order(n)
    rows = np.fromiter((r for r, _ in order), dtype=np.intp, count=n * n)
    cols = np.fromiter((c for _, c in order), dtype=np.intp, count=n * n)
    return rows, cols


def zigzag_take(coeffs: np.ndarray, k: int) -> np.ndarray:
    """First k entries of a square matrix read in zigzag order."""
    x = np.asarray(coeffs)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {x.shape}")
    n = x.shape[0]
    if not 1 <= k <= n * n:
        raise ValueError(f"k must be in [1, {n * n}], got {k}")
    rows, cols = _zigzag_gather(n)
    return x[rows[:k], cols[:k]].astype(np.float64)
