"""Bit-word helpers for layer-occupancy encodings.

Words with up to 64 layers are stored as ``uint64`` arrays; wider words
fall back to object arrays of Python ints so any multiple of 8 works.
"""
from __future__ import annotations

import numpy as np

MAX_NATIVE_BITS = 64


def word_dtype(n_bits: int):
    return np.uint64 if n_bits <= MAX_NATIVE_BITS else object


def encode_occupancy(occupied: np.ndarray) -> np.ndarray:
    """Pack a boolean ``(..., n_bits)`` array into words, bit ``k`` <- ``occupied[..., k]``."""
    occupied = np.asarray(occupied, dtype=bool)
    n_bits = occupied.shape[-1]
    if n_bits <= MAX_NATIVE_BITS:
        weights = np.left_shift(np.uint64(1), np.arange(n_bits, dtype=np.uint64))
        return np.bitwise_or.reduce(np.where(occupied, weights, np.uint64(0)), axis=-1)
    weights = np.array([1 << k for k in range(n_bits)], dtype=object)
    out = np.empty(occupied.shape[:-1], dtype=object)
    flat_occ = occupied.reshape(-1, n_bits)
    flat_out = out.reshape(-1)
    for idx, row in enumerate(flat_occ):
        flat_out[idx] = int(sum(weights[row])) if row.any() else 0
    return out


def popcount(words: np.ndarray) -> np.ndarray:
    words = np.asarray(words)
    if words.dtype == object:
        return np.vectorize(lambda w: int(w).bit_count(), otypes=[np.int64])(words)
    return np.bitwise_count(words.astype(np.uint64)).astype(np.int64)


def low_mask(gamma: int) -> int:
    """Word with bits ``0 .. gamma-1`` set (layers ``1 .. gamma``)."""
    return (1 << gamma) - 1


def as_words(value: int, n_bits: int):
    """Scalar ``value`` in the array representation used for ``n_bits`` words."""
    return np.uint64(value) if n_bits <= MAX_NATIVE_BITS else int(value)
