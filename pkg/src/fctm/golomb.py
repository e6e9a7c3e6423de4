"""Order-0 Exp-Golomb coding of unsigned integers, MSB-first bit packing.

A value v is written as ``v + 1`` in ``2 * floor(log2(v + 1)) + 1`` bits, i.e.
``floor(log2(v + 1))`` zero bits followed by the binary form of ``v + 1``.
"""

from __future__ import annotations

import numpy as np

from .errors import CorruptPayload

# codes up to 2**MAX_PREFIX - 2 are supported (enough for 16-bit residuals)
MAX_PREFIX = 20
_WINDOW = MAX_PREFIX + 1


def zigzag(r: np.ndarray) -> np.ndarray:
    """0, -1, 1, -2, 2, ... -> 0, 1, 2, 3, 4, ..."""
    r = np.asarray(r, dtype=np.int64)
    return np.where(r >= 0, 2 * r, -2 * r - 1)


def unzigzag(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    return np.where(u & 1, -((u + 1) >> 1), u >> 1)


def code_lengths(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64) + 1
    # floor(log2) via bit_length; frexp is exact for integers below 2**53
    prefix = np.frexp(v.astype(np.float64))[1] - 1
    return 2 * prefix + 1


def encode_ue(values: np.ndarray) -> tuple[bytes, int]:
    """Pack unsigned values; returns (bytes, number of meaningful bits)."""
    v = np.asarray(values, dtype=np.int64).ravel()
    if v.size == 0:
        return b"", 0
    if v.min() < 0:
        raise ValueError("Exp-Golomb input must be non-negative")
    lengths = code_lengths(v)
    if lengths.max() > 2 * MAX_PREFIX + 1:
        raise ValueError("value too large for this Exp-Golomb coder")
    total = int(lengths.sum())
    # each codeword is (v + 1) right-aligned in `length` bits
    words = v + 1
    ends = np.cumsum(lengths)
    bits = np.zeros(total, dtype=np.uint8)
    max_len = int(lengths.max())
    for j in range(max_len):
        # bit j counted from the LSB of each codeword that is long enough
        sel = lengths > j
        pos = ends[sel] - 1 - j
        bits[pos] = ((words[sel] >> j) & 1).astype(np.uint8)
    return np.packbits(bits).tobytes(), total


def decode_ue(data: bytes, count: int, bit_offset: int = 0) -> tuple[np.ndarray, int]:
    """Read ``count`` codewords starting at ``bit_offset``.

    Returns the values and the bit position just past the last codeword.
    Raises CorruptPayload if the data runs out.
    """
    if count == 0:
        return np.zeros(0, dtype=np.int64), bit_offset
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    n = bits.size
    # next_one[p]: index of the first 1 bit at or after p (n if none)
    ones = np.flatnonzero(bits)
    next_one = np.full(n + 1, n, dtype=np.int64)
    if ones.size:
        idx = np.searchsorted(ones, np.arange(n + 1))
        valid = idx < ones.size
        next_one[valid] = ones[idx[valid]]
    # window[p]: the _WINDOW bits starting at p as an integer (zero past the end)
    padded = np.concatenate([bits.astype(np.int64), np.zeros(_WINDOW, dtype=np.int64)])
    window = np.zeros(n + 1, dtype=np.int64)
    for j in range(_WINDOW):
        window |= padded[j:j + n + 1] << (_WINDOW - 1 - j)

    next_one_l = next_one.tolist()
    window_l = window.tolist()
    out = [0] * count
    p = bit_offset
    for i in range(count):
        if p >= n:
            raise CorruptPayload("payload ended inside the residual data")
        q = next_one_l[p]
        prefix = q - p
        if prefix > MAX_PREFIX or q >= n:
            raise CorruptPayload(f"invalid Exp-Golomb prefix at bit {p}")
        end = q + prefix + 1
        if end > n:
            raise CorruptPayload("payload ended inside a codeword")
        out[i] = (window_l[q] >> (_WINDOW - 1 - prefix)) - 1
        p = end
    return np.asarray(out, dtype=np.int64), p
