"""Feature conversion: tile z into one monochrome frame, min-max normalize,
quantize to ``bitdepth`` bits; and the decoder-side inverses.

Quantization multiplies by 2**bitdepth while dequantization divides by
2**bitdepth - 1. The asymmetry is intentional; the round trip error of a
normalized value stays within 2**-bitdepth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTensor, LayoutMismatch, SampleOutOfRange
from .stats import ReducedStats, mean_std
from .tensors import ReducedFeature

DEFAULT_BITDEPTH = 10


@dataclass(frozen=True)
class PackLayout:
    grid_rows: int
    grid_cols: int
    channel_h: int
    channel_w: int
    channel_count: int

    def __post_init__(self):
        if min(self.grid_rows, self.grid_cols, self.channel_h, self.channel_w,
               self.channel_count) < 1:
            raise LayoutMismatch(f"layout fields must be positive: {self}")
        if self.grid_rows * self.grid_cols < self.channel_count:
            raise LayoutMismatch(
                f"{self.grid_rows}x{self.grid_cols} grid cannot hold {self.channel_count} channels"
            )

    @classmethod
    def for_channels(cls, channels: int, h: int, w: int) -> "PackLayout":
        cols = math.isqrt(channels - 1) + 1 if channels > 1 else 1  # ceil(sqrt)
        rows = -(-channels // cols)
        return cls(rows, cols, h, w, channels)

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.grid_rows * self.channel_h, self.grid_cols * self.channel_w


@dataclass(frozen=True, eq=False)
class PackedFrame:
    samples: np.ndarray  # uint16, (height, width)
    bitdepth: int = DEFAULT_BITDEPTH

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise LayoutMismatch(f"frame must be 2-D, got shape {s.shape}")
        if s.size and (s.min() < 0 or s.max() > (1 << self.bitdepth) - 1):
            raise SampleOutOfRange(f"samples exceed the {self.bitdepth}-bit range")
        s = s.astype(np.uint16)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    def __eq__(self, other):
        if not isinstance(other, PackedFrame):
            return NotImplemented
        return self.bitdepth == other.bitdepth and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class NormParams:
    z_min: float
    z_max: float

    @property
    def span(self) -> float:
        return self.z_max - self.z_min


def pack(z) -> tuple[np.ndarray, PackLayout]:
    """Raster-scan the channels of z into a near-square grid of tiles."""
    data = z.data if isinstance(z, ReducedFeature) else np.asarray(z)
    if data.size == 0:
        raise EmptyTensor("cannot pack an empty tensor")
    c, h, w = data.shape
    layout = PackLayout.for_channels(c, h, w)
    rows, cols = layout.grid_rows, layout.grid_cols
    tiles = np.zeros((rows * cols, h, w), dtype=np.float64)
    tiles[:c] = data
    frame = tiles.reshape(rows, cols, h, w).transpose(0, 2, 1, 3).reshape(rows * h, cols * w)
    return frame, layout


def unpack(frame: np.ndarray, layout: PackLayout) -> np.ndarray:
    """Inverse of :func:`pack`; padding tiles are discarded."""
    frame = np.asarray(frame)
    if frame.shape != layout.frame_shape:
        raise LayoutMismatch(f"frame is {frame.shape}, layout needs {layout.frame_shape}")
    rows, cols, h, w = layout.grid_rows, layout.grid_cols, layout.channel_h, layout.channel_w
    tiles = frame.reshape(rows, h, cols, w).transpose(0, 2, 1, 3).reshape(rows * cols, h, w)
    return tiles[: layout.channel_count].copy()


def normalize(frame: np.ndarray) -> tuple[np.ndarray, NormParams]:
    f = np.asarray(frame, dtype=np.float64)
    z_min, z_max = float(f.min()), float(f.max())
    if z_max == z_min:
        return np.zeros_like(f), NormParams(z_min, z_max)
    norm = np.clip((f - z_min) / (z_max - z_min), 0.0, 1.0)
    return norm, NormParams(z_min, z_max)


def quantize(norm: np.ndarray, bitdepth: int = DEFAULT_BITDEPTH) -> PackedFrame:
    levels = 1 << bitdepth
    q = np.clip(np.floor(np.asarray(norm, dtype=np.float64) * levels), 0, levels - 1)
    return PackedFrame(q.astype(np.uint16), bitdepth)


def dequantize(q: PackedFrame) -> np.ndarray:
    return q.samples.astype(np.float64) / ((1 << q.bitdepth) - 1)


def refine_reduced(z_dq, stats: ReducedStats) -> ReducedFeature:
    """Re-standardize z_dq to the signaled mean and standard deviation.

    A constant z_dq has no spread to rescale, so every element becomes mu_z.
    """
    data = np.asarray(z_dq.data if isinstance(z_dq, ReducedFeature) else z_dq, dtype=np.float64)
    if data.size == 0:
        raise EmptyTensor("cannot refine an empty tensor")
    mu, sigma = mean_std(data)
    if sigma == 0.0:
        return ReducedFeature(np.full(data.shape, stats.mu_z))
    return ReducedFeature((data - mu) / sigma * stats.sigma_z + stats.mu_z)
