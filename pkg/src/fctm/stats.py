"""Statistical side information: global feature stats and reduced-feature stats.

Global stats are summed over layers, treating the N layers as independent
normal variables: the mean is the sum of layer means and the variance the sum
of layer variances. They travel as bfloat16. Reduced stats are the plain mean
and standard deviation over every element of z and travel as float32.

All variances are population variances (divide by the element count).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyLayer, EmptyTensor, NonFiniteValue
from .tensors import FeatureLayer, FeatureSet

_F32 = struct.Struct("<f")
_U32 = struct.Struct("<I")


def mean_std(values: np.ndarray) -> tuple[float, float]:
    """Population mean and standard deviation, accumulated in float64."""
    v = np.asarray(values, dtype=np.float64).ravel()
    mean = float(v.sum() / v.size)
    var = float(np.square(v - mean).sum() / v.size)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class GlobalStats:
    mu_x: float
    sigma_x: float

    def __post_init__(self):
        if not (math.isfinite(self.mu_x) and math.isfinite(self.sigma_x)):
            raise NonFiniteValue("global stats must be finite")
        if self.sigma_x < 0:
            raise ValueError("sigma_x must be non-negative")

    def quantized(self) -> "GlobalStats":
        """The values the decoder actually sees after bfloat16 signaling."""
        return GlobalStats(
            from_bfloat16(to_bfloat16(self.mu_x)),
            from_bfloat16(to_bfloat16(self.sigma_x)),
        )


@dataclass(frozen=True)
class ReducedStats:
    mu_z: float
    sigma_z: float

    def __post_init__(self):
        if not (math.isfinite(self.mu_z) and math.isfinite(self.sigma_z)):
            raise NonFiniteValue("reduced stats must be finite")
        if self.sigma_z < 0:
            raise ValueError("sigma_z must be non-negative")

    def quantized(self) -> "ReducedStats":
        return ReducedStats(float(np.float32(self.mu_z)), float(np.float32(self.sigma_z)))


def layer_stats(layers) -> tuple[float, float]:
    """(sum of layer means, sqrt of sum of layer variances) for a list of arrays."""
    mean_sum = 0.0
    var_sum = 0.0
    for i, layer in enumerate(layers):
        data = layer.data if isinstance(layer, FeatureLayer) else np.asarray(layer)
        if data.size == 0:
            raise EmptyLayer(f"layer {i} has no elements")
        m, s = mean_std(data)
        mean_sum += m
        var_sum += s * s
    return mean_sum, math.sqrt(var_sum)


def global_stats(x: FeatureSet) -> GlobalStats:
    mu, sigma = layer_stats(x.layers)
    return GlobalStats(mu, sigma)


def reduced_stats(z) -> ReducedStats:
    data = z.data if isinstance(z, FeatureLayer) else np.asarray(z)
    if data.size == 0:
        raise EmptyTensor("cannot compute statistics of an empty tensor")
    return ReducedStats(*mean_std(data))


def to_bfloat16(v: float) -> int:
    """16-bit bfloat pattern of ``v`` (round to nearest, ties to even)."""
    if not math.isfinite(v):
        raise NonFiniteValue(f"cannot encode {v!r} as bfloat16")
    try:
        bits = _U32.unpack(_F32.pack(v))[0]
    except OverflowError:
        raise NonFiniteValue(f"{v!r} is outside the float32 range") from None
    # float32 rounding of v may itself overflow to inf
    if (bits & 0x7F800000) == 0x7F800000:
        raise NonFiniteValue(f"{v!r} is outside the float32 range")
    rounded = (bits + 0x7FFF + ((bits >> 16) & 1)) >> 16
    if (rounded & 0x7F80) == 0x7F80:
        raise NonFiniteValue(f"{v!r} overflows bfloat16")
    return rounded


def from_bfloat16(bits: int) -> float:
    if not 0 <= bits <= 0xFFFF:
        raise ValueError(f"bfloat16 pattern out of range: {bits:#x}")
    return _F32.unpack(_U32.pack(bits << 16))[0]
