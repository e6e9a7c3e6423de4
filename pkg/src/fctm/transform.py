"""Reduction transform: N multi-scale layers -> one reduced tensor z, and back.

The learned fusion/restoration networks are not available, so this module
provides a deterministic transform behind the same interface:

* ``pyramid_fuse`` average-pools every layer down to half the spatial size of
  the smallest layer, concatenates channels, optionally reorders channels by
  descending variance, truncates to ``target_channels`` and applies the
  per-channel gain vector.
* ``identity`` keeps the single input layer's spatial size and runs only the
  channel steps (reorder, truncate, gain), which are no-ops by default.

``restore`` undoes the gain, fills truncated channels with zeros, inverts the
permutation and upsamples by nearest-neighbour replication.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    IdentityWithMultipleLayers,
    NonDyadicPyramid,
    SideInfoMismatch,
    TargetChannelsTooLarge,
)
from .tensors import FeatureSet, ReducedFeature, Shape


class TransformId(enum.IntEnum):
    IDENTITY = 0
    PYRAMID_FUSE = 1


class ImportanceOrder(enum.IntEnum):
    NONE = 0
    VARIANCE_DESC = 1


@dataclass(frozen=True)
class TransformConfig:
    transform_id: TransformId = TransformId.PYRAMID_FUSE
    target_channels: Optional[int] = None  # None keeps every channel
    importance_order: ImportanceOrder = ImportanceOrder.NONE
    gain_vector: Optional[tuple[float, ...]] = None  # None means all ones

    def __post_init__(self):
        object.__setattr__(self, "transform_id", TransformId(self.transform_id))
        object.__setattr__(self, "importance_order", ImportanceOrder(self.importance_order))
        if self.target_channels is not None and self.target_channels < 1:
            raise ValueError("target_channels must be >= 1")
        if self.gain_vector is not None:
            gain = tuple(float(g) for g in self.gain_vector)
            if not all(np.isfinite(gain)) or any(g == 0 for g in gain):
                raise ValueError("gain vector entries must be finite and nonzero")
            object.__setattr__(self, "gain_vector", gain)


@dataclass(frozen=True, eq=False)
class TransformSideInfo:
    """Everything restore() needs, all of it carried in the container."""

    transform_id: TransformId
    shapes: tuple[Shape, ...]
    permutation: Optional[tuple[int, ...]]  # over all concatenated channels
    gain: np.ndarray = field(repr=False)  # float32, one entry per reduced channel

    @property
    def total_channels(self) -> int:
        return sum(s[0] for s in self.shapes)

    @property
    def reduced_channels(self) -> int:
        return int(self.gain.size)

    def __eq__(self, other):
        if not isinstance(other, TransformSideInfo):
            return NotImplemented
        return (
            self.transform_id == other.transform_id
            and tuple(self.shapes) == tuple(other.shapes)
            and self.permutation == other.permutation
            and np.array_equal(self.gain, other.gain)
        )


def reduced_spatial(shapes: Sequence[Shape], transform_id: TransformId) -> tuple[int, int]:
    """Spatial size of z for a layer-shape signature (validates the signature)."""
    transform_id = TransformId(transform_id)
    if transform_id == TransformId.IDENTITY:
        if len(shapes) != 1:
            raise IdentityWithMultipleLayers(
                f"identity transform takes exactly one layer, got {len(shapes)}"
            )
        return shapes[0][1], shapes[0][2]
    for (_, h0, w0), (_, h1, w1) in zip(shapes, shapes[1:]):
        if h0 != 2 * h1 or w0 != 2 * w1:
            raise NonDyadicPyramid(
                f"layer of size {h1}x{w1} is not half of the preceding {h0}x{w0}"
            )
    _, h, w = shapes[-1]
    if h % 2 or w % 2 or h == 0 or w == 0:
        raise NonDyadicPyramid(f"smallest layer {h}x{w} cannot be halved")
    return h // 2, w // 2


def _pool2(x: np.ndarray) -> np.ndarray:
    # fixed summation order keeps results bit-reproducible
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    c = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    return ((a + b) + (c + d)) * 0.25


def _pool_to(x: np.ndarray, h: int, w: int) -> np.ndarray:
    x = x.astype(np.float64)
    while x.shape[1] > h:
        x = _pool2(x)
    return x


def _replicate(x: np.ndarray, h: int, w: int) -> np.ndarray:
    fy, fx = h // x.shape[1], w // x.shape[2]
    return np.repeat(np.repeat(x, fy, axis=1), fx, axis=2)


def channel_variances(x: np.ndarray) -> np.ndarray:
    flat = np.asarray(x, dtype=np.float64).reshape(x.shape[0], -1)
    mean = flat.sum(axis=1) / flat.shape[1]
    return np.square(flat - mean[:, None]).sum(axis=1) / flat.shape[1]


def channel_importance(x) -> tuple[int, ...]:
    """Permutation ordering channels by descending variance, ties by index."""
    data = x.data if isinstance(x, ReducedFeature) else np.asarray(x)
    var = channel_variances(data)
    return tuple(int(i) for i in np.argsort(-var, kind="stable"))


def _fuse(x: FeatureSet, transform_id: TransformId) -> np.ndarray:
    h, w = reduced_spatial(x.shapes, transform_id)
    if transform_id == TransformId.IDENTITY:
        return x.layers[0].data.astype(np.float64)
    return np.concatenate([_pool_to(l.data, h, w) for l in x.layers], axis=0)


def reduce(
    x: FeatureSet,
    cfg: TransformConfig,
    permutation: Optional[Sequence[int]] = None,
) -> tuple[ReducedFeature, TransformSideInfo]:
    """Apply the reduction transform to one feature set.

    ``permutation`` pins the channel order (used to hold one order fixed for a
    whole refresh period); otherwise it is derived from this set when the
    config asks for variance ordering.
    """
    fused = _fuse(x, cfg.transform_id)
    total = fused.shape[0]
    target = total if cfg.target_channels is None else cfg.target_channels
    if target > total:
        raise TargetChannelsTooLarge(
            f"target_channels={target} exceeds the {total} available channels"
        )

    if cfg.importance_order == ImportanceOrder.VARIANCE_DESC:
        if permutation is None:
            permutation = channel_importance(fused)
        permutation = tuple(int(p) for p in permutation)
        if sorted(permutation) != list(range(total)):
            raise SideInfoMismatch("permutation is not a permutation of the channels")
        fused = fused[list(permutation)]
    else:
        permutation = None

    if cfg.gain_vector is None:
        gain = np.ones(target, dtype=np.float32)
    else:
        gain = np.asarray(cfg.gain_vector, dtype=np.float32)
        if gain.size != target:
            raise SideInfoMismatch(
                f"gain vector has {gain.size} entries, reduced tensor has {target} channels"
            )
    z = fused[:target] * gain.astype(np.float64)[:, None, None]
    side = TransformSideInfo(cfg.transform_id, tuple(x.shapes), permutation, gain)
    return ReducedFeature(z), side


def restore(z: ReducedFeature, side: TransformSideInfo) -> FeatureSet:
    h, w = reduced_spatial(side.shapes, side.transform_id)
    if z.shape != (side.reduced_channels, h, w):
        raise SideInfoMismatch(
            f"reduced tensor {z.shape} does not match side info "
            f"({side.reduced_channels}, {h}, {w})"
        )
    total = side.total_channels
    data = z.data.astype(np.float64) / side.gain.astype(np.float64)[:, None, None]
    full = np.zeros((total, h, w), dtype=np.float64)
    full[: side.reduced_channels] = data
    if side.permutation is not None:
        if len(side.permutation) != total:
            raise SideInfoMismatch("permutation length differs from the channel count")
        unpermuted = np.empty_like(full)
        unpermuted[list(side.permutation)] = full
        full = unpermuted

    if side.transform_id == TransformId.IDENTITY:
        return FeatureSet((full,))
    layers = []
    start = 0
    for c, lh, lw in side.shapes:
        layers.append(_replicate(full[start:start + c], lh, lw))
        start += c
    return FeatureSet(tuple(layers))
