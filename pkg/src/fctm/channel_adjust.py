"""Drop near-constant channels of z before packing; mean-fill them at the decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAlpha, LengthMismatch
from .tensors import ReducedFeature

DEFAULT_ALPHA = 0.1


@dataclass(frozen=True, eq=False)
class ActivityMap:
    """``removed[c]`` is True when channel c was dropped (a_c = 1)."""

    removed: np.ndarray
    threshold_used: float = 0.0

    def __post_init__(self):
        removed = np.array(self.removed, dtype=bool).ravel()
        if removed.size == 0:
            raise LengthMismatch("activity map must cover at least one channel")
        if removed.all():
            raise ValueError("activity map may not remove every channel")
        removed.setflags(write=False)
        object.__setattr__(self, "removed", removed)

    @classmethod
    def keep_all(cls, channels: int) -> "ActivityMap":
        return cls(np.zeros(channels, dtype=bool))

    def __len__(self):
        return int(self.removed.size)

    @property
    def kept(self) -> np.ndarray:
        return np.flatnonzero(~self.removed)

    @property
    def kept_count(self) -> int:
        return int((~self.removed).sum())

    def __eq__(self, other):
        if not isinstance(other, ActivityMap):
            return NotImplemented
        return np.array_equal(self.removed, other.removed)


def channel_ranges(z) -> np.ndarray:
    data = z.data if isinstance(z, ReducedFeature) else np.asarray(z)
    flat = data.reshape(data.shape[0], -1).astype(np.float64)
    return flat.max(axis=1) - flat.min(axis=1)


def activity_map(ranges, alpha: float = DEFAULT_ALPHA) -> ActivityMap:
    r = np.asarray(ranges, dtype=np.float64).ravel()
    if r.size == 0:
        raise LengthMismatch("no channel ranges given")
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie strictly between 0 and 1, got {alpha}")
    threshold = alpha * float(r.sum() / r.size)
    removed = r < threshold
    if removed.all():
        # unreachable for alpha < 1, kept as a guard
        removed[int(np.argmax(r))] = False
    return ActivityMap(removed, threshold)


def drop_channels(z: ReducedFeature, amap: ActivityMap) -> ReducedFeature:
    if len(amap) != z.channels:
        raise LengthMismatch(
            f"activity map covers {len(amap)} channels, tensor has {z.channels}"
        )
    return ReducedFeature(z.data[amap.kept])


def restore_channels(z_kept: ReducedFeature, amap: ActivityMap) -> ReducedFeature:
    """Put kept channels back in place; removed ones get the per-pixel mean of
    the kept channels."""
    if z_kept.channels != amap.kept_count:
        raise LengthMismatch(
            f"tensor has {z_kept.channels} channels, map keeps {amap.kept_count}"
        )
    kept = z_kept.data
    out = np.empty((len(amap),) + kept.shape[1:], dtype=np.float64)
    out[amap.kept] = kept
    if amap.removed.any():
        out[amap.removed] = kept.mean(axis=0)
    return ReducedFeature(out)
