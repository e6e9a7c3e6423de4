"""Temporal downsampling (drop alternate feature sets) and linear re-synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, PlanMismatch
from .tensors import FeatureSequence, FeatureSet

SUPPORTED_RATIOS = (1, 2)


def kept_indices(count: int, ratio: int) -> tuple[int, ...]:
    """Indices surviving downsampling. At 2x the last set is always kept."""
    if ratio not in SUPPORTED_RATIOS:
        raise ValueError(f"temporal ratio must be 1 or 2, got {ratio}")
    if count < 0:
        raise ValueError("count must be non-negative")
    if ratio == 1:
        return tuple(range(count))
    kept = list(range(0, count, 2))
    if count and kept[-1] != count - 1:
        kept.append(count - 1)
    return tuple(kept)


def kept_count(count: int, ratio: int) -> int:
    """len(kept_indices(count, ratio)) without building the tuple."""
    if ratio not in SUPPORTED_RATIOS:
        raise ValueError(f"temporal ratio must be 1 or 2, got {ratio}")
    if ratio == 1 or count == 0:
        return count
    return -(-count // 2) + (count % 2 == 0)


@dataclass(frozen=True)
class TemporalPlan:
    ratio: int
    original_count: int
    kept_indices: tuple[int, ...]

    @classmethod
    def build(cls, original_count: int, ratio: int) -> "TemporalPlan":
        return cls(ratio, original_count, kept_indices(original_count, ratio))

    def __post_init__(self):
        if self.kept_indices != kept_indices(self.original_count, self.ratio):
            raise PlanMismatch(
                f"kept indices {self.kept_indices} do not follow the {self.ratio}x rule "
                f"for {self.original_count} sets"
            )

    @property
    def kept_count(self) -> int:
        return len(self.kept_indices)

    def source_of(self) -> list[int]:
        """For every original index, the position (in kept order) of the kept set
        at or immediately before it."""
        out = []
        k = 0
        for t in range(self.original_count):
            while k + 1 < self.kept_count and self.kept_indices[k + 1] <= t:
                k += 1
            out.append(k)
        return out


def downsample(seq: FeatureSequence, ratio: int) -> tuple[FeatureSequence, TemporalPlan]:
    if not seq.sets:
        raise EmptyInput("cannot downsample an empty sequence")
    plan = TemporalPlan.build(len(seq), ratio)
    if ratio == 1:
        return seq, plan
    return FeatureSequence(tuple(seq.sets[i] for i in plan.kept_indices)), plan


def _midpoint(past: FeatureSet, future: FeatureSet) -> FeatureSet:
    # float64 sum of two float32 values is exact; the single rounding back to
    # float32 makes the midpoint exact whenever it is representable
    return FeatureSet(tuple(
        (p.data.astype(np.float64) + f.data.astype(np.float64)) * 0.5
        for p, f in zip(past.layers, future.layers)
    ))


def upsample(kept: FeatureSequence, plan: TemporalPlan) -> FeatureSequence:
    """Re-insert every dropped set as the average of its two kept neighbours."""
    if len(kept) != plan.kept_count:
        raise PlanMismatch(
            f"plan expects {plan.kept_count} kept sets, received {len(kept)}"
        )
    if plan.ratio == 1:
        return kept
    by_index = dict(zip(plan.kept_indices, kept.sets))
    out = []
    for t in range(plan.original_count):
        if t in by_index:
            out.append(by_index[t])
            continue
        past, future = by_index.get(t - 1), by_index.get(t + 1)
        # the 2x rule guarantees both neighbours; anything else is a bad plan
        if past is None or future is None:
            raise PlanMismatch(f"dropped set {t} lacks a kept neighbour on both sides")
        out.append(_midpoint(past, future))
    return FeatureSequence(tuple(out))
