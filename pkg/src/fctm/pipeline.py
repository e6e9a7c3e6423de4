"""End-to-end encoder and decoder.

Encoder, per refresh period of coded frames:
global stats -> temporal downsample -> reduce -> channel adjust ->
reduced stats -> pack -> normalize -> quantize -> inner encode.

Decoder: inner decode -> dequantize -> unpack -> reduced refinement ->
restore channels -> inverse transform -> temporal upsample -> restored
refinement.

Side information (stats, activity map, channel order) is measured on the
first coded frame of each period and held for the rest of it, so the encoder
never looks ahead of the period start.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bitstream
from .bitstream import Container, PeriodSideInfo, SequenceHeader
from .channel_adjust import (
    DEFAULT_ALPHA,
    ActivityMap,
    activity_map,
    channel_ranges,
    drop_channels,
    restore_channels,
)
from .conversion import (
    DEFAULT_BITDEPTH,
    NormParams,
    PackedFrame,
    dequantize,
    normalize,
    pack,
    quantize,
    refine_reduced,
    unpack,
)
from .errors import EmptyInput, SideInfoMismatch
from .inner_codec import CodecConfig, CodecId, FrameMeta, decode_frames, encode_frames
from .stats import GlobalStats, ReducedStats, global_stats, layer_stats, reduced_stats
from .temporal import SUPPORTED_RATIOS, TemporalPlan, downsample, upsample
from .tensors import FeatureSequence, FeatureSet, ReducedFeature
from .transform import (
    TransformConfig,
    reduce,
    reduced_spatial,
    restore,
)


@dataclass(frozen=True)
class EncoderConfig:
    transform: TransformConfig = field(default_factory=TransformConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    ratio: int = 1
    alpha: float = DEFAULT_ALPHA  # 0 disables channel adjustment
    bitdepth: int = DEFAULT_BITDEPTH
    refresh_period: Optional[int] = None  # defaults to the codec intra period
    global_stats_period: Optional[int] = None  # defaults to the codec intra period

    def __post_init__(self):
        if self.ratio not in SUPPORTED_RATIOS:
            raise ValueError(f"temporal ratio must be 1 or 2, got {self.ratio}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if not 1 <= self.bitdepth <= 16:
            raise ValueError("bitdepth must be within 1..16")
        if self.codec.codec_id == CodecId.EXTERNAL and self.bitdepth != 10:
            raise ValueError("the external codec bridge carries 10-bit frames only")
        if self.codec.codec_id == CodecId.REF_LOSSY and self.codec.qshift >= self.bitdepth:
            raise ValueError("qshift must be smaller than the bit depth")
        for name in ("refresh_period", "global_stats_period"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def periods(self) -> tuple[int, int]:
        intra = self.codec.intra_period
        return (self.refresh_period or intra, self.global_stats_period or intra)


@dataclass
class EncodeTrace:
    """Encoder intermediates, kept for tests and diagnostics."""

    container: Container
    plan: TemporalPlan
    global_exact: list[Optional[GlobalStats]] = field(default_factory=list)
    reduced: list[ReducedFeature] = field(default_factory=list)
    reduced_kept: list[ReducedFeature] = field(default_factory=list)
    norm_params: list[NormParams] = field(default_factory=list)
    frames: list[PackedFrame] = field(default_factory=list)


@dataclass
class DecodeTrace:
    container: Container
    plan: TemporalPlan
    dequantized: list[np.ndarray] = field(default_factory=list)
    refined_reduced: list[ReducedFeature] = field(default_factory=list)
    signaled_reduced: list[ReducedStats] = field(default_factory=list)
    restored: list[FeatureSet] = field(default_factory=list)
    upsampled: Optional[FeatureSequence] = None
    signaled_global: list[GlobalStats] = field(default_factory=list)
    output: Optional[FeatureSequence] = None


def refine_restored(y: FeatureSet, g: GlobalStats) -> FeatureSet:
    """Re-standardize the restored layers to the signaled global statistics.

    Every layer is scaled by sigma_x / sqrt(sum of layer variances of y) and
    shifted so that the sum of layer means becomes mu_x; the shift is shared
    equally among the N layers. With one layer this is the plain
    standardize-and-rescale; with several it keeps
    ``global_stats(output) == g``. When y has no spread only the shift applies.
    """
    n = len(y.layers)
    mean_sum, sigma_sum = layer_stats(y.layers)
    offset_in = mean_sum / n
    offset_out = g.mu_x / n
    scale = g.sigma_x / sigma_sum if sigma_sum > 0.0 else 1.0
    return FeatureSet(tuple(
        (layer.data.astype(np.float64) - offset_in) * scale + offset_out
        for layer in y.layers
    ))


def _period_bounds(count: int, period: int) -> list[tuple[int, int]]:
    return [(s, min(s + period, count)) for s in range(0, count, period)]


def _carries_global(start: int, prev_start: Optional[int], gperiod: int) -> bool:
    return prev_start is None or start // gperiod > prev_start // gperiod


def encode_with_trace(seq: FeatureSequence, cfg: EncoderConfig) -> EncodeTrace:
    if not seq.sets:
        raise EmptyInput("cannot encode an empty feature sequence")
    shapes = tuple(seq.sets[0].shapes)
    tcfg = cfg.transform
    reduced_spatial(shapes, tcfg.transform_id)  # fail early on bad signatures
    refresh, gperiod = cfg.periods

    kept, plan = downsample(seq, cfg.ratio)
    records: list[PeriodSideInfo] = []
    segments: list[bytes] = []
    trace_g, trace_z, trace_zk, trace_np, trace_frames = [], [], [], [], []
    prev_start = None
    reduced_channels = None

    for start, stop in _period_bounds(len(kept), refresh):
        first = kept.sets[start]
        g = global_stats(first) if _carries_global(start, prev_start, gperiod) else None
        prev_start = start

        z0, side = reduce(first, tcfg)
        reduced_channels = z0.channels
        if cfg.alpha > 0.0:
            amap = activity_map(channel_ranges(z0), cfg.alpha)
        else:
            amap = ActivityMap.keep_all(z0.channels)

        zs = [z0] + [reduce(kept.sets[i], tcfg, side.permutation)[0]
                     for i in range(start + 1, stop)]
        zks = [drop_channels(z, amap) for z in zs]
        rstats = reduced_stats(zks[0]).quantized()

        frames, layout = [], None
        for zk in zks:
            raw, layout = pack(zk)
            norm, params = normalize(raw)
            frames.append(quantize(norm, cfg.bitdepth))
            trace_np.append(params)
        segment = encode_frames(frames, cfg.codec)

        records.append(PeriodSideInfo(
            frame_count=stop - start,
            segment_length=len(segment),
            global_stats=g.quantized() if g is not None else None,
            reduced_stats=rstats,
            activity=amap,
            layout=layout,
            transform=side,
        ))
        segments.append(segment)
        trace_g.append(g)
        trace_z += zs
        trace_zk += zks
        trace_frames += frames

    header = SequenceHeader(
        shapes=shapes,
        ratio=cfg.ratio,
        original_count=len(seq),
        transform_id=tcfg.transform_id,
        importance_order=tcfg.importance_order,
        reduced_channels=reduced_channels,
        bitdepth=cfg.bitdepth,
        intra_period=cfg.codec.intra_period,
        refresh_period=refresh,
        global_stats_period=gperiod,
        codec_id=cfg.codec.codec_id,
        qshift=cfg.codec.qshift,
    )
    container = Container(header, tuple(records), b"".join(segments))
    return EncodeTrace(container, plan, trace_g, trace_z, trace_zk, trace_np, trace_frames)


def encode(seq: FeatureSequence, cfg: EncoderConfig) -> bytes:
    """Compress a feature sequence into an FCMB container."""
    t = encode_with_trace(seq, cfg)
    return bitstream.serialize(t.container.header, t.container.records, t.container.payload)


def _codec_config(h: SequenceHeader, external: Optional[tuple[str, str]]) -> CodecConfig:
    if h.codec_id == CodecId.EXTERNAL:
        if external is None:
            raise SideInfoMismatch(
                "stream was coded with the external codec; decode command templates are required"
            )
        return CodecConfig(h.codec_id, h.qshift, h.intra_period, *external)
    return CodecConfig(h.codec_id, h.qshift, h.intra_period)


def decode_with_trace(data: bytes, external: Optional[tuple[str, str]] = None) -> DecodeTrace:
    """Decode a container; uses nothing but the bytes (and, for streams coded
    with the external bridge, the decode command templates)."""
    container = bitstream.parse(data)
    h = container.header
    codec = _codec_config(h, external)
    plan = TemporalPlan.build(h.original_count, h.ratio)
    reduced_spatial(h.shapes, h.transform_id)
    trace = DecodeTrace(container, plan)

    record_of_frame = []
    held_global = None
    per_record_global = []
    for ri, (rec, segment) in enumerate(zip(container.records, container.segments())):
        if rec.global_stats is not None:
            held_global = rec.global_stats
        per_record_global.append(held_global)
        fh, fw = rec.layout.frame_shape
        frames = decode_frames(segment, FrameMeta(rec.frame_count, fh, fw, h.bitdepth), codec)
        for frame in frames:
            if frame.samples.shape != (fh, fw):
                raise SideInfoMismatch("decoded frame size differs from the pack layout")
            z_dq = unpack(dequantize(frame), rec.layout)
            z_ref = refine_reduced(z_dq, rec.reduced_stats)
            z_full = restore_channels(z_ref, rec.activity)
            trace.dequantized.append(z_dq)
            trace.refined_reduced.append(z_ref)
            trace.signaled_reduced.append(rec.reduced_stats)
            trace.restored.append(restore(z_full, rec.transform))
            record_of_frame.append(ri)

    y = upsample(FeatureSequence(tuple(trace.restored)), plan)
    trace.upsampled = y
    out = []
    for t, k in enumerate(plan.source_of()):
        g = per_record_global[record_of_frame[k]]
        trace.signaled_global.append(g)
        out.append(refine_restored(y.sets[t], g))
    trace.output = FeatureSequence(tuple(out))
    return trace


def decode(data: bytes, external: Optional[tuple[str, str]] = None) -> FeatureSequence:
    """Restore the feature sequence from an FCMB container."""
    return decode_with_trace(data, external).output


def header_reduced_shape(h: SequenceHeader) -> tuple[int, int, int]:
    rh, rw = reduced_spatial(h.shapes, h.transform_id)
    return h.reduced_channels, rh, rw
