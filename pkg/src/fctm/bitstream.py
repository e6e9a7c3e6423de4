"""FCMB container: sequence header, per-period side records, inner-codec payload.

Layout (integers little-endian)::

    header
      magic b"FCMB", version u16
      N u16, then N x (C u32, H u32, W u32)
      temporal ratio u8, original set count u32
      transform id u8, importance order u8, reduced channels u32
      bitdepth u8
      intra period u32, refresh period u32, global-stats period u32
      codec id u8, qshift u8
    record count u32
    record count x (length u32, body)
      body: type u8 (=1), frame count u32, segment length u32,
            has-global u8 [+ mu bf16 u16, sigma bf16 u16],
            mu_z f32, sigma_z f32,
            activity bitfield ceil(C'/8) bytes (MSB first, zero padded),
            pack layout 5 x u16 (rows, cols, tile h, tile w, channels),
            transform id u8, [permutation sum(C) x u16 if ordered], gain C' x f32
    payload length u64
    payload      concatenation of the per-record inner-codec segments
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel_adjust import ActivityMap
from .conversion import PackLayout
from .errors import (
    BadMagic,
    FcmError,
    InconsistentRecordCount,
    LayoutMismatch,
    MalformedRecord,
    OverlongLength,
    Truncated,
    UnsupportedVersion,
)
from .inner_codec import CodecId
from .stats import GlobalStats, ReducedStats, from_bfloat16, to_bfloat16
from .temporal import kept_count
from .transform import ImportanceOrder, TransformId, TransformSideInfo, reduced_spatial

MAGIC = b"FCMB"
VERSION = 1
RECORD_PERIOD = 1


@dataclass(frozen=True)
class SequenceHeader:
    shapes: tuple[tuple[int, int, int], ...]
    ratio: int
    original_count: int
    transform_id: TransformId
    importance_order: ImportanceOrder
    reduced_channels: int
    bitdepth: int
    intra_period: int
    refresh_period: int
    global_stats_period: int
    codec_id: CodecId
    qshift: int = 0
    version: int = VERSION

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(tuple(int(d) for d in s) for s in self.shapes))
        object.__setattr__(self, "transform_id", TransformId(self.transform_id))
        object.__setattr__(self, "importance_order", ImportanceOrder(self.importance_order))
        object.__setattr__(self, "codec_id", CodecId(self.codec_id))
        if not self.shapes:
            raise MalformedRecord("shape table must not be empty")
        if self.ratio not in (1, 2):
            raise MalformedRecord(f"temporal ratio {self.ratio} is not 1 or 2")
        if self.original_count < 1:
            raise MalformedRecord("original set count must be >= 1")
        if min(self.intra_period, self.refresh_period, self.global_stats_period) < 1:
            raise MalformedRecord("periods must be >= 1")
        if not 1 <= self.bitdepth <= 16:
            raise MalformedRecord(f"bitdepth {self.bitdepth} outside 1..16")
        if self.reduced_channels < 1:
            raise MalformedRecord("reduced channel count must be >= 1")

    @property
    def total_channels(self) -> int:
        return sum(s[0] for s in self.shapes)

    @property
    def coded_count(self) -> int:
        return kept_count(self.original_count, self.ratio)

    @property
    def record_count(self) -> int:
        return -(-self.coded_count // self.refresh_period)

    @property
    def element_count(self) -> int:
        return self.original_count * sum(c * h * w for c, h, w in self.shapes)


@dataclass(frozen=True, eq=False)
class PeriodSideInfo:
    frame_count: int
    segment_length: int
    global_stats: Optional[GlobalStats]
    reduced_stats: ReducedStats
    activity: ActivityMap
    layout: PackLayout
    transform: TransformSideInfo

    def __eq__(self, other):
        if not isinstance(other, PeriodSideInfo):
            return NotImplemented
        return (
            self.frame_count == other.frame_count
            and self.segment_length == other.segment_length
            and self.global_stats == other.global_stats
            and self.reduced_stats == other.reduced_stats
            and self.activity == other.activity
            and self.layout == other.layout
            and self.transform == other.transform
        )


@dataclass(frozen=True, eq=False)
class Container:
    header: SequenceHeader
    records: tuple[PeriodSideInfo, ...]
    payload: bytes = field(repr=False)

    def segments(self) -> list[bytes]:
        out, pos = [], 0
        for r in self.records:
            out.append(self.payload[pos:pos + r.segment_length])
            pos += r.segment_length
        return out

    def __eq__(self, other):
        if not isinstance(other, Container):
            return NotImplemented
        return (self.header == other.header and self.records == other.records
                and self.payload == other.payload)


# -- writing -----------------------------------------------------------------

def _header_bytes(h: SequenceHeader) -> bytes:
    parts = [MAGIC, struct.pack("<HH", h.version, len(h.shapes))]
    parts += [struct.pack("<III", *s) for s in h.shapes]
    parts.append(struct.pack(
        "<BIBBIBIIIBB",
        h.ratio, h.original_count,
        h.transform_id, h.importance_order, h.reduced_channels,
        h.bitdepth,
        h.intra_period, h.refresh_period, h.global_stats_period,
        h.codec_id, h.qshift,
    ))
    return b"".join(parts)


def _record_bytes(r: PeriodSideInfo, h: SequenceHeader) -> bytes:
    parts = [struct.pack("<BII", RECORD_PERIOD, r.frame_count, r.segment_length)]
    if r.global_stats is None:
        parts.append(b"\x00")
    else:
        parts.append(struct.pack(
            "<BHH", 1, to_bfloat16(r.global_stats.mu_x), to_bfloat16(r.global_stats.sigma_x)
        ))
    parts.append(struct.pack("<ff", r.reduced_stats.mu_z, r.reduced_stats.sigma_z))
    parts.append(np.packbits(r.activity.removed).tobytes())
    L = r.layout
    parts.append(struct.pack(
        "<HHHHH", L.grid_rows, L.grid_cols, L.channel_h, L.channel_w, L.channel_count
    ))
    t = r.transform
    parts.append(struct.pack("<B", t.transform_id))
    if t.permutation is not None:
        parts.append(np.asarray(t.permutation, dtype="<u2").tobytes())
    parts.append(np.asarray(t.gain, dtype="<f4").tobytes())
    return b"".join(parts)


def _check_record(r: PeriodSideInfo, h: SequenceHeader) -> None:
    """Cross-field consistency between a record and the header."""
    t = r.transform
    if t.transform_id != h.transform_id:
        raise MalformedRecord("record transform id differs from the header")
    if tuple(t.shapes) != h.shapes:
        raise MalformedRecord("record shape table differs from the header")
    ordered = h.importance_order == ImportanceOrder.VARIANCE_DESC
    if ordered != (t.permutation is not None):
        raise MalformedRecord("permutation presence disagrees with the header order flag")
    if t.permutation is not None and sorted(t.permutation) != list(range(h.total_channels)):
        raise MalformedRecord("permutation is not a permutation of the channels")
    if t.reduced_channels != h.reduced_channels:
        raise MalformedRecord("gain vector length differs from the reduced channel count")
    if len(r.activity) != h.reduced_channels:
        raise MalformedRecord("activity map length differs from the reduced channel count")
    if r.layout.channel_count != r.activity.kept_count:
        raise MalformedRecord("pack layout channel count differs from the kept channels")
    try:
        rh, rw = reduced_spatial(h.shapes, h.transform_id)
    except FcmError as e:
        raise MalformedRecord(f"header shape table is unusable: {e}") from None
    if (r.layout.channel_h, r.layout.channel_w) != (rh, rw):
        raise MalformedRecord("pack layout tile size differs from the reduced tensor")
    expected = PackLayout.for_channels(r.layout.channel_count, rh, rw)
    if r.layout != expected:
        raise MalformedRecord("pack layout grid is not the canonical raster grid")


def _check_records(h: SequenceHeader, records, payload_len: int) -> None:
    if len(records) != h.record_count:
        raise InconsistentRecordCount(
            f"{len(records)} records for {h.coded_count} coded frames with refresh period "
            f"{h.refresh_period}; expected {h.record_count}"
        )
    remaining = h.coded_count
    for i, r in enumerate(records):
        want = min(h.refresh_period, remaining)
        if r.frame_count != want:
            raise InconsistentRecordCount(
                f"record {i} covers {r.frame_count} frames, expected {want}"
            )
        remaining -= want
        if i == 0 and r.global_stats is None:
            raise MalformedRecord("the first record must carry global statistics")
        _check_record(r, h)
    if sum(r.segment_length for r in records) != payload_len:
        raise MalformedRecord("segment lengths do not add up to the payload length")


def serialize(header: SequenceHeader, records, payload: bytes) -> bytes:
    records = tuple(records)
    _check_records(header, records, len(payload))
    try:
        out = [_header_bytes(header), struct.pack("<I", len(records))]
        for r in records:
            body = _record_bytes(r, header)
            out.append(struct.pack("<I", len(body)))
            out.append(body)
    except struct.error as e:
        raise MalformedRecord(f"field does not fit its syntax element: {e}") from None
    out.append(struct.pack("<Q", len(payload)))
    out.append(bytes(payload))
    return b"".join(out)


# -- reading -----------------------------------------------------------------

class _Reader:
    def __init__(self, buf: bytes, pos: int = 0, end: Optional[int] = None):
        self.buf = buf
        self.pos = pos
        self.end = len(buf) if end is None else end

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > self.end:
            raise Truncated(f"stream ends inside {what}")
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt: str, what: str):
        s = struct.Struct("<" + fmt)
        return s.unpack(self.take(s.size, what))

    @property
    def remaining(self) -> int:
        return self.end - self.pos


def parse_header(buf: bytes) -> tuple[SequenceHeader, int]:
    """Parse just the sequence header; returns it and the offset after it."""
    rd = _Reader(buf)
    magic = rd.take(4, "magic") if len(buf) >= 4 else None
    if magic is None:
        raise Truncated("stream shorter than the FCMB magic")
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
    version, n_layers = rd.unpack("HH", "header")
    if version != VERSION:
        raise UnsupportedVersion(f"FCMB version {version} is not supported")
    if n_layers == 0:
        raise MalformedRecord("shape table must not be empty")
    if rd.remaining < 12 * n_layers:
        raise Truncated("stream ends inside the shape table")
    shapes = tuple(rd.unpack("III", "shape table") for _ in range(n_layers))
    (ratio, count, tid, order, reduced, depth,
     intra, refresh, gperiod, codec, qshift) = rd.unpack("BIBBIBIIIBB", "header")
    try:
        header = SequenceHeader(
            shapes, ratio, count, tid, order, reduced, depth,
            intra, refresh, gperiod, codec, qshift, version,
        )
    except ValueError as e:
        if isinstance(e, FcmError):
            raise
        raise MalformedRecord(f"invalid header field: {e}") from None
    return header, rd.pos


def _parse_record(rd: _Reader, h: SequenceHeader) -> Optional[PeriodSideInfo]:
    (rtype,) = rd.unpack("B", "record type")
    if rtype != RECORD_PERIOD:
        return None
    frame_count, seg_len = rd.unpack("II", "record")
    (has_global,) = rd.unpack("B", "record")
    g = None
    if has_global == 1:
        mu_b, sigma_b = rd.unpack("HH", "global stats")
        try:
            g = GlobalStats(from_bfloat16(mu_b), from_bfloat16(sigma_b))
        except ValueError as e:
            raise MalformedRecord(f"invalid global stats: {e}") from None
    elif has_global != 0:
        raise MalformedRecord(f"global-stats flag must be 0 or 1, got {has_global}")
    mu_z, sigma_z = rd.unpack("ff", "reduced stats")
    try:
        rs = ReducedStats(mu_z, sigma_z)
    except ValueError as e:
        raise MalformedRecord(f"invalid reduced stats: {e}") from None

    c_red = h.reduced_channels
    nbytes = -(-c_red // 8)
    if rd.remaining < nbytes:
        raise Truncated("stream ends inside the activity map")
    bits = np.unpackbits(np.frombuffer(rd.take(nbytes, "activity map"), dtype=np.uint8))
    if bits[c_red:].any():
        raise MalformedRecord("activity map padding bits must be zero")
    try:
        amap = ActivityMap(bits[:c_red].astype(bool))
    except ValueError as e:
        raise MalformedRecord(f"invalid activity map: {e}") from None
    try:
        layout = PackLayout(*rd.unpack("HHHHH", "pack layout"))
    except LayoutMismatch as e:
        raise MalformedRecord(str(e)) from None

    (tid,) = rd.unpack("B", "transform id")
    try:
        tid = TransformId(tid)
    except ValueError:
        raise MalformedRecord(f"unknown transform id {tid}") from None
    perm = None
    if h.importance_order == ImportanceOrder.VARIANCE_DESC:
        n = h.total_channels
        if rd.remaining < 2 * n:
            raise Truncated("stream ends inside the permutation")
        perm = tuple(int(p) for p in np.frombuffer(rd.take(2 * n, "permutation"), dtype="<u2"))
    if rd.remaining < 4 * c_red:
        raise Truncated("stream ends inside the gain vector")
    gain = np.frombuffer(rd.take(4 * c_red, "gain vector"), dtype="<f4").astype(np.float32)
    if not np.isfinite(gain).all() or (gain == 0).any():
        raise MalformedRecord("gain entries must be finite and nonzero")
    side = TransformSideInfo(tid, h.shapes, perm, gain)
    return PeriodSideInfo(frame_count, seg_len, g, rs, amap, layout, side)


def parse(buf: bytes) -> Container:
    buf = bytes(buf)
    header, pos = parse_header(buf)
    rd = _Reader(buf, pos)
    (n_records,) = rd.unpack("I", "record count")
    records = []
    for i in range(n_records):
        (length,) = rd.unpack("I", "record length")
        if length > rd.remaining:
            raise OverlongLength(
                f"record {i} claims {length} bytes, only {rd.remaining} remain"
            )
        sub = _Reader(buf, rd.pos, rd.pos + length)
        rec = _parse_record(sub, header)
        if rec is not None:
            if sub.remaining:
                raise MalformedRecord(f"record {i} has {sub.remaining} unexplained bytes")
            records.append(rec)
        rd.pos += length
    (payload_len,) = rd.unpack("Q", "payload length")
    if payload_len > rd.remaining:
        raise OverlongLength(
            f"payload claims {payload_len} bytes, only {rd.remaining} remain"
        )
    if payload_len < rd.remaining:
        raise MalformedRecord(f"{rd.remaining - payload_len} trailing bytes after the payload")
    payload = rd.take(payload_len, "payload")
    _check_records(header, records, len(payload))
    return Container(header, tuple(records), payload)


@dataclass(frozen=True)
class Rate:
    total_bits: int
    bits_per_second: float
    bits_per_element: Optional[float]


def measure_rate(data: bytes, frame_count: int, fps: float = 30.0,
                 element_count: Optional[int] = None) -> Rate:
    """Rate of a whole container: header, side records and payload all count.

    ``element_count`` defaults to the number of original feature elements the
    container's header describes.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    bits = 8 * len(data)
    if element_count is None:
        element_count = parse_header(data)[0].element_count
    bpe = bits / element_count if element_count else None
    return Rate(bits, bits * fps / frame_count, bpe)
