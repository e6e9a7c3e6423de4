"""Inner codec for packed monochrome frames.

Backends:

``ref_lossless``
    Per frame, each sample is predicted from its left neighbour; the first
    sample of a row from the sample above; the frame origin from mid-grey.
    Residuals are zigzag mapped and written with order-0 Exp-Golomb as one
    MSB-first bit string, zero-padded to a byte boundary.
``ref_lossy``
    Samples are right-shifted by ``qshift`` and coded as above at the reduced
    bit depth; reconstruction shifts back and adds half a step.
``external``
    Frames go to an external tool as raw YUV 4:0:0 (16-bit little-endian
    words); see :func:`write_yuv400` and :class:`ExternalCodec`.
"""

from __future__ import annotations

import enum
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import golomb
from .conversion import DEFAULT_BITDEPTH, PackedFrame
from .errors import (
    CorruptPayload,
    EmptyInput,
    ExternalCodecFailure,
    LayoutMismatch,
    OddByteLength,
    SampleOutOfRange,
)

MAX_QSHIFT = 8
DEFAULT_INTRA_PERIOD = 32


class CodecId(enum.IntEnum):
    REF_LOSSLESS = 0
    REF_LOSSY = 1
    EXTERNAL = 2


@dataclass(frozen=True)
class CodecConfig:
    codec_id: CodecId = CodecId.REF_LOSSLESS
    qshift: int = 0
    intra_period: int = DEFAULT_INTRA_PERIOD
    external_cmd_encode: Optional[str] = None
    external_cmd_decode: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "codec_id", CodecId(self.codec_id))
        if self.intra_period < 1:
            raise ValueError("intra_period must be >= 1")
        if not 0 <= self.qshift <= MAX_QSHIFT:
            raise ValueError(f"qshift must be within 0..{MAX_QSHIFT}")
        if self.codec_id == CodecId.EXTERNAL and not (
            self.external_cmd_encode and self.external_cmd_decode
        ):
            raise ValueError("external codec needs both encode and decode command templates")


@dataclass(frozen=True)
class FrameMeta:
    count: int
    height: int
    width: int
    bitdepth: int = DEFAULT_BITDEPTH


# -- reference codec ---------------------------------------------------------

def _residuals(x: np.ndarray, bitdepth: int) -> np.ndarray:
    x = x.astype(np.int64)
    res = np.empty_like(x)
    res[:, :, 1:] = x[:, :, 1:] - x[:, :, :-1]
    res[:, 1:, 0] = x[:, 1:, 0] - x[:, :-1, 0]
    res[:, 0, 0] = x[:, 0, 0] - (1 << (bitdepth - 1))
    return res


def _reconstruct(res: np.ndarray, bitdepth: int) -> np.ndarray:
    first_col = np.cumsum(res[:, :, 0], axis=1)
    first_col += (1 << (bitdepth - 1))
    x = np.cumsum(res, axis=2)
    x += (first_col - res[:, :, 0])[:, :, None]
    return x


def encode_ref(samples: np.ndarray, bitdepth: int) -> bytes:
    """Lossless reference coding of a (T, H, W) stack of integer samples."""
    res = _residuals(np.asarray(samples), bitdepth)
    data, _ = golomb.encode_ue(golomb.zigzag(res.ravel()))
    return data


def decode_ref(payload: bytes, meta: FrameMeta, bitdepth: int) -> np.ndarray:
    n = meta.count * meta.height * meta.width
    codes, end = golomb.decode_ue(payload, n)
    used_bytes = -(-end // 8)
    if used_bytes != len(payload):
        raise CorruptPayload(f"{len(payload) - used_bytes} trailing bytes after the frames")
    tail = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[end:]
    if tail.any():
        raise CorruptPayload("nonzero padding bits")
    res = golomb.unzigzag(codes).reshape(meta.count, meta.height, meta.width)
    x = _reconstruct(res, bitdepth)
    if x.size and (x.min() < 0 or x.max() > (1 << bitdepth) - 1):
        raise CorruptPayload("decoded samples fall outside the bit depth")
    return x


def _stack(frames: Sequence[PackedFrame]) -> np.ndarray:
    if not frames:
        raise EmptyInput("no frames to encode")
    shape = frames[0].samples.shape
    depth = frames[0].bitdepth
    for f in frames:
        if f.samples.shape != shape or f.bitdepth != depth:
            raise LayoutMismatch("frames must share one size and bit depth")
    return np.stack([f.samples for f in frames])


def lossy_reconstruct(shifted: np.ndarray, qshift: int) -> np.ndarray:
    x = np.asarray(shifted, dtype=np.int64) << qshift
    if qshift:
        x += 1 << (qshift - 1)
    return x


# -- raw YUV 4:0:0 -----------------------------------------------------------

def write_yuv400(frames: Sequence[PackedFrame], bitdepth: int = 10) -> bytes:
    """Planar luma-only raw video, one little-endian 16-bit word per sample."""
    out = []
    limit = (1 << bitdepth) - 1
    for f in frames:
        s = np.asarray(f.samples if isinstance(f, PackedFrame) else f)
        if s.size and (s.min() < 0 or s.max() > limit):
            raise SampleOutOfRange(f"sample outside 0..{limit}")
        out.append(s.astype("<u2").tobytes())
    return b"".join(out)


def read_yuv400(buf: bytes, height: int, width: int, bitdepth: int = 10) -> list[PackedFrame]:
    if len(buf) % 2:
        raise OddByteLength("raw 16-bit YUV must have an even byte length")
    frame_bytes = 2 * height * width
    if frame_bytes == 0 or len(buf) % frame_bytes:
        raise LayoutMismatch(
            f"{len(buf)} bytes is not a whole number of {height}x{width} frames"
        )
    s = np.frombuffer(buf, dtype="<u2").reshape(-1, height, width)
    if s.size and s.max() > (1 << bitdepth) - 1:
        raise SampleOutOfRange(f"sample above {(1 << bitdepth) - 1}")
    return [PackedFrame(f, bitdepth) for f in s]


def write_yuv400_10(frames: Sequence[PackedFrame]) -> bytes:
    return write_yuv400(frames, 10)


def read_yuv400_10(buf: bytes, height: int, width: int) -> list[PackedFrame]:
    return read_yuv400(buf, height, width, 10)


# -- external bridge ---------------------------------------------------------

class ExternalCodec:
    """Runs command templates such as ``vtm-enc -i {in} -b {out} -wdt {w} ...``.

    Placeholders: ``{in} {out} {w} {h} {frames} {intra}``. The template is
    split shell-style before substitution, so paths with spaces stay intact.
    """

    def __init__(self, encode_cmd: str, decode_cmd: str, timeout: Optional[float] = None):
        self.encode_cmd = encode_cmd
        self.decode_cmd = decode_cmd
        self.timeout = timeout

    @staticmethod
    def render(template: str, **values) -> list[str]:
        fields = {k: str(v) for k, v in values.items()}
        try:
            return [tok.format(**fields) for tok in shlex.split(template)]
        except (KeyError, IndexError, ValueError) as e:
            raise ExternalCodecFailure(f"bad command template {template!r}: {e}") from None

    def _run(self, argv: list[str]) -> None:
        try:
            proc = subprocess.run(
                argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, timeout=self.timeout
            )
        except (OSError, subprocess.TimeoutExpired) as e:
            raise ExternalCodecFailure(f"could not run {argv[0]!r}: {e}") from None
        if proc.returncode != 0:
            err = proc.stderr.decode(errors="replace").strip()[-500:]
            raise ExternalCodecFailure(
                f"{argv[0]!r} exited with status {proc.returncode}: {err}"
            )

    def encode(self, frames: Sequence[PackedFrame], intra_period: int) -> bytes:
        h, w = frames[0].samples.shape
        with tempfile.TemporaryDirectory(prefix="fctm-") as tmp:
            src = os.path.join(tmp, "in.yuv")
            dst = os.path.join(tmp, "out.bin")
            with open(src, "wb") as f:
                f.write(write_yuv400_10(frames))
            self._run(self.render(self.encode_cmd, **{
                "in": src, "out": dst, "w": w, "h": h,
                "frames": len(frames), "intra": intra_period,
            }))
            try:
                with open(dst, "rb") as f:
                    return f.read()
            except OSError:
                raise ExternalCodecFailure("external encoder produced no output file") from None

    def decode(self, payload: bytes, meta: FrameMeta, intra_period: int) -> list[PackedFrame]:
        with tempfile.TemporaryDirectory(prefix="fctm-") as tmp:
            src = os.path.join(tmp, "in.bin")
            dst = os.path.join(tmp, "out.yuv")
            with open(src, "wb") as f:
                f.write(payload)
            self._run(self.render(self.decode_cmd, **{
                "in": src, "out": dst, "w": meta.width, "h": meta.height,
                "frames": meta.count, "intra": intra_period,
            }))
            try:
                with open(dst, "rb") as f:
                    raw = f.read()
            except OSError:
                raise ExternalCodecFailure("external decoder produced no output file") from None
        try:
            frames = read_yuv400_10(raw, meta.height, meta.width)
        except (OddByteLength, SampleOutOfRange, LayoutMismatch) as e:
            raise ExternalCodecFailure(f"malformed decoder output: {e}") from None
        if len(frames) != meta.count:
            raise ExternalCodecFailure(
                f"decoder returned {len(frames)} frames, expected {meta.count}"
            )
        return frames


# -- public entry points -----------------------------------------------------

def encode_frames(frames: Sequence[PackedFrame], cfg: CodecConfig) -> bytes:
    stack = _stack(frames)
    depth = frames[0].bitdepth
    if cfg.codec_id == CodecId.REF_LOSSLESS:
        return encode_ref(stack, depth)
    if cfg.codec_id == CodecId.REF_LOSSY:
        if cfg.qshift >= depth:
            raise ValueError("qshift must be smaller than the bit depth")
        return encode_ref(stack.astype(np.int64) >> cfg.qshift, depth - cfg.qshift)
    if depth != 10:
        raise ValueError("the external bridge exchanges 10-bit frames only")
    codec = ExternalCodec(cfg.external_cmd_encode, cfg.external_cmd_decode)
    return codec.encode(frames, cfg.intra_period)


def decode_frames(payload: bytes, meta: FrameMeta, cfg: CodecConfig) -> list[PackedFrame]:
    if meta.count == 0:
        raise EmptyInput("no frames to decode")
    depth = meta.bitdepth
    if cfg.codec_id == CodecId.REF_LOSSLESS:
        x = decode_ref(payload, meta, depth)
    elif cfg.codec_id == CodecId.REF_LOSSY:
        x = lossy_reconstruct(decode_ref(payload, meta, depth - cfg.qshift), cfg.qshift)
    else:
        codec = ExternalCodec(cfg.external_cmd_encode, cfg.external_cmd_decode)
        return codec.decode(payload, meta, cfg.intra_period)
    return [PackedFrame(f, depth) for f in x]
