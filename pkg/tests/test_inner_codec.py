import math
import shlex
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fctm.conversion import PackedFrame
from fctm.errors import (
    CorruptPayload,
    ExternalCodecFailure,
    OddByteLength,
    SampleOutOfRange,
)
from fctm.golomb import code_lengths, decode_ue, encode_ue, unzigzag, zigzag
from fctm.inner_codec import (
    CodecConfig,
    CodecId,
    FrameMeta,
    decode_frames,
    encode_frames,
    read_yuv400_10,
    write_yuv400_10,
)

FAKE = Path(__file__).with_name("fake_codec.py")


def frames_of(stack, bitdepth=10):
    return [PackedFrame(np.asarray(f, dtype=np.uint16), bitdepth) for f in stack]


def random_frames(rng, t=2, h=6, w=10, bitdepth=10):
    return frames_of(rng.integers(0, 1 << bitdepth, size=(t, h, w)), bitdepth)


def ue_oracle_bits(v: int) -> int:
    # textbook order-0 Exp-Golomb length
    return 2 * int(math.floor(math.log2(v + 1))) + 1


def test_golomb_known_codewords():
    data, nbits = encode_ue(np.array([0, 1, 2, 3]))
    # 1 | 010 | 011 | 00100  -> 1010 0110 0100 (pad)
    assert nbits == 12
    assert data == bytes([0b10100110, 0b01000000])
    values, end = decode_ue(data, 4)
    assert values.tolist() == [0, 1, 2, 3] and end == 12


@given(st.lists(st.integers(0, 2 ** 20 - 2), min_size=1, max_size=200))
def test_golomb_round_trip(values):
    v = np.array(values)
    data, nbits = encode_ue(v)
    assert nbits == sum(ue_oracle_bits(x) for x in values)
    back, end = decode_ue(data, len(values))
    assert back.tolist() == values and end == nbits
    np.testing.assert_array_equal(code_lengths(v), [ue_oracle_bits(x) for x in values])


def test_zigzag():
    r = np.array([0, -1, 1, -2, 2])
    assert zigzag(r).tolist() == [0, 1, 2, 3, 4]
    assert unzigzag(zigzag(r)).tolist() == r.tolist()


def test_golomb_runs_out_of_data():
    data, _ = encode_ue(np.array([5, 6, 7]))
    with pytest.raises(CorruptPayload):
        decode_ue(data[:1], 3)


@pytest.mark.parametrize("value", [0, 100, 512, 1023])
def test_constant_frame_near_golomb_minimum(value):
    h, w = 32, 48
    frames = frames_of(np.full((1, h, w), value))
    payload = encode_frames(frames, CodecConfig())
    # origin residual against mid-grey, every other residual is zero (1 bit)
    oracle_bits = ue_oracle_bits(int(zigzag(np.array([value - 512]))[0])) + (h * w - 1)
    assert len(payload) <= math.ceil(oracle_bits / 8) * 1.1


def test_lossless_round_trip(rng):
    frames = random_frames(rng, t=3)
    payload = encode_frames(frames, CodecConfig())
    back = decode_frames(payload, FrameMeta(3, 6, 10), CodecConfig())
    assert back == frames


@pytest.mark.parametrize("s", range(1, 9))
def test_lossy_reconstruction_rule(rng, s):
    frames = random_frames(rng)
    cfg = CodecConfig(CodecId.REF_LOSSY, qshift=s)
    back = decode_frames(encode_frames(frames, cfg), FrameMeta(2, 6, 10), cfg)
    for f, b in zip(frames, back):
        q = f.samples.astype(np.int64)
        np.testing.assert_array_equal(b.samples, ((q >> s) << s) + (1 << (s - 1)))
        assert np.abs(b.samples.astype(np.int64) - q).max() <= 1 << (s - 1)


def test_lossy_qshift_two_error_bound(rng):
    frames = random_frames(rng)
    cfg = CodecConfig(CodecId.REF_LOSSY, qshift=2)
    back = decode_frames(encode_frames(frames, cfg), FrameMeta(2, 6, 10), cfg)
    err = max(np.abs(a.samples.astype(int) - b.samples.astype(int)).max()
              for a, b in zip(frames, back))
    assert err <= 2


def test_truncated_payload(rng):
    frames = random_frames(rng)
    payload = encode_frames(frames, CodecConfig())
    with pytest.raises(CorruptPayload):
        decode_frames(payload[: len(payload) // 2], FrameMeta(2, 6, 10), CodecConfig())
    with pytest.raises(CorruptPayload):
        decode_frames(payload + b"\0", FrameMeta(2, 6, 10), CodecConfig())


def test_yuv_layout():
    raw = write_yuv400_10(frames_of([[[0, 1], [2, 3]]]))
    assert raw == bytes.fromhex("0000010002000300")
    assert read_yuv400_10(raw, 2, 2) == frames_of([[[0, 1], [2, 3]]])


def test_yuv_errors():
    with pytest.raises(OddByteLength):
        read_yuv400_10(b"\0\0\0", 1, 1)
    with pytest.raises(SampleOutOfRange):
        read_yuv400_10((1024).to_bytes(2, "little"), 1, 1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), t=st.integers(1, 3))
def test_yuv_round_trip(seed, t):
    frames = random_frames(np.random.default_rng(seed), t=t, h=3, w=5)
    assert read_yuv400_10(write_yuv400_10(frames), 3, 5) == frames


def external(extra_dec=""):
    cmd = f"{shlex.quote(sys.executable)} {shlex.quote(str(FAKE))} {{in}} {{out}}"
    return CodecConfig(CodecId.EXTERNAL, external_cmd_encode=cmd,
                       external_cmd_decode=cmd + extra_dec)


def test_external_bridge_round_trip(rng):
    frames = random_frames(rng)
    cfg = external()
    payload = encode_frames(frames, cfg)
    assert payload == write_yuv400_10(frames)
    assert decode_frames(payload, FrameMeta(2, 6, 10), cfg) == frames


@pytest.mark.parametrize("flag", [" --fail", " --truncate"])
def test_external_bridge_failures(rng, flag):
    frames = random_frames(rng)
    payload = encode_frames(frames, external())
    with pytest.raises(ExternalCodecFailure):
        decode_frames(payload, FrameMeta(2, 6, 10), external(flag))


def test_external_missing_program(rng):
    cfg = CodecConfig(CodecId.EXTERNAL, external_cmd_encode="/nonexistent/enc {in} {out}",
                      external_cmd_decode="/nonexistent/dec {in} {out}")
    with pytest.raises(ExternalCodecFailure):
        encode_frames(random_frames(rng), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        CodecConfig(qshift=9)
    with pytest.raises(ValueError):
        CodecConfig(intra_period=0)
    with pytest.raises(ValueError):
        CodecConfig(CodecId.EXTERNAL)
