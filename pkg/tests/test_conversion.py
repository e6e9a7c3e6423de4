import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fctm import ReducedFeature
from fctm.conversion import (
    PackLayout,
    PackedFrame,
    dequantize,
    normalize,
    pack,
    quantize,
    refine_reduced,
    unpack,
)
from fctm.errors import LayoutMismatch, SampleOutOfRange
from fctm.stats import ReducedStats, mean_std


def test_pack_four_channels():
    z = np.arange(4, dtype=np.float64)[:, None, None] * np.ones((4, 2, 2))
    frame, layout = pack(z)
    assert (layout.grid_rows, layout.grid_cols) == (2, 2)
    assert frame.shape == (4, 4)
    np.testing.assert_array_equal(frame[2:, :2], 2.0)
    np.testing.assert_array_equal(unpack(frame, layout), z)


def test_pack_three_channels_pads_with_zero():
    z = np.ones((3, 2, 2))
    frame, layout = pack(z)
    assert (layout.grid_rows, layout.grid_cols) == (2, 2)
    np.testing.assert_array_equal(frame[2:, 2:], 0.0)
    np.testing.assert_array_equal(unpack(frame, layout), z)


@pytest.mark.parametrize("c, rows, cols", [(1, 1, 1), (2, 1, 2), (5, 2, 3), (9, 3, 3), (10, 3, 4), (17, 4, 5)])
def test_grid_is_near_square(c, rows, cols):
    layout = PackLayout.for_channels(c, 3, 5)
    assert (layout.grid_rows, layout.grid_cols) == (rows, cols)
    assert layout.frame_shape == (3 * rows, 5 * cols)


def test_unpack_rejects_wrong_frame():
    _, layout = pack(np.ones((4, 2, 2)))
    with pytest.raises(LayoutMismatch):
        unpack(np.zeros((4, 5)), layout)


def test_normalize_example():
    norm, params = normalize(np.array([[-1.0, 0.0, 3.0]]))
    np.testing.assert_array_equal(norm, [[0.0, 0.25, 1.0]])
    assert (params.z_min, params.z_max) == (-1.0, 3.0)


def test_normalize_constant():
    norm, params = normalize(np.full((2, 2), 5.0))
    np.testing.assert_array_equal(norm, 0.0)
    assert params.z_min == params.z_max == 5.0


@pytest.mark.parametrize("x, q", [(1.0, 1023), (0.0, 0), (0.5, 512)])
def test_quantize_examples(x, q):
    assert int(quantize(np.array([[x]]), 10).samples[0, 0]) == q


@pytest.mark.parametrize("q, x", [(1023, 1.0), (0, 0.0), (512, 512 / 1023)])
def test_dequantize_examples(q, x):
    assert dequantize(PackedFrame(np.array([[q]], dtype=np.uint16), 10))[0, 0] == x


def test_sample_range_checked():
    with pytest.raises(SampleOutOfRange):
        PackedFrame(np.array([[1024]], dtype=np.uint16), 10)


@settings(max_examples=50, deadline=None)
@given(bitdepth=st.integers(2, 16), seed=st.integers(0, 2 ** 32 - 1))
def test_quantization_bound_any_bitdepth(bitdepth, seed):
    x = np.random.default_rng(seed).uniform(0, 1, size=(16, 16))
    err = np.abs(dequantize(quantize(x, bitdepth)) - x)
    assert err.max() <= 2.0 ** -bitdepth


def test_refine_reduced_example(rng):
    z = rng.normal(0.5, 0.1, size=(2, 4, 4))
    out = refine_reduced(z, ReducedStats(10.0, 2.0))
    mu, sigma = mean_std(out.data)
    assert mu == pytest.approx(10.0, rel=1e-6)
    assert sigma == pytest.approx(2.0, rel=1e-6)


def test_refine_reduced_own_stats_is_identity(rng):
    z = rng.normal(0.5, 0.1, size=(2, 4, 4))
    out = refine_reduced(z, ReducedStats(*mean_std(z)))
    np.testing.assert_allclose(out.data, z, rtol=1e-6, atol=1e-7)


def test_refine_reduced_constant_input():
    out = refine_reduced(ReducedFeature(np.full((1, 2, 2), 0.3)), ReducedStats(7.0, 1.0))
    np.testing.assert_array_equal(out.data, 7.0)
