import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fctm import FeatureSet
from fctm.errors import (
    IdentityWithMultipleLayers,
    NonDyadicPyramid,
    SideInfoMismatch,
    TargetChannelsTooLarge,
)
from fctm.transform import (
    ImportanceOrder,
    TransformConfig,
    TransformId,
    channel_importance,
    reduce,
    restore,
)

IDENTITY = TransformConfig(TransformId.IDENTITY)


def test_identity_passes_the_layer_through(rng):
    x = FeatureSet.from_arrays([rng.normal(size=(4, 8, 8))])
    z, side = reduce(x, IDENTITY)
    assert np.array_equal(z.data, x.layers[0].data)
    assert side.permutation is None
    back = restore(z, side)
    assert back.layers[0].data.tobytes() == x.layers[0].data.tobytes()


def test_pyramid_shape():
    x = FeatureSet.from_arrays([np.zeros((2, 8, 8)), np.zeros((2, 4, 4))])
    z, _ = reduce(x, TransformConfig(target_channels=4))
    assert z.shape == (4, 2, 2)


def test_pooling_is_a_2x2_mean():
    layer = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
    z, _ = reduce(FeatureSet.from_arrays([layer]), TransformConfig())
    np.testing.assert_array_equal(z.data[0], [[2.5, 4.5], [10.5, 12.5]])


def test_gain_scales_channel(rng):
    x = FeatureSet.from_arrays([rng.normal(size=(2, 4, 4)), rng.normal(size=(2, 2, 2))])
    z1, _ = reduce(x, TransformConfig())
    z2, _ = reduce(x, TransformConfig(gain_vector=(2.0, 1.0, 1.0, 1.0)))
    np.testing.assert_array_equal(z2.data[0], 2 * z1.data[0])
    np.testing.assert_array_equal(z2.data[1:], z1.data[1:])


@settings(max_examples=60, deadline=None)
@given(values=st.lists(st.floats(-100, 100, width=32), min_size=3, max_size=3),
       levels=st.integers(1, 3))
def test_constant_layers_round_trip_exactly(values, levels):
    layers = [np.full((2, 4 << (levels - 1 - i), 4 << (levels - 1 - i)), values[i % 3])
              for i in range(levels)]
    x = FeatureSet.from_arrays(layers)
    back = restore(*reduce(x, TransformConfig()))
    for a, b in zip(x.layers, back.layers):
        assert a.data.tobytes() == b.data.tobytes()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gain_then_inverse(seed):
    rng = np.random.default_rng(seed)
    x = FeatureSet.from_arrays([rng.uniform(1, 2, size=(3, 2, 2))])
    gain = tuple(rng.uniform(0.1, 10, size=3))
    z, side = reduce(x, TransformConfig(TransformId.IDENTITY, gain_vector=gain))
    back = restore(z, side).layers[0].data
    np.testing.assert_allclose(back, x.layers[0].data, rtol=1e-6)


@pytest.mark.parametrize("variances, perm", [
    ([0.1, 5.0, 1.0], (1, 2, 0)),
    ([1.0, 1.0, 1.0], (0, 1, 2)),
    ([3.0], (0,)),
])
def test_channel_importance(variances, perm):
    base = np.array([-1.0, 1.0, -1.0, 1.0]).reshape(2, 2)
    x = np.stack([base * np.sqrt(v) for v in variances])
    assert channel_importance(x) == perm


def test_variance_order_truncates_least_important(rng):
    layer = np.stack([rng.normal(0, s, size=(4, 4)) for s in (0.1, 5.0, 1.0, 2.0)])
    cfg = TransformConfig(TransformId.IDENTITY, target_channels=2,
                          importance_order=ImportanceOrder.VARIANCE_DESC)
    z, side = reduce(FeatureSet.from_arrays([layer]), cfg)
    assert side.permutation == (1, 3, 2, 0)
    np.testing.assert_array_equal(z.data, layer[[1, 3]].astype(np.float32))
    back = restore(z, side).layers[0].data
    np.testing.assert_array_equal(back[[0, 2]], 0.0)
    np.testing.assert_array_equal(back[[1, 3]], z.data)


def test_invalid_configurations():
    two = FeatureSet.from_arrays([np.zeros((1, 4, 4)), np.zeros((1, 2, 2))])
    with pytest.raises(IdentityWithMultipleLayers):
        reduce(two, IDENTITY)
    with pytest.raises(NonDyadicPyramid):
        reduce(FeatureSet.from_arrays([np.zeros((1, 4, 4)), np.zeros((1, 3, 3))]),
               TransformConfig())
    with pytest.raises(NonDyadicPyramid):
        reduce(FeatureSet.from_arrays([np.zeros((1, 3, 3))]), TransformConfig())
    with pytest.raises(TargetChannelsTooLarge):
        reduce(two, TransformConfig(target_channels=3))
    with pytest.raises(SideInfoMismatch):
        reduce(two, TransformConfig(gain_vector=(1.0,)))
    with pytest.raises(ValueError):
        TransformConfig(gain_vector=(0.0,))
