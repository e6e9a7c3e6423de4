import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fctm import FeatureSet
from fctm.errors import NonFiniteValue
from fctm.stats import (
    GlobalStats,
    ReducedStats,
    from_bfloat16,
    global_stats,
    reduced_stats,
    to_bfloat16,
)


def test_constant_layers_sum_their_means():
    g = global_stats(FeatureSet.from_arrays([np.ones((2, 2, 2)), np.full((2, 1, 1), 3.0)]))
    assert (g.mu_x, g.sigma_x) == (4.0, 0.0)


def test_population_variance():
    g = global_stats(FeatureSet.from_arrays([np.array([[[0.0, 2.0]]])]))
    assert (g.mu_x, g.sigma_x) == (1.0, 1.0)


def test_sigma_of_independent_normal_layers(rng):
    n = 4
    layers = [rng.standard_normal((16, 64, 64)) for _ in range(n)]
    g = global_stats(FeatureSet.from_arrays(layers))
    assert g.sigma_x == pytest.approx(math.sqrt(n), rel=0.01)
    assert abs(g.mu_x) < 0.05


@pytest.mark.parametrize("values, expected", [
    (np.zeros(8), (0.0, 0.0)),
    (np.array([1.0, 1.0, 3.0, 3.0]), (2.0, 1.0)),
])
def test_reduced_stats_examples(values, expected):
    s = reduced_stats(values.reshape(1, 1, -1))
    assert (s.mu_z, s.sigma_z) == expected


def test_reduced_stats_two_pass_oracle(rng):
    z = rng.normal(3.0, 2.0, size=(5, 7, 9)).astype(np.float32)
    flat = [float(v) for v in z.ravel()]
    mean = math.fsum(flat) / len(flat)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in flat) / len(flat))
    s = reduced_stats(z)
    assert s.mu_z == pytest.approx(mean, rel=1e-6)
    assert s.sigma_z == pytest.approx(std, rel=1e-6)


@pytest.mark.parametrize("v, bits", [(1.0, 0x3F80), (0.0, 0x0000), (-2.0, 0xC000), (0.5, 0x3F00)])
def test_bfloat16_known_patterns(v, bits):
    assert to_bfloat16(v) == bits
    assert from_bfloat16(bits) == v


def test_bfloat16_ties_to_even():
    # 1 + 2^-8 sits halfway between 1.0 and 1 + 2^-7; the even pattern is 1.0
    assert to_bfloat16(1.0 + 2 ** -8) == 0x3F80
    # 1 + 3*2^-8 sits halfway between 1+2^-7 (odd) and 1+2^-6 (even)
    assert to_bfloat16(1.0 + 3 * 2 ** -8) == 0x3F82


def test_every_finite_pattern_is_a_fixed_point():
    for bits in range(1 << 16):
        if (bits & 0x7F80) == 0x7F80:
            continue
        assert to_bfloat16(from_bfloat16(bits)) == bits


@pytest.mark.parametrize("v", [math.inf, -math.inf, math.nan, 1e39, 3.4e38])
def test_bfloat16_rejects_unrepresentable(v):
    with pytest.raises(NonFiniteValue):
        to_bfloat16(v)


def test_bfloat16_relative_error_over_exponent_range(rng):
    for e in range(-125, 127):
        for m in rng.uniform(1.0, 2.0, size=8):
            v = float(np.float32(m * 2.0 ** e))
            if math.isinf(v):
                continue
            back = from_bfloat16(to_bfloat16(v))
            assert abs(back - v) / abs(v) <= 2 ** -8


@given(st.floats(min_value=1.2e-38, max_value=3.3e38) | st.floats(min_value=-3.3e38, max_value=-1.2e-38))
def test_bfloat16_relative_error_property(v):
    back = from_bfloat16(to_bfloat16(v))
    assert abs(back - v) / abs(v) <= 2 ** -8


def test_signaled_precisions():
    g = GlobalStats(1.2345678, 0.1).quantized()
    assert to_bfloat16(g.mu_x) == to_bfloat16(1.2345678)
    r = ReducedStats(1.2345678, 0.1).quantized()
    assert r.mu_z == float(np.float32(1.2345678))


def test_negative_sigma_rejected():
    with pytest.raises(ValueError):
        GlobalStats(0.0, -1.0)
