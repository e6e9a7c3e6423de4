import numpy as np
import pytest

from fctm import FeatureSequence


def random_pyramid_sequence(rng, sets=3, channels=(4, 4), base=16, offset=None):
    """Sequence of dyadic pyramids with random per-layer offsets and scales."""
    arrays = []
    for _ in range(sets):
        layers = []
        for i, c in enumerate(channels):
            s = base >> i
            shift = rng.uniform(-3, 3) if offset is None else offset
            layers.append(rng.normal(shift, rng.uniform(0.5, 2.0), size=(c, s, s)))
        arrays.append(layers)
    return FeatureSequence.from_arrays(arrays)


def random_single_layer_sequence(rng, sets=2, c=4, h=8, w=8):
    return FeatureSequence.from_arrays(
        [[rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3.0), size=(c, h, w))]
         for _ in range(sets)]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ----------------------------------------------------

_acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        line = f"[{status}] {marker.args[0]}"
        _acceptance_lines.append(line + (f" -- {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
