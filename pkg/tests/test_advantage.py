import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ragcritic.advantage import compute_advantages

MAGNITUDE = 1.224744871391589  # 1/sqrt(2/3), evaluated independently


def test_three_point_group():
    a = compute_advantages([-1.0, 0.0, 1.0])
    assert a.advantages[1] == 0.0
    assert a.advantages[2] == pytest.approx(MAGNITUDE, abs=1e-12)
    assert a.advantages[0] == pytest.approx(-MAGNITUDE, abs=1e-12)
    assert not a.degenerate


def test_all_equal_group():
    a = compute_advantages([0.4] * 6)
    assert a.advantages == [0.0] * 6
    assert a.degenerate


def test_sample_std_option():
    a = compute_advantages([-1.0, 0.0, 1.0], ddof=1)
    assert a.advantages[2] == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [[], None])
def test_empty_group(bad):
    with pytest.raises((ValueError, TypeError)):
        compute_advantages(bad)


groups = st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=16)


@given(groups)
def test_normalized(rewards):
    a = compute_advantages(rewards)
    if a.degenerate:
        assert a.advantages == [0.0] * len(rewards)
        return
    n = len(rewards)
    assert abs(math.fsum(a.advantages) / n) < 1e-9
    assert math.sqrt(math.fsum(x * x for x in a.advantages) / n) == pytest.approx(1.0, abs=1e-6)


@given(groups, st.floats(-5, 5))
def test_shift_invariant(rewards, shift):
    a = compute_advantages(rewards)
    b = compute_advantages([r + shift for r in rewards])
    assume(a.std > 1e-3)
    assert all(abs(x - y) < 1e-9 for x, y in zip(a.advantages, b.advantages))
