import numpy as np
import pytest

from _oracles import priority_order_ref
from priocast.errors import ShapeError
from priocast.scoring import ChannelOrder, drop_lowest, gradual_scoring, priority_order


def test_g_zero_all_channels_equal_map(rng):
    m = rng.random((4, 4))
    s = gradual_scoring(m, 3, 0.0)
    for i in range(3):
        np.testing.assert_array_equal(s[i], m)


def test_default_g_two_channels():
    m = np.full((2, 2), 0.3)
    s = gradual_scoring(m, 2, 0.2, ChannelOrder.ASCENDING)
    assert sorted(s[:, 0, 0]) == pytest.approx([0.3, 0.5])
    s = gradual_scoring(m, 2, 0.2, ChannelOrder.DESCENDING)
    # Descending mirrors the offsets: channel 0 takes the larger one.
    assert list(s[:, 0, 0]) == pytest.approx([0.5, 0.3])


def test_ascending_arithmetic_single_position():
    s = gradual_scoring(np.array([[0.4]]), 3, 1.0, ChannelOrder.ASCENDING)
    assert list(s[:, 0, 0]) == pytest.approx([0.4, 1.4, 2.4])


def test_descending_mirrors_offsets():
    s = gradual_scoring(np.array([[0.4]]), 3, 1.0, ChannelOrder.DESCENDING)
    assert list(s[:, 0, 0]) == pytest.approx([2.4, 1.4, 0.4])


def test_scores_exact_formula(rng):
    m = rng.random((8, 8))
    g = 0.19921875  # value on the 8.8 wire grid
    s = gradual_scoring(m, 5, g, ChannelOrder.ASCENDING)
    for i in range(5):
        np.testing.assert_array_equal(s[i], m + g * i)


def test_negative_g_rejected():
    with pytest.raises(ValueError):
        gradual_scoring(np.zeros((2, 2)), 2, -0.1)


def test_priority_order_all_equal_is_identity():
    order = priority_order(np.zeros((2, 3, 3)))
    np.testing.assert_array_equal(order, np.arange(18))


def test_priority_order_hand_example():
    # L=1, K=2 map scored as-is: order visits (0,0), (1,1), (1,0), (0,1).
    scores = np.array([[[0.9, 0.1], [0.4, 0.6]]])
    order = priority_order(scores)
    np.testing.assert_array_equal(order, [0, 3, 2, 1])


def test_priority_order_matches_sorted_oracle(rng):
    for _ in range(10):
        scores = rng.random((3, 4, 4))
        scores.reshape(-1)[rng.integers(0, scores.size, 6)] = 0.5  # force ties
        np.testing.assert_array_equal(priority_order(scores), priority_order_ref(scores))


def test_priority_order_is_permutation_and_non_increasing(rng):
    scores = rng.random((4, 8, 8))
    order = priority_order(scores)
    assert sorted(order) == list(range(scores.size))
    flat = scores.reshape(-1)[order]
    assert (np.diff(flat) <= 0).all()


def test_drop_lowest_endpoints(rng):
    z = rng.random((2, 4, 4))
    s = rng.random((2, 4, 4))
    np.testing.assert_array_equal(drop_lowest(z, s, 0.0), z)
    np.testing.assert_array_equal(drop_lowest(z, s, 100.0), np.zeros_like(z))


def test_drop_lowest_hand_example():
    z = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    s = np.array([[[0.9, 0.1], [0.4, 0.6]]])
    out = drop_lowest(z, s, 50.0)
    np.testing.assert_array_equal(out, [[[1.0, 0.0], [0.0, 4.0]]])


def test_drop_lowest_equals_copy_back_formulation(rng):
    for _ in range(10):
        z = rng.random((3, 4, 4))
        s = rng.random((3, 4, 4))
        p = float(rng.integers(0, 101))
        got = drop_lowest(z, s, p)
        order = priority_order(s)
        keep = z.size - int(np.floor(p * z.size / 100.0))
        alt = np.zeros(z.size)
        alt[order[:keep]] = z.reshape(-1)[order[:keep]]
        np.testing.assert_array_equal(got, alt.reshape(z.shape))


def test_drop_lowest_floor_granularity():
    # floor(30 * 10 / 100) = 3 positions dropped, no float fuzz.
    z = np.ones((1, 2, 5))
    s = np.arange(10, dtype=float).reshape(1, 2, 5)
    out = drop_lowest(z, s, 30.0)
    assert (out == 0).sum() == 3


def test_drop_lowest_shape_mismatch():
    with pytest.raises(ShapeError):
        drop_lowest(np.zeros((2, 2, 2)), np.zeros((2, 3, 3)), 10)


def test_large_g_blocks_channels(rng):
    m = rng.random((4, 4))
    g = (m.max() - m.min()) * 1.01
    order = priority_order(gradual_scoring(m, 3, g, ChannelOrder.DESCENDING))
    per = m.size
    # Whole channels are contiguous: channel 0 first under DESCENDING.
    assert set(order[:per] // per) == {0}
    assert set(order[per : 2 * per] // per) == {1}
    assert set(order[2 * per :] // per) == {2}


def test_g_zero_interleaves_channels(rng):
    m = rng.random((4, 4))
    order = priority_order(gradual_scoring(m, 3, 0.0))
    # Each spatial position's three channels are consecutive, channel order
    # ascending by tie-break.
    per = m.size
    triplets = order.reshape(-1, 3)
    assert (triplets // per == [0, 1, 2]).all()
    assert (triplets[:, 0] % per == triplets[:, 1] % per).all()
