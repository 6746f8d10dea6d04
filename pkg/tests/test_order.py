import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbsballs.order import (OrderInterval, block_ranges, compare, decode, deinterleave,
                              dyadic_blocks, encode, encode_many, from_ints, interleave,
                              interval_measure, sort_order, successor_at_mass,
                              successor_key_at_mass, to_ints)
from gibbsballs.poisson import RadiusLaw, sample_poisson
from gibbsballs.space import Configuration, Point, Region, Window


def test_encode_examples():
    w = Window((0.0,), (2.0,), 1.0, W=0)
    assert encode(Point((1.0,), 0.0), w) == 1
    assert encode(Point((0.0,), 1.0), w) == 2
    assert deinterleave(3, 2) == [1, 1]
    X = decode(0, w)
    assert X.location == (0.0,) and X.radius == 0.0
    assert compare(Point((0.5,), 0.5), Point((0.5,), 0.5), w) == 0


@pytest.mark.parametrize("W", [4, 8, 16, 32])
@pytest.mark.parametrize("m", [2, 3, 4])
def test_decode_encode_roundtrip(W, m):
    rng = np.random.default_rng(W * 10 + m)
    w = Window((0.0,) * (m - 1), (1.0,) * (m - 1), 1.0, W)
    ints = rng.integers(0, 2 ** W, size=(2000, m))
    for row in ints.tolist():
        assert deinterleave(interleave(row, m), m) == row
    c, r = from_ints(w, ints)
    np.testing.assert_array_equal(to_ints(w, c, r), ints)
    for k in encode_many(w, c[:50], r[:50]):
        X = decode(k, w)
        assert encode(X, w) == k


def test_hyperblocks_are_key_intervals_at_W4():
    # every aligned dyadic cube of side 2**s in component space is exactly a key interval
    m, W = 2, 4
    n = 2 ** W
    for s in range(W + 1):
        side = 2 ** s
        for a, b in itertools.product(range(0, n, side), repeat=m):
            keys = sorted(interleave([a + i, b + j], m) for i in range(side) for j in range(side))
            assert keys == list(range(keys[0], keys[0] + side ** m))
            ranges = block_ranges(keys[0], m * s, m)
            assert ranges == [(a, a + side), (b, b + side)]


def test_component_map_is_a_bijection_at_W4():
    m, n = 3, 16
    keys = {interleave(row, m) for row in itertools.product(range(n), repeat=m)}
    assert keys == set(range(n ** m))


def test_radius_is_most_significant_within_a_power_of_two():
    w = Window((0.0,), (1.0,), 1.0, W=4)
    # same spatial bit pattern, radius bit set beats the spatial bit at the same level
    a = Point((0.5,), 0.0)
    b = Point((0.0,), 0.5)
    assert compare(a, b, w) == -1


def test_sort_order_matches_keys(rng):
    w = Window((0.0, 0.0), (1.0, 1.0), 0.25, W=16)
    omega = sample_poisson(w, 40, RadiusLaw.uniform(0.0, 0.25), rng)
    keys = encode_many(w, omega.centers, omega.radii)
    assert [keys[i] for i in sort_order(omega, w)] == sorted(keys)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 12), st.integers(0, 2 ** 12))
def test_dyadic_blocks_tile_the_interval(lo, span):
    hi = lo + span
    covered = []
    for a, s in dyadic_blocks(lo, hi):
        assert a % (1 << s) == 0
        covered.append((a, a + (1 << s)))
    pos = lo
    for a, b in covered:
        assert a == pos
        pos = b
    assert pos == hi or (span == 0 and not covered)


def test_interval_measure_examples():
    w = Window((0.0,), (1.0,), 0.25, W=16)
    Q = RadiusLaw.delta(0.25)
    assert interval_measure(OrderInterval(), Q, w).value == pytest.approx(1.0, abs=1e-15)
    assert interval_measure(OrderInterval(5, 5), Q, w).value == 0.0
    # keys whose leading spatial bit is 1: x in [0.5, 1)
    start = interleave([2 ** 15, 0], 2)
    end = interleave([0, 2 ** (w.P + w.W - 1)], 2)  # first key with the top radius bit
    iv = OrderInterval(start, None)
    rng = np.random.default_rng(0)
    omega = sample_poisson(w, 20000, Q, rng)
    mc = iv.mask_config(w, omega).mean()
    exact = interval_measure(iv, Q, w).value
    assert exact == pytest.approx(0.5, abs=1e-12)
    assert abs(mc - exact) < 4 * np.sqrt(0.25 / len(omega))
    assert end > start


def test_interval_measure_matches_monte_carlo_for_uniform_radii(rng):
    w = Window((0.0, 0.0), (1.0, 1.0), 0.25, W=10)
    Q = RadiusLaw.uniform(0.05, 0.25)
    omega = sample_poisson(w, 30000, Q, rng)
    keys = np.array(encode_many(w, omega.centers, omega.radii), dtype=object)
    lo, hi = int(np.quantile(keys.astype(float), 0.2)), int(np.quantile(keys.astype(float), 0.7))
    frac = np.mean([(lo <= k < hi) for k in keys])
    exact = interval_measure(OrderInterval(lo, hi), Q, w).value
    assert abs(frac - exact) < 4 * np.sqrt(frac * (1 - frac) / len(keys))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 20), st.integers(0, 2 ** 20), st.integers(0, 2 ** 20))
def test_interval_measure_is_additive(a, b, c):
    w = Window((0.0,), (1.0,), 0.5, W=6)
    Q = RadiusLaw.uniform(0.1, 0.5)
    a, b, c = sorted((a % 2 ** w.key_bits, b % 2 ** w.key_bits, c % 2 ** w.key_bits))
    m = lambda x, y: interval_measure(OrderInterval(x, y), Q, w).value
    assert m(a, b) + m(b, c) == pytest.approx(m(a, c), abs=1e-12)


def test_region_measure_is_additive_within_error(rng):
    w = Window((0.0, 0.0), (1.0, 1.0), 0.25, W=12)
    Q = RadiusLaw.delta(0.1)
    region = Region(w, lambda c, r: c[:, 0] + c[:, 1] < 1.0)
    mid = 2 ** (w.key_bits - 2)
    a = interval_measure(OrderInterval(0, mid, region), Q, w, 20000, rng)
    b = interval_measure(OrderInterval(mid, None, region), Q, w, 20000, rng)
    whole = interval_measure(OrderInterval(0, None, region), Q, w, 20000, rng)
    se = np.sqrt(a.se ** 2 + b.se ** 2 + whole.se ** 2)
    assert abs(a.value + b.value - whole.value) < 4 * se
    assert abs(whole.value - 0.5) < 4 * whole.se
    with pytest.raises(ValueError):
        interval_measure(OrderInterval(0, None, region), Q, w)


def test_unnormalised_law_is_rejected():
    w = Window((0.0,), (1.0,), 0.25)
    with pytest.raises(ValueError):
        interval_measure(OrderInterval(), RadiusLaw.delta(0.5), w)


def test_successor_examples():
    w = Window((0.0,), (1.0,), 0.25, W=16)
    Q = RadiusLaw.delta(0.25)
    X = decode(0, w)
    assert successor_key_at_mass(0, 0.0, Q, w) == 0
    assert successor_key_at_mass(0, 1.0, Q, w) is None
    assert successor_at_mass(X, 1.0, Q, w) is None
    Y = successor_at_mass(X, 0.5, Q, w)
    assert Y.location[0] == pytest.approx(0.5, abs=2 ** -14)
    k = successor_key_at_mass(0, 0.5, Q, w)
    assert interval_measure(OrderInterval(0, k), Q, w).value == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        successor_key_at_mass(0, 1.5, Q, w)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(1e-4, 0.09))
def test_successor_hits_the_requested_mass(x, eps):
    w = Window((0.0, 0.0), (1.0, 1.0), 0.5, W=10)
    Q = RadiusLaw.uniform(0.0, 0.5)
    X = Point((x, 0.3), 0.2)
    k0 = encode(X, w)
    k = successor_key_at_mass(k0, eps, Q, w)
    got = interval_measure(OrderInterval(k0, k), Q, w).value
    before = interval_measure(OrderInterval(k0, k - 1), Q, w).value
    assert before < eps <= got + 1e-15
