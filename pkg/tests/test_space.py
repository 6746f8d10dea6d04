import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbsballs.space import (Box, Configuration, OutsideBall, Point, Remainder, Window,
                              balls_intersect, connected, dist, influence_zone)


def test_dist_examples():
    assert dist((0.3, 0.7), (0.3, 0.7)) == 0
    assert dist((0, 0), (3, 4)) == 5
    assert dist((0.25,), (0.75,)) == 0.5
    with pytest.raises(ValueError):
        dist((0, 0), (1,))


def test_balls_intersect_examples():
    assert not balls_intersect(Point((0,), 0), Point((1,), 0))
    assert balls_intersect(Point((0,), 0.5), Point((1,), 0.5))
    assert not balls_intersect(Point((0, 0), 2), Point((3, 4), 2))


def bfs_connected(omega, A, B):
    """Reference search on the Gilbert graph with two point probes."""
    pts = [A] + list(omega) + [B]
    seen, todo = {0}, deque([0])
    while todo:
        i = todo.popleft()
        for j in range(len(pts)):
            if j not in seen and balls_intersect(pts[i], pts[j]):
                seen.add(j)
                todo.append(j)
    return len(pts) - 1 in seen


def test_connected_examples():
    assert not connected(Configuration.empty(1), Point((0,), 0), Point((3,), 0))
    chain = Configuration([[0], [1.5], [3]], [1, 1, 1])
    assert connected(chain, Point((0,), 0), Point((3,), 0))
    assert bfs_connected(chain, Point((0,), 0), Point((3,), 0))
    # a box touched by a single ball that also reaches B
    omega = Configuration([[0.5, 0.5]], [0.6])
    assert connected(omega, Box((0, 0), (0.2, 0.2)), Point((1.0, 0.5), 0.0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 12), st.integers(0, 10 ** 6))
def test_connected_matches_bfs(n, seed):
    rng = np.random.default_rng(seed)
    omega = Configuration(rng.random((n, 2)) * 2, rng.uniform(0, 0.4, n), d=2)
    A = Point(tuple(rng.random(2) * 2), 0.0)
    B = Point(tuple(rng.random(2) * 2), 0.0)
    assert connected(omega, A, B) == bfs_connected(omega, A, B)


def test_outside_ball_probe():
    omega = Configuration([[0.0, 0.0], [0.9, 0.0]], [0.5, 0.5])
    assert connected(omega, Point((0, 0), 0), OutsideBall((0, 0), 1.4))
    assert not connected(omega, Point((0, 0), 0), OutsideBall((0, 0), 1.41))


def test_influence_zone_examples():
    w = Window((0.0,), (1.0,), 0.25)
    assert not influence_zone(w, Configuration.empty(1)).contains(Point((0.5,), 0.1))
    zone = influence_zone(w, Configuration([[1.1]], [0.1]))
    assert zone.contains(Point((0.9,), 0.25))
    assert not zone.contains(Point((0.2,), 0.1))


def test_remainder_excludes_balls_touching_blockers():
    w = Window((0.0,), (1.0,), 0.25)
    rem = Remainder(w, Configuration([[0.5]], [0.1]))
    assert not rem.contains(Point((0.6,), 0.05))
    assert rem.contains(Point((0.9,), 0.05))


def test_configuration_is_a_set():
    a = Configuration([[0.1, 0.2], [0.3, 0.4]], [0.1, 0.2])
    b = Configuration([[0.3, 0.4], [0.1, 0.2]], [0.2, 0.1])
    assert a == b
    assert Point((0.1, 0.2), 0.1) in a
    assert len(a.union(Configuration([[0.5, 0.5]], [0.1]))) == 3
    assert len(a.minus(Configuration([[0.1, 0.2]], [0.1]))) == 1
    assert a.symmetric_difference(b) == Configuration.empty(2)
    assert a.is_simple()
    assert not Configuration([[0.1, 0.2], [0.1, 0.2]], [0.1, 0.1]).is_simple()


def test_window_validation():
    with pytest.raises(ValueError):
        Window((0.0,), (0.3,), 0.1, W=1)  # 0.3 not dyadic at 1 bit
    with pytest.raises(ValueError):
        Window((0.0,), (1.0,), 0.0)
    w = Window((0.0, 0.0), (1.0, 2.0), 0.5, W=0)
    assert w.m == 3 and w.volume == 2.0
    assert w.contains([[0.5, 1.9], [1.0, 0.0]], [0.5, 0.1]).tolist() == [True, False]
