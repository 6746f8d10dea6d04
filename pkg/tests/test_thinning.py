import itertools
import math

import numpy as np
import pytest

from gibbsballs.models import ContinuumRandomCluster, HardSphere, NoInteraction, Strauss
from gibbsballs.order import OrderInterval, encode, encode_config, interval_measure, successor_at_mass
from gibbsballs.partition import gibbs_rejection_sample, z_exact_1d
from gibbsballs.poisson import RadiusLaw, sample_poisson
from gibbsballs.space import Configuration, Point, Window
from gibbsballs.stattests import count_table_test
from gibbsballs.thinning import (ThinningKernel, from_key_position, joint_thin_logdensity,
                                 single_point_prob, thin_points, thin_sample)

RODS = Window((0.0,), (1.0,), 0.25, W=32)
Q02 = RadiusLaw.delta(0.2)
EMPTY1 = Configuration.empty(1)


def test_independent_thinning_probability():
    k = ThinningKernel(NoInteraction(), 0.3, Q02, RODS, alpha=1.2)
    assert single_point_prob(k, Point((0.5,), 0.2), EMPTY1).value == pytest.approx(0.25)
    k = ThinningKernel(NoInteraction(), 0.7, Q02, RODS)
    assert single_point_prob(k, Point((0.5,), 0.2), EMPTY1).value == 1.0


def test_keep_everything_when_nothing_interacts(rng):
    k = ThinningKernel(NoInteraction(), 2.0, Q02, RODS)
    for _ in range(20):
        kept, poisson = thin_sample(k, rng)
        assert kept == poisson


def test_zero_intensity_gives_empty_pair(rng):
    k = ThinningKernel(HardSphere(), 0.0, Q02, RODS)
    kept, poisson = thin_sample(k, rng)
    assert len(kept) == 0 and len(poisson) == 0


def test_hard_sphere_overlap_gives_zero(rng):
    k = ThinningKernel(HardSphere(), 0.5, Q02, RODS, gamma=Configuration([[1.1]], [0.2]))
    assert single_point_prob(k, Point((0.95,), 0.2), EMPTY1, rng).value == 0.0
    assert single_point_prob(k, Point((0.5,), 0.2), Configuration([[0.3]], [0.2]), rng).value == 0.0


def fd_keep_probability(model, lam, alpha, x, context, R=0.2):
    """Finite difference of the log void probability of ``[x, 1)`` at one key quantum of mass."""
    mass = interval_measure(OrderInterval(), RadiusLaw.delta(R), RODS).value
    X = Point((x,), R)
    Xe = successor_at_mass(X, 1e-3 * mass, RadiusLaw.delta(R), RODS)
    xe = Xe.location[0]

    def F(s):
        return lam * (1.0 - s) + math.log(z_exact_1d(lam, s, 1.0, R, model, context).value)

    return -(F(xe) - F(x)) / (alpha * (xe - x))


def test_keep_probability_matches_finite_difference_for_rods():
    k = ThinningKernel(HardSphere(), 0.5, Q02, RODS, alpha=0.5, method="exact1d")
    X = Point((0.5,), 0.2)
    p = single_point_prob(k, X, EMPTY1).value
    fd = fd_keep_probability(HardSphere(), 0.5, 0.5, X.location[0], EMPTY1)
    assert abs(p - fd) / p < 1e-2


def test_from_key_position_inverts_rod_keys():
    R = RODS.quantize([[0.0]], [0.2])[1][0]
    for x in (0.0, 0.123, 0.5, 0.999):
        X = Point(tuple(RODS.quantize([[x]], [0.2])[0][0]), R)
        assert from_key_position(RODS, R, encode(X, RODS)) == X.location[0]


def test_joint_density_examples():
    k = ThinningKernel(HardSphere(), 0.5, Q02, RODS, method="exact1d")
    full = Configuration([[0.2], [0.7]], [0.2, 0.2])
    assert joint_thin_logdensity(k, Configuration([[0.5]], [0.2]), full) == -math.inf
    assert joint_thin_logdensity(k, EMPTY1, EMPTY1) == 0.0


@pytest.mark.parametrize("model,lam,alpha", [(HardSphere(), 0.5, 0.5),
                                             (ContinuumRandomCluster(2.0), 0.3, 0.6)])
def test_joint_density_sums_to_one_over_subsets(model, lam, alpha):
    k = ThinningKernel(model, lam, Q02, RODS, alpha=alpha, method="exact1d")
    rng = np.random.default_rng(5)
    for _ in range(5):
        full = sample_poisson(RODS, 4.0, Q02, rng)
        rows = full.rows()
        total = 0.0
        for mask in itertools.product([False, True], repeat=len(full)):
            sub = Configuration.from_rows(rows[np.array(mask, dtype=bool)], 1) if any(mask) else EMPTY1
            total += math.exp(joint_thin_logdensity(k, sub, full))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_estimated_probability_rules_agree_with_exact():
    rng = np.random.default_rng(8)
    X = Point((0.4,), 0.2)
    kept = Configuration([[0.1]], [0.2])
    model = ContinuumRandomCluster(2.0)
    exact = single_point_prob(ThinningKernel(model, 0.3, Q02, RODS, method="exact1d"), X, kept).value
    zr = single_point_prob(ThinningKernel(model, 0.3, Q02, RODS, method="zratio", z_budget=3000),
                           X, kept, rng)
    mc = single_point_prob(ThinningKernel(model, 0.3, Q02, RODS, method="mc", mc_draws=4000),
                           X, kept, rng)
    assert abs(zr.value - exact) <= 3 * zr.error + 1e-9
    assert abs(mc.value - exact) <= 4 * mc.error
    assert 0.0 <= zr.value <= 1.0


def test_bias_budget_flags_estimated_runs(rng):
    k = ThinningKernel(ContinuumRandomCluster(2.0), 0.3, Q02, RODS, method="zratio", z_budget=50,
                       bias_budget=1e-9)
    info = {}
    for _ in range(20):
        thin_sample(k, rng, info)
        if info["visited"]:
            break
    assert info["flagged"] and info["bias"] > 0
    exact = ThinningKernel(ContinuumRandomCluster(2.0), 0.3, Q02, RODS)
    thin_sample(exact, rng, info)
    assert info["bias"] == 0.0 and not info["flagged"]


def test_stop_key_leaves_later_points_undecided(rng):
    k = ThinningKernel(NoInteraction(), 1.0, Q02, RODS)
    poisson = sample_poisson(RODS, 30.0, Q02, rng)
    keys = encode_config(poisson, RODS)
    stop = sorted(keys)[len(keys) // 2]
    keep, info = thin_points(k, poisson, rng, keys, stop)
    assert info.visited == sum(kk <= stop for kk in keys)
    assert all(keep[i] == (keys[i] <= stop) for i in range(len(keys)))


def test_alpha_below_domination_is_rejected():
    with pytest.raises(ValueError):
        ThinningKernel(ContinuumRandomCluster(2.0), 0.3, Q02, RODS, alpha=0.5)
    with pytest.raises(ValueError):
        ThinningKernel(HardSphere(), 0.3, Q02, RODS, method="guess")


@pytest.mark.parametrize("model,lam,alpha,window,Q", [
    (HardSphere(), 0.5, 0.5, RODS, Q02),
    (ContinuumRandomCluster(2.0), 0.3, 0.6, Window.cube(2, r_max=0.125), RadiusLaw.delta(0.1)),
    (Strauss(0.5), 1.0, 1.0, Window.cube(2, r_max=0.125), RadiusLaw.delta(0.1)),
])
def test_thinned_counts_match_rejection(model, lam, alpha, window, Q):
    rng = np.random.default_rng(31)
    k = ThinningKernel(model, lam, Q, window, alpha=alpha)
    a = [len(thin_sample(k, rng)[0]) for _ in range(3000)]
    b = [len(gibbs_rejection_sample(lam, OrderInterval(), None, model, window, Q, rng, alpha))
         for _ in range(3000)]
    _, p, _ = count_table_test(a, b)
    assert p > 0.001


def test_thinning_with_boundary_matches_rejection():
    rng = np.random.default_rng(32)
    gamma = Configuration([[-0.1], [1.15]], [0.2, 0.2])
    model = ContinuumRandomCluster(2.0)
    k = ThinningKernel(model, 0.5, Q02, RODS, gamma=gamma)
    a = [len(thin_sample(k, rng)[0]) for _ in range(3000)]
    b = [len(gibbs_rejection_sample(0.5, OrderInterval(), gamma, model, RODS, Q02, rng))
         for _ in range(3000)]
    assert count_table_test(a, b)[1] > 0.001
