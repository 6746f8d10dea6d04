import numpy as np

from gibbsballs.stattests import binomial_se, count_table_test, ks_two_sample, poisson_gof


def test_poisson_fit_accepts_poisson_counts_and_rejects_shifted_ones():
    rng = np.random.default_rng(0)
    assert poisson_gof(rng.poisson(1.0, 5000), 1.0)[1] > 0.001
    assert poisson_gof(rng.poisson(1.5, 5000), 1.0)[1] < 1e-6


def test_count_table_merges_sparse_tails():
    rng = np.random.default_rng(1)
    a, b = rng.poisson(2.0, 3000), rng.poisson(2.0, 3000)
    stat, p, dof = count_table_test(a, b)
    assert p > 0.001 and dof >= 1
    assert count_table_test(rng.poisson(2.0, 3000), rng.poisson(2.4, 3000))[1] < 1e-6
    assert count_table_test([0, 0, 0], [0, 0]) == (0.0, 1.0, 0)


def test_ks_and_binomial_helpers():
    rng = np.random.default_rng(2)
    assert ks_two_sample(rng.random(2000), rng.random(2000))[1] > 0.001
    assert ks_two_sample([], [1.0]) == (0.0, 1.0)
    assert binomial_se(0.5, 100) == 0.05
