"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL verdict; ``conftest.py`` prints the
collected verdicts at the end of the run.
"""
import functools
import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.spatial.distance import pdist

from gibbsballs import cli
from gibbsballs.coupling import DepthCapExceeded, disagreement_sample, verify_disagreement
from gibbsballs.diagnostics import boundary_influence, count_at_least, dense_shell, uniqueness_scan
from gibbsballs.models import ContinuumRandomCluster, HardSphere, Strauss, dom_level
from gibbsballs.order import (OrderInterval, block_ranges, decode, encode, from_ints, interleave,
                              interval_measure, successor_at_mass)
from gibbsballs.partition import gibbs_rejection_sample, z_exact_1d
from gibbsballs.percolation import connection_sweep, fit_decay, upsilon_holds
from gibbsballs.poisson import RadiusLaw, sample_poisson
from gibbsballs.space import Box, Configuration, Point, Window
from gibbsballs.stattests import count_table_test, ks_two_sample, poisson_gof
from gibbsballs.thinning import ThinningKernel, single_point_prob, thin_sample

sys.path.insert(0, str(Path(__file__).parent))
from test_coupling import ring  # noqa: E402

VERDICTS = {}
GOLDEN = Path(__file__).parent / "golden"

RODS = Window((0.0,), (1.0,), 0.25, W=32)
SQUARE = Window.cube(2, r_max=0.125)
Q01 = RadiusLaw.delta(0.1)
Q02 = RadiusLaw.delta(0.2)
EMPTY2 = Configuration.empty(2)


def verdict(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[n] = line
    print(line)
    assert ok, line


# --------------------------------------------------------------------------
# shared samples


@functools.lru_cache(maxsize=None)
def rod_thin_samples(reps=10 ** 5):
    """Counts and leftmost centers of hard-rod thinning draws."""
    k = ThinningKernel(HardSphere(), 0.5, Q02, RODS, alpha=0.5)
    rng = np.random.default_rng(101)
    counts = np.zeros(reps, dtype=int)
    first = np.full(reps, np.inf)
    for i in range(reps):
        kept, _ = thin_sample(k, rng)
        counts[i] = len(kept)
        if len(kept):
            first[i] = kept.centers[:, 0].min()
    return counts, first


def rejection_counts(model, lam, alpha, window, Q, reps, seed, gamma=None):
    rng = np.random.default_rng(seed)
    return np.array([len(gibbs_rejection_sample(lam, OrderInterval(), gamma, model, window, Q, rng,
                                                alpha)) for _ in range(reps)])


COUPLING_MODELS = {
    "hard_sphere": (HardSphere(), 1.0),
    "strauss": (Strauss(0.5), 1.0),
    "crcm": (ContinuumRandomCluster(2.0), 0.5),
}


def min_distance(omega):
    return float(pdist(omega.centers).min()) if len(omega) >= 2 else math.nan


@functools.lru_cache(maxsize=None)
def coupling_runs(name, reps=10 ** 4):
    model, lam = COUPLING_MODELS[name]
    g = ring()
    out = {"violations": 0, "aborted": 0, "depth": [], "n1": [], "n2": [], "n3": [],
           "d1": [], "d2": []}
    for i in range(reps):
        try:
            s = disagreement_sample(model, lam, None, Q01, SQUARE, EMPTY2, g, 2024, i)
        except DepthCapExceeded:
            out["aborted"] += 1
            continue
        out["violations"] += len(verify_disagreement(s)["violations"])
        out["depth"].append(s.depth)
        out["n1"].append(len(s.xi1))
        out["n2"].append(len(s.xi2))
        out["n3"].append(len(s.xi3))
        out["d1"].append(min_distance(s.xi1))
        out["d2"].append(min_distance(s.xi2))
    return {k: (np.array(v) if isinstance(v, list) else v) for k, v in out.items()}


@functools.lru_cache(maxsize=None)
def rejection_oracle(name, boundary, reps=10 ** 4):
    model, lam = COUPLING_MODELS[name]
    gamma = ring() if boundary else None
    rng = np.random.default_rng(7 + boundary)
    samples = [gibbs_rejection_sample(lam, OrderInterval(), gamma, model, SQUARE, Q01, rng)
               for _ in range(reps)]
    return np.array([len(s) for s in samples]), np.array([min_distance(s) for s in samples])


# --------------------------------------------------------------------------
# 1. thinning reproduces the Gibbs count law


def test_criterion_1_thinning_matches_rejection_oracle():
    reps = 10 ** 5
    rods, _ = rod_thin_samples(reps)
    rods_ref = rejection_counts(HardSphere(), 0.5, 0.5, RODS, Q02, reps, 102)
    _, p_rods, _ = count_table_test(rods, rods_ref)

    k = ThinningKernel(ContinuumRandomCluster(2.0), 0.3, Q01, SQUARE, alpha=0.6)
    rng = np.random.default_rng(103)
    crcm = np.array([len(thin_sample(k, rng)[0]) for _ in range(reps)])
    crcm_ref = rejection_counts(ContinuumRandomCluster(2.0), 0.3, 0.6, SQUARE, Q01, reps, 104)
    _, p_crcm, _ = count_table_test(crcm, crcm_ref)
    verdict(1, p_rods > 0.01 and p_crcm > 0.01,
            f"count chi-square p = {p_rods:.3f} (hard rods), {p_crcm:.3f} (crcm), {reps} draws each")


# --------------------------------------------------------------------------
# 2. closed-form keep probability equals the derivative of the log void probability


def _triples(model, R, n, rng):
    """Random (X, kept, gamma) with X admissible, rods of half-length R."""
    hard = isinstance(model, HardSphere)
    out = []
    while len(out) < n:
        x = math.floor(rng.uniform(0.05, 0.95) * 2 ** 32) / 2 ** 32
        kept = sorted(rng.uniform(0.0, x, rng.integers(0, 3)).tolist())
        gamma = []
        if rng.random() < 0.5:
            gamma.append(-rng.uniform(0.0, 0.4))
        if rng.random() < 0.5:
            gamma.append(1.0 + rng.uniform(0.0, 0.4))
        rods = sorted(kept + gamma + [x])
        if hard and np.any(np.diff(rods) < 2 * R):
            continue
        out.append((x, kept, gamma))
    return out


def _fd_keep(model, lam, alpha, R, x, context):
    Q = RadiusLaw.delta(R)
    mass = interval_measure(OrderInterval(), Q, RODS).value
    xe = successor_at_mass(Point((x,), R), 1e-3 * mass, Q, RODS).location[0]

    def F(s):
        return lam * (1.0 - s) + math.log(z_exact_1d(lam, s, 1.0, R, model, context).value)

    return -(F(xe) - F(x)) / (alpha * (xe - x)), xe - x


def test_criterion_2_keep_probability_matches_finite_difference():
    rng = np.random.default_rng(202)
    R = 0.1
    worst = {}
    budgets = {}
    for name, model, lam in (("hard rods", HardSphere(), 0.8), ("crcm", ContinuumRandomCluster(2.0), 0.5)):
        alpha = dom_level(model, lam)
        errs, zerr = [], []
        for x, kept, gamma in _triples(model, R, 24, rng):
            g = Configuration([[v] for v in gamma], [R] * len(gamma), d=1)
            kc = Configuration([[v] for v in kept], [R] * len(kept), d=1)
            k = ThinningKernel(model, lam, Q01, RODS, gamma=g, alpha=alpha, method="exact1d")
            p = single_point_prob(k, Point((x,), R), kc)
            fd, _ = _fd_keep(model, lam, alpha, R, x, g.union(kc))
            errs.append(abs(p.value - fd) / p.value)
            zerr.append(p.error / p.value)
        worst[name] = max(errs)
        budgets[name] = max(zerr)
    ok = all(v < 1e-2 for v in worst.values())
    verdict(2, ok, "max relative error " + ", ".join(
        f"{k} {v:.1e} (Z oracle rel. error <= {budgets[k]:.0e})" for k, v in worst.items())
        + ", 24 triples each")


# --------------------------------------------------------------------------
# 3. void probability of the order tail


def test_criterion_3_void_probability_of_the_tail():
    counts, first = rod_thin_samples()
    lam, R = 0.5, 0.2
    rows = []
    ok = True
    for x in (0.1, 0.3, 0.5, 0.7, 0.9):
        cond = first >= x  # no point kept before X
        n = int(cond.sum())
        emp = float(np.mean(counts[cond] == 0))
        se = math.sqrt(emp * (1 - emp) / n)
        theory = math.exp(-lam * (1 - x)) / z_exact_1d(lam, x, 1.0, R, HardSphere()).value
        ok &= abs(emp - theory) <= 3 * se
        rows.append(f"x={x}: {emp:.4f} vs {theory:.4f} ({abs(emp - theory) / se:.1f} SE)")
    verdict(3, ok, "; ".join(rows))


# --------------------------------------------------------------------------
# 4-6. coupling


def test_criterion_4_coupling_has_no_structural_violations():
    parts = []
    total = 0
    for name in COUPLING_MODELS:
        runs = coupling_runs(name)
        total += runs["violations"] + runs["aborted"]
        parts.append(f"{name} {runs['violations']} violations in {len(runs['depth'])} runs")
    verdict(4, total == 0, "; ".join(parts))


def test_criterion_5_coupled_copies_have_the_gibbs_marginals():
    worst = 1.0
    parts = []
    for name in COUPLING_MODELS:
        runs = coupling_runs(name)
        p = []
        for copy, boundary in (("1", False), ("2", True)):
            n_ref, d_ref = rejection_oracle(name, boundary)
            p.append(count_table_test(runs["n" + copy], n_ref)[1])
            a = runs["d" + copy]
            p.append(ks_two_sample(a[~np.isnan(a)], d_ref[~np.isnan(d_ref)])[1])
        alpha = dom_level(*COUPLING_MODELS[name])
        mass = interval_measure(OrderInterval(), Q01, SQUARE).value
        p.append(poisson_gof(runs["n3"], alpha * mass)[1])
        worst = min(worst, min(p))
        parts.append(f"{name} min p {min(p):.3f}")
    verdict(5, worst > 0.01, "counts, nearest distance and dominating-count tests: " + "; ".join(parts))


def test_criterion_6_recursion_depth_decays_geometrically():
    ok = True
    parts = []
    for name in COUPLING_MODELS:
        runs = coupling_runs(name)
        depth = runs["depth"]
        n = len(depth)
        alpha = dom_level(*COUPLING_MODELS[name])
        rho = 1 - math.exp(-alpha * interval_measure(OrderInterval(), Q01, SQUARE).value)
        pmin = 1.0
        for t in range(1, int(depth.max()) + 1):
            k = int(np.sum(depth >= t + 1))
            pmin = min(pmin, float(stats.binom.sf(k - 1, n, rho ** t)))
        ok &= runs["aborted"] == 0 and pmin > 0.01
        parts.append(f"{name} max depth {depth.max()}, P(depth>=2)={np.mean(depth >= 2):.3f} "
                     f"vs bound {rho:.3f}, min p {pmin:.2f}")
    verdict(6, ok, "; ".join(parts))


# --------------------------------------------------------------------------
# 7. order


def test_criterion_7_order_roundtrip_and_hyperblocks():
    rng = np.random.default_rng(707)
    bad = 0
    for W, m in itertools.product((4, 8, 16, 32), (2, 3, 4)):
        w = Window((0.0,) * (m - 1), (1.0,) * (m - 1), 1.0, W)
        c, r = from_ints(w, rng.integers(0, 2 ** W, size=(10 ** 4, m)))
        for ci, ri in zip(c.tolist(), r.tolist()):
            X = Point(tuple(ci), ri)
            bad += decode(encode(X, w), w) != X
    blocks_ok = True
    for m in (2, 3, 4):
        keys = {interleave(row, m) for row in itertools.product(range(16), repeat=m)}
        blocks_ok &= keys == set(range(16 ** m))
    for s in range(5):
        side = 2 ** s
        for a, b in itertools.product(range(0, 16, side), repeat=2):
            keys = sorted(interleave([a + i, b + j], 2) for i in range(side) for j in range(side))
            blocks_ok &= keys == list(range(keys[0], keys[0] + side * side))
            blocks_ok &= block_ranges(keys[0], 2 * s, 2) == [(a, a + side), (b, b + side)]
    verdict(7, bad == 0 and blocks_ok,
            f"{bad} roundtrip failures over 12 x 10^4 points; W=4 bijection and blocks exact: {blocks_ok}")


# --------------------------------------------------------------------------
# 8. percolation


def test_criterion_8_percolation_sweep():
    Q = RadiusLaw.delta(0.5)
    dist = [2, 4, 6, 8]
    p, se = connection_sweep([0.0, 0.4, 0.8], dist, Q, 2, 5000, np.random.default_rng(808))
    zero = bool(np.all(p[0] == 0))
    mono = bool(np.all(np.diff(p, axis=0) >= 0) and np.all(np.diff(p, axis=1) <= 0))
    fit = fit_decay(list(zip(dist, p[2], se[2])))
    rng = np.random.default_rng(809)
    ups = all(upsilon_holds(sample_poisson(Window((-4.0, -4.0), (4.0, 4.0), R, 24), 2.0,
                                           RadiusLaw.delta(R), rng), R)
              for R in (0.1, 0.5, 1.0) for _ in range(100))
    verdict(8, zero and mono and fit.r_squared > 0.9 and ups,
            f"alpha=0 row zero: {zero}; monotone: {mono}; decay fit at alpha=0.8 "
            f"kappa={fit.kappa:.3f} R^2={fit.r_squared:.4f}; radius control at k=R: {ups}")


# --------------------------------------------------------------------------
# 9. boundary influence is bounded by connection through the dominating process


def test_criterion_9_influence_bounded_by_percolation():
    box = Box((-0.1, -0.1), (0.1, 0.1))
    model = ContinuumRandomCluster(2.0)
    rows = []
    ok = True
    for lam in (0.5, 1.0, 1.5):
        for n in (0.1875, 0.3125, 0.4375):
            w = Window((-n, -n), (n, n), 0.1, 24)
            rep = boundary_influence(model, lam, box, w, EMPTY2, dense_shell(w, 0.1),
                                     count_at_least(1), 1000, Q01, seed=909)
            ok &= rep.holds
            rows.append(f"({lam}, {rep.distance:.3f}): {rep.direct_gap:.3f} <= {rep.percolation_bound:.3f}")
    scan = uniqueness_scan(model, 1.0, box, [0.1875, 0.5], count_at_least(1), 1000, Q01, seed=910)
    last = scan[-1]
    ok &= last.below_noise
    verdict(9, ok, "gap <= bound per (lambda, distance): " + ", ".join(rows)
            + f"; scan gap at n={last.n}: {last.gap:.4f} (SE {last.se:.4f})")


# --------------------------------------------------------------------------
# 10. determinism


def test_criterion_10_cli_output_is_deterministic(tmp_path):
    cfg = str(GOLDEN / "small.yaml")
    differ = []
    for command in cli.COMMANDS:
        outs = []
        for i, extra in enumerate(([], [], ["--workers", "2"])):
            path = tmp_path / f"{command}{i}.out"
            cli.main([command, "--config", cfg, "--out", str(path), *extra])
            outs.append(path.read_bytes())
        if not (outs[0] == outs[1] == outs[2]):
            differ.append(command)
    verdict(10, not differ, f"commands {', '.join(cli.COMMANDS)} byte-identical across runs and "
            f"with 2 workers" + (f"; differing: {differ}" if differ else ""))
