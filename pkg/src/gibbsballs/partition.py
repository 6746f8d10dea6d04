"""Partition functions and an exact rejection sampler for the Gibbs law.

These are the reference oracles: ``gibbs_rejection_sample`` draws exactly
from the Gibbs law on an order interval, ``z_bruteforce`` and
``z_acceptance`` estimate the partition function two independent ways, and
``z_exact_1d`` solves one-dimensional rod systems deterministically.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.integrate import solve_ivp

from .models import ContinuumRandomCluster, HamiltonianModel, HardSphere, NoInteraction, dom_level
from .order import OrderInterval, interval_measure, sample_in_interval, _blocks_with_mass
from .poisson import RadiusLaw, sample_poisson_on
from .space import Configuration, Region, Window
from .stattests import count_table_test


class ZEstimate(NamedTuple):
    value: float
    truncation_error: float
    mc_error: float
    n_max: int

    @property
    def error(self) -> float:
        return self.truncation_error + self.mc_error


def _alpha(model, lam, alpha):
    a = dom_level(model, lam) if alpha is None else float(alpha)
    if a < dom_level(model, lam) * (1 - 1e-12):
        raise ValueError(f"alpha={a} does not dominate the model at activity {lam}")
    return a


def acceptance_ratio(model, lam, alpha, omega, gamma) -> float:
    """``(lam/alpha)**n * exp(-H(omega|gamma))`` of one proposal."""
    e = model.energy(omega, gamma)
    if e == math.inf:
        return 0.0
    n = len(omega)
    if n == 0:
        return 1.0
    if lam == 0:
        return 0.0
    return math.exp(n * math.log(lam / alpha) - e)


def gibbs_rejection_sample(lam: float, D: OrderInterval, gamma: Configuration,
                           model: HamiltonianModel, window: Window, Q: RadiusLaw, rng,
                           alpha: float | None = None, max_tries: int = 10 ** 7,
                           return_tries: bool = False):
    """Exact draw from the Gibbs law on ``D`` with boundary ``gamma``.

    Proposals are Poisson at the dominating intensity ``alpha`` and are
    accepted with probability ``(lam/alpha)**n * exp(-H)``.
    """
    alpha = _alpha(model, lam, alpha)
    gamma = gamma if gamma is not None else Configuration.empty(window.d)
    for tries in range(1, max_tries + 1):
        omega = sample_poisson_on(window, alpha, Q, D, rng)
        ratio = acceptance_ratio(model, lam, alpha, omega, gamma)
        if ratio > 1 + 1e-9:
            raise RuntimeError(f"acceptance ratio {ratio} > 1: domination violated")
        if rng.random() < ratio:
            return (omega, tries) if return_tries else omega
    raise RuntimeError(f"no acceptance within {max_tries} proposals")


def default_n_max(mass: float, alpha: float, lam: float, tol: float = 1e-6) -> int:
    n = 0
    while _tail_bound(mass, alpha, lam, n) > tol:
        n += 1
    return n


def _tail_bound(mass, alpha, lam, n_max):
    # e^{-lam M} sum_{n > n_max} (alpha M)^n / n!
    return math.exp((alpha - lam) * mass) * float(stats.poisson.sf(n_max, alpha * mass))


def z_bruteforce(lam: float, D: OrderInterval, gamma: Configuration, model: HamiltonianModel,
                 window: Window, Q: RadiusLaw, rng, n_max: int | None = None,
                 quad_budget: int = 2000, alpha: float | None = None,
                 region_budget: int = 20000) -> ZEstimate:
    """Series estimate of the partition function.

    The ``n``-point term is averaged over ``quad_budget`` i.i.d. tuples drawn
    from ``Q*`` on the key interval, with the region indicator inside the
    integrand.  The truncation error bounds the omitted terms by the
    dominating Poisson tail.
    """
    alpha = _alpha(model, lam, alpha)
    gamma = gamma if gamma is not None else Configuration.empty(window.d)
    key_iv = OrderInterval(D.lo, D.hi)
    M = interval_measure(key_iv, Q, window).value
    if D.region is None:
        MR, MR_se = M, 0.0
    else:
        MR, MR_se = interval_measure(D, Q, window, budget=region_budget, rng=rng)
    if n_max is None:
        n_max = default_n_max(MR, alpha, lam)
    if isinstance(model, NoInteraction) or M == 0.0 or lam == 0.0:
        return ZEstimate(1.0, 0.0, 0.0, n_max)
    blocks = _blocks_with_mass(key_iv, Q, window)
    total, var = 1.0, 0.0
    for n in range(1, n_max + 1):
        vals = np.empty(quad_budget)
        for t in range(quad_budget):
            c, r = sample_in_interval(key_iv, Q, window, n, rng, blocks)
            if D.region is not None and not D.region.mask(c, r).all():
                vals[t] = 0.0
                continue
            e = model.energy(Configuration(c, r, d=window.d), gamma)
            vals[t] = 0.0 if e == math.inf else math.exp(-e)
        w = (lam * M) ** n / math.factorial(n)
        total += w * vals.mean()
        var += w * w * vals.var(ddof=1) / quad_budget if quad_budget > 1 else 0.0
    pref = math.exp(-lam * MR)
    value = pref * total
    mc = math.sqrt(pref * pref * var + (lam * value * MR_se) ** 2)
    return ZEstimate(float(value), float(_tail_bound(MR, alpha, lam, n_max)), float(mc), n_max)


def z_acceptance(lam: float, D: OrderInterval, gamma: Configuration, model: HamiltonianModel,
                 window: Window, Q: RadiusLaw, rng, proposals: int = 20000,
                 alpha: float | None = None, region_budget: int = 20000) -> ZEstimate:
    """Partition function from the rejection sampler's acceptance rate.

    The mean acceptance probability equals ``Z * exp((lam - alpha) Q*(D))``.
    """
    alpha = _alpha(model, lam, alpha)
    gamma = gamma if gamma is not None else Configuration.empty(window.d)
    if D.region is None:
        MR, MR_se = interval_measure(D, Q, window).value, 0.0
    else:
        MR, MR_se = interval_measure(D, Q, window, budget=region_budget, rng=rng)
    ratios = np.array([acceptance_ratio(model, lam, alpha, sample_poisson_on(window, alpha, Q, D, rng), gamma)
                       for _ in range(proposals)])
    scale = math.exp((alpha - lam) * MR)
    value = scale * ratios.mean()
    se = math.sqrt((scale * ratios.std(ddof=1)) ** 2 / proposals + ((alpha - lam) * value * MR_se) ** 2)
    return ZEstimate(float(value), 0.0, float(se), 0)


# --------------------------------------------------------------------------
# exact one-dimensional rods


def _boundary_1d(boundary, a, b, R):
    left, right = -math.inf, math.inf
    if boundary is not None and len(boundary):
        if not np.allclose(boundary.radii, R):
            raise ValueError("boundary rods must share the radius R")
        x = boundary.centers[:, 0]
        if np.any((x >= a) & (x < b)):
            raise ValueError("boundary rods must lie outside [a, b)")
        if np.any(x < a):
            left = float(x[x < a].max())
        if np.any(x >= b):
            right = float(x[x >= b].min())
    return left, right


def z_exact_1d(lam: float, a: float, b: float, R: float, model: HamiltonianModel,
               boundary: Configuration | None = None, rtol: float = 1e-12) -> ZEstimate:
    """Partition function of rods of half-length ``R`` with centers in ``[a, b)``.

    Supports hard rods, the continuum random cluster model and the
    non-interacting case.  Only the nearest boundary rod on each side
    matters in one dimension.  With ``I(s)`` the integral over ``[s, b]`` of
    the weight of configurations whose leftmost rod sits at ``s`` (boundary
    factor on the left excluded), ``I`` solves a linear delay equation that
    is integrated backwards from ``b`` segment by segment.
    """
    if not b > a:
        return ZEstimate(1.0, 0.0, 0.0, 0)
    if isinstance(model, NoInteraction) or lam == 0:
        return ZEstimate(1.0, 0.0, 0.0, 0)
    l, r = _boundary_1d(boundary, a, b, R)
    two = 2 * R
    if isinstance(model, HardSphere):
        c, w0, w1 = 1.0, 0.0, 1.0
        fl_near, fl_far, fr_near, fr_far = 0.0, 1.0, 0.0, 1.0
    elif isinstance(model, ContinuumRandomCluster):
        q = model.q
        if r - l <= two:
            return ZEstimate(1.0, 0.0, 0.0, 0)
        c, w0, w1 = q, 1.0, q
        fl_near, fl_far, fr_near, fr_far = 1 / q, 1.0, 1 / q, 1.0
    else:
        raise ValueError(f"no exact 1-D solver for {model!r}")

    def f_right(s):
        return fr_near if r - s <= two else fr_far

    # breakpoints: every 2R from b, and the jump of the right boundary factor
    cuts = {a, b}
    k = 1
    while b - k * two > a:
        cuts.add(b - k * two)
        k += 1
    if math.isfinite(r):
        s = r - two
        while s > a:
            if s < b:
                cuts.add(s)
            s -= two
    cuts = sorted(cuts, reverse=True)
    pieces = []  # (lo, hi, dense solution)

    def I_at(y):
        if y >= b:
            return 0.0
        slack = 1e-12 * max(1.0, abs(b))
        for lo, hi, sol in pieces:
            if lo - slack <= y <= hi + slack:
                return float(sol(min(max(y, lo), hi))[0])
        raise RuntimeError("delay argument outside the solved range")

    value = 0.0
    for hi, lo in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        frs = f_right(mid)

        def rhs(s, y, frs=frs):
            return [-frs - lam * (w0 * y[0] + (w1 - w0) * I_at(s + two))]

        sol = solve_ivp(rhs, (hi, lo), [value], method="DOP853", rtol=rtol, atol=rtol * 1e-3,
                        dense_output=True)
        if not sol.success:
            raise RuntimeError(sol.message)
        value = float(sol.y[0, -1])
        pieces.append((lo, hi, sol.sol))
    m = min(max(l + two, a), b)
    integral = fl_near * (I_at(a) - I_at(m)) + fl_far * I_at(m)
    Z = math.exp(-lam * (b - a)) * (1 + c * lam * integral)
    return ZEstimate(float(Z), float(1e3 * rtol * Z), 0.0, 0)


def z_tonks(lam: float, length: float, R: float, n_terms: int | None = None) -> float:
    """Hard-rod partition function on an interval with free ends, by direct series."""
    total = 0.0
    n = 0
    while True:
        free = length - (n - 1) * 2 * R if n else length
        if n and free <= 0:
            break
        total += lam ** n * max(free, 0.0) ** n / math.factorial(n) if n else 1.0
        n += 1
        if n_terms is not None and n > n_terms:
            break
    return math.exp(-lam * length) * total


# --------------------------------------------------------------------------
# DLR self-consistency


def dlr_check(lam: float, window: Window, sub_region: Region, model: HamiltonianModel,
              Q: RadiusLaw, reps: int, rng, alpha: float | None = None) -> dict:
    """Compare the inside part of whole-domain samples with a re-draw of the
    inside given the outside part as boundary.

    Both the point count and the number of Gilbert components inside are
    compared with chi-square homogeneity tests.
    """
    from .models import n_components

    full = OrderInterval()
    inner = OrderInterval(region=sub_region)
    counts_a, counts_b, comps_a, comps_b = [], [], [], []
    for _ in range(reps):
        xi = gibbs_rejection_sample(lam, full, None, model, window, Q, rng, alpha)
        inside = sub_region.mask_config(xi)
        xin, xout = xi.restrict(inside), xi.restrict(~inside)
        redraw = gibbs_rejection_sample(lam, inner, xout, model, window, Q, rng, alpha)
        counts_a.append(len(xin))
        counts_b.append(len(redraw))
        comps_a.append(n_components(xin))
        comps_b.append(n_components(redraw))
    _, p_count, _ = count_table_test(counts_a, counts_b)
    _, p_comp, _ = count_table_test(comps_a, comps_b)
    return {"reps": reps, "p_count": p_count, "p_components": p_comp,
            "mean_inside": float(np.mean(counts_a)), "mean_redraw": float(np.mean(counts_b)),
            "passed": bool(min(p_count, p_comp) > 0.01)}
