"""Boolean-model percolation: connection probabilities, thresholds, decay fits
and the radius-control event."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .poisson import RadiusLaw, rho_moment, sample_poisson
from .space import Configuration, Window, connected
from .stattests import binomial_se


class Estimate(NamedTuple):
    value: float
    se: float


class DecayFit(NamedTuple):
    kappa: float
    K: float
    r_squared: float
    samples: tuple  # ((distance, p, se), ...)


def connection_probability(alpha: float, Q: RadiusLaw, window: Window, source, target,
                           reps: int, rng) -> Estimate:
    """Fraction of Poisson draws in which ``source`` and ``target`` connect."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    hits = 0
    for _ in range(reps):
        omega = sample_poisson(window, alpha, Q, rng)
        hits += connected(omega, source, target)
    p = hits / reps
    return Estimate(p, binomial_se(p, reps))


def ball_window(n_max: float, Q: RadiusLaw, d: int, W: int = 24) -> Window:
    """Centered box holding every ball that can matter for reaching distance ``n_max``."""
    half = n_max + 2 * Q.r_sup
    half = math.ceil(half * 2 ** 4) / 2 ** 4  # dyadic side
    return Window((-half,) * d, (half,) * d, max(Q.r_sup, 2.0 ** -W), W)


def origin_reach(omega: Configuration) -> float:
    """Largest ``|x| + r`` over the cluster connected to the origin (0 if none)."""
    if len(omega) == 0:
        return 0.0
    norm = np.sqrt((omega.centers ** 2).sum(axis=1))
    cover = norm <= omega.radii
    if not cover.any():
        return 0.0
    labels = kernels.component_labels(omega.centers, omega.radii)
    mask = np.isin(labels, np.unique(labels[cover]))
    return float((norm + omega.radii)[mask].max())


def connection_sweep(alphas, distances, Q: RadiusLaw, d: int, reps: int, rng, W: int = 24):
    """Origin-to-``B(0, n)^c`` connection probabilities on shared draws.

    One Poisson process at the largest ``alpha`` carries uniform marks; the
    process at a smaller ``alpha`` keeps marks below ``alpha / alpha_max``.
    Connection at distance ``n`` holds iff the origin cluster reaches
    ``|x| + r >= n``, so the estimates are exactly monotone in both
    arguments.  Returns ``(p, se)`` arrays of shape (len(alphas), len(distances)).
    """
    alphas = np.asarray(alphas, dtype=float)
    dist = np.asarray(distances, dtype=float)
    window = ball_window(dist.max(), Q, d, W)
    hits = np.zeros((len(alphas), len(dist)))
    for _ in range(reps):
        hits += sweep_replicate(alphas, dist, Q, window, rng)
    p = hits / reps
    se = np.sqrt(p * (1 - p) / reps)
    return p, se


def sweep_replicate(alphas, distances, Q: RadiusLaw, window: Window, rng) -> np.ndarray:
    """Connection indicators of one shared draw, shape (len(alphas), len(distances))."""
    alphas = np.asarray(alphas, dtype=float)
    dist = np.asarray(distances, dtype=float)
    a_max = alphas.max()
    out = np.zeros((len(alphas), len(dist)), dtype=bool)
    if a_max <= 0:
        return out
    omega = sample_poisson(window, a_max, Q, rng)
    marks = rng.random(len(omega))
    for i, a in enumerate(alphas):
        out[i] = origin_reach(omega.restrict(marks < a / a_max)) >= dist
    return out


def fit_decay(table) -> DecayFit:
    """Weighted least squares of ``log p = log K - kappa * distance``.

    Weights are ``(p / se)**2``, the inverse delta-method variance of
    ``log p``; with zero standard errors the fit is unweighted.
    """
    rows = sorted((float(a), float(b), float(c)) for a, b, c in table)
    if len(rows) < 4:
        raise ValueError("need at least 4 distances")
    x = np.array([r[0] for r in rows])
    p = np.array([r[1] for r in rows])
    se = np.array([r[2] for r in rows])
    if np.any(np.diff(x) <= 0):
        raise ValueError("distances must be distinct")
    if np.any(p <= 0):
        raise ValueError("probabilities must be positive")
    y = np.log(p)
    w = (p / se) ** 2 if np.all(se > 0) else np.ones_like(p)
    A = np.column_stack([np.ones_like(x), -x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
    resid = y - A @ coef
    ybar = np.sum(w * y) / np.sum(w)
    ss_res = float(np.sum(w * resid ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-20 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return DecayFit(float(coef[1]), float(math.exp(coef[0])), r2, tuple(rows))


# --------------------------------------------------------------------------
# threshold by box crossing


class ThresholdEstimate(NamedTuple):
    alpha_c: float
    ci_low: float
    ci_high: float
    crossed: bool
    sizes: tuple
    pairwise: tuple


def critical_alphas(size: float, Q: RadiusLaw, d: int, alpha_max: float, reps: int, rng,
                    W: int = 24) -> np.ndarray:
    """Per-sample smallest ``alpha`` at which a cluster joins the faces
    ``x0 = 0`` and ``x0 = size`` of the box ``[0, size)^d`` (``inf`` if none
    up to ``alpha_max``)."""
    window = box_window(size, Q, d, W)
    return np.array([critical_alpha_one(window, Q, alpha_max, rng) for _ in range(reps)])


def box_window(size: float, Q: RadiusLaw, d: int, W: int = 24) -> Window:
    return Window((0.0,) * d, (float(size),) * d, max(Q.r_sup, 2.0 ** -W), W)


def critical_alpha_one(window: Window, Q: RadiusLaw, alpha_max: float, rng) -> float:
    """Critical crossing intensity of one shared draw (``inf`` if no crossing)."""
    omega = sample_poisson(window, alpha_max, Q, rng)
    if len(omega) == 0:
        return math.inf
    marks = rng.random(len(omega))
    order = np.argsort(marks, kind="stable")
    pos = kernels.first_spanning(omega.centers, omega.radii, order, window.lo[0], window.hi[0])
    return alpha_max * marks[order[pos]] if pos >= 0 else math.inf


def _cdf(samples, grid):
    s = np.sort(samples)
    return np.searchsorted(s, grid, side="right") / len(s)


def _crossing(a, b, grid):
    """First grid point where the larger box's crossing curve overtakes the smaller's."""
    diff = _cdf(b, grid) - _cdf(a, grid)
    # below threshold the larger box crosses less often, above it more often
    lo_ok = diff < 0
    for i in range(1, len(grid)):
        if lo_ok[i - 1] and diff[i] >= 0:
            d0, d1 = diff[i - 1], diff[i]
            t = d0 / (d0 - d1) if d1 != d0 else 0.5
            return grid[i - 1] + t * (grid[i] - grid[i - 1])
    return math.nan


def estimate_threshold(d: int, Q: RadiusLaw, sizes, reps: int, rng, alpha_max: float | None = None,
                       n_boot: int = 200, grid_points: int = 400) -> ThresholdEstimate:
    """Percolation threshold from crossing curves of nested boxes.

    For each box size the left-right crossing probability is a function of
    ``alpha``; curves of consecutive sizes cross near the threshold.  The
    estimate averages the pairwise crossing points; the interval is a
    bootstrap percentile interval over the per-sample critical intensities.
    """
    if d < 2:
        raise ValueError("no finite threshold is estimated in dimension one")
    if alpha_max is None:
        alpha_max = default_alpha_max(Q, d)
    sizes = tuple(sorted(float(s) for s in sizes))
    if len(sizes) < 2:
        raise ValueError("need at least two box sizes")
    crit = [critical_alphas(s, Q, d, alpha_max, reps, rng) for s in sizes]
    return threshold_from_samples(sizes, crit, alpha_max, rng, n_boot, grid_points)


def default_alpha_max(Q: RadiusLaw, d: int) -> float:
    """Intensity at which the mean covered volume per unit volume is 4."""
    vd = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return 4.0 / (vd * rho_moment(Q, d))


def threshold_from_samples(sizes, crit, alpha_max: float, rng, n_boot: int = 200,
                           grid_points: int = 400) -> ThresholdEstimate:
    """Crossing-point estimate and bootstrap interval from per-sample critical intensities."""
    sizes = tuple(float(s) for s in sizes)
    grid = np.linspace(0, alpha_max, grid_points)

    def estimate(samples):
        pts = [_crossing(samples[i], samples[i + 1], grid) for i in range(len(samples) - 1)]
        good = [p for p in pts if math.isfinite(p)]
        return (float(np.mean(good)) if good else math.nan), tuple(pts)

    alpha_c, pairwise = estimate(crit)
    boots = []
    for _ in range(n_boot):
        resampled = [c[rng.integers(0, len(c), len(c))] for c in crit]
        val, _ = estimate(resampled)
        if math.isfinite(val):
            boots.append(val)
    lo, hi = (np.percentile(boots, [2.5, 97.5]) if boots else (math.nan, math.nan))
    return ThresholdEstimate(alpha_c, float(lo), float(hi), math.isfinite(alpha_c), sizes, pairwise)


# --------------------------------------------------------------------------
# radius control


def upsilon_holds(omega: Configuration, k: float) -> bool:
    """Every ball satisfies ``r <= |x| / 2 + k``."""
    if len(omega) == 0:
        return True
    norm = np.sqrt((omega.centers ** 2).sum(axis=1))
    return bool(np.all(omega.radii <= norm / 2 + k))


def upsilon_level(omega: Configuration) -> float:
    """Smallest ``k >= 0`` for which the radius-control event holds."""
    if len(omega) == 0:
        return 0.0
    norm = np.sqrt((omega.centers ** 2).sum(axis=1))
    return float(max(0.0, np.max(omega.radii - norm / 2)))


class KEstimate(NamedTuple):
    k: float
    p_hat: float
    se: float


def find_k(alpha: float, Q: RadiusLaw, window: Window, eps: float, reps: int, rng,
           k_max: float = math.inf) -> KEstimate:
    """Smallest ``k`` with empirical probability of the radius-control event ``>= 1 - eps``.

    The event is monotone in ``k``, so the answer is an order statistic of
    the per-sample levels.
    """
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    levels = np.sort([upsilon_level(sample_poisson(window, alpha, Q, rng)) for _ in range(reps)])
    need = math.ceil((1 - eps) * reps - 1e-12)
    k = 0.0 if need <= 0 else float(levels[need - 1])
    if k > k_max:
        raise ValueError(f"required k={k} exceeds k_max={k_max}")
    p = float(np.mean(levels <= k))
    return KEstimate(k, p, binomial_se(p, reps))
