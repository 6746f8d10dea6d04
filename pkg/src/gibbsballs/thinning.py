"""Sequential dependent thinning of a Poisson process of balls to a Gibbs law.

Poisson points at the dominating intensity ``alpha`` are visited in key
order.  A point ``X`` is kept with probability

    p(X | kept) = (lam/alpha) exp(-H_X(X | gamma + kept))
                  * Z(]X, end[, gamma + kept + X) / Z([X, end[, gamma + kept).

By additivity of the energy this equals ``(lam/alpha)`` times the mean of
``exp(-H_X(X | gamma + kept + xi))`` for ``xi`` drawn from the Gibbs law on
``]X, end[`` with boundary ``gamma + kept``.  The default decision rule uses
that form: it draws one such ``xi`` exactly (rejection sampling) and keeps
``X`` when a uniform falls below ``(lam/alpha) exp(-H_X)``.  The decision is
then Bernoulli with exactly the right probability, so the thinning adds no
estimator bias.  The partition-function ratio is available as an
alternative rule for diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .models import HamiltonianModel, HardSphere, NoInteraction, dom_level
from .order import OrderInterval, encode, encode_config
from .partition import gibbs_rejection_sample, z_bruteforce, z_exact_1d
from .poisson import RadiusLaw, sample_poisson_on
from .space import Configuration, Point, Window

METHODS = ("factory", "zratio", "mc", "exact1d")


class ProbEstimate(NamedTuple):
    value: float
    error: float = 0.0


@dataclass
class ThinningKernel:
    """Everything needed to thin Poisson(alpha) on ``domain`` to the Gibbs law.

    ``method`` selects how keep decisions are made: ``"factory"`` (exact
    Bernoulli decision from one auxiliary Gibbs draw, the default),
    ``"zratio"`` (partition-function ratio from series estimates, with error
    propagation and clamping), ``"mc"`` (averaged auxiliary draws) or
    ``"exact1d"`` (deterministic rods in one dimension).
    """

    model: HamiltonianModel
    lam: float
    Q: RadiusLaw
    window: Window
    domain: OrderInterval = field(default_factory=OrderInterval)
    gamma: Configuration | None = None
    alpha: float | None = None
    method: str = "factory"
    z_budget: int = 400
    mc_draws: int = 2000
    clamp_tol: float = 0.05
    bias_budget: float = 0.05

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = Configuration.empty(self.window.d)
        floor = dom_level(self.model, self.lam)
        if self.alpha is None:
            self.alpha = floor
        elif self.alpha < floor * (1 - 1e-12):
            raise ValueError(f"alpha={self.alpha} below the dominating level {floor}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.gamma) and self.domain.mask_config(self.window, self.gamma).any() \
                and self.domain.region is None:
            raise ValueError("boundary configuration overlaps the thinning domain")

    @property
    def ratio(self) -> float:
        return self.lam / self.alpha if self.alpha > 0 else 0.0

    def after(self, key: int) -> OrderInterval:
        """``]X, end[`` within the domain for ``X`` with the given key."""
        return OrderInterval(max(self.domain.lo, key + 1), self.domain.hi, self.domain.region)

    def from_(self, key: int) -> OrderInterval:
        return OrderInterval(max(self.domain.lo, key), self.domain.hi, self.domain.region)


def _pt(c, r) -> Point:
    return Point(tuple(c), r)


def _blocked(kernel: ThinningKernel, X: Point, context: Configuration) -> bool:
    """Cheap exact zero: a hard-sphere point touching the context."""
    if not isinstance(kernel.model, HardSphere) or len(context) == 0:
        return False
    return bool(kernel.model.local_energy(X, context) == math.inf)


def _weight(kernel, X, context) -> float:
    e = kernel.model.local_energy(X, context)
    return 0.0 if e == math.inf else math.exp(-e)


def _aux_draw(kernel: ThinningKernel, key: int, context: Configuration, rng) -> Configuration:
    return gibbs_rejection_sample(kernel.lam, kernel.after(key), context, kernel.model,
                                  kernel.window, kernel.Q, rng, kernel.alpha)


def _exact1d_domain(kernel: ThinningKernel, key: int) -> tuple[float, float]:
    """Spatial interval of ``[X, end[`` for equal-radius rods in one dimension."""
    w = kernel.window
    if w.d != 1 or kernel.Q.kind != "delta" or kernel.domain.region is not None \
            or kernel.domain.hi is not None:
        raise ValueError("exact1d needs d = 1, a delta radius law and an unrestricted tail domain")
    lo = from_key_position(w, kernel.Q.params["R"], max(key, kernel.domain.lo))
    return lo, w.hi[0]


def from_key_position(window: Window, R: float, key: int) -> float:
    """Smallest grid position ``x`` whose rod of radius ``R`` has key ``>= key``."""
    from .order import interleave

    r_int = int(math.floor(R * 2.0 ** window.W))
    lo, hi = 0, window.int_sides[0]
    if interleave([hi - 1, r_int], 2) < key:
        return window.hi[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if interleave([mid, r_int], 2) >= key:
            hi = mid
        else:
            lo = mid + 1
    return window.lo[0] + lo / 2.0 ** window.W


def single_point_prob(kernel: ThinningKernel, X: Point, kept: Configuration, rng=None) -> ProbEstimate:
    """Keep probability of ``X`` given the points already kept before it."""
    if kernel.alpha == 0 or kernel.lam == 0:
        return ProbEstimate(0.0)
    if isinstance(kernel.model, NoInteraction):
        return ProbEstimate(kernel.ratio)
    context = kernel.gamma.union(kept)
    w0 = _weight(kernel, X, context)
    if w0 == 0.0:
        return ProbEstimate(0.0)
    key = encode(X, kernel.window)
    if kernel.method == "exact1d":
        a, b = _exact1d_domain(kernel, key)
        R = kernel.Q.params["R"]
        a_after = from_key_position(kernel.window, R, key + 1)
        num = z_exact_1d(kernel.lam, a_after, b, R, kernel.model, context.with_point(X))
        den = z_exact_1d(kernel.lam, a, b, R, kernel.model, context)
        p = kernel.ratio * w0 * num.value / den.value
        return ProbEstimate(p, p * (num.truncation_error / num.value + den.truncation_error / den.value))
    if rng is None:
        raise ValueError("a random generator is required for estimated probabilities")
    if kernel.method == "zratio":
        return _zratio(kernel, X, key, context, w0, rng)
    # averaged auxiliary draws
    vals = np.array([_weight(kernel, X, context.union(_aux_draw(kernel, key, context, rng)))
                     for _ in range(kernel.mc_draws)])
    p = kernel.ratio * vals.mean()
    return ProbEstimate(p, kernel.ratio * vals.std(ddof=1) / math.sqrt(len(vals)))


def _zratio(kernel, X, key, context, w0, rng) -> ProbEstimate:
    num = z_bruteforce(kernel.lam, kernel.after(key), context.with_point(X), kernel.model,
                       kernel.window, kernel.Q, rng, quad_budget=kernel.z_budget, alpha=kernel.alpha)
    den = z_bruteforce(kernel.lam, kernel.from_(key), context, kernel.model,
                       kernel.window, kernel.Q, rng, quad_budget=kernel.z_budget, alpha=kernel.alpha)
    if den.value <= den.error:
        raise RuntimeError("partition-function denominator not resolved by its error bound")
    p = kernel.ratio * w0 * num.value / den.value
    err = p * (num.error / num.value + den.error / den.value)
    if p > 1.0:
        if p - 1.0 > max(err, kernel.clamp_tol):
            raise RuntimeError(f"keep probability {p} exceeds 1 beyond its error {err}")
        p = 1.0
    return ProbEstimate(p, err)


def joint_thin_logdensity(kernel: ThinningKernel, kept: Configuration, full: Configuration,
                          rng=None) -> float:
    """Log-probability that thinning ``full`` keeps exactly ``kept``."""
    if not kept.issubset(full):
        return -math.inf
    if len(full) == 0:
        return 0.0
    keys = encode_config(full, kernel.window)
    kept_set = kept.as_set()
    so_far = Configuration.empty(kernel.window.d)
    total = 0.0
    for i in sorted(range(len(keys)), key=keys.__getitem__):
        X = _pt(full.centers[i], full.radii[i])
        p = single_point_prob(kernel, X, so_far, rng).value
        if X.as_tuple() in kept_set:
            if p <= 0:
                return -math.inf
            total += math.log(p)
            so_far = so_far.with_point(X)
        else:
            if p >= 1:
                return -math.inf
            total += math.log1p(-p)
    return total


class ThinInfo(NamedTuple):
    visited: int
    bias: float
    flagged: bool


def thin_points(kernel: ThinningKernel, poisson: Configuration, rng, keys=None,
                stop_key: int | None = None, aux_rng=None):
    """Thin a given Poisson configuration; returns ``(kept_mask, info)``.

    Points are visited in key order.  With ``stop_key`` the pass ends after
    the last point whose key is ``<= stop_key``; later points stay undecided
    (``False``) and are not counted as visited.
    """
    n = len(poisson)
    keep = np.zeros(n, dtype=bool)
    if n == 0:
        return keep, ThinInfo(0, 0.0, False)
    aux_rng = rng if aux_rng is None else aux_rng
    keys = encode_config(poisson, kernel.window) if keys is None else keys
    order = sorted(range(n), key=keys.__getitem__)
    context = kernel.gamma
    kept = Configuration.empty(kernel.window.d)
    trivial = isinstance(kernel.model, NoInteraction)
    bias = 0.0
    visited = 0
    for i in order:
        if stop_key is not None and keys[i] > stop_key:
            break
        visited += 1
        X = _pt(poisson.centers[i], poisson.radii[i])
        u = rng.random()
        if trivial:
            keep[i] = u < kernel.ratio
        elif kernel.method == "factory":
            if _blocked(kernel, X, context):
                continue
            xi = _aux_draw(kernel, keys[i], context, aux_rng)
            keep[i] = u < kernel.ratio * _weight(kernel, X, context.union(xi))
        else:
            est = single_point_prob(kernel, X, kept, aux_rng)
            bias += est.error
            keep[i] = u < est.value
        if keep[i]:
            context = context.with_point(X)
            kept = kept.with_point(X)
    return keep, ThinInfo(visited, bias, bias > kernel.bias_budget)


def thin_sample(kernel: ThinningKernel, rng, info: dict | None = None):
    """Draw Poisson(alpha) on the kernel's domain and thin it.

    Returns ``(kept, poisson)`` with ``kept`` a subset of ``poisson``.  When
    ``info`` is a dict it receives the visit count and the accumulated
    probability-error budget (always zero for the exact default rule).
    """
    poisson = sample_poisson_on(kernel.window, kernel.alpha, kernel.Q, kernel.domain, rng)
    keep, meta = thin_points(kernel, poisson, rng)
    if info is not None:
        info.update(meta._asdict())
    return poisson.restrict(keep), poisson
