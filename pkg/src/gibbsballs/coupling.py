"""Disagreement coupling of two Gibbs processes with different boundaries.

One dominating Poisson process is thinned twice, once per boundary.  The
construction works in layers.  Layer ``t`` has a remaining domain ``D_t``
(the window minus every ball that touches a blocker) and a set of new
boundary balls ``N_t`` (the two boundaries at layer 0, afterwards the points
kept in the previous layer).  The influence zone ``G_t`` is the part of
``D_t`` touching ``N_t``.  Both copies are thinned over all of ``D_t`` with
their cumulative boundaries and only the part inside ``G_t`` is retained;
the rest of ``D_t`` is redrawn in the next layer.  When the zone is empty the
remaining domain is thinned once with an empty boundary and the result is
shared by both copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .models import HamiltonianModel
from .order import OrderInterval, encode_config
from .poisson import RadiusLaw, sample_poisson_on
from .rng import stream
from .space import Configuration, Remainder, Window, connected
from .thinning import ThinningKernel, thin_points


@dataclass(frozen=True)
class Layer:
    index: int
    kind: str  # "zone" or "agree"
    n_new_boundary: int
    poisson: Configuration
    kept1: Configuration
    kept2: Configuration

    def summary(self) -> dict:
        return {"index": self.index, "kind": self.kind, "new_boundary": self.n_new_boundary,
                "poisson": len(self.poisson), "kept1": len(self.kept1), "kept2": len(self.kept2)}


@dataclass(frozen=True)
class CouplingSample:
    xi1: Configuration
    xi2: Configuration
    xi3: Configuration
    layers: tuple = field(default_factory=tuple)
    gamma1: Configuration | None = None
    gamma2: Configuration | None = None

    @property
    def depth(self) -> int:
        """Number of influence-zone layers."""
        return sum(1 for layer in self.layers if layer.kind == "zone")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def disagreement(self) -> Configuration:
        return self.xi1.symmetric_difference(self.xi2)


class DepthCapExceeded(RuntimeError):
    def __init__(self, cap, layers):
        super().__init__(f"recursion exceeded depth cap {cap}")
        self.cap = cap
        self.layers = layers

    def trace(self) -> list[dict]:
        return [layer.summary() for layer in self.layers]


def _dedupe_union(a: Configuration, b: Configuration) -> Configuration:
    return a.union(b.minus(a)) if len(b) else a


def zone_empty(window: Window, new: Configuration, r_sup: float) -> bool:
    """Conservative test that no ball of the domain can touch ``new``."""
    if len(new) == 0:
        return True
    gap = window.box_distance(new.centers)
    return bool(np.all(gap > new.radii + r_sup))


def _domain(window: Window, blockers: Configuration) -> OrderInterval:
    if len(blockers) == 0:
        return OrderInterval()
    return OrderInterval(region=Remainder(window, blockers))


def _touching(omega: Configuration, other: Configuration) -> np.ndarray:
    if len(omega) == 0 or len(other) == 0:
        return np.zeros(len(omega), dtype=bool)
    return kernels.touch_any(omega.centers, omega.radii, other.centers, other.radii)


def thin2_sample(model: HamiltonianModel, lam: float, alpha: float | None, Q: RadiusLaw,
                 window: Window, domain: OrderInterval, gamma1: Configuration,
                 gamma2: Configuration, rng, shared: bool = False):
    """One Poisson draw on ``domain`` thinned separately for each boundary.

    The two thinnings use independent random streams unless ``shared``.
    Returns ``(omega1, omega2, omega3)``.
    """
    k1 = ThinningKernel(model, lam, Q, window, domain, gamma1, alpha)
    k2 = ThinningKernel(model, lam, Q, window, domain, gamma2, alpha)
    omega3 = sample_poisson_on(window, k1.alpha, Q, domain, rng)
    s1, s2 = (int(s) for s in rng.integers(0, 2 ** 63, size=2))
    if shared:
        s2 = s1
    keys = encode_config(omega3, window)
    keep1, _ = thin_points(k1, omega3, np.random.default_rng(s1), keys)
    keep2, _ = thin_points(k2, omega3, np.random.default_rng(s2), keys)
    return omega3.restrict(keep1), omega3.restrict(keep2), omega3


def disagreement_sample(model: HamiltonianModel, lam: float, alpha: float | None, Q: RadiusLaw,
                        window: Window, gamma1: Configuration, gamma2: Configuration,
                        seed: int = 0, replicate: int = 0, depth_cap: int = 10 ** 4,
                        shared: bool = False, swap: bool = False) -> CouplingSample:
    """Draw one disagreement-coupled triple.

    Randomness for layer ``t`` comes from the streams
    ``(seed, replicate, t, role)`` with roles poisson, thin1 and thin2, so a
    sample is a deterministic function of its inputs.  ``shared`` makes both
    copies use the thin1 stream; ``swap`` exchanges the two thinning streams.
    """
    d = window.d
    empty = Configuration.empty(d)
    gamma1 = empty if gamma1 is None else gamma1
    gamma2 = empty if gamma2 is None else gamma2
    r_sup = Q.r_sup
    roles = ("thin1", "thin1") if shared else (("thin2", "thin1") if swap else ("thin1", "thin2"))

    blockers = empty
    new = _dedupe_union(gamma1, gamma2)
    g1, g2 = gamma1, gamma2
    xi1, xi2, xi3 = empty, empty, empty
    layers = []
    t = 0
    while True:
        domain = _domain(window, blockers)
        rng_p = stream(seed, replicate, t, "poisson")
        if zone_empty(window, new, r_sup):
            kernel = ThinningKernel(model, lam, Q, window, domain, empty, alpha)
            poisson = sample_poisson_on(window, kernel.alpha, Q, domain, rng_p)
            keep, _ = thin_points(kernel, poisson, stream(seed, replicate, t, roles[0]))
            kept = poisson.restrict(keep)
            layers.append(Layer(t, "agree", len(new), poisson, kept, kept))
            xi1, xi2, xi3 = xi1.union(kept), xi2.union(kept), xi3.union(poisson)
            break
        if t >= depth_cap:
            raise DepthCapExceeded(depth_cap, layers)
        k1 = ThinningKernel(model, lam, Q, window, domain, g1, alpha)
        k2 = ThinningKernel(model, lam, Q, window, domain, g2, alpha)
        poisson = sample_poisson_on(window, k1.alpha, Q, domain, rng_p)
        in_zone = _touching(poisson, new)
        if in_zone.any():
            keys = encode_config(poisson, window)
            stop = max(k for k, z in zip(keys, in_zone) if z)
            keep1, _ = thin_points(k1, poisson, stream(seed, replicate, t, roles[0]), keys, stop)
            keep2, _ = thin_points(k2, poisson, stream(seed, replicate, t, roles[1]), keys, stop)
            kept1 = poisson.restrict(keep1 & in_zone)
            kept2 = poisson.restrict(keep2 & in_zone)
        else:
            kept1 = kept2 = empty
        zone_pts = poisson.restrict(in_zone)
        layers.append(Layer(t, "zone", len(new), zone_pts, kept1, kept2))
        xi1, xi2, xi3 = xi1.union(kept1), xi2.union(kept2), xi3.union(zone_pts)
        g1, g2 = g1.union(kept1), g2.union(kept2)
        blockers = blockers.union(new)
        new = _dedupe_union(kept1, kept2)
        t += 1
    return CouplingSample(xi1, xi2, xi3, tuple(layers), gamma1, gamma2)


def verify_disagreement(sample: CouplingSample) -> dict:
    """Exact per-sample checks of the subset and boundary-connection properties.

    Violations are listed, never raised.
    """
    violations = []
    for name, xi in (("xi1", sample.xi1), ("xi2", sample.xi2)):
        if not xi.issubset(sample.xi3):
            for X in xi.minus(sample.xi3):
                violations.append({"property": "subset", "copy": name, "point": list(X.as_tuple())})
    d = sample.xi3.d
    boundary = _dedupe_union(sample.gamma1 if sample.gamma1 is not None else Configuration.empty(d),
                             sample.gamma2 if sample.gamma2 is not None else Configuration.empty(d))
    for X in sample.disagreement:
        if not connected(sample.xi3, X, boundary):
            violations.append({"property": "boundary_connection", "point": list(X.as_tuple())})
    return {"passed": not violations, "violations": violations,
            "n_disagreement": len(sample.disagreement), "depth": sample.depth,
            "layers": [layer.summary() for layer in sample.layers]}
