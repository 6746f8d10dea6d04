"""Interaction energies for Gibbs processes of balls.

Every model exposes ``local_energy(X, omega)``, the cost of adding the ball
``X`` to ``omega``, and the closed-form ``energy(omega, gamma)`` of a whole
configuration given an outside configuration.  Energies are floats with
``math.inf`` standing for an excluded configuration.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .space import Configuration, Point, Window


def _near(X: Point, omega: Configuration) -> Configuration:
    if len(omega) == 0:
        return omega
    hit = kernels.touch_any(omega.centers, omega.radii, np.array([X.location]), np.array([X.radius]))
    return omega.restrict(hit)


def _near_set(omega: Configuration, gamma: Configuration) -> Configuration:
    """Balls of ``gamma`` that touch some ball of ``omega``."""
    if len(gamma) == 0 or len(omega) == 0:
        return Configuration.empty(omega.d)
    hit = kernels.touch_any(gamma.centers, gamma.radii, omega.centers, omega.radii)
    return gamma.restrict(hit)


def _check_disjoint(omega: Configuration, gamma: Configuration):
    if len(omega) and len(gamma) and omega.as_set() & gamma.as_set():
        raise ValueError("configuration and boundary share a point")


class HamiltonianModel:
    """Base class; subclasses implement :meth:`local_energy` and :meth:`energy`."""

    name = "base"
    is_local = True
    interaction_range: float | None = None

    @property
    def h_min(self) -> float:
        return 0.0

    def local_energy(self, X: Point, omega: Configuration) -> float:
        raise NotImplementedError

    def energy(self, omega: Configuration, gamma: Configuration) -> float:
        """Energy of ``omega`` given ``gamma``, independent of insertion order."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def to_spec(self) -> dict:
        return {"name": self.name, **self.params()}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class NoInteraction(HamiltonianModel):
    """Zero energy: the Gibbs process is the Poisson process itself."""

    name = "poisson"

    def local_energy(self, X, omega):
        return 0.0

    def energy(self, omega, gamma):
        return 0.0


class HardSphere(HamiltonianModel):
    """Excludes any pair of touching balls (closed balls)."""

    name = "hard_sphere"

    def local_energy(self, X, omega):
        if X in omega:
            raise ValueError("X already in configuration")
        return math.inf if len(_near(X, omega)) else 0.0

    def energy(self, omega, gamma):
        if len(omega) == 0:
            return 0.0
        if kernels.pair_touch_count(omega.centers, omega.radii):
            return math.inf
        if len(gamma) and kernels.touch_any(omega.centers, omega.radii, gamma.centers, gamma.radii).any():
            return math.inf
        return 0.0


class Strauss(HamiltonianModel):
    """Energy ``beta`` per touching pair; ``beta >= 0``."""

    name = "strauss"

    def __init__(self, beta: float):
        if not beta >= 0:
            raise ValueError("Strauss beta must be >= 0")
        self.beta = float(beta)

    def params(self):
        return {"beta": self.beta}

    def local_energy(self, X, omega):
        if X in omega:
            raise ValueError("X already in configuration")
        return self.beta * len(_near(X, omega))

    def energy(self, omega, gamma):
        if len(omega) == 0:
            return 0.0
        pairs = kernels.pair_touch_count(omega.centers, omega.radii)
        if len(gamma):
            pairs += int(kernels.touch_count(omega.centers, omega.radii, gamma.centers, gamma.radii).sum())
        return self.beta * pairs


def k_components(X: Point, omega: Configuration) -> int:
    """Number of Gilbert-graph components of ``omega`` that ``X``'s ball meets."""
    if X in omega:
        raise ValueError("X already in configuration")
    if len(omega) == 0:
        return 0
    labels = kernels.component_labels(omega.centers, omega.radii)
    hit = kernels.touch_any(omega.centers, omega.radii, np.array([X.location]), np.array([X.radius]))
    return int(np.unique(labels[hit]).size)


def n_components(omega: Configuration) -> int:
    if len(omega) == 0:
        return 0
    return int(kernels.component_labels(omega.centers, omega.radii).max()) + 1


class ContinuumRandomCluster(HamiltonianModel):
    """Adding a ball that merges ``k`` clusters costs ``-log(q) * (1 - k)``.

    Equivalently ``exp(-H(omega | gamma)) = q ** (C(gamma + omega) - C(gamma))``
    with ``C`` the number of Gilbert-graph components.
    """

    name = "crcm"

    def __init__(self, q: float):
        if not q > 0:
            raise ValueError("q must be > 0")
        self.q = float(q)

    def params(self):
        return {"q": self.q}

    @property
    def h_min(self) -> float:
        # k = 0 gives -log q; for q < 1 the energy is unbounded below in k
        return -math.log(self.q) if self.q >= 1 else -math.inf

    def local_energy(self, X, omega):
        return -math.log(self.q) * (1 - k_components(X, omega))

    def energy(self, omega, gamma):
        if len(omega) == 0:
            return 0.0
        near = _near_set(omega, gamma)
        gained = n_components(omega.union(near)) - n_components(near)
        return -math.log(self.q) * gained


# --------------------------------------------------------------------------
# planar union-of-disks geometry


def _uncovered_arcs(i, c, r, alive):
    """Angular intervals of circle ``i`` not inside any other live disk."""
    covered = []
    for j in range(len(r)):
        if j == i or not alive[j]:
            continue
        dx, dy = c[j, 0] - c[i, 0], c[j, 1] - c[i, 1]
        dd = math.hypot(dx, dy)
        if dd >= r[i] + r[j] or dd + r[j] <= r[i]:
            continue  # disjoint or tangent outside, or j inside i
        if dd + r[i] <= r[j]:
            return []  # i inside j
        cosw = (r[i] ** 2 + dd ** 2 - r[j] ** 2) / (2 * r[i] * dd)
        half = math.acos(min(1.0, max(-1.0, cosw)))
        mid = math.atan2(dy, dx)
        lo, hi = mid - half, mid + half
        # normalise onto [0, 2 pi)
        lo %= 2 * math.pi
        hi = lo + 2 * half
        if hi > 2 * math.pi:
            covered.append((lo, 2 * math.pi))
            covered.append((0.0, hi - 2 * math.pi))
        else:
            covered.append((lo, hi))
    covered.sort()
    arcs, t = [], 0.0
    for lo, hi in covered:
        if lo > t:
            arcs.append((t, lo))
        t = max(t, hi)
    if t < 2 * math.pi:
        arcs.append((t, 2 * math.pi))
    return arcs


def union_area_perimeter(centers, radii) -> tuple[float, float]:
    """Exact area and perimeter of a union of closed disks.

    Integrates ``(x dy - y dx) / 2`` along the uncovered boundary arcs.
    Identical disks are counted once; disks inside another disk contribute
    no boundary.
    """
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    r = np.asarray(radii, dtype=float).reshape(-1)
    n = len(r)
    alive = r > 0
    for i in range(n):
        if not alive[i]:
            continue
        for j in range(n):
            if j == i or not alive[j]:
                continue
            dd = math.hypot(*(c[j] - c[i]))
            if dd + r[i] <= r[j] and (dd + r[j] > r[i] or j < i):
                alive[i] = False  # strictly inside j, or a duplicate of an earlier disk
                break
    area = perim = 0.0
    for i in range(n):
        if not alive[i]:
            continue
        cx, cy, ri = c[i, 0], c[i, 1], r[i]
        for t1, t2 in _uncovered_arcs(i, c, r, alive):
            area += 0.5 * (ri * cx * (math.sin(t2) - math.sin(t1))
                           - ri * cy * (math.cos(t2) - math.cos(t1))
                           + ri * ri * (t2 - t1))
            perim += ri * (t2 - t1)
    return area, perim


def lens_area(r1: float, r2: float, dd: float) -> float:
    """Area of the intersection of two disks at center distance ``dd``."""
    if dd >= r1 + r2:
        return 0.0
    if dd <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((dd * dd + r1 * r1 - r2 * r2) / (2 * dd * r1))
    a2 = r2 * r2 * math.acos((dd * dd + r2 * r2 - r1 * r1) / (2 * dd * r2))
    k = 0.5 * math.sqrt((-dd + r1 + r2) * (dd + r1 - r2) * (dd - r1 + r2) * (dd + r1 + r2))
    return a1 + a2 - k


def area_variation(X: Point, omega: Configuration, budget: int, rng):
    """Monte-Carlo estimate of the area of ``B(X)`` not covered by ``omega``.

    Returns ``(value, standard_error)``; closed form (zero error) when at most
    one ball of ``omega`` meets ``B(X)``.
    """
    from .order import MassEstimate

    if X.d != 2:
        raise ValueError("area_variation needs d = 2")
    if budget <= 0:
        raise ValueError("budget must be > 0")
    near = _near(X, omega)
    full = math.pi * X.radius ** 2
    if len(near) == 0:
        return MassEstimate(full, 0.0)
    if len(near) == 1:
        dd = math.dist(X.location, near.centers[0])
        return MassEstimate(full - lens_area(X.radius, near.radii[0], dd), 0.0)
    rad = X.radius * np.sqrt(rng.random(budget))
    ang = 2 * np.pi * rng.random(budget)
    pts = np.column_stack([X.location[0] + rad * np.cos(ang), X.location[1] + rad * np.sin(ang)])
    hit = kernels.touch_any(pts, np.zeros(budget), near.centers, near.radii)
    frac = 1.0 - hit.mean()
    return MassEstimate(full * frac, full * math.sqrt(frac * (1 - frac) / budget))


class AreaInteraction(HamiltonianModel):
    """Planar area-interaction (Quermass without the Euler term).

    The cost of adding ``X`` is ``theta1`` times the newly covered area plus
    ``theta2`` times the change in perimeter of the union, both exact.
    ``r_bounds = (r0, r1)`` are the radius bounds used for ``h_min`` when
    ``theta2 = 0``; with a perimeter term ``h_min`` must be supplied.
    """

    name = "area"

    def __init__(self, theta1: float, theta2: float = 0.0, r_bounds=(0.0, 1.0), h_min=None):
        self.theta1 = float(theta1)
        self.theta2 = float(theta2)
        self.r_bounds = (float(r_bounds[0]), float(r_bounds[1]))
        if h_min is None:
            if self.theta2 != 0.0:
                raise ValueError("h_min must be supplied when the perimeter term is on")
            h_min = 0.0 if self.theta1 >= 0 else self.theta1 * math.pi * self.r_bounds[1] ** 2
        self._h_min = float(h_min)

    def params(self):
        return {"theta1": self.theta1, "theta2": self.theta2,
                "r_bounds": list(self.r_bounds), "h_min": self._h_min}

    @property
    def h_min(self):
        return self._h_min

    def _variation(self, X: Point, near: Configuration) -> float:
        a0, p0 = union_area_perimeter(near.centers, near.radii)
        a1, p1 = union_area_perimeter(np.vstack([near.centers, [X.location]]),
                                      np.append(near.radii, X.radius))
        return self.theta1 * (a1 - a0) + self.theta2 * (p1 - p0)

    def local_energy(self, X, omega):
        if X.d != 2:
            raise ValueError("area interaction is planar")
        if X in omega:
            raise ValueError("X already in configuration")
        return self._variation(X, _near(X, omega))

    def energy(self, omega, gamma):
        if len(omega) == 0:
            return 0.0
        near = _near_set(omega, gamma)
        a0, p0 = union_area_perimeter(near.centers, near.radii)
        both = near.union(omega)
        a1, p1 = union_area_perimeter(both.centers, both.radii)
        return self.theta1 * (a1 - a0) + self.theta2 * (p1 - p0)


# --------------------------------------------------------------------------
# generic operations


def make_model(name: str, **params) -> HamiltonianModel:
    table = {"poisson": NoInteraction, "hard_sphere": HardSphere, "strauss": Strauss,
             "crcm": ContinuumRandomCluster, "area": AreaInteraction}
    if name not in table:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(table)}")
    return table[name](**params)


def local_energy(model: HamiltonianModel, X: Point, omega: Configuration) -> float:
    return model.local_energy(X, omega)


def hamiltonian(model: HamiltonianModel, window: Window | None, omega: Configuration,
                gamma: Configuration, order=None) -> float:
    """Energy of ``omega`` given ``gamma`` accumulated point by point.

    Points are added in increasing key order of ``window`` (or in the explicit
    index ``order`` when given); each addition sees ``gamma`` and the points
    already added.
    """
    _check_disjoint(omega, gamma)
    if len(omega) == 0:
        return 0.0
    if order is None:
        from .order import sort_order

        order = sort_order(omega, window) if window is not None else np.arange(len(omega))
    ctx = gamma
    total = 0.0
    for i in order:
        X = Point(tuple(omega.centers[i]), omega.radii[i])
        e = model.local_energy(X, ctx)
        total += e
        if total == math.inf:
            return math.inf
        ctx = ctx.with_point(X)
    return total


def dom_level(model: HamiltonianModel, lam: float) -> float:
    """Smallest dominating intensity ``lam * exp(-h_min)``."""
    if not lam >= 0:
        raise ValueError("activity must be >= 0")
    h = model.h_min
    if h == -math.inf:
        raise ValueError(f"{model!r} has no finite lower energy bound")
    return lam * math.exp(-h)


def check_loc(model: HamiltonianModel, omega: Configuration, gamma: Configuration,
              tol: float = 1e-9) -> bool:
    """Whether the energy of ``omega`` ignores the disconnected boundary ``gamma``."""
    a = hamiltonian(model, None, omega, gamma)
    b = hamiltonian(model, None, omega, Configuration.empty(omega.d))
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a))
