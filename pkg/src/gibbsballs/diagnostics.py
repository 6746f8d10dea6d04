"""Boundary influence, uniqueness scans and decay of correlations."""
from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .coupling import disagreement_sample
from .models import HamiltonianModel
from .order import OrderInterval
from .partition import gibbs_rejection_sample
from .percolation import fit_decay
from .poisson import RadiusLaw
from .space import Box, Configuration, Window, connected


# --------------------------------------------------------------------------
# events on a box


def count_at_least(k: int = 1) -> Callable:
    def event(omega: Configuration, box: Box) -> bool:
        return int(_inside(omega, box).sum()) >= k
    event.__name__ = f"count_at_least_{k}"
    return event


def vacant(omega: Configuration, box: Box) -> bool:
    return not _inside(omega, box).any()


def always(omega: Configuration, box: Box) -> bool:
    return True


EVENTS = {"count_at_least_1": count_at_least(1), "vacant": vacant, "always": always}


def _inside(omega: Configuration, box: Box) -> np.ndarray:
    if len(omega) == 0:
        return np.zeros(0, dtype=bool)
    c = omega.centers
    return np.all((c >= np.asarray(box.lo)) & (c < np.asarray(box.hi)), axis=1)


class InfluenceReport(NamedTuple):
    direct_gap: float
    gap_se: float
    percolation_bound: float
    bound_se: float
    event: str
    box: tuple
    window: tuple
    distance: float
    reps: int
    per_sample_ok: bool

    @property
    def holds(self) -> bool:
        se = math.hypot(self.gap_se, self.bound_se)
        return self.direct_gap <= self.percolation_bound + 3 * se


def box_distance_to_boundary(window: Window, box: Box) -> float:
    """Distance from the inner box to the window's outer faces."""
    return float(min(min(b - l for l, b in zip(window.lo, box.lo)),
                     min(h - t for h, t in zip(window.hi, box.hi))))


def boundary_influence(model: HamiltonianModel, lam: float, box: Box, window: Window,
                       gamma1: Configuration, gamma2: Configuration, event: Callable,
                       reps: int, Q: RadiusLaw, alpha: float | None = None, seed: int = 0,
                       shared: bool = False) -> InfluenceReport:
    """Compare the event's probability under two boundaries with the
    probability that the box connects to the boundaries through the
    dominating process, all on the same coupled samples."""
    e1 = np.zeros(reps)
    e2 = np.zeros(reps)
    conn = np.zeros(reps)
    boundary = gamma1.union(gamma2.minus(gamma1))
    for i in range(reps):
        s = disagreement_sample(model, lam, alpha, Q, window, gamma1, gamma2, seed, i, shared=shared)
        e1[i] = event(s.xi1, box)
        e2[i] = event(s.xi2, box)
        conn[i] = connected(s.xi3, box, boundary) if len(boundary) else 0.0
    diff = e1 - e2
    gap = abs(diff.mean())
    gap_se = diff.std(ddof=1) / math.sqrt(reps) if reps > 1 else 0.0
    bound = conn.mean()
    bound_se = math.sqrt(bound * (1 - bound) / reps)
    per_sample = bool(np.all(np.abs(diff) <= conn))
    return InfluenceReport(float(gap), float(gap_se), float(bound), float(bound_se),
                           getattr(event, "__name__", "event"), (box.lo, box.hi),
                           (window.lo, window.hi), box_distance_to_boundary(window, box), reps,
                           per_sample)


# --------------------------------------------------------------------------
# uniqueness scan


def dense_shell(window: Window, r: float, spacing: float | None = None) -> Configuration:
    """Deterministic ring of radius-``r`` balls centered at distance ``r``
    outside the window's faces, ``spacing`` apart along each face."""
    spacing = 2 * r if spacing is None else spacing
    d = window.d
    axes = [np.unique(np.append(np.arange(l - r, h + r, spacing), h + r))
            for l, h in zip(window.lo, window.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    lo, hi = np.asarray(window.lo), np.asarray(window.hi)
    on_ring = np.any(np.isclose(grid, lo - r) | np.isclose(grid, hi + r), axis=1)
    pts = grid[on_ring]
    return Configuration(pts, np.full(len(pts), r), d=d)


def boundary_library(window: Window, Q: RadiusLaw) -> dict:
    r = Q.r_sup
    return {"empty": Configuration.empty(window.d),
            "dense": dense_shell(window, r),
            "sparse": dense_shell(window, r, spacing=4 * r)}


class GapRow(NamedTuple):
    n: float
    gap: float
    se: float
    worst: str
    reps: int

    @property
    def below_noise(self) -> bool:
        return self.gap <= 2 * self.se if self.se > 0 else self.gap == 0


def uniqueness_scan(model: HamiltonianModel, lam: float, box: Box, n_grid, event: Callable,
                    reps: int, Q: RadiusLaw, alpha: float | None = None, seed: int = 0,
                    W: int = 24) -> list[GapRow]:
    """Worst-case event gap over a library of boundaries as the window grows.

    For each half-width ``n`` the window is ``[-n, n)^d``; every library
    boundary is coupled with the empty boundary and the largest paired gap
    is reported.
    """
    d = len(box.lo)
    rows = []
    for n in n_grid:
        window = Window((-float(n),) * d, (float(n),) * d, Q.r_sup, W)
        lib = boundary_library(window, Q)
        worst = ("empty", 0.0, 0.0)
        for name, gamma in lib.items():
            if name == "empty":
                continue
            rep = boundary_influence(model, lam, box, window, lib["empty"], gamma, event,
                                     reps, Q, alpha, seed)
            if rep.direct_gap - 2 * rep.gap_se >= worst[1] - 2 * worst[2]:
                worst = (name, rep.direct_gap, rep.gap_se)
        rows.append(GapRow(float(n), worst[1], worst[2], worst[0], reps))
    return rows


# --------------------------------------------------------------------------
# decay of correlations


class CorrelationRow(NamedTuple):
    separation: float
    cov_density: float
    cov_se: float
    event_cov: float
    event_se: float


def _paired_cov(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    prod = (a - a.mean()) * (b - b.mean())
    n = len(a)
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))


def correlation_table(model: HamiltonianModel, lam: float, Q: RadiusLaw, window: Window,
                      cell: float, separations, reps: int, rng, alpha: float | None = None,
                      anchor: float | None = None, samples=None) -> list[CorrelationRow]:
    """Truncated count covariance density between a cell and shifted cells.

    Cells are ``[x0, x0 + cell)`` along the first axis (full extent in the
    others).  For each separation ``s`` the second cell starts at
    ``x0 + s``.  Reports ``cov(N1, N2) / (|A||B|)`` and the covariance of the
    indicator events ``N >= 1``.
    """
    x0 = window.lo[0] if anchor is None else anchor
    if samples is None:
        samples = [gibbs_rejection_sample(lam, OrderInterval(), None, model, window, Q, rng, alpha)
                   for _ in range(reps)]
    cross = float(np.prod(window.sides[1:])) if window.d > 1 else 1.0
    vol = cell * cross

    def counts(start):
        return np.array([int(np.sum((s.centers[:, 0] >= start) & (s.centers[:, 0] < start + cell)))
                         for s in samples])

    base = counts(x0)
    rows = []
    for s in separations:
        other = counts(x0 + s)
        c, cse = _paired_cov(base, other)
        e, ese = _paired_cov(base >= 1, other >= 1)
        rows.append(CorrelationRow(float(s), c / vol ** 2, cse / vol ** 2, e, ese))
    return rows


def correlation_decay(model: HamiltonianModel, lam: float, Q: RadiusLaw, window: Window,
                      cell: float, separations, reps: int, rng, alpha: float | None = None):
    """Fit exponential decay to the magnitude of the covariance density.

    Returns ``(fit, rows)``; ``fit`` is ``None`` when some covariance is not
    resolved away from zero (a log fit would be meaningless there).
    """
    rows = correlation_table(model, lam, Q, window, cell, separations, reps, rng, alpha)
    table = [(r.separation, abs(r.cov_density), r.cov_se) for r in rows]
    if any(v <= 0 for _, v, _ in table) or len(table) < 4:
        return None, rows
    return fit_decay(table), rows
