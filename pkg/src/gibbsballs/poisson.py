"""Radius laws and Poisson sampling of balls on a window's domain."""
from __future__ import annotations

import math

import numpy as np

from .space import Configuration, Window


class RadiusLaw:
    """Law of ball radii on ``[0, r_sup]``.

    Build with :meth:`delta`, :meth:`uniform`, :meth:`tabulated` or
    :meth:`truncated_exponential`.  ``mass(a, b)`` is ``P(a <= r < b)``.
    """

    def __init__(self, kind, params, grid=None, cdf_values=None, tail_mass=0.0):
        self.kind = kind
        self.params = dict(params)
        self.tail_mass = float(tail_mass)
        if grid is not None:
            self.grid = np.asarray(grid, dtype=float)
            self.cdf_values = np.asarray(cdf_values, dtype=float)
        else:
            self.grid = self.cdf_values = None

    # constructors -------------------------------------------------------
    @classmethod
    def delta(cls, R: float) -> "RadiusLaw":
        if not R >= 0:
            raise ValueError("radius must be >= 0")
        return cls("delta", {"R": float(R)})

    @classmethod
    def uniform(cls, r0: float, r1: float) -> "RadiusLaw":
        if not 0 <= r0 < r1:
            raise ValueError("need 0 <= r0 < r1")
        return cls("uniform", {"r0": float(r0), "r1": float(r1)})

    @classmethod
    def tabulated(cls, grid, cdf_values, tail_mass: float = 0.0) -> "RadiusLaw":
        """Piecewise-linear CDF through ``(grid[i], cdf_values[i])``."""
        g = np.asarray(grid, dtype=float)
        F = np.asarray(cdf_values, dtype=float)
        if g.ndim != 1 or len(g) < 2 or len(g) != len(F):
            raise ValueError("grid and cdf_values must be 1-D of equal length >= 2")
        if g[0] < 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing and >= 0")
        if np.any(np.diff(F) < 0) or abs(F[0]) > 1e-12 or abs(F[-1] - 1) > 1e-12:
            raise ValueError("cdf_values must rise monotonically from 0 to 1")
        return cls("tabulated", {}, g, F, tail_mass)

    @classmethod
    def truncated_exponential(cls, rate: float, r_max: float, n_grid: int = 257) -> "RadiusLaw":
        """Exponential law conditioned on ``r <= r_max``; the cut-off tail is
        kept in :attr:`tail_mass`."""
        if not (rate > 0 and r_max > 0):
            raise ValueError("rate and r_max must be > 0")
        g = np.linspace(0.0, r_max, n_grid)
        tail = math.exp(-rate * r_max)
        F = (1 - np.exp(-rate * g)) / (1 - tail)
        F[-1] = 1.0
        law = cls.tabulated(g, F, tail_mass=tail)
        law.kind = "truncated_exponential"
        law.params = {"rate": float(rate), "r_max": float(r_max)}
        return law

    @classmethod
    def from_spec(cls, spec: dict) -> "RadiusLaw":
        spec = dict(spec)
        kind = spec.pop("kind")
        if kind == "delta":
            return cls.delta(**spec)
        if kind == "uniform":
            return cls.uniform(**spec)
        if kind == "tabulated":
            return cls.tabulated(**spec)
        if kind == "truncated_exponential":
            return cls.truncated_exponential(**spec)
        raise ValueError(f"unknown radius law kind {kind!r}")

    def to_spec(self) -> dict:
        if self.kind == "tabulated":
            return {"kind": "tabulated", "grid": self.grid.tolist(),
                    "cdf_values": self.cdf_values.tolist(), "tail_mass": self.tail_mass}
        return {"kind": self.kind, **self.params}

    def __repr__(self):
        return f"RadiusLaw({self.kind}, {self.params})"

    # queries ------------------------------------------------------------
    @property
    def r_sup(self) -> float:
        if self.kind == "delta":
            return self.params["R"]
        if self.kind == "uniform":
            return self.params["r1"]
        return float(self.grid[-1])

    def cdf(self, x):
        """``P(r <= x)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "delta":
            out = (x >= self.params["R"]).astype(float)
        elif self.kind == "uniform":
            r0, r1 = self.params["r0"], self.params["r1"]
            out = np.clip((x - r0) / (r1 - r0), 0.0, 1.0)
        else:
            out = np.interp(x, self.grid, self.cdf_values, left=0.0, right=1.0)
        return out if out.ndim else float(out)

    def mass(self, a: float, b: float) -> float:
        """``P(a <= r < b)``."""
        if b <= a:
            return 0.0
        if self.kind == "delta":
            return 1.0 if a <= self.params["R"] < b else 0.0
        # continuous laws: half-open and closed intervals carry equal mass
        return float(self.cdf(b) - self.cdf(a))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "delta":
            out = np.full(u.shape, self.params["R"])
        elif self.kind == "uniform":
            r0, r1 = self.params["r0"], self.params["r1"]
            out = r0 + u * (r1 - r0)
        else:
            # invert the piecewise-linear CDF, skipping flat pieces
            F, g = self.cdf_values, self.grid
            keep = np.concatenate([[True], np.diff(F) > 0])
            out = np.interp(u, F[keep], g[keep])
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        if self.kind == "delta":
            return self.params["R"] if size is None else np.full(size, self.params["R"])
        return self.ppf(rng.random(size))

    def sample_between(self, a: float, b: float, rng) -> float:
        """One draw from the law conditioned on ``[a, b)``."""
        if self.kind == "delta":
            return self.params["R"]
        lo, hi = self.cdf(a), self.cdf(b)
        return float(self.ppf(lo + (hi - lo) * rng.random()))


def rho_moment(Q: RadiusLaw, d: int) -> float:
    """``E[r**d]`` under ``Q``: exact for every supported law."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if Q.kind == "delta":
        val = Q.params["R"] ** d
    elif Q.kind == "uniform":
        r0, r1 = Q.params["r0"], Q.params["r1"]
        val = (r1 ** (d + 1) - r0 ** (d + 1)) / ((d + 1) * (r1 - r0))
    else:
        # piecewise-constant density on each grid cell integrates in closed form
        g, F = Q.grid, Q.cdf_values
        dens = np.diff(F) / np.diff(g)
        val = float(np.sum(dens * (g[1:] ** (d + 1) - g[:-1] ** (d + 1)) / (d + 1)))
    if not math.isfinite(val):
        raise ValueError("radius moment diverges")
    return float(val)


def _check_support(window: Window, Q: RadiusLaw):
    if Q.r_sup > window.r_max:
        raise ValueError(f"radius law reaches {Q.r_sup} beyond r_max={window.r_max}")


def sample_ints(window: Window, alpha: float, Q: RadiusLaw, rng) -> np.ndarray:
    """Poisson(alpha * L x Q) on the domain as fixed-point rows (n, m).

    Locations are uniform over the ``2**W``-grid cells of the box, radii are
    floored onto the same grid; rows that repeat an earlier row are redrawn
    so the result is always a simple configuration.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    _check_support(window, Q)
    n = rng.poisson(alpha * window.volume) if alpha > 0 else 0
    sides = window.int_sides
    q = 2.0 ** window.W

    def draw(k):
        rows = np.empty((k, window.m), dtype=np.int64)
        for j, s in enumerate(sides):
            rows[:, j] = rng.integers(0, s, size=k)
        rows[:, window.d] = np.floor(np.asarray(Q.sample(rng, k), dtype=float) * q)
        return rows

    rows = draw(n)
    for _ in range(1000):
        if not n:
            break
        _, first = np.unique(rows, axis=0, return_index=True)
        if len(first) == n:
            break
        dup = np.setdiff1d(np.arange(n), first)
        rows[dup] = draw(len(dup))
    else:
        raise RuntimeError("fixed-point grid too coarse for a simple configuration; raise W")
    return rows


def sample_poisson(window: Window, alpha: float, Q: RadiusLaw, rng) -> Configuration:
    """Poisson process of balls with intensity ``alpha * L x Q`` on the domain."""
    from .order import from_ints

    c, r = from_ints(window, sample_ints(window, alpha, Q, rng))
    return Configuration(c, r, d=window.d)


def sample_poisson_on(window: Window, alpha: float, Q: RadiusLaw, iv, rng) -> Configuration:
    """Poisson process restricted to an order interval (with optional region)."""
    omega = sample_poisson(window, alpha, Q, rng)
    if len(omega) == 0:
        return omega
    return omega.restrict(iv.mask_config(window, omega))
