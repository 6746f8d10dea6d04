"""Balls, configurations, windows, regions and Gilbert-graph connectivity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import kernels


def dist(x: Sequence[float], y: Sequence[float]) -> float:
    """Euclidean distance between two points of equal dimension."""
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    if len(x) == 0:
        raise ValueError("points must have dimension >= 1")
    return math.dist(x, y)


@dataclass(frozen=True)
class Point:
    """A closed ball ``B(location, radius)``."""

    location: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(float(v) for v in self.location))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius >= 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if not self.location:
            raise ValueError("location must have dimension >= 1")

    @property
    def d(self) -> int:
        return len(self.location)

    def as_tuple(self) -> tuple[float, ...]:
        return self.location + (self.radius,)


def balls_intersect(X: Point, Y: Point) -> bool:
    """Closed-ball intersection, evaluated in exact rational arithmetic."""
    if X.d != Y.d:
        raise ValueError(f"dimension mismatch: {X.d} vs {Y.d}")
    sq = sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(X.location, Y.location))
    return sq <= (Fraction(X.radius) + Fraction(Y.radius)) ** 2


class Configuration:
    """A finite simple set of balls, stored as read-only arrays.

    ``centers`` has shape (n, d), ``radii`` shape (n,).  Equality is set
    equality; insertion order carries no meaning.
    """

    __slots__ = ("centers", "radii", "_set")

    def __init__(self, centers, radii, d: int | None = None):
        c = np.array(centers, dtype=np.float64)
        r = np.array(radii, dtype=np.float64).reshape(-1)
        if c.size == 0:
            if d is None:
                d = c.shape[1] if c.ndim == 2 else 1
            c = np.zeros((0, d))
        elif c.ndim == 1:
            c = c.reshape(-1, 1) if d in (None, 1) else c.reshape(-1, d)
        if len(c) != len(r):
            raise ValueError("centers and radii differ in length")
        if np.any(r < 0):
            raise ValueError("radii must be >= 0")
        c.setflags(write=False)
        r.setflags(write=False)
        self.centers = c
        self.radii = r
        self._set = None

    @classmethod
    def empty(cls, d: int) -> "Configuration":
        return cls(np.zeros((0, d)), np.zeros(0), d=d)

    @classmethod
    def from_points(cls, points: Iterable[Point], d: int | None = None) -> "Configuration":
        pts = list(points)
        if not pts:
            if d is None:
                raise ValueError("dimension required for an empty configuration")
            return cls.empty(d)
        return cls([p.location for p in pts], [p.radius for p in pts])

    @classmethod
    def from_rows(cls, rows, d: int) -> "Configuration":
        """Build from rows ``[x_1, ..., x_d, r]``."""
        a = np.array(rows, dtype=np.float64).reshape(-1, d + 1)
        return cls(a[:, :d], a[:, d], d=d)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def __len__(self) -> int:
        return len(self.radii)

    def __iter__(self) -> Iterator[Point]:
        for c, r in zip(self.centers, self.radii):
            yield Point(tuple(c), r)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.centers, self.radii])

    def as_set(self) -> frozenset:
        if self._set is None:
            self._set = frozenset(map(tuple, self.rows().tolist()))
        return self._set

    def __contains__(self, X: Point) -> bool:
        return X.as_tuple() in self.as_set()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.d == other.d and self.as_set() == other.as_set()

    def __hash__(self):
        return hash(self.as_set())

    def __repr__(self) -> str:
        return f"Configuration(n={len(self)}, d={self.d})"

    def is_simple(self) -> bool:
        return len(self.as_set()) == len(self)

    def issubset(self, other: "Configuration") -> bool:
        return self.as_set() <= other.as_set()

    def union(self, *others: "Configuration") -> "Configuration":
        """Concatenation; the operands must be disjoint (use ``minus`` first otherwise)."""
        cs = [self.centers] + [o.centers for o in others]
        rs = [self.radii] + [o.radii for o in others]
        return Configuration(np.concatenate(cs), np.concatenate(rs), d=self.d)

    def minus(self, other: "Configuration") -> "Configuration":
        drop = other.as_set()
        keep = [tuple(row) not in drop for row in self.rows().tolist()]
        return self.restrict(np.array(keep, dtype=bool))

    def symmetric_difference(self, other: "Configuration") -> "Configuration":
        return self.minus(other).union(other.minus(self))

    def restrict(self, mask) -> "Configuration":
        mask = np.asarray(mask)
        return Configuration(self.centers[mask], self.radii[mask], d=self.d)

    def with_point(self, X: Point) -> "Configuration":
        return Configuration(np.vstack([self.centers, [X.location]]),
                             np.append(self.radii, X.radius), d=self.d)


@dataclass(frozen=True)
class Window:
    """Axis-aligned box ``lo <= x < hi`` with radius bound ``r_max``.

    The simulation domain is ``Delta = box x [0, r_max]``.  Coordinates are
    W-bit dyadic fixed-point numbers measured from ``lo``.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    r_max: float
    W: int = 32

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "r_max", float(self.r_max))
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be nonempty and of equal dimension")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("window box must be nonempty")
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if not 0 <= self.W <= 48:
            raise ValueError("W must lie in [0, 48]")
        scale = 2.0 ** self.W
        for side in self.sides:
            if side * scale != math.floor(side * scale):
                raise ValueError(f"window side {side} is not a {self.W}-bit dyadic number")
        if self.P + self.W > 62:
            raise ValueError("window too large for 62-bit fixed-point coordinates")

    @classmethod
    def cube(cls, d: int, side: float = 1.0, r_max: float = 1.0, W: int = 32, lo: float = 0.0) -> "Window":
        return cls((lo,) * d, (lo + side,) * d, r_max, W)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def m(self) -> int:
        return self.d + 1

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def P(self) -> int:
        """Integer bits per component: ``2**P`` exceeds every side and r_max."""
        biggest = max(max(self.sides), self.r_max)
        return max(1, math.floor(math.log2(biggest)) + 1)

    @property
    def key_bits(self) -> int:
        return self.m * (self.P + self.W)

    @property
    def int_sides(self) -> tuple[int, ...]:
        return tuple(int(s * 2 ** self.W) for s in self.sides)

    def quantize(self, centers, radii):
        """Floor coordinates onto the W-bit grid anchored at ``lo``."""
        q = 2.0 ** self.W
        lo = np.asarray(self.lo)
        c = lo + np.floor((np.asarray(centers, dtype=float) - lo) * q) / q
        r = np.floor(np.asarray(radii, dtype=float) * q) / q
        return c, r

    def contains(self, centers, radii) -> np.ndarray:
        c = np.asarray(centers, dtype=float).reshape(-1, self.d)
        r = np.asarray(radii, dtype=float).reshape(-1)
        inside = np.all((c >= np.asarray(self.lo)) & (c < np.asarray(self.hi)), axis=1)
        return inside & (r >= 0) & (r <= self.r_max)

    def contains_point(self, X: Point) -> bool:
        return bool(self.contains([X.location], [X.radius])[0])

    def box_distance(self, centers) -> np.ndarray:
        """Euclidean distance from each center to the closed box."""
        c = np.asarray(centers, dtype=float).reshape(-1, self.d)
        gap = np.maximum(np.asarray(self.lo) - c, 0) + np.maximum(c - np.asarray(self.hi), 0)
        return np.sqrt((gap ** 2).sum(axis=1))


class Region:
    """A decidable subset of a window's domain.

    ``predicate(centers, radii) -> bool array`` must be pure; membership is
    always intersected with the window's domain.
    """

    def __init__(self, window: Window, predicate: Callable | None = None, label: str = "region"):
        self.window = window
        self._predicate = predicate
        self.label = label

    def mask(self, centers, radii) -> np.ndarray:
        c = np.asarray(centers, dtype=float).reshape(-1, self.window.d)
        r = np.asarray(radii, dtype=float).reshape(-1)
        inside = self.window.contains(c, r)
        if self._predicate is not None and inside.any():
            inside[inside] = self._predicate(c[inside], r[inside])
        return inside

    def mask_config(self, omega: Configuration) -> np.ndarray:
        return self.mask(omega.centers, omega.radii)

    def contains(self, X: Point) -> bool:
        return bool(self.mask([X.location], [X.radius])[0])

    def is_empty(self, reach: float | None = None) -> bool:
        """Conservative emptiness test; ``False`` unless provably empty."""
        return False

    def __repr__(self):
        return f"Region({self.label})"


class InfluenceZone(Region):
    """Balls of the domain that touch at least one boundary ball."""

    def __init__(self, window: Window, boundary: Configuration):
        self.boundary = boundary
        super().__init__(window, self._touches, label=f"influence({len(boundary)})")

    def _touches(self, c, r):
        if len(self.boundary) == 0:
            return np.zeros(len(c), dtype=bool)
        return kernels.touch_any(c, r, self.boundary.centers, self.boundary.radii)

    def is_empty(self, reach: float | None = None) -> bool:
        if len(self.boundary) == 0:
            return True
        reach = self.window.r_max if reach is None else reach
        gap = self.window.box_distance(self.boundary.centers)
        return bool(np.all(gap > self.boundary.radii + reach))


class Remainder(Region):
    """The domain minus every ball touching ``blockers``."""

    def __init__(self, window: Window, blockers: Configuration):
        self.blockers = blockers
        super().__init__(window, self._free, label=f"remainder({len(blockers)})")

    def _free(self, c, r):
        if len(self.blockers) == 0:
            return np.ones(len(c), dtype=bool)
        return ~kernels.touch_any(c, r, self.blockers.centers, self.blockers.radii)


def influence_zone(window: Window, boundary: Configuration) -> InfluenceZone:
    """Points of ``window``'s domain whose ball meets a ball of ``boundary``."""
    return InfluenceZone(window, boundary)


# --------------------------------------------------------------------------
# connectivity probes


@dataclass(frozen=True)
class Box:
    """Spatial box probe (a set of radius-0 points)."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def touches(self, centers, radii) -> np.ndarray:
        c = np.asarray(centers, dtype=float)
        gap = np.maximum(np.asarray(self.lo) - c, 0) + np.maximum(c - np.asarray(self.hi), 0)
        return (gap ** 2).sum(axis=1) <= np.asarray(radii, dtype=float) ** 2


@dataclass(frozen=True)
class OutsideBall:
    """Probe for the complement of the open-ended ball ``B(center, radius)``."""

    center: tuple[float, ...]
    radius: float

    def touches(self, centers, radii) -> np.ndarray:
        c = np.asarray(centers, dtype=float)
        norm = np.sqrt(((c - np.asarray(self.center)) ** 2).sum(axis=1))
        return norm + np.asarray(radii, dtype=float) >= self.radius


def _as_balls(probe):
    if isinstance(probe, Point):
        return np.array([probe.location]), np.array([probe.radius])
    if isinstance(probe, Configuration):
        return probe.centers, probe.radii
    return None


def _touch_mask(probe, centers, radii) -> np.ndarray:
    balls = _as_balls(probe)
    if balls is None:
        return probe.touches(centers, radii)
    if len(balls[1]) == 0 or len(radii) == 0:
        return np.zeros(len(radii), dtype=bool)
    return kernels.touch_any(centers, radii, balls[0], balls[1])


def _probes_meet(A, B) -> bool:
    ba, bb = _as_balls(A), _as_balls(B)
    if ba is not None and bb is not None:
        return len(ba[1]) > 0 and len(bb[1]) > 0 and bool(
            kernels.touch_any(ba[0], ba[1], bb[0], bb[1]).any())
    if ba is not None:
        return len(ba[1]) > 0 and bool(B.touches(ba[0], ba[1]).any())
    if bb is not None:
        return len(bb[1]) > 0 and bool(A.touches(bb[0], bb[1]).any())
    if isinstance(A, Box) and isinstance(B, Box):
        return all(max(a, c) <= min(b, e) for a, b, c, e in zip(A.lo, A.hi, B.lo, B.hi))
    raise TypeError(f"cannot intersect probes {type(A).__name__} and {type(B).__name__}")


def connected(omega: Configuration, A, B) -> bool:
    """Whether ``A`` and ``B`` are joined by a path in the Gilbert graph of
    ``omega`` augmented by the probes.

    Probes are a :class:`Point` (a spatial point is the radius-0 ball), a
    :class:`Configuration` (path may end at any of its balls), a :class:`Box`
    or an :class:`OutsideBall`.
    """
    if _probes_meet(A, B):
        return True
    if len(omega) == 0:
        return False
    labels = kernels.component_labels(omega.centers, omega.radii)
    hit_a = _touch_mask(A, omega.centers, omega.radii)
    hit_b = _touch_mask(B, omega.centers, omega.radii)
    return bool(np.intersect1d(labels[hit_a], labels[hit_b]).size)
