"""Total order on the domain by binary-digit interleaving (Z-order keys).

A point of the window's domain is turned into ``m = d + 1`` non-negative
fixed-point integers (the spatial coordinates measured from ``window.lo``
and the radius, all scaled by ``2**W``).  The key juxtaposes their binary
digits: key bit ``n`` is bit ``n // m`` of component ``n % m``, so the
radius (component ``d``) is the most significant digit within each power of
two.  Keys are Python ints; the end of the key range, ``None``, plays the
role of the ``+infinity`` end of every interval.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels
from .space import Configuration, Point, Region, Window


class MassEstimate(NamedTuple):
    """A measure value with Monte-Carlo standard error (0 when exact)."""

    value: float
    se: float = 0.0


# --------------------------------------------------------------------------
# fixed-point components and bit interleaving


def to_ints(window: Window, centers, radii) -> np.ndarray:
    """Fixed-point integer components, shape (n, m), int64."""
    c = np.asarray(centers, dtype=float).reshape(-1, window.d)
    r = np.asarray(radii, dtype=float).reshape(-1)
    q = 2.0 ** window.W
    out = np.empty((len(r), window.m), dtype=np.int64)
    out[:, : window.d] = np.floor((c - np.asarray(window.lo)) * q)
    out[:, window.d] = np.floor(r * q)
    top = np.array(window.int_sides + (int(np.floor(window.r_max * q)) + 1,))
    if np.any(out < 0) or np.any(out >= top):
        raise ValueError("coordinate outside the window's representable range")
    return out


def from_ints(window: Window, ints) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(ints, dtype=np.int64).reshape(-1, window.m)
    q = 2.0 ** window.W
    centers = np.asarray(window.lo) + a[:, : window.d] / q
    return centers, a[:, window.d] / q


@lru_cache(maxsize=None)
def _spread_table(m: int) -> tuple[int, ...]:
    """Byte value -> its bits spread ``m`` positions apart."""
    table = []
    for v in range(256):
        s = 0
        for k in range(8):
            if v >> k & 1:
                s |= 1 << (k * m)
        table.append(s)
    return tuple(table)


def interleave(components, m: int) -> int:
    """Key of one point from its ``m`` non-negative integer components."""
    table = _spread_table(m)
    key = 0
    for j, c in enumerate(components):
        c = int(c)
        shift = j
        while c:
            key |= table[c & 0xFF] << shift
            c >>= 8
            shift += 8 * m
    return key


def deinterleave(key: int, m: int) -> list[int]:
    """Inverse of :func:`interleave`."""
    comps = [0] * m
    n = 0
    while key:
        byte = key & 0xFF
        for b in range(8):
            if byte >> b & 1:
                pos = n + b
                comps[pos % m] |= 1 << (pos // m)
        key >>= 8
        n += 8
    return comps


def encode(X: Point, window: Window) -> int:
    return interleave(to_ints(window, [X.location], [X.radius])[0], window.m)


def decode(key: int, window: Window) -> Point:
    if key < 0 or key >= 1 << window.key_bits:
        raise ValueError("key outside the window's key range")
    c, r = from_ints(window, [deinterleave(key, window.m)])
    return Point(tuple(c[0]), r[0])


def encode_many(window: Window, centers, radii) -> list[int]:
    m = window.m
    return [interleave(row, m) for row in to_ints(window, centers, radii).tolist()]


def encode_config(omega: Configuration, window: Window) -> list[int]:
    return encode_many(window, omega.centers, omega.radii)


def compare(X: Point, Y: Point, window: Window) -> int:
    """-1, 0 or 1 as ``X`` precedes, equals or follows ``Y``."""
    a, b = encode(X, window), encode(Y, window)
    return (a > b) - (a < b)


def sort_order(omega: Configuration, window: Window) -> np.ndarray:
    """Permutation visiting ``omega`` in increasing order."""
    keys = encode_config(omega, window)
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


# --------------------------------------------------------------------------
# intervals


@dataclass(frozen=True)
class OrderInterval:
    """Keys ``lo <= key < hi``; ``hi=None`` is the end of the domain."""

    lo: int = 0
    hi: int | None = None
    region: Region | None = None

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise ValueError("interval bounds out of order")

    def end(self, window: Window) -> int:
        return 1 << window.key_bits if self.hi is None else min(self.hi, 1 << window.key_bits)

    def with_lo(self, lo: int) -> "OrderInterval":
        return OrderInterval(max(lo, self.lo), self.hi, self.region)

    def restrict(self, region: Region | None) -> "OrderInterval":
        return OrderInterval(self.lo, self.hi, region)

    def key_mask(self, window: Window, ints: np.ndarray) -> np.ndarray:
        """Which fixed-point rows have keys inside ``[lo, hi)`` (ignores region)."""
        ints = np.asarray(ints, dtype=np.int64).reshape(-1, window.m)
        mask = np.ones(len(ints), dtype=bool)
        if len(ints) == 0:
            return mask
        if self.lo > 0:
            mask &= ~kernels.key_less(ints, np.array(deinterleave(self.lo, window.m)))
        if self.hi is not None and self.hi < 1 << window.key_bits:
            mask &= kernels.key_less(ints, np.array(deinterleave(self.hi, window.m)))
        return mask

    def mask(self, window: Window, centers, radii) -> np.ndarray:
        """Membership of points: inside the domain, key interval and region."""
        c = np.asarray(centers, dtype=float).reshape(-1, window.d)
        r = np.asarray(radii, dtype=float).reshape(-1)
        out = window.contains(c, r)
        if out.any():
            out[out] = self.key_mask(window, to_ints(window, c[out], r[out]))
        if self.region is not None and out.any():
            out &= self.region.mask(c, r)
        return out

    def mask_config(self, window: Window, omega: Configuration) -> np.ndarray:
        return self.mask(window, omega.centers, omega.radii)


def full_interval(region: Region | None = None) -> OrderInterval:
    return OrderInterval(0, None, region)


def dyadic_blocks(lo: int, hi: int) -> list[tuple[int, int]]:
    """Split ``[lo, hi)`` into aligned blocks ``[a, a + 2**s)``."""
    blocks = []
    a = lo
    while a < hi:
        s = (a & -a).bit_length() - 1 if a else (hi - a).bit_length()
        while a + (1 << s) > hi:
            s -= 1
        blocks.append((a, s))
        a += 1 << s
    return blocks


def block_ranges(start: int, s: int, m: int) -> list[tuple[int, int]]:
    """Per-component integer ranges ``[lo, hi)`` spanned by a key block."""
    base = deinterleave(start, m)
    out = []
    for j in range(m):
        free = max(0, (s - j + m - 1) // m)
        out.append((base[j], base[j] + (1 << free)))
    return out


def _block_mass(ranges, window: Window, Q) -> float:
    scale = 2.0 ** -window.W
    vol = 1.0
    for (a, b), n in zip(ranges[: window.d], window.int_sides):
        overlap = min(b, n) - a
        if overlap <= 0:
            return 0.0
        vol *= overlap * scale
    ra, rb = ranges[window.d]
    return vol * Q.mass(ra * scale, rb * scale)


def _blocks_with_mass(iv: OrderInterval, Q, window: Window):
    blocks = []
    for start, s in dyadic_blocks(iv.lo, iv.end(window)):
        ranges = block_ranges(start, s, window.m)
        w = _block_mass(ranges, window, Q)
        if w > 0:
            blocks.append((ranges, w))
    return blocks


def _check_law(Q, window: Window):
    total = Q.mass(0.0, np.nextafter(window.r_max, np.inf))
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"radius law carries mass {total} on [0, r_max], expected 1")


def sample_in_interval(iv: OrderInterval, Q, window: Window, n: int, rng, blocks=None):
    """Draw ``n`` points from ``Q*`` restricted to the key interval (region ignored)."""
    blocks = _blocks_with_mass(iv, Q, window) if blocks is None else blocks
    if not blocks:
        raise ValueError("interval carries no mass")
    w = np.array([b[1] for b in blocks])
    pick = rng.choice(len(blocks), size=n, p=w / w.sum())
    ints = np.empty((n, window.m), dtype=np.int64)
    scale = 2.0 ** -window.W
    for t, i in enumerate(pick):
        ranges = blocks[i][0]
        for j in range(window.d):
            a, b = ranges[j]
            ints[t, j] = rng.integers(a, min(b, window.int_sides[j]))
        ra, rb = ranges[window.d]
        r = Q.sample_between(ra * scale, rb * scale, rng)
        ints[t, window.d] = min(max(int(np.floor(r / scale)), ra), rb - 1)
    return from_ints(window, ints)


def interval_measure(iv: OrderInterval, Q, window: Window, budget: int = 4096,
                     rng=None) -> MassEstimate:
    """``Q*``-mass of an order interval.

    Exact for plain key intervals.  With a region attached, the exact key
    mass is multiplied by a Monte-Carlo estimate of the region's share,
    drawn from ``Q*`` restricted to the interval.
    """
    _check_law(Q, window)
    blocks = _blocks_with_mass(iv, Q, window)
    total = float(sum(b[1] for b in blocks))
    if iv.region is None or total == 0.0:
        return MassEstimate(total, 0.0)
    if rng is None:
        raise ValueError("a random generator is required for region-restricted measures")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    centers, radii = sample_in_interval(iv, Q, window, budget, rng, blocks)
    frac = iv.region.mask(centers, radii).mean()
    return MassEstimate(total * frac, total * np.sqrt(frac * (1 - frac) / budget))


def successor_key_at_mass(key: int, eps: float, Q, window: Window) -> int | None:
    """Smallest key ``K`` with ``Q*([key, K)) >= eps``; ``None`` is the end sentinel."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return key
    end = 1 << window.key_bits
    remaining = interval_measure(OrderInterval(key, None), Q, window).value
    if eps > remaining * (1 + 1e-12):
        raise ValueError(f"requested mass {eps} exceeds remaining mass {remaining}")
    if eps >= remaining:
        return None
    lo, hi = key, end
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if interval_measure(OrderInterval(key, mid), Q, window).value >= eps:
            hi = mid
        else:
            lo = mid
    return hi


def successor_at_mass(X: Point, eps: float, Q, window: Window) -> Point | None:
    """The point ``X_eps`` following ``X`` with ``Q*([X, X_eps)) = eps`` up to one
    key quantum, or ``None`` when ``eps`` is the whole remaining mass."""
    k = successor_key_at_mass(encode(X, window), eps, Q, window)
    return None if k is None or k >= 1 << window.key_bits else decode(k, window)
