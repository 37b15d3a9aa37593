"""Arithmetic on the unit circle R/Z.

Points are kept as canonical representatives in [0, 1).  Oriented arcs
[x, y] always run anticlockwise from x to y.  Two distances are used
throughout: the oriented gap ``dplus`` (Lebesgue measure of the arc
[x, y]) and the genuine metric ``dist`` (the smaller of the two gaps).

Hot numerical code works on bare floats / numpy arrays via the
module-level helpers (``frac``, ``gap``, ``circ_dist``); the
``CirclePoint`` / ``Arc`` types wrap the same operations for the public
API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CirclePoint",
    "Arc",
    "frac",
    "gap",
    "circ_dist",
    "arc_midpoint",
    "in_arc",
    "dplus",
    "dist",
    "mfold",
    "mth_root",
    "sector",
    "boundary_points",
]


def frac(x):
    """Canonical representative of x in [0, 1).  Works on scalars and arrays.

    A value whose reduction rounds to 1.0 exactly wraps to 0.0: as a point
    of the circle it is nearest to [0].
    """
    if isinstance(x, np.ndarray):
        r = np.mod(x, 1.0)
        return np.where(r >= 1.0, 0.0, r)
    r = x % 1.0
    return 0.0 if r >= 1.0 else r


_BELOW_ONE = math.nextafter(1.0, 0.0)


def gap(x, y):
    """Oriented distance (y - x) mod 1. Lebesgue measure of the arc [x, y].

    Unlike point normalization, a gap that rounds to 1.0 clamps to the
    largest double below 1: the true gap is strictly less than a full turn,
    and wrapping it to 0 would break the complement identity
    gap(x, y) + gap(y, x) = 1.
    """
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        r = np.mod(np.asarray(y, dtype=float) - x, 1.0)
        return np.where(r >= 1.0, _BELOW_ONE, r)
    r = (y - x) % 1.0
    return _BELOW_ONE if r >= 1.0 else r


def circ_dist(x, y):
    """Metric on R/Z: the smaller of the two oriented gaps.

    Computed from |y - x| so that symmetry holds exactly in floating point.
    """
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        g = np.mod(np.abs(np.asarray(y, dtype=float) - x), 1.0)
        return np.minimum(g, 1.0 - g)
    g = abs(y - x) % 1.0
    return min(g, 1.0 - g)


def arc_midpoint(x, y):
    """Anticlockwise midpoint of the arc [x, y]: x + gap(x, y)/2."""
    return frac(x + 0.5 * gap(x, y))


def in_arc(start, end, p, include_start=True, include_end=True):
    """Membership of p in the anticlockwise arc [start, end] on floats."""
    g_p = gap(start, p)
    g_e = gap(start, end)
    if g_p == 0.0:
        return include_start
    if g_p == g_e:
        return include_end
    return g_p < g_e


@dataclass(frozen=True, order=False)
class CirclePoint:
    """A point of R/Z stored as its canonical representative in [0, 1)."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", frac(float(self.value)))

    def __add__(self, other):
        v = other.value if isinstance(other, CirclePoint) else float(other)
        return CirclePoint(self.value + v)

    __radd__ = __add__

    def __neg__(self):
        return CirclePoint(-self.value)

    def __sub__(self, other):
        v = other.value if isinstance(other, CirclePoint) else float(other)
        return CirclePoint(self.value - v)

    def approx_eq(self, other, tol):
        """Approximate equality at an explicit tolerance (metric distance)."""
        return circ_dist(self.value, _val(other)) <= tol

    def __repr__(self):
        return f"[{self.value!r}]"


def _val(x):
    return x.value if isinstance(x, CirclePoint) else float(x)


def dplus(x, y):
    """Oriented distance from x to y: Lebesgue measure of the arc [x, y]."""
    return gap(_val(x), _val(y))


def dist(x, y):
    """Circle metric min(dplus(x, y), dplus(y, x))."""
    return circ_dist(_val(x), _val(y))


def mfold(x, m):
    """m-fold sum of x under the group law of R/Z."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return CirclePoint(frac(m * _val(x)))


def mth_root(x, m):
    """The unique y with y.value in [0, 1/m) and mfold(y, m) == x.

    The naive value x/m does not always reproduce x exactly under the
    m-fold sum in floating point; nudge by a few ulps when an exact
    preimage exists.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    target = _val(x)
    y = target / m
    if frac(m * y) == target:
        return CirclePoint(y)
    best, best_err = y, abs(circ_dist(frac(m * y), target))
    cand = y
    for _ in range(4):
        cand = math.nextafter(cand, 0.0)
        err = circ_dist(frac(m * cand), target)
        if err < best_err:
            best, best_err = cand, err
        if err == 0.0:
            break
    else:
        cand = y
        for _ in range(4):
            cand = math.nextafter(cand, 1.0)
            if cand * m >= 1.0 and frac(m * cand) != target:
                break
            err = circ_dist(frac(m * cand), target)
            if err < best_err:
                best, best_err = cand, err
            if err == 0.0:
                break
    return CirclePoint(best)


def sector(x, m):
    """Index in {0..m-1} of the arc [i/m, (i+1)/m) containing x."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    s = int(math.floor(m * _val(x)))
    return min(s, m - 1)


@dataclass(frozen=True)
class Arc:
    """Closed anticlockwise arc [start, end]; ``full`` marks the whole circle."""

    start: CirclePoint
    end: CirclePoint
    full: bool = False

    @classmethod
    def whole_circle(cls):
        z = CirclePoint(0.0)
        return cls(z, z, full=True)

    @classmethod
    def of(cls, start, end):
        return cls(CirclePoint(_val(start)), CirclePoint(_val(end)))

    def length(self):
        """Lebesgue measure of the arc."""
        if self.full:
            return 1.0
        return gap(self.start.value, self.end.value)

    def contains(self, p, include_start=True, include_end=True):
        if self.full:
            return True
        return in_arc(self.start.value, self.end.value, _val(p),
                      include_start=include_start, include_end=include_end)

    def midpoint(self):
        if self.full:
            raise ValueError("midpoint of the whole circle is undefined")
        return CirclePoint(arc_midpoint(self.start.value, self.end.value))

    def __repr__(self):
        if self.full:
            return "Arc(whole circle)"
        return f"Arc[{self.start.value!r}, {self.end.value!r}]"


def boundary_points(a):
    """The pair (start, end) bounding the arc; undefined for the whole circle."""
    if a.full:
        raise ValueError("the whole circle has no boundary points")
    return (a.start, a.end)
