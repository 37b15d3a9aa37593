"""Cocycle iteration over finite noise windows and pullback machinery.

A ``NoiseWindow`` is a seeded, finite, two-sided noise realization.  Each
index draws its value from an RNG keyed by (seed, index), so windows with
the same seed but different spans agree on shared indices, and shifted
views are plain re-indexings of the same realization.

Pullback sequences iterate from progressively deeper past (or future)
anchor points; for invariant anchor data the terms approach the random
attractor (repeller) monotonically along the circle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circle import CirclePoint, arc_midpoint, circ_dist, frac, gap, in_arc
from .errors import (GenericityError, PerturbationPreconditionError,
                     PullbackDiagnosticError, UsageError)

__all__ = [
    "NoiseWindow",
    "PullbackSequence",
    "ClusterReport",
    "ContractionReport",
    "cocycle",
    "cocycle_many",
    "pullback_forward",
    "pullback_backward",
    "pullback_grid_clusters",
    "contraction_rate",
    "perturb_sequence",
    "derive_seed_rng",
]

_INDEX_OFFSET = 2 ** 32  # window indices stay well inside +/- 2^31

PULLBACK_TOL = 1e-10
GENERICITY_TOL = 1e-9


def derive_seed_rng(master_seed, *ordinals):
    """Deterministic, platform-stable RNG derived from a seed and ordinals."""
    return _rng_for(master_seed, *ordinals)


def _rng_for(seed, *ordinals):
    return np.random.default_rng([int(seed) & (2 ** 63 - 1),
                                  *(int(o) & (2 ** 63 - 1) for o in ordinals)])


class NoiseWindow:
    """Finite two-sided realization (alpha_i) for i in [lo, hi).

    ``shifted(j)`` returns a view with (theta^j w)_i = w_{i+j}; access
    outside the stored span raises IndexError (never wraps silently).
    """

    def __init__(self, noise, values, lo, seed=None, origin=0):
        self.noise = noise
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != noise.dimension:
            raise UsageError("window values must have shape (span, noise dimension)")
        self.lo = int(lo)          # absolute index of values[0]
        self.origin = int(origin)  # relative index 0 sits at absolute index `origin`
        self.seed = seed

    @classmethod
    def generate(cls, noise, seed, half_width=None, lo=None, hi=None):
        """Sample a window; per-index RNG keying makes spans nest for a seed."""
        if half_width is not None:
            lo, hi = -int(half_width), int(half_width)
        if lo is None or hi is None or hi <= lo:
            raise UsageError("window span is empty")
        lows = np.array([a for a, _ in noise.box])
        highs = np.array([b for _, b in noise.box])
        vals = np.empty((hi - lo, noise.dimension))
        for i in range(lo, hi):
            r = _rng_for(seed, i + _INDEX_OFFSET)
            vals[i - lo] = r.uniform(lows, highs)
        return cls(noise, vals, lo, seed=seed)

    @classmethod
    def from_values(cls, noise, values, lo=0):
        return cls(noise, values, lo)

    @property
    def span(self):
        """Relative index range (lo, hi) valid for this view."""
        return (self.lo - self.origin, self.lo - self.origin + len(self.values))

    def alpha(self, i):
        """Noise value at relative index i."""
        j = i + self.origin - self.lo
        if not (0 <= j < len(self.values)):
            raise IndexError(f"index {i} outside window span {self.span}")
        return self.values[j]

    def shifted(self, j):
        w = NoiseWindow(self.noise, self.values, self.lo, seed=self.seed,
                        origin=self.origin + j)
        return w

    def __repr__(self):
        return f"NoiseWindow(seed={self.seed}, span={self.span})"


def _as_float(x):
    return x.value if isinstance(x, CirclePoint) else float(x)


def cocycle(fam, window, n, x):
    """n-step cocycle map applied to x: composition of the window's maps
    at indices 0..n-1 for n > 0, inverse composition at -1..n for n < 0."""
    wrap = isinstance(x, CirclePoint)
    v = _as_float(x)
    if n >= 0:
        for j in range(n):
            v = fam.eval_float(window.alpha(j), v)
    else:
        for j in range(-1, n - 1, -1):
            v = fam.eval_inverse_float(window.alpha(j), v)
    return CirclePoint(v) if wrap else v


def cocycle_many(fam, window, n, xs):
    """Vectorized cocycle over an array of points."""
    vs = np.asarray(xs, dtype=float)
    if n >= 0:
        for j in range(n):
            vs = fam.eval_many(window.alpha(j), vs)
    else:
        for j in range(-1, n - 1, -1):
            vs = fam.eval_inverse_many(window.alpha(j), vs)
    return vs


@dataclass
class PullbackSequence:
    """Terms of a pullback iteration with its limit estimate and diagnostics."""

    direction: str                 # "forward" | "backward"
    terms: np.ndarray              # terms[n], n = 0..n_max
    limit: float
    converged: bool
    achieved_gap: float
    monotone: bool
    orientation: int               # +1 anticlockwise, -1 clockwise, 0 undetermined
    anchor_index: int | None = None

    @property
    def limit_point(self):
        return CirclePoint(self.limit)

    def rows(self):
        """CSV rows (n, value, gap-to-limit)."""
        return [(n, float(t), float(circ_dist(t, self.limit)))
                for n, t in enumerate(self.terms)]


def _monotone_check(terms, limit):
    """Detect monotone approach along the circle in either orientation."""
    acw = all(gap(terms[n], terms[n + 1]) <= gap(terms[n], limit)
              for n in range(len(terms) - 1))
    if acw:
        return True, 1
    cw = all(gap(limit, terms[n + 1]) <= gap(limit, terms[n])
             and gap(terms[n + 1], terms[n]) <= gap(terms[n + 1], limit)
             for n in range(len(terms) - 1))
    if cw:
        return True, -1
    return False, 0


def _finish_sequence(terms, direction, tol, strict, anchor_index):
    terms = np.asarray(terms, dtype=float)
    limit = float(terms[-1])
    achieved = 0.0
    for t in terms[-2::-1]:
        if t != limit:
            achieved = float(circ_dist(t, limit))
            break
    converged = len(terms) > 1 and achieved < tol
    monotone, orientation = _monotone_check(terms, limit)
    if strict and not monotone:
        raise PullbackDiagnosticError(
            "pullback terms are not monotone; anchor data is wrong or the "
            "input is not invariant")
    return PullbackSequence(direction=direction, terms=terms, limit=limit,
                            converged=converged, achieved_gap=achieved,
                            monotone=monotone, orientation=orientation,
                            anchor_index=anchor_index)


def pullback_forward(fam, window, x_of_index, n_max, tol=PULLBACK_TOL,
                     strict=False, anchor_index=None):
    """Terms phi(n, theta^{-n} w)(x(-n)) for n = 0..n_max.

    ``x_of_index`` maps a window index (-n_max..0) to a start point.
    The limit estimate is the last term; ``converged`` compares the last
    two distinct terms against ``tol``.  With ``strict`` a non-monotone
    sequence raises instead of being flagged.
    """
    anchors = [_as_float(x_of_index(-n)) for n in range(n_max + 1)]
    active = np.empty(0)
    for t in range(-n_max, 0):
        active = np.append(active, anchors[-t])
        active = fam.eval_many(window.alpha(t), active)
    terms = np.concatenate([[anchors[0]], active[::-1]]) if n_max else np.array([anchors[0]])
    return _finish_sequence(terms, "forward", tol, strict, anchor_index)


def pullback_backward(fam, window, x_of_index, n_max, tol=PULLBACK_TOL,
                      strict=False, anchor_index=None):
    """Terms phi(-n, theta^{n} w)(x(n)) for n = 0..n_max (repeller side)."""
    anchors = [_as_float(x_of_index(n)) for n in range(n_max + 1)]
    active = np.empty(0)
    for t in range(n_max - 1, -1, -1):
        active = np.append(active, anchors[t + 1])
        active = fam.eval_inverse_many(window.alpha(t), active)
    terms = np.concatenate([[anchors[0]], active[::-1]]) if n_max else np.array([anchors[0]])
    return _finish_sequence(terms, "backward", tol, strict, anchor_index)


@dataclass
class ClusterReport:
    """Clusters of a pushed grid: centers, diameters, and the gap rule used."""

    centers: list
    diameters: list
    grid_size: int
    n_steps: int
    threshold: float

    @property
    def max_diameter(self):
        return max(self.diameters) if self.diameters else 0.0

    def rows(self):
        return [(i, c, d) for i, (c, d) in enumerate(zip(self.centers, self.diameters))]


def cluster_circle_points(points, threshold):
    """Group sorted circle points into clusters split at gaps > threshold."""
    pts = np.sort(frac(np.asarray(points, dtype=float)))
    n = len(pts)
    if n == 0:
        return []
    gaps = frac(np.roll(pts, -1) - pts)  # gap after each sorted point
    breaks = np.nonzero(gaps > threshold)[0]
    if len(breaks) == 0:
        # single cluster covering everything; center at circular midpoint of
        # the largest gap's complement
        widest = int(np.argmax(gaps))
        start = pts[(widest + 1) % n]
        end = pts[widest]
        return [(arc_midpoint(start, end), gap(start, end))]
    clusters = []
    for b_prev, b in zip(np.roll(breaks, 1), breaks):
        start = pts[(b_prev + 1) % n]
        end = pts[b]
        clusters.append((arc_midpoint(start, end), gap(start, end)))
    clusters.sort(key=lambda cd: cd[0])
    return clusters


def pullback_grid_clusters(fam, window, grid_size, n_max, threshold=None):
    """Push a uniform grid through the pullback and cluster the image.

    The cluster count is data: a synchronizing system collapses to one
    cluster per attractor point, an isometry keeps the grid spread out.
    """
    if grid_size < 8:
        raise UsageError("grid_size must be at least 8")
    if threshold is None:
        threshold = 1.0 / (4.0 * grid_size)
    xs = (np.arange(grid_size) + 0.5) / grid_size
    active = xs.copy()
    for t in range(-n_max, 0):
        active = fam.eval_many(window.alpha(t), active)
    clusters = cluster_circle_points(active, threshold)
    return ClusterReport(centers=[c for c, _ in clusters],
                         diameters=[d for _, d in clusters],
                         grid_size=grid_size, n_steps=n_max, threshold=threshold)


@dataclass
class ContractionReport:
    rate: float
    diameters: np.ndarray
    n_fitted: int
    repeller_estimate: float


def contraction_rate(fam, window, n_max, exclusion_radius=0.05, grid=64):
    """Least-squares slope of log(arc diameter) under forward iteration.

    The iterated arc is the complement of an ``exclusion_radius``
    neighbourhood of a backward-pullback repeller estimate.  Negative for
    contractive families, ~0 for rigid rotations.
    """
    pts = (np.arange(grid) + 0.5) / grid
    back = pts.copy()
    for t in range(n_max - 1, -1, -1):
        back = fam.eval_inverse_many(window.alpha(t), back)
    clusters = cluster_circle_points(back, 1.0 / (4.0 * grid))
    # use the most populated region: the cluster with the smallest diameter
    r_hat = min(clusters, key=lambda cd: cd[1])[0]

    e1 = frac(r_hat + exclusion_radius)
    e2 = frac(r_hat - exclusion_radius)
    diams = np.empty(n_max + 1)
    diams[0] = gap(e1, e2)
    for n in range(n_max):
        alpha = window.alpha(n)
        e1 = fam.eval_float(alpha, e1)
        e2 = fam.eval_float(alpha, e2)
        diams[n + 1] = gap(e1, e2)
    clamped = np.maximum(diams, 1e-15)
    cut = np.nonzero(diams <= 1e-15)[0]
    n_fit = int(cut[0]) + 1 if len(cut) else len(diams)
    ns = np.arange(n_fit)
    slope = float(np.polyfit(ns, np.log(clamped[:n_fit]), 1)[0]) if n_fit > 1 else 0.0
    return ContractionReport(rate=slope, diameters=diams, n_fitted=n_fit,
                             repeller_estimate=r_hat)


def perturb_sequence(maps, xs, direction="anticlockwise",
                     genericity_tol=GENERICITY_TOL, attractors=None,
                     require_generic=True):
    """Strictness-restoring midpoint perturbation of an anchor sequence.

    ``maps[n]`` sends index n to n+1; ``len(maps) == len(xs) - 1``.  An
    index n is generic when maps[n](xs[n]) differs from xs[n+1] by more
    than ``genericity_tol``; generic anchors are kept, the rest move to
    the midpoint between the anchor and the image of the previous output.
    The leftmost index is treated as generic (the window truncates an
    unbounded-below construction).

    When ``attractors`` is given, the one-step hypothesis (each image must
    land between the next anchor and its attractor) is checked and a
    violation names the offending index.
    """
    xs = [_as_float(x) for x in xs]
    m = len(xs)
    if len(maps) != m - 1:
        raise UsageError("need exactly len(xs) - 1 maps")
    if direction not in ("anticlockwise", "clockwise"):
        raise UsageError("direction must be 'anticlockwise' or 'clockwise'")
    acw = direction == "anticlockwise"

    images = [maps[n](xs[n]) for n in range(m - 1)]
    if attractors is not None:
        hypo_tol = 1e-9
        for n in range(m - 1):
            a = _as_float(attractors[n + 1])
            if acw:
                ok = in_arc(frac(xs[n + 1] - hypo_tol), a, images[n])
            else:
                ok = in_arc(a, frac(xs[n + 1] + hypo_tol), images[n])
            if not ok:
                raise PerturbationPreconditionError(n)

    generic = [n == 0 or (n < m - 1 and circ_dist(images[n], xs[n + 1]) > genericity_tol)
               for n in range(m)]
    if require_generic and not any(
            circ_dist(images[n], xs[n + 1]) > genericity_tol for n in range(m - 1)):
        raise GenericityError(
            "every step maps the anchors exactly; the family looks degenerate "
            "on this window")

    ys = [0.0] * m
    ys[0] = xs[0]
    for n in range(1, m):
        if generic[n]:
            ys[n] = xs[n]
        else:
            prev_image = maps[n - 1](ys[n - 1])
            if acw:
                ys[n] = arc_midpoint(xs[n], prev_image)
            else:
                ys[n] = arc_midpoint(prev_image, xs[n])
    return np.asarray(ys)
