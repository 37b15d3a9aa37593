"""Explicit construction of the random conjugacy to the canonical target,
conjugation residuals, and the coupled-attractor deterministic-conjugacy test.

The conjugacy map for one noise realization is assembled from strictly
monotone two-sided anchor sequences: perturbed boundary anchors pushed
through the cocycle accumulate onto the attractor forward and the repeller
backward, and each pullback interval is mapped onto the matching orbit
interval of the target map by an equivariant chart.  The map is stored as
monotone piecewise-linear nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import CirclePoint, arc_midpoint, circ_dist, frac, gap
from .dynamics import NoiseWindow, derive_seed_rng, perturb_sequence
from .errors import (ConjugacyConstructionError, GenericityError, NumericError,
                     UsageError)
from .family import canonical, factor
from .structure import AntonovCase

__all__ = [
    "PiecewiseCircleMap",
    "CircleCurve",
    "AnchorSequences",
    "ConjugacyMaps",
    "ConjugacyReport",
    "GraphTestResult",
    "LiftResult",
    "anchor_sequences",
    "build_conjugacy",
    "conjugation_residual",
    "coupled_attractor_graph",
    "graph_homeomorphism_test",
    "lift_factor_conjugacy",
]

RESET_SLACK = 1e-6
GENERICITY_TOL = 1e-9
ANCHOR_MARGIN_BINS = 8


class PiecewiseCircleMap:
    """Orientation-preserving circle homeomorphism given by monotone nodes.

    Nodes (x_j, y_j) are strictly anticlockwise-increasing in both
    coordinates; evaluation interpolates linearly between lifts.
    """

    def __init__(self, xs, ys):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if len(xs) < 2 or len(xs) != len(ys):
            raise ConjugacyConstructionError("need at least two nodes")
        order = np.argsort(xs)
        xs, ys = xs[order], ys[order]
        xgaps = frac(np.roll(xs, -1) - xs)
        ygaps = frac(np.roll(ys, -1) - ys)
        if np.any(xgaps <= 0.0) or np.any(ygaps <= 0.0):
            raise ConjugacyConstructionError(
                "nodes are not strictly monotone; increase n_max")
        if not (abs(xgaps.sum() - 1.0) < 1e-6 and abs(ygaps.sum() - 1.0) < 1e-6):
            raise ConjugacyConstructionError(
                "nodes wind more than once around the circle; increase n_max")
        self._xs = np.concatenate([xs, [xs[0] + 1.0]])
        ylift = np.concatenate([[ys[0]], ys[0] + np.cumsum(ygaps)])
        self._ys = ylift

    @property
    def node_count(self):
        return len(self._xs) - 1

    def nodes(self):
        return [(float(x), float(frac(y)))
                for x, y in zip(self._xs[:-1], self._ys[:-1])]

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        q = np.where(xs < self._xs[0], xs + 1.0, xs)
        return frac(np.interp(q, self._xs, self._ys))

    def eval_float(self, x):
        return float(self.eval_many(np.asarray([x]))[0])

    def __call__(self, p):
        if isinstance(p, CirclePoint):
            return CirclePoint(self.eval_float(p.value))
        return self.eval_float(p)

    def inverse_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        y0 = frac(self._ys[0])
        q = frac(ys - y0) + self._ys[0]
        return frac(np.interp(q, self._ys, self._xs))

    def inverse_float(self, y):
        return float(self.inverse_many(np.asarray([y]))[0])


@dataclass
class CircleCurve:
    """A circle homeomorphism of either orientation, stored through an
    orientation-preserving piecewise map (mirrored for orientation -1)."""

    orientation: int
    pos_map: PiecewiseCircleMap

    def eval_many(self, xs):
        out = self.pos_map.eval_many(xs)
        return out if self.orientation > 0 else frac(-out)

    def eval_float(self, x):
        return float(self.eval_many(np.asarray([x]))[0])

    def inverse_many(self, ys):
        ys = np.asarray(ys, dtype=float)
        q = ys if self.orientation > 0 else frac(-ys)
        return self.pos_map.inverse_many(q)

    def inverse_float(self, y):
        return float(self.inverse_many(np.asarray([y]))[0])


# -- anchor machinery ----------------------------------------------------------


@dataclass
class AnchorSequences:
    """Strict two-sided anchor sequences with attractor/repeller estimates."""

    case: str                   # "components" | "contractive"
    k: int
    l: int
    depth: int
    u_terms: np.ndarray         # shape (k, 2*depth+1); index depth+n holds n-term
    v_terms: np.ndarray
    a: np.ndarray               # attractor estimates at shift 0, shape (k,)
    r: np.ndarray               # repeller estimates, r[i] between G_i and G_{i+1}
    t_lo: int
    t_hi: int
    u_paths: np.ndarray         # perturbed anchor paths per family index
    v_paths: np.ndarray
    u_raw_paths: np.ndarray
    v_raw_paths: np.ndarray
    a_orbits: np.ndarray        # shape (k, T)
    r_orbits: np.ndarray
    epsilon: float | None = None

    def u_term(self, i, n):
        return CirclePoint(self.u_terms[i, self.depth + n])

    def v_term(self, i, n):
        return CirclePoint(self.v_terms[i, self.depth + n])


def _require_span(window, t_lo, t_hi, pad=8):
    lo, hi = window.span
    if lo > t_lo - pad or hi - 1 < t_hi + pad:
        raise ConjugacyConstructionError(
            f"window span {window.span} too short for anchor range "
            f"[{t_lo}, {t_hi}] plus warmup; widen the window or increase n_max")


def _attractor_orbits(fam, window, k, l, seeds, t_lo, t_hi):
    """Forward orbits tracking one attractor point per component.

    seeds[j] must lie in component j's basin at the window's left edge.
    Returns shape (k, t_hi - t_lo + 1); values at time t are exact forward
    orbits, accurate as attractor estimates after the warmup from the edge.
    """
    lo, _ = window.span
    out = np.empty((k, t_hi - t_lo + 1))
    cur = np.asarray(seeds, dtype=float)
    idx = (np.arange(k) + l) % k
    for t in range(lo, t_hi + 1):
        if t >= t_lo:
            out[:, t - t_lo] = cur
        if t == t_hi:
            break
        nxt = fam.eval_many(window.alpha(t), cur)
        rot = np.empty_like(nxt)
        rot[idx] = nxt
        cur = rot
    return out


def _repeller_orbits(fam, window, k, l, seeds, t_lo, t_hi):
    """Backward orbits tracking one repeller point per gap (r_j in H_j)."""
    _, hi = window.span
    out = np.empty((k, t_hi - t_lo + 1))
    cur = np.asarray(seeds, dtype=float)
    idx = (np.arange(k) + l) % k
    for t in range(hi - 1, t_lo - 1, -1):
        if t <= t_hi:
            out[:, t - t_lo] = cur
        if t == t_lo:
            break
        cur = fam.eval_inverse_many(window.alpha(t - 1), cur[idx])
    return out


def _two_sided_push(fam, window, path, t_lo, s, depth):
    """terms[depth+n] = phi(n, theta^{s-n} w)(path(s-n)) for n in [-depth, depth]."""
    terms = np.empty(2 * depth + 1)
    vals = np.empty(0)
    for t in range(s - depth, s):
        vals = np.append(vals, path[t - t_lo])
        vals = fam.eval_many(window.alpha(t), vals)
    for i, v in enumerate(vals):
        terms[depth + (depth - i)] = v
    terms[depth] = path[s - t_lo]
    vals = np.empty(0)
    for t in range(s + depth, s, -1):
        vals = np.append(vals, path[t - t_lo])
        vals = fam.eval_inverse_many(window.alpha(t - 1), vals)
    for i, v in enumerate(vals):
        terms[depth - (depth - i)] = v
    return terms


def _component_anchor_values(structure, side):
    """Boundary anchors dilated slightly into the gaps, where the one-step
    image provably stays ahead of the rotated anchor for every noise value."""
    comps = structure.components
    k = len(comps)
    n_bins = max(structure.n_bins, 256)
    anchors = np.empty(k)
    for i in range(k):
        if side == "u":
            g = gap(comps[(i - 1) % k].end.value, comps[i].start.value)
            margin = min(ANCHOR_MARGIN_BINS / n_bins, g / 8.0)
            anchors[i] = frac(comps[i].start.value - margin)
        else:
            g = gap(comps[i].end.value, comps[(i + 1) % k].start.value)
            margin = min(ANCHOR_MARGIN_BINS / n_bins, g / 8.0)
            anchors[i] = frac(comps[i].end.value + margin)
    return anchors


def _estimate_epsilon(fam, seed, n_probe=32, probe_half_width=160):
    """Half the median separation between repeller and attractor at time 0
    over independent probe windows."""
    seps = []
    for j in range(n_probe):
        w = NoiseWindow.generate(fam.noise, _probe_seed(seed, j),
                                 half_width=probe_half_width)
        a = _attractor_orbits(fam, w, 1, 0, [0.25], 0, 0)[0, 0]
        r = _repeller_orbits(fam, w, 1, 0, [0.75], 0, 0)[0, 0]
        seps.append(gap(r, a))
    return 0.5 * float(np.median(seps))


def _probe_seed(seed, j):
    return (int(seed or 0) * 9_999_991 + 31_000 + j) & (2 ** 63 - 1)


def _contractive_anchor_path(fam, window, a_ext, r_path, t_lo, t_hi, ext_hi,
                             epsilon, side, reset_slack=RESET_SLACK):
    """Anchor path for a whole-circle contractive family.

    Candidates are backward images of points at distance epsilon from the
    attractor orbit; the chosen path follows the exact forward orbit of
    the winning candidate and resets only when a candidate is farther from
    the attractor by at least ``reset_slack`` (keeping the one-step
    monotonicity exact in floating point).
    """
    T = t_hi - t_lo + 1
    raw = np.empty(T)
    cands = np.empty(0)
    for t in range(ext_hi, t_lo - 1, -1):
        if len(cands):
            cands = fam.eval_inverse_many(window.alpha(t), cands)
        seed_pt = frac(a_ext[t - t_lo] - epsilon) if side == "u" \
            else frac(a_ext[t - t_lo] + epsilon)
        cands = np.concatenate([[seed_pt], cands])
        if len(cands) > 768:  # deepest candidates drift to the repeller anyway
            cands = cands[:768]
        if t <= t_hi:
            a_t = a_ext[t - t_lo]
            d = gap(cands, a_t) if side == "u" else gap(a_t, cands)
            raw[t - t_lo] = cands[int(np.argmin(d))]

    path = np.empty(T)
    path[0] = raw[0]
    for t in range(t_lo, t_hi):
        i = t - t_lo
        c = fam.eval_float(window.alpha(t), path[i])
        a1 = a_ext[i + 1]
        r1 = r_path[i + 1]
        if side == "u":
            better = gap(raw[i + 1], a1) >= gap(c, a1) + reset_slack
            inside = gap(r1, a1) > gap(raw[i + 1], a1)
        else:
            better = gap(a1, raw[i + 1]) >= gap(a1, c) + reset_slack
            inside = gap(a1, r1) > gap(a1, raw[i + 1])
        path[i + 1] = raw[i + 1] if (better and inside) else c
    return raw, path


def anchor_sequences(fam, structure, window, n_max, seed=None,
                     genericity_tol=GENERICITY_TOL):
    """Strictly monotone two-sided pullback sequences per component, with
    the attractor and repeller points they converge to.

    For a family with a proper minimal-set union the anchors are the
    dilated component boundaries; for a whole-circle contractive family
    they come from backward intersections of attractor neighbourhoods.
    Perturbation makes the pushed sequences strictly monotone; a window on
    which every step maps the anchors exactly raises ``GenericityError``.
    """
    depth = int(n_max)
    t_lo, t_hi = -(depth + 1), depth + 1
    _require_span(window, t_lo, t_hi)
    lo, hi = window.span
    seed = window.seed if seed is None else seed

    if structure.whole_circle:
        if structure.antonov_case == AntonovCase.ROTATION:
            raise UsageError("rotation families admit no contraction anchors")
        if structure.symmetry_order != 1:
            raise UsageError(
                "anchor construction requires a symmetry-free family; factor "
                "out the symmetry first")
        k, l = 1, 0
        ext_hi = hi - 2  # candidate pool uses the full window depth
        a_orbit = _attractor_orbits(fam, window, 1, 0, [0.25], t_lo, ext_hi)
        r_orbit = _repeller_orbits(fam, window, 1, 0, [0.75], t_lo, t_hi)
        epsilon = _estimate_epsilon(fam, seed or 0)
        a_ext = a_orbit[0]
        u_raw, u_path = _contractive_anchor_path(
            fam, window, a_ext, r_orbit[0], t_lo, t_hi, ext_hi, epsilon, "u")
        v_raw, v_path = _contractive_anchor_path(
            fam, window, a_ext, r_orbit[0], t_lo, t_hi, ext_hi, epsilon, "v")
        u_raws = u_raw[None, :]
        v_raws = v_raw[None, :]
        a_orbits = a_orbit[:, :t_hi - t_lo + 1]
        r_orbits = r_orbit
        case = "contractive"
        u_paths_raw_for_perturb = [u_path]
        v_paths_raw_for_perturb = [v_path]
    else:
        k, l = structure.k, structure.l
        bounds_u = _component_anchor_values(structure, "u")
        bounds_v = _component_anchor_values(structure, "v")
        seeds_a = [c.midpoint().value for c in structure.components]
        seeds_r = [arc_midpoint(structure.components[i].end.value,
                                structure.components[(i + 1) % k].start.value)
                   for i in range(k)]
        a_orbits = _attractor_orbits(fam, window, k, l, seeds_a, t_lo, t_hi)
        r_orbits = _repeller_orbits(fam, window, k, l, seeds_r, t_lo, t_hi)
        epsilon = None
        T = t_hi - t_lo + 1
        ts = np.arange(t_lo, t_hi + 1)
        u_raws = np.empty((k, T))
        v_raws = np.empty((k, T))
        for i in range(k):
            u_raws[i] = bounds_u[(i + ts * l) % k]
            v_raws[i] = bounds_v[(i + ts * l) % k]
        case = "components"
        u_paths_raw_for_perturb = list(u_raws)
        v_paths_raw_for_perturb = list(v_raws)

    maps = [(lambda t: (lambda x: fam.eval_float(window.alpha(t), x)))(t)
            for t in range(t_lo, t_hi)]
    u_paths = np.empty((k, t_hi - t_lo + 1))
    v_paths = np.empty((k, t_hi - t_lo + 1))
    for i in range(k):
        u_paths[i] = perturb_sequence(maps, u_paths_raw_for_perturb[i],
                                      "anticlockwise", genericity_tol)
        v_paths[i] = perturb_sequence(maps, v_paths_raw_for_perturb[i],
                                      "clockwise", genericity_tol)

    u_terms = np.empty((k, 2 * depth + 1))
    v_terms = np.empty((k, 2 * depth + 1))
    for i in range(k):
        u_terms[i] = _two_sided_push(fam, window, u_paths[i], t_lo, 0, depth)
        v_terms[i] = _two_sided_push(fam, window, v_paths[i], t_lo, 0, depth)

    return AnchorSequences(
        case=case, k=k, l=l, depth=depth,
        u_terms=u_terms, v_terms=v_terms,
        a=a_orbits[:, -t_lo], r=r_orbits[:, -t_lo],
        t_lo=t_lo, t_hi=t_hi,
        u_paths=u_paths, v_paths=v_paths,
        u_raw_paths=u_raws, v_raw_paths=v_raws,
        a_orbits=a_orbits[:, :t_hi - t_lo + 1], r_orbits=r_orbits,
        epsilon=epsilon)


# -- conjugacy construction ------------------------------------------------------


@dataclass
class ConjugacyMaps:
    h0: PiecewiseCircleMap
    h1: PiecewiseCircleMap
    anchors: AnchorSequences
    k: int
    l: int
    n_h: int
    notes: list = field(default_factory=list)


@dataclass
class ConjugacyReport:
    target_k: int
    target_l: int
    seed: int
    half_width: int
    n_h: int
    node_count: int
    residual_sup: float
    residual_trend: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "target": {"k": self.target_k, "l": self.target_l},
            "window": {"seed": self.seed, "half_width": self.half_width},
            "n_h": self.n_h,
            "node_count": self.node_count,
            "residual_sup": self.residual_sup,
            "residual_trend": [[n, r] for n, r in self.residual_trend],
        }


def _g_push(k, l, ys, n):
    """Apply the canonical (k, l) target map n times (inverse for n < 0)."""
    g = canonical(k, l)
    ys = np.asarray(ys, dtype=float)
    alpha = np.zeros(1)
    if n >= 0:
        for _ in range(n):
            ys = g.eval_many(alpha, ys)
    else:
        for _ in range(-n):
            ys = g.eval_inverse_many(alpha, ys)
    return ys


def _g_orbit(k, l, y0, depth):
    """orbit[depth+n] = n-th iterate of y0 under the canonical (k, l) map."""
    orbit = np.empty(2 * depth + 1)
    orbit[depth] = y0
    y = np.asarray([y0])
    g = canonical(k, l)
    alpha = np.zeros(1)
    for n in range(1, depth + 1):
        y = g.eval_many(alpha, y)
        orbit[depth + n] = y[0]
    y = np.asarray([y0])
    for n in range(1, depth + 1):
        y = g.eval_inverse_many(alpha, y)
        orbit[depth - n] = y[0]
    return orbit


def _batch_pull(fam, window, pts, depths, s):
    """phi(-d, theta^s w) per point: pull back d steps ending at time s - d.

    Negative depths push forward |d| steps instead."""
    vals = np.asarray(pts, dtype=float).copy()
    depths = np.asarray(depths)
    max_back = int(depths.max(initial=0))
    for d in range(1, max_back + 1):
        sel = depths >= d
        vals[sel] = fam.eval_inverse_many(window.alpha(s - d), vals[sel])
    max_fwd = int((-depths).max(initial=0))
    for d in range(1, max_fwd + 1):
        sel = depths <= -d
        vals[sel] = fam.eval_many(window.alpha(s + d - 1), vals[sel])
    return vals


def _batch_g(k, l, ys, depths):
    ys = np.asarray(ys, dtype=float).copy()
    depths = np.asarray(depths)
    g = canonical(k, l)
    alpha = np.zeros(1)
    max_fwd = int(depths.max(initial=0))
    for d in range(1, max_fwd + 1):
        sel = depths >= d
        ys[sel] = g.eval_many(alpha, ys[sel])
    max_back = int((-depths).max(initial=0))
    for d in range(1, max_back + 1):
        sel = depths <= -d
        ys[sel] = g.eval_inverse_many(alpha, ys[sel])
    return ys


def _interval_interiors(fam, window, anchors, s, i_path, j, n, n_subdiv,
                        side, terms, probe_factor=6):
    """Interior node candidates for one pullback interval at shift s.

    The interval chart is probed on a fine uniform grid and ``n_subdiv``
    interior nodes are kept at equal chordal-arclength quantiles, which
    concentrates nodes where the chart is steep or flat (near critical
    points of the underlying maps).
    """
    k, l = anchors.k, anchors.l
    depth = anchors.depth
    if side == "u":
        x_lo = terms[depth + n]
        x_hi = terms[depth + n + 1]
    else:
        x_lo = terms[depth + n + 1]
        x_hi = terms[depth + n]
    width = gap(x_lo, x_hi)
    if width <= 0.0 or width < 16 * np.finfo(float).eps:
        return [], []
    n_probe = probe_factor * n_subdiv
    fracs = (np.arange(1, n_probe + 1)) / (n_probe + 1)
    xs = frac(x_lo + fracs * width)
    t_prime = s - n
    jp = (j - n * l) % k
    path = anchors.u_paths[i_path] if side == "u" else anchors.v_paths[i_path]
    e_anchor = path[t_prime - anchors.t_lo]
    e_next = fam.eval_float(window.alpha(t_prime - 1),
                            path[t_prime - 1 - anchors.t_lo])
    c_base = (4 * jp + 1) / (4.0 * k) if side == "u" else (4 * jp + 3) / (4.0 * k)
    g_c = _g_push(k, 0, [c_base], 1)[0]
    w = _batch_pull(fam, window, xs, np.full(len(xs), n), s)
    if side == "u":
        lo_x, hi_x = e_anchor, e_next
        lo_y, hi_y = c_base, g_c
    else:
        lo_x, hi_x = e_next, e_anchor
        lo_y, hi_y = g_c, c_base
    denom = gap(lo_x, hi_x)
    if denom <= 0.0:
        return [], []
    t_fracs = np.clip(gap(lo_x, w) / denom, 0.0, 1.0)
    y_base = frac(lo_y + t_fracs * gap(lo_y, hi_y))
    ys = _batch_g(k, l, y_base, np.full(len(xs), n))

    # keep n_subdiv probes at equal chordal-arclength quantiles
    dx = gap(np.concatenate([[x_lo], xs]), np.concatenate([xs, [x_hi]]))
    dy_all = np.minimum(circ_dist(np.concatenate([[ys[0]], ys]),
                                  np.concatenate([ys, [ys[-1]]])), 0.5)
    arc = np.cumsum(dx[:-1] + dy_all[:-1])
    if arc[-1] <= 0.0:
        return [], []
    targets = (np.arange(1, n_subdiv + 1)) / (n_subdiv + 1) * arc[-1]
    idx = np.unique(np.searchsorted(arc, targets))
    idx = idx[idx < len(xs)]
    return list(xs[idx]), list(ys[idx])


def _filter_nodes(main_nodes, interior_nodes):
    """Keep a strictly double-monotone node set.

    Stage 1 walks the pinned/main candidates, dropping float-saturated
    duplicates and raising on genuine order inversions.  Stage 2 inserts
    interior candidates where they fit strictly between kept neighbours.
    """
    main = sorted(main_nodes, key=lambda t: t[0])
    if len(main) < 2:
        raise ConjugacyConstructionError("too few anchor nodes; increase n_max")
    kept = [main[0]]
    for x, y in main[1:]:
        px, py = kept[-1]
        gx, gy = gap(px, x), gap(py, y)
        if gx == 0.0 or gy == 0.0:
            continue
        if gx > 0.5 or gy > 0.5:
            raise ConjugacyConstructionError(
                "node ordering violation: anchor sequences insufficiently "
                "converged; increase n_max")
        kept.append((x, y))
    wx, wy = gap(kept[-1][0], kept[0][0]), gap(kept[-1][1], kept[0][1])
    if wx == 0.0 or wy == 0.0:
        kept.pop()
    xs = [x for x, _ in kept]
    ys = [y for _, y in kept]

    extra_x, extra_y = [], []
    for x, y in sorted(interior_nodes, key=lambda t: t[0]):
        j = np.searchsorted(xs, x)
        a = (j - 1) % len(xs)
        b = j % len(xs)
        if gap(xs[a], x) <= 0 or gap(x, xs[b]) <= 0:
            continue
        if gap(ys[a], y) <= 0 or gap(y, ys[b]) <= 0:
            continue
        if gap(ys[a], y) >= gap(ys[a], ys[b]):
            continue
        xs.insert(j, x)
        ys.insert(j, y)
    return xs, ys


def build_conjugacy(fam, structure, window, n_h, n_subdiv=8, seed=None):
    """Construct the conjugating maps h for the window's realization and its
    shift, sending the family to the canonical (k, l) target.

    Anchor pullback terms are pinned to the matching orbit of the target,
    attractors to the target's attracting points and repellers to its
    repelling points; interval interiors are filled by the equivariant
    pushforward of a linear base chart.
    """
    if structure.whole_circle and structure.symmetry_order != 1:
        raise ConjugacyConstructionError(
            "the construction requires a symmetry-free family when the whole "
            "circle is minimal")
    anchors = anchor_sequences(fam, structure, window, n_h + 1, seed=seed)
    k, l = anchors.k, anchors.l
    depth = anchors.depth

    gu_orbits = [_g_orbit(k, 0, (4 * j + 1) / (4.0 * k), depth) for j in range(k)]
    gv_orbits = [_g_orbit(k, 0, (4 * j + 3) / (4.0 * k), depth) for j in range(k)]

    maps = []
    notes = []
    for s in (0, 1):
        main, interior = [], []
        for j in range(k):
            i_path = (j - s * l) % k
            u_terms = (anchors.u_terms[j] if s == 0 else
                       _two_sided_push(fam, window, anchors.u_paths[i_path],
                                       anchors.t_lo, s, depth))
            v_terms = (anchors.v_terms[j] if s == 0 else
                       _two_sided_push(fam, window, anchors.v_paths[i_path],
                                       anchors.t_lo, s, depth))
            a_j = anchors.a_orbits[j, s - anchors.t_lo]
            r_j = anchors.r_orbits[j, s - anchors.t_lo]
            main.append((a_j, frac((2 * j + 1) / (2.0 * k))))
            main.append((r_j, frac((j + 1) / float(k))))
            for n in range(-n_h, n_h + 1):
                main.append((u_terms[depth + n], gu_orbits[j][depth + n]))
                main.append((v_terms[depth + n], gv_orbits[j][depth + n]))
            for n in range(-n_h, n_h):
                xs_u, ys_u = _interval_interiors(
                    fam, window, anchors, s, i_path, j, n, n_subdiv, "u", u_terms)
                xs_v, ys_v = _interval_interiors(
                    fam, window, anchors, s, i_path, j, n, n_subdiv, "v", v_terms)
                interior.extend(zip(xs_u, ys_u))
                interior.extend(zip(xs_v, ys_v))
        xs, ys = _filter_nodes(main, interior)
        maps.append(PiecewiseCircleMap(xs, ys))

    return ConjugacyMaps(h0=maps[0], h1=maps[1], anchors=anchors, k=k, l=l,
                         n_h=n_h, notes=notes)


def conjugation_residual(fam, target, window, h_at_0, h_at_1, grid):
    """Sup over a grid of the defect of h1 o f_alpha0 = g o h0.

    ``target`` is the comparison family; its step map at index 0 is used
    (for the canonical target the noise value is irrelevant).
    """
    xs = (np.arange(grid) + 0.5) / grid
    alpha0 = window.alpha(0)
    if target.degenerate:
        alpha_g = np.zeros(target.noise.dimension)
    elif target.noise == fam.noise:
        alpha_g = alpha0
    else:
        raise UsageError("residual target must share the noise model or be a "
                         "noise-free target")
    lhs = h_at_1.eval_many(fam.eval_many(alpha0, xs))
    rhs = target.eval_many(alpha_g, h_at_0.eval_many(xs))
    return float(np.max(circ_dist(lhs, rhs)))


# -- coupled attractor graph -----------------------------------------------------


@dataclass
class CloudReport:
    points: np.ndarray          # shape (n, 2)
    skipped: int
    n_windows: int
    n_pull: int

    def rows(self):
        return [(float(x), float(y)) for x, y in self.points]


def coupled_attractor_graph(fam_f, fam_g, m, n_windows, n_pull, seed=0,
                            collapse_tol=1e-8, n_probe_points=4, threads=1):
    """Paired factor-attractor positions over shared noise windows.

    Both families are factored by the symmetry order m; for each window the
    attractor of each factor system is estimated by a pullback grid
    collapse.  Windows that fail to collapse are skipped and counted.
    """
    if fam_f.noise != fam_g.noise:
        raise UsageError("families must share a noise model")
    F = factor(fam_f, m)
    G = factor(fam_g, m)
    probe = (np.arange(n_probe_points) + 0.5) / n_probe_points

    def one(j):
        w = NoiseWindow.generate(fam_f.noise, _graph_seed(seed, j),
                                 lo=-n_pull, hi=1)
        out = []
        for fam in (F, G):
            pts = probe.copy()
            for t in range(-n_pull, 0):
                pts = fam.eval_many(w.alpha(t), pts)
            srt = np.sort(pts)
            gaps = frac(np.roll(srt, -1) - srt)
            widest = int(np.argmax(gaps))
            diam = 1.0 - gaps[widest] if gaps[widest] > 0.0 else 0.0
            if diam > collapse_tol:
                return None
            out.append(arc_midpoint(srt[(widest + 1) % len(srt)], srt[widest]))
        return tuple(out)

    results = []
    if threads and threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, range(n_windows)))
    else:
        results = [one(j) for j in range(n_windows)]
    pts = [p for p in results if p is not None]
    return CloudReport(points=np.asarray(pts, dtype=float).reshape(-1, 2),
                       skipped=n_windows - len(pts),
                       n_windows=n_windows, n_pull=n_pull)


def _graph_seed(seed, j):
    return (int(seed) * 7_654_321 + 191_000 + j) & (2 ** 63 - 1)


@dataclass
class GraphTestResult:
    is_curve: bool
    orientation: int
    curve: CircleCurve | None
    max_spread: float
    n_points: int
    reason: str = ""

    def to_json_dict(self):
        return {"is_curve": self.is_curve, "orientation": self.orientation,
                "max_spread": self.max_spread, "n_points": self.n_points,
                "reason": self.reason}


def graph_homeomorphism_test(cloud, fit_tol=5e-3, lipschitz=20.0,
                             min_points=100):
    """Decide whether a paired point cloud lies on the graph of a circle
    homeomorphism; on success return the interpolated map and orientation.

    Single-valuedness: adjacent (in x) points may differ in y by at most
    fit_tol plus a bounded-distortion multiple of their x-gap.  Orientation
    must be consistent across all consecutive triples.
    """
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, float)
    if len(pts) < min_points:
        raise UsageError(f"need at least {min_points} cloud points, got {len(pts)}")
    order = np.argsort(pts[:, 0])
    xs = pts[order, 0]
    ys = pts[order, 1]

    keep_x, keep_y = [xs[0]], [ys[0]]
    worst = 0.0
    for x, y in zip(xs[1:], ys[1:]):
        if x == keep_x[-1]:
            if circ_dist(y, keep_y[-1]) > fit_tol:
                return GraphTestResult(False, 0, None,
                                       float(circ_dist(y, keep_y[-1])), len(pts),
                                       "repeated x with inconsistent y")
            continue
        keep_x.append(x)
        keep_y.append(y)
    xs = np.asarray(keep_x)
    ys = np.asarray(keep_y)
    n = len(xs)
    if n < min_points // 2:
        return GraphTestResult(False, 0, None, 0.0, len(pts),
                               "too many coincident points")

    xgaps = frac(np.roll(xs, -1) - xs)
    spreads = circ_dist(np.roll(ys, -1), ys)
    excess = spreads - (fit_tol + lipschitz * xgaps)
    worst = float(np.max(excess))
    if worst > 0:
        return GraphTestResult(False, 0, None, float(np.max(spreads)), len(pts),
                               "y-spread among x-neighbours exceeds tolerance")

    votes = []
    for i in range(n):
        y0, y1, y2 = ys[i], ys[(i + 1) % n], ys[(i + 2) % n]
        if y0 == y1 or y1 == y2 or y0 == y2:
            continue
        votes.append(1 if gap(y0, y1) + gap(y1, y2) < 1.0 else -1)
    if not votes or len(set(votes)) != 1:
        return GraphTestResult(False, 0, None, float(np.max(spreads)), len(pts),
                               "inconsistent orientation among triples")
    orientation = votes[0]

    ys_pos = ys if orientation > 0 else frac(-ys)
    fx, fy = [xs[0]], [ys_pos[0]]
    for x, y in zip(xs[1:], ys_pos[1:]):
        if gap(fy[-1], y) > 0.0 and gap(fy[-1], y) < 0.5:
            fx.append(x)
            fy.append(y)
    if gap(fy[-1], fy[0]) == 0.0:
        fx.pop()
        fy.pop()
    try:
        pos_map = PiecewiseCircleMap(fx, fy)
    except ConjugacyConstructionError as e:
        return GraphTestResult(False, 0, None, float(np.max(spreads)), len(pts),
                               f"could not interpolate a monotone map: {e}")
    curve = CircleCurve(orientation=orientation, pos_map=pos_map)
    return GraphTestResult(True, orientation, curve, float(np.max(spreads)),
                           len(pts), "")


@dataclass
class LiftResult:
    found: bool
    offset: int = -1
    residual: float = math.inf
    kappa: CircleCurve | None = None
    reason: str = ""

    def to_json_dict(self):
        return {"found": self.found, "offset": self.offset,
                "residual": self.residual, "reason": self.reason}


def lift_factor_conjugacy(fam_f, fam_g, m, curve, grid=4096, tol=1e-4,
                          n_alpha=16, seed=0):
    """Lift a factor conjugacy K to a candidate deterministic conjugacy.

    Builds kappa with m-fold image K by continuous branch tracking of the
    m-th root of K around the circle, then tests each rotational offset of
    kappa for conjugating the unfactored families.  Orientation-reversing
    K with m >= 3 admits no lift and is refused.
    """
    if curve.orientation < 0 and m >= 3:
        return LiftResult(False, reason="orientation-reversing factor conjugacy "
                                        "cannot lift for symmetry order >= 3")
    xs = np.arange(grid) / grid
    K_vals = curve.eval_many(frac(m * xs))
    roots = K_vals / m  # representative in [0, 1/m)
    kappa_vals = np.empty(grid)
    j0 = min(int(math.floor(K_vals[0] * m)), m - 1)
    kappa_vals[0] = frac(roots[0] + j0 / m)
    for t in range(1, grid):
        base = roots[t]
        offsets = frac(base + np.arange(m) / m)
        d = circ_dist(offsets, kappa_vals[t - 1])
        jbest = int(np.argmin(d))
        if d[jbest] > 1.0 / (2 * m):
            raise NumericError(
                f"branch tracking jump {d[jbest]:.3e} > 1/(2m) at grid index {t}; "
                f"refine grid")
        kappa_vals[t] = offsets[jbest]

    if curve.orientation > 0:
        pos = PiecewiseCircleMap(xs, kappa_vals)
    else:
        pos = PiecewiseCircleMap(xs, frac(-kappa_vals))
    kappa = CircleCurve(orientation=curve.orientation, pos_map=pos)

    rng = derive_seed_rng(seed, 606)
    sub = xs[:: max(1, grid // 512)]
    alphas = [fam_f.noise.sample(rng) for _ in range(n_alpha)]
    best = LiftResult(False, reason="no rotational offset conjugates within tolerance")
    for i in range(m):
        off = i / m
        worst = 0.0
        for alpha in alphas:
            lhs = frac(kappa.eval_many(fam_f.eval_many(alpha, sub)) + off)
            rhs = fam_g.eval_many(alpha, frac(kappa.eval_many(sub) + off))
            worst = max(worst, float(np.max(circ_dist(lhs, rhs))))
            if worst >= best.residual:
                break
        if worst < best.residual or not best.found:
            if worst < tol:
                if curve.orientation > 0:
                    pos_i = PiecewiseCircleMap(xs, frac(kappa_vals + off))
                else:
                    pos_i = PiecewiseCircleMap(xs, frac(-(kappa_vals + off)))
                best = LiftResult(True, offset=i, residual=worst,
                                  kappa=CircleCurve(curve.orientation, pos_i))
                break
            if worst < best.residual:
                best = LiftResult(False, residual=worst,
                                  reason="no rotational offset conjugates within tolerance")
    return best
