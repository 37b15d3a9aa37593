"""Estimation of topological invariants of a family.

The minimal-set support is read off a long-orbit histogram: stationary
measures are atomless with support equal to the minimal sets, so at desk
sampling depth the occupied bins trace the components.  A component
boundary is declared at ``gap_min`` consecutive empty bins; the rotation
index l comes from mapping component midpoints through sampled maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .circle import Arc, CirclePoint, circ_dist, frac, gap
from .dynamics import NoiseWindow, pullback_grid_clusters, derive_seed_rng
from .errors import AntonovInconclusiveError, StructureEstimationError, UsageError
from .family import factor

__all__ = [
    "AntonovCase",
    "MCParams",
    "MinimalStructure",
    "estimate_stationary_histogram",
    "estimate_minimal_structure",
    "detect_rotational_symmetry",
    "test_symmetry_candidate",
    "classify_antonov",
]


class AntonovCase(str, Enum):
    CONTRACTIVE = "contractive"
    SYMMETRIC_LIFT_CONTRACTIVE = "symmetric_lift_contractive"
    ROTATION = "rotation"
    NOT_MINIMAL = "not_minimal"


@dataclass(frozen=True)
class MCParams:
    """Monte Carlo knobs for structure estimation; defaults are desk scale."""

    seed: int = 0
    n_bins: int = 2048
    n_samples: int = 200_000
    n_burn: int = 1000
    n_chains: int = 16
    n_alpha: int = 64
    gap_min: int = 3
    m_max: int = 12
    sym_grid: int = 64
    sym_alpha: int = 16
    sym_tol: float = 1e-6
    rotation_tol: float = 1e-7
    collapse_half_width: int = 320
    collapse_windows: int = 3
    collapse_grid: int = 64
    collapse_tol: float = 1e-6


@dataclass
class MinimalStructure:
    """Estimated component structure and derived invariants of a family."""

    whole_circle: bool
    components: list            # list[Arc], anticlockwise
    k: int
    l: int
    p: int
    q: int
    total_gap_measure: float
    symmetry_order: int
    antonov_case: AntonovCase
    n_bins: int = 0
    notes: list = field(default_factory=list)

    def component_values(self):
        return [(a.start.value, a.end.value) for a in self.components]

    def to_json_dict(self):
        return {
            "whole_circle": self.whole_circle,
            "components": [[s, e] for s, e in self.component_values()],
            "k": self.k,
            "l": self.l,
            "p": self.p,
            "q": self.q,
            "total_gap_measure": self.total_gap_measure,
            "symmetry_order": self.symmetry_order,
            "antonov_case": self.antonov_case.value,
            "n_bins": self.n_bins,
            "notes": self.notes,
        }


def estimate_stationary_histogram(fam, seed, n_burn, n_samples, n_bins,
                                  n_chains=16):
    """Bin-occupancy counts of long forward orbits started from a spread
    of initial points (several chains cover all minimal sets)."""
    if n_bins < 64:
        raise UsageError("n_bins must be at least 64")
    rng = derive_seed_rng(seed, 101)
    xs = (np.arange(n_chains) + 0.5) / n_chains
    steps = n_burn + max(1, math.ceil(n_samples / n_chains))
    counts = np.zeros(n_bins, dtype=np.int64)
    collected = []
    for t in range(steps):
        alphas = fam.noise.sample(rng, size=n_chains)
        xs = fam.eval_pairs(alphas, xs)
        if t >= n_burn:
            collected.append(np.minimum((xs * n_bins).astype(np.int64), n_bins - 1))
    idx = np.concatenate(collected)
    counts += np.bincount(idx, minlength=n_bins)
    return counts


def _circular_zero_runs(occupied):
    """Maximal circular runs of empty bins as (start_bin, length) pairs."""
    n = len(occupied)
    if occupied.all():
        return []
    if not occupied.any():
        return [(0, n)]
    runs = []
    # rotate so position 0 is occupied, making runs non-wrapping
    first_occ = int(np.argmax(occupied))
    rot = np.roll(occupied, -first_occ)
    i = 0
    while i < n:
        if not rot[i]:
            j = i
            while j < n and not rot[j]:
                j += 1
            runs.append(((i + first_occ) % n, j - i))
            i = j
        else:
            i += 1
    return runs


def _components_from_histogram(counts, gap_min):
    """Component bin ranges [(first, last)] split at gaps >= gap_min bins."""
    n = len(counts)
    occupied = counts > 0
    gaps = [(s, ln) for s, ln in _circular_zero_runs(occupied) if ln >= gap_min]
    if not gaps:
        return [], 0.0
    gaps.sort()
    comps = []
    for g_prev, g_next in zip(gaps, gaps[1:] + gaps[:1]):
        start = (g_prev[0] + g_prev[1]) % n
        end = (g_next[0] - 1) % n
        comps.append((start, end))
    comps.sort()
    gap_measure = sum(ln for _, ln in gaps) / n
    return comps, gap_measure


def _locate_component(comps_bins, n_bins, value, dilate=1):
    """Index of the component whose (bin-dilated) arc contains value."""
    b = int(value * n_bins) % n_bins
    for idx, (first, last) in enumerate(comps_bins):
        lo = (first - dilate) % n_bins
        hi = (last + dilate) % n_bins
        if lo <= hi:
            if lo <= b <= hi:
                return idx
        elif b >= lo or b <= hi:
            return idx
    return None


def detect_rotational_symmetry(fam, m_max=12, grid=64, n_alpha=16, tol=1e-6,
                               seed=0):
    """Largest m <= m_max such that rotation by 1/m commutes with the family
    on a sample grid, with all divisors of m also passing; 1 when none."""
    if m_max < 2:
        raise UsageError("m_max must be at least 2")
    rng = derive_seed_rng(seed, 202)
    xs = (np.arange(grid) + 0.5) / grid
    alphas = [fam.noise.sample(rng) for _ in range(n_alpha)]
    passes = {1: True}
    for m in range(2, m_max + 1):
        worst = 0.0
        for alpha in alphas:
            left = fam.eval_many(alpha, frac(xs + 1.0 / m))
            right = frac(fam.eval_many(alpha, xs) + 1.0 / m)
            worst = max(worst, float(np.max(circ_dist(left, right))))
        passes[m] = worst < tol
    best = 1
    for m in range(2, m_max + 1):
        if passes[m] and all(passes.get(d, False)
                             for d in range(2, m) if m % d == 0):
            best = m
    return best


def test_symmetry_candidate(fam, tau_values, grid=64, n_alpha=16, tol=1e-6,
                            seed=0):
    """Test a user-supplied candidate homeomorphism (given as a callable on
    canonical representatives) for commutation with every sampled map."""
    rng = derive_seed_rng(seed, 203)
    xs = (np.arange(grid) + 0.5) / grid
    tau_xs = frac(np.asarray([tau_values(x) for x in xs], dtype=float))
    for _ in range(n_alpha):
        alpha = fam.noise.sample(rng)
        left = fam.eval_many(alpha, tau_xs)
        right = frac(np.asarray([tau_values(v) for v in fam.eval_many(alpha, xs)]))
        if float(np.max(circ_dist(left, right))) >= tol:
            return False
    return True


def classify_antonov(fam, structure, params=None, windows=None):
    """Trichotomy for a whole-circle-minimal family: ``rotation`` when the
    displacement is x-independent, otherwise ``contractive`` or
    ``symmetric_lift_contractive`` depending on the symmetry order, after
    confirming the factor system collapses a grid to a single cluster."""
    params = params or MCParams()
    if not structure.whole_circle:
        raise UsageError("trichotomy applies only to whole-circle-minimal families")

    rng = derive_seed_rng(params.seed, 303)
    xs = (np.arange(params.sym_grid) + 0.5) / params.sym_grid
    worst = 0.0
    for _ in range(params.sym_alpha):
        alpha = fam.noise.sample(rng)
        disp = frac(fam.eval_many(alpha, xs) - xs)
        spread = float(np.max(disp) - np.min(disp))
        # displacement may straddle the wrap point; re-center and re-measure
        recentered = frac(disp - disp[0] + 0.5)
        spread = min(spread, float(np.max(recentered) - np.min(recentered)))
        worst = max(worst, spread)
    if worst < params.rotation_tol:
        return AntonovCase.ROTATION

    m = structure.symmetry_order
    fac = factor(fam, m, tol=max(params.sym_tol, 1e-9)) if m > 1 else fam
    if windows is None:
        windows = [NoiseWindow.generate(fam.noise, _antonov_seed(params.seed, j),
                                        half_width=params.collapse_half_width)
                   for j in range(params.collapse_windows)]
    for w in windows:
        rep = pullback_grid_clusters(fac, w, params.collapse_grid,
                                     params.collapse_half_width)
        if len(rep.centers) != 1 or rep.max_diameter > params.collapse_tol:
            raise AntonovInconclusiveError(
                f"factor system did not collapse to one cluster "
                f"({len(rep.centers)} clusters, max diameter {rep.max_diameter:.3e}); "
                f"window too short or family near-rotational")
    return (AntonovCase.SYMMETRIC_LIFT_CONTRACTIVE if m >= 2
            else AntonovCase.CONTRACTIVE)


def _antonov_seed(seed, j):
    return (int(seed) * 1_000_003 + 77_000 + j) & (2 ** 63 - 1)


def estimate_minimal_structure(fam, params=None):
    """Estimate components, (k, l, p, q), symmetry order and trichotomy case.

    Deterministic for a fixed ``MCParams``; inconsistent rotation indices
    across sampled noise raise ``StructureEstimationError``.
    """
    params = params or MCParams()
    counts = estimate_stationary_histogram(
        fam, params.seed, params.n_burn, params.n_samples, params.n_bins,
        n_chains=params.n_chains)
    comps_bins, gap_measure = _components_from_histogram(counts, params.gap_min)
    notes = []

    if comps_bins and gap_measure < 4.0 * params.gap_min / params.n_bins:
        # tiny total gap: escalate once with 4x samples, then trust the data
        notes.append("tiny gaps: re-ran with 4x samples")
        counts = estimate_stationary_histogram(
            fam, params.seed + 1, params.n_burn, 4 * params.n_samples,
            params.n_bins, n_chains=params.n_chains)
        comps_bins, gap_measure = _components_from_histogram(counts, params.gap_min)

    n_bins = params.n_bins
    if not comps_bins:
        structure = MinimalStructure(
            whole_circle=True, components=[], k=1, l=0, p=1, q=1,
            total_gap_measure=0.0, symmetry_order=1,
            antonov_case=AntonovCase.NOT_MINIMAL, n_bins=n_bins, notes=notes)
        structure.symmetry_order = detect_rotational_symmetry(
            fam, m_max=params.m_max, grid=params.sym_grid,
            n_alpha=params.sym_alpha, tol=params.sym_tol, seed=params.seed)
        structure.antonov_case = classify_antonov(fam, structure, params)
        return structure

    k = len(comps_bins)
    components = [Arc.of(first / n_bins, (last + 1) / n_bins)
                  for first, last in comps_bins]

    rng = derive_seed_rng(params.seed, 404)
    l_values = set()
    for _ in range(params.n_alpha):
        alpha = fam.noise.sample(rng)
        for i, arc in enumerate(components):
            img = fam.eval_float(alpha, arc.midpoint().value)
            j = _locate_component(comps_bins, n_bins, img, dilate=1)
            if j is None:
                raise StructureEstimationError(
                    f"image of component {i} midpoint fell outside every "
                    f"component (x={img:.6f}); n_bins may be too coarse")
            l_values.add((j - i) % k)
            if len(l_values) > 1:
                raise StructureEstimationError(
                    f"inconsistent rotation index across noise samples: {sorted(l_values)}; "
                    f"n_bins too coarse or family invalid")
    l = l_values.pop()
    p = math.gcd(k, l) if l else k
    q = k // p

    return MinimalStructure(
        whole_circle=False, components=components, k=k, l=l, p=p, q=q,
        total_gap_measure=gap_measure, symmetry_order=1,
        antonov_case=AntonovCase.NOT_MINIMAL, n_bins=n_bins, notes=notes)
