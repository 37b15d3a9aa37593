"""Decision tree for orientational and topological conjugacy of two families
over the same noise model.

The invariants (component count k, rotation index l, symmetry order,
trichotomy case) settle most pairs outright.  Whole-circle symmetric pairs
reduce to a deterministic conjugacy search through the coupled-attractor
graph; a "no" from that statistical test is downgraded to "inconclusive"
below the evidence floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .circle import circ_dist
from .conjugacy import (coupled_attractor_graph, graph_homeomorphism_test,
                        lift_factor_conjugacy)
from .dynamics import derive_seed_rng
from .errors import (AntonovInconclusiveError, StructureEstimationError,
                     UsageError)
from .family import mirror, validate_family
from .structure import AntonovCase, MCParams, estimate_minimal_structure

__all__ = ["ClassifierParams", "Verdict", "classify_orientational",
           "classify_topological"]

YES, NO, INCONCLUSIVE = "yes", "no", "inconclusive"


@dataclass(frozen=True)
class ClassifierParams:
    seed: int = 0
    n_windows: int = 200
    n_pull: int = 192
    fit_tol: float = 5e-3
    lift_tol: float = 1e-4
    lift_grid: int = 4096
    rotation_eq_yes: float = 1e-8
    rotation_eq_no: float = 1e-3
    rotation_eq_samples: int = 1000
    no_floor_windows: int = 200
    threads: int = 1
    mc: MCParams = field(default_factory=MCParams)


@dataclass
class Verdict:
    orientational: str
    topological: str
    case_orientational: str | None
    case_topological: str | None
    evidence: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "orientational": self.orientational,
            "topological": self.topological,
            "case_orientational": self.case_orientational,
            "case_topological": self.case_topological,
            "evidence": self.evidence,
            "notes": self.notes,
        }

    def summary_text(self):
        lines = [
            f"orientational conjugacy: {self.orientational}"
            + (f" (case {self.case_orientational})" if self.case_orientational else ""),
            f"topological conjugacy:   {self.topological}"
            + (f" (case {self.case_topological})" if self.case_topological else ""),
        ]
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def _check_inputs(fam_f, fam_g):
    if fam_f.noise != fam_g.noise:
        raise UsageError("classification requires both families over the same "
                         "noise model")
    for name, fam in (("first", fam_f), ("second", fam_g)):
        report = validate_family(fam, n_samples=16)
        if not report.passed:
            raise UsageError(f"{name} family fails validation: {report.failures}")
        if fam.degenerate:
            raise UsageError(f"{name} family is noise-independent and cannot be "
                             f"classified (accepted only as a conjugacy target)")


def _structures(fam_f, fam_g, params):
    mc_f = params.mc
    mc_g = replace(mc_f, seed=mc_f.seed + 1)
    sf = estimate_minimal_structure(fam_f, mc_f)
    sg = estimate_minimal_structure(fam_g, mc_g)
    return sf, sg


def _rotation_shift_equality(fam_f, fam_g, params):
    """Two-threshold equality test of the rotation shifts over sampled noise."""
    rng = derive_seed_rng(params.seed, 808)
    worst = 0.0
    for _ in range(params.rotation_eq_samples):
        alpha = fam_f.noise.sample(rng)
        sf = fam_f.eval_float(alpha, 0.0)
        sg = fam_g.eval_float(alpha, 0.0)
        worst = max(worst, circ_dist(sf, sg))
    if worst < params.rotation_eq_yes:
        return YES, worst
    if worst > params.rotation_eq_no:
        return NO, worst
    return INCONCLUSIVE, worst


def _deterministic_search(fam_f, fam_g, m, params, allow_reversing, evidence):
    """Coupled-attractor graph -> curve test -> lift; returns YES/NO/INCONCLUSIVE."""
    cloud = coupled_attractor_graph(
        fam_f, fam_g, m, params.n_windows, params.n_pull, seed=params.seed,
        threads=params.threads)
    evidence["graph_windows"] = int(cloud.n_windows)
    evidence["graph_skipped"] = int(cloud.skipped)
    if len(cloud.points) < max(100, params.n_windows // 4):
        evidence["graph_reason"] = "too few collapsed windows"
        return INCONCLUSIVE
    fit = graph_homeomorphism_test(cloud, fit_tol=params.fit_tol)
    evidence["graph_test"] = fit.to_json_dict()
    if not fit.is_curve:
        if len(cloud.points) < params.no_floor_windows:
            evidence["graph_reason"] = ("not a curve, but below the evidence "
                                        "floor; downgraded")
            return INCONCLUSIVE
        return NO
    if fit.orientation < 0 and not allow_reversing:
        evidence["graph_reason"] = ("orientation-reversing factor conjugacy "
                                    "cannot lift for symmetry order >= 3")
        return NO
    lift = lift_factor_conjugacy(fam_f, fam_g, m, fit.curve,
                                 grid=params.lift_grid, tol=params.lift_tol,
                                 seed=params.seed)
    evidence["lift"] = lift.to_json_dict()
    return YES if lift.found else NO


def classify_orientational(fam_f, fam_g, params=None):
    """Decide whether the two families have orientationally conjugate dynamics.

    The returned verdict leaves ``topological`` inconclusive when the
    orientational answer is "no": deciding it needs the mirrored run, which
    ``classify_topological`` performs.
    """
    params = params or ClassifierParams()
    _check_inputs(fam_f, fam_g)
    evidence = {}
    notes = []
    try:
        sf, sg = _structures(fam_f, fam_g, params)
    except (StructureEstimationError, AntonovInconclusiveError) as e:
        return Verdict(INCONCLUSIVE, INCONCLUSIVE, None, None,
                       {"error": str(e)}, [f"structure estimation failed: {e}"])
    evidence["structure_f"] = sf.to_json_dict()
    evidence["structure_g"] = sg.to_json_dict()

    def verdict(ans, case):
        topo = YES if ans == YES else INCONCLUSIVE
        if ans == NO:
            notes.append("topological verdict needs the mirrored run")
        return Verdict(ans, topo, case, None, evidence, notes)

    if sf.k != sg.k:
        return verdict(NO, None)

    if not sf.whole_circle and not sg.whole_circle:
        if sf.k >= 2:
            return verdict(YES if sf.l == sg.l else NO, "a" if sf.l == sg.l else None)
        return verdict(YES, "b")  # k = 1 arcs admit no symmetry

    if sf.whole_circle != sg.whole_circle:
        # k = 1 on both sides; conjugate iff the whole-circle one is
        # contractive without symmetry
        whole = sf if sf.whole_circle else sg
        if whole.antonov_case == AntonovCase.CONTRACTIVE:
            return verdict(YES, "b")
        notes.append("one family is minimal on an arc, the other on the whole "
                     "circle with symmetry or rotation dynamics")
        return verdict(NO, None)

    # both whole-circle minimal
    cf, cg = sf.antonov_case, sg.antonov_case
    if (cf == AntonovCase.ROTATION) != (cg == AntonovCase.ROTATION):
        return verdict(NO, None)
    if cf == AntonovCase.ROTATION:
        ans, worst = _rotation_shift_equality(fam_f, fam_g, params)
        evidence["rotation_shift_gap"] = worst
        if ans == INCONCLUSIVE:
            notes.append("rotation shifts neither provably equal nor clearly "
                         "different at the sampling tolerance")
        return verdict(ans, "c" if ans == YES else None)

    m_f, m_g = sf.symmetry_order, sg.symmetry_order
    if m_f != m_g:
        return verdict(NO, None)
    if m_f == 1:
        return verdict(YES, "b")
    if m_f >= 3:
        ans = _deterministic_search(fam_f, fam_g, m_f, params,
                                    allow_reversing=False, evidence=evidence)
        if ans == INCONCLUSIVE:
            notes.append("deterministic-conjugacy search inconclusive")
        return verdict(ans, "c" if ans == YES else None)
    ans = _deterministic_search(fam_f, fam_g, 2, params,
                                allow_reversing=True, evidence=evidence)
    if ans == INCONCLUSIVE:
        notes.append("deterministic-conjugacy search inconclusive")
    return verdict(ans, "d" if ans == YES else None)


_PRIME = {"a": "a'", "b": "b'", "c": "c'", "d": "c'", None: None}


def classify_topological(fam_f, fam_g, params=None):
    """Combine the direct and mirrored orientational runs into the
    topological verdict."""
    params = params or ClassifierParams()
    direct = classify_orientational(fam_f, fam_g, params)
    evidence = {"direct": direct.to_json_dict()}
    notes = list(direct.notes)
    if direct.orientational == YES:
        return Verdict(YES, YES, direct.case_orientational,
                       _PRIME[direct.case_orientational], evidence, notes)
    mirrored = classify_orientational(fam_f, mirror(fam_g), params)
    evidence["mirrored"] = mirrored.to_json_dict()
    notes.extend(f"mirrored run: {n}" for n in mirrored.notes)
    if mirrored.orientational == YES:
        return Verdict(direct.orientational, YES, direct.case_orientational,
                       _PRIME[mirrored.case_orientational], evidence, notes)
    if INCONCLUSIVE in (direct.orientational, mirrored.orientational):
        return Verdict(direct.orientational, INCONCLUSIVE,
                       direct.case_orientational, None, evidence, notes)
    return Verdict(NO, NO, None, None, evidence, notes)
