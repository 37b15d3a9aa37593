"""Simulation and topological-conjugacy classification of i.i.d.-driven
random circle homeomorphisms."""

__version__ = "0.1.0"

from .circle import Arc, CirclePoint, boundary_points, dist, dplus, mfold, mth_root, sector
from .family import (NoiseModel, RandomHomeoFamily, build_family, canonical,
                     example1, example2, example3, factor, mirror,
                     random_rotation, random_rotation_constant,
                     random_rotation_linear, register_family, rotate_conjugate,
                     validate_family)
from .dynamics import (NoiseWindow, cocycle, cocycle_many, contraction_rate,
                       perturb_sequence, pullback_backward, pullback_forward,
                       pullback_grid_clusters)
from .structure import (AntonovCase, MCParams, MinimalStructure, classify_antonov,
                        detect_rotational_symmetry, estimate_minimal_structure,
                        estimate_stationary_histogram)
from .conjugacy import (AnchorSequences, CircleCurve, PiecewiseCircleMap,
                        anchor_sequences, build_conjugacy, conjugation_residual,
                        coupled_attractor_graph, graph_homeomorphism_test,
                        lift_factor_conjugacy)
from .classifier import (ClassifierParams, Verdict, classify_orientational,
                         classify_topological)
