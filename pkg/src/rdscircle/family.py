"""Random circle homeomorphism families.

A family is a noise-indexed collection of orientation-preserving circle
homeomorphisms, represented through a degree-1 strictly monotone lift
``F(alpha, t)`` with F(t + 1) = F(t) + 1.  Built-in families cover noisy
sine-circle maps (independent / mirrored noise variants), randomly phased
rotations of a sine perturbation, rigid random rotations, and the
noise-free canonical targets.  Combinators: mirror reversal, m-fold
factor, conjugation by a rigid rotation.

Families are immutable and evaluator functions are pure, so instances
are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import CirclePoint, frac, gap, circ_dist
from .errors import DomainError, FactorCommutationError, UsageError

__all__ = [
    "NoiseModel",
    "RandomHomeoFamily",
    "FamilyReport",
    "canonical",
    "example1",
    "example2",
    "example3",
    "random_rotation",
    "mirror",
    "factor",
    "rotate_conjugate",
    "validate_family",
    "register_family",
    "build_family",
]

TWO_PI = 2.0 * math.pi

INVERSE_BISECT_ITERS = 60  # interval 2^-60 ~ 9e-19, well under the 1e-13 target
INVERSE_BISECT_CAP = 80


@dataclass(frozen=True)
class NoiseModel:
    """Uniform distribution on a closed box, one interval per coordinate."""

    box: tuple

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        for lo, hi in box:
            if not hi > lo:
                raise UsageError(f"degenerate noise interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)

    @property
    def dimension(self):
        return len(self.box)

    @classmethod
    def symmetric(cls, dim=1):
        return cls(tuple((-1.0, 1.0) for _ in range(dim)))

    @classmethod
    def unit(cls, dim=1):
        return cls(tuple((0.0, 1.0) for _ in range(dim)))

    def contains(self, alpha):
        a = np.atleast_1d(np.asarray(alpha, dtype=float))
        if a.shape[-1] != self.dimension:
            return False
        lows = np.array([lo for lo, _ in self.box])
        highs = np.array([hi for _, hi in self.box])
        return bool(np.all(a >= lows) and np.all(a <= highs))

    def sample(self, rng, size=None):
        """Draw uniform points; shape (dim,) or (size, dim)."""
        lows = np.array([lo for lo, _ in self.box])
        highs = np.array([hi for _, hi in self.box])
        if size is None:
            return rng.uniform(lows, highs)
        return rng.uniform(lows, highs, size=(size, self.dimension))

    def to_descriptor(self):
        return {"box": [list(iv) for iv in self.box]}


def _as_alpha(alpha):
    return np.atleast_1d(np.asarray(alpha, dtype=float))


class RandomHomeoFamily:
    """Evaluable, invertible, sampleable family of circle homeomorphisms.

    ``lift_fn(alpha, t)`` must be a strictly monotone degree-1 lift
    accepting scalar or ndarray ``t``.  ``inv_lift_fn`` is an optional
    closed-form inverse lift; without one, inverses fall back to
    bisection on the monotone lift.
    """

    def __init__(self, noise, lift_fn, inv_lift_fn=None, descriptor=None,
                 degenerate=False):
        self.noise = noise
        self._lift = lift_fn
        self._inv_lift = inv_lift_fn
        self.descriptor = descriptor or {"name": "custom", "params": {}}
        self.degenerate = bool(degenerate)

    # -- raw float interface -------------------------------------------------

    def lift(self, alpha, t):
        return self._lift(_as_alpha(alpha), t)

    def has_closed_inverse(self):
        return self._inv_lift is not None

    def eval_float(self, alpha, x):
        return frac(self._lift(_as_alpha(alpha), x))

    def eval_many(self, alpha, xs):
        xs = np.asarray(xs, dtype=float)
        return frac(self._lift(_as_alpha(alpha), xs))

    def eval_pairs(self, alphas, xs):
        """Evaluate with one noise point per circle point (row-wise pairs).

        Uses the vectorized lift when it broadcasts over a batch of noise
        rows; falls back to a per-row loop otherwise.
        """
        alphas = np.asarray(alphas, dtype=float)
        xs = np.asarray(xs, dtype=float)
        try:
            out = np.asarray(self._lift(alphas, xs), dtype=float)
            if out.shape == xs.shape:
                return frac(out)
        except Exception:
            pass
        return np.array([self.eval_float(a, x) for a, x in zip(alphas, xs)])

    def eval_inverse_float(self, alpha, y):
        alpha = _as_alpha(alpha)
        if self._inv_lift is not None:
            return frac(self._inv_lift(alpha, y))
        return float(_bisect_inverse(self._lift, alpha, np.asarray([y], dtype=float))[0])

    def eval_inverse_many(self, alpha, ys):
        alpha = _as_alpha(alpha)
        ys = np.asarray(ys, dtype=float)
        if self._inv_lift is not None:
            return frac(self._inv_lift(alpha, ys))
        return _bisect_inverse(self._lift, alpha, ys)

    # -- public CirclePoint interface ----------------------------------------

    def _check_alpha(self, alpha):
        if not self.noise.contains(alpha):
            raise DomainError(f"noise point {alpha!r} outside box {self.noise.box}")

    def eval(self, alpha, x):
        """f_alpha(x) for x a CirclePoint."""
        self._check_alpha(alpha)
        return CirclePoint(self.eval_float(alpha, x.value))

    def eval_inverse(self, alpha, y):
        """f_alpha^{-1}(y) for y a CirclePoint."""
        self._check_alpha(alpha)
        return CirclePoint(self.eval_inverse_float(alpha, y.value))

    def inverted(self):
        """The inverse family (f_alpha^{-1})."""
        fwd = self._lift
        inv = self._inv_lift

        def lift_fn(alpha, t):
            if inv is not None:
                return inv(alpha, t)
            ts = np.atleast_1d(np.asarray(t, dtype=float))
            base = np.floor(ts)
            res = _bisect_inverse(fwd, alpha, ts - base) + base
            return res if isinstance(t, np.ndarray) else float(res[0])

        return RandomHomeoFamily(
            self.noise, lift_fn, inv_lift_fn=lambda a, t: fwd(a, t),
            descriptor={"name": "inverse", "params": {"of": self.descriptor}},
            degenerate=self.degenerate)

    def __repr__(self):
        return f"RandomHomeoFamily({self.descriptor!r})"


def _bisect_inverse(lift_fn, alpha, ys):
    """Solve frac(F(t)) = y for t in [0, 1) on the monotone lift, vectorized."""
    ys = np.asarray(ys, dtype=float)
    f0 = np.asarray(lift_fn(alpha, np.zeros_like(ys)), dtype=float)
    target = f0 + frac(ys - frac(f0))
    lo = np.zeros_like(ys)
    hi = np.ones_like(ys)
    for _ in range(INVERSE_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        below = np.asarray(lift_fn(alpha, mid), dtype=float) <= target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return frac(0.5 * (lo + hi))


# -- built-in families --------------------------------------------------------


def _sine_lift(k, l):
    c = 1.0 / (TWO_PI * k)
    off = l / k

    def lift_fn(alpha, t, _c=c, _k=k, _off=off):
        return t + _c * np.sin(TWO_PI * _k * t) + _off

    return lift_fn


def canonical(k, l, noise=None):
    """The noise-free target map x -> x + sin(2*pi*k*x)/(2*pi*k) + l/k.

    Presented as a constant-in-noise family.  It is degenerate (the finite
    set {i/k} is invariant for every noise value), so it is accepted as a
    conjugacy target but rejected as a classification input.
    """
    if k < 1 or not (0 <= l < k):
        raise UsageError(f"canonical requires k >= 1 and 0 <= l < k, got ({k}, {l})")
    sine = _sine_lift(k, l)
    noise = noise or NoiseModel.symmetric(1)
    return RandomHomeoFamily(
        noise, lambda a, t: sine(a, t),
        descriptor={"name": "canonical", "params": {"k": k, "l": l}},
        degenerate=True)


def example1(k, l, r, coord=0, noise=None):
    """Noisy sine-circle map with an additive uniform shift on one coordinate
    of a shared two-dimensional noise box ([-1,1]^2 by default).

    ``coord`` selects which box coordinate drives this family, so two
    families over the same box with different coordinates see independent
    noise.
    """
    if k < 1 or not (0 <= l < k):
        raise UsageError(f"example1 requires k >= 1 and 0 <= l < k, got ({k}, {l})")
    if not r > 0:
        raise UsageError("example1 requires r > 0")
    noise = noise or NoiseModel.symmetric(2)
    if coord not in range(noise.dimension):
        raise UsageError(f"coord {coord} outside noise dimension {noise.dimension}")
    sine = _sine_lift(k, l)

    def lift_fn(alpha, t):
        return sine(alpha, t) + r * alpha[..., coord]

    return RandomHomeoFamily(
        noise, lift_fn,
        descriptor={"name": "example1",
                    "params": {"k": k, "l": l, "r": r, "coord": coord}})


def example2(k, l, r, sign, noise=None):
    """Noisy sine-circle map over a one-dimensional box with the shift
    +/- r*alpha; sign in {+1, -1} selects the branch, so the two branches
    over shared noise see mirrored shifts."""
    if k < 1 or not (0 <= l < k):
        raise UsageError(f"example2 requires k >= 1 and 0 <= l < k, got ({k}, {l})")
    if not r > 0:
        raise UsageError("example2 requires r > 0")
    if sign not in (1, -1, "+", "-"):
        raise UsageError("sign must be +1 or -1")
    s = 1 if sign in (1, "+") else -1
    noise = noise or NoiseModel.symmetric(1)
    sine = _sine_lift(k, l)

    def lift_fn(alpha, t):
        return sine(alpha, t) + s * r * alpha[..., 0]

    return RandomHomeoFamily(
        noise, lift_fn,
        descriptor={"name": "example2",
                    "params": {"k": k, "l": l, "r": r, "sign": s}})


def example3(eps, c, noise=None):
    """Randomly phased sine perturbation of the rotation by c:
    x -> x + c + eps*sin(2*pi*(x + alpha)), alpha uniform on [0, 1]."""
    if not (0 < eps <= 1.0 / TWO_PI):
        raise UsageError("example3 requires 0 < eps <= 1/(2*pi)")
    noise = noise or NoiseModel.unit(1)
    c = float(c)

    def lift_fn(alpha, t):
        return t + c + eps * np.sin(TWO_PI * (t + alpha[..., 0]))

    return RandomHomeoFamily(
        noise, lift_fn,
        descriptor={"name": "example3", "params": {"eps": eps, "c": c}})


def random_rotation(s, noise=None, descriptor=None):
    """The rotation family x -> x + s(alpha).

    ``s`` maps a noise point (ndarray) to a shift; values are reduced
    mod 1.  Use ``random_rotation_constant`` / ``random_rotation_linear``
    for serializable variants.
    """
    noise = noise or NoiseModel.symmetric(1)

    def shift(alpha):
        v = s(alpha)
        if isinstance(v, CirclePoint):
            v = v.value
        return frac(np.asarray(v, dtype=float))

    def lift_fn(alpha, t):
        return t + shift(alpha)

    def inv_lift_fn(alpha, t):
        return t - shift(alpha)

    return RandomHomeoFamily(
        noise, lift_fn, inv_lift_fn=inv_lift_fn,
        descriptor=descriptor or {"name": "random_rotation", "params": {"kind": "callable"}})


def random_rotation_constant(c, noise=None):
    c = frac(float(c))
    return random_rotation(
        lambda a: c, noise=noise,
        descriptor={"name": "random_rotation", "params": {"kind": "constant", "c": c}})


def random_rotation_linear(rate, noise=None):
    rate = float(rate)
    return random_rotation(
        lambda a: frac(rate * a[..., 0]), noise=noise,
        descriptor={"name": "random_rotation", "params": {"kind": "linear", "rate": rate}})


# -- combinators ---------------------------------------------------------------


def mirror(fam):
    """Mirror reversal: alpha -> (x -> -f_alpha(-x))."""
    fwd = fam._lift
    inv = fam._inv_lift

    def lift_fn(alpha, t):
        return -fwd(alpha, -t)

    inv_lift_fn = None
    if inv is not None:
        def inv_lift_fn(alpha, t):
            return -inv(alpha, -t)

    return RandomHomeoFamily(
        fam.noise, lift_fn, inv_lift_fn=inv_lift_fn,
        descriptor={"name": "mirror", "params": {"of": fam.descriptor}},
        degenerate=fam.degenerate)


def factor(fam, m, tol=1e-9, check=True, seed=7):
    """m-fold factor: the family F with F(m*x) = m*f(x).

    Requires the rotation by 1/m to commute with every map of the family;
    checked on a sample grid unless ``check`` is False.
    """
    if m < 1:
        raise UsageError("factor order must be >= 1")
    if m == 1:
        return fam
    if check:
        err = _commutation_error(fam, m, seed=seed)
        if err > tol:
            raise FactorCommutationError(
                f"rotation by 1/{m} does not commute with the family "
                f"(error {err:.3e} > tol {tol:.1e})")
    fwd = fam._lift
    inv = fam._inv_lift

    def lift_fn(alpha, t):
        return m * fwd(alpha, np.asarray(t, dtype=float) / m)

    inv_lift_fn = None
    if inv is not None:
        def inv_lift_fn(alpha, t):
            return m * inv(alpha, np.asarray(t, dtype=float) / m)

    return RandomHomeoFamily(
        fam.noise, lift_fn, inv_lift_fn=inv_lift_fn,
        descriptor={"name": "factor", "params": {"of": fam.descriptor, "m": m}},
        degenerate=fam.degenerate)


def _commutation_error(fam, m, seed=7, grid=32, n_alpha=8):
    rng = np.random.default_rng(seed)
    xs = (np.arange(grid) + 0.5) / grid
    worst = 0.0
    for _ in range(n_alpha):
        alpha = fam.noise.sample(rng)
        left = fam.eval_many(alpha, frac(xs + 1.0 / m))
        right = frac(fam.eval_many(alpha, xs) + 1.0 / m)
        worst = max(worst, float(np.max(circ_dist(left, right))))
    return worst


def rotate_conjugate(fam, c):
    """Conjugation by the rigid rotation R_c: alpha -> R_c o f_alpha o R_{-c}."""
    cv = c.value if isinstance(c, CirclePoint) else frac(float(c))
    fwd = fam._lift
    inv = fam._inv_lift

    def lift_fn(alpha, t):
        return fwd(alpha, np.asarray(t, dtype=float) - cv) + cv

    inv_lift_fn = None
    if inv is not None:
        def inv_lift_fn(alpha, t):
            return inv(alpha, np.asarray(t, dtype=float) - cv) + cv

    return RandomHomeoFamily(
        fam.noise, lift_fn, inv_lift_fn=inv_lift_fn,
        descriptor={"name": "rotate_conjugate", "params": {"of": fam.descriptor, "c": cv}},
        degenerate=fam.degenerate)


# -- validation ----------------------------------------------------------------


@dataclass
class FamilyReport:
    """Outcome of the heuristic family checks; report-only, never raises."""

    passed: bool
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {"passed": self.passed, "failures": self.failures,
                "warnings": self.warnings, "checks": self.checks}


def validate_family(fam, n_samples=64, grid=128, seed=11):
    """Heuristic checks: monotone degree-1 lift, inverse round trip,
    continuity in the noise, constant-in-noise detection.

    A constant family is only flagged: its finite invariant orbits cannot
    be ruled out from samples, so the non-degeneracy condition cannot hold.
    """
    rng = np.random.default_rng(seed)
    failures, warnings, checks = [], [], {}
    ts = np.linspace(0.0, 1.0, grid + 1)

    worst_monotone = 0.0
    worst_degree = 0.0
    worst_roundtrip = 0.0
    worst_alpha_var = 0.0
    worst_continuity = 0.0
    alphas = [fam.noise.sample(rng) for _ in range(n_samples)]
    base_vals = None
    for alpha in alphas:
        lift_vals = np.asarray(fam.lift(alpha, ts), dtype=float)
        worst_monotone = max(worst_monotone, float(np.max(-np.diff(lift_vals), initial=0.0)))
        worst_degree = max(worst_degree, abs(float(lift_vals[-1] - lift_vals[0]) - 1.0))
        # y-side round trip; the x-side is ill-conditioned (~eps^(1/3)) at
        # critical points of the map, so it cannot be a pass/fail gate
        sub = ts[:-1:8]
        ys = fam.eval_many(alpha, sub)
        fwd = fam.eval_many(alpha, fam.eval_inverse_many(alpha, ys))
        worst_roundtrip = max(worst_roundtrip, float(np.max(circ_dist(fwd, ys))))
        vals = frac(lift_vals[:-1])
        if base_vals is None:
            base_vals = vals
        else:
            worst_alpha_var = max(worst_alpha_var, float(np.max(circ_dist(vals, base_vals))))
        lows = np.array([lo for lo, _ in fam.noise.box])
        highs = np.array([hi for _, hi in fam.noise.box])
        delta = 1e-4 * (highs - lows)
        nudged = np.minimum(np.asarray(alpha, dtype=float) + delta, highs)
        moved = fam.eval_many(nudged, sub)
        here = fam.eval_many(alpha, sub)
        worst_continuity = max(worst_continuity, float(np.max(circ_dist(moved, here))))

    checks["monotone_violation"] = worst_monotone
    checks["degree_error"] = worst_degree
    checks["inverse_roundtrip"] = worst_roundtrip
    checks["noise_variation"] = worst_alpha_var
    checks["continuity_step"] = worst_continuity

    if worst_monotone > 1e-12:
        failures.append(f"orientation: lift decreases by {worst_monotone:.3e}")
    if worst_degree > 1e-9:
        failures.append(f"degree: lift winding differs from 1 by {worst_degree:.3e}")
    rt_tol = 1e-10 if fam.has_closed_inverse() else 1e-8
    if worst_roundtrip > rt_tol:
        failures.append(f"inverse: round trip error {worst_roundtrip:.3e} > {rt_tol:.1e}")
    if worst_continuity > 0.05:
        warnings.append(f"continuity: large response {worst_continuity:.3e} to a small noise step")
    if fam.degenerate or worst_alpha_var < 1e-12:
        warnings.append("noise-independent family: the non-degeneracy condition cannot hold")

    return FamilyReport(passed=not failures, failures=failures,
                        warnings=warnings, checks=checks)


# -- descriptor registry ---------------------------------------------------------

_REGISTRY = {}


def register_family(name, builder):
    """Register a descriptor builder: builder(params: dict) -> RandomHomeoFamily."""
    _REGISTRY[name] = builder


def _build_rotation(params):
    kind = params.get("kind", "constant")
    if kind == "constant":
        return random_rotation_constant(params["c"])
    if kind == "linear":
        return random_rotation_linear(params["rate"])
    raise UsageError(f"unknown rotation kind {kind!r}")


register_family("canonical", lambda p: canonical(p["k"], p["l"]))
register_family("example1", lambda p: example1(p["k"], p["l"], p["r"], p.get("coord", 0)))
register_family("example2", lambda p: example2(p["k"], p["l"], p["r"], p.get("sign", 1)))
register_family("example3", lambda p: example3(p["eps"], p["c"]))
register_family("random_rotation", _build_rotation)
register_family("mirror", lambda p: mirror(build_family(p["of"])))
register_family("factor", lambda p: factor(build_family(p["of"]), p["m"]))
register_family("rotate_conjugate",
                lambda p: rotate_conjugate(build_family(p["of"]), p["c"]))


def build_family(descriptor):
    """Construct a family from its serializable descriptor."""
    name = descriptor.get("name")
    if name not in _REGISTRY:
        raise UsageError(f"unknown family name {name!r}")
    return _REGISTRY[name](descriptor.get("params", {}))
