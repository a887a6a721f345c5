"""Value types for measures on a compact interval and the functionals built on them.

Everything here is immutable and pure.  Discrete measures carry atoms and
weights; densities exist only as fixed inputs (reference measures, model
demos) and are integrated by adaptive quadrature.

Set conventions:

* tail events ``{X >= a}`` are closed, so an atom sitting exactly at ``a``
  counts toward the tail;
* data balls are open, ``|x - c| < radius``; an atom at distance exactly
  ``radius`` contributes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import integrate

from ._jsonutil import decode_float, decode_floats, encode_float, encode_floats

WEIGHT_TOL = 1e-12
RENORMALIZE_TOL = 1e-9
QUAD_RTOL = 1e-8
_BOUNDED_SAMPLES = 257


class MeasureError(ValueError):
    """Raised when a measure or related object violates its invariants."""


class EvaluationError(ArithmeticError):
    """Raised when a quantity of interest produces a non-finite value."""


def _check_support(lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise MeasureError(f"support must be a finite interval with lo < hi, got [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# sets

@dataclass(frozen=True)
class Interval:
    """An interval with selectable endpoint closure (closed by default)."""

    left: float
    right: float
    left_closed: bool = True
    right_closed: bool = True

    def __post_init__(self):
        if self.left > self.right:
            raise MeasureError(f"interval endpoints out of order: {self.left} > {self.right}")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lower = x >= self.left if self.left_closed else x > self.left
        upper = x <= self.right if self.right_closed else x < self.right
        return lower & upper

    def to_dict(self) -> dict:
        return {
            "left": encode_float(self.left),
            "right": encode_float(self.right),
            "left_closed": self.left_closed,
            "right_closed": self.right_closed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Interval":
        return cls(
            decode_float(doc["left"]),
            decode_float(doc["right"]),
            bool(doc.get("left_closed", True)),
            bool(doc.get("right_closed", True)),
        )


@dataclass(frozen=True)
class Ball:
    """Open ball ``{x : |x - center| < radius}``."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise MeasureError(f"ball radius must be positive, got {self.radius}")

    def contains(self, x) -> np.ndarray:
        return np.abs(np.asarray(x, dtype=float) - self.center) < self.radius

    def as_interval(self) -> Interval:
        return Interval(self.center - self.radius, self.center + self.radius, False, False)


SetLike = Union[Interval, Ball, Sequence[Interval]]


def _as_pieces(s: SetLike) -> tuple:
    if isinstance(s, (Interval, Ball)):
        return (s,)
    return tuple(s)


def set_contains(s: SetLike, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=bool)
    for piece in _as_pieces(s):
        out |= piece.contains(x)
    return out


# ---------------------------------------------------------------------------
# measures

@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported measure on ``[lo, hi]``.

    Weights are renormalized when their sum drifts from one by at most 1e-9
    and rejected beyond that, unless ``positive=True`` in which case any
    finite nonnegative total mass is accepted.
    """

    atoms: np.ndarray
    weights: np.ndarray
    lo: float = 0.0
    hi: float = 1.0
    positive: bool = False

    def __post_init__(self):
        _check_support(self.lo, self.hi)
        atoms = np.array(self.atoms, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if atoms.shape != weights.shape:
            raise MeasureError(f"{atoms.size} atoms but {weights.size} weights")
        if atoms.size == 0:
            raise MeasureError("a measure needs at least one atom")
        if not np.all(np.isfinite(atoms)) or not np.all(np.isfinite(weights)):
            raise MeasureError("atoms and weights must be finite")
        if np.any(atoms < self.lo) or np.any(atoms > self.hi):
            raise MeasureError(f"atoms must lie in [{self.lo}, {self.hi}]")
        if np.any(weights < 0):
            raise MeasureError("weights must be nonnegative")
        if not self.positive:
            total = float(weights.sum())
            drift = abs(total - 1.0)
            if drift > RENORMALIZE_TOL:
                raise MeasureError(f"weights sum to {total!r}, not 1")
            if drift > WEIGHT_TOL:
                weights = weights / total
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, x: float, lo: float = 0.0, hi: float = 1.0) -> "DiscreteMeasure":
        return cls(np.array([x]), np.array([1.0]), lo, hi)

    @property
    def n_atoms(self) -> int:
        return int(self.atoms.size)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integral of a vectorized function against the measure."""
        return float(np.dot(self.weights, np.asarray(fn(self.atoms), dtype=float)))

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.atoms ** k))

    def pruned(self, tol: float = 1e-10) -> "DiscreteMeasure":
        """Drop atoms with weight below ``tol`` and merge coincident atoms."""
        keep = self.weights >= tol
        if not np.any(keep):
            keep = self.weights == self.weights.max()
        atoms, inverse = np.unique(self.atoms[keep], return_inverse=True)
        weights = np.zeros(atoms.size)
        np.add.at(weights, inverse, self.weights[keep])
        if not self.positive:
            weights = weights / weights.sum()
        return DiscreteMeasure(atoms, weights, self.lo, self.hi, self.positive)

    def normalized(self) -> "DiscreteMeasure":
        total = self.total_mass
        if total <= 0:
            raise MeasureError("cannot normalize a null measure")
        return DiscreteMeasure(self.atoms, self.weights / total, self.lo, self.hi)

    def to_dict(self) -> dict:
        return {
            "atoms": [float(a) for a in self.atoms],
            "weights": [float(w) for w in self.weights],
            "support": [self.lo, self.hi],
            "positive": self.positive,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteMeasure":
        lo, hi = doc.get("support", [0.0, 1.0])
        return cls(
            np.asarray(decode_floats(doc["atoms"])),
            np.asarray(decode_floats(doc["weights"])),
            float(lo),
            float(hi),
            bool(doc.get("positive", False)),
        )


@dataclass(frozen=True)
class Density:
    """A fixed absolutely continuous probability measure on ``[lo, hi]``.

    ``breakpoints`` lists interior points where the pdf is not smooth; they
    are passed to the quadrature routine.
    """

    pdf: Callable[[float], float]
    lo: float = 0.0
    hi: float = 1.0
    breakpoints: tuple = ()
    name: str = "density"

    def __post_init__(self):
        _check_support(self.lo, self.hi)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "Density":
        height = 1.0 / (hi - lo)
        return cls(lambda x: height, lo, hi, (), "uniform")

    def mass(self, s: SetLike) -> float:
        total = 0.0
        for piece in _as_pieces(s):
            iv = piece.as_interval() if isinstance(piece, Ball) else piece
            a, b = max(iv.left, self.lo), min(iv.right, self.hi)
            if b <= a:
                continue
            if self.name == "uniform":
                total += (b - a) / (self.hi - self.lo)
                continue
            pts = [p for p in self.breakpoints if a < p < b] or None
            val, _ = integrate.quad(self.pdf, a, b, points=pts, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
            total += val
        return float(total)


# ---------------------------------------------------------------------------
# moment maps

@dataclass(frozen=True)
class MomentComponent:
    """One feature ``g`` of a moment map, evaluated atom-wise."""

    kind: str
    param: tuple = ()
    fn: Callable | None = field(default=None, compare=False)
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            return x ** self.param[0]
        if self.kind == "threshold":
            return (x >= self.param[0]).astype(float)
        if self.kind == "ball":
            c, r = self.param
            return (np.abs(x - c) < r).astype(float)
        out = np.asarray(self.fn(x), dtype=float)
        if out.shape != x.shape:
            out = np.vectorize(lambda t: float(self.fn(t)))(x)
        return out

    @property
    def breakpoints(self) -> tuple:
        if self.kind == "threshold":
            return (self.param[0],)
        if self.kind == "ball":
            return (self.param[0],)
        return ()

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError(f"custom component {self.name!r} cannot be serialized")
        return {"kind": self.kind, "param": [float(p) for p in self.param]}


def power(k: int) -> MomentComponent:
    if k < 1:
        raise MeasureError("power moments start at k = 1")
    return MomentComponent("power", (int(k),), name=f"x^{k}")


def threshold(a: float) -> MomentComponent:
    return MomentComponent("threshold", (float(a),), name=f"1{{x>={a}}}")


def ball_indicator(center: float, radius: float) -> MomentComponent:
    Ball(center, radius)
    return MomentComponent("ball", (float(center), float(radius)), name=f"1{{|x-{center}|<{radius}}}")


def custom_component(fn: Callable, name: str = "custom") -> MomentComponent:
    return MomentComponent("custom", (), fn, name)


@dataclass(frozen=True)
class MomentMap:
    """Ordered feature map ``x -> (g_1(x), ..., g_n(x))`` integrated against measures."""

    components: tuple = ()
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        _check_support(self.lo, self.hi)
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if comps:
            grid = np.linspace(self.lo, self.hi, _BOUNDED_SAMPLES)
            vals = self.evaluate(grid)
            if not np.all(np.isfinite(vals)):
                bad = [c.name for j, c in enumerate(comps) if not np.all(np.isfinite(vals[:, j]))]
                raise MeasureError(f"moment components not bounded on the support: {bad}")

    @classmethod
    def powers(cls, k: int, lo: float = 0.0, hi: float = 1.0) -> "MomentMap":
        return cls(tuple(power(j) for j in range(1, k + 1)), lo, hi)

    @property
    def dimension(self) -> int:
        return len(self.components)

    def evaluate(self, x) -> np.ndarray:
        """Feature values with shape ``x.shape + (dimension,)``."""
        x = np.asarray(x, dtype=float)
        if not self.components:
            return np.zeros(x.shape + (0,))
        return np.stack([c(x) for c in self.components], axis=-1)

    def of_measure(self, mu: DiscreteMeasure) -> np.ndarray:
        return mu.weights @ self.evaluate(mu.atoms)

    @property
    def breakpoints(self) -> tuple:
        return tuple(b for c in self.components for b in c.breakpoints)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components], "support": [self.lo, self.hi]}

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentMap":
        comps = []
        for c in doc["components"]:
            kind, param = c["kind"], c.get("param", [])
            if kind == "power":
                comps.append(power(int(param[0])))
            elif kind == "threshold":
                comps.append(threshold(float(param[0])))
            elif kind == "ball":
                comps.append(ball_indicator(float(param[0]), float(param[1])))
            else:
                raise ValueError(f"unknown moment component kind {kind!r}")
        lo, hi = doc.get("support", [0.0, 1.0])
        return cls(tuple(comps), float(lo), float(hi))


@dataclass(frozen=True)
class ConstraintSpec:
    """Box of targets ``Z = I_1 x ... x I_n``; point intervals are equalities."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise MeasureError("lower and upper bounds differ in length")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise MeasureError("constraint bounds must not be NaN")
        if np.any(lower > upper):
            i = int(np.argmax(lower > upper))
            raise MeasureError(f"constraint {i}: lower bound {lower[i]} exceeds upper bound {upper[i]}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def point(cls, values: Iterable[float]) -> "ConstraintSpec":
        v = np.asarray(list(values), dtype=float)
        return cls(v, v.copy())

    @classmethod
    def none(cls) -> "ConstraintSpec":
        return cls(np.zeros(0), np.zeros(0))

    @property
    def dimension(self) -> int:
        return int(self.lower.size)

    @property
    def is_equality(self) -> np.ndarray:
        return self.lower == self.upper

    def violation(self, values) -> np.ndarray:
        """Distance of each coordinate to its interval (zero inside)."""
        v = np.asarray(values, dtype=float)
        return np.maximum(self.lower - v, 0.0) + np.maximum(v - self.upper, 0.0)

    def contains(self, values, tol: float = 0.0) -> bool:
        return bool(np.all(self.violation(values) <= tol))

    def to_dict(self) -> dict:
        return {"lower": encode_floats(self.lower), "upper": encode_floats(self.upper)}

    @classmethod
    def from_dict(cls, doc: dict) -> "ConstraintSpec":
        return cls(np.asarray(decode_floats(doc["lower"])), np.asarray(decode_floats(doc["upper"])))


# ---------------------------------------------------------------------------
# quantities of interest

@dataclass(frozen=True)
class QuantityOfInterest:
    """A semibounded functional of a probability measure.

    The built-in kinds (``tail``, ``mean``, ``set``) are affine in the
    measure and evaluate atom-wise.  A ``custom`` quantity either supplies
    an atom-level function (declared affine, not verified) or a
    measure-level function, which the prior reduction refuses.
    """

    kind: str
    threshold: float | None = None
    sets: tuple = ()
    lower: float = -math.inf
    upper: float = math.inf
    atom_fn: Callable | None = field(default=None, compare=False)
    measure_fn: Callable | None = field(default=None, compare=False)
    extra_breakpoints: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("tail", "mean", "set", "custom"):
            raise MeasureError(f"unknown quantity kind {self.kind!r}")
        if self.kind == "tail" and self.threshold is None:
            raise MeasureError("tail probability needs a threshold")
        if self.kind == "custom" and self.atom_fn is None and self.measure_fn is None:
            raise MeasureError("custom quantity needs an atom-level or measure-level function")
        if not (math.isfinite(self.lower) or math.isfinite(self.upper)):
            raise MeasureError("quantity of interest must be bounded below or above")
        if self.lower > self.upper:
            raise MeasureError("quantity bounds out of order")

    @classmethod
    def tail(cls, a: float) -> "QuantityOfInterest":
        return cls("tail", threshold=float(a), lower=0.0, upper=1.0, name=f"P[X>={a}]")

    @classmethod
    def mean(cls, lo: float = 0.0, hi: float = 1.0) -> "QuantityOfInterest":
        return cls("mean", lower=float(lo), upper=float(hi), name="E[X]")

    @classmethod
    def set_probability(cls, sets: Sequence[Interval]) -> "QuantityOfInterest":
        return cls("set", sets=tuple(sets), lower=0.0, upper=1.0, name="P[X in A]")

    @classmethod
    def custom(
        cls,
        *,
        atom_fn: Callable | None = None,
        measure_fn: Callable | None = None,
        lower: float = -math.inf,
        upper: float = math.inf,
        breakpoints: Sequence[float] = (),
        name: str = "custom",
    ) -> "QuantityOfInterest":
        return cls(
            "custom",
            lower=float(lower),
            upper=float(upper),
            atom_fn=atom_fn,
            measure_fn=measure_fn,
            extra_breakpoints=tuple(float(b) for b in breakpoints),
            name=name,
        )

    @property
    def is_affine(self) -> bool:
        return self.kind != "custom" or self.atom_fn is not None

    @property
    def breakpoints(self) -> tuple:
        if self.kind == "tail":
            return (self.threshold,)
        if self.kind == "set":
            return tuple(x for s in self.sets for x in (s.left, s.right))
        return self.extra_breakpoints

    def atom_values(self, x) -> np.ndarray:
        """``Phi(delta_x)`` for every entry of ``x`` (affine kinds only)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "tail":
            return (x >= self.threshold).astype(float)
        if self.kind == "mean":
            return x.copy()
        if self.kind == "set":
            return set_contains(self.sets, x).astype(float)
        if self.atom_fn is None:
            raise MeasureError(f"{self.name!r} has no atom-level evaluator")
        out = np.asarray(self.atom_fn(x), dtype=float)
        if out.shape != x.shape:
            out = np.vectorize(lambda t: float(self.atom_fn(t)))(x)
        return out

    def to_dict(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.kind == "tail":
            doc["threshold"] = self.threshold
        elif self.kind == "mean":
            doc["bounds"] = [encode_float(self.lower), encode_float(self.upper)]
        elif self.kind == "set":
            doc["sets"] = [s.to_dict() for s in self.sets]
        else:
            raise ValueError(f"custom quantity {self.name!r} cannot be serialized")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "QuantityOfInterest":
        kind = doc["kind"]
        if kind == "tail":
            return cls.tail(float(doc["threshold"]))
        if kind == "mean":
            lo, hi = decode_floats(doc.get("bounds", [0.0, 1.0]))
            return cls.mean(lo, hi)
        if kind == "set":
            return cls.set_probability([Interval.from_dict(s) for s in doc["sets"]])
        raise ValueError(f"unknown or non-serializable quantity kind {kind!r}")


# ---------------------------------------------------------------------------
# observations

@dataclass(frozen=True)
class Observation:
    """Data event: each of ``n`` i.i.d. samples lands in ``B_radius(center_i)``."""

    centers: np.ndarray
    radius: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        _check_support(self.lo, self.hi)
        centers = np.array(self.centers, dtype=float).reshape(-1)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise MeasureError(f"radius must be positive and finite, got {self.radius}")
        if np.any(centers < self.lo) or np.any(centers > self.hi):
            raise MeasureError(f"observation centers must lie in [{self.lo}, {self.hi}]")
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def empty(cls, radius: float = 1.0, lo: float = 0.0, hi: float = 1.0) -> "Observation":
        return cls(np.zeros(0), radius, lo, hi)

    @property
    def count(self) -> int:
        return int(self.centers.size)

    @property
    def balls(self) -> tuple:
        return tuple(Ball(float(c), self.radius) for c in self.centers)

    def indicators(self, x) -> np.ndarray:
        """``1{x in B_i}`` with shape ``x.shape + (count,)``."""
        x = np.asarray(x, dtype=float)
        return (np.abs(x[..., None] - self.centers) < self.radius).astype(float)

    def split(self, k: int) -> tuple["Observation", "Observation"]:
        return (
            Observation(self.centers[:k], self.radius, self.lo, self.hi),
            Observation(self.centers[k:], self.radius, self.lo, self.hi),
        )

    def disjoint(self) -> bool:
        c = np.sort(self.centers)
        return bool(np.all(np.diff(c) >= 2 * self.radius))

    def to_dict(self) -> dict:
        return {"centers": [float(c) for c in self.centers], "radius": self.radius, "support": [self.lo, self.hi]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Observation":
        lo, hi = doc.get("support", [0.0, 1.0])
        return cls(np.asarray(decode_floats(doc["centers"])), decode_float(doc["radius"]), float(lo), float(hi))


# ---------------------------------------------------------------------------
# operations

def measure_mass(mu: DiscreteMeasure | Density, s: SetLike) -> float:
    """Mass that ``mu`` assigns to an interval, ball or union of intervals."""
    if isinstance(mu, Density):
        return mu.mass(s)
    inside = set_contains(s, mu.atoms)
    return float(np.sum(mu.weights[inside]))


def ball_masses(mu: DiscreteMeasure | Density, obs: Observation) -> np.ndarray:
    if isinstance(mu, Density):
        return np.array([mu.mass(b) for b in obs.balls])
    return mu.weights @ obs.indicators(mu.atoms) if obs.count else np.zeros(0)


def data_probability(mu: DiscreteMeasure | Density, obs: Observation) -> float:
    """Probability that ``n`` i.i.d. draws from ``mu`` fall in the observed balls."""
    if obs.count == 0:
        return 1.0
    return float(np.prod(ball_masses(mu, obs)))


def evaluate_qoi(phi: QuantityOfInterest, mu: DiscreteMeasure) -> float:
    if phi.kind == "custom" and phi.atom_fn is None:
        value = float(phi.measure_fn(mu))
    else:
        value = float(np.dot(mu.weights, phi.atom_values(mu.atoms)))
    if not math.isfinite(value):
        raise EvaluationError(f"quantity {phi.name!r} evaluated to {value}")
    return value
