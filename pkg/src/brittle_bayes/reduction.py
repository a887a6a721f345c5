"""Reduce optimization over priors to finite programs over weighted Dirac masses.

Three builders cover the reduction results used here:

* ``reduce_prior``: priors constrained by ``E_pi[Psi] in Z`` with ``n``
  constraints need only one measure with ``n + 1`` atoms when the quantity
  of interest is affine in the measure;
* ``reduce_posterior``: conditional expectations become a linear-fractional
  program over a few mixed measures, each with a bounded number of atoms;
* ``reduce_positive``: unnormalized measures with ``E[psi_0] = 1`` and
  ``E[psi_i] = 0``.

A ``ReducedProgram`` is a plain description plus a batched evaluator; the
``solver`` module does the numerical work.  ``nested_prior_value`` is the
other route: an outer expectation over moment values of an inner supremum
over the moment fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._jsonutil import encode_floats
from .measures import (
    ConstraintSpec,
    Density,
    DiscreteMeasure,
    MeasureError,
    MomentMap,
    Observation,
    QuantityOfInterest,
    ball_masses,
    custom_component,
    data_probability,
    evaluate_qoi,
    power,
)

DEFAULT_BETA_FLOOR = 1e-6
_LOG_FLOOR = 1e-300


class ReductionError(ValueError):
    """Raised when a problem cannot be reduced as requested."""


class NestedSamplingError(RuntimeError):
    """Raised when too many moment samples fall outside the moment body."""


class ProgramKind(str, Enum):
    PRIOR_PRIMARY = "PRIOR_PRIMARY"
    POSITIVE_MEASURE = "POSITIVE_MEASURE"
    POSTERIOR_FRACTIONAL = "POSTERIOR_FRACTIONAL"
    LAMBDA_THRESHOLD = "LAMBDA_THRESHOLD"


@dataclass(frozen=True)
class DataBand:
    """Multiplicative band on the data probability relative to a reference measure.

    ``mode="joint"`` bounds ``mu^n[B] / mu0^n[B]`` in ``[1/level, level]``;
    ``mode="per-ball"`` bounds every ``mu[B_i] / mu0[B_i]`` the same way.
    """

    level: float
    mode: str = "joint"
    reference: DiscreteMeasure | Density = field(default_factory=Density.uniform)

    def __post_init__(self):
        if self.mode not in ("joint", "per-ball"):
            raise ReductionError(f"unknown band mode {self.mode!r}")
        if self.mode == "joint" and not self.level >= 1:
            raise ReductionError(f"band level must be >= 1, got {self.level}")
        if self.mode == "per-ball" and not self.level > 1:
            raise ReductionError(f"per-ball band level must be > 1, got {self.level}")


@dataclass(frozen=True)
class PriorClassSpec:
    """Priors whose expected features ``E_pi[Psi]`` lie in the box ``Z``."""

    moment_map: MomentMap
    constraints: ConstraintSpec
    band: DataBand | None = None

    def __post_init__(self):
        if self.moment_map.dimension != self.constraints.dimension:
            raise ReductionError(
                f"moment map has {self.moment_map.dimension} components but "
                f"{self.constraints.dimension} constraint intervals were given"
            )

    @property
    def support(self) -> tuple[float, float]:
        return self.moment_map.lo, self.moment_map.hi

    @classmethod
    def unconstrained(cls, lo: float = 0.0, hi: float = 1.0) -> "PriorClassSpec":
        return cls(MomentMap((), lo, hi), ConstraintSpec.none())

    @classmethod
    def mean_equals(cls, q: float, lo: float = 0.0, hi: float = 1.0) -> "PriorClassSpec":
        return cls(MomentMap((power(1),), lo, hi), ConstraintSpec.point([q]))


# ---------------------------------------------------------------------------
# the program

@dataclass(frozen=True)
class Witness:
    """A point of a reduced program: measures, mixing weights and data slacks."""

    measures: tuple
    mix: np.ndarray
    slacks: np.ndarray

    def to_dict(self) -> dict:
        return {
            "measures": [m.to_dict() for m in self.measures],
            "mix": [float(w) for w in self.mix],
            "slacks": [[float(s) for s in row] for row in self.slacks],
        }


@dataclass(frozen=True)
class ReducedProgram:
    """Finite-dimensional optimization instance produced by a reduction.

    Variables are ``n_measures`` blocks of ``n_atoms`` positions and
    weights, simplex mixing weights across the blocks, and ``n_slack``
    data slacks per block (limit mode only).  Any block may be pinned.
    """

    kind: ProgramKind
    direction: str
    n_measures: int
    n_atoms: int
    phi: QuantityOfInterest
    features: MomentMap
    targets: ConstraintSpec
    lo: float = 0.0
    hi: float = 1.0
    weight_mode: str = "simplex"
    observation: Observation | None = None
    limit_mode: bool = False
    band: DataBand | None = None
    beta_floor: float = DEFAULT_BETA_FLOOR
    atom_objective: Callable | None = field(default=None, compare=False)
    lam: float = 0.0
    fixed_positions: np.ndarray | None = None
    fixed_weights: np.ndarray | None = None
    fixed_mix: np.ndarray | None = None
    fixed_slacks: np.ndarray | None = None
    weight_cap: float = 1e6
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.direction not in ("sup", "inf"):
            raise ReductionError(f"direction must be 'sup' or 'inf', got {self.direction!r}")
        if self.n_measures < 1 or self.n_atoms < 1:
            raise ReductionError("a program needs at least one measure with one atom")
        if self.features.dimension != self.targets.dimension:
            raise ReductionError("feature map and targets differ in dimension")
        if self.weight_mode not in ("simplex", "positive"):
            raise ReductionError(f"unknown weight mode {self.weight_mode!r}")
        if self.kind == ProgramKind.LAMBDA_THRESHOLD and self.direction != "sup":
            raise ReductionError("threshold programs are posed as suprema")
        if self.band is not None and self.observation is None:
            raise ReductionError("a data band needs an observation")

    # -- structure ---------------------------------------------------------

    @property
    def fractional(self) -> bool:
        return self.kind == ProgramKind.POSTERIOR_FRACTIONAL

    @property
    def n_obs(self) -> int:
        return 0 if self.observation is None else self.observation.count

    @property
    def has_data(self) -> bool:
        return self.kind in (ProgramKind.POSTERIOR_FRACTIONAL, ProgramKind.LAMBDA_THRESHOLD) and self.n_obs > 0

    @property
    def n_slack(self) -> int:
        if not (self.limit_mode and self.has_data):
            return 0
        if self.band is not None and self.band.mode == "joint":
            return 1
        return self.n_obs

    @property
    def slack_bounds(self) -> tuple[float, float]:
        if self.band is not None:
            return 1.0 / self.band.level, self.band.level
        return self.beta_floor, 1.0

    @property
    def breakpoints(self) -> np.ndarray:
        pts = [self.lo, self.hi, *self.phi.breakpoints, *self.features.breakpoints]
        if self.observation is not None:
            pts.extend(self.observation.centers)
        pts = [p for p in pts if p is not None and self.lo <= p <= self.hi]
        return np.unique(np.asarray(pts, dtype=float))

    @property
    def reference_ball_masses(self) -> np.ndarray:
        if self.band is None:
            return np.ones(self.n_obs)
        return ball_masses(self.band.reference, self.observation)

    def constraint_bounds(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Lower/upper bounds and names of every constraint row."""
        lower = list(self.targets.lower)
        upper = list(self.targets.upper)
        names = [f"E[{c.name}]" for c in self.features.components]
        if self.band is not None and not self.limit_mode:
            width = math.log(self.band.level)
            per = 1 if self.band.mode == "joint" else self.n_obs
            for j in range(self.n_measures):
                for i in range(per):
                    lower.append(-width)
                    upper.append(width)
                    names.append(f"band[{j}]" if per == 1 else f"band[{j},{i}]")
        return np.asarray(lower, float), np.asarray(upper, float), names

    # -- batched evaluation ------------------------------------------------

    def _atom_objective(self, pos: np.ndarray) -> np.ndarray:
        if self.atom_objective is not None:
            return np.asarray(self.atom_objective(pos), dtype=float)
        return self.phi.atom_values(pos)

    def evaluate(self, pos, wts, mix, slack):
        """Numerator, denominator and constraint rows for a batch of points.

        Shapes: ``pos``/``wts`` are ``(B, M, K)``, ``mix`` is ``(B, M)``,
        ``slack`` is ``(B, M, S)``.  Returns ``num (B,)``, ``den (B,)``,
        ``rows (B, C)``.
        """
        phi_atoms = self._atom_objective(pos)
        phi_meas = np.sum(wts * phi_atoms, axis=-1)
        rows = []
        if self.features.dimension:
            feats = self.features.evaluate(pos)
            psi = np.einsum("bmk,bmke->bme", wts, feats)
            rows.append(np.einsum("bm,bme->be", mix, psi))
        data = None
        if self.has_data:
            if self.limit_mode:
                data = np.prod(slack, axis=-1)
            else:
                masses = np.einsum("bmk,bmki->bmi", wts, self.observation.indicators(pos))
                data = np.prod(masses, axis=-1)
                if self.band is not None:
                    ref = self.reference_ball_masses
                    if self.band.mode == "joint":
                        band_rows = np.log(np.maximum(data, _LOG_FLOOR)) - np.sum(np.log(ref))
                        rows.append(band_rows)
                    else:
                        band_rows = np.log(np.maximum(masses, _LOG_FLOOR)) - np.log(ref)
                        rows.append(band_rows.reshape(band_rows.shape[0], -1))
        if data is None:
            data = np.ones_like(phi_meas)
        if self.kind == ProgramKind.POSTERIOR_FRACTIONAL:
            num = np.sum(mix * phi_meas * data, axis=-1)
            den = np.sum(mix * data, axis=-1)
        elif self.kind == ProgramKind.LAMBDA_THRESHOLD:
            num = np.sum(mix * (phi_meas - self.lam) * data, axis=-1)
            den = np.ones_like(num)
        else:
            num = np.sum(mix * phi_meas, axis=-1)
            den = np.ones_like(num)
        rows = np.concatenate(rows, axis=-1) if rows else np.zeros((num.shape[0], 0))
        return num, den, rows

    # -- witnesses ---------------------------------------------------------

    def make_witness(self, pos, wts, mix, slack) -> Witness:
        positive = self.weight_mode == "positive"
        measures = []
        for j in range(self.n_measures):
            p = np.clip(pos[j], self.lo, self.hi)
            w = np.maximum(wts[j], 0.0)
            if not positive:
                w = w / w.sum()
            measures.append(DiscreteMeasure(p, w, self.lo, self.hi, positive))
        return Witness(tuple(measures), np.asarray(mix, float).copy(), np.asarray(slack, float).copy())

    def measure_data(self, w: Witness) -> np.ndarray:
        """Data probability of each witness measure (slack product in limit mode)."""
        if not self.has_data:
            return np.ones(len(w.measures))
        if self.limit_mode:
            return np.prod(w.slacks, axis=-1)
        return np.array([data_probability(m, self.observation) for m in w.measures])

    def witness_terms(self, w: Witness) -> tuple[float, float, np.ndarray]:
        """Objective numerator, denominator and constraint rows, via ``measures``."""
        if self.atom_objective is not None:
            phis = np.array([m.expect(self.atom_objective) for m in w.measures])
        else:
            phis = np.array([evaluate_qoi(self.phi, m) for m in w.measures])
        data = self.measure_data(w)
        rows = []
        if self.features.dimension:
            psi = np.array([self.features.of_measure(m) for m in w.measures])
            rows.extend(w.mix @ psi)
        if self.band is not None and not self.limit_mode:
            ref = self.reference_ball_masses
            for m in w.measures:
                masses = ball_masses(m, self.observation)
                if self.band.mode == "joint":
                    rows.append(math.log(max(float(np.prod(masses)), _LOG_FLOOR)) - float(np.sum(np.log(ref))))
                else:
                    rows.extend(np.log(np.maximum(masses, _LOG_FLOOR)) - np.log(ref))
        rows = np.asarray(rows, dtype=float)
        if self.kind == ProgramKind.POSTERIOR_FRACTIONAL:
            return float(np.sum(w.mix * phis * data)), float(np.sum(w.mix * data)), rows
        if self.kind == ProgramKind.LAMBDA_THRESHOLD:
            return float(np.sum(w.mix * (phis - self.lam) * data)), 1.0, rows
        return float(np.sum(w.mix * phis)), 1.0, rows

    def residual(self, rows: np.ndarray) -> float:
        lower, upper, _ = self.constraint_bounds()
        if rows.size == 0:
            return 0.0
        v = np.maximum(lower - rows, 0.0) + np.maximum(rows - upper, 0.0)
        return float(np.max(v))

    def normalization_weights(self, w: Witness) -> np.ndarray:
        """Unnormalized weights ``alpha_i`` with ``sum alpha_i D(mu_i)[B] = 1``."""
        data = self.measure_data(w)
        den = float(np.sum(w.mix * data))
        return w.mix / den if den > 0 else np.full_like(w.mix, math.inf)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        lower, upper, names = self.constraint_bounds()
        doc = {
            "kind": self.kind.value,
            "direction": self.direction,
            "n_measures": self.n_measures,
            "n_atoms": self.n_atoms,
            "n_slack": self.n_slack,
            "support": [self.lo, self.hi],
            "weight_mode": self.weight_mode,
            "objective": {
                "form": "linear-fractional" if self.fractional else "linear",
                "quantity": self.phi.name,
                "threshold_lambda": self.lam if self.kind == ProgramKind.LAMBDA_THRESHOLD else None,
            },
            "variables": {
                "positions": {"count": self.n_measures * self.n_atoms, "bounds": [self.lo, self.hi],
                              "pinned": self.fixed_positions is not None},
                "weights": {"count": self.n_measures * self.n_atoms, "domain": self.weight_mode,
                            "pinned": self.fixed_weights is not None},
                "mix": {"count": self.n_measures, "domain": "simplex", "pinned": self.fixed_mix is not None},
                "slacks": {"count": self.n_measures * self.n_slack,
                           "bounds": encode_floats(self.slack_bounds) if self.n_slack else None},
            },
            "constraints": [
                {"name": n, "lower": lo, "upper": hi}
                for n, lo, hi in zip(names, encode_floats(lower), encode_floats(upper))
            ],
            "data": None if self.observation is None else {
                "observation": self.observation.to_dict(),
                "limit_mode": self.limit_mode,
                "band": None if self.band is None else {"level": self.band.level, "mode": self.band.mode},
            },
        }
        if self.fractional:
            doc["constraints"].append({"name": "normalization sum alpha_i D(mu_i)[B]", "lower": 1.0, "upper": 1.0,
                                       "note": "enforced by rescaling the mixing weights"})
        return doc


# ---------------------------------------------------------------------------
# builders

def _check_affine(phi: QuantityOfInterest) -> None:
    if not phi.is_affine:
        raise ReductionError(
            f"quantity {phi.name!r} is not affine in the measure; the Dirac reduction "
            "does not apply and it requires nested path evaluation"
        )


def reduce_prior(phi: QuantityOfInterest, spec: PriorClassSpec, direction: str = "sup") -> ReducedProgram:
    """One measure with ``n + 1`` atoms for ``n`` constraints."""
    if spec.band is not None:
        raise ReductionError("prior reduction does not take a data-probability band")
    _check_affine(phi)
    lo, hi = spec.support
    n = spec.constraints.dimension
    return ReducedProgram(
        kind=ProgramKind.PRIOR_PRIMARY,
        direction=direction,
        n_measures=1,
        n_atoms=n + 1,
        phi=phi,
        features=spec.moment_map,
        targets=spec.constraints,
        lo=lo,
        hi=hi,
        fixed_mix=np.ones(1),
    )


def _attainable_box(features: MomentMap, samples: int = 2049) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(features.lo, features.hi, samples)
    grid = np.unique(np.concatenate([grid, np.asarray(features.breakpoints, float)]))
    grid = grid[(grid >= features.lo) & (grid <= features.hi)]
    vals = features.evaluate(grid)
    return vals.min(axis=0), vals.max(axis=0)


def reduce_posterior(
    phi: QuantityOfInterest,
    spec: PriorClassSpec,
    obs: Observation,
    direction: str = "sup",
    *,
    n_measures: int = 2,
    extra_atoms: int = 1,
    limit_mode: bool = False,
    beta_floor: float = DEFAULT_BETA_FLOOR,
) -> ReducedProgram:
    """Linear-fractional program for the optimal conditional expectation.

    Each measure gets ``n_constraints + n_obs + 1 + extra_atoms`` atoms.  In
    limit mode the ball masses are free slacks and only
    ``n_constraints + 1 + extra_atoms`` atoms are kept.
    """
    _check_affine(phi)
    if n_measures < 1 or extra_atoms < 0:
        raise ReductionError("need n_measures >= 1 and extra_atoms >= 0")
    lo, hi = spec.support
    if (obs.lo, obs.hi) != (lo, hi):
        raise ReductionError("observation and prior class live on different supports")
    box_lo, box_hi = _attainable_box(spec.moment_map)
    z = spec.constraints
    if np.any(z.upper < box_lo - 1e-12) or np.any(z.lower > box_hi + 1e-12):
        raise ReductionError("void constraint set: the targets miss every attainable feature value")
    n_c = z.dimension
    n_atoms = n_c + 1 + extra_atoms + (0 if limit_mode else obs.count)
    return ReducedProgram(
        kind=ProgramKind.POSTERIOR_FRACTIONAL,
        direction=direction,
        n_measures=n_measures,
        n_atoms=n_atoms,
        phi=phi,
        features=spec.moment_map,
        targets=z,
        lo=lo,
        hi=hi,
        observation=obs,
        limit_mode=limit_mode,
        band=spec.band,
        beta_floor=beta_floor,
    )


def reduce_positive(
    phi: QuantityOfInterest,
    psi0: Callable,
    psis: Sequence[Callable] = (),
    direction: str = "sup",
    *,
    factorized: bool = False,
    lo: float = 0.0,
    hi: float = 1.0,
    check_samples: int = 1025,
) -> ReducedProgram:
    """Unnormalized-measure program with ``E[psi0] = 1`` and ``E[psi_i] = 0``.

    With ``factorized=True`` the quantity is read as ``Phi = psi0 * phi``:
    the objective integrates ``psi0 * phi`` atom-wise and ``n`` atoms
    suffice; otherwise the objective integrates ``phi`` and ``n + 1`` atoms
    are used.
    """
    _check_affine(phi)
    grid = np.linspace(lo, hi, check_samples)
    vals = np.asarray(psi0(grid), dtype=float)
    if vals.shape != grid.shape:
        vals = np.array([float(psi0(t)) for t in grid])
    if np.any(vals < 0):
        x = float(grid[np.argmax(vals < 0)])
        raise ReductionError(f"psi0 must be nonnegative on the support; psi0({x}) = {float(psi0(x))}")

    comps = [custom_component(psi0, "psi0")] + [custom_component(f, f"psi{i + 1}") for i, f in enumerate(psis)]
    features = MomentMap(tuple(comps), lo, hi)
    targets = ConstraintSpec.point([1.0] + [0.0] * len(psis))
    n = len(psis) + 1
    if factorized:
        def objective(x, _phi=phi, _psi0=psi0):
            return np.asarray(_psi0(x), float) * _phi.atom_values(x)
    else:
        objective = None
    return ReducedProgram(
        kind=ProgramKind.POSITIVE_MEASURE,
        direction=direction,
        n_measures=1,
        n_atoms=n if factorized else n + 1,
        phi=phi,
        features=features,
        targets=targets,
        lo=lo,
        hi=hi,
        weight_mode="positive",
        atom_objective=objective,
        fixed_mix=np.ones(1),
        info={"factorized": factorized},
    )


def pinned_posterior(
    phi: QuantityOfInterest,
    measures: Sequence[DiscreteMeasure],
    weights: Sequence[float],
    obs: Observation,
) -> ReducedProgram:
    """Posterior program whose measures and mixing weights are all fixed."""
    m = len(measures)
    k = max(mu.n_atoms for mu in measures)
    lo, hi = measures[0].lo, measures[0].hi
    pos = np.full((m, k), lo)
    wts = np.zeros((m, k))
    for j, mu in enumerate(measures):
        pos[j, : mu.n_atoms] = mu.atoms
        wts[j, : mu.n_atoms] = mu.weights
    return ReducedProgram(
        kind=ProgramKind.POSTERIOR_FRACTIONAL,
        direction="sup",
        n_measures=m,
        n_atoms=k,
        phi=phi,
        features=MomentMap((), lo, hi),
        targets=ConstraintSpec.none(),
        lo=lo,
        hi=hi,
        observation=obs,
        fixed_positions=pos,
        fixed_weights=wts,
        fixed_mix=np.asarray(weights, float) / float(np.sum(weights)),
    )


def threshold_program(program: ReducedProgram, lam: float) -> ReducedProgram:
    """The program ``sup E_pi[(Phi - lam) D]`` over the same class."""
    if program.kind not in (ProgramKind.POSTERIOR_FRACTIONAL, ProgramKind.LAMBDA_THRESHOLD):
        raise ReductionError("threshold programs derive from posterior programs")
    if program.direction != "sup":
        raise ReductionError("threshold programs are posed for suprema")
    return replace(program, kind=ProgramKind.LAMBDA_THRESHOLD, lam=float(lam))


# ---------------------------------------------------------------------------
# nested route

def markov_inner_sup(q: float, a: float) -> float:
    """``sup mu[X >= a]`` over measures on [0, 1] with mean ``q``."""
    if not 0.0 < a < 1.0:
        raise ReductionError(f"threshold must lie in (0, 1), got {a}")
    return min(1.0, q / a)


@dataclass(frozen=True)
class NestedEstimate:
    value: float
    stderr: float
    n_samples: int
    n_rejected: int

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples,
                "n_rejected": self.n_rejected}


def philox(seed: int) -> np.random.Generator:
    """Counter-based generator used for every Monte Carlo loop in the package."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def nested_prior_value(
    phi: QuantityOfInterest,
    moment_map: MomentMap,
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    inner: Callable[[np.ndarray], float | None] | None = None,
    n_samples: int = 4096,
    seed: int = 0,
) -> NestedEstimate:
    """Monte Carlo estimate of ``E_{q ~ Q}[sup_{mu in Psi^-1(q)} Phi(mu)]``.

    ``sampler(rng, n)`` returns ``n`` moment vectors; ``inner(q)`` returns the
    fiber supremum or ``None``/NaN when the fiber is empty, in which case the
    sample is rejected.
    """
    if inner is None:
        if phi.kind == "tail" and moment_map.dimension == 1 and moment_map.components[0].kind == "power" \
                and moment_map.components[0].param == (1,) and (moment_map.lo, moment_map.hi) == (0.0, 1.0):
            a = phi.threshold

            def inner(q, _a=a):
                q1 = float(np.ravel(q)[0])
                return markov_inner_sup(q1, _a) if 0.0 <= q1 <= 1.0 else None
        else:
            raise ReductionError("no built-in inner oracle for this quantity and moment map")
    if n_samples < 1:
        raise ReductionError("need at least one sample")
    rng = philox(seed)
    qs = np.asarray(sampler(rng, n_samples), dtype=float).reshape(n_samples, -1)
    values = []
    rejected = 0
    for q in qs:
        v = inner(q)
        if v is None or not math.isfinite(float(v)):
            rejected += 1
        else:
            values.append(float(v))
    if rejected > 0.5 * n_samples:
        raise NestedSamplingError(
            f"sampler leaves moment body: {rejected} of {n_samples} samples have an empty fiber"
        )
    vals = np.asarray(values)
    stderr = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return NestedEstimate(float(vals.mean()), stderr, int(vals.size), rejected)


def nested_outer_program(
    inner: Callable[[np.ndarray], np.ndarray],
    constraints: ConstraintSpec,
    direction: str = "sup",
    *,
    lo: float = 0.0,
    hi: float = 1.0,
    breakpoints: Sequence[float] = (),
    bounds: tuple[float, float] = (0.0, 1.0),
) -> ReducedProgram:
    """Outer problem of the nested route for a scalar moment.

    ``E_Q[inner(q)]`` is affine in ``Q``, so the outer optimization over
    moment distributions with ``E_Q[q] in Z`` reduces to a Dirac program on
    the moment range ``[lo, hi]``.
    """
    outer_phi = QuantityOfInterest.custom(
        atom_fn=inner, lower=bounds[0], upper=bounds[1], breakpoints=breakpoints, name="inner-sup"
    )
    spec = PriorClassSpec(MomentMap((power(1),), lo, hi), constraints)
    return reduce_prior(outer_phi, spec, direction)


__all__ = [
    "DataBand",
    "NestedEstimate",
    "NestedSamplingError",
    "PriorClassSpec",
    "ProgramKind",
    "ReducedProgram",
    "ReductionError",
    "Witness",
    "markov_inner_sup",
    "nested_outer_program",
    "nested_prior_value",
    "philox",
    "pinned_posterior",
    "reduce_positive",
    "reduce_posterior",
    "reduce_prior",
    "threshold_program",
    "MeasureError",
]
