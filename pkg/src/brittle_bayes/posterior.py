"""Conditioning arithmetic, optimal posterior bounds and brittleness checks.

Three kinds of computation live here:

* exact Bayes arithmetic for a finitely supported prior over measures,
* optimal bounds over prior classes, delegated to the reductions and the
  solver, together with the six-value sandwich that brackets them,
* grid certificates for the two brittleness conditions.  Both are linear
  feasibility questions once measures are restricted to a fixed grid of
  atom locations, so they are answered by small LPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from ._jsonutil import encode_float
from .measures import (
    RENORMALIZE_TOL,
    WEIGHT_TOL,
    DiscreteMeasure,
    Density,
    MomentMap,
    Observation,
    QuantityOfInterest,
    data_probability,
    evaluate_qoi,
)
from .reduction import PriorClassSpec, ReductionError, Witness, philox, reduce_posterior, reduce_prior
from .solver import SolverConfig, SolveResult, solve

FIBER_TOL = 1e-8
MASS_FLOOR = 1e-9
ORDER_TOL = 1e-6
DEFAULT_GRID = 401

Measure = Union[DiscreteMeasure, Density]
Sampler = Callable[[np.random.Generator, int], np.ndarray]


class PosteriorError(ValueError):
    """Bad input to a posterior computation (null event, coarse grid, ...)."""


# ---------------------------------------------------------------------------
# priors and conditioning

@dataclass(frozen=True)
class DiscretePrior:
    """Finitely supported prior over measures."""

    support: tuple
    weights: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if len(support) == 0:
            raise PosteriorError("a prior needs at least one support measure")
        if weights.size != len(support):
            raise PosteriorError(f"{len(support)} support measures but {weights.size} weights")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise PosteriorError("prior weights must be finite and nonnegative")
        total = float(weights.sum())
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise PosteriorError(f"prior weights sum to {total!r}, not 1")
        if abs(total - 1.0) > WEIGHT_TOL:
            weights = weights / total
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def dirac(cls, mu: Measure) -> "DiscretePrior":
        return cls((mu,), np.array([1.0]))

    @classmethod
    def from_masses(cls, support: Sequence[Measure], masses: Sequence[float]) -> "DiscretePrior":
        """Prior proportional to nonnegative ``masses``."""
        m = np.asarray(masses, dtype=float)
        if np.any(m < 0) or not m.sum() > 0:
            raise PosteriorError("masses must be nonnegative with a positive sum")
        return cls(tuple(support), m / m.sum())

    def expect(self, phi) -> float:
        """Prior expectation of a quantity of interest."""
        return float(np.dot(self.weights, [_phi_value(phi, mu) for mu in self.support]))

    def to_dict(self) -> dict:
        for mu in self.support:
            if not isinstance(mu, DiscreteMeasure):
                raise ValueError("only priors over discrete measures serialize")
        return {"support": [mu.to_dict() for mu in self.support], "weights": [float(w) for w in self.weights]}

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscretePrior":
        return cls(tuple(DiscreteMeasure.from_dict(m) for m in doc["support"]), np.asarray(doc["weights"], float))


def _phi_value(phi, mu: Measure) -> float:
    if isinstance(phi, QuantityOfInterest):
        if isinstance(mu, Density):
            raise PosteriorError("quantities of densities need a callable phi")
        return evaluate_qoi(phi, mu)
    value = float(phi(mu))
    if not math.isfinite(value):
        raise PosteriorError(f"phi evaluated to {value}")
    return value


def conditional_expectation(prior: DiscretePrior, phi, obs: Observation) -> float:
    """Posterior mean of ``phi`` given that the data landed in the observed balls.

    ``phi`` is a :class:`QuantityOfInterest` or any callable on measures.  It
    is only evaluated on support measures with positive data probability.
    """
    d = np.array([data_probability(mu, obs) for mu in prior.support])
    mass = prior.weights * d
    den = float(mass.sum())
    if not den > 0:
        raise PosteriorError("conditioning on null event: the prior gives the data zero probability")
    live = np.flatnonzero(mass > 0)
    f = np.array([_phi_value(phi, prior.support[i]) for i in live])
    value = float(np.dot(mass[live], f)) / den
    # keep the result inside the hull of the contributing values
    return min(max(value, float(f.min())), float(f.max()))


# ---------------------------------------------------------------------------
# optimal bounds over prior classes

def posterior_upper_bound(
    phi: QuantityOfInterest,
    spec: PriorClassSpec,
    obs: Observation,
    cfg: SolverConfig | None = None,
    *,
    limit_mode: bool = False,
    n_measures: int = 2,
    extra_atoms: int = 1,
    initial: Sequence[Witness] = (),
) -> SolveResult:
    """Largest posterior value of ``phi`` over priors in the class."""
    prog = reduce_posterior(phi, spec, obs, "sup", n_measures=n_measures,
                            extra_atoms=extra_atoms, limit_mode=limit_mode)
    return solve(prog, cfg, initial)


def posterior_lower_bound(
    phi: QuantityOfInterest,
    spec: PriorClassSpec,
    obs: Observation,
    cfg: SolverConfig | None = None,
    *,
    limit_mode: bool = False,
    n_measures: int = 2,
    extra_atoms: int = 1,
    initial: Sequence[Witness] = (),
) -> SolveResult:
    """Smallest posterior value of ``phi`` over priors in the class."""
    prog = reduce_posterior(phi, spec, obs, "inf", n_measures=n_measures,
                            extra_atoms=extra_atoms, limit_mode=limit_mode)
    return solve(prog, cfg, initial)


# ---------------------------------------------------------------------------
# grid LPs

def make_grid(lo: float, hi: float, size: int, extra: Sequence[float] = ()) -> np.ndarray:
    """Uniform grid on ``[lo, hi]`` merged with extra points inside the support."""
    if size < 2:
        raise PosteriorError("a grid needs at least two points")
    pts = np.concatenate([np.linspace(lo, hi, size), np.asarray(list(extra), dtype=float)])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def _obs_points(obs: Observation | None) -> list[float]:
    if obs is None or obs.count == 0:
        return []
    r = obs.radius
    out = []
    for c in obs.centers:
        # the center, points just inside each edge and the closed complement's edges
        out += [c, c - 0.5 * r, c + 0.5 * r, c - r, c + r]
    return out


def _lp(c, a_eq, b_eq, a_ub=None, b_ub=None, upper=None):
    n = a_eq.shape[1]
    if upper is None:
        bounds = (0.0, None)
    else:
        bounds = np.zeros((n, 2))
        bounds[:, 1] = [np.inf if u is None else u for u in upper]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs-ds",
                  options={"presolve": False, "primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    x = np.maximum(res.x, 0.0)
    if np.max(np.abs(a_eq @ x - b_eq)) > FIBER_TOL:
        return None
    if a_ub is not None and a_ub.shape[0] and np.max(a_ub @ x - b_ub) > FIBER_TOL:
        return None
    assert x.size == n
    return x


@dataclass(frozen=True)
class MeasureGrid:
    x: np.ndarray
    feats: np.ndarray  # (k, G)
    lo: float
    hi: float

    @classmethod
    def build(cls, moment_map: MomentMap, size: int, extra: Sequence[float] = ()) -> "MeasureGrid":
        x = make_grid(moment_map.lo, moment_map.hi, size, list(extra) + list(moment_map.breakpoints))
        feats = moment_map.evaluate(x).T if moment_map.dimension else np.zeros((0, x.size))
        return cls(x, np.asarray(feats, float), moment_map.lo, moment_map.hi)

    def eq_system(self, q):
        a = np.vstack([np.ones((1, self.x.size)), self.feats])
        b = np.concatenate([[1.0], np.asarray(q, float).reshape(-1)])
        return a, b

    def measure(self, w: np.ndarray) -> DiscreteMeasure:
        keep = w > 1e-14
        return DiscreteMeasure(self.x[keep], w[keep] / w[keep].sum(), self.lo, self.hi).pruned(1e-14)


def fiber_range(moment_map: MomentMap, prefix: Sequence[float], component: int,
                grid: int | np.ndarray = DEFAULT_GRID) -> tuple[float, float] | None:
    """Range of the ``component``-th feature over grid measures whose first features equal ``prefix``.

    Returns ``None`` when no grid measure matches the prefix.
    """
    g = grid if isinstance(grid, MeasureGrid) else MeasureGrid.build(moment_map, grid)
    p = len(prefix)
    a = np.vstack([np.ones((1, g.x.size)), g.feats[:p]])
    b = np.concatenate([[1.0], np.asarray(prefix, float)])
    c = g.feats[component]
    lo = _lp(c, a, b)
    hi = _lp(-c, a, b)
    if lo is None or hi is None:
        return None
    return float(c @ lo), float(c @ hi)


# ---------------------------------------------------------------------------
# brittleness verdict

@dataclass(frozen=True)
class BrittlenessVerdict:
    """Outcome of the grid checks for the two brittleness conditions.

    ``conditions[0]``: every accepted sample ``q`` has a grid measure in its
    fiber with data probability exactly zero.  ``conditions[1]``: some
    sample has a grid measure in its fiber with positive data probability
    and ``Phi`` within ``delta_check`` of the grid supremum.  The lower
    counterpart of the second condition is reported separately.
    """

    conditions: tuple
    lower_condition: bool
    implied_bound: float | None
    implied_lower: float | None
    sup_phi: float
    inf_phi: float
    n_samples: int
    n_rejected: int
    upper_frequency: float
    lower_frequency: float
    delta_check: float
    grid_size: int
    grid_resolution: float
    samples: np.ndarray = field(repr=False)
    zero_data: tuple = field(repr=False, default=())
    upper_witness: tuple | None = field(repr=False, default=None)
    lower_witness: tuple | None = field(repr=False, default=None)

    @property
    def rejection_rate(self) -> float:
        total = self.n_samples + self.n_rejected
        return self.n_rejected / total if total else 0.0

    @property
    def brittle(self) -> bool:
        return bool(self.conditions[0] and self.conditions[1])

    def to_dict(self) -> dict:
        def wit(w):
            if w is None:
                return None
            i, mu, value = w
            return {"sample": int(i), "q": [float(v) for v in self.samples[i]], "measure": mu.to_dict(),
                    "phi": float(value)}

        return {
            "conditions": {"zero_data_fibers": bool(self.conditions[0]),
                           "near_extreme_with_data": bool(self.conditions[1]),
                           "near_extreme_with_data_lower": bool(self.lower_condition)},
            "implied_bound": None if self.implied_bound is None else encode_float(self.implied_bound),
            "implied_lower": None if self.implied_lower is None else encode_float(self.implied_lower),
            "sup_phi": encode_float(self.sup_phi),
            "inf_phi": encode_float(self.inf_phi),
            "n_samples": self.n_samples,
            "n_rejected": self.n_rejected,
            "rejection_rate": self.rejection_rate,
            "upper_frequency": self.upper_frequency,
            "lower_frequency": self.lower_frequency,
            "delta_check": self.delta_check,
            "grid_size": self.grid_size,
            "grid_resolution": self.grid_resolution,
            "upper_witness": wit(self.upper_witness),
            "lower_witness": wit(self.lower_witness),
        }


def _require_affine(phi: QuantityOfInterest) -> None:
    if not phi.is_affine:
        raise PosteriorError(f"{phi.name!r} has no atom-level evaluator; grid checks need an affine quantity")


def brittleness_verdict(
    phi: QuantityOfInterest,
    moment_map: MomentMap,
    sampler: Sampler,
    obs: Observation,
    delta_check: float = 0.1,
    grid: int = DEFAULT_GRID,
    *,
    n_samples: int = 128,
    seed: int = 0,
    mass_floor: float = MASS_FLOOR,
) -> BrittlenessVerdict:
    """Grid certificate for the two brittleness conditions."""
    _require_affine(phi)
    if not delta_check > 0:
        raise PosteriorError("delta_check must be positive")
    if obs.count == 0:
        raise PosteriorError("brittleness needs at least one observation")
    g = MeasureGrid.build(moment_map, grid, _obs_points(obs) + list(phi.breakpoints))
    vals = phi.atom_values(g.x)
    sup_phi, inf_phi = float(vals.max()), float(vals.min())
    ind = obs.indicators(g.x)  # (G, n)
    outside = ~np.any(ind > 0, axis=1)
    ball_rows = -ind.T  # mass in every ball >= floor
    ball_rhs = -np.full(obs.count, mass_floor)

    qs = np.asarray(sampler(philox(seed), n_samples), dtype=float).reshape(n_samples, -1)
    if qs.shape[1] != moment_map.dimension:
        raise PosteriorError(f"sampler returns {qs.shape[1]}-vectors for a {moment_map.dimension}-feature map")

    # Phi in the span of the constraint rows is constant on every fiber, so
    # one feasibility LP serves both extreme-value checks
    rows = g.eq_system(np.zeros(moment_map.dimension))[0]
    coef = np.linalg.lstsq(rows.T, vals, rcond=None)[0]
    fiber_constant = bool(np.max(np.abs(rows.T @ coef - vals)) <= 1e-12 * max(1.0, np.max(np.abs(vals))))

    accepted = []
    zero_data = []
    rejected = 0
    all_zero = True
    up_hits = lo_hits = 0
    best_up = best_lo = None
    for i, q in enumerate(qs):
        a, b = g.eq_system(q)
        # zero data probability: the data factor is a product of ball masses,
        # so one empty ball suffices; try all balls empty first, then each alone
        w0 = None
        for empty in [outside] + [ind[:, j] == 0 for j in range(obs.count)]:
            w0 = _lp(np.zeros(g.x.size), a, b, upper=[None if keep else 0.0 for keep in empty])
            if w0 is not None or obs.count == 1:
                break
        if w0 is None:
            if _lp(np.zeros(g.x.size), a, b) is None:
                rejected += 1
                continue
            all_zero = False
            zero_data.append(None)
        else:
            zero_data.append(g.measure(w0))
        accepted.append(i)
        # near-extreme values with positive data probability
        wu = _lp(-vals, a, b, ball_rows, ball_rhs)
        if wu is not None:
            v = float(vals @ wu)
            if v > sup_phi - delta_check:
                up_hits += 1
            if best_up is None or v > best_up[2]:
                best_up = (i, g.measure(wu), v)
        wl = wu if fiber_constant else _lp(vals, a, b, ball_rows, ball_rhs)
        if wl is not None:
            v = float(vals @ wl)
            if v < inf_phi + delta_check:
                lo_hits += 1
            if best_lo is None or v < best_lo[2]:
                best_lo = (i, g.measure(wl), v)

    if rejected > 0.5 * n_samples:
        raise PosteriorError(
            f"grid too coarse: {rejected} of {n_samples} sampled moment vectors have no grid measure "
            f"({g.x.size} points)"
        )
    n_acc = len(accepted)
    cond_i = bool(all_zero and n_acc > 0)
    cond_ii = up_hits > 0
    cond_lo = lo_hits > 0
    brittle = cond_i and cond_ii
    return BrittlenessVerdict(
        conditions=(cond_i, cond_ii),
        lower_condition=cond_lo,
        implied_bound=sup_phi if brittle else None,
        implied_lower=inf_phi if (cond_i and cond_lo) else None,
        sup_phi=sup_phi,
        inf_phi=inf_phi,
        n_samples=n_acc,
        n_rejected=rejected,
        upper_frequency=up_hits / n_acc if n_acc else 0.0,
        lower_frequency=lo_hits / n_acc if n_acc else 0.0,
        delta_check=float(delta_check),
        grid_size=int(g.x.size),
        grid_resolution=float(np.max(np.diff(g.x))),
        samples=qs[accepted] if accepted else np.zeros((0, qs.shape[1])),
        zero_data=tuple(zero_data),
        upper_witness=None if best_up is None else (accepted.index(best_up[0]), best_up[1], best_up[2]),
        lower_witness=None if best_lo is None else (accepted.index(best_lo[0]), best_lo[1], best_lo[2]),
    )


def dilation_prior(verdict: BrittlenessVerdict, direction: str = "sup") -> DiscretePrior:
    """A prior whose moment push-forward is the empirical sample law.

    Every sample gets its zero-data fiber measure except the one carrying the
    extreme positive-data witness, so the posterior equals that witness's
    value of ``Phi``.
    """
    if not verdict.conditions[0]:
        raise PosteriorError("the zero-data condition does not hold; no dilation prior")
    wit = verdict.upper_witness if direction == "sup" else verdict.lower_witness
    if wit is None:
        raise PosteriorError("no positive-data witness was found")
    idx, mu, _ = wit
    support = list(verdict.zero_data)
    support[idx] = mu
    n = len(support)
    return DiscretePrior(tuple(support), np.full(n, 1.0 / n))


# ---------------------------------------------------------------------------
# essential supremum along a section

@dataclass(frozen=True)
class EssSupEstimate:
    value: float
    n_samples: int
    argmax: np.ndarray

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"value": encode_float(self.value), "n_samples": self.n_samples,
                "argmax": [float(v) for v in self.argmax]}


def essential_sup_bound(
    phi,
    moment_map: MomentMap,
    sampler: Sampler,
    section: Callable[[np.ndarray], DiscreteMeasure],
    obs: Observation,
    *,
    n_samples: int = 10_000,
    seed: int = 0,
) -> EssSupEstimate:
    """Empirical maximum of ``phi(section(q))`` over ``q`` drawn from the sampler.

    Every section measure must match its moment target to 1e-8 and give the
    data positive probability.
    """
    qs = np.asarray(sampler(philox(seed), n_samples), dtype=float).reshape(n_samples, -1)
    best, arg = -math.inf, qs[0]
    for q in qs:
        mu = section(q)
        got = moment_map.of_measure(mu)
        if got.shape != q.shape or np.max(np.abs(got - q), initial=0.0) > FIBER_TOL:
            raise PosteriorError(f"section leaves its fiber at q={q.tolist()}: moments {got.tolist()}")
        if not data_probability(mu, obs) > 0:
            raise PosteriorError(f"section measure at q={q.tolist()} gives the data zero probability")
        v = _phi_value(phi, mu)
        if v > best:
            best, arg = v, q
    return EssSupEstimate(float(best), int(n_samples), np.asarray(arg))


# ---------------------------------------------------------------------------
# information-bound sandwich

@dataclass(frozen=True)
class BoundSandwich:
    """``L_A <= L_Pi <= L_API <= U_API <= U_Pi <= U_A`` (when the middle is nonempty)."""

    L_A: float
    L_Pi: float
    L_API: float
    U_API: float
    U_Pi: float
    U_A: float
    grid_size: int = 0

    def as_tuple(self) -> tuple:
        return (self.L_A, self.L_Pi, self.L_API, self.U_API, self.U_Pi, self.U_A)

    @property
    def middle_empty(self) -> bool:
        return self.U_API == -math.inf and self.L_API == math.inf

    def ordered(self, tol: float = ORDER_TOL) -> bool:
        if self.middle_empty:
            return self.L_A <= self.L_Pi + tol or self.L_Pi == math.inf
        v = self.as_tuple()
        return all(v[i] <= v[i + 1] + tol for i in range(5))

    def to_dict(self) -> dict:
        names = ("L_A", "L_Pi", "L_API", "U_API", "U_Pi", "U_A")
        doc = {k: encode_float(v) for k, v in zip(names, self.as_tuple())}
        doc["grid_size"] = self.grid_size
        return doc


def _grid_extreme(g: MeasureGrid, vals, spec: PriorClassSpec, obs, sign: float):
    """Best ``Phi`` over grid measures with features in ``Z`` (and data mass when observed)."""
    z = spec.constraints
    k = g.feats.shape[0]
    eq = z.is_equality if k else np.zeros(0, bool)
    a_eq = np.vstack([np.ones((1, g.x.size)), g.feats[eq]])
    b_eq = np.concatenate([[1.0], z.lower[eq]])
    rows, rhs = [], []
    for j in np.flatnonzero(~eq):
        if math.isfinite(z.upper[j]):
            rows.append(g.feats[j])
            rhs.append(z.upper[j])
        if math.isfinite(z.lower[j]):
            rows.append(-g.feats[j])
            rhs.append(-z.lower[j])
    if obs is not None and obs.count:
        ind = obs.indicators(g.x)
        rows.extend(-ind.T)
        rhs.extend([-MASS_FLOOR] * obs.count)
    a_ub = np.vstack(rows) if rows else None
    b_ub = np.asarray(rhs) if rows else None
    w = _lp(-sign * vals, a_eq, b_eq, a_ub, b_ub)
    if w is None:
        return None
    mu = g.measure(w)
    return float(vals @ w), mu


def info_bound_sandwich(
    phi: QuantityOfInterest,
    spec: PriorClassSpec,
    obs: Observation | None = None,
    grid: int = 513,
    cfg: SolverConfig | None = None,
) -> BoundSandwich:
    """All six bounds of the sandwich, with the ordering checked afterwards.

    A-level values are grid extremes of ``Phi`` over Dirac measures.  The
    A_Pi level maximizes over grid measures admissible as Dirac priors (and
    charging every ball when data are given).  The Pi level comes from the
    solver, warm-started at the A_Pi optimizers so that it cannot fall
    behind them.
    """
    _require_affine(phi)
    if grid < 2:
        raise PosteriorError("grid must have at least two points")
    has_data = obs is not None and obs.count > 0
    g = MeasureGrid.build(spec.moment_map, grid, _obs_points(obs) + list(phi.breakpoints))
    vals = phi.atom_values(g.x)
    out = {}
    for direction, sign in (("sup", 1.0), ("inf", -1.0)):
        best = _grid_extreme(g, vals, spec, obs if has_data else None, sign)
        api = -sign * math.inf if best is None else best[0]
        initial = () if best is None else (Witness((best[1],), np.array([1.0]), np.zeros((1, 0))),)
        try:
            if has_data:
                prog = reduce_posterior(phi, spec, obs, direction)
            else:
                prog = reduce_prior(phi, spec, direction)
        except ReductionError as exc:
            if "void constraint set" not in str(exc):
                raise
            prog = None
        if prog is None:
            pi = -sign * math.inf
            atoms = np.zeros(0)
        else:
            if initial and initial[0].measures[0].n_atoms > prog.n_atoms:
                initial = ()
            res = solve(prog, cfg, initial)
            pi = res.value
            atoms = (np.concatenate([m.atoms for m in res.witness.measures])
                     if res.feasible and res.witness is not None else np.zeros(0))
        extra = phi.atom_values(atoms) if atoms.size else np.zeros(0)
        all_vals = np.concatenate([vals, extra])
        a_level = float(all_vals.max()) if sign > 0 else float(all_vals.min())
        out[direction] = (a_level, pi, api)
    sandwich = BoundSandwich(
        L_A=out["inf"][0], L_Pi=out["inf"][1], L_API=out["inf"][2],
        U_API=out["sup"][2], U_Pi=out["sup"][1], U_A=out["sup"][0],
        grid_size=int(g.x.size),
    )
    if not sandwich.ordered():
        raise PosteriorError(f"sandwich ordering violated: {sandwich.as_tuple()}")
    return sandwich


__all__ = [
    "BoundSandwich",
    "BrittlenessVerdict",
    "DiscretePrior",
    "EssSupEstimate",
    "MeasureGrid",
    "PosteriorError",
    "brittleness_verdict",
    "conditional_expectation",
    "dilation_prior",
    "essential_sup_bound",
    "fiber_range",
    "info_bound_sandwich",
    "make_grid",
    "posterior_lower_bound",
    "posterior_upper_bound",
]
