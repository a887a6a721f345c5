"""Named, reproducible worked examples.

Each scenario returns a :class:`ScenarioReport` comparing computed values
against an expected value from a closed form or an independent oracle.
Scenarios are deterministic for a fixed seed and solver configuration.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from ._jsonutil import dumps, encode_float, encode_floats
from .measures import (
    ConstraintSpec,
    DiscreteMeasure,
    MomentMap,
    Observation,
    QuantityOfInterest,
    power,
)
from .posterior import (
    DEFAULT_GRID,
    DiscretePrior,
    MeasureGrid,
    brittleness_verdict,
    conditional_expectation,
    fiber_range,
    posterior_upper_bound,
)
from .reduction import (
    DataBand,
    PriorClassSpec,
    Witness,
    nested_outer_program,
    nested_prior_value,
    reduce_prior,
)
from .solver import SolverConfig, solve

CLOSED_FORM_TOL = 1e-9
SOLVER_TOL = 1e-3
QUADRATURE_TOL = 5e-3

# light default: the grid LP candidate already pins these programs down
SCENARIO_SOLVER = SolverConfig(restarts=8, max_iters=400)


@dataclass(frozen=True)
class ScenarioReport:
    """Computed-versus-expected record for one scenario run.

    ``source`` says where the expected value comes from: ``"closed form"``
    (a formula evaluated directly), ``"oracle"`` (an independent
    computation) or ``"limit"`` (a degenerate case with an obvious answer).
    """

    name: str
    parameters: dict
    computed: tuple
    expected: tuple
    source: str
    tolerance: float
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def abs_error(self) -> float:
        c = np.asarray(self.computed, float)
        e = np.asarray(self.expected, float)
        if c.shape != e.shape:
            return math.inf
        if c.size == 0:
            return 0.0
        diff = np.abs(c - e)
        diff[(c == e)] = 0.0  # matching infinities
        return float(np.max(np.where(np.isnan(diff), math.inf, diff)))

    @property
    def passed(self) -> bool:
        return self.abs_error <= self.tolerance

    CSV_HEADER = ("name", "computed", "expected", "source", "abs_error", "tolerance", "pass", "wall_time")

    def csv_row(self, include_wall_time: bool = True) -> list:
        fmt = lambda v: ";".join(repr(float(x)) for x in v)  # noqa: E731
        return [
            self.name,
            fmt(self.computed),
            fmt(self.expected),
            self.source,
            repr(self.abs_error),
            repr(self.tolerance),
            "true" if self.passed else "false",
            f"{self.wall_time:.6f}" if include_wall_time else "",
        ]

    def to_dict(self, include_wall_time: bool = True) -> dict:
        doc = {
            "name": self.name,
            "parameters": _jsonable(self.parameters),
            "computed": encode_floats(self.computed),
            "expected": encode_floats(self.expected),
            "source": self.source,
            "abs_error": encode_float(self.abs_error),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "details": _jsonable(self.details),
        }
        if include_wall_time:
            doc["wall_time"] = self.wall_time
        return doc


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return encode_float(float(x))
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    return x


def _timed(fn):
    def run(*args, **kwargs) -> ScenarioReport:
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        return replace(rep, wall_time=time.perf_counter() - t0)

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    run.__wrapped__ = fn
    return run


# ---------------------------------------------------------------------------
# coin

def _coin_parts():
    fair = DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    unfair = DiscreteMeasure.dirac(1.0)
    # +1 on an unfair coin, -1 on a fair one; heads are the atom at 1
    phi = QuantityOfInterest.custom(atom_fn=lambda x: 2.0 * (np.asarray(x) >= 1.0) - 1.0,
                                    lower=-1.0, upper=1.0, breakpoints=(1.0,), name="unfair")
    return fair, unfair, phi


def coin_posterior(n_unfair: int, n_fair: int, heads: int = 10) -> float:
    """Posterior probability that a uniformly drawn coin is the two-headed one."""
    fair, unfair, phi = _coin_parts()
    obs = Observation(np.ones(heads), 0.5)
    if n_fair == 0:
        prior = DiscretePrior.dirac(unfair)
    else:
        total = n_unfair + n_fair
        prior = DiscretePrior((unfair, fair), np.array([n_unfair / total, n_fair / total]))
    return conditional_expectation(prior, phi, obs)


@_timed
def scenario_coin() -> ScenarioReport:
    exact = coin_posterior(1, 101)
    perturbed = coin_posterior(1, 99)
    single = coin_posterior(1, 0)
    return ScenarioReport(
        name="coin",
        parameters={"heads": 10, "coins": [102, 100, 1]},
        computed=(exact, perturbed, single),
        expected=(1.0 / (1.0 + 101 * 2.0 ** -10), 1.0 / (1.0 + 99 * 2.0 ** -10), 1.0),
        source="closed form",
        tolerance=CLOSED_FORM_TOL,
    )


# ---------------------------------------------------------------------------
# prior-level Markov bounds

def _antithetic_sampler(m: float, a: float):
    """Moment draws on ``[0, a]`` in mirrored pairs, so their mean is exactly ``m``."""
    h = min(m, a - m)

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        half = (n + 1) // 2
        u = rng.uniform(-h, h, size=half)
        q = np.concatenate([m + u, m - u])[:n]
        if n % 2:
            q[-1] = m
        return q.reshape(n, 1)

    return sample


@_timed
def scenario_playdoh(m: float = 0.3, a: float = 0.6, cfg: SolverConfig | None = None,
                     seed: int = 0) -> ScenarioReport:
    """Most mass above ``a`` for a mean-``m`` measure, by reduction and by the nested route."""
    if not 0.0 < m < a < 1.0:
        raise ValueError("need 0 < m < a < 1")
    cfg = cfg or replace(SCENARIO_SOLVER, seed=seed)
    phi = QuantityOfInterest.tail(a)
    mm = MomentMap((power(1),))
    direct = solve(reduce_prior(phi, PriorClassSpec.mean_equals(m)), cfg)
    nested = nested_prior_value(phi, mm, _antithetic_sampler(m, a), n_samples=4096, seed=seed)
    return ScenarioReport(
        name="playdoh",
        parameters={"m": m, "a": a},
        computed=(direct.value, nested.value),
        expected=(m / a, m / a),
        source="closed form",
        tolerance=SOLVER_TOL,
        details={"paths_gap": abs(direct.value - nested.value), "witness": direct.witness,
                 "nested": nested, "status": direct.status},
    )


def prior_bound_paths(q: float, a: float, cfg: SolverConfig | None = None) -> tuple:
    """``sup E_pi[mu[X >= a]]`` over priors with mean ``q``, by both reductions."""
    cfg = cfg or SCENARIO_SOLVER
    phi = QuantityOfInterest.tail(a)
    direct = solve(reduce_prior(phi, PriorClassSpec.mean_equals(q)), cfg)

    def inner(x, _a=a):
        return np.minimum(1.0, np.asarray(x, float) / _a)

    outer = nested_outer_program(inner, ConstraintSpec.point([q]), "sup", breakpoints=(a,))
    nested = solve(outer, cfg)
    return direct, nested


@_timed
def scenario_prior_bound(q: float = 0.25, a: float = 0.5, cfg: SolverConfig | None = None) -> ScenarioReport:
    direct, nested = prior_bound_paths(q, a, cfg)
    return ScenarioReport(
        name="prior-bound",
        parameters={"q": q, "a": a},
        computed=(direct.value, nested.value),
        expected=(q / a, q / a),
        source="closed form",
        tolerance=SOLVER_TOL,
        details={"paths_gap": abs(direct.value - nested.value),
                 "primary_witness": direct.witness, "nested_witness": nested.witness},
    )


# ---------------------------------------------------------------------------
# posterior brittleness

def spread_centers(n: int) -> np.ndarray:
    """``n`` data points at the midpoints of ``n`` equal cells of [0, 1]."""
    return (np.arange(n) + 0.5) / n


def contract_witness(w: Witness, obs_from: Observation, obs_to: Observation) -> Witness:
    """Move atoms sitting in a ball toward its center as the radius shrinks."""
    ratio = obs_to.radius / obs_from.radius
    measures = []
    for mu in w.measures:
        x = mu.atoms.copy()
        ind = obs_from.indicators(x)
        for i, c in enumerate(obs_from.centers):
            hit = ind[:, i] > 0
            x[hit] = c + (x[hit] - c) * ratio
        measures.append(DiscreteMeasure(np.clip(x, mu.lo, mu.hi), mu.weights, mu.lo, mu.hi))
    return Witness(tuple(measures), w.mix, w.slacks)


def brittle_posterior(q: float, a: float, n: int, *, delta: float | None = None,
                      cfg: SolverConfig | None = None, initial: Sequence[Witness] = ()):
    """``U(Pi | B)`` for priors with mean ``q`` and the tail ``mu[X >= a]``.

    ``delta=None`` uses limit mode (ball masses as free slacks).
    """
    cfg = cfg or SCENARIO_SOLVER
    phi = QuantityOfInterest.tail(a)
    spec = PriorClassSpec.mean_equals(q)
    if n == 0:
        obs = Observation.empty()
        return posterior_upper_bound(phi, spec, obs, cfg)
    obs = Observation(spread_centers(n), 0.5 / n if delta is None else delta)
    return posterior_upper_bound(phi, spec, obs, cfg, limit_mode=delta is None, initial=initial)


def brittle_sweep(q: float, a: float, n: int, deltas: Sequence[float],
                  cfg: SolverConfig | None = None) -> list:
    """Finite-radius solves over decreasing radii, each warm-started from the last."""
    out = []
    prev = None
    prev_obs = None
    for d in sorted(deltas, reverse=True):
        obs = Observation(spread_centers(n), d)
        initial = () if prev is None else (contract_witness(prev, prev_obs, obs),)
        res = brittle_posterior(q, a, n, delta=d, cfg=cfg, initial=initial)
        out.append((d, res))
        if res.witness is not None:
            prev, prev_obs = res.witness, obs
    return out


@_timed
def scenario_posterior_brittle(q: float = 0.25, a: float = 0.5, n: int = 3, mode: str = "limit",
                               deltas: Sequence[float] = (0.1, 0.01, 0.001),
                               cfg: SolverConfig | None = None) -> ScenarioReport:
    """Optimal posterior tail bound under a mean constraint.

    ``mode="limit"`` expects one.  ``mode="finite"`` runs the radius sweep and
    checks that values never decrease as the radius shrinks; the gap to one
    is reported in the details.
    """
    params = {"q": q, "a": a, "n": n, "mode": mode}
    if n == 0:
        res = brittle_posterior(q, a, 0, cfg=cfg)
        return ScenarioReport("posterior-brittle", params, (res.value,), (q / a,), "limit", SOLVER_TOL,
                              details={"status": res.status})
    if mode == "limit":
        res = brittle_posterior(q, a, n, cfg=cfg)
        return ScenarioReport("posterior-brittle", params, (res.value,), (1.0,), "closed form", SOLVER_TOL,
                              details={"status": res.status, "witness": res.witness, "flags": list(res.flags)})
    if mode != "finite":
        raise ValueError(f"unknown mode {mode!r}")
    sweep = brittle_sweep(q, a, n, deltas, cfg)
    values = np.array([r.value for _, r in sweep])
    envelope = np.maximum.accumulate(values)
    params["deltas"] = [d for d, _ in sweep]
    return ScenarioReport(
        "posterior-brittle-sweep", params, tuple(values), tuple(envelope), "oracle", CLOSED_FORM_TOL,
        details={"gap_to_one": (1.0 - values).tolist(),
                 "flags": [list(r.flags) for _, r in sweep],
                 "status": [r.status for _, r in sweep]},
    )


# ---------------------------------------------------------------------------
# learning versus robustness

def learning_curve(alpha: float, a: float, m: float) -> float:
    """Least upper bound on posterior tail values when the data probability varies by at most ``alpha``."""
    if not alpha >= 1:
        raise ValueError("alpha must be >= 1")
    if not 0.0 < m < a < 1.0:
        raise ValueError("need 0 < m < a < 1")
    return 1.0 / (1.0 + (a - m) / (m * alpha * alpha))


def gamma_curve(gamma: float, n: int) -> float:
    """Limit bound for per-observation band ``gamma`` with ``n`` data points (``a = 3/4, m = a/2``)."""
    if not gamma >= 1:
        raise ValueError("gamma must be >= 1")
    if n < 1:
        raise ValueError("need at least one observation")
    return 1.0 / (1.0 + gamma ** (-2.0 * n))


def band_posterior(level: float, a: float, m: float, n: int, mode: str = "joint",
                   cfg: SolverConfig | None = None):
    """Limit-mode posterior bound with a multiplicative band on the data probability."""
    base = PriorClassSpec.mean_equals(m)
    spec = PriorClassSpec(base.moment_map, base.constraints, DataBand(level, mode))
    obs = Observation(spread_centers(n), 0.5 / max(n, 1))
    return posterior_upper_bound(QuantityOfInterest.tail(a), spec, obs, cfg or SCENARIO_SOLVER,
                                 limit_mode=True)


@_timed
def scenario_learning(alphas: Sequence[float] = (1.0, 2.0, 10.0), a: float = 0.75, m: float = 0.375,
                      n: int = 2, cfg: SolverConfig | None = None) -> ScenarioReport:
    values = [band_posterior(al, a, m, n, cfg=cfg).value for al in alphas]
    return ScenarioReport(
        "learning", {"alphas": list(alphas), "a": a, "m": m, "n": n},
        tuple(values), tuple(learning_curve(al, a, m) for al in alphas), "closed form", SOLVER_TOL,
    )


@_timed
def scenario_gamma(gamma: float = 2.0, n: int = 2, cfg: SolverConfig | None = None) -> ScenarioReport:
    a = 0.75
    res = band_posterior(gamma, a, a / 2, n, "per-ball", cfg)
    return ScenarioReport(
        "gamma", {"gamma": gamma, "n": n}, (res.value,), (gamma_curve(gamma, n),), "closed form", SOLVER_TOL,
        details={"status": res.status},
    )


# ---------------------------------------------------------------------------
# perturbed models

def _model_a_mean(theta):
    p, r = 1.0 / theta, 1.0 / (1.0 - theta)
    return (1.0 - theta) / (p + 2.0) + theta * (r + 1.0) / (r + 2.0)


def _model_a_density(x, theta):
    p, r = 1.0 / theta, 1.0 / (1.0 - theta)
    with np.errstate(under="ignore"):
        return (1.0 - theta) * (1.0 + p) * (1.0 - x) ** p + theta * (1.0 + r) * x ** r


def _midpoints(lo: float, hi: float, n: int) -> tuple[np.ndarray, float]:
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h, h


def _interval_moments(lo, hi, theta, n):
    """Midpoint-rule mass and first moment of model ``a`` on ``(lo, hi)`` for every ``theta``."""
    if hi <= lo:
        z = np.zeros_like(theta)
        return z, z
    x, h = _midpoints(lo, hi, n)
    f = _model_a_density(x[None, :], theta[:, None])
    return f.sum(axis=1) * h, (f * x).sum(axis=1) * h


def _segments(lo, hi, cut_lo, cut_hi):
    """Split ``(lo, hi)`` into the part inside ``(cut_lo, cut_hi)`` and the parts outside it."""
    inside = (max(lo, cut_lo), min(hi, cut_hi))
    outside = [(lo, min(hi, cut_lo)), (max(lo, cut_hi), hi)]
    return inside, [seg for seg in outside if seg[1] > seg[0]]


def _model_b_terms(theta, delta, delta_c, gap, x1, cutoff, moments):
    """Per-``theta`` conditional mean, ball mass and TV distance for both models.

    ``moments(lo, hi, theta)`` returns model ``a``'s mass and first moment on
    an interval; the quadrature and the closed-form reference differ only there.
    """
    mean_a = _model_a_mean(theta)
    w_lo, w_hi = x1 - delta_c / 2, x1 + delta_c / 2
    inside, outside = _segments(x1 - delta, x1 + delta, w_lo, w_hi)
    win_mass, win_first = moments(w_lo, w_hi, theta)
    in_mass = moments(*inside, theta)[0] if inside[1] > inside[0] else np.zeros_like(theta)
    out_mass = sum((moments(lo, hi, theta)[0] for lo, hi in outside), np.zeros_like(theta))
    z = 1.0 - (1.0 - gap) * win_mass
    ball_a = in_mass + out_mass
    ball_b = (gap * in_mass + out_mass) / z
    mean_b = (mean_a - (1.0 - gap) * win_first) / z
    tv = 0.5 * ((1.0 - gap / z) * win_mass + (1.0 / z - 1.0) * (1.0 - win_mass))
    plain = theta >= cutoff
    return (mean_a, ball_a, np.where(plain, mean_a, mean_b), np.where(plain, ball_a, ball_b),
            np.where(plain, 0.0, tv))


def model_ab_posteriors(delta: float, delta_c: float, gap: float = 1e-9, theta_grid: int = 20000,
                        x_grid: int = 64, x1: float = 0.5, cutoff: float = 0.999) -> dict:
    """Posterior means of ``E[X]`` under models ``a`` and ``b`` with a uniform prior on ``theta``.

    Model ``b`` scales the density of ``a`` by ``gap`` on the window
    ``|x - x1| < delta_c / 2`` (renormalized) for ``theta < cutoff``.
    Midpoint rules in ``theta`` and ``x``.
    """
    theta, _ = _midpoints(0.0, 1.0, theta_grid)

    def moments(lo, hi, th):
        return _interval_moments(lo, hi, th, x_grid)

    mean_a, ball_a, mean_b, ball_b, tv = _model_b_terms(theta, delta, delta_c, gap, x1, cutoff, moments)
    post_a = float(np.sum(mean_a * ball_a) / np.sum(ball_a))
    post_b = float(np.sum(mean_b * ball_b) / np.sum(ball_b))
    return {"post_a": post_a, "post_b": post_b, "prior_a": float(mean_a.mean()), "prior_b": float(mean_b.mean()),
            "tv_max": float(tv.max()), "tv_over_delta_c": float(tv.max() / delta_c)}


def _model_a_cdf_moments(lo, hi, theta):
    """Exact mass and first moment of model ``a`` on ``(lo, hi)``."""
    p, r = 1.0 / theta, 1.0 / (1.0 - theta)

    def cdf(x):
        return (1.0 - theta) * (1.0 - (1.0 - x) ** (p + 1.0)) + theta * x ** (r + 1.0)

    def first(x):
        u = 1.0 - x
        left = (1.0 - theta) * (1.0 + p) * (
            1.0 / (p + 1.0) - 1.0 / (p + 2.0) - u ** (p + 1.0) / (p + 1.0) + u ** (p + 2.0) / (p + 2.0))
        return left + theta * (1.0 + r) * x ** (r + 2.0) / (r + 2.0)

    with np.errstate(under="ignore"):
        return cdf(hi) - cdf(lo), first(hi) - first(lo)


def model_ab_reference(delta: float, delta_c: float, gap: float = 1e-9, x1: float = 0.5,
                       cutoff: float = 0.999) -> dict:
    """Same posteriors with exact interval integrals and adaptive integration in ``theta``."""
    def term(which, theta):
        th = np.array([theta])
        mean_a, ball_a, mean_b, ball_b, _ = _model_b_terms(th, delta, delta_c, gap, x1, cutoff,
                                                           _model_a_cdf_moments)
        return {"num_a": mean_a * ball_a, "den_a": ball_a, "num_b": mean_b * ball_b, "den_b": ball_b}[which][0]

    out = {}
    for key in ("num_a", "den_a", "num_b", "den_b"):
        pieces = [(1e-12, 0.5), (0.5, cutoff), (cutoff, 1.0 - 1e-12)]
        out[key] = sum(quad(lambda t: term(key, t), lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)[0]
                       for lo, hi in pieces)
    return {"post_a": out["num_a"] / out["den_a"], "post_b": out["num_b"] / out["den_b"]}


@_timed
def scenario_model_ab(delta: float = 0.005, delta_c: float = 0.01, gap: float = 1e-9,
                      theta_grid: int = 20000, x_grid: int = 64) -> ScenarioReport:
    """Posterior means under two models that differ only on a tiny window around the datum.

    The quadrature is compared with a reference built from exact interval
    integrals; a grid doubling flags quadrature that has not settled.
    """
    if not 0.0 < delta < delta_c:
        raise ValueError("need 0 < delta < delta_c")
    r1 = model_ab_posteriors(delta, delta_c, gap, theta_grid, x_grid)
    r2 = model_ab_posteriors(delta, delta_c, gap, 2 * theta_grid, 2 * x_grid)
    ref = model_ab_reference(delta, delta_c, gap)
    change = max(abs(r2[k] - r1[k]) / max(abs(r2[k]), 1e-300) for k in ("post_a", "post_b"))
    details = dict(r1)
    details["reference"] = ref
    details["relative_change_on_doubling"] = change
    details["quadrature_flag"] = bool(change > 1e-4)
    return ScenarioReport(
        "model-ab", {"delta": delta, "delta_c": delta_c, "gap": gap, "theta_grid": theta_grid, "x_grid": x_grid},
        (r1["post_a"], r1["post_b"]), (0.5, ref["post_b"]), "oracle", QUADRATURE_TOL,
        details=details,
    )


# ---------------------------------------------------------------------------
# moment classes

class IterativeMomentSampler:
    """Moment vectors drawn coordinate by coordinate.

    The first coordinate is uniform over its attainable range; each later one
    is uniform over the range left by the earlier draws, computed by min/max
    LPs over measures on a fixed grid.
    """

    def __init__(self, k: int, grid: int = DEFAULT_GRID, lo: float = 0.0, hi: float = 1.0):
        if k < 1:
            raise ValueError("need at least one moment")
        self.k = k
        self.moment_map = MomentMap.powers(k, lo, hi)
        self.grid = MeasureGrid.build(self.moment_map, grid)

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n, self.k))
        first = self.grid.feats[0]
        lo, hi = float(first.min()), float(first.max())
        for i in range(n):
            out[i, 0] = rng.uniform(lo, hi)
            for j in range(1, self.k):
                rng_j = fiber_range(self.moment_map, out[i, :j], j, self.grid)
                if rng_j is None:
                    out[i, j:] = np.nan
                    break
                out[i, j] = rng.uniform(*rng_j)
        return out


def moment_class_observation(n: int, delta: float, seed: int) -> Observation:
    """``n`` jittered, well separated data points with balls of radius ``delta``."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) + 7919))
    centers = (np.arange(n) + 0.25 + 0.5 * rng.uniform(size=n)) / n
    if n > 1 and delta >= 0.5 * np.min(np.diff(centers)):
        raise ValueError("balls overlap: delta must be below half the smallest spacing")
    return Observation(centers, delta)


@_timed
def scenario_moment_class(k: int = 2, n: int = 5, delta: float = 0.01, seed: int = 1,
                          n_samples: int = 128, grid: int = 257) -> ScenarioReport:
    """Brittleness verdict for the mean under an iteratively uniform law of the first ``k`` moments."""
    obs = moment_class_observation(n, delta, seed)
    sampler = IterativeMomentSampler(k, grid)
    verdict = brittleness_verdict(QuantityOfInterest.mean(), sampler.moment_map, sampler, obs,
                                  grid=grid, n_samples=n_samples, seed=seed)
    lower = verdict.implied_lower if verdict.implied_lower is not None else math.nan
    upper = verdict.implied_bound if verdict.implied_bound is not None else math.nan
    return ScenarioReport(
        "moment-class", {"k": k, "n": n, "delta": delta, "seed": seed, "n_samples": n_samples, "grid": grid},
        (lower, upper), (0.0, 1.0), "closed form", CLOSED_FORM_TOL,
        details={"verdict": verdict, "centers": obs.centers},
    )


# ---------------------------------------------------------------------------
# registry

REGISTRY: dict[str, Callable[..., ScenarioReport]] = {
    "coin": scenario_coin,
    "playdoh": scenario_playdoh,
    "prior-bound": scenario_prior_bound,
    "posterior-brittle": scenario_posterior_brittle,
    "posterior-brittle-sweep": lambda **kw: scenario_posterior_brittle(mode="finite", **kw),
    "learning": scenario_learning,
    "gamma": scenario_gamma,
    "model-ab": scenario_model_ab,
    "moment-class": scenario_moment_class,
}


class UnknownScenario(KeyError):
    pass


def run_scenarios(names: Sequence[str] | None = None, cfg: SolverConfig | None = None) -> list:
    """Run the named scenarios (all when ``names`` is empty) in registry order."""
    chosen = list(REGISTRY) if not names else list(names)
    for n in chosen:
        if n not in REGISTRY:
            raise UnknownScenario(f"unknown scenario {n!r}; known: {', '.join(REGISTRY)}")
    takes_cfg = {"playdoh", "prior-bound", "posterior-brittle", "posterior-brittle-sweep", "learning", "gamma"}
    out = []
    for n in chosen:
        kwargs = {"cfg": cfg} if (cfg is not None and n in takes_cfg) else {}
        out.append(REGISTRY[n](**kwargs))
    return out


def reports_csv(reports: Sequence[ScenarioReport], include_wall_time: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ScenarioReport.CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row(include_wall_time))
    return buf.getvalue()


def reports_json(reports: Sequence[ScenarioReport], include_wall_time: bool = True) -> str:
    return dumps({"version": 1, "reports": [r.to_dict(include_wall_time) for r in reports]})


def write_reports(reports: Sequence[ScenarioReport], out_dir: str | Path, include_wall_time: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenarios.csv").write_text(reports_csv(reports, include_wall_time))
    (out / "scenarios.json").write_text(reports_json(reports, include_wall_time))


__all__ = [
    "REGISTRY",
    "IterativeMomentSampler",
    "ScenarioReport",
    "UnknownScenario",
    "band_posterior",
    "brittle_posterior",
    "brittle_sweep",
    "coin_posterior",
    "contract_witness",
    "gamma_curve",
    "learning_curve",
    "model_ab_posteriors",
    "prior_bound_paths",
    "run_scenarios",
    "scenario_coin",
    "scenario_gamma",
    "scenario_learning",
    "scenario_model_ab",
    "scenario_moment_class",
    "scenario_playdoh",
    "scenario_posterior_brittle",
    "scenario_prior_bound",
    "write_reports",
]
