"""Command-line front end.

Problem configs are strict JSON documents with a top-level ``"version": 1``;
unknown fields are rejected.  Output goes to stdout as a table, CSV or JSON
and, with ``--out DIR``, also to ``DIR/result.{csv,json}``.  Written files
carry no timings unless ``--timing`` is given, so repeated runs are
byte-identical.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure
(infeasible program or null data event), 3 a scenario failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._jsonutil import decode_float, dumps, encode_float
from .measures import (
    ConstraintSpec,
    DiscreteMeasure,
    MeasureError,
    MomentMap,
    Observation,
    QuantityOfInterest,
)
from .posterior import (
    DiscretePrior,
    PosteriorError,
    brittleness_verdict,
    conditional_expectation,
    info_bound_sandwich,
    posterior_lower_bound,
    posterior_upper_bound,
)
from .reduction import DataBand, PriorClassSpec, ReductionError, reduce_prior
from .scenarios import (
    REGISTRY,
    SCENARIO_SOLVER,
    IterativeMomentSampler,
    UnknownScenario,
    band_posterior,
    contract_witness,
    gamma_curve,
    learning_curve,
    model_ab_posteriors,
    reports_csv,
    reports_json,
    run_scenarios,
)
from .solver import SolverConfig, SolverError, solve

CONFIG_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_SCENARIO = 0, 1, 2, 3
SEED_ENV = "BRITTLE_BAYES_SEED"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; the message names the field."""


# ---------------------------------------------------------------------------
# config parsing

def _fields(doc: Any, path: str, allowed: Sequence[str], required: Sequence[str] = ()) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")
    for key in required:
        if key not in doc:
            raise ConfigError(f"{path}: missing required field {key!r}")
    return doc


def _num(doc, key, path, default=None):
    if key not in doc:
        if default is None:
            raise ConfigError(f"{path}.{key}: missing")
        return default
    try:
        return decode_float(doc[key])
    except ValueError as exc:
        raise ConfigError(f"{path}.{key}: {exc}") from None


def _nums(doc, key, path) -> list[float]:
    v = doc.get(key)
    if not isinstance(v, list):
        raise ConfigError(f"{path}.{key}: expected a list of numbers")
    try:
        return [decode_float(x) for x in v]
    except ValueError as exc:
        raise ConfigError(f"{path}.{key}: {exc}") from None


def parse_qoi(doc, path="qoi") -> QuantityOfInterest:
    """Tail, mean, set probability, or an affine rescaling of one of them."""
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "tail":
        _fields(doc, path, ("kind", "threshold"), ("threshold",))
        return QuantityOfInterest.tail(_num(doc, "threshold", path))
    if kind == "mean":
        _fields(doc, path, ("kind", "bounds"))
        return QuantityOfInterest.mean()
    if kind == "set":
        _fields(doc, path, ("kind", "sets"), ("sets",))
        try:
            return QuantityOfInterest.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}.sets: {exc}") from None
    if kind == "affine":
        _fields(doc, path, ("kind", "base", "scale", "offset"), ("base",))
        base = parse_qoi(doc["base"], path + ".base")
        scale = _num(doc, "scale", path, 1.0)
        offset = _num(doc, "offset", path, 0.0)
        lo, hi = sorted((scale * base.lower + offset, scale * base.upper + offset))
        return QuantityOfInterest.custom(
            atom_fn=lambda x, b=base, s=scale, o=offset: s * b.atom_values(x) + o,
            lower=lo, upper=hi, breakpoints=base.breakpoints, name=f"{scale}*{base.name}+{offset}",
        )
    raise ConfigError(f"{path}.kind: expected one of tail, mean, set, affine")


def parse_moments(doc, path="moments") -> MomentMap:
    if isinstance(doc, int) and not isinstance(doc, bool):
        if doc < 0:
            raise ConfigError(f"{path}: number of moments must be nonnegative")
        return MomentMap.powers(doc)
    _fields(doc, path, ("components", "support"), ("components",))
    try:
        return MomentMap.from_dict(doc)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_constraints(doc, path="constraints") -> ConstraintSpec:
    _fields(doc, path, ("equal", "lower", "upper"))
    if "equal" in doc:
        if "lower" in doc or "upper" in doc:
            raise ConfigError(f"{path}: give either 'equal' or 'lower'/'upper'")
        return ConstraintSpec.point(_nums(doc, "equal", path))
    try:
        return ConstraintSpec(np.asarray(_nums(doc, "lower", path)), np.asarray(_nums(doc, "upper", path)))
    except MeasureError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_observation(doc, path="observation") -> Observation:
    _fields(doc, path, ("centers", "radius", "support"), ("centers", "radius"))
    try:
        return Observation.from_dict(doc)
    except (MeasureError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_band(doc, path="band") -> DataBand:
    _fields(doc, path, ("level", "mode"), ("level",))
    try:
        return DataBand(_num(doc, "level", path), doc.get("mode", "joint"))
    except ReductionError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_prior(doc, path="prior") -> DiscretePrior:
    _fields(doc, path, ("support", "weights"), ("support", "weights"))
    if not isinstance(doc["support"], list) or not doc["support"]:
        raise ConfigError(f"{path}.support: expected a nonempty list of measures")
    measures = []
    for i, m in enumerate(doc["support"]):
        p = f"{path}.support[{i}]"
        _fields(m, p, ("atoms", "weights", "support"), ("atoms", "weights"))
        try:
            measures.append(DiscreteMeasure.from_dict(m))
        except (MeasureError, ValueError, KeyError) as exc:
            raise ConfigError(f"{p}: {exc}") from None
    try:
        return DiscretePrior.from_masses(measures, _nums(doc, "weights", path))
    except PosteriorError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_solver(doc, path="solver") -> dict:
    _fields(doc, path, ("restarts", "max_iters", "seed"))
    out = {}
    for key in ("restarts", "max_iters", "seed"):
        if key in doc:
            v = doc[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "seed" else 1):
                raise ConfigError(f"{path}.{key}: expected a positive integer")
            out[key] = v
    return out


TOP_LEVEL = ("version", "qoi", "moments", "constraints", "band", "observation", "prior", "direction",
             "solver", "seed", "limit_mode", "brittleness", "curve", "perturb", "name")


@dataclass
class Problem:
    name: str = ""
    qoi: QuantityOfInterest | None = None
    spec: PriorClassSpec | None = None
    observation: Observation | None = None
    prior: DiscretePrior | None = None
    direction: str = "both"
    solver: dict = field(default_factory=dict)
    seed: int | None = None
    limit_mode: bool = False
    brittleness: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict)
    perturb: dict = field(default_factory=dict)


def parse_config(doc: Any) -> Problem:
    _fields(doc, "config", TOP_LEVEL, ("version",))
    if doc["version"] != CONFIG_VERSION:
        raise ConfigError(f"config.version: unsupported version {doc['version']!r} (expected {CONFIG_VERSION})")
    p = Problem(name=str(doc.get("name", "")))
    if "qoi" in doc:
        p.qoi = parse_qoi(doc["qoi"])
    moments = parse_moments(doc["moments"]) if "moments" in doc else None
    cons = parse_constraints(doc["constraints"]) if "constraints" in doc else None
    band = parse_band(doc["band"]) if "band" in doc else None
    if moments is not None or cons is not None or band is not None:
        moments = moments if moments is not None else MomentMap()
        cons = cons if cons is not None else ConstraintSpec.none()
        try:
            p.spec = PriorClassSpec(moments, cons, band)
        except ReductionError as exc:
            raise ConfigError(f"constraints: {exc}") from None
    if "observation" in doc:
        p.observation = parse_observation(doc["observation"])
    if "prior" in doc:
        p.prior = parse_prior(doc["prior"])
    if "direction" in doc:
        if doc["direction"] not in ("sup", "inf", "both"):
            raise ConfigError("config.direction: expected sup, inf or both")
        p.direction = doc["direction"]
    if "solver" in doc:
        p.solver = parse_solver(doc["solver"])
    if "seed" in doc:
        if not isinstance(doc["seed"], int) or isinstance(doc["seed"], bool) or doc["seed"] < 0:
            raise ConfigError("config.seed: expected a nonnegative integer")
        p.seed = doc["seed"]
    if "limit_mode" in doc:
        if not isinstance(doc["limit_mode"], bool):
            raise ConfigError("config.limit_mode: expected true or false")
        p.limit_mode = doc["limit_mode"]
    if "brittleness" in doc:
        p.brittleness = _fields(doc["brittleness"], "brittleness",
                                ("delta_check", "grid", "n_samples", "sampler"))
    if "curve" in doc:
        p.curve = _fields(doc["curve"], "curve", ("kind", "a", "m", "alpha", "gamma", "n"))
    if "perturb" in doc:
        p.perturb = _fields(doc["perturb"], "perturb", ("delta", "delta_c", "gap", "theta_grid", "x_grid"))
    return p


def load_config(path: str) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# output

@dataclass
class Table:
    """Rows of named values rendered as a table, CSV or JSON."""

    header: tuple
    rows: list
    extra: dict = field(default_factory=dict)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()

    def json(self) -> str:
        doc = {"version": CONFIG_VERSION, "header": list(self.header),
               "rows": [[_json_cell(v) for v in r] for r in self.rows]}
        doc.update(self.extra)
        return dumps(doc)

    def text(self) -> str:
        cells = [list(self.header)] + [[_cell(v) for v in r] for r in self.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(self.header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return {"table": self.text, "csv": self.csv, "json": self.json}[fmt]()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isinf(f):
            return "+inf" if f > 0 else "-inf"
        return repr(f)
    if v is None:
        return ""
    return str(v)


def _json_cell(v):
    if isinstance(v, (float, np.floating)):
        return encode_float(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _emit(table: Table, args) -> None:
    sys.stdout.write(table.render(args.format))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.csv").write_text(table.csv())
        (out / "result.json").write_text(table.json())


# ---------------------------------------------------------------------------
# shared helpers

def _seed(args, problem: Problem | None) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}: expected an integer, got {env!r}") from None
    if problem is not None:
        if problem.seed is not None:
            return problem.seed
        if "seed" in problem.solver:
            return problem.solver["seed"]
    return 0


def _solver_config(args, problem: Problem | None) -> SolverConfig:
    kw = dict(problem.solver) if problem is not None else {}
    kw["seed"] = _seed(args, problem)
    if args.restarts is not None:
        if args.restarts < 1:
            raise ConfigError("--restarts must be >= 1")
        kw["restarts"] = args.restarts
    return SolverConfig(**kw)


def _parse_sweep(text: str | None) -> tuple[str, list[float]] | None:
    if text is None:
        return None
    if "=" not in text:
        raise ConfigError("--sweep: expected NAME=V1,V2,...")
    name, _, vals = text.partition("=")
    name = name.strip()
    try:
        values = [float(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--sweep {name}: values must be numbers") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"--sweep {name}: values must be finite and nonempty")
    return name, values


def _need(problem: Problem, *names: str) -> None:
    for n in names:
        if getattr(problem, n) is None:
            raise ConfigError(f"config: field {n!r} is required for this command")


def _directions(problem: Problem) -> list[str]:
    return ["sup", "inf"] if problem.direction == "both" else [problem.direction]


def _timing(args, t: float):
    return t if args.timing else None


SOLVE_HEADER = ("label", "direction", "value", "status", "residual", "restarts_used", "wall_time")


def _solve_row(label: str, res, args) -> tuple:
    return (label, res.direction, res.value, res.status, res.constraint_residual, res.restarts_used,
            _timing(args, res.wall_time))


# ---------------------------------------------------------------------------
# commands

def cmd_prior(args) -> int:
    problem = load_config(args.spec)
    _need(problem, "qoi")
    spec = problem.spec or PriorClassSpec.unconstrained()
    cfg = _solver_config(args, problem)
    rows, witnesses, status = [], [], EXIT_OK
    for d in _directions(problem):
        res = solve(reduce_prior(problem.qoi, spec, d), cfg)
        rows.append(_solve_row(problem.name or "prior", res, args))
        witnesses.append(res.to_dict(include_wall_time=args.timing))
        if not res.feasible:
            status = EXIT_NUMERIC
    _emit(Table(SOLVE_HEADER, rows, {"results": witnesses}), args)
    return status


def _posterior_problem(problem: Problem, args, name: str | None, value: float | None):
    """Apply a sweep value (or ``--delta``) to a copy of the problem."""
    spec, obs = problem.spec or PriorClassSpec.unconstrained(), problem.observation
    delta = args.delta
    if name is not None:
        if name == "delta":
            delta = value
        elif name in ("alpha", "gamma"):
            mode = "joint" if name == "alpha" else "per-ball"
            try:
                spec = PriorClassSpec(spec.moment_map, spec.constraints, DataBand(value, mode))
            except ReductionError as exc:
                raise ConfigError(f"--sweep {name}: {exc}") from None
        elif name == "q":
            if spec.constraints.dimension != 1:
                raise ConfigError("--sweep q needs a single moment constraint")
            spec = PriorClassSpec(spec.moment_map, ConstraintSpec.point([value]), spec.band)
        else:
            raise ConfigError(f"--sweep: unknown parameter {name!r} (use delta, alpha, gamma or q)")
    if delta is not None:
        if obs is None:
            raise ConfigError("--delta needs an observation in the config")
        try:
            obs = Observation(obs.centers, delta, obs.lo, obs.hi)
        except MeasureError as exc:
            raise ConfigError(f"--delta: {exc}") from None
    return spec, obs


def cmd_posterior(args) -> int:
    problem = load_config(args.spec)
    _need(problem, "qoi")
    obs = problem.observation or Observation.empty()
    if problem.prior is not None:
        if args.sweep:
            raise ConfigError("--sweep does not apply to an explicit prior")
        try:
            value = conditional_expectation(problem.prior, problem.qoi, obs)
        except PosteriorError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        _emit(Table(("label", "value"), [(problem.name or "posterior", value)]), args)
        return EXIT_OK
    cfg = _solver_config(args, problem)
    limit = args.limit_mode or problem.limit_mode
    sweep = _parse_sweep(args.sweep)
    points = [(None, None)] if sweep is None else [(sweep[0], v) for v in sweep[1]]
    header = ("label", "parameter", "direction", "value", "status", "residual", "restarts_used", "wall_time")
    rows, results, status = [], [], EXIT_OK
    warm: dict = {}
    for name, v in points:
        spec, ob = _posterior_problem(problem, args, name, v)
        ob = ob or Observation.empty()
        for d in _directions(problem):
            fn = posterior_upper_bound if d == "sup" else posterior_lower_bound
            # radius sweeps restart from the previous witness, pulled into the new balls
            initial = ()
            if name == "delta" and d in warm:
                initial = (contract_witness(warm[d][0], warm[d][1], ob),)
            try:
                res = fn(problem.qoi, spec, ob, cfg, limit_mode=limit and ob.count > 0, initial=initial)
            except SolverError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_NUMERIC
            if res.witness is not None:
                warm[d] = (res.witness, ob)
            label = problem.name or "posterior"
            param = "" if name is None else f"{name}={v!r}"
            rows.append((label, param, d, res.value, res.status, res.constraint_residual, res.restarts_used,
                         _timing(args, res.wall_time)))
            results.append(res.to_dict(include_wall_time=args.timing))
            if not res.feasible:
                status = EXIT_NUMERIC
    _emit(Table(header, rows, {"results": results}), args)
    return status


def cmd_sandwich(args) -> int:
    problem = load_config(args.spec)
    _need(problem, "qoi")
    spec = problem.spec or PriorClassSpec.unconstrained()
    grid = int(problem.brittleness.get("grid", 513))
    s = info_bound_sandwich(problem.qoi, spec, problem.observation, grid, _solver_config(args, problem))
    names = ("L_A", "L_Pi", "L_API", "U_API", "U_Pi", "U_A")
    _emit(Table(names + ("ordered",), [s.as_tuple() + (s.ordered(),)], {"sandwich": s.to_dict()}), args)
    return EXIT_OK


def cmd_brittleness(args) -> int:
    problem = load_config(args.spec)
    _need(problem, "qoi", "observation")
    opts = problem.brittleness
    sampler_doc = opts.get("sampler", {"kind": "iterative-uniform"})
    _fields(sampler_doc, "brittleness.sampler", ("kind",), ("kind",))
    if sampler_doc["kind"] != "iterative-uniform":
        raise ConfigError("brittleness.sampler.kind: only 'iterative-uniform' is available")
    mm = problem.spec.moment_map if problem.spec is not None else MomentMap.powers(1)
    k = mm.dimension
    if mm != MomentMap.powers(k, mm.lo, mm.hi):
        raise ConfigError("moments: the iterative-uniform sampler needs the power moments 1..k")
    grid = int(opts.get("grid", 401))
    sampler = IterativeMomentSampler(k, grid, mm.lo, mm.hi)
    try:
        v = brittleness_verdict(problem.qoi, mm, sampler, problem.observation,
                                float(opts.get("delta_check", 0.1)), grid,
                                n_samples=int(opts.get("n_samples", 128)), seed=_seed(args, problem))
    except PosteriorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    header = ("zero_data_fibers", "near_extreme_with_data", "implied_bound", "implied_lower",
              "n_samples", "rejection_rate", "grid_size", "grid_resolution")
    row = (v.conditions[0], v.conditions[1], v.implied_bound, v.implied_lower, v.n_samples,
           v.rejection_rate, v.grid_size, v.grid_resolution)
    _emit(Table(header, [row], {"verdict": v.to_dict()}), args)
    return EXIT_OK


def cmd_curve(args) -> int:
    opts = load_config(args.spec).curve if args.spec else {}
    kind = args.kind or opts.get("kind", "learning")
    cfg = _solver_config(args, None)
    sweep = _parse_sweep(args.sweep)
    rows = []
    if kind == "learning":
        a, m = float(opts.get("a", 0.75)), float(opts.get("m", 0.375))
        alphas = opts.get("alpha", [1.0, 2.0, 10.0])
        if sweep is not None:
            if sweep[0] != "alpha":
                raise ConfigError("curve learning sweeps 'alpha'")
            alphas = sweep[1]
        for al in alphas:
            closed = learning_curve(float(al), a, m)
            solved = band_posterior(float(al), a, m, 2, cfg=cfg).value if args.solve else None
            rows.append(("learning", float(al), closed, solved))
        header = ("curve", "alpha", "closed_form", "solver")
    elif kind == "gamma":
        gammas = opts.get("gamma", [2.0])
        ns = [int(opts.get("n", 5))]
        if sweep is not None:
            if sweep[0] == "gamma":
                gammas = sweep[1]
            elif sweep[0] == "n":
                ns = [int(v) for v in sweep[1]]
            else:
                raise ConfigError("curve gamma sweeps 'gamma' or 'n'")
        for g in gammas:
            for n in ns:
                closed = gamma_curve(float(g), n)
                solved = (band_posterior(float(g), 0.75, 0.375, n, "per-ball", cfg).value
                          if args.solve and g > 1 else None)
                rows.append(("gamma", float(g), n, closed, solved))
        header = ("curve", "gamma", "n", "closed_form", "solver")
    else:
        raise ConfigError(f"curve: unknown kind {kind!r} (learning or gamma)")
    _emit(Table(header, rows), args)
    return EXIT_OK


def cmd_perturb(args) -> int:
    opts = load_config(args.spec).perturb if args.spec else {}
    delta = args.delta if args.delta is not None else float(opts.get("delta", 0.005))
    delta_c = float(opts.get("delta_c", 0.01))
    if not 0 < delta < delta_c:
        raise ConfigError("perturb: need 0 < delta < delta_c")
    sweep = _parse_sweep(args.sweep)
    deltas = [delta] if sweep is None else sweep[1]
    if sweep is not None and sweep[0] != "delta":
        raise ConfigError("perturb sweeps 'delta'")
    rows = []
    for d in deltas:
        r = model_ab_posteriors(d, delta_c, float(opts.get("gap", 1e-9)), int(opts.get("theta_grid", 20000)),
                                int(opts.get("x_grid", 64)))
        rows.append((d, delta_c, r["post_a"], r["post_b"], r["tv_max"]))
    _emit(Table(("delta", "delta_c", "post_a", "post_b", "tv_max"), rows), args)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    names = [] if args.all else list(args.names)
    cfg = None
    if args.restarts is not None or args.seed is not None or os.environ.get(SEED_ENV):
        cfg = replace(SCENARIO_SOLVER, seed=_seed(args, None),
                      restarts=args.restarts or SCENARIO_SOLVER.restarts)
    try:
        reports = run_scenarios(names, cfg)
    except UnknownScenario as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    header = ("name", "computed", "expected", "abs_error", "tolerance", "pass", "wall_time")
    rows = [(r.name, ";".join(_cell(float(c)) for c in r.computed), ";".join(_cell(float(e)) for e in r.expected),
             r.abs_error, r.tolerance, r.passed, _timing(args, r.wall_time)) for r in reports]
    sys.stdout.write(Table(header, rows).render(args.format) if args.format != "json"
                     else reports_json(reports, args.timing))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "scenarios.csv").write_text(reports_csv(reports, args.timing))
        (out / "scenarios.json").write_text(reports_json(reports, args.timing))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_SCENARIO


# ---------------------------------------------------------------------------
# entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="PATH", help="JSON problem config")
    common.add_argument("--out", metavar="DIR", help="also write result files into DIR")
    common.add_argument("--format", choices=("table", "csv", "json"), default="table")
    common.add_argument("--seed", type=int, help=f"RNG seed (fallback: ${SEED_ENV}, then config, then 0)")
    common.add_argument("--restarts", type=int, help="solver restarts")
    common.add_argument("--limit-mode", action="store_true", help="treat ball masses as free (radius -> 0)")
    common.add_argument("--delta", type=float, metavar="V", help="override the observation radius")
    common.add_argument("--sweep", metavar="NAME=V1,V2,...", help="repeat over parameter values")
    common.add_argument("--timing", action="store_true", help="include wall times in the output")

    p = _Parser(prog="brittle-bayes", description="Optimal prior and posterior bounds over classes of priors.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("prior", "optimal prior bounds"), ("posterior", "posterior values and bounds"),
                           ("sandwich", "six-level information bounds"),
                           ("brittleness", "grid check of the brittleness conditions")):
        sub.add_parser(name, parents=[common], help=helptext)
    c = sub.add_parser("curve", parents=[common], help="learning (alpha) and gamma curves")
    c.add_argument("kind", nargs="?", choices=("learning", "gamma"))
    c.add_argument("--solve", action="store_true", help="also compute each point with the solver")
    sub.add_parser("perturb", parents=[common], help="posterior means under two nearby models")
    s = sub.add_parser("scenarios", parents=[common], help="run the named worked examples")
    s.add_argument("names", nargs="*", help=f"scenario names ({', '.join(REGISTRY)})")
    s.add_argument("--all", action="store_true")
    return p


COMMANDS = {
    "prior": cmd_prior,
    "posterior": cmd_posterior,
    "sandwich": cmd_sandwich,
    "brittleness": cmd_brittleness,
    "curve": cmd_curve,
    "perturb": cmd_perturb,
    "scenarios": cmd_scenarios,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if args.command in ("prior", "posterior", "sandwich", "brittleness") and not args.spec:
        print(f"brittle-bayes {args.command}: error: --spec is required", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "scenarios" and not args.all and not args.names:
        print("brittle-bayes scenarios: error: name a scenario or pass --all", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReductionError, MeasureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if "void constraint set" not in str(exc) else EXIT_NUMERIC
    except (SolverError, PosteriorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
