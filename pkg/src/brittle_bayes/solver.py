"""Multi-start local search for reduced programs.

Each restart runs projected gradient ascent on an augmented Lagrangian:
central finite differences (``h = 1e-6``) give the gradient, atom
positions are clipped to the support, weight blocks are projected exactly
onto the simplex, and data slacks live in log space.  Restarts come from a
scrambled Sobol sequence and are evaluated as one numpy batch, each with
its own step size and multipliers, so the result does not depend on how
many restarts share the batch.

After the gradient phase every restart is polished with a linear program
over the parts that enter linearly: the weights of prior and positive
programs, the mixing weights (Charnes-Cooper form) of posterior programs,
and all atom masses in limit mode.  Positions near a breakpoint of the
quantity of interest are also tried snapped onto it.

The returned value is always re-evaluated from the witness through the
``measures`` module.  It is a feasible value, so a lower bound on the true
supremum (an upper bound on the infimum); no global certificate is given.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.stats import qmc

from ._jsonutil import encode_float
from .reduction import ProgramKind, ReducedProgram, Witness, threshold_program

DENOMINATOR_FLOOR = 1e-300
NEAR_SINGULAR = 1e-12
PRUNE_TOL = 1e-10
FEASIBILITY_TOL = 1e-6
_STEP_FACTORS = 2.0 ** np.arange(2, -11, -1)
_SNAP_RADIUS = 1e-3


class SolverError(RuntimeError):
    """Raised when a program cannot be solved at all (e.g. null data event)."""


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 32
    max_iters: int = 2000
    step_tol: float = 1e-10
    constraint_tol: float = 1e-8
    penalty_schedule: tuple = (10.0, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8)
    seed: int = 0
    fd_step: float = 1e-6
    polish: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (self.step_tol > 0 and self.constraint_tol > 0 and self.fd_step > 0):
            raise ValueError("tolerances must be positive")
        if not self.penalty_schedule or any(p <= 0 for p in self.penalty_schedule):
            raise ValueError("penalty schedule must be a nonempty list of positive weights")


@dataclass(frozen=True)
class SolveResult:
    value: float
    witness: Witness | None
    status: str
    restarts_used: int
    constraint_residual: float
    wall_time: float = 0.0
    denominator: float | None = None
    flags: tuple = ()
    direction: str = "sup"

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"

    CSV_HEADER = ("value", "status", "residual", "restarts_used", "wall_time")

    def csv_row(self) -> tuple:
        return (
            encode_float(self.value),
            self.status,
            f"{self.constraint_residual:.3e}",
            self.restarts_used,
            f"{self.wall_time:.3f}",
        )

    def to_dict(self, include_wall_time: bool = True) -> dict:
        doc = {
            "value": encode_float(self.value),
            "status": self.status,
            "direction": self.direction,
            "restarts_used": self.restarts_used,
            "constraint_residual": encode_float(self.constraint_residual),
            "denominator": None if self.denominator is None else encode_float(self.denominator),
            "flags": list(self.flags),
            "witness": None if self.witness is None else self.witness.to_dict(),
        }
        if include_wall_time:
            doc["wall_time"] = self.wall_time
        return doc


# ---------------------------------------------------------------------------
# variable layout

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row (last axis) onto the probability simplex."""
    k = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, k + 1)
    cond = u - css / idx > 0
    rho = k - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)


class _Layout:
    def __init__(self, prog: ReducedProgram):
        self.prog = prog
        m, k, s = prog.n_measures, prog.n_atoms, prog.n_slack
        self.m, self.k, self.s = m, k, s
        self.free_pos = prog.fixed_positions is None
        self.free_wts = prog.fixed_weights is None
        self.free_mix = prog.fixed_mix is None and m > 1
        self.free_slack = s > 0 and prog.fixed_slacks is None
        sizes = [
            m * k if self.free_pos else 0,
            m * k if self.free_wts else 0,
            m if self.free_mix else 0,
            m * s if self.free_slack else 0,
        ]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.nvar = int(self.offsets[-1])
        if s:
            lo, hi = prog.slack_bounds
            self.log_slack = (math.log(lo), math.log(hi))

    def _block(self, z, i):
        return z[..., self.offsets[i]: self.offsets[i + 1]]

    def unpack(self, z: np.ndarray):
        prog, m, k, s = self.prog, self.m, self.k, self.s
        b = z.shape[0]
        if self.free_pos:
            pos = self._block(z, 0).reshape(b, m, k)
        else:
            pos = np.broadcast_to(np.asarray(prog.fixed_positions, float), (b, m, k))
        if self.free_wts:
            wts = self._block(z, 1).reshape(b, m, k)
        else:
            wts = np.broadcast_to(np.asarray(prog.fixed_weights, float), (b, m, k))
        if self.free_mix:
            mix = self._block(z, 2)
        elif prog.fixed_mix is not None:
            mix = np.broadcast_to(np.asarray(prog.fixed_mix, float), (b, m))
        else:
            mix = np.ones((b, m))
        if self.free_slack:
            slack = np.exp(self._block(z, 3).reshape(b, m, s))
        elif s:
            slack = np.broadcast_to(np.asarray(prog.fixed_slacks, float), (b, m, s))
        else:
            slack = np.ones((b, m, 0))
        return pos, wts, mix, slack

    def pack(self, pos, wts, mix, slack) -> np.ndarray:
        b = pos.shape[0]
        parts = []
        if self.free_pos:
            parts.append(pos.reshape(b, -1))
        if self.free_wts:
            parts.append(wts.reshape(b, -1))
        if self.free_mix:
            parts.append(mix.reshape(b, -1))
        if self.free_slack:
            parts.append(np.log(slack).reshape(b, -1))
        return np.concatenate(parts, axis=-1) if parts else np.zeros((b, 0))

    def project(self, z: np.ndarray) -> np.ndarray:
        z = z.copy()
        prog, m, k = self.prog, self.m, self.k
        if self.free_pos:
            blk = self._block(z, 0)
            np.clip(blk, prog.lo, prog.hi, out=blk)
        if self.free_wts:
            blk = self._block(z, 1)
            shaped = blk.reshape(blk.shape[:-1] + (m, k))
            if prog.weight_mode == "simplex":
                shaped = project_simplex(shaped)
            else:
                shaped = np.clip(shaped, 0.0, prog.weight_cap)
            blk[...] = shaped.reshape(blk.shape)
        if self.free_mix:
            blk = self._block(z, 2)
            blk[...] = project_simplex(blk)
        if self.free_slack:
            blk = self._block(z, 3)
            np.clip(blk, *self.log_slack, out=blk)
        return z

    def starts(self, u: np.ndarray) -> np.ndarray:
        """Map points of the unit cube to feasible-ish starting points."""
        prog, m, k, s = self.prog, self.m, self.k, self.s
        b = u.shape[0]
        u = np.clip(u, 1e-12, 1 - 1e-12)
        pos, wts, mix, slack = (np.array(a, dtype=float, copy=True) for a in self.unpack(np.zeros((b, self.nvar))))
        if self.free_pos:
            pos = prog.lo + self._block(u, 0).reshape(b, m, k) * (prog.hi - prog.lo)
            if prog.has_data and not prog.limit_mode:
                n = prog.n_obs
                jitter = (2.0 * self._block(u, 0).reshape(b, m, k)[..., :n] - 1.0) * 0.5 * prog.observation.radius
                pos[..., :n] = np.clip(prog.observation.centers + jitter, prog.lo, prog.hi)
        if self.free_wts:
            e = -np.log(self._block(u, 1).reshape(b, m, k))
            if prog.weight_mode == "simplex":
                if prog.has_data and not prog.limit_mode and self.free_pos:
                    # every other start puts little mass on the data atoms
                    n = prog.n_obs
                    damp = np.where(np.arange(b) % 2 == 1, 10.0 ** (-2.0 - 4.0 * u[:, 0]), 1.0)
                    e[..., :n] *= damp[:, None, None]
                wts = e / e.sum(axis=-1, keepdims=True)
            else:
                psi0 = prog.features.components[0](pos)
                scale = np.sum(e * psi0, axis=-1, keepdims=True)
                wts = np.where(scale > 0, e / np.where(scale > 0, scale, 1.0), e)
        if self.free_mix:
            e = -np.log(self._block(u, 2))
            mix = e / e.sum(axis=-1, keepdims=True)
        if self.free_slack:
            lo, hi = self.log_slack
            slack = np.exp(lo + self._block(u, 3).reshape(b, m, s) * (hi - lo))
        return self.project(self.pack(pos, wts, mix, slack))

    def from_witness(self, w: Witness) -> np.ndarray:
        prog, m, k = self.prog, self.m, self.k
        if len(w.measures) > m:
            raise ValueError("warm start has more measures than the program")
        pos = np.full((1, m, k), prog.lo)
        wts = np.zeros((1, m, k))
        mix = np.zeros((1, m))
        slack = np.ones((1, m, self.s))
        for j, mu in enumerate(w.measures):
            if mu.n_atoms > k:
                raise ValueError("warm start measure has more atoms than the program allows")
            pos[0, j, : mu.n_atoms] = mu.atoms
            wts[0, j, : mu.n_atoms] = mu.weights
            mix[0, j] = w.mix[j]
            if self.s:
                slack[0, j] = np.asarray(w.slacks)[j]
        for j in range(len(w.measures), m):
            wts[0, j, 0] = 1.0
            if self.s:
                slack[0, j] = prog.slack_bounds[0]
        if not self.free_mix and prog.fixed_mix is None:
            mix[:] = 1.0
        return self.project(self.pack(pos, wts, mix, slack))


# ---------------------------------------------------------------------------
# augmented Lagrangian pieces

class _Merit:
    def __init__(self, prog: ReducedProgram, layout: _Layout):
        self.prog = prog
        self.layout = layout
        self.sign = 1.0 if prog.direction == "sup" else -1.0
        lower, upper, _ = prog.constraint_bounds()
        eq = lower == upper
        self.eq = np.flatnonzero(eq)
        self.up = np.flatnonzero(~eq & np.isfinite(upper))
        self.lo = np.flatnonzero(~eq & np.isfinite(lower))
        self.lower, self.upper = lower, upper

    def terms(self, z: np.ndarray):
        num, den, rows = self.prog.evaluate(*self.layout.unpack(z))
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(den >= DENOMINATOR_FLOOR, num / np.where(den > 0, den, 1.0), -np.inf * self.sign)
        h = rows[:, self.eq] - self.lower[self.eq]
        g_up = rows[:, self.up] - self.upper[self.up]
        g_lo = self.lower[self.lo] - rows[:, self.lo]
        return f, den, h, g_up, g_lo

    @staticmethod
    def violation(h, g_up, g_lo) -> np.ndarray:
        parts = [np.abs(h), np.maximum(g_up, 0.0), np.maximum(g_lo, 0.0)]
        parts = [p for p in parts if p.shape[-1]]
        if not parts:
            return np.zeros(h.shape[:-1])
        return np.max(np.concatenate(parts, axis=-1), axis=-1)

    def merit(self, z, lam, mu_up, mu_lo, rho):
        """Augmented Lagrangian to maximize; multipliers broadcast over rows of ``z``."""
        f, den, h, g_up, g_lo = self.terms(z)
        obj = self.sign * f
        pen = np.sum(lam * h, axis=-1) + 0.5 * rho * np.sum(h * h, axis=-1)
        a = np.maximum(0.0, mu_up + rho[:, None] * g_up)
        pen += np.sum(a * a - mu_up * mu_up, axis=-1) / (2.0 * rho)
        a = np.maximum(0.0, mu_lo + rho[:, None] * g_lo)
        pen += np.sum(a * a - mu_lo * mu_lo, axis=-1) / (2.0 * rho)
        out = obj - pen
        return np.where(np.isfinite(out), out, -np.inf)


def _local_search(prog, layout, merit: _Merit, z0: np.ndarray, cfg: SolverConfig):
    """Run the penalty rounds for all restarts at once; returns final points and flags."""
    r, n = z0.shape
    z = z0.copy()
    lam = np.zeros((r, merit.eq.size))
    mu_up = np.zeros((r, merit.up.size))
    mu_lo = np.zeros((r, merit.lo.size))
    schedule = list(cfg.penalty_schedule)
    rho_idx = np.zeros(r, dtype=int)
    iters = np.zeros(r, dtype=int)
    converged = np.zeros(r, dtype=bool)
    done = np.zeros(r, dtype=bool)
    prev_viol = np.full(r, np.inf)
    if n == 0:
        return z, np.ones(r, dtype=bool)
    h = cfg.fd_step
    eye = np.eye(n)
    probes = np.concatenate([eye, -eye]) * h
    width = max(prog.hi - prog.lo, 1.0)
    rounds = len(schedule) + 4
    for _ in range(rounds):
        active = np.flatnonzero(~done)
        if active.size == 0:
            break
        rho_all = np.array([schedule[min(i, len(schedule) - 1)] for i in rho_idx], dtype=float)
        step = np.full(r, 0.25 * width)
        inner_conv = np.zeros(r, dtype=bool)
        mcur = np.full(r, np.nan)
        stall = np.zeros(r, dtype=int)
        mref = np.full(r, -np.inf)
        budget = max(1, cfg.max_iters // len(schedule))
        for _it in range(budget):
            act = active[~inner_conv[active] & (iters[active] < cfg.max_iters)]
            if act.size == 0:
                break
            za = z[act]
            ra = rho_all[act]
            la, mu_a, ml_a = lam[act], mu_up[act], mu_lo[act]
            a = act.size
            m0 = mcur[act]
            fresh = np.isnan(m0)
            if fresh.any():
                m0[fresh] = merit.merit(za[fresh], la[fresh], mu_a[fresh], ml_a[fresh], ra[fresh])
            zp = (za[:, None, :] + probes[None]).reshape(-1, n)
            rep = lambda x: np.repeat(x, 2 * n, axis=0)  # noqa: E731
            mp = merit.merit(zp, rep(la), rep(mu_a), rep(ml_a), rep(ra)).reshape(a, 2 * n)
            grad = (mp[:, :n] - mp[:, n:]) / (2 * h)
            grad = np.where(np.isfinite(grad), grad, 0.0)
            scale = np.max(np.abs(grad), axis=1)
            flat = scale <= 0
            d = grad / np.where(flat, 1.0, scale)[:, None]
            tries = step[act][:, None] * _STEP_FACTORS[None, :]
            zc = za[:, None, :] + tries[..., None] * d[:, None, :]
            zc = layout.project(zc.reshape(-1, n)).reshape(a, _STEP_FACTORS.size, n)
            rep_c = lambda x: np.repeat(x, _STEP_FACTORS.size, axis=0)  # noqa: E731
            mc = merit.merit(zc.reshape(-1, n), rep_c(la), rep_c(mu_a), rep_c(ml_a), rep_c(ra))
            mc = mc.reshape(a, _STEP_FACTORS.size)
            best = np.argmax(mc, axis=1)
            mbest = mc[np.arange(a), best]
            improve = (mbest > m0) & ~flat
            znew = zc[np.arange(a), best]
            moved = np.max(np.abs(znew - za), axis=1)
            z[act[improve]] = znew[improve]
            mcur[act] = np.where(improve, mbest, m0)
            tiny = improve & (mbest - m0 <= 1e-13 * (1.0 + np.abs(m0)))
            stall[act] = np.where(tiny, stall[act] + 1, 0)
            step[act[improve]] = np.minimum(tries[np.arange(a), best][improve], width)
            shrink = act[~improve]
            step[shrink] = step[shrink] * _STEP_FACTORS[-1] / 2.0
            iters[act] += 1
            small = (~improve & (step[act] < cfg.step_tol)) | (improve & (moved < cfg.step_tol)) | flat | (stall[act] >= 8)
            inner_conv[act[small]] = True
            if _it % 25 == 24:
                # progress over the last window is negligible
                slow = mcur[act] - mref[act] <= 1e-9 * (1.0 + np.abs(mcur[act]))
                inner_conv[act[slow]] = True
                mref[act] = mcur[act]
        # multiplier and penalty updates
        za = z[active]
        f, den, hh, gu, gl = merit.terms(za)
        ra = rho_all[active]
        lam[active] += ra[:, None] * hh
        mu_up[active] = np.maximum(0.0, mu_up[active] + ra[:, None] * gu)
        mu_lo[active] = np.maximum(0.0, mu_lo[active] + ra[:, None] * gl)
        viol = _Merit.violation(hh, gu, gl)
        slow = viol > 0.25 * prev_viol[active]
        rho_idx[active[slow]] = np.minimum(rho_idx[active[slow]] + 1, len(schedule) - 1)
        prev_viol[active] = viol
        fin = (viol <= cfg.constraint_tol) & inner_conv[active]
        out_of_iters = iters[active] >= cfg.max_iters
        converged[active[fin]] = True
        done[active[fin | out_of_iters]] = True
    return z, converged


# ---------------------------------------------------------------------------
# linear polishing

def _lp(c, a_ub, b_ub, a_eq, b_eq, bounds, basic: bool = False):
    try:
        res = linprog(
            c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
            method="highs-ds" if basic else "highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
    except ValueError:
        return None
    if res.status != 0:
        return None
    x = np.maximum(res.x, 0.0)
    if a_eq is not None and a_eq.shape[0]:
        support = x > 1e-14
        if support.any():
            resid = b_eq - a_eq @ x
            corr, *_ = np.linalg.lstsq(a_eq[:, support], resid, rcond=None)
            x2 = x.copy()
            x2[support] += corr
            if np.all(x2 >= 0) and np.max(np.abs(b_eq - a_eq @ x2)) <= np.max(np.abs(resid)):
                x = x2
    return x


def _row_system(prog: ReducedProgram, coef_rows: np.ndarray, scale_col: np.ndarray | None = None):
    """Split constraint rows ``coef_rows @ x`` into LP equality and inequality blocks.

    With ``scale_col`` (Charnes-Cooper), row bounds become homogeneous:
    ``coef @ x - bound * (scale_col @ x)``.
    """
    lower, upper, _ = prog.constraint_bounds()
    lower = lower[: coef_rows.shape[0]]
    upper = upper[: coef_rows.shape[0]]
    a_eq, b_eq, a_ub, b_ub = [], [], [], []
    for i in range(coef_rows.shape[0]):
        row = coef_rows[i]
        lo, hi = lower[i], upper[i]
        if scale_col is not None:
            if lo == hi:
                a_eq.append(row - lo * scale_col)
                b_eq.append(0.0)
                continue
            if math.isfinite(hi):
                a_ub.append(row - hi * scale_col)
                b_ub.append(0.0)
            if math.isfinite(lo):
                a_ub.append(lo * scale_col - row)
                b_ub.append(0.0)
        else:
            if lo == hi:
                a_eq.append(row)
                b_eq.append(lo)
                continue
            if math.isfinite(hi):
                a_ub.append(row)
                b_ub.append(hi)
            if math.isfinite(lo):
                a_ub.append(-row)
                b_ub.append(-lo)
    return a_eq, b_eq, a_ub, b_ub


def _pack_lp(a_eq, b_eq, a_ub, b_ub, n):
    a_eq = np.array(a_eq, float).reshape(-1, n) if a_eq else None
    b_eq = np.array(b_eq, float) if b_eq else None
    a_ub = np.array(a_ub, float).reshape(-1, n) if a_ub else None
    b_ub = np.array(b_ub, float) if b_ub else None
    return a_eq, b_eq, a_ub, b_ub


def _polish_linear(prog: ReducedProgram, pos, wts, mix, slack):
    """LP over the weights of a one-measure program with positions fixed."""
    sign = 1.0 if prog.direction == "sup" else -1.0
    x = pos[0]
    phi = prog._atom_objective(x[None, None, :])[0, 0]
    feats = prog.features.evaluate(x)
    k = x.size
    a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T)
    if prog.weight_mode == "simplex":
        a_eq.append(np.ones(k))
        b_eq.append(1.0)
        bounds = [(0.0, None)] * k
    else:
        bounds = [(0.0, prog.weight_cap)] * k
    sol = _lp(-sign * phi, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, k)), bounds)
    if sol is None:
        return None
    if prog.weight_mode == "simplex":
        sol = sol / sol.sum()
    return pos, sol[None, :], mix, slack


def _polish_mixture(prog: ReducedProgram, pos, wts, mix, slack):
    """Charnes-Cooper LP over mixing weights with the measures held fixed."""
    sign = 1.0 if prog.direction == "sup" else -1.0
    m = prog.n_measures
    phi = np.sum(wts * prog._atom_objective(pos), axis=-1)
    if prog.features.dimension:
        psi = np.einsum("mk,mke->me", wts, prog.features.evaluate(pos))
    else:
        psi = np.zeros((m, 0))
    if prog.has_data:
        if prog.limit_mode:
            data = np.prod(slack, axis=-1)
        else:
            masses = np.einsum("mk,mki->mi", wts, prog.observation.indicators(pos))
            data = np.prod(masses, axis=-1)
    else:
        data = np.ones(m)
    if prog.kind == ProgramKind.LAMBDA_THRESHOLD:
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, psi.T)
        a_eq.append(np.ones(m))
        b_eq.append(1.0)
        c = -(phi - prog.lam) * data
        sol = _lp(c, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, m)), [(0.0, None)] * m)
        if sol is None:
            return None
        return pos, wts, sol / sol.sum(), slack
    top = float(np.max(data))
    if not top > DENOMINATOR_FLOOR:
        return None
    d = data / top
    a_eq, b_eq, a_ub, b_ub = _row_system(prog, psi.T, scale_col=np.ones(m))
    a_eq.append(d)
    b_eq.append(1.0)
    sol = _lp(-sign * phi * d, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, m)), [(0.0, None)] * m)
    if sol is None or sol.sum() <= 0:
        return None
    return pos, wts, sol / sol.sum(), slack


def _polish_limit(prog: ReducedProgram, pos, wts, mix, slack):
    """Limit mode: data factors do not depend on atom masses, so all masses enter an LP."""
    sign = 1.0 if prog.direction == "sup" else -1.0
    m, k = prog.n_measures, prog.n_atoms
    data = np.prod(slack, axis=-1)
    top = float(np.max(data))
    d = np.repeat(data / top, k)
    phi = prog._atom_objective(pos).reshape(-1)
    feats = prog.features.evaluate(pos).reshape(m * k, -1)
    if prog.kind == ProgramKind.LAMBDA_THRESHOLD:
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T)
        a_eq.append(np.ones(m * k))
        b_eq.append(1.0)
        c = -(phi - prog.lam) * np.repeat(data, k)
    else:
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T, scale_col=np.ones(m * k))
        a_eq.append(d)
        b_eq.append(1.0)
        c = -sign * phi * d
    sol = _lp(c, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, m * k)), [(0.0, None)] * (m * k))
    if sol is None:
        return None
    alpha = sol.reshape(m, k)
    mass = alpha.sum(axis=-1)
    if mass.sum() <= 0:
        return None
    new_mix = mass / mass.sum()
    new_wts = np.where(mass[:, None] > 0, alpha / np.where(mass > 0, mass, 1.0)[:, None], wts)
    return pos, new_wts, new_mix, slack


def _reorder(packed):
    a_eq, b_eq, a_ub, b_ub = packed
    return a_ub, b_ub, a_eq, b_eq


def _snap(prog: ReducedProgram, pos: np.ndarray) -> np.ndarray | None:
    bps = prog.breakpoints
    if bps.size == 0:
        return None
    diff = np.abs(pos[..., None] - bps)
    near = np.argmin(diff, axis=-1)
    close = np.min(diff, axis=-1) <= _SNAP_RADIUS * (prog.hi - prog.lo)
    if prog.has_data and not prog.limit_mode:
        close[..., : prog.n_obs] = False
    if not close.any():
        return None
    out = pos.copy()
    out[close] = bps[near[close]]
    return out


def _grid_levels(prog: ReducedProgram, count: int = 9) -> np.ndarray:
    lo, hi = prog.slack_bounds
    per = max(prog.n_slack, 1)
    dlo, dhi = lo ** per, hi ** per
    return np.geomspace(dlo, dhi, count)


def _level_slacks(prog: ReducedProgram, level: float) -> np.ndarray:
    s = prog.n_slack
    if s == 0:
        return np.zeros(0)
    if s == 1:
        return np.array([level])
    lo, hi = prog.slack_bounds
    return np.clip(np.full(s, level ** (1.0 / s)), lo, hi)


def _grid_columns_lp(prog: ReducedProgram, xs: np.ndarray, levels: np.ndarray):
    """Solve the LP whose columns are (position, data level) pairs; returns support."""
    sign = 1.0 if prog.direction == "sup" else -1.0
    x = np.repeat(xs, levels.size)
    lev = np.tile(levels, xs.size)
    n = x.size
    phi = prog._atom_objective(x)
    feats = prog.features.evaluate(x)
    data = lev / levels.max()
    if prog.kind in (ProgramKind.PRIOR_PRIMARY, ProgramKind.POSITIVE_MEASURE):
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T)
        if prog.weight_mode == "simplex":
            a_eq.append(np.ones(n))
            b_eq.append(1.0)
            bounds = [(0.0, None)] * n
        else:
            bounds = [(0.0, prog.weight_cap)] * n
        c = -sign * phi
    elif prog.kind == ProgramKind.LAMBDA_THRESHOLD:
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T)
        a_eq.append(np.ones(n))
        b_eq.append(1.0)
        bounds = [(0.0, None)] * n
        c = -(phi - prog.lam) * lev
    else:
        a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T, scale_col=np.ones(n))
        a_eq.append(data)
        b_eq.append(1.0)
        bounds = [(0.0, None)] * n
        c = -sign * phi * data
    sol = _lp(c, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, n)), bounds, basic=True)
    if sol is None:
        return None
    keep = sol > 0
    return x[keep], lev[keep], sol[keep]


_BALL_LEVELS = np.geomspace(1e-6, 1.0, 13)


def _finite_grid_candidate(prog: ReducedProgram, size: int = 513):
    """Grid LPs for finite-radius data with every ball mass of one measure pinned to ``b``.

    With the masses pinned the data probability ``b**n`` is a constant, so
    the measure's atoms enter linearly.  A second measure supported outside
    every ball (zero data probability) may absorb the moment constraints.
    The best level by LP value is returned; the caller re-evaluates it.
    """
    obs = prog.observation
    n = obs.count
    sign = 1.0 if prog.direction == "sup" else -1.0
    inner = np.concatenate([obs.centers - obs.radius * (1 - 1e-9), obs.centers + obs.radius * (1 - 1e-9)])
    xs = np.unique(np.concatenate([np.linspace(prog.lo, prog.hi, size), prog.breakpoints, inner]))
    xs = xs[(xs >= prog.lo) & (xs <= prog.hi)]
    ind = obs.indicators(xs)
    out = xs[~ind.any(axis=1)]
    if prog.band is not None or prog.n_measures < 2:
        out = out[:0]
    g1, g2 = xs.size, out.size
    x_all = np.concatenate([xs, out])
    phi = prog._atom_objective(x_all)
    feats = prog.features.evaluate(x_all)
    ref = prog.reference_ball_masses
    best, best_val = None, -math.inf
    for b in _BALL_LEVELS:
        d1 = b ** n
        if d1 < DENOMINATOR_FLOOR:
            continue
        if prog.band is not None:
            width = math.log(prog.band.level)
            if prog.band.mode == "joint":
                if abs(n * math.log(b) - float(np.sum(np.log(ref)))) > width:
                    continue
            elif np.any(np.abs(math.log(b) - np.log(ref)) > width):
                continue
        # data factors divided by d1 keep the LP well scaled when b**n is tiny
        data = np.concatenate([np.ones(g1), np.zeros(g2)])
        if prog.kind == ProgramKind.LAMBDA_THRESHOLD:
            a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T)
            a_eq.append(np.ones(g1 + g2))
            b_eq.append(1.0)
            c = -(phi - prog.lam) * data
            scale = d1
        else:
            a_eq, b_eq, a_ub, b_ub = _row_system(prog, feats.T, scale_col=np.ones(g1 + g2))
            a_eq.append(data)
            b_eq.append(1.0)
            c = -sign * phi * data
            scale = 1.0
        for i in range(n):
            a_eq.append(np.concatenate([ind[:, i] - b, np.zeros(g2)]))
            b_eq.append(0.0)
        sol = _lp(c, *_reorder(_pack_lp(a_eq, b_eq, a_ub, b_ub, g1 + g2)), [(0.0, None)] * (g1 + g2), basic=True)
        if sol is None:
            continue
        val = -float(c @ sol) * scale
        t1, t2 = sol[:g1], sol[g1:]
        s1, s2 = float(t1.sum()), float(t2.sum())
        k = prog.n_atoms
        if s1 <= 0 or np.count_nonzero(t1) > k or np.count_nonzero(t2) > k or val <= best_val:
            continue
        m = prog.n_measures
        pos = np.full((m, k), prog.lo)
        wts = np.zeros((m, k))
        wts[:, 0] = 1.0
        for j, (xv, t) in enumerate(((xs, t1), (out, t2))):
            keep = np.flatnonzero(t > 0)
            if keep.size:
                pos[j, : keep.size] = xv[keep]
                wts[j] = 0.0
                wts[j, : keep.size] = t[keep] / t[keep].sum()
        mix = np.zeros(m)
        mix[:2] = (s1, s2)
        best, best_val = (pos, wts, mix / mix.sum(), np.zeros((m, prog.n_slack))), val
    return best


def _grid_candidate(prog: ReducedProgram, size: int = 513, rounds: int = 3):
    """Discretize positions (and data levels), solve the LP, refine around its support.

    Only used where every variable except the positions enters linearly:
    prior and positive programs, and limit-mode posterior programs.
    """
    if prog.fixed_positions is not None or prog.fixed_weights is not None:
        return None
    limit = prog.limit_mode and prog.has_data
    if prog.kind in (ProgramKind.PRIOR_PRIMARY, ProgramKind.POSITIVE_MEASURE):
        if prog.n_measures != 1:
            return None
    elif prog.fixed_mix is not None or prog.fixed_slacks is not None:
        return None
    elif prog.has_data and not limit:
        return _finite_grid_candidate(prog, size)
    levels = _grid_levels(prog) if limit else np.ones(1)
    xs = np.unique(np.concatenate([np.linspace(prog.lo, prog.hi, size), prog.breakpoints]))
    spacing = (prog.hi - prog.lo) / (size - 1)
    found = _grid_columns_lp(prog, xs, levels)
    if found is None:
        return None
    for _ in range(rounds):
        support = np.unique(found[0])
        local = (support[:, None] + spacing * np.linspace(-1.0, 1.0, 41)[None, :]).ravel()
        local = local[(local >= prog.lo) & (local <= prog.hi)]
        xs = np.unique(np.concatenate([support, local, prog.breakpoints]))
        spacing /= 20.0
        nxt = _grid_columns_lp(prog, xs, levels)
        if nxt is None:
            break
        found = nxt
    x, lev, alpha = found
    used = np.unique(lev)
    m, k = prog.n_measures, prog.n_atoms
    if used.size > m:
        return None
    pos = np.full((m, k), prog.lo)
    wts = np.zeros((m, k))
    wts[:, 0] = 1.0
    mix = np.zeros(m)
    slack = np.zeros((m, prog.n_slack))
    for j in range(m):
        slack[j] = _level_slacks(prog, used[j] if j < used.size else levels[0])
    for j, level in enumerate(used):
        sel = lev == level
        if sel.sum() > k:
            return None
        a = alpha[sel]
        pos[j, : sel.sum()] = x[sel]
        wts[j] = 0.0
        wts[j, : sel.sum()] = a / a.sum()
        mix[j] = a.sum()
    if prog.fixed_mix is not None:
        mix = np.asarray(prog.fixed_mix, float)
    elif mix.sum() > 0:
        mix = mix / mix.sum()
    else:
        return None
    if prog.weight_mode == "positive":
        wts[0] = 0.0
        wts[0, : x.size] = alpha
    return pos, wts, mix, slack


def _polish(prog: ReducedProgram, layout: _Layout, point):
    pos, wts, mix, slack = point
    if prog.fixed_weights is not None and prog.fixed_mix is not None:
        return []
    if prog.kind in (ProgramKind.PRIOR_PRIMARY, ProgramKind.POSITIVE_MEASURE):
        fn = _polish_linear if prog.fixed_weights is None else None
    elif prog.limit_mode and prog.has_data and prog.fixed_weights is None and prog.fixed_mix is None:
        fn = _polish_limit
    elif prog.fixed_mix is None:
        fn = _polish_mixture
    else:
        fn = None
    if fn is None:
        return []
    out = []
    variants = [pos]
    if prog.fixed_positions is None:
        snapped = _snap(prog, pos)
        if snapped is not None:
            variants.append(snapped)
    for p in variants:
        res = fn(prog, p, wts, mix, slack)
        if res is not None:
            out.append(res)
    return out


# ---------------------------------------------------------------------------
# driver

@dataclass
class _Candidate:
    value: float
    residual: float
    witness: Witness
    den: float
    converged: bool
    atoms: int
    index: int = field(default=0)


def _sobol(nvar: int, count: int, seed: int) -> np.ndarray:
    if nvar == 0:
        return np.zeros((count, 0))
    eng = qmc.Sobol(d=nvar, scramble=True, seed=seed)
    m = max(0, math.ceil(math.log2(max(count, 1))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = eng.random_base2(m)
    return pts[:count]


def _prune(prog: ReducedProgram, w: Witness) -> Witness:
    measures, mix, slacks = [], [], []
    for j, mu in enumerate(w.measures):
        if w.mix[j] < PRUNE_TOL and len(w.measures) > 1:
            continue
        measures.append(mu.pruned(PRUNE_TOL))
        mix.append(w.mix[j])
        slacks.append(np.asarray(w.slacks)[j])
    mix = np.asarray(mix, float)
    if prog.fixed_mix is None and mix.sum() > 0:
        mix = mix / mix.sum()
    return Witness(tuple(measures), mix, np.asarray(slacks, float).reshape(len(measures), -1))


def _assess(prog: ReducedProgram, w: Witness) -> tuple[float, float, float]:
    num, den, rows = prog.witness_terms(w)
    if den < DENOMINATOR_FLOOR:
        return math.nan, math.inf, den
    return num / den, prog.residual(rows), den


def solve(program: ReducedProgram, cfg: SolverConfig | None = None,
          initial: Sequence[Witness] = ()) -> SolveResult:
    """Best feasible point over all restarts (and any warm starts)."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    layout = _Layout(program)
    merit = _Merit(program, layout)
    z0 = layout.starts(_sobol(layout.nvar, cfg.restarts, cfg.seed))
    if initial:
        z0 = np.concatenate([z0] + [layout.from_witness(w) for w in initial])
    z, converged = _local_search(program, layout, merit, z0, cfg)
    sign = 1.0 if program.direction == "sup" else -1.0
    best: _Candidate | None = None
    fallback: _Candidate | None = None
    any_positive_den = False
    jobs = []
    if cfg.polish:
        grid = _grid_candidate(program)
        if grid is not None:
            jobs.append((-1, [grid], True))
    for i in range(z.shape[0]):
        pos, wts, mix, slack = (np.array(a[0], dtype=float) for a in layout.unpack(z[i: i + 1]))
        points = [(pos, wts, mix, slack)]
        if cfg.polish:
            points.extend(_polish(program, layout, (pos, wts, mix, slack)))
        jobs.append((i, points, bool(converged[i])))
    for i, points, conv in jobs:
        for pt in points:
            try:
                w = program.make_witness(*pt)
            except ValueError:
                continue
            value, resid, den = _assess(program, w)
            if not math.isfinite(value):
                continue
            any_positive_den = True
            pw = _prune(program, w)
            pv, pr, pd = _assess(program, pw)
            if math.isfinite(pv) and pr <= max(resid, FEASIBILITY_TOL) and sign * pv >= sign * value - 1e-9:
                w, value, resid, den = pw, pv, pr, pd
            cand = _Candidate(value, resid, w, den, conv,
                              sum(m.n_atoms for m in w.measures), i)
            if resid <= FEASIBILITY_TOL:
                if best is None or _better(cand, best, sign):
                    best = cand
            elif fallback is None or resid < fallback.residual:
                fallback = cand
    wall = time.perf_counter() - t0
    used = int(z.shape[0])
    if best is None:
        if program.fractional and not any_positive_den:
            raise SolverError("conditioning on null event: every start has zero data probability")
        return SolveResult(
            value=-math.inf if sign > 0 else math.inf,
            witness=None if fallback is None else fallback.witness,
            status="infeasible",
            restarts_used=used,
            constraint_residual=math.inf if fallback is None else fallback.residual,
            wall_time=wall,
            direction=program.direction,
        )
    flags = []
    if program.fractional and best.den < NEAR_SINGULAR:
        flags.append("near-singular conditioning")
    return SolveResult(
        value=float(best.value),
        witness=best.witness,
        status="converged" if best.converged else "max-iter",
        restarts_used=used,
        constraint_residual=float(best.residual),
        wall_time=wall,
        denominator=float(best.den) if program.fractional else None,
        flags=tuple(flags),
        direction=program.direction,
    )


def _better(a: _Candidate, b: _Candidate, sign: float) -> bool:
    va, vb = sign * a.value, sign * b.value
    if va > vb + 1e-12:
        return True
    if va < vb - 1e-12:
        return False
    return a.atoms < b.atoms


def solve_fractional(program: ReducedProgram, cfg: SolverConfig | None = None,
                     initial: Sequence[Witness] = ()) -> SolveResult:
    """Solve a posterior (linear-fractional) program."""
    if program.kind != ProgramKind.POSTERIOR_FRACTIONAL:
        raise SolverError(f"expected a POSTERIOR_FRACTIONAL program, got {program.kind.value}")
    return solve(program, cfg, initial)


def witness_value(program: ReducedProgram, witness: Witness) -> float:
    """Objective at a witness, recomputed through the ``measures`` module."""
    num, den, _ = program.witness_terms(witness)
    return num / den


def lambda_threshold(value: Callable[[float], float], lo: float, hi: float, tol: float = 1e-6) -> float:
    """Bisection for ``sup {lam : value(lam) > 0}`` with ``value`` non-increasing."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if value(hi) > 0:
        raise SolverError(f"bracket too small: value({hi}) > 0")
    a, b = float(lo), float(hi)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if value(mid) > 0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def threshold_family(program: ReducedProgram, cfg: SolverConfig | None = None) -> Callable[[float], float]:
    """``lam -> sup E_pi[(Phi - lam) D]`` over the class described by ``program``."""
    cfg = cfg or SolverConfig()

    def value(lam: float) -> float:
        res = solve(threshold_program(program, lam), cfg)
        return res.value if res.feasible else -math.inf

    return value


__all__ = [
    "DENOMINATOR_FLOOR",
    "SolveResult",
    "SolverConfig",
    "SolverError",
    "lambda_threshold",
    "project_simplex",
    "solve",
    "solve_fractional",
    "threshold_family",
    "witness_value",
]
