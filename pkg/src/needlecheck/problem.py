"""Delay variational problem assembly and cost evaluation.

Bundles S(x) = integral over [t0, t1] of L(t, x(t), x(t-h), xdot(t), xdot(t-h)) dt
with boundary data x = phi on [t0-h, t0], x(t1) = x1, under the convention
that L and all its partials are identically zero for t > t1.  The convention
is implemented by gating on t at evaluation time, never by editing the AST,
so the partials stay mutually consistent beyond t1.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .exprs import Const, EvalDomainError, ExprAst, LagrangianExpr, eval_expr
from .trajectory import (BREAK_TOL, HistorySpec, Trajectory, splice_history)
from . import quadrature


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class DelayProblem:
    t0: float
    t1: float
    h: float
    dim: int
    lagrangian: LagrangianExpr
    hist: HistorySpec

    def __post_init__(self):
        if self.h <= 0:
            raise ProblemError(f"delay h must be positive, got {self.h}")
        if not self.t1 - self.t0 > self.h:
            raise ProblemError(
                f"t1 - t0 must exceed h, got t1-t0={self.t1 - self.t0}, h={self.h}")
        if self.lagrangian.dim != self.dim:
            raise ProblemError(
                f"Lagrangian dimension {self.lagrangian.dim} != problem dim {self.dim}")
        if self.hist.phi.dim != self.dim:
            raise ProblemError(
                f"history dimension {self.hist.phi.dim} != problem dim {self.dim}")
        if abs(self.hist.phi.a - (self.t0 - self.h)) > BREAK_TOL or \
                abs(self.hist.phi.b - self.t0) > BREAK_TOL:
            raise ProblemError(
                f"history domain [{self.hist.phi.a}, {self.hist.phi.b}] must be "
                f"[t0-h, t0] = [{self.t0 - self.h}, {self.t0}]")


class CandidateExtremal:
    """Admissible candidate: full trajectory on [t0-h, t1] honoring the boundary data."""

    __slots__ = ("problem", "traj")

    def __init__(self, problem: DelayProblem, traj: Trajectory):
        if abs(traj.a - (problem.t0 - problem.h)) > BREAK_TOL or \
                abs(traj.b - problem.t1) > BREAK_TOL:
            raise ProblemError(
                f"candidate domain [{traj.a}, {traj.b}] must be "
                f"[{problem.t0 - problem.h}, {problem.t1}]")
        scale = 1.0 + float(np.max(np.abs(problem.hist.x1)))
        ts = np.linspace(problem.t0 - problem.h, problem.t0, 17)
        for t in ts:
            gap = float(np.max(np.abs(traj.value(t) - problem.hist.phi.value(t))))
            if gap > 1e-9 * scale:
                raise ProblemError(
                    f"candidate differs from history at t={t} (gap {gap:g})")
        gap1 = float(np.max(np.abs(traj.value(problem.t1) - problem.hist.x1)))
        if gap1 > 1e-9 * scale:
            raise ProblemError(
                f"candidate misses terminal point: x(t1)={traj.value(problem.t1).tolist()} "
                f"vs x1={problem.hist.x1.tolist()} (gap {gap1:g})")
        self.problem = problem
        self.traj = traj

    @classmethod
    def from_interior(cls, problem: DelayProblem,
                      interior: Trajectory) -> "CandidateExtremal":
        """Build the admissible trajectory by splicing the history onto an
        interior trajectory on [t0, t1]."""
        return cls(problem, splice_history(problem.hist, interior))


# ---------------------------------------------------------------------------
# point evaluation with the extended-zero convention

def _call_scalar(expr: ExprAst, env: Dict[str, float]) -> float:
    """Fast compiled evaluation; falls back to the tree walk to localize
    the offending subexpression on a domain error."""
    fn = expr.compiled()
    args = [env[v] for v in expr.variables]
    try:
        with np.errstate(all="ignore"):
            out = float(fn(*args))
    except (ZeroDivisionError, ValueError, OverflowError):
        return eval_expr(expr, env)  # raises EvalDomainError with context
    if not math.isfinite(out):
        eval_expr(expr, env)  # raises with context when truly invalid
        raise EvalDomainError("non-finite value", str(expr))
    return out


def point_env(p: DelayProblem, t: float, x: np.ndarray, y: np.ndarray,
              dx: np.ndarray, dy: np.ndarray) -> Dict[str, float]:
    env = {"t": float(t)}
    for i in range(p.dim):
        env[f"x{i + 1}"] = float(x[i])
        env[f"y{i + 1}"] = float(y[i])
        env[f"dx{i + 1}"] = float(dx[i])
        env[f"dy{i + 1}"] = float(dy[i])
    return env


def eval_L_extended(p: DelayProblem, t: float, x, y, dx, dy) -> float:
    """L(t, x, y, dx, dy) for t <= t1; exactly 0 for t > t1."""
    if t > p.t1:
        return 0.0
    env = point_env(p, t, np.atleast_1d(np.asarray(x, dtype=float)),
                    np.atleast_1d(np.asarray(y, dtype=float)),
                    np.atleast_1d(np.asarray(dx, dtype=float)),
                    np.atleast_1d(np.asarray(dy, dtype=float)))
    return _call_scalar(p.lagrangian.body, env)


def eval_L_env(p: DelayProblem, t: float, env: Dict[str, float]) -> float:
    """L at a prebuilt argument assignment, gated beyond t1."""
    if t > p.t1:
        return 0.0
    return _call_scalar(p.lagrangian.body, env)


def eval_partial_env(p: DelayProblem, var: str, t: float,
                     env: Dict[str, float]) -> float:
    """One symbolic partial at a prebuilt assignment, gated beyond t1."""
    if t > p.t1:
        return 0.0
    return _call_scalar(p.lagrangian.partial(var), env)


def partials_vec(p: DelayProblem, block: str, t: float,
                 env: Dict[str, float]) -> np.ndarray:
    """Gradient block (one of x|y|dx|dy) as a length-n vector, gated beyond t1."""
    if block not in ("x", "y", "dx", "dy"):
        raise ProblemError(f"unknown partial block {block!r}")
    if t > p.t1:
        return np.zeros(p.dim)
    return np.array([
        _call_scalar(p.lagrangian.partial(f"{block}{i + 1}"), env)
        for i in range(p.dim)])


def along(p: DelayProblem, cand: CandidateExtremal, t: float,
          side: str = "right") -> Dict[str, float]:
    """Argument assignment (t, x(t), x(t-h), xdot(t), xdot(t-h)) along the
    candidate, with one-sided derivatives from the given side.

    Valid for t in [t0, t1+h].  For t > t1 the trajectory lookups clamp to
    t1: the values are irrelevant there because every Lagrangian term is
    gated to zero by the extended-zero convention; clamping just keeps the
    assignment finite and deterministic.
    """
    if t < p.t0 - BREAK_TOL or t > p.t1 + p.h + BREAK_TOL:
        raise ProblemError(
            f"t={t} outside [{p.t0}, {p.t1 + p.h}] for along()")
    traj = cand.traj
    te = min(t, p.t1)
    ts = te - p.h

    # one-sided limits fall back to the interior side at the domain ends
    def _deriv(tt: float, want: str) -> np.ndarray:
        eff = want
        if tt >= traj.b - BREAK_TOL:
            eff = "left"
        elif tt <= traj.a + BREAK_TOL:
            eff = "right"
        return traj.deriv(tt, eff)

    x = traj.value(te)
    y = traj.value(ts)
    dx = _deriv(te, side)
    dy = _deriv(ts, side)
    return point_env(p, t, x, y, dx, dy)


# ---------------------------------------------------------------------------
# cost functional

def _lagrangian_panel_values(p: DelayProblem, traj: Trajectory,
                             ts: np.ndarray, mid: float) -> np.ndarray:
    """L along traj at node times ts, all lying in one smooth panel around mid
    (no trajectory or delay-shift breakpoint strictly inside)."""
    seg_t = traj.segments[traj.segment_index(mid, "right")]
    seg_y = traj.segments[traj.segment_index(mid - p.h, "right")]
    xs = seg_t.value_arr(ts)
    dxs = seg_t.deriv_arr(ts)
    ys = seg_y.value_arr(ts - p.h)
    dys = seg_y.deriv_arr(ts - p.h)
    fn = p.lagrangian.body.compiled()
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(ts, *xs, *ys, *dxs, *dys), dtype=float)
    if vals.shape != ts.shape:
        vals = np.broadcast_to(vals, ts.shape).copy()
    # extended-zero convention: nothing contributes beyond t1
    vals = np.where(ts > p.t1, 0.0, vals)
    if not np.all(np.isfinite(vals)):
        bad = float(ts[int(np.argmax(~np.isfinite(vals)))])
        raise EvalDomainError(f"non-finite Lagrangian sample at t={bad}",
                              p.lagrangian.source)
    return vals


def integrate_L(p: DelayProblem, traj: Trajectory, lo: float, hi: float,
                extra_breaks: Tuple[float, ...] = (),
                order: Optional[int] = None) -> float:
    """Integral of L along traj over [lo, hi] (clipped to [t0, t1]),
    with panels split at trajectory breakpoints and their +h shifts."""
    lo = max(lo, p.t0)
    hi = min(hi, p.t1)
    if hi <= lo:
        return 0.0
    breaks = list(extra_breaks)
    for bp in traj.breakpoints:
        breaks.append(bp)
        breaks.append(bp + p.h)
    panels = quadrature.panel_plan(lo, hi, breaks)
    contributions = []
    for p0, p1 in panels:
        ts, ws = quadrature.panel_nodes(p0, p1, order)
        vals = _lagrangian_panel_values(p, traj, ts, 0.5 * (p0 + p1))
        contributions.append(float(np.dot(ws, vals)))
    return math.fsum(contributions)


def eval_S(p: DelayProblem, traj: Trajectory, order: Optional[int] = None) -> float:
    """Cost functional S(x) by breakpoint-aware Gauss-Legendre quadrature."""
    if traj.a > p.t0 - p.h + BREAK_TOL or traj.b < p.t1 - BREAK_TOL:
        raise ProblemError(
            f"trajectory domain [{traj.a}, {traj.b}] does not cover "
            f"[{p.t0 - p.h}, {p.t1}]")
    return integrate_L(p, traj, p.t0, p.t1, order=order)


def lagrangian_is_state_independent(p: DelayProblem) -> bool:
    """True when every x/y partial is the constant-zero AST."""
    for block in ("x", "y"):
        for i in range(1, p.dim + 1):
            node = p.lagrangian.partial(f"{block}{i}").root
            if not (isinstance(node, Const) and node.value == 0.0):
                return False
    return True
