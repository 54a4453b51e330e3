"""Piecewise-C1 vector trajectories with breakpoints and one-sided derivatives.

A trajectory is a list of contiguous segments, each defined per component
by an expression in t, so values and derivatives are exact per segment and
quadrature can treat every panel as smooth.  Values are continuous across
breakpoints; derivatives may jump (checked at construction).
"""

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import exprs
from .exprs import ExprAst, differentiate, parse_expr

# absolute tolerance for comparing times against breakpoints
BREAK_TOL = 1e-12
# relative scale for the value-continuity check at breakpoints
CONT_TOL = 1e-12


class TrajectoryError(ValueError):
    pass


class Segment:
    """One smooth piece: per-component value expressions in t on [t_start, t_end]."""

    __slots__ = ("t_start", "t_end", "value_exprs", "deriv_exprs",
                 "_value_fns", "_deriv_fns")

    def __init__(self, t_start: float, t_end: float, value_exprs: Tuple[ExprAst, ...]):
        if not t_end > t_start:
            raise TrajectoryError(
                f"segment must have t_start < t_end, got [{t_start}, {t_end}]")
        self.t_start = float(t_start)
        self.t_end = float(t_end)
        self.value_exprs = tuple(value_exprs)
        self.deriv_exprs = tuple(differentiate(e, "t") for e in value_exprs)
        self._value_fns = None
        self._deriv_fns = None

    @property
    def dim(self) -> int:
        return len(self.value_exprs)

    def _fns(self, which: str):
        if which == "value":
            if self._value_fns is None:
                self._value_fns = tuple(e.compiled() for e in self.value_exprs)
            return self._value_fns
        if self._deriv_fns is None:
            self._deriv_fns = tuple(e.compiled() for e in self.deriv_exprs)
        return self._deriv_fns

    def value(self, t: float) -> np.ndarray:
        return np.array([float(f(t)) for f in self._fns("value")])

    def deriv(self, t: float) -> np.ndarray:
        return np.array([float(f(t)) for f in self._fns("deriv")])

    def value_arr(self, ts: np.ndarray) -> np.ndarray:
        """Shape (dim, len(ts)) array of values at the given times."""
        return np.vstack([_broadcast(f(ts), ts) for f in self._fns("value")])

    def deriv_arr(self, ts: np.ndarray) -> np.ndarray:
        return np.vstack([_broadcast(f(ts), ts) for f in self._fns("deriv")])


def _broadcast(res, ts: np.ndarray) -> np.ndarray:
    arr = np.asarray(res, dtype=float)
    if arr.shape != ts.shape:
        arr = np.broadcast_to(arr, ts.shape)
    return arr


SegmentSpec = Tuple[float, float, Sequence[Union[str, ExprAst]]]


class Trajectory:
    """Piecewise-smooth vector function on [a, b] with interior breakpoints."""

    __slots__ = ("dim", "a", "b", "breakpoints", "segments", "_joins")

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise TrajectoryError("trajectory needs at least one segment")
        dim = segments[0].dim
        for seg in segments:
            if seg.dim != dim:
                raise TrajectoryError("segments disagree on dimension")
        for prev, nxt in zip(segments, segments[1:]):
            if abs(prev.t_end - nxt.t_start) > BREAK_TOL:
                raise TrajectoryError(
                    f"segments not contiguous: [{prev.t_start}, {prev.t_end}] "
                    f"then [{nxt.t_start}, {nxt.t_end}]")
            left = prev.value(prev.t_end)
            right = nxt.value(nxt.t_start)
            scale = 1.0 + float(np.max(np.abs(left)))
            gap = float(np.max(np.abs(left - right)))
            if gap > CONT_TOL * scale:
                raise TrajectoryError(
                    f"value discontinuity at t={prev.t_end}: "
                    f"left {left.tolist()} vs right {right.tolist()} (gap {gap:g})")
        for seg in segments:
            for t in (seg.t_start, seg.t_end):
                v = seg.value(t)
                d = seg.deriv(t)
                if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
                    raise TrajectoryError(
                        f"non-finite segment value/derivative at t={t}")
        self.dim = dim
        self.segments = tuple(segments)
        self.a = segments[0].t_start
        self.b = segments[-1].t_end
        self.breakpoints = tuple(seg.t_start for seg in segments[1:])
        self._joins = (self.a,) + self.breakpoints + (self.b,)

    @classmethod
    def from_segments(cls, specs: Sequence[SegmentSpec]) -> "Trajectory":
        segments = []
        for t_start, t_end, comps in specs:
            parsed = tuple(
                c if isinstance(c, ExprAst) else parse_expr(c, ("t",))
                for c in comps)
            segments.append(Segment(t_start, t_end, parsed))
        return cls(segments)

    # -- location -----------------------------------------------------------

    def _snap(self, t: float) -> Tuple[float, Optional[int]]:
        """Snap t onto a join if within BREAK_TOL; returns (t_eff, join index)."""
        i = bisect_left(self._joins, t)
        for j in (i - 1, i):
            if 0 <= j < len(self._joins) and abs(self._joins[j] - t) <= BREAK_TOL:
                return self._joins[j], j
        return t, None

    def _check_domain(self, t: float) -> None:
        if t < self.a - BREAK_TOL or t > self.b + BREAK_TOL:
            raise TrajectoryError(
                f"t={t} outside trajectory domain [{self.a}, {self.b}]")

    def segment_index(self, t: float, side: str) -> int:
        """Index of the smooth segment governing the one-sided limit at t."""
        self._check_domain(t)
        if side not in ("left", "right"):
            raise TrajectoryError(f"side must be 'left' or 'right', got {side!r}")
        t_eff, join = self._snap(t)
        if join is not None:
            if side == "right":
                if join == len(self.segments):
                    raise TrajectoryError(f"no right limit at domain end t={t}")
                return join
            if join == 0:
                raise TrajectoryError(f"no left limit at domain start t={t}")
            return join - 1
        return bisect_right(self._joins, t_eff) - 1

    # -- evaluation ----------------------------------------------------------

    def value(self, t: float) -> np.ndarray:
        """x(t); at a breakpoint, the common (continuous) value."""
        self._check_domain(t)
        t_eff, join = self._snap(t)
        if join is not None:
            idx = join if join < len(self.segments) else join - 1
        else:
            idx = bisect_right(self._joins, t_eff) - 1
        return self.segments[idx].value(t_eff)

    def deriv(self, t: float, side: str = "right") -> np.ndarray:
        """One-sided derivative from the given side."""
        idx = self.segment_index(t, side)
        t_eff, _ = self._snap(t)
        return self.segments[idx].deriv(t_eff)

    def second_deriv(self, t: float, side: str = "right") -> np.ndarray:
        """One-sided second derivative: 3-point one-sided FD of deriv,
        step min(1e-4, segment length / 8), stencil kept inside the segment."""
        idx = self.segment_index(t, side)
        seg = self.segments[idx]
        t_eff, _ = self._snap(t)
        seg_len = seg.t_end - seg.t_start
        available = (seg.t_end - t_eff) if side == "right" else (t_eff - seg.t_start)
        s = min(1e-4, seg_len / 8.0, available / 2.0)
        if s <= 1e-13:
            raise TrajectoryError(
                f"segment too short for the FD stencil at t={t} ({side})")
        g = seg.deriv
        if side == "right":
            return (-3.0 * g(t_eff) + 4.0 * g(t_eff + s) - g(t_eff + 2.0 * s)) / (2.0 * s)
        return (3.0 * g(t_eff) - 4.0 * g(t_eff - s) + g(t_eff - 2.0 * s)) / (2.0 * s)

    # -- structure -----------------------------------------------------------

    def split_at(self, points: Sequence[float]) -> "Trajectory":
        """Same function with extra breakpoints inserted (values unchanged)."""
        cuts = sorted(set(float(p) for p in points))
        segments: List[Segment] = []
        for seg in self.segments:
            inner = [p for p in cuts
                     if seg.t_start + BREAK_TOL < p < seg.t_end - BREAK_TOL]
            lo = seg.t_start
            for p in inner:
                segments.append(Segment(lo, p, seg.value_exprs))
                lo = p
            segments.append(Segment(lo, seg.t_end, seg.value_exprs))
        return Trajectory(segments)


@dataclass(frozen=True)
class HistorySpec:
    """Boundary data: C1 history phi on [t0-h, t0] and the terminal point x1."""

    phi: Trajectory
    x1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x1", np.asarray(self.x1, dtype=float).reshape(-1))
        if self.phi.breakpoints:
            raise TrajectoryError("history must be C1 (no interior breakpoints)")
        if self.phi.dim != self.x1.size:
            raise TrajectoryError(
                f"history dimension {self.phi.dim} != terminal dimension {self.x1.size}")
        for t in (self.phi.a, self.phi.b):
            if not np.all(np.isfinite(self.phi.value(t))):
                raise TrajectoryError(f"history value not finite at t={t}")
        if not np.all(np.isfinite(self.x1)):
            raise TrajectoryError("terminal point x1 not finite")


SPLICE_TOL = 1e-9


def splice_history(hist: HistorySpec, interior: Trajectory) -> Trajectory:
    """Concatenate history and interior into one admissible trajectory.

    Requires interior(t0) = phi(t0) and interior(t1) = x1, each within
    1e-9*(1+|x1|); t0 becomes a breakpoint of the result.
    """
    t0 = hist.phi.b
    if abs(interior.a - t0) > BREAK_TOL:
        raise TrajectoryError(
            f"interior domain starts at {interior.a}, history ends at {t0}")
    scale = 1.0 + float(np.max(np.abs(hist.x1)))
    v_phi = hist.phi.value(t0)
    v_int = interior.value(interior.a)
    gap0 = float(np.max(np.abs(v_phi - v_int)))
    if gap0 > SPLICE_TOL * scale:
        raise TrajectoryError(
            f"boundary mismatch at t0={t0}: history {v_phi.tolist()} vs "
            f"interior {v_int.tolist()} (gap {gap0:g})")
    v_end = interior.value(interior.b)
    gap1 = float(np.max(np.abs(v_end - hist.x1)))
    if gap1 > SPLICE_TOL * scale:
        raise TrajectoryError(
            f"boundary mismatch at t1={interior.b}: trajectory {v_end.tolist()} vs "
            f"terminal {hist.x1.tolist()} (gap {gap1:g})")
    return Trajectory(list(hist.phi.segments) + list(interior.segments))


def constant_history(t_start: float, t_end: float, values: Sequence[float]) -> HistorySpec:
    """History identically equal to a constant vector, terminal equal to it too.

    Convenience for the common phi == const fixtures; callers overriding the
    terminal point should construct HistorySpec directly.
    """
    comps = [exprs.ExprAst(exprs.Const(float(v)), ("t",)) for v in values]
    phi = Trajectory([Segment(t_start, t_end, tuple(comps))])
    return HistorySpec(phi=phi, x1=np.asarray(values, dtype=float))
