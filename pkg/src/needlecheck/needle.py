"""Two-sided needle variations: compactly supported triangular perturbations.

A needle is parameterized by (theta, lambda, xi, side).  On the right it
rises with slope xi on [theta, theta+lambda*eps) and returns to zero with
slope (lambda/(lambda-1))*xi on [theta+lambda*eps, theta+eps); the left
needle mirrors this on [theta-eps, theta].  The two slopes are balanced so
the perturbation vanishes at both support ends, keeping varied trajectories
admissible.  Values are continuous; only the derivative is side-sensitive,
so interval-edge conventions are realized through one-sided evaluation.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exprs import Const, ExprAst, Var, mul, sub, add
from .problem import CandidateExtremal, DelayProblem
from .trajectory import BREAK_TOL, Segment, Trajectory

# corner snapping tolerance, matching trajectory breakpoint comparisons
_CORNER_TOL = 1e-12


class NeedleError(ValueError):
    pass


@dataclass(frozen=True)
class NeedleSpec:
    theta: float
    lam: float
    xi: np.ndarray
    side: str  # "right" | "left"

    def __post_init__(self):
        object.__setattr__(self, "xi",
                           np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if not 0.0 < self.lam < 1.0:
            raise NeedleError(f"lambda must be strictly inside (0,1), got {self.lam}")
        if float(np.max(np.abs(self.xi))) == 0.0:
            raise NeedleError("xi must be nonzero")
        if self.side not in ("right", "left"):
            raise NeedleError(f"side must be 'right' or 'left', got {self.side!r}")

    @property
    def dim(self) -> int:
        return self.xi.size

    @property
    def outer_slope(self) -> np.ndarray:
        return (self.lam / (self.lam - 1.0)) * self.xi

    def corners(self, eps: float) -> Tuple[float, float, float]:
        """Support corners in increasing order."""
        if self.side == "right":
            return (self.theta, self.theta + self.lam * eps, self.theta + eps)
        return (self.theta - eps, self.theta - self.lam * eps, self.theta)


@dataclass(frozen=True)
class ValidityWindow:
    """Largest admissible eps for needles anchored at theta.

    eps_bar bounds right needles: min{h, t1-theta-h} in the standard regime
    theta < t1-h, and min{h, t1-theta} in the tail regime theta in [t1-h, t1)
    where the delayed region falls beyond t1 and vanishes by the extended-zero
    convention.  eps_tilde = min{h, theta-t0} bounds left needles.  A
    non-positive field means that side is not available at this theta.
    """

    eps_bar: float
    eps_tilde: float
    eps_hat: float
    tail_right: bool


def validity_window(p: DelayProblem, theta: float) -> ValidityWindow:
    cut = p.t1 - p.h
    if theta < cut - BREAK_TOL:
        eps_bar = min(p.h, p.t1 - p.h - theta)
        tail = False
    else:
        eps_bar = min(p.h, p.t1 - theta)
        tail = True
    eps_tilde = min(p.h, theta - p.t0)
    return ValidityWindow(eps_bar=eps_bar, eps_tilde=eps_tilde,
                          eps_hat=min(eps_bar, eps_tilde), tail_right=tail)


def window_for(p: DelayProblem, spec: NeedleSpec) -> float:
    """The side's eps bound; raises when theta is outside the side's regime."""
    w = validity_window(p, spec.theta)
    if spec.side == "right":
        if spec.theta < p.t0 - BREAK_TOL or spec.theta >= p.t1 - BREAK_TOL:
            raise NeedleError(
                f"right needle requires theta in [{p.t0}, {p.t1}), got {spec.theta}")
        limit = w.eps_bar
    else:
        if spec.theta <= p.t0 + BREAK_TOL or spec.theta > p.t1 + BREAK_TOL:
            raise NeedleError(
                f"left needle requires theta in ({p.t0}, {p.t1}], got {spec.theta}")
        limit = w.eps_tilde
    if limit <= 0:
        raise NeedleError(
            f"empty validity window for {spec.side} needle at theta={spec.theta}")
    return limit


def check_eps(p: DelayProblem, spec: NeedleSpec, eps: float) -> None:
    limit = window_for(p, spec)
    if not 0.0 < eps < limit:
        raise NeedleError(
            f"eps={eps} outside validity window (0, {limit}) for "
            f"{spec.side} needle at theta={spec.theta}")


# ---------------------------------------------------------------------------
# values and one-sided derivatives

def q_plus(spec: NeedleSpec, eps: float, t: float) -> np.ndarray:
    """Right-needle value at t (zero outside [theta, theta+eps])."""
    if spec.side != "right":
        raise NeedleError("q_plus requires a right-sided spec")
    c0, c1, c2 = spec.corners(eps)
    if t < c0 or t > c2:
        return np.zeros(spec.dim)
    if t <= c1:
        return (t - c0) * spec.xi
    return (t - c2) * spec.outer_slope


def q_minus(spec: NeedleSpec, eps: float, t: float) -> np.ndarray:
    """Left-needle value at t (zero outside [theta-eps, theta])."""
    if spec.side != "left":
        raise NeedleError("q_minus requires a left-sided spec")
    c0, c1, c2 = spec.corners(eps)
    if t < c0 or t > c2:
        return np.zeros(spec.dim)
    if t >= c1:
        return (t - c2) * spec.xi
    return (t - c0) * spec.outer_slope


def needle_value(spec: NeedleSpec, eps: float, t: float) -> np.ndarray:
    return q_plus(spec, eps, t) if spec.side == "right" else q_minus(spec, eps, t)


def qdot(spec: NeedleSpec, eps: float, t: float, side: str = "right") -> np.ndarray:
    """One-sided needle derivative: the inner slope xi, the outer slope
    (lambda/(lambda-1))*xi, zero outside the support; one-sided at corners."""
    if side not in ("right", "left"):
        raise NeedleError(f"side must be 'left' or 'right', got {side!r}")
    c0, c1, c2 = spec.corners(eps)
    if spec.side == "right":
        inner_lo, inner_hi = c0, c1
        outer_lo, outer_hi = c1, c2
        inner_slope, outer_slope = spec.xi, spec.outer_slope
    else:
        inner_lo, inner_hi = c1, c2
        outer_lo, outer_hi = c0, c1
        inner_slope, outer_slope = spec.xi, spec.outer_slope

    def in_open(lo: float, hi: float) -> bool:
        return lo + _CORNER_TOL < t < hi - _CORNER_TOL

    # strictly interior to a branch: side does not matter
    if in_open(inner_lo, inner_hi):
        return inner_slope.copy()
    if in_open(outer_lo, outer_hi):
        return outer_slope.copy()
    # at a corner (or outside): pick the slope governing the requested side
    probe = t + (_CORNER_TOL if side == "right" else -_CORNER_TOL)
    if inner_lo - _CORNER_TOL < probe < inner_hi + _CORNER_TOL \
            and inner_lo <= probe <= inner_hi:
        return inner_slope.copy()
    if outer_lo <= probe <= outer_hi:
        return outer_slope.copy()
    return np.zeros(spec.dim)


# ---------------------------------------------------------------------------
# varied trajectories and norms

def _branch_expr(base: ExprAst, anchor: float, slope: float) -> ExprAst:
    """base(t) + slope*(t - anchor) as an expression in t."""
    bump = mul(sub(Var("t"), Const(anchor)), Const(slope))
    return ExprAst(add(base.root, bump), base.variables)


def vary(cand: CandidateExtremal, spec: NeedleSpec, eps: float) -> Trajectory:
    """Candidate plus needle: breakpoints of the candidate plus the three
    needle corners; remains admissible because the needle vanishes outside
    its support, which must stay inside the problem interval."""
    p = cand.problem
    check_eps(p, spec, eps)
    c0, c1, c2 = spec.corners(eps)
    if c0 < p.t0 - BREAK_TOL or c2 > p.t1 + BREAK_TOL:
        raise NeedleError(
            f"needle support [{c0}, {c2}] escapes ({p.t0}, {p.t1})")
    if spec.dim != p.dim:
        raise NeedleError(f"xi dimension {spec.dim} != problem dimension {p.dim}")
    split = cand.traj.split_at([c0, c1, c2])
    if spec.side == "right":
        inner = (c0, c1, spec.theta, spec.xi)
        outer = (c1, c2, spec.theta + eps, spec.outer_slope)
    else:
        inner = (c1, c2, spec.theta, spec.xi)
        outer = (c0, c1, spec.theta - eps, spec.outer_slope)
    segments = []
    for seg in split.segments:
        mid = 0.5 * (seg.t_start + seg.t_end)
        exprs_out = seg.value_exprs
        for lo, hi, anchor, slope in (inner, outer):
            if lo - BREAK_TOL < mid < hi + BREAK_TOL and hi - lo > BREAK_TOL:
                exprs_out = tuple(
                    _branch_expr(e, anchor, float(slope[i]))
                    for i, e in enumerate(seg.value_exprs))
                break
        segments.append(Segment(seg.t_start, seg.t_end, exprs_out))
    return Trajectory(segments)


def norms(spec: NeedleSpec, eps: float) -> Tuple[float, float]:
    """(sup |q|, sup |q_dot|) over the whole interval:
    lam*eps*|xi| and max{1, lam/(1-lam)}*|xi| in the Euclidean norm."""
    if eps <= 0 or eps > 1.0:
        raise NeedleError(f"norm estimates assume 0 < eps <= 1, got {eps}")
    xi_norm = float(np.linalg.norm(spec.xi))
    sup_q = spec.lam * eps * xi_norm
    sup_qdot = max(1.0, spec.lam / (1.0 - spec.lam)) * xi_norm
    return sup_q, sup_qdot
