"""Cost increments under needle variations, two independent ways.

delta_S_direct builds the varied trajectory and integrates the Lagrangian
difference with quadrature; it never touches the excess functionals.
expansion_prediction assembles the predicted first and second order
coefficients exclusively from the excess machinery (Q_1, M, and a finite
difference of Q_2 in t); it never integrates the cost.  verify_expansion
runs a geometric eps sweep of the direct increment, fits
c1*eps + c2*eps^2, and compares the fit against the prediction.  Agreement
of the two paths is the point: each would miss a bug in the other.
"""

import math
from dataclasses import dataclass
from typing import Optional

from . import conditions, problem
from .needle import NeedleSpec, check_eps, vary, window_for
from .problem import CandidateExtremal, DelayProblem
from .quadrature import (DEFAULT_SWEEP_LEVELS, DEFAULT_SWEEP_RATIO, EpsSweep,
                         fit_expansion, geometric_sweep)


class IncrementError(ValueError):
    pass


def delta_S_direct(p: DelayProblem, cand: CandidateExtremal, spec: NeedleSpec,
                   eps: float, order: Optional[int] = None) -> float:
    """S(candidate + needle) - S(candidate) by direct quadrature.

    The integrand difference is supported on the needle support [c0, c2]
    (where the state and its slope change) and on its +h shift (where the
    delayed slots change).  eps < h keeps the two regions disjoint, so the
    difference is integrated only there, which avoids cancellation against
    the unperturbed bulk of the cost.
    """
    check_eps(p, spec, eps)
    varied = vary(cand, spec, eps)
    c0, _, c2 = spec.corners(eps)
    corners = spec.corners(eps)
    extra = corners + tuple(c + p.h for c in corners)
    pieces = []
    for lo, hi in ((c0, c2), (c0 + p.h, c2 + p.h)):
        pieces.append(problem.integrate_L(p, varied, lo, hi, extra, order))
        pieces.append(-problem.integrate_L(p, cand.traj, lo, hi, extra, order))
    return math.fsum(pieces)


def expansion_prediction(p: DelayProblem, cand: CandidateExtremal,
                         spec: NeedleSpec) -> tuple:
    """Predicted (c1, c2) of Delta S = c1*eps + c2*eps^2 + o(eps^2).

    c1 is the Q_1 sum at theta.  c2 is +-(1/2) * (lam * M sum + d/dt Q_2 sum),
    with + for right needles and - for left needles: the sweep toward t0
    flips the sign of the whole second-order bracket.  Built entirely from
    the excess functionals; the cost integral is never evaluated here.
    """
    window_for(p, spec)  # validates theta against the side's regime
    theta, side, lam, xi = spec.theta, spec.side, spec.lam, spec.xi
    q1_x, q1_y = conditions.q_k(p, cand, theta, side, lam, xi, 1)
    c1 = q1_x + q1_y
    m_sum = (conditions.m_term(p, cand, theta, side, lam, xi, "x")
             + conditions.m_term(p, cand, theta, side, lam, xi, "y"))
    bracket = lam * m_sum + conditions.q2_sum_slope(p, cand, theta, side, lam, xi)
    half = 0.5 if side == "right" else -0.5
    return c1, half * bracket


@dataclass(frozen=True)
class IncrementRecord:
    """Side-by-side result of the sweep fit and the excess prediction."""

    spec: NeedleSpec
    eps_max: float
    sweep: EpsSweep
    c1_predicted: float
    c2_predicted: float
    c1_fitted: float
    c2_fitted: float
    fit_residual: float
    tolerance: float
    passed: bool


def default_eps_max(p: DelayProblem, spec: NeedleSpec) -> float:
    """A quarter of the validity window, capped at 1/4."""
    return min(window_for(p, spec), 1.0) / 4.0


def verify_expansion(p: DelayProblem, cand: CandidateExtremal,
                     spec: NeedleSpec,
                     eps_max: Optional[float] = None,
                     levels: int = DEFAULT_SWEEP_LEVELS,
                     ratio: float = DEFAULT_SWEEP_RATIO,
                     order: Optional[int] = None,
                     tol: Optional[float] = None) -> IncrementRecord:
    """Fit c1, c2 from a geometric eps sweep of the direct increment and
    compare them with the excess-functional prediction.

    The default tolerance is max(1e-6, 1e-3 * scale) per coefficient, where
    scale is the magnitude of the predicted pair (at least 1)."""
    if eps_max is None:
        eps_max = default_eps_max(p, spec)
    limit = window_for(p, spec)
    if not 0.0 < eps_max < limit:
        raise IncrementError(
            f"eps_max={eps_max} outside the validity window (0, {limit})")
    c1_pred, c2_pred = expansion_prediction(p, cand, spec)
    sweep = geometric_sweep(
        lambda e: delta_S_direct(p, cand, spec, e, order), eps_max,
        levels=levels, ratio=ratio)
    c1_fit, c2_fit, residual = fit_expansion(sweep)
    if tol is None:
        scale = max(abs(c1_pred), abs(c2_pred), 1.0)
        tol = max(1e-6, 1e-3 * scale)
    passed = (abs(c1_fit - c1_pred) <= tol) and (abs(c2_fit - c2_pred) <= tol)
    return IncrementRecord(spec=spec, eps_max=eps_max, sweep=sweep,
                           c1_predicted=c1_pred, c2_predicted=c2_pred,
                           c1_fitted=c1_fit, c2_fitted=c2_fit,
                           fit_residual=residual, tolerance=tol, passed=passed)


@dataclass(frozen=True)
class FirstVariationCheck:
    value: float
    tolerance: float
    passed: bool


def verify_needle_first_variation_zero(
        p: DelayProblem, cand: CandidateExtremal, spec: NeedleSpec,
        eps: float, tol: Optional[float] = None) -> FirstVariationCheck:
    """Check that the first variation along the needle vanishes, as it must
    on an extremal; tolerance scales with the size of the cost."""
    value = conditions.needle_first_variation(p, cand, spec, eps)
    if tol is None:
        tol = 1e-9 * (1.0 + abs(problem.eval_S(p, cand.traj)))
    return FirstVariationCheck(value=value, tolerance=tol,
                               passed=abs(value) <= tol)
