"""First- and second-order condition functionals along a candidate.

Everything here is built from point evaluations of the Lagrangian and its
symbolic partials along the candidate, in the paired form characteristic of
the delayed problem: each quantity at t combines the direct term at t with
the delay-shifted term at t+h, and the shifted term vanishes for t+h > t1
by the extended-zero convention, which collapses the two regimes
(t <= t1-h paired, t > t1-h single-term) into one code path.

The slope-slot perturbation notation: a value "at (t, xi)" evaluates the
functional with xdot(t) replaced by xdot(t)+xi (xdot slot) or with
xdot(t-h) replaced by xdot(t-h)+xi (ydot slot, evaluated at nu = t+h).
"""

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import problem as problem_mod
from . import quadrature
from ._parallel import par_map
from .needle import NeedleSpec, check_eps
from .problem import CandidateExtremal, DelayProblem, along, partials_vec
from .trajectory import BREAK_TOL, Trajectory

DEFAULT_RADII = (0.25, 0.5, 1.0, 2.0)
DEFAULT_LAMBDAS = (0.5, 0.25, 0.75)
# absolute scale floors; both tolerances scale as tol*(1+|L| scale)
DEFAULT_TOL_W = 1e-9
DEFAULT_TOL_DEG = 1e-9

_EULER_FD_STEP = 1e-5


class ConditionsError(ValueError):
    pass


def paired_slope(lam: float, xi: np.ndarray) -> np.ndarray:
    """The needle's second slope (lambda/(lambda-1))*xi."""
    return (lam / (lam - 1.0)) * xi


# ---------------------------------------------------------------------------
# Weierstrass excess and the Q_k / M functionals

class ExcessPoint:
    """Cached base quantities at one (t, side): the argument assignments and
    unperturbed values shared by every xi at this point."""

    __slots__ = ("p", "cand", "t", "side", "nu", "env_t", "env_nu",
                 "L_t", "L_nu", "Ldx_t", "Ldy_nu")

    def __init__(self, p: DelayProblem, cand: CandidateExtremal,
                 t: float, side: str):
        self.p = p
        self.cand = cand
        self.t = float(t)
        self.side = side
        self.nu = self.t + p.h
        self.env_t = along(p, cand, self.t, side)
        self.env_nu = along(p, cand, self.nu, side)
        self.L_t = problem_mod.eval_L_env(p, self.t, self.env_t)
        self.L_nu = problem_mod.eval_L_env(p, self.nu, self.env_nu)
        self.Ldx_t = partials_vec(p, "dx", self.t, self.env_t)
        self.Ldy_nu = partials_vec(p, "dy", self.nu, self.env_nu)

    def _perturbed(self, env: Dict[str, float], block: str,
                   xi: np.ndarray) -> Dict[str, float]:
        out = dict(env)
        for i in range(self.p.dim):
            out[f"{block}{i + 1}"] = env[f"{block}{i + 1}"] + float(xi[i])
        return out

    def e_x(self, xi: np.ndarray) -> float:
        """Excess in the xdot slot at t."""
        if self.t > self.p.t1:
            return 0.0
        env = self._perturbed(self.env_t, "dx", xi)
        L_pert = problem_mod.eval_L_env(self.p, self.t, env)
        return L_pert - self.L_t - float(np.dot(self.Ldx_t, xi))

    def e_y(self, xi: np.ndarray) -> float:
        """Excess in the ydot slot at nu = t+h (0 beyond t1)."""
        if self.nu > self.p.t1:
            return 0.0
        env = self._perturbed(self.env_nu, "dy", xi)
        L_pert = problem_mod.eval_L_env(self.p, self.nu, env)
        return L_pert - self.L_nu - float(np.dot(self.Ldy_nu, xi))

    def e_sum(self, xi: np.ndarray) -> float:
        return self.e_x(xi) + self.e_y(xi)

    def m_x(self, lam: float, xi: np.ndarray) -> float:
        """lam*[Lx(t,xi)-Lx(t)]^T xi + (1-lam)*[Lx(t,pair)-Lx(t)]^T xi."""
        if self.t > self.p.t1:
            return 0.0
        base = partials_vec(self.p, "x", self.t, self.env_t)
        at_xi = partials_vec(self.p, "x", self.t,
                             self._perturbed(self.env_t, "dx", xi))
        pair = paired_slope(lam, xi)
        at_pair = partials_vec(self.p, "x", self.t,
                               self._perturbed(self.env_t, "dx", pair))
        return lam * float(np.dot(at_xi - base, xi)) \
            + (1.0 - lam) * float(np.dot(at_pair - base, xi))

    def m_y(self, lam: float, xi: np.ndarray) -> float:
        """The y analogue at nu = t+h, perturbing the ydot slot."""
        if self.nu > self.p.t1:
            return 0.0
        base = partials_vec(self.p, "y", self.nu, self.env_nu)
        at_xi = partials_vec(self.p, "y", self.nu,
                             self._perturbed(self.env_nu, "dy", xi))
        pair = paired_slope(lam, xi)
        at_pair = partials_vec(self.p, "y", self.nu,
                               self._perturbed(self.env_nu, "dy", pair))
        return lam * float(np.dot(at_xi - base, xi)) \
            + (1.0 - lam) * float(np.dot(at_pair - base, xi))


def excess_E(p: DelayProblem, cand: CandidateExtremal, t: float, side: str,
             xi: np.ndarray, slot: str) -> float:
    """Weierstrass excess in one slope slot.

    slot="xdot": L(t, ..., xdot+xi, ...) - L(t) - Ldx(t)^T xi.
    slot="ydot": the same at nu = t+h in the delayed slot; 0 for nu > t1.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    pt = ExcessPoint(p, cand, t, side)
    if slot == "xdot":
        return pt.e_x(xi)
    if slot == "ydot":
        return pt.e_y(xi)
    raise ConditionsError(f"slot must be 'xdot' or 'ydot', got {slot!r}")


def q_k(p: DelayProblem, cand: CandidateExtremal, t: float, side: str,
        lam: float, xi: np.ndarray, k: int) -> Tuple[float, float]:
    """Q_k pair: lam^k * E(xi) + (1-lam^k) * E(pair) in each slot."""
    if k not in (1, 2):
        raise ConditionsError(f"k must be 1 or 2, got {k}")
    if not 0.0 < lam < 1.0:
        raise ConditionsError(f"lambda must be in (0,1), got {lam}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    pt = ExcessPoint(p, cand, t, side)
    pair = paired_slope(lam, xi)
    w = lam ** k
    q_x = w * pt.e_x(xi) + (1.0 - w) * pt.e_x(pair)
    q_y = w * pt.e_y(xi) + (1.0 - w) * pt.e_y(pair)
    return q_x, q_y


def m_term(p: DelayProblem, cand: CandidateExtremal, t: float, side: str,
           lam: float, xi: np.ndarray, slot: str) -> float:
    """M functional in one slot, literally: both slope-perturbed gradient
    differences are contracted with xi."""
    if not 0.0 < lam < 1.0:
        raise ConditionsError(f"lambda must be in (0,1), got {lam}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    pt = ExcessPoint(p, cand, t, side)
    if slot == "x":
        return pt.m_x(lam, xi)
    if slot == "y":
        return pt.m_y(lam, xi)
    raise ConditionsError(f"slot must be 'x' or 'y', got {slot!r}")


# ---------------------------------------------------------------------------
# first variation and the Euler residual

def _force_momentum(p: DelayProblem, cand: CandidateExtremal, t: float,
                    side: str) -> Tuple[np.ndarray, np.ndarray]:
    """(Lx(t)+Ly(t+h), Ldx(t)+Ldy(t+h)) along the candidate."""
    env_t = along(p, cand, t, side)
    env_th = along(p, cand, t + p.h, side)
    force = partials_vec(p, "x", t, env_t) + partials_vec(p, "y", t + p.h, env_th)
    rho = partials_vec(p, "dx", t, env_t) + partials_vec(p, "dy", t + p.h, env_th)
    return force, rho


def _variation_breaks(p: DelayProblem, *trajs: Trajectory) -> List[float]:
    pts = {p.t1 - p.h}
    for traj in trajs:
        for bp in (traj.a,) + traj.breakpoints + (traj.b,):
            pts.update((bp, bp - p.h, bp + p.h))
    return [x for x in pts if p.t0 < x < p.t1]


def first_variation(p: DelayProblem, cand: CandidateExtremal,
                    delta: Trajectory) -> float:
    """Integral of [Lx(t)+Ly(t+h)]^T dx(t) + [Ldx(t)+Ldy(t+h)]^T dxdot(t)
    over [t0, t1] for an admissible variation dx (zero history, zero at t1)."""
    if delta.a > p.t0 + BREAK_TOL or delta.b < p.t1 - BREAK_TOL:
        raise ConditionsError(
            f"variation domain [{delta.a}, {delta.b}] must cover [{p.t0}, {p.t1}]")
    for t_chk in np.linspace(max(delta.a, p.t0 - p.h), p.t0, 5):
        if t_chk < delta.a - BREAK_TOL:
            continue
        if float(np.max(np.abs(delta.value(float(t_chk))))) > 1e-9:
            raise ConditionsError(
                f"variation must vanish on the history interval; "
                f"nonzero at t={float(t_chk)}")
    if float(np.max(np.abs(delta.value(p.t1)))) > 1e-9:
        raise ConditionsError("variation must vanish at t1")

    def g(ts: np.ndarray) -> np.ndarray:
        out = np.empty_like(ts)
        for j, t in enumerate(ts):
            t = float(t)
            force, rho = _force_momentum(p, cand, t, "right")
            out[j] = float(np.dot(force, delta.value(t))
                           + np.dot(rho, delta.deriv(t, "right")))
        return out

    breaks = _variation_breaks(p, cand.traj, delta)
    return quadrature.integrate(g, p.t0, p.t1, breaks)


def needle_first_variation(p: DelayProblem, cand: CandidateExtremal,
                           spec: NeedleSpec, eps: float) -> float:
    """First variation evaluated on a needle, in the displayed two-branch
    form: the inner branch weights the force term by (t - theta) and the
    outer branch by (t - support edge), scaled by lambda/(lambda-1).
    Zero (within quadrature tolerance) when the candidate is an extremal."""
    check_eps(p, spec, eps)
    xi = spec.xi
    c0, c1, c2 = spec.corners(eps)
    if spec.side == "right":
        inner_lo, inner_hi, inner_anchor = c0, c1, spec.theta
        outer_lo, outer_hi, outer_anchor = c1, c2, spec.theta + eps
    else:
        inner_lo, inner_hi, inner_anchor = c1, c2, spec.theta
        outer_lo, outer_hi, outer_anchor = c0, c1, spec.theta - eps

    def branch(anchor: float) -> Callable[[np.ndarray], np.ndarray]:
        def g(ts: np.ndarray) -> np.ndarray:
            out = np.empty_like(ts)
            for j, t in enumerate(ts):
                t = float(t)
                force, rho = _force_momentum(p, cand, t, "right")
                out[j] = float(np.dot(force, xi) * (t - anchor) + np.dot(rho, xi))
            return out
        return g

    breaks = _variation_breaks(p, cand.traj)
    inner = quadrature.integrate(branch(inner_anchor), inner_lo, inner_hi, breaks)
    outer = quadrature.integrate(branch(outer_anchor), outer_lo, outer_hi, breaks)
    return inner + (spec.lam / (spec.lam - 1.0)) * outer


def momentum_kinks(p: DelayProblem, cand: CandidateExtremal) -> List[float]:
    """Points where the combined momentum map t -> Ldx(t)+Ldy(t+h) may kink:
    candidate breakpoints, their +-h shifts, and the regime switch t1-h."""
    pts = {p.t0, p.t1, p.t1 - p.h}
    for bp in cand.traj.breakpoints:
        pts.update((bp, bp - p.h, bp + p.h))
    return sorted(x for x in pts if p.t0 - BREAK_TOL <= x <= p.t1 + BREAK_TOL)


def euler_residual(p: DelayProblem, cand: CandidateExtremal, t: float,
                   side: str = "right") -> np.ndarray:
    """d/dt[Ldx(t)+Ldy(t+h)] - [Lx(t)+Ly(t+h)] with the time derivative by
    one-sided 3-point FD of the momentum map, stencil kept inside the smooth
    piece around t.  The extended-zero convention supplies the single-term
    regime on (t1-h, t1] with the same formula."""
    if side not in ("left", "right"):
        raise ConditionsError(f"side must be 'left' or 'right', got {side!r}")
    kinks = momentum_kinks(p, cand)
    lo, hi = p.t0, p.t1
    for k in kinks:
        if k < t - BREAK_TOL:
            lo = max(lo, k)
        elif k > t + BREAK_TOL:
            hi = min(hi, k)
    available = (hi - t) if side == "right" else (t - lo)
    if available <= 1e-13:
        raise ConditionsError(
            f"no room for the FD stencil at t={t} from the {side}")
    s = min(_EULER_FD_STEP * (1.0 + abs(t)), available / 2.0)

    def rho(u: float) -> np.ndarray:
        return _force_momentum(p, cand, u, side)[1]

    if side == "right":
        drho = (-3.0 * rho(t) + 4.0 * rho(t + s) - rho(t + 2.0 * s)) / (2.0 * s)
    else:
        drho = (3.0 * rho(t) - 4.0 * rho(t - s) + rho(t - 2.0 * s)) / (2.0 * s)
    force = _force_momentum(p, cand, t, side)[0]
    return drho - force


def _one_sided_t_slope(p: DelayProblem, cand: CandidateExtremal, theta: float,
                       side: str, f: Callable[[float], float]) -> float:
    """One-sided 3-point FD in t of a scalar map along the candidate,
    stepping into the given side and staying inside the smooth piece
    bounded by the nearest momentum kink."""
    if side not in ("left", "right"):
        raise ConditionsError(f"side must be 'left' or 'right', got {side!r}")
    kinks = momentum_kinks(p, cand)
    if side == "right":
        ahead = [k for k in kinks if k > theta + BREAK_TOL]
        available = (min(ahead) if ahead else p.t1) - theta
        sign = 1.0
    else:
        behind = [k for k in kinks if k < theta - BREAK_TOL]
        available = theta - (max(behind) if behind else p.t0)
        sign = -1.0
    s = min(1e-4, available / 8.0)
    if s <= 1e-13:
        raise ConditionsError(
            f"no smooth piece on the {side} of t={theta} wide enough "
            f"for the FD stencil")
    f0 = f(theta)
    f1 = f(theta + sign * s)
    f2 = f(theta + sign * 2.0 * s)
    return sign * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * s)


def q2_sum_slope(p: DelayProblem, cand: CandidateExtremal, theta: float,
                 side: str, lam: float, xi: np.ndarray) -> float:
    """One-sided d/dt at theta of the Q_2 sum map t -> Q_2_x(t) + Q_2_y(t)."""
    def f(t: float) -> float:
        q2_x, q2_y = q_k(p, cand, t, side, lam, xi, 2)
        return q2_x + q2_y
    return _one_sided_t_slope(p, cand, theta, side, f)


def e_sum_slope(p: DelayProblem, cand: CandidateExtremal, theta: float,
                side: str, xi: np.ndarray) -> float:
    """One-sided d/dt at theta of the excess sum map t -> E_x(t) + E_y(t)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))

    def f(t: float) -> float:
        return ExcessPoint(p, cand, t, side).e_sum(xi)
    return _one_sided_t_slope(p, cand, theta, side, f)


# ---------------------------------------------------------------------------
# direction sampling and the Weierstrass scan

def direction_set(dim: int, seed: int = 0) -> List[np.ndarray]:
    """Deterministic low-discrepancy unit directions: +-1 for dim 1, evenly
    spaced angles for dim 2, a Fibonacci sphere for dim 3, and a Kronecker
    sequence pushed through the normal quantile for higher dimensions."""
    if dim == 1:
        return [np.array([1.0]), np.array([-1.0])]
    count = 64 if dim <= 3 else 32 * dim
    if dim == 2:
        angles = [2.0 * math.pi * k / count for k in range(count)]
        return [np.array([math.cos(a), math.sin(a)]) for a in angles]
    if dim == 3:
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        out = []
        for k in range(count):
            z = 1.0 - (2.0 * k + 1.0) / count
            r = math.sqrt(max(0.0, 1.0 - z * z))
            a = 2.0 * math.pi * k / golden
            out.append(np.array([r * math.cos(a), r * math.sin(a), z]))
        return out
    nd = NormalDist()
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53]
    alphas = [math.sqrt(q) % 1.0 for q in primes[:dim]]
    out = []
    for k in range(count):
        u = [((k + 1 + seed) * a) % 1.0 for a in alphas]
        g = np.array([nd.inv_cdf(min(max(v, 1e-12), 1.0 - 1e-12)) for v in u])
        length = float(np.linalg.norm(g))
        out.append(g / (length if length > 0 else 1.0))
    return out


def xi_sample_set(dim: int, radii: Sequence[float] = DEFAULT_RADII,
                  seed: int = 0) -> List[np.ndarray]:
    """Directions crossed with radii; the radius sweep catches excess
    functions that are not homogeneous in xi."""
    dirs = direction_set(dim, seed)
    return [r * d for r in radii for d in dirs]


@dataclass(frozen=True)
class ScanEntry:
    t: float
    side: str
    regime: str  # "paired" for t <= t1-h, "single" beyond
    min_excess: float
    min_excess_unit: float
    violation: bool
    degenerate_directions: Tuple[Tuple[float, ...], ...]


@dataclass(frozen=True)
class WeierstrassScanReport:
    entries: Tuple[ScanEntry, ...]
    tol_w: float
    tol_deg: float
    overall_min: float
    has_violation: bool

    def violations(self) -> List[ScanEntry]:
        return [e for e in self.entries if e.violation]


def lagrangian_scale(p: DelayProblem, cand: CandidateExtremal,
                     samples: int = 16) -> float:
    """Coarse |L| scale along the candidate, used to scale tolerances."""
    ts = np.linspace(p.t0, p.t1, samples)
    vals = []
    for t in ts:
        env = along(p, cand, float(t), "right" if t < p.t1 else "left")
        vals.append(abs(problem_mod.eval_L_env(p, float(t), env)))
        vals.append(abs(problem_mod.eval_L_env(
            p, float(t), {**env, **{f"dx{i+1}": env[f"dx{i+1}"] + 1.0
                                    for i in range(p.dim)}})))
    return max(vals) if vals else 0.0


def weierstrass_scan(p: DelayProblem, cand: CandidateExtremal,
                     t_grid: Optional[Sequence[float]] = None,
                     xi_samples: Optional[Sequence[np.ndarray]] = None,
                     tol_w: Optional[float] = None,
                     tol_deg: Optional[float] = None) -> WeierstrassScanReport:
    """Minimum of the paired excess over the sample set at every grid point,
    both sides at candidate breakpoints; flags violations below -tol_w and
    records directions with |E_sum| <= tol_deg."""
    if t_grid is None:
        t_grid = np.linspace(p.t0, p.t1, 200)
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise ConditionsError("empty scan grid")
    if xi_samples is None:
        xi_samples = xi_sample_set(p.dim)
    xi_samples = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xi_samples]
    if not xi_samples:
        raise ConditionsError("empty xi sample set")
    for x in xi_samples:
        if float(np.max(np.abs(x))) == 0.0:
            raise ConditionsError("xi samples must exclude 0")
    scale = lagrangian_scale(p, cand)
    tw = DEFAULT_TOL_W * (1.0 + scale) if tol_w is None else tol_w
    td = DEFAULT_TOL_DEG * (1.0 + scale) if tol_deg is None else tol_deg

    bps = set(cand.traj.breakpoints)
    tasks = []
    for t in t_grid:
        at_bp = any(abs(t - b) <= BREAK_TOL for b in bps)
        if abs(t - p.t0) <= BREAK_TOL:
            sides = ("right",)
        elif abs(t - p.t1) <= BREAK_TOL:
            sides = ("left",)
        elif at_bp:
            sides = ("right", "left")
        else:
            sides = ("right",)
        for side in sides:
            tasks.append((t, side))

    def run(task: Tuple[float, str]) -> ScanEntry:
        t, side = task
        pt = ExcessPoint(p, cand, t, side)
        vals = [pt.e_sum(x) for x in xi_samples]
        unit_vals = [v for v, x in zip(vals, xi_samples)
                     if abs(float(np.linalg.norm(x)) - 1.0) <= 1e-12]
        degen = tuple(tuple(float(c) for c in x)
                      for v, x in zip(vals, xi_samples) if abs(v) <= td)
        min_all = min(vals)
        return ScanEntry(
            t=t, side=side,
            regime="paired" if t <= p.t1 - p.h + BREAK_TOL else "single",
            min_excess=min_all,
            min_excess_unit=min(unit_vals) if unit_vals else min_all,
            violation=min_all < -tw,
            degenerate_directions=degen)

    entries = tuple(par_map(run, tasks))
    overall = min(e.min_excess for e in entries)
    return WeierstrassScanReport(
        entries=entries, tol_w=tw, tol_deg=td, overall_min=overall,
        has_violation=any(e.violation for e in entries))
