"""Degeneracy findings, the numbered condition checks, and the pipeline."""

import numpy as np
import pytest

from needlecheck.analysis import (
    DEFAULT_SCALES,
    AnalysisError,
    AnalysisSettings,
    DegeneracyFinding,
    detect_degeneracy,
    euler_stage,
    full_report,
    remark_6_1_equivalence,
    theorem_5_1_check,
    theorem_6_1_check,
    theorem_6_2_check,
)
from needlecheck.conditions import ExcessPoint, paired_slope

from conftest import SAMPLE_L, make_candidate, make_problem

# E = xi^2 (xi^2 - 1)^2 along zero: degenerate only at |xi| = 1, which pins
# lam to 1/2; the M sum is -1 there, and the degeneracy does not survive
# scaling eta below 1.
QUARTIC_WELL_L = "dx1^6 - 2*dx1^4 + dx1^2 - x1*dx1^2"


@pytest.fixture(scope="module")
def quartic_well():
    p = make_problem(QUARTIC_WELL_L)
    return p, make_candidate(p)


def _cert(pt, eta, lam, tol):
    e1 = abs(pt.e_sum(np.atleast_1d(eta)))
    e2 = abs(pt.e_sum(paired_slope(lam, np.atleast_1d(eta))))
    return e1 <= tol and e2 <= tol


# -- detect_degeneracy ------------------------------------------------------

def test_detect_interval_on_sample(sample_problem, sample_cand):
    findings = detect_degeneracy(sample_problem, sample_cand,
                                 t_grid=np.linspace(0.0, 2.0, 21))
    assert len(findings) == 1
    f = findings[0]
    assert f.kind == "interval"
    assert f.side == "both"
    assert f.t_lo == pytest.approx(0.0) and f.t_hi == pytest.approx(2.0)
    assert f.midpoint == pytest.approx(1.0)
    # two directions x three lambdas all certify the same extent
    assert len(f.certified_pairs) == 6
    lams = sorted(set(l for _, l in f.certified_pairs))
    assert lams == [0.25, 0.5, 0.75]
    assert max(f.evidence) <= f.tol_deg
    with pytest.raises(AnalysisError):
        f.theta  # interval findings have no single theta


def test_detect_nothing_on_strictly_convex():
    p = make_problem("dx1^2 + dy1^2")
    cand = make_candidate(p)
    assert detect_degeneracy(p, cand, t_grid=np.linspace(0.0, 2.0, 21)) == []


def test_detect_interior_point_finding():
    # excess sum (t-1)^2 xi^2 vanishes at t = 1 only
    p = make_problem("(t - 1)^2*dx1^2")
    cand = make_candidate(p)
    findings = detect_degeneracy(p, cand, t_grid=np.linspace(0.0, 2.0, 21))
    assert len(findings) == 1
    f = findings[0]
    assert f.kind == "point"
    assert f.theta == pytest.approx(1.0)
    assert f.side == "both"


def test_detect_edge_point_finding():
    # excess sum t*xi^2 vanishes at t = 0 only; only the right side exists
    p = make_problem("t*dx1^2")
    cand = make_candidate(p)
    findings = detect_degeneracy(p, cand, t_grid=np.linspace(0.0, 2.0, 21))
    assert len(findings) == 1
    assert findings[0].kind == "point"
    assert findings[0].theta == pytest.approx(0.0)
    assert findings[0].side == "right"


def test_detect_validates_inputs(sample_problem, sample_cand):
    p, cand = sample_problem, sample_cand
    with pytest.raises(AnalysisError, match="empty"):
        detect_degeneracy(p, cand, t_grid=[])
    with pytest.raises(AnalysisError, match="escapes"):
        detect_degeneracy(p, cand, t_grid=[5.0])
    with pytest.raises(AnalysisError, match="lambda"):
        detect_degeneracy(p, cand, t_grid=[1.0], lam_grid=[1.5])
    with pytest.raises(AnalysisError, match="nonzero"):
        detect_degeneracy(p, cand, t_grid=[1.0],
                          direction_samples=[np.array([0.0])])


def test_certification_closed_under_pairing(quartic_well):
    # if (eta, lam) certifies then so does (paired eta, 1 - lam); the
    # pairing map is an involution across the lambda complement
    p, cand = quartic_well
    pt = ExcessPoint(p, cand, 1.0, "right")
    tol = 1e-9
    cases = [(1.0, 0.5), (-1.0, 0.5), (1.0, 0.25), (0.7, 0.5), (1.0, 0.75)]
    seen_true = seen_false = False
    for eta, lam in cases:
        a = _cert(pt, eta, lam, tol)
        partner = float(paired_slope(lam, np.array([eta]))[0])
        b = _cert(pt, partner, 1.0 - lam, tol)
        assert a == b, (eta, lam)
        seen_true |= a
        seen_false |= not a
    assert seen_true and seen_false  # the fixture exercises both outcomes
    back = paired_slope(0.75, paired_slope(0.25, np.array([2.0])))
    np.testing.assert_allclose(back, [2.0], atol=1e-15)


# -- interval conditions ----------------------------------------------------

def test_interval_check_on_sample(sample_problem, sample_cand):
    finding = detect_degeneracy(sample_problem, sample_cand,
                                t_grid=np.linspace(0.0, 2.0, 21))[0]
    v1, v2 = theorem_5_1_check(sample_problem, sample_cand, finding)
    assert v1.theorem == "5.1(i)" and v2.theorem == "5.1(ii)"
    assert v1.conclusion == "FAILS_STRONG"
    assert v1.value == pytest.approx(-2.0, abs=1e-9)
    assert v1.tolerance == pytest.approx(3e-7, rel=1e-6)
    assert v1.location == (finding.t_lo, finding.t_hi)
    assert v2.conclusion == "FAILS_WEAK"
    assert v2.value == pytest.approx(-2.0 * 0.125 ** 3, abs=1e-9)
    assert v2.note == "equality fails at every tested scale"


def test_interval_check_consistent_case():
    # L = x1 + y1 + dx1*dy1 has identically zero excess and zero M sums
    p = make_problem("x1 + y1 + dx1*dy1")
    cand = make_candidate(p)
    finding = DegeneracyFinding(
        kind="interval", t_lo=0.3, t_hi=1.7, side="both",
        direction=np.array([1.0]), lam=0.5, evidence=(0.0, 0.0),
        tol_deg=1e-9, certified_pairs=(((1.0,), 0.5),))
    v1, v2 = theorem_5_1_check(p, cand, finding)
    assert v1.conclusion == "CONSISTENT"
    assert v2.conclusion == "CONSISTENT"
    assert "holds at scale" in v2.note


def test_interval_check_small_ball_escape(quartic_well):
    # degeneracy needs |eta| = 1 exactly, so scaled directions decertify
    p, cand = quartic_well
    finding = DegeneracyFinding(
        kind="interval", t_lo=0.2, t_hi=1.8, side="both",
        direction=np.array([1.0]), lam=0.5, evidence=(0.0, 0.0),
        tol_deg=1e-9, certified_pairs=(((1.0,), 0.5),))
    v1, v2 = theorem_5_1_check(p, cand, finding)
    assert v1.conclusion == "FAILS_STRONG"
    assert v1.value == pytest.approx(-1.0, abs=1e-9)
    assert v2.conclusion == "CONSISTENT"
    assert "not certified in small ball" in v2.note
    assert "0.5" in v2.note


def test_interval_check_rejects_corrupted_finding(sample_problem, sample_cand):
    fake = DegeneracyFinding(
        kind="interval", t_lo=2.2, t_hi=2.8, side="both",
        direction=np.array([1.0]), lam=0.5, evidence=(0.0, 0.0),
        tol_deg=1e-9, certified_pairs=())
    with pytest.raises(AnalysisError, match="not degenerate"):
        theorem_5_1_check(sample_problem, sample_cand, fake)
    point = DegeneracyFinding(
        kind="point", t_lo=1.0, t_hi=1.0, side="both",
        direction=np.array([1.0]), lam=0.5, evidence=(0.0, 0.0), tol_deg=1e-9)
    with pytest.raises(AnalysisError, match="interval"):
        theorem_5_1_check(sample_problem, sample_cand, point)


# -- point conditions -------------------------------------------------------

def test_point_check_two_sided(sample_problem, sample_cand):
    v = theorem_6_1_check(sample_problem, sample_cand, 1.0, "both", 0.5,
                          np.array([1.0]))
    assert v.theorem == "6.1(ii)"
    assert v.conclusion == "FAILS_STRONG"
    assert v.value == pytest.approx(-2.0, abs=1e-9)
    assert v.note == ""


def test_point_check_one_sided_consistency(sample_problem, sample_cand):
    # the one-sided brackets agree at a smooth interior point, so at most
    # one of the two inequalities can fail
    vr = theorem_6_1_check(sample_problem, sample_cand, 1.0, "right", 0.5,
                           np.array([1.0]))
    vl = theorem_6_1_check(sample_problem, sample_cand, 1.0, "left", 0.5,
                           np.array([1.0]))
    assert vr.theorem == "6.1(i)" and vl.theorem == "6.1(i)"
    assert vr.value == pytest.approx(vl.value, abs=1e-7)
    assert vr.value == pytest.approx(-1.0, abs=1e-7)  # 0.5*(-2) + 0
    assert vr.conclusion == "FAILS_STRONG"  # >= 0 required from the right
    assert vl.conclusion == "CONSISTENT"    # <= 0 required from the left


def test_point_check_argument_validation(sample_problem, sample_cand):
    p, cand = sample_problem, sample_cand
    with pytest.raises(AnalysisError, match="side"):
        theorem_6_1_check(p, cand, 1.0, "up", 0.5, np.array([1.0]))
    with pytest.raises(AnalysisError, match="nonzero"):
        theorem_6_1_check(p, cand, 1.0, "both", 0.5, np.array([0.0]))
    with pytest.raises(AnalysisError, match="lambda"):
        theorem_6_1_check(p, cand, 1.0, "both", 1.2, np.array([1.0]))
    with pytest.raises(AnalysisError, match="admissible"):
        theorem_6_1_check(p, cand, 0.0, "left", 0.5, np.array([1.0]))
    # not degenerate in the tail: certification is a precondition
    with pytest.raises(AnalysisError, match="not certified"):
        theorem_6_1_check(p, cand, 2.5, "right", 0.5, np.array([1.0]))


def test_small_ball_check_fails_weak(sample_problem, sample_cand):
    v = theorem_6_2_check(sample_problem, sample_cand, 1.0, "both", 0.5,
                          np.array([1.0]))
    assert v.theorem == "6.2(ii)"
    assert v.conclusion == "FAILS_WEAK"
    assert v.value == pytest.approx(-2.0 * 0.125 ** 3, abs=1e-9)
    assert v.note == ("scale 1: violated; scale 0.5: violated; "
                      "scale 0.25: violated; scale 0.125: violated")


def test_small_ball_check_decertifies(quartic_well):
    p, cand = quartic_well
    v = theorem_6_2_check(p, cand, 1.0, "both", 0.5, np.array([1.0]),
                          scales=(1.0, 0.5))
    assert v.theorem == "6.2(ii)"
    assert v.conclusion == "CONSISTENT"
    assert v.note.startswith("degeneracy not certified in small ball")
    assert "scale 1: violated" in v.note
    assert "scale 0.5: not certified" in v.note
    # the pointwise check still fails at the unscaled direction
    v61 = theorem_6_1_check(p, cand, 1.0, "both", 0.5, np.array([1.0]))
    assert v61.conclusion == "FAILS_STRONG"
    assert v61.value == pytest.approx(-1.0, abs=1e-9)


def test_small_ball_check_one_sided_label(sample_problem, sample_cand):
    v = theorem_6_2_check(sample_problem, sample_cand, 1.0, "right", 0.5,
                          np.array([1.0]), scales=(1.0, 0.5))
    assert v.theorem == "6.2(i)"
    assert v.conclusion == "FAILS_WEAK"


def test_small_ball_check_requires_scales(sample_problem, sample_cand):
    with pytest.raises(AnalysisError, match="nonempty"):
        theorem_6_2_check(sample_problem, sample_cand, 1.0, "both", 0.5,
                          np.array([1.0]), scales=())
    with pytest.raises(AnalysisError, match="positive"):
        theorem_6_2_check(sample_problem, sample_cand, 1.0, "both", 0.5,
                          np.array([1.0]), scales=(1.0, -0.5))


def test_tail_note_present():
    # the zero Lagrangian stays degenerate in the tail, where the checks
    # annotate that the delayed slot has been zeroed out
    p = make_problem("0")
    cand = make_candidate(p)
    v61 = theorem_6_1_check(p, cand, 2.5, "right", 0.5, np.array([1.0]))
    assert v61.conclusion == "CONSISTENT"
    assert v61.note == "tail regime: delayed-slot contributions vanish beyond t1"
    v62 = theorem_6_2_check(p, cand, 2.5, "right", 0.5, np.array([1.0]),
                            scales=(1.0,))
    assert v62.conclusion == "CONSISTENT"
    assert v62.note.endswith(
        "tail regime: delayed-slot contributions vanish beyond t1")
    interior = theorem_6_1_check(p, cand, 1.0, "right", 0.5, np.array([1.0]))
    assert interior.note == ""


# -- equivalence ------------------------------------------------------------

def test_equivalence_co_occurs_on_degenerate_stretch(sample_problem, sample_cand):
    rec = remark_6_1_equivalence(sample_problem, sample_cand, 1.0, "right",
                                 0.5, np.array([1.0]))
    assert rec.zero_q1 and rec.zero_e and rec.passed
    assert rec.q1_sum == pytest.approx(0.0, abs=rec.tol_deg)


def test_equivalence_co_fails_in_tail(sample_problem, sample_cand):
    rec = remark_6_1_equivalence(sample_problem, sample_cand, 2.5, "right",
                                 0.5, np.array([1.0]))
    assert not rec.zero_q1 and not rec.zero_e and rec.passed
    assert rec.q1_sum == pytest.approx(1.0, abs=1e-9)


def test_equivalence_preconditions(sample_problem, sample_cand):
    with pytest.raises(AnalysisError, match="nonzero"):
        remark_6_1_equivalence(sample_problem, sample_cand, 1.0, "right",
                               0.5, np.array([0.0]))
    p = make_problem("-dx1^2")
    cand = make_candidate(p)
    with pytest.raises(AnalysisError, match="excess condition"):
        remark_6_1_equivalence(p, cand, 1.0, "right", 0.5, np.array([1.0]))


# -- the pipeline -----------------------------------------------------------

def test_euler_stage_on_sample(sample_problem, sample_cand):
    stage = euler_stage(sample_problem, sample_cand, AnalysisSettings())
    assert stage.grid_size == 100
    assert stage.extremal
    assert stage.max_residual <= 1e-8


def test_settings_defaults():
    s = AnalysisSettings()
    assert s.euler_grid == 100
    assert s.scan_grid == 200
    assert s.degeneracy_grid == 200
    assert s.interval_points == 50
    assert s.scales == DEFAULT_SCALES
    assert s.sweep_levels == 8 and s.sweep_ratio == 0.5


def test_full_report_on_sample(sample_problem, sample_cand):
    report = full_report(sample_problem, sample_cand)
    assert report.overall == "FAILS_WEAK"
    assert report.euler.extremal
    assert not report.weierstrass.has_violation
    assert len(report.findings) == 1
    f = report.findings[0]
    assert (f.kind, f.t_lo, f.t_hi) == ("interval", 0.0, 2.0)
    labels = [v.theorem for v in report.verdicts]
    assert labels == ["5.1(i)", "5.1(ii)", "6.1(ii)", "6.2(ii)"]
    conclusions = {v.theorem: v.conclusion for v in report.verdicts}
    assert conclusions == {"5.1(i)": "FAILS_STRONG", "5.1(ii)": "FAILS_WEAK",
                           "6.1(ii)": "FAILS_STRONG", "6.2(ii)": "FAILS_WEAK"}
    assert len(report.expansion_checks) == 2
    assert all(r.passed for r in report.expansion_checks)
    assert report.stage_errors == ()


def test_full_report_stops_on_non_extremal():
    p = make_problem(SAMPLE_L)
    cand = make_candidate(p, ["0.1*t*(3 - t)"])
    report = full_report(p, cand)
    assert report.overall == "NOT_EXTREMAL"
    assert report.weierstrass is None
    assert report.findings == () and report.verdicts == ()
    assert any("not an extremal" in n for n in report.notes)


def test_full_report_flags_excess_violation():
    p = make_problem("-dx1^2")
    cand = make_candidate(p)
    report = full_report(p, cand)
    assert report.overall == "FAILS_STRONG"
    assert report.weierstrass.has_violation
    assert report.findings == ()  # degeneracy machinery skipped
    assert any("excess condition violated" in n for n in report.notes)


def test_full_report_consistent_candidate():
    p = make_problem("dx1^2 + dy1^2")
    cand = make_candidate(p)
    report = full_report(p, cand)
    assert report.overall == "CONSISTENT"
    assert report.findings == () and report.verdicts == ()
    assert all(r.passed for r in report.expansion_checks)


def test_full_report_quartic_well(quartic_well):
    p, cand = quartic_well
    report = full_report(p, cand)
    assert report.overall == "FAILS_STRONG"  # strong fails, weak survives
    conclusions = {v.theorem: v.conclusion for v in report.verdicts}
    assert conclusions["5.1(i)"] == "FAILS_STRONG"
    assert conclusions["5.1(ii)"] == "CONSISTENT"
    assert conclusions["6.2(ii)"] == "CONSISTENT"
    ball_notes = [v.note for v in report.verdicts
                  if "not certified in small ball" in v.note]
    assert len(ball_notes) >= 2


def test_full_report_deterministic(sample_problem, sample_cand):
    a = full_report(sample_problem, sample_cand)
    b = full_report(sample_problem, sample_cand)
    assert [(v.theorem, v.conclusion, v.value, v.tolerance, v.note)
            for v in a.verdicts] == \
        [(v.theorem, v.conclusion, v.value, v.tolerance, v.note)
         for v in b.verdicts]
    assert a.weierstrass.overall_min == b.weierstrass.overall_min
    assert [(f.t_lo, f.t_hi) for f in a.findings] == \
        [(f.t_lo, f.t_hi) for f in b.findings]
