import math

import numpy as np
import pytest
from hypothesis import given, settings, assume, strategies as st
from scipy.integrate import solve_ivp

from doublehopf import AmplitudeSystem, reduce, classify, region_of, amplitude_flow
from doublehopf.errors import NumericalDegeneracy
from doublehopf.unfolding import (CASE_TABLE, REGION_NOTES, DegenerateUnfolding, critical_lines,
                                  sign_pattern, bifurcation_lines, slope_in_parameters,
                                  lines_to_csv, gnuplot_script)


def make(b0, c0, d0, eps1=1, c_matrix=None):
    return AmplitudeSystem(eps1, 1, b0, c0, d0, np.eye(2) if c_matrix is None else c_matrix)


def test_table_has_twelve_cases_with_consistent_signs():
    assert len(set(CASE_TABLE.values())) == 12
    for (d0, b0, c0, disc), label in CASE_TABLE.items():
        # the sign of d0 - b0 c0 is forced whenever d0 and b0 c0 disagree
        if d0 * b0 * c0 < 0:
            assert disc == d0


@pytest.mark.parametrize("signs,label", list(CASE_TABLE.items()))
def test_every_case_is_reachable(signs, label):
    d0, b0, c0, disc = signs
    size = 3.0 if d0 * disc < 0 else 0.5
    amp = make(b0 * size, c0 * size, d0)
    assert sign_pattern(amp) == signs
    assert classify(amp).label == label


def test_unreachable_sign_pattern_is_degenerate():
    with pytest.raises(DegenerateUnfolding):
        classify(make(1.0, 0.0, 1))


def test_reduce_from_coefficients():
    coeffs = dict(B11=1 + 1j, B21=2j, B13=-1.0, B23=0.5, B2100=-2 + 1j, B1011=3.0,
                  B0021=-1.5 + 0j, B1110=4.0)
    amp = reduce(coeffs)
    assert (amp.eps1, amp.eps2, amp.d0) == (-1, -1, 1)
    assert amp.b0 == pytest.approx(3.0 / -1.5)
    assert amp.c0 == pytest.approx(4.0 / -2.0)
    assert np.allclose(amp.c_matrix, -np.array([[1.0, 0.0], [-1.0, 0.5]]))
    with pytest.raises(DegenerateUnfolding):
        reduce({**coeffs, "B2100": 1e-14 + 1j})


coef = st.floats(-4, 4).filter(lambda v: abs(v) > 0.05)


@settings(max_examples=60, deadline=None)
@given(coef, coef, st.sampled_from([-1, 1]), st.sampled_from([-1, 1]))
def test_secondary_lines_pass_through_branch_meetings(b0, c0, d0, eps1):
    assume(abs(d0 - b0 * c0) > 0.05)
    amp = make(b0, c0, d0, eps1)
    for ln in critical_lines(amp):
        if not ln.exact or ln.name in ("c1+", "c1-", "c2+", "c2-"):
            continue
        c1, c2 = ln.direction
        s1, s2 = np.linalg.solve([[1, b0], [c0, d0]], [-c1, -c2])
        # on a secondary line the mixed branch has one vanishing amplitude
        assert min(abs(s1), abs(s2)) < 1e-12
        assert max(s1, s2) > 0


@settings(max_examples=60, deadline=None)
@given(coef, coef, st.sampled_from([-1, 1]), st.sampled_from([-1, 1]),
       st.floats(0, 2 * math.pi))
def test_equilibria_are_zeros_of_the_field(b0, c0, d0, eps1, angle):
    assume(abs(d0 - b0 * c0) > 0.05)
    amp = make(b0, c0, d0, eps1)
    c = (math.cos(angle), math.sin(angle))
    for eq in amplitude_flow(amp, *c):
        assert np.allclose(amp.rhs(eq.r, c), 0, atol=1e-12)
        assert min(eq.r) >= 0


@settings(max_examples=60, deadline=None)
@given(coef, coef, st.sampled_from([-1, 1]), st.sampled_from([-1, 1]))
def test_jacobian_matches_finite_differences(b0, c0, d0, eps1):
    amp = make(b0, c0, d0, eps1)
    r, c, h = np.array([0.3, 0.7]), (-0.2, 0.4), 1e-6
    fd = np.column_stack([(amp.rhs(r + h * e, c) - amp.rhs(r - h * e, c)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(fd, amp.jacobian(r, c), atol=1e-8)


def test_stable_equilibria_attract_forward_orbits():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 20:
        b0, c0 = rng.uniform(-3, 3, 2)
        d0, eps1 = rng.choice([-1, 1], 2)
        if abs(d0 - b0 * c0) < 0.1:
            continue
        angle = rng.uniform(0, 2 * math.pi)
        amp = make(b0, c0, int(d0), int(eps1))
        c = (math.cos(angle), math.sin(angle))
        for eq in amplitude_flow(amp, *c):
            if eq.stability != "stable":
                continue
            start = np.array(eq.r) + 1e-3 * rng.standard_normal(2)
            start = np.where(np.array(eq.r) == 0, abs(start), start)
            sol = solve_ivp(lambda t, r: amp.rhs(r, c), (0, 200), start, rtol=1e-10, atol=1e-12)
            assert np.allclose(sol.y[:, -1], eq.r, atol=1e-6)
            checked += 1


def test_decoupled_amplitudes():
    coeffs = dict(B11=1.0, B21=0.2, B13=-0.3, B23=1.0, B2100=-1.0, B1011=0.0,
                  B0021=-2.0, B1110=0.0)
    amp = reduce(coeffs)
    assert amp.b0 == 0 and amp.c0 == 0 and amp.disc == amp.d0
    for ln in critical_lines(amp):
        assert abs(ln.direction[0] * ln.direction[1]) < 1e-15
    # only the first amplitude can be active for c1 < 0 < c2 with d0 = 1
    kinds = {e.kind: e.stability for e in amplitude_flow(amp, -1.0, 0.5)}
    assert set(kinds) == {"origin", "mode1"}
    assert kinds["mode1"] == "stable"
    kinds = {e.kind: e.stability for e in amplitude_flow(amp, 1.0, -0.5)}
    assert kinds == {"origin": "saddle", "mode2": "stable"}


def test_reversing_time_keeps_the_case():
    coeffs = dict(B11=0.3 + 1j, B21=-0.2, B13=0.5, B23=0.4j + 1, B2100=-0.6 - 0.5j,
                  B1011=-7.5 + 11j, B0021=3.6 - 7.5j, B1110=0.37 + 2.9j)
    amp = reduce(coeffs)
    back = reduce({k: -v for k, v in coeffs.items()})
    assert (back.eps1, back.eps2) == (-amp.eps1, -amp.eps2)
    assert (back.b0, back.c0, back.d0) == (amp.b0, amp.c0, amp.d0)
    assert np.allclose(back.c_matrix, amp.c_matrix)
    assert classify(back).label == classify(amp).label == "VIa"


def test_first_axis_is_tangent_to_the_first_hopf_curve(epidemic_analysis):
    from doublehopf import hopf_curve

    a = epidemic_analysis
    amp = reduce(a.nf)
    spec, pt = a.spec, a.point
    direction = amp.alpha_of([0.0, 1.0])           # c1 = 0: first pair stays critical
    d = spec.delay_param
    s0, h = pt.param[1 - d], 1e-4
    branch = hopf_curve(spec, pt.modes[0], [s0 - h, s0 + h], label=pt.labels[0], j=pt.branches[0])
    fd = (branch.samples[1, 1] - branch.samples[0, 1]) / (2 * h)
    assert direction[d] / direction[1 - d] == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("label", ["Ib", "VIa"])
def test_region_notes_agree_with_the_flow(label):
    amp = make(1.44, 1.2, 1, eps1=-1) if label == "Ib" else make(2.1, -0.64, -1, eps1=-1)
    cls = classify(amp)
    assert cls.label == label
    assert cls.region_count == (6 if label == "Ib" else 8)
    assert set(cls.regions) <= set(REGION_NOTES[label])
    for angle in np.linspace(0.01, 2 * math.pi, 180, endpoint=False):
        try:
            rep = region_of(amp, cls, (math.cos(angle), math.sin(angle)))
        except ValueError:
            continue
        stable = {e.kind for e in rep.equilibria if e.stable}
        note = rep.note
        if "equilibrium stable" in note:
            assert stable == {"origin"}
        if "coexist" in note:
            assert stable == {"mode1", "mode2"}
        if "2-torus" in note and "unstable" not in note:
            assert stable == {"mixed"}
        if "no small-amplitude attractor" in note:
            assert not stable


def test_notes_flag_reversed_time():
    amp = make(1.44, 1.2, 1, eps1=1)
    rep = region_of(amp, classify(amp), (1.0, 0.1))
    assert rep.note.startswith("with time reversed")


def test_region_query_on_a_line_is_refused():
    amp = make(1.44, 1.2, 1)
    cls = classify(amp)
    with pytest.raises(ValueError):
        region_of(amp, cls, (1.0, 0.0))
    with pytest.raises(ValueError):
        region_of(amp, cls, (0.0, 0.0))


def test_slopes_and_exports(tmp_path):
    M = np.array([[-0.7, -0.002], [-0.64, 0.004]])
    amp = AmplitudeSystem(-1, -1, 1.44, 1.2, 1, M, np.array([0.53, 5.23]), ("omega", "d2"))
    cls = classify(amp)
    lines = bifurcation_lines(amp, cls)
    assert {ln.name for ln in lines} == {"c2=c0*c1", "c1=b0*c2/d0"}
    for ln in lines:
        a = amp.alpha_of(ln.direction)
        assert slope_in_parameters(amp, ln) == pytest.approx(a[1] / a[0])
    path = tmp_path / "lines.csv"
    lines_to_csv(amp, cls, path)
    assert path.read_text().startswith("line,exact,alpha1,alpha2,omega,d2")
    assert "plot" in gnuplot_script(amp, path)
    with pytest.raises(NumericalDegeneracy):
        bifurcation_lines(AmplitudeSystem(-1, -1, 1.44, 1.2, 1, np.ones((2, 2))), cls)
