"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the long simulations are
marked ``slow`` and can be skipped with ``-m "not slow"``.
"""
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from doublehopf import (builtin_epidemic, builtin_predprey, reduce, classify, region_of,
                        analyse, CharSlice, char_residual, imaginary_roots, expand_at, assemble)
from doublehopf.eigenbasis import bilinear_pair
from doublehopf.normalform import (COEFF_NAMES, spatial_integrals, cosine_product_integral,
                                   cosine_norm)
from doublehopf.unfolding import bifurcation_lines, slope_in_parameters
from doublehopf.simulator import (Grid, integrate, cosine_initial, classify_attractor,
                                  dominant_mode, mode_amplitudes, poincare, default_section)

from conftest import locate_predprey, locate_epidemic, Analysis


def _fmt(z):
    return f"{z.real:+.5f}{z.imag:+.5f}i"


# ---------------------------------------------------------------------------
# predator-prey double Hopf point and its normal form

def test_criterion_1_predprey_locus(verdict):
    start = time.perf_counter()
    spec, pt = locate_predprey()
    elapsed = time.perf_counter() - start
    got = {"r1": pt.param[1], "tau": pt.param[0], "omega+": max(pt.freqs), "omega-": min(pt.freqs)}
    want = {"r1": 0.6739271475, "tau": 10.4238045, "omega+": 0.77444, "omega-": 0.362170}
    errs = {k: abs(got[k] - want[k]) / abs(want[k]) for k in want}
    ok = max(errs.values()) < 1e-4 and elapsed < 10
    detail = ", ".join(f"{k}={got[k]:.8g}" for k in got) + f"; worst rel err {max(errs.values()):.2e}; {elapsed:.1f}s"
    verdict("criterion 1 (predator-prey double Hopf locus)", ok, detail)


PP_COEFFS = dict(B11=0.17069 + 0.12592j, B21=1.97884 + 2.26811j, B13=-0.11732 + 0.09868j,
                 B23=-3.48553 + 1.52722j, B2100=-0.58923 - 0.57368j, B1011=-7.57432 + 11.46887j,
                 B0021=3.603569 - 7.55242j, B1110=0.374678 + 2.89123j)


def test_criterion_2_predprey_normal_form(verdict):
    start = time.perf_counter()
    spec, pt = locate_predprey()
    # the reference coefficients list the faster pair first
    nf, amp, cls = analyse(spec, pt.swapped())
    elapsed = time.perf_counter() - start
    worst = max(max(abs(nf[k].real - v.real), abs(nf[k].imag - v.imag)) for k, v in PP_COEFFS.items())
    derived = (amp.eps1, amp.eps2, amp.b0, amp.c0, amp.d0, amp.disc)
    want = (-1, 1, 2.10189, -0.63587, -1, 0.336547)
    dworst = max(abs(a - b) for a, b in zip(derived, want))
    ok = worst < 1e-3 and dworst < 1e-3 and cls.label == "VIa" and elapsed < 30
    detail = (f"max coefficient error {worst:.2e}, derived {tuple(round(x, 6) for x in derived)} "
              f"(max error {dworst:.2e}), class {cls.label}; {elapsed:.1f}s")
    verdict("criterion 2 (predator-prey normal form and class VIa)", ok, detail)


# ---------------------------------------------------------------------------
# epidemic model

TABLE = {  # d2*, omega*, (n1, z1), (n2, z2), b0, c0, d0 - b0 c0
    "HH1": (1.62, 0.5295, (2, 3.0071), (3, 3.0763), 1.8774, 1.1651, -1.1872),
    "HH2": (5.23, 0.5290, (1, 2.9930), (2, 3.1037), 1.4401, 0.0016, -0.0023),
    "HH3": (35.2, 0.5401, (0, 2.9082), (1, 3.1007), 3.1290, 1.4043, -3.3939),
}


def _hh(name, l):
    row = TABLE[name]
    spec, pt = locate_epidemic(row[2][0], row[3][0], builtin_epidemic(l=l))
    return spec, pt


def _mismatch(pt, name):
    d2, om, (_, z1), (_, z2) = TABLE[name][:4]
    return np.array([(pt.param[1] - d2) / d2, pt.param[0] - om, pt.freqs[0] - z1, pt.freqs[1] - z2])


@pytest.fixture(scope="module")
def table_rows():
    start = time.perf_counter()
    res = minimize_scalar(lambda l: float(np.sum(_mismatch(_hh("HH2", l)[1], "HH2") ** 2)),
                          bounds=(1.5, 5.0), method="bounded", options={"xatol": 1e-4})
    l = float(res.x)
    rows = {}
    for name in TABLE:
        spec, pt = _hh(name, l)
        nf, amp, cls = analyse(spec, pt)
        rows[name] = (pt, amp, cls)
    return l, rows, time.perf_counter() - start


def test_criterion_3a_epidemic_reference_locations(verdict, table_rows):
    l, rows, elapsed = table_rows
    worst, parts = 0.0, []
    for name, (pt, _, _) in rows.items():
        d2, om, (n1, z1), (n2, z2) = TABLE[name][:4]
        err = max(abs(pt.param[0] - om), abs(pt.freqs[0] - z1), abs(pt.freqs[1] - z2))
        worst = max(worst, err)
        ok_modes = tuple(pt.modes) == (n1, n2)
        worst = worst if ok_modes else math.inf
        parts.append(f"{name} d2*={pt.param[1]:.3f} w*={pt.param[0]:.4f} z=({pt.freqs[0]:.4f},{pt.freqs[1]:.4f})")
    ok = worst < 1e-2 and elapsed < 60
    verdict("criterion 3a (epidemic reference points omega*, z1, z2)", ok,
            f"calibrated l={l:.4f}; " + "; ".join(parts) + f"; worst {worst:.1e}; {elapsed:.1f}s")


def test_criterion_3b_epidemic_reference_unfolding_values(verdict, table_rows):
    _, rows, _ = table_rows
    worst, parts = 0.0, []
    for name, (_, amp, _) in rows.items():
        b0, c0, disc = TABLE[name][4:]
        err = max(abs(amp.b0 - b0), abs(amp.c0 - c0), abs(amp.disc - disc))
        worst = max(worst, err)
        parts.append(f"{name} (b0,c0,disc)=({amp.b0:.4f},{amp.c0:.4f},{amp.disc:.4f})")
    verdict("criterion 3b (epidemic reference points b0, c0, d0-b0c0)", worst < 1e-2,
            "; ".join(parts) + f"; worst {worst:.2e}")


def test_criterion_3c_epidemic_classification(verdict, table_rows):
    _, rows, _ = table_rows
    labels = {name: cls.label for name, (_, _, cls) in rows.items()}
    verdict("criterion 3c (epidemic points all of type Ib)", set(labels.values()) == {"Ib"}, str(labels))


HH2_COEFFS = dict(B11=0.7184 + 0.5138j, B21=0.0021 + 0.0042j, B13=0.6431 + 0.5805j,
                  B23=-0.0037 + 0.0101j, B2100=-0.0001 - 0.1942j, B1011=-0.0010 - 0.3398j,
                  B0021=-0.00071 + 0.00055j, B1110=-0.0851 - 0.4349j)


@pytest.fixture(scope="module")
def hh2():
    spec, pt = locate_epidemic()
    nf, amp, cls = analyse(spec, pt)
    return spec, pt, nf, amp, cls


def test_criterion_4a_epidemic_coefficients(verdict, hh2):
    _, _, nf, _, _ = hh2
    errs = {k: max(abs(nf[k].real - v.real), abs(nf[k].imag - v.imag)) for k, v in HH2_COEFFS.items()}
    bad = [k for k, e in errs.items() if e >= 1e-3]
    detail = ", ".join(f"{k}={_fmt(nf[k])}" for k in HH2_COEFFS) + f"; outside tolerance: {bad or 'none'}"
    verdict("criterion 4a (epidemic HH2 coefficients)", not bad, detail)


def test_criterion_4b_epidemic_secondary_slopes(verdict, hh2):
    _, _, _, amp, cls = hh2
    slopes = sorted(slope_in_parameters(amp, ln, x=1, y=0) for ln in bifurcation_lines(amp, cls))
    want = sorted([28.2318, -346.6577])
    ok = all(abs(s - w) < 0.01 * abs(w) for s, w in zip(slopes, want))
    verdict("criterion 4b (epidemic HH2 secondary lines in (d2, omega))", ok,
            f"slopes {[round(float(s), 4) for s in slopes]} vs {want}")


# ---------------------------------------------------------------------------
# simulations

COEXIST_T = 6000.0
COEXIST_TRANSIENT = 0.9   # the wave-1 cycle attracts slowly this close to the bifurcation


def _coexistence_run(wave):
    spec = builtin_epidemic(omega=0.53, d2=5.23)
    grid = Grid.for_model(spec, 40)
    init = cosine_initial(spec, grid, [0.01, -0.06, -0.05], wave, base=[1.2, 5.8, 4.2])
    return integrate(spec, grid, init, COEXIST_T, dt=0.005, stride=10)


def _profile(run, transient):
    start = int(len(run.t) * transient)
    tail = run.states[start:, 1]               # infected component
    prof = np.sqrt(np.mean((tail - tail.mean(axis=0)) ** 2, axis=0))
    w = run.grid.weights
    return prof / math.sqrt(np.sum(w * prof ** 2)), w


@pytest.mark.slow
def test_criterion_5_coexisting_periodic_solutions(verdict, hh2):
    spec, pt, _, amp, cls = hh2
    region = region_of(amp, cls, np.array([0.53, 5.23]) - pt.param).region
    with ProcessPoolExecutor(2, mp_context=multiprocessing.get_context("fork")) as pool:
        runs = dict(zip((1, 2), pool.map(_coexistence_run, (1, 2))))
    kinds = {w: classify_attractor(r, transient=COEXIST_TRANSIENT).kind for w, r in runs.items()}
    dominant = {w: dominant_mode(r, window=1 - COEXIST_TRANSIENT) for w, r in runs.items()}
    (p1, w), (p2, _) = _profile(runs[1], COEXIST_TRANSIENT), _profile(runs[2], COEXIST_TRANSIENT)
    distance = math.sqrt(np.sum(w * (p1 - p2) ** 2))
    ok = (all(k == "periodic" for k in kinds.values())
          and dominant[1][0] == 1 and dominant[2][0] == 2
          and min(dominant[1][1], dominant[2][1]) > 5 and distance > 0.1)
    detail = (f"predicted region {region}; kinds {kinds}; dominant modes "
              f"{ {w: (m, round(r, 1)) for w, (m, r) in dominant.items()} }; profile distance {distance:.3f}")
    verdict("criterion 5 (coexisting periodic solutions at (5.23, 0.53))", ok, detail)


def _predprey_run(r1, T=8000.0):
    spec = builtin_predprey(tau=10.8, r1=r1)
    grid = Grid.for_model(spec, 40)
    init = np.zeros((2, 40))
    init[0] += 0.01
    return integrate(spec, grid, init, T, dt=10.8 / 148, stride=2)


@pytest.mark.slow
def test_criterion_6_torus_and_irregular_attractors(verdict):
    with ProcessPoolExecutor(2, mp_context=multiprocessing.get_context("fork")) as pool:
        runs = dict(zip((0.69, 0.726), pool.map(_predprey_run, (0.69, 0.726))))
    reports = {r1: classify_attractor(run) for r1, run in runs.items()}
    crossings = len(poincare(runs[0.69], default_section(runs[0.69])))
    ok = (reports[0.69].kind == "torus-like" and crossings >= 200
          and reports[0.726].kind == "irregular")
    detail = "; ".join(f"r1={r1}: {rep.kind} (linearity {rep.evidence.get('linearity', float('nan')):.3f}, "
                       f"gap ratio {rep.evidence.get('gap_ratio', float('nan')):.2f})"
                       for r1, rep in reports.items()) + f"; {crossings} crossings at r1=0.69"
    verdict("criterion 6 (2-torus at r1=0.69, irregular at r1=0.726)", ok, detail)


@pytest.mark.slow
def test_three_torus_smoke(capsys):
    """Not a hard target: only records what the classifier says at r1 = 0.71."""
    rep = classify_attractor(_predprey_run(0.71))
    with capsys.disabled():
        print(f"\nINFO r1=0.71 smoke run: {rep.kind} {rep.evidence}")
    assert rep.kind in {"torus-like", "irregular"}


# ---------------------------------------------------------------------------
# property suites

@pytest.fixture(scope="module")
def analyses():
    pp_spec, pp_pt = locate_predprey()
    ep_spec, ep_pt = locate_epidemic()
    return {"predprey": Analysis(pp_spec, pp_pt.swapped()), "epidemic": Analysis(ep_spec, ep_pt)}


def _normalisation(analyses):
    worst = 0.0
    for a in analyses.values():
        b = a.basis
        G = np.asarray(a.rescaled.linear_delayed(a.rescaled.param))
        for k in range(4):
            lam = 1j * b.freq(k)
            worst = max(worst, abs(bilinear_pair(b.psi_vec(k), b.phi_vec(k), lam, lam, b.delays, G) - 1))
    return worst < 1e-10, f"normalisation residual {worst:.1e}"


def _root_residuals():
    worst = 0.0
    for spec, sweep, modes in ((builtin_epidemic(), np.linspace(1, 60, 10), range(4)),
                               (builtin_predprey(), np.linspace(0.55, 0.9, 8), range(3))):
        for s in sweep:
            p = np.array(spec.param)
            p[1 - spec.delay_param] = s
            for m in modes:
                for root in imaginary_roots(spec, m, p):
                    q = p.copy()
                    q[spec.delay_param] = root.delay
                    worst = max(worst, abs(char_residual(CharSlice(spec, m, q), 1j * root.z)))
    return worst < 1e-10, f"characteristic residual {worst:.1e}"


def _spatial_integrals():
    from scipy.integrate import simpson

    worst = 0.0
    for l in (1.0, 3.0):
        x = np.linspace(0, l * math.pi, 10001)
        for n1 in range(4):
            for n2 in range(n1, 5):
                s = spatial_integrals(n1, n2, l)
                g1 = cosine_norm(n1, l) * np.cos(n1 * x / l)
                g2 = cosine_norm(n2, l) * np.cos(n2 * x / l)
                pairs = [(s.gamma40, g1 ** 4), (s.gamma04, g2 ** 4), (s.gamma22, g1 ** 2 * g2 ** 2),
                         (s.beta30, g1 ** 3), (s.beta21, g1 ** 2 * g2), (s.beta12, g1 * g2 ** 2),
                         (s.beta03, g2 ** 3), (cosine_product_integral((n1, n2, n1 + n2), l), g1 * g2
                                               * cosine_norm(n1 + n2, l) * np.cos((n1 + n2) * x / l))]
                worst = max(worst, max(abs(v - simpson(y, x=x)) for v, y in pairs))
    return worst < 1e-10, f"spatial integral error {worst:.1e}"


def _rescaling(analyses):
    import dataclasses

    rng = np.random.default_rng(11)
    worst = 0.0
    for a in analyses.values():
        ref = reduce(a.nf)
        label = classify(ref).label
        for _ in range(20):
            c = rng.uniform(0.2, 5, 2) * np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
            basis = dataclasses.replace(a.basis, phi=a.basis.phi * c[:, None], psi=a.basis.psi / c[:, None])
            amp = reduce(assemble(a.rescaled, basis, a.expansion))
            if (amp.eps1, amp.eps2) != (ref.eps1, ref.eps2) or classify(amp).label != label:
                return False, "sign or class changed under rescaling"
            worst = max(worst, abs(amp.b0 - ref.b0), abs(amp.c0 - ref.c0))
    return worst < 1e-8, f"rescaling drift {worst:.1e}"


def _recomposition(analyses):
    ok = all(a.nf[name] == p["C"] + 1.5 * (p["D"] + p["E"])
             for a in analyses.values() for name, p in a.nf.parts.items())
    return ok, "B = C + 3/2 (D + E) exactly"


def _closed_vs_scan():
    worst = 0.0
    for spec, values, modes in ((builtin_epidemic(), (1.62, 5.23, 35.2), range(4)),
                                (builtin_predprey(), (0.6, 0.674, 0.8), range(3))):
        for s in values:
            p = np.array(spec.param)
            p[1 - spec.delay_param] = s
            for m in modes:
                a = sorted(imaginary_roots(spec, m, p, method="closed"), key=lambda r: r.z)
                b = imaginary_roots(spec, m, p, method="scan")
                if len(a) != len(b):
                    return False, f"root count differs for mode {m}"
                for x, y in zip(a, b):
                    worst = max(worst, abs(x.z - y.z), abs(x.delay - y.delay))
    return worst < 1e-8, f"closed vs scan {worst:.1e}"


def _mass_conservation():
    from doublehopf import model_from_dict

    spec = model_from_dict({"n_components": 1, "domain_scale": 2.0, "param": [0, 0], "delays": [],
                            "diffusion": [[0.7, 0, 0]], "linear_now": {"const": [[0.0]]},
                            "linear_delayed": [], "reaction": [[]]})
    grid = Grid.for_model(spec, 40)
    run = integrate(spec, grid, np.array([np.exp(-(grid.x - 1) ** 2)]), 100.0, stride=100)
    mass = grid.mass(run.states[:, 0])
    drift = float(np.max(np.abs(mass - mass[0])))
    return drift < 1e-8, f"mass drift {drift:.1e}"


def _linear_frequency():
    spec = builtin_predprey(r1=0.75)
    root = imaginary_roots(spec, 1, spec.param)[0]
    spec = spec.with_param([root.delay, 0.75])
    grid = Grid.for_model(spec, 40)
    run = integrate(spec, grid, cosine_initial(spec, grid, [0.01, 0.0], 1), 400.0, linear=True)
    s = mode_amplitudes(run, [1])[:, 0, 0]
    half = len(s) // 2
    s, t = s[half:], run.t[half:]
    up = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    times = t[up] - s[up] * (t[up + 1] - t[up]) / (s[up + 1] - s[up])
    freq = 2 * math.pi / np.mean(np.diff(times))
    err = abs(freq - root.z) / root.z
    return err < 1e-2, f"simulated frequency {freq:.5f} vs {root.z:.5f}"


def test_criterion_7_property_suites(verdict, analyses):
    checks = [_normalisation(analyses), _root_residuals(), _spatial_integrals(), _rescaling(analyses),
              _recomposition(analyses), _closed_vs_scan(), _mass_conservation(), _linear_frequency()]
    verdict("criterion 7 (property suites)", all(ok for ok, _ in checks),
            "; ".join(("" if ok else "FAILED ") + msg for ok, msg in checks))
