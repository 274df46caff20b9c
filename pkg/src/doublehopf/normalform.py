"""Third-order normal form on the four-dimensional centre manifold of a
double Hopf point.

The reduced equations read::

    z1' = i w1 z1 + (B11 a1 + B21 a2) z1 + B2100 z1^2 z2 + B1011 z1 z3 z4
    z3' = i w2 z3 + (B13 a1 + B23 a2) z3 + B0021 z3^2 z4 + B1110 z1 z2 z3

(plus conjugates), where ``a = p - p0``.  Every routine here works in the
time unit of the rescaled model returned by ``prepare_critical``.

Mode bookkeeping: index ``k = 0..3`` stands for (phi1, conj phi1, phi3,
conj phi3); monomials ``z^q`` are indexed by 4-tuples ``q``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .eigenbasis import EigenData
from .errors import NumericalDegeneracy
from .model import ModelSpec, ParamExpansion, history_of_mode, multilinear, taylor_coeff
from .spectrum import CharSlice

RESONANT = {0: [(2, 1, 0, 0), (1, 0, 1, 1)], 2: [(0, 0, 2, 1), (1, 1, 1, 0)]}
COEFF_NAMES = {(2, 1, 0, 0): "B2100", (1, 0, 1, 1): "B1011", (0, 0, 2, 1): "B0021", (1, 1, 1, 0): "B1110"}


def multi_indices(order: int):
    return [q for q in itertools.product(range(order + 1), repeat=4) if sum(q) == order]


# ---------------------------------------------------------------------------
# spatial integrals of products of normalised cosines

def cosine_norm(m: int, l: float) -> float:
    return 1 / math.sqrt(l * math.pi) if m == 0 else math.sqrt(2 / (l * math.pi))


def cosine_product_integral(waves, l: float) -> float:
    """Exact ``int_0^{l pi} prod_i gamma_{m_i}(x) dx``.

    Expanding the product of cosines, only sign patterns with
    ``sum s_i m_i = 0`` survive integration over whole half-periods.
    """
    waves = [int(w) for w in waves]
    if not waves:
        return l * math.pi
    hits = sum(1 for signs in itertools.product((1, -1), repeat=len(waves))
               if sum(s * w for s, w in zip(signs, waves)) == 0)
    scale = math.prod(cosine_norm(w, l) for w in waves)
    return scale * l * math.pi * hits / 2 ** len(waves)


@dataclass
class SpatialIntegrals:
    """Integrals ``int gamma_{n1}^i gamma_{n2}^j`` that enter the normal form."""

    n1: int
    n2: int
    l: float
    gamma40: float
    gamma04: float
    gamma22: float
    beta30: float
    beta21: float
    beta12: float
    beta03: float

    def triple(self, j, a, b) -> float:
        return cosine_product_integral((j, a, b), self.l)


def _fourth_power(n, l):
    return 1 / (l * math.pi) if n == 0 else 3 / (2 * l * math.pi)


def _cube(n, l):
    return math.sqrt(1 / (l * math.pi)) if n == 0 else 0.0


def spatial_integrals(n1: int, n2: int, l: float) -> SpatialIntegrals:
    """Piecewise closed forms, one branch per wave-number configuration."""
    lp = l * math.pi
    if n1 == 0 and n2 == 0:
        g22, b21, b12 = 1 / lp, math.sqrt(1 / lp), math.sqrt(1 / lp)
    elif n1 == 0:
        g22, b21, b12 = 1 / lp, 0.0, math.sqrt(1 / lp)
    else:
        g22 = 3 / (2 * lp) if n1 == n2 else 1 / lp
        b21 = math.sqrt(1 / (2 * lp)) if n2 == 2 * n1 else 0.0
        b12 = 0.0
    return SpatialIntegrals(n1, n2, l, _fourth_power(n1, l), _fourth_power(n2, l), g22,
                            _cube(n1, l), b21, b12, _cube(n2, l))


def case_tag(n1: int, n2: int) -> str:
    if n1 == 0 and n2 == 0:
        return "both-homogeneous"
    if n1 == 0 or n2 == 0:
        return "one-homogeneous"
    if n2 == 2 * n1 or n1 == 2 * n2:
        return "both-inhomogeneous-2:1"
    if n1 == n2:
        return "both-inhomogeneous-equal"
    return "both-inhomogeneous"


# ---------------------------------------------------------------------------
# second order: parameter unfolding

def second_order(exp: ParamExpansion, basis: EigenData, l: float) -> dict:
    """Coefficients of ``a_i z_1`` and ``a_i z_3``."""
    out = {}
    for pos, (name_i, name_j) in enumerate([("B11", "B21"), ("B13", "B23")]):
        k = 2 * pos
        m = basis.wave(k)
        hist = basis.phi_hist(k)
        psi = basis.psi_vec(k)
        for i, name in enumerate((name_i, name_j)):
            term = -(m / l) ** 2 * exp.dD[i] * hist[0] + exp.L1[i].apply(hist)
            out[name] = complex(psi @ term)
    return out


# ---------------------------------------------------------------------------
# Taylor data of the nonlinearity along the critical eigenfunctions

def reaction_coefficients(spec: ModelSpec, basis: EigenData, order: int, p=None) -> dict:
    p = spec.param if p is None else p
    hists = [basis.phi_hist(k) for k in range(4)]
    return {q: np.asarray(taylor_coeff(spec, p, q, hists), dtype=complex) for q in multi_indices(order)}


def _wave_powers(q, basis):
    n1, n2 = basis.modes
    return [n1] * (q[0] + q[1]) + [n2] * (q[2] + q[3])


def f2_line(basis: EigenData, F2: dict, l: float) -> dict:
    """Projected quadratic terms ``f[k][q] = psi_k F_q int gamma^q gamma_{n_k}``."""
    out = {}
    for k in range(4):
        psi = basis.psi_vec(k)
        for q, Fq in F2.items():
            weight = cosine_product_integral(_wave_powers(q, basis) + [basis.wave(k)], l)
            out[k, q] = complex(psi @ Fq) * weight
    return out


def sigma(q, basis: EigenData) -> float:
    return sum(q[k] * basis.freq(k) for k in range(4))


def c_coefficients(basis: EigenData, F3: dict, l: float) -> dict:
    out = {}
    for k, targets in RESONANT.items():
        psi = basis.psi_vec(k)
        for q in targets:
            weight = cosine_product_integral(_wave_powers(q, basis) + [basis.wave(k)], l)
            out[q] = complex(psi @ F3[q]) * weight / 6
    return out


def d_coefficients(basis: EigenData, f: dict) -> dict:
    """Resonant cubic part of ``D_z f U`` / 6, with ``U`` solving the
    homological equation for the quadratic terms ``f``."""
    def U(k, q):
        return f[k, q] / (1j * (sigma(q, basis) - basis.freq(k)))

    out = {}
    for k, targets in RESONANT.items():
        for t in targets:
            total = 0j
            for m in range(4):
                for q in multi_indices(2):
                    if q[m] == 0:
                        continue
                    rest = tuple(t[i] - q[i] + (i == m) for i in range(4))
                    if min(rest) < 0 or sum(rest) != 2:
                        continue
                    total += q[m] * f[k, q] * U(m, rest)
            out[t] = total / 6
    return out


def _q(s):
    return tuple(int(c) for c in s)


# (factor, k1, q1, (a, b), k2, q2): factor * f[k1][q1] / (i(a w1 + b w2)) * f[k2][q2]
D_TABLE = {
    (2, 1, 0, 0): [
        (2, 0, "2000", (-1, 0), 0, "1100"), (1, 0, "1100", (1, 0), 0, "2000"),
        (1, 0, "1100", (1, 0), 1, "1100"), (2, 0, "0200", (3, 0), 1, "2000"),
        (1, 0, "1010", (0, -1), 2, "1100"), (1, 0, "0110", (2, -1), 2, "2000"),
        (1, 0, "1001", (0, 1), 3, "1100"), (1, 0, "0101", (2, 1), 3, "2000")],
    (1, 0, 1, 1): [
        (2, 0, "2000", (-1, 0), 0, "0011"), (1, 0, "1010", (0, -1), 0, "1001"),
        (1, 0, "1001", (0, 1), 0, "1010"), (1, 0, "1100", (1, 0), 1, "0011"),
        (1, 0, "0110", (2, -1), 1, "1001"), (1, 0, "0101", (2, 1), 1, "1010"),
        (1, 0, "1010", (0, -1), 2, "0011"), (2, 0, "0020", (1, -2), 2, "1001"),
        (1, 0, "0011", (1, 0), 2, "1010"), (1, 0, "1001", (0, 1), 3, "0011"),
        (1, 0, "0011", (1, 0), 3, "1001"), (2, 0, "0002", (1, 2), 3, "1010")],
    (0, 0, 2, 1): [
        (1, 2, "1010", (-1, 0), 0, "0011"), (1, 2, "1001", (-1, 2), 0, "0020"),
        (1, 2, "0110", (1, 0), 1, "0011"), (1, 2, "0101", (1, 2), 1, "0020"),
        (2, 2, "0020", (0, -1), 2, "0011"), (1, 2, "0011", (0, 1), 2, "0020"),
        (1, 2, "0011", (0, 1), 3, "0011"), (2, 2, "0002", (0, 3), 3, "0020")],
    (1, 1, 1, 0): [
        (2, 2, "2000", (-2, 1), 0, "0110"), (1, 2, "1100", (0, 1), 0, "1010"),
        (1, 2, "1010", (-1, 0), 0, "1100"), (1, 2, "1100", (0, 1), 1, "0110"),
        (2, 2, "0200", (2, 1), 1, "1010"), (1, 2, "0110", (1, 0), 1, "1100"),
        (1, 2, "1010", (-1, 0), 2, "0110"), (1, 2, "0110", (1, 0), 2, "1010"),
        (2, 2, "0020", (0, -1), 2, "1100"), (1, 2, "1001", (-1, 2), 3, "0110"),
        (1, 2, "0101", (1, 2), 3, "1010"), (1, 2, "0011", (0, 1), 3, "1100")],
}


def d_coefficients_table(basis: EigenData, f: dict) -> dict:
    """Same quantities as ``d_coefficients`` summed over an explicit list of
    contributing products; used as an independent cross-check."""
    w1, w2 = basis.omega
    out = {}
    for t, rows in D_TABLE.items():
        total = 0j
        for factor, k1, q1, (a, b), k2, q2 in rows:
            total += factor * f[k1, _q(q1)] * f[k2, _q(q2)] / (1j * (a * w1 + b * w2))
        out[t] = total / 6
    return out


# ---------------------------------------------------------------------------
# second-order centre manifold correction h_{j,q}(theta)

@dataclass
class ExpSum:
    """``theta -> sum_i vec_i exp(i freq_i theta)`` on ``[-r_max, 0]``."""

    terms: list = field(default_factory=list)

    def __call__(self, theta):
        return sum(v * np.exp(1j * w * theta) for w, v in self.terms)

    def hist(self, delays):
        out = 0
        for w, v in self.terms:
            out = out + history_of_mode(v, 1j * w, delays)
        return out


def _resolvent_solve(M, rhs, cond_limit):
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NumericalDegeneracy(f"resolvent condition number {cond:.3g} exceeds {cond_limit:.3g}")
    lu = linalg.lu_factor(M)
    x = linalg.lu_solve(lu, rhs)
    return x + linalg.lu_solve(lu, rhs - M @ x)    # one refinement step


def needed_h(basis: EigenData, l: float) -> set:
    """Pairs ``(j, q)`` of wave number and multi-index demanded by the
    cubic coefficients; zero spatial weights are skipped."""
    pairs = set()
    for terms in _e_terms(*basis.modes).values():
        for weight_waves, _, q in terms:
            for j in _candidate_waves(weight_waves):
                if cosine_product_integral((j,) + weight_waves, l) != 0.0:
                    pairs.add((j, q))
    return pairs


def _candidate_waves(waves):
    a, b = waves
    return sorted({a + b, abs(a - b)})


def _e_terms(n1, n2):
    # (waves weighting the S term, S index, h multi-index) per resonant monomial
    return {
        (2, 1, 0, 0): [((n1, n1), 0, (1, 1, 0, 0)), ((n1, n1), 1, (2, 0, 0, 0))],
        (1, 0, 1, 1): [((n1, n1), 0, (0, 0, 1, 1)), ((n2, n1), 2, (1, 0, 0, 1)),
                       ((n2, n1), 3, (1, 0, 1, 0))],
        (0, 0, 2, 1): [((n2, n2), 2, (0, 0, 1, 1)), ((n2, n2), 3, (0, 0, 2, 0))],
        (1, 1, 1, 0): [((n1, n2), 0, (0, 1, 1, 0)), ((n1, n2), 1, (1, 0, 1, 0)),
                       ((n2, n2), 2, (1, 1, 0, 0))],
    }


def h_solutions(spec: ModelSpec, basis: EigenData, F2: dict, exp: ParamExpansion, l: float,
                pairs=None, cond_limit: float = 1e12) -> dict:
    """Solve the homological equation on the infinite-dimensional complement.

    With ``s = sigma(q)`` and spatial weight ``b = int gamma^q gamma_j``::

        h_{j,q}(theta) = b [ sum_{k: wave_k = j} phi_k(theta) psi_k F_q / (i (w_k - s))
                             + exp(i s theta) Delta_j(i s)^{-1} F_q ]
    """
    pairs = needed_h(basis, l) if pairs is None else pairs
    out = {}
    for j, q in sorted(pairs):
        weight = cosine_product_integral(_wave_powers(q, basis) + [j], l)
        if weight == 0.0:
            out[j, q] = ExpSum([(0.0, np.zeros(spec.n_components, dtype=complex))])
            continue
        s = sigma(q, basis)
        Fq = F2[q]
        terms = []
        for k in range(4):
            if basis.wave(k) == j:
                coef = (basis.psi_vec(k) @ Fq) / (1j * (basis.freq(k) - s))
                terms.append((basis.freq(k), weight * coef * basis.phi_vec(k)))
        M = CharSlice(spec, j, exp.param).matrix(1j * s)
        terms.append((s, weight * _resolvent_solve(M, Fq, cond_limit)))
        out[j, q] = ExpSum(terms)
    return out


def s_operator(spec: ModelSpec, basis: EigenData, k: int, hist, p=None) -> np.ndarray:
    """``S_{y z_k}(y) = 2 D^2F(phi_k, y)``."""
    p = spec.param if p is None else p
    return 2 * multilinear(spec, p, [basis.phi_hist(k), hist])


def e_coefficients(spec: ModelSpec, basis: EigenData, h: dict, l: float) -> dict:
    n1, n2 = basis.modes
    out = {}
    for t, terms in _e_terms(n1, n2).items():
        row = 0 if t in RESONANT[0] else 2
        total = np.zeros(spec.n_components, dtype=complex)
        for (wa, wb), k, q in terms:
            for j in _candidate_waves((wa, wb)):
                weight = cosine_product_integral((j, wa, wb), l)
                if weight == 0.0:
                    continue
                total = total + weight * s_operator(spec, basis, k, h[j, q].hist(basis.delays))
        out[t] = complex(basis.psi_vec(row) @ total) / 6
    return out


# ---------------------------------------------------------------------------
# assembly

@dataclass
class NormalForm:
    """All coefficients of the truncated normal form.

    ``coeffs`` holds B11, B21, B13, B23, B2100, B1011, B0021 and B1110;
    ``parts`` keeps the C, D and E contributions for each cubic coefficient.
    """

    coeffs: dict
    parts: dict
    omega: tuple
    modes: tuple
    case: str
    time_scale: float
    param: np.ndarray
    param_names: tuple

    def __getitem__(self, key):
        return self.coeffs[key]

    def to_dict(self):
        def c(z):
            return [float(z.real), float(z.imag)]
        return {
            "param": dict(zip(self.param_names, map(float, self.param))),
            "modes": list(self.modes),
            "omega": list(map(float, self.omega)),
            "time_scale": float(self.time_scale),
            "case": self.case,
            "coefficients": {k: c(v) for k, v in self.coeffs.items()},
            "parts": {k: {part: c(v) for part, v in d.items()} for k, d in self.parts.items()},
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def assemble(spec: ModelSpec, basis: EigenData, exp: ParamExpansion, cond_limit: float = 1e12) -> NormalForm:
    """Normal form for a rescaled model whose parameter sits at the double
    Hopf point and whose eigen data is ``basis``."""
    l = spec.domain_scale
    F2 = reaction_coefficients(spec, basis, 2, exp.param)
    F3 = reaction_coefficients(spec, basis, 3, exp.param)
    f = f2_line(basis, F2, l)
    C = c_coefficients(basis, F3, l)
    D = d_coefficients(basis, f)
    h = h_solutions(spec, basis, F2, exp, l, cond_limit=cond_limit)
    E = e_coefficients(spec, basis, h, l)
    coeffs = second_order(exp, basis, l)
    parts = {}
    for q, name in COEFF_NAMES.items():
        coeffs[name] = C[q] + 1.5 * (D[q] + E[q])
        parts[name] = {"C": C[q], "D": D[q], "E": E[q]}
    return NormalForm(coeffs, parts, basis.omega, basis.modes, case_tag(*basis.modes),
                      spec.time_scale, np.asarray(exp.param), spec.param_names)
