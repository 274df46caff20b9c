"""Characteristic equation per spatial mode, Hopf curves and their crossings.

For wave number ``m`` the linearisation restricted to ``cos(m x / l)`` has the
characteristic matrix::

    Delta_m(lam) = lam I + (m/l)^2 D - A - sum_k G_k exp(-lam r_k)
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from .errors import HypothesisFailure
from .model import ModelSpec, linear_part


@dataclass
class CharSlice:
    """Characteristic matrix of one spatial mode at fixed parameters."""

    spec: ModelSpec
    m: int
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        lin = linear_part(self.spec, self.p)
        self.A, self.G, self.r = lin.now, lin.delayed, lin.delays
        k = (self.m / self.spec.domain_scale) ** 2
        self.K = k * np.diag(np.asarray(self.spec.diffusion(self.p), dtype=float))

    def matrix(self, lam):
        lam = np.asarray(lam, dtype=complex)
        n = self.spec.n_components
        eye = np.eye(n)
        out = lam[..., None, None] * eye + (self.K - self.A)
        for g, r in zip(self.G, self.r):
            out = out - np.exp(-lam * r)[..., None, None] * g
        return out

    def dmatrix(self, lam):
        """Derivative of the characteristic matrix in ``lam``."""
        lam = np.asarray(lam, dtype=complex)
        out = np.broadcast_to(np.eye(self.spec.n_components, dtype=complex),
                              lam.shape + (self.spec.n_components,) * 2).copy()
        for g, r in zip(self.G, self.r):
            out = out + (r * np.exp(-lam * r))[..., None, None] * g
        return out

    def det(self, lam):
        return np.linalg.det(self.matrix(lam))


def char_residual(sl: CharSlice, lam) -> complex:
    """``det Delta_m(lam)`` from a complex LU factorisation."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)    # exact zero pivots are fine here
        lu, piv = linalg.lu_factor(sl.matrix(complex(lam)), check_finite=True)
    swaps = np.count_nonzero(piv != np.arange(len(piv)))
    return complex((-1) ** swaps * np.prod(np.diag(lu)))


def _adjugate(M):
    # stable for singular M: adj(M) = det(U) det(Vh) Vh^H adj(S) U^H
    U, s, Vh = np.linalg.svd(M)
    n = len(s)
    cof = np.array([np.prod(np.delete(s, i)) for i in range(n)])
    phase = np.linalg.det(U) * np.linalg.det(Vh)
    return phase * (Vh.conj().T * cof) @ U.conj().T


def det_derivative(M, dM):
    """Directional derivative of ``det`` at ``M`` along ``dM`` (Jacobi)."""
    return complex(np.trace(_adjugate(M) @ dM))


# ---------------------------------------------------------------------------
# purely imaginary roots

@dataclass
class ImaginaryRoot:
    """A root ``i z`` of the characteristic equation for the delay value
    ``delay`` (the smallest positive one; others differ by ``2 pi j / z``)."""

    z: float
    delay: float
    label: str
    residual: float
    method: str


def _with_delay(spec, p, r):
    q = np.array(p, dtype=float)
    q[spec.delay_param] = r
    return q


def _require_delay_param(spec):
    if spec.delay_param is None or spec.delay_slot is None:
        raise ValueError(f"model {spec.name!r} has no delay parameter to solve for")


def _spectral_bound(spec, p, slack=0.0):
    lin = linear_part(spec, p)
    return (np.linalg.norm(lin.now, 2)
            + sum(np.linalg.norm(g, 2) * math.exp(slack * r) for g, r in zip(lin.delayed, lin.delays)))


def _polish(spec, m, p, z, r, iters=30):
    """Newton iteration on (z, r) for ``det Delta_m(i z; p(r)) = 0``."""
    for _ in range(iters):
        q = _with_delay(spec, p, r)
        sl = CharSlice(spec, m, q)
        lam = 1j * z
        M = sl.matrix(lam)
        f = np.linalg.det(M)
        g = sl.G[spec.delay_slot]
        dz = 1j * det_derivative(M, sl.dmatrix(lam))
        dr = det_derivative(M, lam * np.exp(-lam * r) * g)
        J = np.array([[dz.real, dr.real], [dz.imag, dr.imag]])
        try:
            step = np.linalg.solve(J, [f.real, f.imag])
        except np.linalg.LinAlgError:
            break
        z, r = z - step[0], r - step[1]
        if abs(step[0]) < 1e-15 * max(1.0, abs(z)) and abs(step[1]) < 1e-15 * max(1.0, abs(r)):
            break
    period = 2 * math.pi / z
    r = r % period
    if r <= 0:
        r += period
    q = _with_delay(spec, p, r)
    return z, r, abs(np.linalg.det(CharSlice(spec, m, q).matrix(1j * z)))


def _unit_circle_roots(spec, m, p, z):
    """Roots E of ``det(M0(z) + E M1)``, where E stands for ``exp(-i z r)``."""
    sl = CharSlice(spec, m, p)
    slot = spec.delay_slot
    lam = 1j * z
    n = spec.n_components
    M0 = lam * np.eye(n) + sl.K - sl.A
    for k, (g, r) in enumerate(zip(sl.G, sl.r)):
        if k != slot:
            M0 = M0 - np.exp(-lam * r) * g
    M1 = -sl.G[slot]
    nodes = np.exp(2j * np.pi * np.arange(n + 1) / (n + 1))
    vals = np.array([np.linalg.det(M0 + e * M1) for e in nodes])
    coef = np.fft.fft(vals) / (n + 1)          # coef[j] multiplies E**j
    scale = np.max(np.abs(coef))
    while len(coef) > 1 and abs(coef[-1]) < 1e-13 * scale:
        coef = coef[:-1]
    if len(coef) <= 1:
        return np.array([], dtype=complex)
    return np.roots(coef[::-1])


def _generic_roots(spec, m, p, n_scan=4000, z_max=None):
    _require_delay_param(spec)
    if z_max is None:
        z_max = 1.05 * _spectral_bound(spec, p) + 1e-3
    grid = np.linspace(z_max * 1e-6, z_max, n_scan)

    def indicator(z):
        E = _unit_circle_roots(spec, m, p, z)
        return float(np.prod(np.log(np.abs(E)))) if len(E) else 1.0

    vals = np.array([indicator(z) for z in grid])
    found = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        z = brentq(indicator, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)
        E = _unit_circle_roots(spec, m, p, z)
        e = E[np.argmin(np.abs(np.abs(E) - 1.0))]
        if abs(abs(e) - 1.0) > 1e-6:
            continue                      # degree drop, not a crossing
        r = (-np.angle(e)) % (2 * math.pi) / z
        z, r, res = _polish(spec, m, p, z, r if r > 0 else 2 * math.pi / z)
        found.append((z, r, res))
    found.sort()
    return [ImaginaryRoot(z, r, str(i), res, "scan") for i, (z, r, res) in enumerate(found)]


def _closed_roots(spec, m, p):
    cf = spec.closed_form
    out = []
    for z, label in cf.frequencies(m, p):
        r = cf.principal_delay(m, p, z)
        q = _with_delay(spec, p, r)
        res = abs(char_residual(CharSlice(spec, m, q), 1j * z))
        out.append(ImaginaryRoot(z, r, label, res, "closed"))
    return out


def imaginary_roots(spec: ModelSpec, m: int, p=None, method: str = "auto", **kw) -> list:
    """Purely imaginary roots of mode ``m`` as the delay parameter varies.

    The delay parameter entry of ``p`` is ignored; each root comes with the
    smallest positive delay producing it.  ``method`` is ``"closed"``,
    ``"scan"`` or ``"auto"`` (closed form when the model provides one).
    """
    p = np.asarray(spec.param if p is None else p, dtype=float)
    if method == "closed" or (method == "auto" and spec.closed_form is not None):
        return _closed_roots(spec, m, p)
    return _generic_roots(spec, m, p, **kw)


# ---------------------------------------------------------------------------
# transversality

@dataclass
class Crossing:
    rate: float          # d Re(lam) / d r
    inverse: float       # Re (d lam / d r)^{-1}, same sign as rate

    @property
    def sign(self) -> int:
        return int(np.sign(self.rate))


def transversality(spec: ModelSpec, m: int, p, z: float) -> Crossing:
    """Speed at which the root ``i z`` crosses the axis as the delay grows."""
    _require_delay_param(spec)
    p = np.asarray(p, dtype=float)
    sl = CharSlice(spec, m, p)
    lam = 1j * z
    M = sl.matrix(lam)
    r = sl.r[spec.delay_slot]
    d_lam = det_derivative(M, sl.dmatrix(lam))
    d_r = det_derivative(M, lam * np.exp(-lam * r) * sl.G[spec.delay_slot])
    deriv = -d_r / d_lam
    return Crossing(float(deriv.real), float((1.0 / deriv).real))


# ---------------------------------------------------------------------------
# Hopf curves in the parameter plane

@dataclass
class HopfBranch:
    """Critical delay of mode ``m`` as a function of the other parameter.

    ``samples`` has columns (swept value, critical delay, frequency,
    crossing direction, residual); missing roots are NaN.
    """

    spec: ModelSpec
    m: int
    label: str
    j: int
    sweep_index: int
    samples: np.ndarray
    method: str = "auto"

    def evaluate(self, s: float) -> tuple:
        p = np.array(self.spec.param, dtype=float)
        p[self.sweep_index] = s
        roots = imaginary_roots(self.spec, self.m, p, method=self.method)
        root = _pick(roots, self.label)
        if root is None:
            return math.nan, math.nan
        return root.delay + 2 * math.pi * self.j / root.z, root.z

    def to_csv(self, path):
        names = self.spec.param_names
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([names[self.sweep_index], names[self.spec.delay_param], "frequency",
                        "crossing_sign", "residual"])
            for row in self.samples:
                w.writerow([f"{x:.12g}" for x in row])


def _pick(roots, label):
    for root in roots:
        if root.label == label:
            return root
    return None


def hopf_curve(spec: ModelSpec, m: int, sweep, label: Optional[str] = None, j: int = 0,
               method: str = "auto") -> HopfBranch:
    """Trace one Hopf branch of mode ``m`` over the swept parameter values."""
    _require_delay_param(spec)
    sweep_index = 1 - spec.delay_param
    sweep = np.asarray(sweep, dtype=float)
    rows = []
    for s in sweep:
        p = np.array(spec.param, dtype=float)
        p[sweep_index] = s
        roots = imaginary_roots(spec, m, p, method=method)
        if label is None and roots:
            label = roots[-1].label
        root = _pick(roots, label)
        if root is None:
            rows.append([s, np.nan, np.nan, np.nan, np.nan])
            continue
        r = root.delay + 2 * math.pi * j / root.z
        q = _with_delay(spec, p, r)
        sign = transversality(spec, m, q, root.z).sign
        rows.append([s, r, root.z, sign, root.residual])
    return HopfBranch(spec, m, label or "", j, sweep_index, np.array(rows), method)


def hopf_branches(spec: ModelSpec, m: int, sweep, j_max: int = 0, method: str = "auto") -> list:
    """All branches of mode ``m`` found anywhere on the sweep."""
    labels = []
    for s in np.asarray(sweep, dtype=float):
        p = np.array(spec.param, dtype=float)
        p[1 - spec.delay_param] = s
        for root in imaginary_roots(spec, m, p, method=method):
            if root.label not in labels:
                labels.append(root.label)
    return [hopf_curve(spec, m, sweep, label=lab, j=j, method=method)
            for lab in labels for j in range(j_max + 1)]


@dataclass
class DoubleHopfPoint:
    """Two pairs ``+-i freqs[0]``, ``+-i freqs[1]`` on the axis at once.

    ``freqs`` are in the model's own time unit with ``freqs[0] < freqs[1]``;
    ``modes`` are the matching wave numbers.
    """

    model: str
    param: np.ndarray
    param_names: tuple
    modes: tuple
    freqs: tuple
    labels: tuple = ("", "")
    branches: tuple = (0, 0)
    residuals: tuple = (0.0, 0.0)
    extra: dict = field(default_factory=dict)

    def swapped(self) -> "DoubleHopfPoint":
        """The same point with the two critical pairs listed in reverse order."""
        def rev(t):
            return tuple(reversed(t))
        return DoubleHopfPoint(self.model, self.param.copy(), self.param_names, rev(self.modes),
                               rev(self.freqs), rev(self.labels), rev(self.branches),
                               rev(self.residuals), dict(self.extra))

    def to_dict(self):
        return {
            "model": self.model,
            "param": dict(zip(self.param_names, map(float, self.param))),
            "modes": list(map(int, self.modes)),
            "frequencies": list(map(float, self.freqs)),
            "labels": list(self.labels),
            "branches": list(map(int, self.branches)),
            "residuals": list(map(float, self.residuals)),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def find_double_hopf(branch_a: HopfBranch, branch_b: HopfBranch, tol: float = 1e-10) -> list:
    """Crossings of two Hopf branches, refined to ``tol`` in the swept value."""
    spec = branch_a.spec
    sa, sb = branch_a.samples, branch_b.samples
    if not np.array_equal(sa[:, 0], sb[:, 0]):
        raise ValueError("branches must share the sweep grid")
    gap = sa[:, 1] - sb[:, 1]

    def diff(s):
        return branch_a.evaluate(s)[0] - branch_b.evaluate(s)[0]

    points = []
    for i in range(len(gap) - 1):
        if not (np.isfinite(gap[i]) and np.isfinite(gap[i + 1])):
            continue
        if gap[i] == 0.0 or gap[i] * gap[i + 1] < 0:
            if gap[i] == 0.0:
                s = sa[i, 0]
            else:
                s = brentq(diff, sa[i, 0], sa[i + 1, 0], xtol=tol * 1e-2, rtol=1e-15)
            ra, za = branch_a.evaluate(s)
            rb, zb = branch_b.evaluate(s)
            p = np.array(spec.param, dtype=float)
            p[branch_a.sweep_index] = s
            p[spec.delay_param] = 0.5 * (ra + rb)
            res = tuple(abs(char_residual(CharSlice(spec, br.m, p), 1j * z))
                        for br, z in ((branch_a, za), (branch_b, zb)))
            pairs = sorted([(za, branch_a, res[0]), (zb, branch_b, res[1])], key=lambda t: t[0])
            points.append(DoubleHopfPoint(
                spec.name, p, spec.param_names,
                tuple(t[1].m for t in pairs), tuple(t[0] for t in pairs),
                tuple(t[1].label for t in pairs), tuple(t[1].j for t in pairs),
                tuple(t[2] for t in pairs)))
    points.sort(key=lambda pt: pt.param[branch_a.sweep_index])
    return points


# ---------------------------------------------------------------------------
# genericity checks

@dataclass
class NondegeneracyReport:
    checks: dict
    counts: dict
    tail_mode: int

    @property
    def ok(self):
        return all(passed for passed, _ in self.checks.values())

    def failed(self):
        return [k for k, (passed, _) in self.checks.items() if not passed]

    def to_dict(self):
        return {"ok": self.ok,
                "checks": {k: {"passed": bool(v[0]), "value": v[1]} for k, v in self.checks.items()},
                "root_counts": {str(k): v for k, v in self.counts.items()},
                "tail_mode": self.tail_mode}


def contour_moments(sl: CharSlice, height: float, width: float = 1e-2, kmax: int = 0,
                    spacing=None) -> np.ndarray:
    """Moments ``(1/2 pi i) \\oint lam^k det'/det`` around the strip
    ``[-width, width] x [-height, height]`` for ``k = 0..kmax``.

    Moment 0 is the winding number.  Trapezoidal rule on each side with the
    logarithmic derivative evaluated as ``tr(Delta^{-1} Delta')``.
    """
    h = width / 8 if spacing is None else spacing
    corners = [complex(width, -height), complex(width, height),
               complex(-width, height), complex(-width, -height)]
    total = np.zeros(kmax + 1, dtype=complex)
    powers = np.arange(kmax + 1)[:, None]
    for a, b in zip(corners, corners[1:] + corners[:1]):
        npts = max(int(math.ceil(abs(b - a) / h)), 16) + 1
        lam = a + (b - a) * np.linspace(0.0, 1.0, npts)
        logd = np.trace(np.linalg.solve(sl.matrix(lam), sl.dmatrix(lam)), axis1=-2, axis2=-1)
        total += np.trapezoid(lam[None, :] ** powers * logd[None, :], lam, axis=1)
    return total / (2j * math.pi)


def count_roots_near_axis(sl: CharSlice, height: float, width: float = 1e-2) -> float:
    """Winding number of ``det Delta_m`` around the strip."""
    return float(contour_moments(sl, height, width)[0].real)


def _newton_root(sl, lam, iters=50):
    for _ in range(iters):
        M = sl.matrix(lam)
        try:
            step = 1.0 / np.trace(np.linalg.solve(M, sl.dmatrix(lam)))
        except np.linalg.LinAlgError:
            break                         # landed exactly on the root
        lam = lam - step
        if abs(step) < 1e-14 * max(1.0, abs(lam)):
            break
    return complex(lam)


def roots_in_strip(sl: CharSlice, height: float, width: float = 1e-2) -> np.ndarray:
    """Locate every root in the strip: moments give a polynomial whose
    roots are then polished by Newton's method on ``det``."""
    count = int(round(contour_moments(sl, height, width)[0].real))
    if count <= 0:
        return np.array([], dtype=complex)
    s = contour_moments(sl, height, width, kmax=count)
    e = [1.0 + 0j]
    for k in range(1, count + 1):
        e.append(sum((-1) ** (i - 1) * e[k - i] * s[i] for i in range(1, k + 1)) / k)
    poly = [(-1) ** k * e[k] for k in range(count + 1)]
    return np.array([_newton_root(sl, lam) for lam in np.roots(poly)])


def verify_nondegeneracy(spec: ModelSpec, point: DoubleHopfPoint, resonance_tol: float = 1e-3,
                         width: float = 1e-2, height: Optional[float] = None,
                         m_max: Optional[int] = None, axis_tol: float = 1e-9) -> NondegeneracyReport:
    """Check simple isolated imaginary roots, non-resonance and mode ordering.

    Modes at or beyond ``tail_mode`` are certified root-free in the closed
    right half plane by a norm bound.  Below it, every root in a thin strip
    around the imaginary axis is located; apart from the four critical roots
    each must have a real part larger than ``axis_tol`` in size.
    """
    p = np.asarray(point.param, dtype=float)
    z1, z2 = point.freqs
    n1, n2 = point.modes
    checks = {}

    ratio = min(z1, z2) / max(z1, z2)
    worst = min(abs(ratio - i / j) for j in range(1, 5) for i in range(1, j + 1))
    checks["distinct_frequencies"] = (z1 != z2, float(abs(z2 - z1)))
    checks["non_resonant"] = (worst > resonance_tol, float(ratio))
    checks["wave_order"] = (n1 <= n2, [int(n1), int(n2)])

    d = np.asarray(spec.diffusion(p), dtype=float)
    bound = _spectral_bound(spec, p, slack=width)
    tail_bound = _spectral_bound(spec, p)
    tail = int(math.floor(spec.domain_scale * math.sqrt(tail_bound / d.min()))) + 1
    if m_max is not None:
        tail = min(tail, m_max + 1)
    omega = height if height is not None else max(4 * z2, bound + 1.0)
    critical = {n1: [z1], n2: [z2]} if n1 != n2 else {n1: [z1, z2]}
    if n1 > n2:
        n1, n2 = n2, n1

    counts, ok = {}, True
    for m in range(tail):
        sl = CharSlice(spec, m, p)
        w = width
        for _ in range(2):
            wind = count_roots_near_axis(sl, omega, w)
            if abs(wind - round(wind)) < 0.1:
                break
            w *= 2                        # contour passes too close to a root
        targets = [s * 1j * z for z in critical.get(m, []) for s in (1, -1)]
        entry = {"expected": len(targets), "winding": float(wind)}
        if abs(wind - round(wind)) >= 0.1:
            ok = False
        elif round(wind) != len(targets):
            found = roots_in_strip(sl, omega, w)
            hits = [t for t in targets if np.any(np.abs(found - t) < 1e-6 * (1 + abs(t)))]
            others = [lam for lam in found if np.min(np.abs(lam - np.array(targets + [np.inf]))) > 1e-6]
            entry["nearby_roots"] = [[float(lam.real), float(lam.imag)] for lam in others]
            if len(hits) != len(targets) or any(abs(lam.real) <= axis_tol for lam in others):
                ok = False
        counts[m] = entry
    checks["simple_isolated_roots"] = (ok, {m: c["winding"] for m, c in counts.items()})
    return NondegeneracyReport(checks, counts, tail)


def require_nondegenerate(report: NondegeneracyReport):
    if not report.ok:
        raise HypothesisFailure(",".join(report.failed()))
    return report
