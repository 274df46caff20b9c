"""Planar amplitude equations of a truncated double Hopf normal form.

In polar coordinates the cubic normal form decouples into

    r1' = r1 (c1 + r1^2 + b0 r2^2)
    r2' = r2 (c2 + c0 r1^2 + d0 r2^2)

after rescaling amplitudes and, when the first cubic coefficient is
negative, reversing time.  ``eps1`` records that reversal; stability reported
here always refers to forward physical time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDegeneracy

# sign pattern (d0, b0, c0, d0 - b0 c0) -> case label
CASE_TABLE = {
    (1, 1, 1, 1): "Ia", (1, 1, 1, -1): "Ib",
    (1, 1, -1, 1): "II",
    (1, -1, 1, 1): "III",
    (1, -1, -1, 1): "IVa", (1, -1, -1, -1): "IVb",
    (-1, 1, 1, -1): "V",
    (-1, 1, -1, 1): "VIa", (-1, 1, -1, -1): "VIb",
    (-1, -1, 1, 1): "VIIa", (-1, -1, 1, -1): "VIIb",
    (-1, -1, -1, -1): "VIII",
}

# phase portraits for eps1 = -1; with eps1 = +1 every stability is reversed
REGION_NOTES = {
    "Ib": {
        "D1": "equilibrium stable",
        "D2": "stable periodic solution with the first wave number",
        "D3": "stable periodic solution with the first wave number, the second one unstable",
        "D4": "two stable periodic solutions with different wave numbers coexist",
        "D5": "stable periodic solution with the second wave number, the first one unstable",
        "D6": "stable periodic solution with the second wave number",
    },
    "VIa": {
        "D1": "equilibrium unstable, no small-amplitude attractor",
        "D2": "equilibrium stable",
        "D3": "stable periodic solution with the first frequency",
        "D4": "stable quasi-periodic solution on a 2-torus",
        "D5/D6": ("2-torus unstable; a 3-torus born on the torus-Hopf line (D5) is lost "
                  "through a heteroclinic cycle (D6), the two sectors separating only "
                  "beyond leading order"),
        "D7": "both periodic solutions unstable, no small-amplitude attractor",
        "D8": "equilibrium a source, no small-amplitude attractor",
    },
}


class DegenerateUnfolding(NumericalDegeneracy):
    """A sign needed for classification is numerically zero."""

    def __init__(self, quantity, value):
        super().__init__(f"{quantity} = {value:.3g} is too close to zero")
        self.quantity = quantity
        self.value = value


@dataclass
class AmplitudeSystem:
    """Planar reduction plus the affine map ``alpha -> (c1, c2)``.

    ``alpha`` is the offset of the model parameters from ``param0``.
    """

    eps1: int
    eps2: int
    b0: float
    c0: float
    d0: int
    c_matrix: np.ndarray
    param0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    param_names: tuple = ("p1", "p2")

    @property
    def disc(self) -> float:
        return self.d0 - self.b0 * self.c0

    def c_of(self, alpha) -> np.ndarray:
        return self.c_matrix @ np.asarray(alpha, float)

    def c_at(self, param) -> np.ndarray:
        return self.c_of(np.asarray(param, float) - self.param0)

    def alpha_of(self, c) -> np.ndarray:
        return np.linalg.solve(self.c_matrix, np.asarray(c, float))

    def rhs(self, r, c):
        """Forward-time vector field of the amplitudes."""
        r1, r2 = r
        c1, c2 = c
        f1 = r1 * (c1 + r1**2 + self.b0 * r2**2)
        f2 = r2 * (c2 + self.c0 * r1**2 + self.d0 * r2**2)
        return self.eps1 * np.array([f1, f2])

    def jacobian(self, r, c):
        r1, r2 = r
        c1, c2 = c
        j = np.array([[c1 + 3 * r1**2 + self.b0 * r2**2, 2 * self.b0 * r1 * r2],
                      [2 * self.c0 * r1 * r2, c2 + self.c0 * r1**2 + 3 * self.d0 * r2**2]])
        return self.eps1 * j

    def to_dict(self):
        return {"eps1": self.eps1, "eps2": self.eps2, "b0": self.b0, "c0": self.c0,
                "d0": self.d0, "disc": self.disc, "c_matrix": self.c_matrix.tolist(),
                "param0": np.asarray(self.param0).tolist(), "param_names": list(self.param_names)}


def reduce(coeffs, tol=1e-10, param0=None, param_names=None) -> AmplitudeSystem:
    """Amplitude system from normal form coefficients.

    ``coeffs`` is either a mapping with keys B11 ... B1110 or an object with
    such a ``coeffs`` mapping (a normal form result).
    """
    if hasattr(coeffs, "coeffs"):
        param0 = coeffs.param if param0 is None else param0
        param_names = coeffs.param_names if param_names is None else param_names
        coeffs = coeffs.coeffs
    a21, a12 = coeffs["B2100"].real, coeffs["B1011"].real
    a03, a30 = coeffs["B0021"].real, coeffs["B1110"].real
    for name, v in (("Re B2100", a21), ("Re B0021", a03)):
        if abs(v) < tol:
            raise DegenerateUnfolding(name, v)
    e1, e2 = int(np.sign(a21)), int(np.sign(a03))
    M = e1 * np.array([[coeffs["B11"].real, coeffs["B21"].real],
                       [coeffs["B13"].real, coeffs["B23"].real]])
    return AmplitudeSystem(e1, e2, e1 * e2 * a12 / a03, a30 / a21, e1 * e2, M,
                           np.zeros(2) if param0 is None else np.asarray(param0, float),
                           tuple(param_names) if param_names else ("p1", "p2"))


# ---------------------------------------------------------------------------
# classification and critical lines

@dataclass
class CriticalLine:
    """A half-line from the origin of the ``(c1, c2)`` plane."""

    name: str
    direction: np.ndarray
    meaning: str
    exact: bool = True

    def angle(self) -> float:
        return math.atan2(self.direction[1], self.direction[0]) % (2 * math.pi)


@dataclass
class UnfoldingClass:
    label: str
    signs: tuple
    lines: list
    regions: list

    @property
    def region_count(self) -> int:
        return sum(len(r.split("/")) for r in self.regions)

    def to_dict(self):
        return {"label": self.label, "signs": list(self.signs), "regions": self.regions,
                "lines": [{"name": ln.name, "direction": ln.direction.tolist(),
                           "meaning": ln.meaning, "exact": ln.exact} for ln in self.lines]}


def sign_pattern(amp: AmplitudeSystem, tol=1e-9) -> tuple:
    out = []
    for name, v in (("d0", amp.d0), ("b0", amp.b0), ("c0", amp.c0), ("d0 - b0 c0", amp.disc)):
        if abs(v) < tol:
            raise DegenerateUnfolding(name, v)
        out.append(int(np.sign(v)))
    return tuple(out)


def _unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def critical_lines(amp: AmplitudeSystem) -> list:
    """Axes plus every secondary half-line on which a branch of equilibria
    meets a semi-axis branch, in counterclockwise order from the positive
    ``c1`` axis."""
    b0, c0, d0 = amp.b0, amp.c0, amp.d0
    lines = [CriticalLine("c1+", np.array([1.0, 0.0]), "Hopf of the second mode"),
             CriticalLine("c2+", np.array([0.0, 1.0]), "Hopf of the first mode"),
             CriticalLine("c1-", np.array([-1.0, 0.0]), "Hopf of the second mode"),
             CriticalLine("c2-", np.array([0.0, -1.0]), "Hopf of the first mode")]
    # mixed branch leaves the first-mode branch (c1 < 0) along c2 = c0 c1
    lines.append(CriticalLine("c2=c0*c1", _unit([-1.0, -c0]),
                              "torus branch meets the first-mode periodic branch"))
    # and the second-mode branch (c2 / d0 < 0) along c1 = b0 c2 / d0
    c2 = -d0
    lines.append(CriticalLine("c1=b0*c2/d0", _unit([b0 * c2 / d0, c2]),
                              "torus branch meets the second-mode periodic branch"))
    if amp.d0 < 0 and amp.disc > 0 and amp.b0 > 0:
        # a Hopf bifurcation of the torus branch, known only to leading order
        s = (c0 - 1) / (b0 + 1)
        lines.append(CriticalLine("c2=(c0-1)/(b0+1)*c1", _unit([-1.0, -s]),
                                  "secondary Hopf of the torus branch", exact=False))
    return sorted(lines, key=CriticalLine.angle)


def _sectors(lines):
    angles = [ln.angle() for ln in lines]
    out = []
    for i, ln in enumerate(lines):
        nxt = lines[(i + 1) % len(lines)]
        out.append((ln.name, nxt.name, angles[i]))
    return out


def classify(amp: AmplitudeSystem, tol=1e-9) -> UnfoldingClass:
    signs = sign_pattern(amp, tol)
    label = CASE_TABLE.get(signs)
    if label is None:
        raise DegenerateUnfolding("sign pattern", float("nan"))
    lines = critical_lines(amp)
    regions = _region_names(label, lines)
    return UnfoldingClass(label, signs, lines, regions)


def _region_names(label, lines):
    """Names of the sectors between consecutive lines, counterclockwise.

    Case VIa starts below the positive ``c1`` axis.  Its sector after the
    approximate torus-Hopf line holds two regions whose separating curve is
    tangent to that line, so it carries a double name.
    """
    n = len(lines)
    first = "c2-" if label == "VIa" else "c1+"
    start = next(i for i, ln in enumerate(lines) if ln.name == first)
    names, label_no = [None] * n, 1
    for k in range(n):
        i = (start + k) % n
        if label == "VIa" and not lines[i].exact:
            names[i] = f"D{label_no}/D{label_no + 1}"
            label_no += 2
        else:
            names[i] = f"D{label_no}"
            label_no += 1
    return names


@dataclass
class RegionReport:
    region: str
    c: tuple
    note: str
    equilibria: list

    def to_dict(self):
        return {"region": self.region, "c": list(self.c), "note": self.note,
                "equilibria": [e.to_dict() for e in self.equilibria]}


def region_of(amp: AmplitudeSystem, cls: UnfoldingClass, alpha, tol=1e-9) -> RegionReport:
    """Region containing parameter offset ``alpha`` and what lives there."""
    c = amp.c_of(alpha)
    if np.linalg.norm(c) < tol:
        raise ValueError("query point is the double Hopf point itself")
    ang = math.atan2(c[1], c[0]) % (2 * math.pi)
    for ln in cls.lines:
        d = abs(math.remainder(ang - ln.angle(), 2 * math.pi))
        if d * np.linalg.norm(c) < tol:
            raise ValueError(f"query point lies on line {ln.name}")
    angles = [ln.angle() for ln in cls.lines]
    k = max((i for i, a in enumerate(angles) if a <= ang), default=len(angles) - 1)
    name = cls.regions[k]
    note = REGION_NOTES.get(cls.label, {}).get(name, "")
    if note and amp.eps1 > 0:
        note = "with time reversed: " + note
    return RegionReport(name, (float(c[0]), float(c[1])), note, amplitude_flow(amp, *c))


# ---------------------------------------------------------------------------
# equilibria of the amplitude equations

@dataclass
class AmplitudeEquilibrium:
    kind: str
    r: tuple
    eigenvalues: tuple

    @property
    def stable(self) -> bool:
        return all(ev.real < 0 for ev in self.eigenvalues)

    @property
    def stability(self) -> str:
        re = [ev.real for ev in self.eigenvalues]
        if all(x < 0 for x in re):
            return "stable"
        if all(x > 0 for x in re):
            return "unstable"
        if any(x == 0 for x in re):
            return "degenerate"
        return "saddle"

    def to_dict(self):
        return {"kind": self.kind, "r": list(self.r), "stability": self.stability,
                "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues]}


def amplitude_flow(amp: AmplitudeSystem, c1: float, c2: float) -> list:
    """Equilibria with non-negative amplitudes and their forward-time
    stability.

    ``origin`` is the steady state, ``mode1``/``mode2`` are periodic orbits
    carried by a single critical mode and ``mixed`` is an invariant 2-torus.
    """
    c = (c1, c2)
    cands = [("origin", 0.0, 0.0)]
    if -c1 > 0:
        cands.append(("mode1", -c1, 0.0))
    if -c2 / amp.d0 > 0:
        cands.append(("mode2", 0.0, -c2 / amp.d0))
    if abs(amp.disc) < 1e-14:
        raise NumericalDegeneracy("interior amplitude system is singular")
    s1, s2 = np.linalg.solve([[1.0, amp.b0], [amp.c0, amp.d0]], [-c1, -c2])
    if s1 > 0 and s2 > 0:
        cands.append(("mixed", s1, s2))
    out = []
    for kind, s1, s2 in cands:
        r = (math.sqrt(s1), math.sqrt(s2))
        ev = np.linalg.eigvals(amp.jacobian(r, c))
        out.append(AmplitudeEquilibrium(kind, r, tuple(complex(e) for e in ev)))
    return out


# ---------------------------------------------------------------------------
# export

def lines_in_parameters(amp: AmplitudeSystem, cls: UnfoldingClass, length=1.0) -> list:
    """Each critical half-line as a segment in ``alpha`` and original
    parameter coordinates.  ``length`` is the extent in ``c`` space."""
    rows = []
    for ln in cls.lines:
        alpha_dir = amp.alpha_of(ln.direction)
        rows.append({"name": ln.name, "meaning": ln.meaning, "exact": ln.exact,
                     "alpha_dir": alpha_dir,
                     "alpha_end": alpha_dir * length,
                     "param_end": amp.param0 + alpha_dir * length})
    return rows


def slope_in_parameters(amp: AmplitudeSystem, line: CriticalLine, x=1, y=0) -> float:
    """``d param[x] / d param[y]`` along a line: the ``k`` in
    ``param[y] = (param[x] - x0) / k + y0``."""
    a = amp.alpha_of(line.direction)
    if abs(a[y]) < 1e-300:
        return math.inf
    return a[x] / a[y]


def bifurcation_lines(amp: AmplitudeSystem, cls: UnfoldingClass) -> list:
    """Secondary lines only (the axes are the two Hopf curves)."""
    if abs(np.linalg.det(amp.c_matrix)) < 1e-14 * max(1.0, np.abs(amp.c_matrix).max() ** 2):
        raise NumericalDegeneracy("parameter directions degenerate")
    return [ln for ln in cls.lines if ln.name not in ("c1+", "c1-", "c2+", "c2-")]


def lines_to_csv(amp: AmplitudeSystem, cls: UnfoldingClass, path, length=1.0):
    names = amp.param_names
    with open(path, "w") as fh:
        fh.write(f"line,exact,alpha1,alpha2,{names[0]},{names[1]}\n")
        for row in lines_in_parameters(amp, cls, length):
            for t in (0.0, 1.0):
                a = row["alpha_end"] * t
                p = amp.param0 + a
                fh.write(f"{row['name']},{int(row['exact'])},{a[0]:.12g},{a[1]:.12g},"
                         f"{p[0]:.12g},{p[1]:.12g}\n")
            fh.write("\n")


def gnuplot_script(amp: AmplitudeSystem, csv_path, title="bifurcation set") -> str:
    x, y = amp.param_names[1], amp.param_names[0]
    return "\n".join([
        "set datafile separator ','",
        f"set title '{title}'",
        f"set xlabel '{x}'",
        f"set ylabel '{y}'",
        "set key outside",
        f"plot '{csv_path}' every ::1 using 6:5 with lines title 'critical lines'",
        "",
    ])


def report(amp: AmplitudeSystem, cls: UnfoldingClass) -> str:
    payload = {"amplitude": amp.to_dict(), "class": cls.to_dict()}
    return json.dumps(payload, indent=2)
