"""Model descriptions for reaction-diffusion systems with discrete delays.

A model is written around a constant equilibrium that has been moved to the
origin::

    du/dt = D(p) Laplacian(u) + A(p) u(t) + sum_k G_k(p) u(t - r_k) + F(p, u_t)

on ``(0, l*pi)`` with Neumann boundary conditions.  ``p`` is a pair of real
bifurcation parameters.

Histories are passed around as arrays ``hist`` of shape ``(m + 1, n, ...)``:
``hist[0]`` is the state at lag 0 and ``hist[k]`` the state at lag ``r_k``.
Trailing axes are allowed so that the same callables serve the simulator.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np


@dataclass
class ModelSpec:
    """Everything the analysis modules need to know about a model.

    Callables take the parameter pair ``p`` as a length-2 array.
    ``diffusion`` returns the diagonal of D, ``linear_delayed`` a stack of
    shape ``(m, n, n)``.  ``reaction`` is the full nonlinear remainder F and
    ``reaction_d2`` / ``reaction_d3`` its symmetric second and third
    derivatives at zero, when known in closed form.

    ``delay_param`` / ``delay_slot`` record that parameter ``p[delay_param]``
    is the delay ``delays(p)[delay_slot]``; Hopf curves are traced by solving
    for that parameter.
    """

    name: str
    n_components: int
    domain_scale: float
    param: np.ndarray
    delays: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    linear_now: Callable[[np.ndarray], np.ndarray]
    linear_delayed: Callable[[np.ndarray], np.ndarray]
    reaction: Callable[[np.ndarray, np.ndarray], np.ndarray]
    reaction_d2: Optional[Callable] = None
    reaction_d3: Optional[Callable] = None
    param_names: tuple = ("p1", "p2")
    delay_param: Optional[int] = None
    delay_slot: Optional[int] = None
    derivatives: Optional[Callable] = None
    delay_gradient: Optional[Callable] = None
    equilibrium: Optional[Callable] = None
    closed_form: Optional[object] = None
    time_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n_delays(self) -> int:
        return len(np.atleast_1d(self.delays(self.param)))

    def with_param(self, p) -> "ModelSpec":
        return replace(self, param=np.asarray(p, dtype=float))


@dataclass
class DelayedLinear:
    """A linear delayed operator ``L(phi) = A phi(0) + sum_k G_k phi(-r_k)``."""

    now: np.ndarray
    delayed: np.ndarray
    delays: np.ndarray

    def apply(self, hist):
        out = self.now @ hist[0]
        for k, g in enumerate(self.delayed):
            out = out + g @ hist[k + 1]
        return out

    def symbol(self, lam):
        """Matrix ``A + sum_k G_k exp(-lam r_k)``."""
        out = self.now.astype(complex)
        for g, r in zip(self.delayed, self.delays):
            out = out + g * np.exp(-lam * r)
        return out


@dataclass
class ParamExpansion:
    """First-order expansion of the linear data around ``param``.

    ``dD[i]``, ``L1[i]`` are derivatives with respect to ``p[i]``.
    """

    param: np.ndarray
    D0: np.ndarray
    dD: np.ndarray
    L0: DelayedLinear
    L1: tuple


@dataclass
class ValidationReport:
    checks: dict

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def failures(self):
        return {k: v for k, (passed, v) in self.checks.items() if not passed}


class ModelError(ValueError):
    pass


def history_of_mode(vec, lam, delays):
    """Evaluations of ``theta -> vec * exp(lam * theta)`` at 0 and each lag."""
    lags = np.concatenate([[0.0], np.asarray(delays, dtype=float)])
    return np.exp(-lam * lags)[:, None] * np.asarray(vec, dtype=complex)[None, :]


# ---------------------------------------------------------------------------
# multilinear derivatives of the reaction term

def _fd_step(*dirs):
    scale = max(float(np.max(np.abs(d))) for d in dirs)
    return scale


def _second_form(spec, p, u, v):
    if spec.reaction_d2 is not None:
        return np.asarray(spec.reaction_d2(p, u, v))
    # complex arguments by bilinearity, real ones by polarisation
    if np.iscomplexobj(u) or np.iscomplexobj(v):
        ur, ui = np.real(u), np.imag(u)
        vr, vi = np.real(v), np.imag(v)
        return (_second_form(spec, p, ur, vr) - _second_form(spec, p, ui, vi)
                + 1j * (_second_form(spec, p, ur, vi) + _second_form(spec, p, ui, vr)))

    def quad(w):
        s = _fd_step(w)
        if s == 0.0:
            return np.zeros(spec.n_components)
        h = 1e-5 * (1.0 + s) / s
        return (spec.reaction(p, h * w) + spec.reaction(p, -h * w)
                - 2.0 * spec.reaction(p, 0.0 * w)) / h**2

    return 0.25 * (quad(u + v) - quad(u - v))


def _third_form(spec, p, u, v, w):
    if spec.reaction_d3 is not None:
        return np.asarray(spec.reaction_d3(p, u, v, w))
    if any(np.iscomplexobj(x) for x in (u, v, w)):
        parts = [(np.real(x), np.imag(x)) for x in (u, v, w)]
        out = 0j
        for idx in itertools.product((0, 1), repeat=3):
            coef = 1j ** sum(idx)
            args = [parts[i][j] for i, j in enumerate(idx)]
            out = out + coef * _third_form(spec, p, *args)
        return out

    def cube(x):
        s = _fd_step(x)
        if s == 0.0:
            return np.zeros(spec.n_components)
        h = 1e-3 * (1.0 + s) / s
        f = spec.reaction
        return (f(p, 2 * h * x) - 2 * f(p, h * x) + 2 * f(p, -h * x) - f(p, -2 * h * x)) / (2 * h**3)

    total = 0.0
    for signs in itertools.product((1, -1), repeat=3):
        total = total + np.prod(signs) * cube(signs[0] * u + signs[1] * v + signs[2] * w)
    return total / 48.0


def multilinear(spec: ModelSpec, p, hists: Sequence[np.ndarray]) -> np.ndarray:
    """Symmetric derivative ``D^k F(0)[h_1, ..., h_k]`` for k = 2 or 3."""
    p = np.asarray(p, dtype=float)
    if len(hists) == 2:
        return _second_form(spec, p, *hists)
    if len(hists) == 3:
        return _third_form(spec, p, *hists)
    raise ValueError("only second and third derivatives are supported")


def taylor_coeff(spec: ModelSpec, p, q: Sequence[int], mode_hists: Sequence[np.ndarray]) -> np.ndarray:
    """Coefficient of ``z^q`` in ``F(sum_k z_k phi_k)``.

    Equals ``(|q|! / prod q_k!) D^|q| F(phi_1^{q_1}, ..., phi_4^{q_4})``.
    """
    args = []
    for k, mult in enumerate(q):
        args.extend([mode_hists[k]] * mult)
    weight = math.factorial(sum(q)) / math.prod(math.factorial(x) for x in q)
    return weight * multilinear(spec, p, args)


# ---------------------------------------------------------------------------
# linear data and its parameter derivatives

def linear_part(spec: ModelSpec, p) -> DelayedLinear:
    p = np.asarray(p, dtype=float)
    return DelayedLinear(
        np.asarray(spec.linear_now(p), dtype=float),
        np.asarray(spec.linear_delayed(p), dtype=float).reshape(-1, spec.n_components, spec.n_components),
        np.atleast_1d(np.asarray(spec.delays(p), dtype=float)),
    )


def expand_at(spec: ModelSpec, p0=None, h: float = 1e-5) -> ParamExpansion:
    """Linear data at ``p0`` with first derivatives in each parameter.

    Uses the model's analytic derivatives when available, otherwise central
    differences with step ``h`` (relative to ``1 + |p_i|``).
    """
    p0 = np.asarray(spec.param if p0 is None else p0, dtype=float)
    L0 = linear_part(spec, p0)
    D0 = np.asarray(spec.diffusion(p0), dtype=float)
    if spec.derivatives is not None:
        dD, dA, dG = spec.derivatives(p0)
        L1 = tuple(DelayedLinear(np.asarray(dA[i], float), np.asarray(dG[i], float), L0.delays)
                   for i in range(2))
        return ParamExpansion(p0, D0, np.asarray(dD, float), L0, L1)
    dD, L1 = [], []
    for i in range(2):
        step = h * (1.0 + abs(p0[i]))
        e = np.zeros(2)
        e[i] = step
        lp, lm = linear_part(spec, p0 + e), linear_part(spec, p0 - e)
        dD.append((np.asarray(spec.diffusion(p0 + e)) - np.asarray(spec.diffusion(p0 - e))) / (2 * step))
        L1.append(DelayedLinear((lp.now - lm.now) / (2 * step), (lp.delayed - lm.delayed) / (2 * step), L0.delays))
    return ParamExpansion(p0, D0, np.array(dD), L0, tuple(L1))


def validate_model(spec: ModelSpec, p=None, tol: float = 1e-8, seed: int = 0) -> ValidationReport:
    """Structural checks: positive diffusion, F(0)=0, DF(0)=0, symmetric forms."""
    p = np.asarray(spec.param if p is None else p, dtype=float)
    n, m = spec.n_components, spec.n_delays
    rng = np.random.default_rng(seed)
    checks = {}
    diff = np.asarray(spec.diffusion(p), dtype=float)
    checks["diffusion_positive"] = (bool(np.all(diff > 0)) and diff.shape == (n,), float(np.min(diff)))
    r = np.atleast_1d(spec.delays(p))
    checks["delays_nonnegative"] = (bool(np.all(r >= 0)), float(np.min(r)))

    zero = np.zeros((m + 1, n))
    f0 = float(np.max(np.abs(spec.reaction(p, zero))))
    checks["reaction_vanishes"] = (f0 <= tol, f0)

    v = rng.standard_normal((m + 1, n))
    eps = 1e-6
    jac = float(np.max(np.abs(spec.reaction(p, eps * v) - spec.reaction(p, -eps * v)))) / (2 * eps)
    checks["reaction_has_no_linear_part"] = (jac <= 1e-6 * (1 + np.max(np.abs(v))), jac)

    a, b, c = (rng.standard_normal((m + 1, n)) for _ in range(3))
    s2 = float(np.max(np.abs(multilinear(spec, p, [a, b]) - multilinear(spec, p, [b, a]))))
    checks["second_form_symmetric"] = (s2 <= 1e-6, s2)
    t1 = multilinear(spec, p, [a, b, c])
    s3 = max(float(np.max(np.abs(t1 - multilinear(spec, p, perm))))
             for perm in ([b, a, c], [c, b, a], [a, c, b]))
    checks["third_form_symmetric"] = (s3 <= 1e-5, s3)

    if spec.reaction_d2 is not None:
        # the analytic form must agree with second differences of F
        hstep = 1e-4
        fd = (spec.reaction(p, hstep * a) + spec.reaction(p, -hstep * a) - 2 * spec.reaction(p, zero)) / hstep**2
        gap = float(np.max(np.abs(fd - spec.reaction_d2(p, a, a))))
        checks["second_form_matches_reaction"] = (gap <= 1e-4 * (1 + np.max(np.abs(fd))), gap)
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# closed forms for characteristic equations of the type
#   lam^2 + a lam + b + exp(-lam r) (c lam + e) = 0

class QuadraticDelayForm:
    """Closed-form imaginary roots for a quadratic-plus-delayed-linear factor.

    ``coefficients(n, p)`` must return ``(a, b, c, e)`` for wave number ``n``.
    The critical delay is the parameter ``p[delay_param]``.
    """

    def __init__(self, coefficients: Callable):
        self.coefficients = coefficients

    def quartic(self, n, p):
        a, b, c, e = self.coefficients(n, p)
        return a * a - 2 * b - c * c, b * b - e * e

    def frequencies(self, n, p):
        """Positive roots z of ``z^4 + P z^2 + Q = 0`` with labels."""
        P, Q = self.quartic(n, p)
        disc = P * P - 4 * Q
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        out = []
        for label, w2 in (("-", (-P - sq) / 2), ("+", (-P + sq) / 2)):
            if w2 > 0:
                out.append((math.sqrt(w2), label))
        if Q < 0:
            # one positive root only, label it plainly
            out = [(z, "") for z, lab in out if lab == "+"]
        return out

    def cos_sin(self, n, p, z):
        a, b, c, e = self.coefficients(n, p)
        den = e * e + (c * z) ** 2
        cos = -(a * c * z * z + (b - z * z) * e) / den
        sin = (a * z * e - (b - z * z) * c * z) / den
        return cos, sin

    def principal_delay(self, n, p, z):
        cos, sin = self.cos_sin(n, p, z)
        ang = math.acos(max(-1.0, min(1.0, cos)))
        if sin < 0:
            ang = 2 * math.pi - ang
        if ang == 0.0:
            ang = 2 * math.pi
        return ang / z

    def inverse_crossing(self, n, p, z):
        """Real part of ``(d lam / d r)^{-1}`` at ``lam = i z``."""
        a, b, c, e = self.coefficients(n, p)
        P, _ = self.quartic(n, p)
        return (2 * z * z + P) / ((c * z) ** 2 + e * e)


# ---------------------------------------------------------------------------
# built-in models

def _diag_stack(rows):
    return np.array([np.diag(r) for r in rows])


def builtin_epidemic(alpha=2.1, d=0.5, mu=0.5, gamma=0.1, beta=0.3, tau=1.0,
                     d1=0.05, d3=0.06, l=3.0, omega=0.5, d2=5.0) -> ModelSpec:
    """Age-structured epidemic with a maturation delay and an infection delay.

    Parameters are ``p = (omega, d2)``: the infection delay and the diffusion
    rate of infected immatures.  Components are (S, I, y) shifted by the
    positive equilibrium.
    """
    decay = math.exp(-d * tau)
    r0 = mu * alpha**2 * decay * (1 - decay) / (d * beta * (d + gamma))
    if r0 <= 1:
        raise ModelError(f"no positive equilibrium: R0 = {r0:.6g} <= 1")
    S = (d + gamma) / mu
    I = S * (r0 - 1)
    y = alpha * decay / beta
    eq = np.array([S, I, y])

    A = np.array([[-d, -mu * S + gamma, alpha],
                  [0.0, mu * S - d - gamma, 0.0],
                  [0.0, 0.0, -2 * beta * y]])
    G = np.array([[[-mu * I, 0, 0], [mu * I, 0, 0], [0, 0, 0]],
                  [[0, 0, -alpha * decay], [0, 0, 0], [0, 0, alpha * decay]]], dtype=float)
    zero3 = np.zeros((3, 3))

    def reaction(p, h):
        inf = mu * h[1][0] * h[0][1]
        return np.array([-inf, inf, -beta * h[0][2] ** 2])

    def d2form(p, u, v):
        inf = mu * (u[1][0] * v[0][1] + v[1][0] * u[0][1])
        return np.array([-inf, inf, -2 * beta * u[0][2] * v[0][2]])

    def d3form(p, u, v, w):
        return np.zeros(3, dtype=np.result_type(u, v, w))

    def derivatives(p):
        dD = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        return dD, np.array([zero3, zero3]), np.zeros((2, 2, 3, 3))

    def coefficients(n, p):
        k = (n / l) ** 2
        d2 = p[1]
        a = d + d1 * k + d2 * k
        b = d2 * k * (d + d1 * k)
        c = mu * I
        e = mu * I * (d2 * k + d)
        return a, b, c, e

    return ModelSpec(
        name="epidemic",
        n_components=3,
        domain_scale=float(l),
        param=np.array([omega, d2], dtype=float),
        delays=lambda p: np.array([p[0], tau]),
        diffusion=lambda p: np.array([d1, p[1], d3]),
        linear_now=lambda p: A,
        linear_delayed=lambda p: G,
        reaction=reaction,
        reaction_d2=d2form,
        reaction_d3=d3form,
        param_names=("omega", "d2"),
        delay_param=0,
        delay_slot=0,
        derivatives=derivatives,
        delay_gradient=lambda p: np.array([[1.0, 0.0], [0.0, 0.0]]),
        equilibrium=lambda p: eq.copy(),
        closed_form=QuadraticDelayForm(coefficients),
        meta={"R0": r0, "equilibrium": eq.tolist(),
              "constants": dict(alpha=alpha, d=d, mu=mu, gamma=gamma, beta=beta,
                                tau=tau, d1=d1, d3=d3, l=l)},
    )


def builtin_predprey(r2=1.0, a11=1.0, a12=1.2, a21=2.8, a22=1.0, d1=0.1, d2=0.2,
                     l=3.0, tau=10.0, r1=0.7) -> ModelSpec:
    """Diffusive predator-prey system with delayed prey self-limitation.

    Parameters are ``p = (tau, r1)``.  Components are (X, Y) shifted by the
    coexistence equilibrium, which moves with ``r1``.
    """
    den = a11 * a22 + a12 * a21

    def eq(p):
        r1v = p[1]
        return np.array([(r1v * a22 + r2 * a12) / den, (r1v * a21 - r2 * a11) / den])

    def linear_now(p):
        X, Y = eq(p)
        return np.array([[0.0, -a12 * X], [a21 * Y, -a22 * Y]])

    def linear_delayed(p):
        X, _ = eq(p)
        return np.array([[[-a11 * X, 0.0], [0.0, 0.0]]])

    def reaction(p, h):
        u, v, ud = h[0][0], h[0][1], h[1][0]
        return np.array([u * (-a11 * ud - a12 * v), v * (a21 * u - a22 * v)])

    def d2form(p, x, w):
        u, v, ud = x[0][0], x[0][1], x[1][0]
        s, t, sd = w[0][0], w[0][1], w[1][0]
        return np.array([-a11 * (u * sd + s * ud) - a12 * (u * t + s * v),
                         a21 * (u * t + s * v) - 2 * a22 * v * t])

    def d3form(p, u, v, w):
        return np.zeros(2, dtype=np.result_type(u, v, w))

    dX, dY = a22 / den, a21 / den

    def derivatives(p):
        dA_r1 = np.array([[0.0, -a12 * dX], [a21 * dY, -a22 * dY]])
        dG_r1 = np.array([[[-a11 * dX, 0.0], [0.0, 0.0]]])
        dA = np.array([np.zeros((2, 2)), dA_r1])
        dG = np.array([np.zeros((1, 2, 2)), dG_r1])
        return np.zeros((2, 2)), dA, dG

    def coefficients(n, p):
        X, Y = eq(p)
        k = (n / l) ** 2
        a = (d1 + d2) * k + a22 * Y
        b = d1 * k * (a22 * Y + d2 * k) + a12 * a21 * X * Y
        c = a11 * X
        e = (a22 * Y + d2 * k) * a11 * X
        return a, b, c, e

    return ModelSpec(
        name="predprey",
        n_components=2,
        domain_scale=float(l),
        param=np.array([tau, r1], dtype=float),
        delays=lambda p: np.array([p[0]]),
        diffusion=lambda p: np.array([d1, d2]),
        linear_now=linear_now,
        linear_delayed=linear_delayed,
        reaction=reaction,
        reaction_d2=d2form,
        reaction_d3=d3form,
        param_names=("tau", "r1"),
        delay_param=0,
        delay_slot=0,
        derivatives=derivatives,
        delay_gradient=lambda p: np.array([[1.0, 0.0]]),
        equilibrium=eq,
        closed_form=QuadraticDelayForm(coefficients),
        meta={"constants": dict(r2=r2, a11=a11, a12=a12, a21=a21, a22=a22, d1=d1, d2=d2, l=l)},
    )


BUILTINS = {"epidemic": builtin_epidemic, "predprey": builtin_predprey}


# ---------------------------------------------------------------------------
# time rescaling

def prepare_critical(spec: ModelSpec, p0=None, delay_slot: Optional[int] = None) -> ModelSpec:
    """Rescale time by one delay so that this delay becomes 1 at ``p0``.

    With ``s(p) = delays(p)[delay_slot]`` the rescaled system has data
    ``s(p) D, s(p) A, s(p) G_k, s(p) F`` and fixed lags ``r_k(p0) / s(p0)``.
    The lag ratios are frozen at ``p0``: the derivative of ``r_k / s`` in the
    parameters is not carried into the expansion.
    """
    p0 = np.asarray(spec.param if p0 is None else p0, dtype=float)
    slot = spec.delay_slot if delay_slot is None else delay_slot
    if slot is None:
        return replace(spec, param=p0, delay_param=None, delay_slot=None, closed_form=None)
    base_delays = np.atleast_1d(spec.delays(p0)).astype(float)
    s0 = float(base_delays[slot])
    if s0 <= 0:
        raise ModelError("cannot rescale time by a zero delay")
    lags = base_delays / s0
    lags[slot] = 1.0

    def scale(p):
        return float(np.atleast_1d(spec.delays(p))[slot])

    def scale_grad(p):
        if spec.delay_gradient is not None:
            return np.asarray(spec.delay_gradient(p), float)[slot]
        g = np.zeros(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-6 * (1 + abs(p[i]))
            g[i] = (scale(p + e) - scale(p - e)) / (2 * e[i])
        return g

    derivs = None
    if spec.derivatives is not None:
        def derivs(p):
            p = np.asarray(p, float)
            s, ds = scale(p), scale_grad(p)
            dD, dA, dG = spec.derivatives(p)
            D, A, G = spec.diffusion(p), spec.linear_now(p), spec.linear_delayed(p)
            return (np.array([s * np.asarray(dD[i]) + ds[i] * D for i in range(2)]),
                    np.array([s * np.asarray(dA[i]) + ds[i] * A for i in range(2)]),
                    np.array([s * np.asarray(dG[i]) + ds[i] * G for i in range(2)]))

    d2 = d3 = None
    if spec.reaction_d2 is not None:
        def d2(p, u, v):
            return scale(p) * spec.reaction_d2(p, u, v)
    if spec.reaction_d3 is not None:
        def d3(p, u, v, w):
            return scale(p) * spec.reaction_d3(p, u, v, w)

    return replace(
        spec,
        name=spec.name + "-rescaled",
        param=p0,
        delays=lambda p: lags.copy(),
        diffusion=lambda p: scale(p) * np.asarray(spec.diffusion(p)),
        linear_now=lambda p: scale(p) * np.asarray(spec.linear_now(p)),
        linear_delayed=lambda p: scale(p) * np.asarray(spec.linear_delayed(p)),
        reaction=lambda p, h: scale(p) * spec.reaction(p, h),
        reaction_d2=d2,
        reaction_d3=d3,
        delay_param=None,
        delay_slot=None,
        derivatives=derivs,
        delay_gradient=None,
        closed_form=None,
        time_scale=s0,
        meta={**spec.meta, "rescaled_by_slot": slot, "time_scale": s0},
    )
