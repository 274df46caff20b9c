"""Method-of-lines integration of the delayed reaction-diffusion system with
no-flux boundaries, and diagnostics on the resulting trajectories."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import SimulationError
from .model import ModelSpec

BLOWUP = 1e8


@dataclass
class Grid:
    """Uniform nodes on ``[0, length]`` including both end points."""

    n_nodes: int
    length: float

    @classmethod
    def for_model(cls, spec: ModelSpec, n_nodes: int = 40) -> "Grid":
        return cls(n_nodes, spec.domain_scale * math.pi)

    @property
    def h(self) -> float:
        return self.length / (self.n_nodes - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights, under which the discrete Laplacian conserves mass."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Second difference along the last axis with mirrored ghost nodes."""
        out = np.empty_like(u)
        h2 = self.h * self.h
        out[..., 1:-1] = (u[..., 2:] - 2 * u[..., 1:-1] + u[..., :-2]) / h2
        out[..., 0] = 2 * (u[..., 1] - u[..., 0]) / h2
        out[..., -1] = 2 * (u[..., -2] - u[..., -1]) / h2
        return out

    def matrix(self) -> np.ndarray:
        n = self.n_nodes
        return self.laplacian(np.eye(n)).T

    def mass(self, u: np.ndarray) -> np.ndarray:
        return u @ self.weights

    def cosine_mode(self, m: int) -> np.ndarray:
        """``cos(m pi x / length)`` normalised in the trapezoid inner product."""
        v = np.cos(m * math.pi * self.x / self.length)
        return v / math.sqrt(np.sum(self.weights * v * v))


def stability_bound(spec: ModelSpec, grid: Grid, p=None) -> float:
    p = spec.param if p is None else p
    dmax = float(np.max(spec.diffusion(p)))
    bound = grid.h ** 2 / (2 * dmax) if dmax > 0 else math.inf
    delays = np.atleast_1d(spec.delays(p))
    positive = delays[delays > 0]
    if positive.size:
        bound = min(bound, float(positive.min()) / 4)
    return bound


def commensurate_step(delays, dt_max: float, max_tries: int = 100000, tol: float = 1e-9) -> tuple:
    """Largest step ``<= dt_max`` dividing every positive delay, if one with a
    modest number of sub-steps exists.  Returns ``(dt, exact)``."""
    delays = [float(r) for r in np.atleast_1d(delays) if r > 0]
    if not delays:
        return dt_max, True
    base = min(delays)
    k0 = max(1, math.ceil(base / dt_max - 1e-12))
    for k in range(k0, k0 + max_tries):
        dt = base / k
        if all(abs(r / dt - round(r / dt)) < tol * max(1.0, r / dt) for r in delays):
            return dt, True
    return dt_max, False


class History:
    """Ring buffer of states and time derivatives on a uniform time grid,
    queried with cubic Hermite interpolation (exact on grid points)."""

    def __init__(self, t0: float, dt: float, span: float, shape, init: Callable, init_rate: Callable):
        self.dt = dt
        self.size = int(math.ceil(span / dt)) + 3
        self.states = np.zeros((self.size,) + tuple(shape))
        self.rates = np.zeros_like(self.states)
        self.t0 = t0
        self.count = 0
        self._init = init
        self._init_rate = init_rate

    def push(self, state, rate):
        i = self.count % self.size
        self.states[i] = state
        self.rates[i] = rate
        self.count += 1

    def set_last_rate(self, rate):
        self.rates[(self.count - 1) % self.size] = rate

    def time_of(self, idx: int) -> float:
        return self.t0 + idx * self.dt

    def __call__(self, t: float):
        u = (t - self.t0) / self.dt
        j = math.floor(u + 1e-9)
        theta = u - j
        if abs(theta) < 1e-9:
            theta, j = 0.0, int(round(u))
        if j < 0:
            return self._init(t)
        if j >= self.count:
            raise SimulationError(f"history lookup at {t} is in the future", t)
        if j < self.count - self.size:
            raise SimulationError("history buffer too short for the requested lag", t)
        a = self.states[j % self.size]
        if theta == 0.0:
            return a
        if j + 1 >= self.count:
            raise SimulationError(f"history lookup at {t} is in the future", t)
        b = self.states[(j + 1) % self.size]
        fa = self.rates[j % self.size]
        fb = self.rates[(j + 1) % self.size]
        t2, t3 = theta * theta, theta ** 3
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + theta
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return h00 * a + h01 * b + self.dt * (h10 * fa + h11 * fb)


@dataclass
class SimRun:
    """Sampled trajectory in deviation coordinates (state minus equilibrium)."""

    t: np.ndarray
    states: np.ndarray
    grid: Grid
    dt: float
    params: np.ndarray
    delays: np.ndarray
    equilibrium: np.ndarray
    exact_lags: bool
    config: dict = field(default_factory=dict)

    def absolute(self) -> np.ndarray:
        return self.states + self.equilibrium[None, :, None]

    def to_csv(self, path, component_names=None):
        n = self.states.shape[1]
        names = component_names or [f"u{i}" for i in range(n)]
        cols = ["t"] + [f"{nm}[{j}]" for nm in names for j in range(self.grid.n_nodes)]
        data = np.column_stack([self.t, self.absolute().reshape(len(self.t), -1)])
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="")

    def config_json(self) -> str:
        return json.dumps(self.config, indent=2, default=float)


def _initial_callable(init, shape):
    if callable(init):
        return init
    arr = np.broadcast_to(np.asarray(init, float), shape).copy()
    return lambda t: arr


def integrate(spec: ModelSpec, grid: Grid, init, T: float, dt: Optional[float] = None,
              p=None, stride: int = 1, linear: bool = False, check_bound: bool = True,
              init_is_constant: Optional[bool] = None) -> SimRun:
    """Fixed-step RK4 of ``u' = D u_xx + L u_t + F(u_t)`` in deviation
    coordinates.

    ``init`` is an ``(n, N)`` array (constant history) or a callable
    ``t -> (n, N)`` defined for ``t <= 0``.  ``linear`` drops the reaction
    term.  Samples are kept every ``stride`` steps.
    """
    p = np.asarray(spec.param if p is None else p, float)
    n, N = spec.n_components, grid.n_nodes
    delays = np.atleast_1d(np.asarray(spec.delays(p), float))
    bound = stability_bound(spec, grid, p)
    if dt is None:
        dt, exact = commensurate_step(delays, bound / 2)
    else:
        exact = all(abs(r / dt - round(r / dt)) < 1e-9 * max(1.0, r / dt) for r in delays if r > 0)
    if check_bound and dt > bound * (1 + 1e-12):
        raise ValueError(f"time step {dt:.4g} exceeds the stability bound {bound:.4g}")

    D = np.asarray(spec.diffusion(p), float)[:, None]
    A = np.asarray(spec.linear_now(p), float)
    G = np.asarray(spec.linear_delayed(p), float)
    reaction = spec.reaction
    eq = (np.asarray(spec.equilibrium(p), float) if spec.equilibrium is not None
          else np.zeros(n))

    init_fn = _initial_callable(init, (n, N))
    constant = init_is_constant if init_is_constant is not None else not callable(init)
    if constant:
        zero = np.zeros((n, N))
        init_rate = lambda t: zero
    else:
        eps = 1e-6
        init_rate = lambda t: (init_fn(t) - init_fn(t - eps)) / eps

    hist = History(0.0, dt, float(delays.max(initial=0.0)), (n, N), init_fn, init_rate)
    lap_t = grid.matrix().T.copy()

    def rhs(t, u):
        lagged = [hist(t - r) for r in delays]
        out = D * (u @ lap_t) + A @ u
        for g, v in zip(G, lagged):
            out = out + g @ v
        if not linear:
            out = out + reaction(p, np.stack([u] + lagged))
        return out

    steps = int(round(T / dt))
    u = np.array(init_fn(0.0), float)
    hist.push(u, init_rate(0.0))
    ts, samples = [0.0], [u.copy()]
    for k in range(steps):
        t = k * dt
        k1 = rhs(t, u)
        hist.set_last_rate(k1)
        k2 = rhs(t + dt / 2, u + dt / 2 * k1)
        k3 = rhs(t + dt / 2, u + dt / 2 * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > BLOWUP:
            raise SimulationError(f"solution blew up at t = {t + dt:.6g}", t + dt)
        # provisional rate; replaced by the exact one at the next step
        hist.push(u, k4)
        if (k + 1) % stride == 0:
            ts.append((k + 1) * dt)
            samples.append(u.copy())
    config = {"model": spec.name, "param": p.tolist(), "T": T, "dt": dt, "nodes": N,
              "stride": stride, "linear": linear}
    return SimRun(np.array(ts), np.array(samples), grid, dt, p, delays, eq, exact, config)


# ---------------------------------------------------------------------------
# diagnostics

def mode_amplitudes(run: SimRun, modes) -> np.ndarray:
    """Projections onto normalised cosines, shape ``(samples, n, len(modes))``."""
    basis = np.array([run.grid.cosine_mode(m) for m in modes])
    return np.einsum("snx,mx,x->snm", run.states, basis, run.grid.weights)


def dominant_mode(run: SimRun, modes=range(6), window: float = 0.5):
    """Wave number with the largest mean squared projection over the final
    ``window`` fraction, and its ratio to the runner-up."""
    amps = mode_amplitudes(run, list(modes))
    start = int(len(run.t) * (1 - window))
    power = np.mean(np.sum(amps[start:] ** 2, axis=1), axis=0)
    order = np.argsort(power)[::-1]
    modes = list(modes)
    ratio = math.sqrt(power[order[0]] / power[order[1]]) if power[order[1]] > 0 else math.inf
    return modes[order[0]], ratio


@dataclass
class Section:
    """Where to cut: ``component`` at node ``node``, lagged by ``lag``, equal
    to ``level`` (deviation coordinates)."""

    component: int = 0
    node: int = 0
    lag: float = 0.0
    level: float = 0.0
    direction: int = 1
    project: tuple = ((1, 0), (0, 0))


def _lagged_series(run: SimRun, comp: int, node: int, lag: float):
    series = run.states[:, comp, node]
    if lag == 0:
        return run.t, series
    shifted = np.interp(run.t - lag, run.t, series, left=np.nan)
    return run.t, shifted


def _cubic_weights(theta):
    """Lagrange weights on samples ``i-2, i-1, i, i+1`` at ``i-1+theta``."""
    a, b, c, d = theta + 1, theta, theta - 1, theta - 2
    return np.stack([-b * c * d / 6, a * c * d / 2, -a * b * d / 2, a * b * c / 6], axis=-1)


def _crossings(run: SimRun, section: Section, transient: float):
    """Indices ``i`` and offsets ``theta`` in ``[0, 1]`` of the section
    crossings between samples ``i-1`` and ``i``.  The linear estimate is
    refined on the cubic through the four surrounding samples."""
    t, s = _lagged_series(run, section.component, section.node, section.lag)
    g = s - section.level
    start = max(int(len(t) * transient), 2)
    a, b = g[start - 1:-2], g[start:-1]
    ok = np.isfinite(a) & np.isfinite(b)
    if section.direction > 0:
        hit = ok & (a < 0) & (b >= 0)
    elif section.direction < 0:
        hit = ok & (a > 0) & (b <= 0)
    else:
        hit = ok & (a * b < 0)
    idx = np.flatnonzero(hit) + start
    theta = g[idx - 1] / (g[idx - 1] - g[idx])
    window = np.stack([g[idx - 2], g[idx - 1], g[idx], g[idx + 1]], axis=-1)
    good = np.all(np.isfinite(window), axis=-1)
    window = np.where(good[:, None], window, 0.0)
    for _ in range(8):
        val = np.sum(_cubic_weights(theta) * window, axis=-1)
        eps = 1e-6
        slope = (np.sum(_cubic_weights(theta + eps) * window, axis=-1) - val) / eps
        step = np.where(good & (slope != 0), val / np.where(slope == 0, 1, slope), 0.0)
        theta = np.clip(theta - step, 0.0, 1.0)
    return idx, theta


def _at_crossings(values: np.ndarray, idx, theta):
    w = _cubic_weights(theta)
    stack = np.stack([values[idx - 2], values[idx - 1], values[idx], values[idx + 1]], axis=1)
    return np.einsum("ck,ck...->c...", w, stack)


def section_states(run: SimRun, section: Section, transient: float = 0.5) -> np.ndarray:
    """Full states at the section crossings, one flattened row per crossing."""
    i, theta = _crossings(run, section, transient)
    return _at_crossings(run.states, i, theta).reshape(len(i), run.states[0].size)


def poincare(run: SimRun, section: Section = Section(), transient: float = 0.5,
             min_crossings: int = 0) -> np.ndarray:
    """Crossings of the section with the requested orientation, located on a
    cubic through neighbouring samples and projected on ``section.project``."""
    i, theta = _crossings(run, section, transient)
    if len(i) < min_crossings:
        raise ValueError(f"only {len(i)} crossings, need {min_crossings}")
    cols = [_at_crossings(run.states[:, comp, node], i, theta) for comp, node in section.project]
    return np.column_stack(cols) if cols else np.zeros((len(i), 0))


def local_linearity(points: np.ndarray, k: int = 10) -> np.ndarray:
    """Ratio of the second to the first singular value of each point's
    ``k``-neighbourhood: near 0 on a curve, of order 1 on a cloud."""
    from scipy.spatial import cKDTree

    k = min(k, len(points) - 1)
    _, idx = cKDTree(points).query(points, k + 1)
    out = np.empty(len(points))
    for n, row in enumerate(idx):
        nb = points[row[1:]]
        s = np.linalg.svd(nb - nb.mean(axis=0), compute_uv=False)
        out[n] = s[1] / s[0] if s[0] > 0 else 0.0
    return out


def neighbour_gaps(points: np.ndarray) -> np.ndarray:
    """Distance from each point to its second nearest neighbour, the larger
    of the two links a point has on a sampled closed curve."""
    from scipy.spatial import cKDTree

    d, _ = cKDTree(points).query(points, 3)
    return d[:, 2]


@dataclass
class AttractorReport:
    kind: str
    evidence: dict

    def to_dict(self):
        return {"kind": self.kind, "evidence": self.evidence}


def default_section(run: SimRun, transient: float = 0.5, component: int = 0,
                    lag: Optional[float] = None) -> Section:
    """Cut ``component`` at ``x = 0``, lagged by the longest delay, at its
    mean tail value.  Cutting on a lagged value keeps the section transverse
    to the present state even for spatially uniform solutions."""
    lag = float(np.max(run.delays, initial=0.0)) if lag is None else float(lag)
    start = int(len(run.t) * transient)
    _, s = _lagged_series(run, component, 0, lag)
    n = run.states.shape[1]
    return Section(component=component, lag=lag, level=float(np.nanmean(s[start:])),
                   project=((min(1, n - 1), 0), (0, 0)))


def classify_attractor(run: SimRun, section: Optional[Section] = None, transient: float = 0.5,
                       var_tol: float = 1e-10, diameter_tol: float = 1e-3,
                       gap_factor: float = 5.0, linearity_tol: float = 0.06,
                       min_crossings: int = 20) -> AttractorReport:
    """Equilibrium, periodic, torus-like or irregular, from the tail of a run.

    Crossing points are taken in the full discretised state, where an
    invariant closed curve cannot intersect itself.  The diameter is relative
    to the spread of the trajectory tail.  A torus section must be locally
    one-dimensional and free of large holes.
    """
    start = int(len(run.t) * transient)
    tail = run.states[start:].reshape(len(run.t) - start, -1)
    var = float(np.max(np.var(tail, axis=0)))
    if var < var_tol:
        return AttractorReport("equilibrium", {"variance": var})
    if section is None:
        section = default_section(run, transient)
    pts = section_states(run, section, transient)
    ev = {"variance": var, "crossings": int(len(pts))}
    if len(pts) < min_crossings:
        return AttractorReport("inconclusive", ev)
    spread = float(np.max(np.ptp(tail, axis=0)))
    diam = float(np.max(np.ptp(pts, axis=0))) / spread
    ev["relative_diameter"] = diam
    if diam < diameter_tol:
        return AttractorReport("periodic", ev)
    lin = float(np.median(local_linearity(pts)))
    gaps = neighbour_gaps(pts)
    gap_ratio = float(gaps.max() / np.median(gaps))
    ev.update(linearity=lin, gap_ratio=gap_ratio)
    if lin < linearity_tol and gap_ratio < gap_factor:
        return AttractorReport("torus-like", ev)
    return AttractorReport("irregular", ev)


def cosine_initial(spec: ModelSpec, grid: Grid, amplitudes, wave: int, p=None, base=None):
    """Constant-in-time history ``base + amplitude * cos(wave x / l)`` per
    component, returned in deviation coordinates."""
    p = spec.param if p is None else p
    eq = (np.asarray(spec.equilibrium(p), float) if spec.equilibrium is not None
          else np.zeros(spec.n_components))
    base = eq if base is None else np.asarray(base, float)
    prof = np.cos(wave * grid.x / spec.domain_scale)
    full = base[:, None] + np.asarray(amplitudes, float)[:, None] * prof[None, :]
    return full - eq[:, None]


def poincare_to_csv(points: np.ndarray, path, names=("a", "b")):
    np.savetxt(path, points, delimiter=",", header=",".join(names), comments="")
