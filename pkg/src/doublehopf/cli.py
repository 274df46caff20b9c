"""Command-line front end: ``doublehopf {hopf,doublehopf,normalform,simulate}``.

Exit status: 0 success, 2 usage error, 3 a genericity hypothesis fails,
4 numerical degeneracy (ill-conditioned solve, zero sign, blow-up).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisFailure, NumericalDegeneracy, SimulationError
from .model import ModelError, prepare_critical, expand_at
from .modelio import load_model
from .spectrum import (DoubleHopfPoint, find_double_hopf, hopf_branches,
                       verify_nondegeneracy)
from .eigenbasis import basis_for_point
from .normalform import assemble
from . import unfolding, simulator

log = logging.getLogger("doublehopf")

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_DEGENERATE = 0, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Resolved options shared by all commands, with their defaults."""

    model: str
    params: dict = field(default_factory=dict)
    out: str = "."
    tol_root: float = 1e-10
    tol_resonance: float = 1e-3
    tol_cond: float = 1e12
    tol_sign: float = 1e-9


def _parse_params(text):
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"bad parameter assignment {item!r}, expected name=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise UsageError(f"parameter {k!r} is not a number") from exc
    return out


def _parse_sweep(text, spec):
    try:
        name, lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise UsageError(f"bad sweep {text!r}, expected name:lo:hi:steps") from exc
    if spec.delay_param is None:
        raise UsageError("model has no delay parameter to solve for")
    swept = spec.param_names[1 - spec.delay_param]
    if name != swept:
        raise UsageError(f"sweep must run over {swept!r}")
    if steps < 2 or hi <= lo:
        raise UsageError("sweep needs hi > lo and at least two steps")
    return np.linspace(lo, hi, steps)


def _parse_ints(text):
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}") from exc


def _config(args) -> RunConfig:
    return RunConfig(args.model, _parse_params(args.params), args.out,
                     args.tol_root, args.tol_resonance, args.tol_cond, args.tol_sign)


def _spec(cfg: RunConfig):
    try:
        return load_model(cfg.model, cfg.params)
    except (OSError, json.JSONDecodeError, TypeError, KeyError) as exc:
        raise UsageError(f"cannot load model {cfg.model!r}: {exc}") from exc


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _branches(spec, args):
    sweep = _parse_sweep(args.sweep, spec)
    out = []
    for m in _parse_ints(args.modes):
        out.extend(hopf_branches(spec, m, sweep, j_max=args.branches))
    return out


def cmd_hopf(args) -> int:
    cfg = _config(args)
    spec = _spec(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    branches = _branches(spec, args)
    if not branches:
        log.warning("no purely imaginary roots anywhere on the sweep")
        _write(os.path.join(cfg.out, "hopf_empty.csv"), "sweep,delay,frequency,sign,residual")
    for b in branches:
        tag = f"n{b.m}" + (f"{b.label}" if b.label else "") + f"_j{b.j}"
        b.to_csv(os.path.join(cfg.out, f"hopf_{tag}.csv"))
        print(f"hopf_{tag}.csv: {int(np.sum(np.isfinite(b.samples[:, 1])))} samples")
    return EXIT_OK


def _locate(spec, args):
    branches = [b for b in _branches(spec, args) if np.any(np.isfinite(b.samples[:, 1]))]
    points = []
    for i, a in enumerate(branches):
        for b in branches[i + 1:]:
            if a.m == b.m and a.label == b.label:
                continue
            points.extend(find_double_hopf(a, b, tol=args.tol_root))
    points.sort(key=lambda pt: pt.param[1 - spec.delay_param])
    return points


def cmd_doublehopf(args) -> int:
    cfg = _config(args)
    spec = _spec(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    points = _locate(spec, args)
    docs = []
    for pt in points:
        doc = pt.to_dict()
        if args.verify:
            rep = verify_nondegeneracy(spec, pt, resonance_tol=cfg.tol_resonance)
            doc["hypotheses"] = rep.to_dict()
        docs.append(doc)
        print(json.dumps({k: doc[k] for k in ("param", "modes", "frequencies")}))
    _write(os.path.join(cfg.out, "doublehopf.json"), json.dumps(docs, indent=2))
    return EXIT_OK


def _point_from_doc(doc, spec) -> DoubleHopfPoint:
    names = spec.param_names
    param = np.array([doc["param"][n] for n in names], float)
    return DoubleHopfPoint(spec.name, param, names, tuple(doc["modes"]),
                           tuple(doc["frequencies"]), tuple(doc.get("labels", ("", ""))),
                           tuple(doc.get("branches", (0, 0))))


def _point(spec, args) -> DoubleHopfPoint:
    if args.point:
        with open(args.point) as fh:
            doc = json.load(fh)
        if isinstance(doc, list):
            doc = doc[args.index]
        return _point_from_doc(doc, spec)
    if not args.sweep:
        raise UsageError("give --point or --sweep to locate a double Hopf point")
    points = _locate(spec, args)
    if not points:
        raise UsageError("no double Hopf point on this sweep")
    if args.index >= len(points):
        raise UsageError(f"only {len(points)} points found")
    return points[args.index]


def cmd_normalform(args) -> int:
    cfg = _config(args)
    spec = _spec(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    pt = _point(spec, args)
    if args.swap:
        pt = pt.swapped()
    stage = "eigen data"
    try:
        rs = prepare_critical(spec, pt.param)
        basis = basis_for_point(rs, pt)
        stage = "normal form"
        nf = assemble(rs, basis, expand_at(rs), cond_limit=cfg.tol_cond)
        stage = "unfolding"
        amp = unfolding.reduce(nf)
        cls = unfolding.classify(amp, tol=cfg.tol_sign)
    except (HypothesisFailure, NumericalDegeneracy) as exc:
        exc.args = (f"{stage}: {exc}",)
        raise
    nf.to_json(os.path.join(cfg.out, "normalform.json"))
    _write(os.path.join(cfg.out, "unfolding.json"), unfolding.report(amp, cls))
    csv = os.path.join(cfg.out, "bifurcation_lines.csv")
    unfolding.lines_to_csv(amp, cls, csv, length=args.line_length)
    _write(os.path.join(cfg.out, "bifurcation_lines.gp"), unfolding.gnuplot_script(amp, os.path.basename(csv)))
    for k, v in nf.coeffs.items():
        print(f"{k} = {v.real:.6g} {'+' if v.imag >= 0 else '-'} {abs(v.imag):.6g}i")
    print(f"case {cls.label}: eps1={amp.eps1} eps2={amp.eps2} b0={amp.b0:.6g} "
          f"c0={amp.c0:.6g} d0={amp.d0} disc={amp.disc:.6g}")
    return EXIT_OK


def _parse_init(text, spec, grid, p):
    """``wave=1,amp=0.01:-0.06:-0.05,base=1.2:5.8:4.2``"""
    opts = {"wave": "0", "amp": None, "base": None}
    if text:
        for item in text.split(","):
            if "=" not in item:
                raise UsageError(f"bad init option {item!r}")
            k, v = item.split("=", 1)
            if k not in opts:
                raise UsageError(f"unknown init option {k!r}")
            opts[k] = v
    n = spec.n_components
    amp = [float(x) for x in opts["amp"].split(":")] if opts["amp"] else [0.0] * n
    base = [float(x) for x in opts["base"].split(":")] if opts["base"] else None
    if len(amp) != n or (base is not None and len(base) != n):
        raise UsageError(f"init needs {n} values per list")
    return simulator.cosine_initial(spec, grid, amp, int(opts["wave"]), p=p, base=base)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    spec = _spec(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    p = np.array(spec.param, float)
    if args.point:
        p = _point(spec, args).param.copy()
    if args.offset:
        try:
            off = np.array([float(x) for x in args.offset.split(",")])
        except ValueError as exc:
            raise UsageError("offset needs two numbers") from exc
        if off.shape != (2,):
            raise UsageError("offset needs two numbers")
        p = p + off
    spec = spec.with_param(p)
    grid = simulator.Grid.for_model(spec, args.grid)
    init = _parse_init(args.init, spec, grid, p)
    try:
        run = simulator.integrate(spec, grid, init, args.horizon, dt=args.dt, stride=args.stride)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    run.to_csv(os.path.join(cfg.out, "trajectory.csv"))
    modes = list(range(args.max_mode + 1))
    amps = simulator.mode_amplitudes(run, modes)
    header = "t," + ",".join(f"c{c}_n{m}" for c in range(spec.n_components) for m in modes)
    np.savetxt(os.path.join(cfg.out, "modes.csv"),
               np.column_stack([run.t, amps.reshape(len(run.t), -1)]),
               delimiter=",", header=header, comments="")
    lag = run.delays[args.section_lag] if args.section_lag is not None else None
    section = simulator.default_section(run, args.transient, args.section_component, lag)
    pts = simulator.poincare(run, section, transient=args.transient)
    simulator.poincare_to_csv(pts, os.path.join(cfg.out, "poincare.csv"))
    rep = simulator.classify_attractor(run, section, transient=args.transient)
    dom, ratio = simulator.dominant_mode(run, modes)
    report = {"config": run.config, "attractor": rep.to_dict(),
              "dominant_mode": dom, "dominance_ratio": ratio}
    _write(os.path.join(cfg.out, "report.json"), json.dumps(report, indent=2, default=float))
    _write(os.path.join(cfg.out, "heatmap.gp"), "\n".join([
        "set datafile separator ','",
        "set view map",
        f"plot 'trajectory.csv' matrix every ::1 with image title '{spec.name}'",
    ]))
    print(f"attractor: {rep.kind}; dominant mode {dom} (ratio {ratio:.3g})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doublehopf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=True, help="built-in name or JSON model file")
        sp.add_argument("--params", default="", help="name=value,... overrides")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--tol.root", dest="tol_root", type=float, default=1e-10)
        sp.add_argument("--tol.resonance", dest="tol_resonance", type=float, default=1e-3)
        sp.add_argument("--tol.cond", dest="tol_cond", type=float, default=1e12)
        sp.add_argument("--tol.sign", dest="tol_sign", type=float, default=1e-9)

    def sweeping(sp, required):
        sp.add_argument("--sweep", required=required, help="name:lo:hi:steps")
        sp.add_argument("--modes", default="0:3", help="wave numbers, 'a:b' or 'a,b,c'")
        sp.add_argument("--branches", type=int, default=0, help="highest branch index j")

    sp = sub.add_parser("hopf", help="trace Hopf curves")
    common(sp)
    sweeping(sp, True)
    sp.set_defaults(func=cmd_hopf)

    sp = sub.add_parser("doublehopf", help="locate double Hopf points")
    common(sp)
    sweeping(sp, True)
    sp.add_argument("--verify", action="store_true", help="check the genericity hypotheses")
    sp.set_defaults(func=cmd_doublehopf)

    sp = sub.add_parser("normalform", help="normal form and unfolding at a point")
    common(sp)
    sweeping(sp, False)
    sp.add_argument("--point", help="JSON from the doublehopf command")
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--swap", action="store_true", help="list the critical pairs in reverse order")
    sp.add_argument("--line-length", type=float, default=1e-2)
    sp.set_defaults(func=cmd_normalform)

    sp = sub.add_parser("simulate", help="integrate the PDE near a point")
    common(sp)
    sweeping(sp, False)
    sp.add_argument("--point", help="JSON from the doublehopf command")
    sp.add_argument("--index", type=int, default=0)
    sp.add_argument("--offset", help="parameter offset 'a,b' added to the base point")
    sp.add_argument("--init", default="", help="wave=n,amp=a:b:..,base=x:y:..")
    sp.add_argument("--grid", type=int, default=40)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--stride", type=int, default=10)
    sp.add_argument("--max-mode", type=int, default=5)
    sp.add_argument("--transient", type=float, default=0.5)
    sp.add_argument("--section-component", type=int, default=0)
    sp.add_argument("--section-lag", type=int, default=None,
                    help="index of the delay to lag the section by (default: longest)")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisFailure as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericalDegeneracy, SimulationError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
