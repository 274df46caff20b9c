"""Epidemic model: locate three double Hopf points along the mode pairs
(0,1), (1,2), (2,3), classify each, then simulate the two spatial patterns
that coexist near the (1,2) point.

    python demos/epidemic_walkthrough.py [--horizon 6000]
"""
import argparse

import numpy as np

from doublehopf import builtin_epidemic, find_double_hopf, hopf_curve, analyse
from doublehopf.simulator import Grid, integrate, cosine_initial, classify_attractor, dominant_mode
from doublehopf.unfolding import region_of


def locate(spec, n1, n2):
    sweep = np.linspace(0.5, 60, 240)
    return find_double_hopf(hopf_curve(spec, n1, sweep), hopf_curve(spec, n2, sweep))[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=6000.0)
    ap.add_argument("--skip-simulation", action="store_true")
    args = ap.parse_args()

    spec = builtin_epidemic()
    for n1, n2 in ((2, 3), (1, 2), (0, 1)):
        pt = locate(spec, n1, n2)
        nf, amp, cls = analyse(spec, pt)
        print(f"modes ({n1},{n2}): omega={pt.param[0]:.5f} d2={pt.param[1]:.4f} "
              f"z=({pt.freqs[0]:.4f}, {pt.freqs[1]:.4f}) b0={amp.b0:.4f} c0={amp.c0:.4f} "
              f"disc={amp.disc:.4f} class {cls.label}")
        if (n1, n2) == (1, 2):
            hh2 = (pt, amp, cls)
    if args.skip_simulation:
        return

    pt, amp, cls = hh2
    target = np.array([0.53, 5.23])
    print(f"\nsimulating at (omega, d2) = {tuple(target)}, region "
          f"{region_of(amp, cls, target - pt.param).region}")
    run_spec = spec.with_param(target)
    grid = Grid.for_model(run_spec, 40)
    for wave in (1, 2):
        init = cosine_initial(run_spec, grid, [0.01, -0.06, -0.05], wave, base=[1.2, 5.8, 4.2])
        run = integrate(run_spec, grid, init, args.horizon, dt=0.005, stride=10)
        print(f"  initial wave {wave}: dominant mode {dominant_mode(run, window=0.25)}, "
              f"attractor {classify_attractor(run, transient=0.75).kind}")


if __name__ == "__main__":
    main()
