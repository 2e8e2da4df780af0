"""Fit the decay exponent of the linearized order parameter for several weights b.

Usage: python3 scripts/decay_rate.py [--xi-max 64] [--T 50] [--out results]
"""
import argparse
import json
from pathlib import Path

import numpy as np

from kuramoto_landau.nonlinear_sim import PerturbationRecipe, decay_fit_from_series, project_alpha
from kuramoto_landau.spectral_core import FieldGrid
from kuramoto_landau.stationary import VelocityDistribution, stationary_state
from kuramoto_landau.transport import AlphaFunctional
from kuramoto_landau.volterra import MatrixKernelTrace, analyze_spectrum, linearized_boundary


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--xi-max", type=float, default=64.0)
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=1 / 160)
    p.add_argument("--decays", type=float, nargs="+", default=[2.25, 2.75, 3.5])
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args(argv)

    st = stationary_state(args.K, VelocityDistribution("gaussian", args.sigma),
                          FieldGrid(16, args.xi_max, 0.1))
    res = analyze_spectrum(st, 2 * args.T, args.dt)
    ac = res.split.alpha_coefficients(T_alpha=2 * args.T, dt_alpha=args.dt)
    af = AlphaFunctional.for_state(st, ac)
    st = st.with_r_theta(af(st.rot_mode.values))
    k = MatrixKernelTrace(args.dt, res.kernel.samples[:int(round(args.T / args.dt)) + 1])

    rows = []
    for decay in args.decays:
        # data decaying like (1 + xi)^-decay sits in the weighted space for b < decay - 1/2
        w = PerturbationRecipe("power_law", 1e-3, decay=decay).build(st) - st.fstat_hat
        x = linearized_boundary(st, project_alpha(w, st, af).values, k, res.resolvent)
        fit = decay_fit_from_series(k.t, np.hypot(x[:, 0], x[:, 1]), decay - 0.75,
                                    (0.1 * args.T, args.T))
        rows.append({"decay": decay, "exponent": fit.exponent, "predicted": fit.predicted})
        print(f"decay {decay:5.2f}: fitted {fit.exponent:+.3f}, predicted {fit.predicted:+.3f}")

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "decay_rate.json").write_text(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
