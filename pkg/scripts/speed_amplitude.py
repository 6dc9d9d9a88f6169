"""Measured soliton speed against c + delta*C0 over a range of amplitudes.

    python scripts/speed_amplitude.py --scenario scenarios/default.json
"""

import argparse

import numpy as np

from internal_bo import verification as vf
from internal_bo.spectral import PeriodicGrid
from internal_bo.runner import _soliton_setup, load_scenario


def domain_for(base, eta0):
    """Smallest power-of-two box keeping the tail below 1e-4 at the base grid spacing."""
    width = base.coeffs.soliton(eta0, base.delta).width_b
    length = max(base.grid.length, 2.0 ** np.ceil(np.log2(200.0 * width)))
    n = int(2 ** np.ceil(np.log2(length / base.grid.spacing)))
    return PeriodicGrid(n, float(length))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="scenarios/default.json")
    parser.add_argument("--factors", type=float, nargs="+", default=[0.25, 0.5, 1.0, 1.5, 2.0])
    args = parser.parse_args()

    base = _soliton_setup(load_scenario(args.scenario))
    print("eta0,predicted_speed,measured_speed,rel_error,l2_error")
    for f in args.factors:
        eta0 = f * base.eta0
        grid = domain_for(base, eta0)
        setup = vf.SolitonSetup(base.stack, base.coeffs, base.delta, grid, eta0, 0.25 * grid.length, base.dt, base.scheme)
        run = vf.run_soliton_propagation(setup, half_widths=10.0)
        prop = {r.name: r for r in vf.check_propagation(setup, run)}
        speed = prop["propagation.speed"].details
        print(
            f"{setup.eta0:.6g},{speed['predicted_speed']:.12g},{speed['measured_speed']:.12g},"
            f"{prop['propagation.speed'].measured:.3e},{prop['propagation.l2_error'].measured:.3e}"
        )


if __name__ == "__main__":
    main()
