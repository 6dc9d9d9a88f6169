"""Hamiltonian drift of a soliton run as the time step is halved.

    python scripts/drift_vs_dt.py --levels 4
"""

import argparse
import math

from internal_bo import evolution as ev
from internal_bo import verification as vf
from internal_bo.runner import _soliton_setup, load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="scenarios/default.json")
    parser.add_argument("--levels", type=int, default=4)
    parser.add_argument("--cfl", type=float, default=2.4, help="starting CFL number of the nonlinear term")
    args = parser.parse_args()

    setup = _soliton_setup(load_scenario(args.scenario))
    system = ev.BOSystem(setup.grid, setup.coeffs, setup.delta)
    per_dt = system.cfl(1.0, setup.scheme, ev.SimState(0.0, setup.exact(0.0), setup.delta))
    T = 12 * setup.soliton.width_b / abs(setup.soliton.speed)
    dt = args.cfl / per_dt
    print("dt,hamiltonian_drift,observed_order")
    prev = None
    for _ in range(args.levels):
        _, records, _ = vf._dense_run(setup, dt, T)
        drift = vf._hamiltonian_drift(records)
        order = math.log2(prev / drift) if prev and drift > 0 else float("nan")
        print(f"{dt:.6g},{drift:.6e},{order:.3f}")
        prev, dt = drift, dt / 2


if __name__ == "__main__":
    main()
