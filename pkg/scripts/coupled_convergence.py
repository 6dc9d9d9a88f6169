"""Distance between the coupled (eta, u) model and the single BO equation as delta shrinks.

    python scripts/coupled_convergence.py --deltas 0.2 0.1 0.05 0.025
"""

import argparse

from internal_bo import verification as vf
from internal_bo.runner import load_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default="scenarios/default.json")
    parser.add_argument("--deltas", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    args = parser.parse_args()

    scenario = load_scenario(args.scenario)
    # one profile for every delta, sized for the largest
    ref = max(args.deltas)
    print("delta,rel_l2_error,error_over_delta_sq")
    for delta in args.deltas:
        r = vf.check_cross_model_at(scenario.stack, scenario.branch, delta, reference_delta=ref)
        print(f"{delta:.6g},{r.details['error']:.6e},{r.measured:.6g}")


if __name__ == "__main__":
    main()
