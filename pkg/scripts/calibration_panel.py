"""Print the calibration panel for a simulator config.

Useful when retuning the shipped defaults: every knob can be overridden
from the command line and the four calibrated statistics are reported
against their target bands.

    python scripts/calibration_panel.py --eta0 0.25 --scale 0.3
"""

import argparse
import time

from planbeam import bench, simgen


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    for knob in (
        "eta0",
        "gamma",
        "goal_pull",
        "avoid_prob",
        "branch_scale",
        "style_concentration",
        "step_persistence",
        "commit_fraction",
        "degenerate_prob",
    ):
        parser.add_argument(f"--{knob.replace('_', '-')}", type=float, default=None, dest=knob)
    parser.add_argument("--horizon-cells", type=int, default=None, dest="horizon_cells")
    parser.add_argument("--scale", type=float, default=1.0, help="Monte-Carlo scale")
    args = parser.parse_args()

    overrides = {
        name: value
        for name, value in vars(args).items()
        if name != "scale" and value is not None
    }
    cfg = simgen.GeneratorConfig(**overrides)
    print("config:", cfg.to_json())

    t0 = time.time()
    stats = bench.calibration_statistics(cfg, scale=args.scale)
    print(f"convergence @ commit step: {stats.convergence_at_commit:.4f}   target [0.90, 0.96]")
    print(f"refinement diversity @ 1 : {stats.refine_diversity:.4f}   target <= 0.28")
    print(f"cross-seed diversity     : {stats.cross_seed_diversity:.4f}   target [0.60, 0.76]")
    print(f"success at >= 13 moves   : {stats.long_horizon_success:.4f}   target < 0.10")
    print(f"rollouts: {stats.rollouts}  ({time.time() - t0:.1f}s)")


if __name__ == "__main__":
    main()
