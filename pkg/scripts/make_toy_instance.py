#!/usr/bin/env python3
"""Regenerate the bundled 8-zone instance under data/toy/.

Counts are produced by the model itself at the documented ground-truth
weights (mu=0.70, beta=0.074), so `flowfit calibrate data/toy/model.yaml`
should recover them from the deliberately-off starting point in model.yaml.
"""

import argparse
from pathlib import Path

import yaml

from flowfit.model_io import AssignmentOptions, CalibrationOptions, write_model
from flowfit.sample_models import (
    TOY_TRUE_BETA,
    TOY_TRUE_MU,
    eight_zone_star,
    synthetic_counts,
    toy_strata,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="data/toy", help="output directory")
    parser.add_argument("--noise", type=float, default=0.0,
                        help="multiplicative count noise sigma (default: exact counts)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    zones, network = eight_zone_star()
    truth = toy_strata(TOY_TRUE_MU, TOY_TRUE_BETA)
    counts = synthetic_counts(zones, network, truth,
                              noise=args.noise, seed=args.seed)
    spec_path = write_model(
        args.out, zones, network, counts,
        strata=toy_strata(),  # trial weights; calibration should walk back to truth
        assignment=AssignmentOptions(mode="oneoff"),
        calibration=CalibrationOptions(),
    )
    scenario = {
        "name": "ring_upgrade",
        "edits": [
            # faster, wider road on the busiest ring segment, both directions
            {"action": "modify_link", "link_id": "n2_n3", "t0_min": 4.0,
             "capacity_veh24h": 30000.0},
            {"action": "modify_link", "link_id": "n3_n2", "t0_min": 4.0,
             "capacity_veh24h": 30000.0},
        ],
    }
    scenario_path = Path(args.out) / "scenario_ring_upgrade.yaml"
    with open(scenario_path, "w") as fh:
        yaml.safe_dump(scenario, fh, sort_keys=False)
    print(f"wrote {spec_path} and {scenario_path} ({len(counts)} counts)")


if __name__ == "__main__":
    main()
