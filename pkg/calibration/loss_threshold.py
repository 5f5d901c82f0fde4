"""Record final training loss on the default synthetic set against the 0.2 * ln(K) threshold.

    python3 calibration/loss_threshold.py [--seeds 0 1 2] [--out calibration/loss_threshold.json]
"""
import argparse
import json
import math

from nmprel import training as TR
from nmprel.scenedata import SyntheticConfig, generate_synthetic


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--out", default="calibration/loss_threshold.json")
    args = parser.parse_args(argv)

    runs = []
    for seed in args.seeds:
        scenes = generate_synthetic(SyntheticConfig(num_scenes=200, seed=seed))
        _, log = TR.train(scenes, TR.TrainConfig(epochs=30, seed=seed))
        runs.append({"seed": seed, "first_epoch_loss": log.losses[0], "final_loss": log.losses[-1]})
        print(f"seed {seed}: epoch 1 {log.losses[0]:.4f} -> epoch 30 {log.losses[-1]:.4f}")
    threshold = 0.2 * math.log(8)
    record = {"scenes": 200, "epochs": 30, "num_predicates": 8, "threshold": threshold,
              "runs": runs, "max_final_loss": max(r["final_loss"] for r in runs)}
    with open(args.out, "w") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")
    print(f"max final loss {record['max_final_loss']:.4f} vs threshold {threshold:.4f}")


if __name__ == "__main__":
    main()
