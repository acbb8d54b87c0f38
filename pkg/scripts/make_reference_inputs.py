#!/usr/bin/env python3
"""Write the pinned reference inputs (targets, dataset) used by the
experiment scripts and example configs."""
import argparse
from pathlib import Path

import numpy as np

from mfl.config import save_dataset
from mfl.measures import save_snapshot
from mfl.presets import two_bump_grid_target, uniform_target_atoms


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", default="data")
    args = ap.parse_args()
    data = Path(args.data_dir)
    data.mkdir(parents=True, exist_ok=True)

    save_snapshot(data / "target_2d_atoms.txt", uniform_target_atoms())
    save_snapshot(data / "target_1d_two_bump_n256.txt", two_bump_grid_target(256))
    save_snapshot(data / "target_1d_two_bump_n128.txt", two_bump_grid_target(128))

    rng = np.random.default_rng(42)
    zs = rng.standard_normal((32, 1))
    ys = np.tanh(1.5 * zs[:, 0]) + 0.1 * rng.standard_normal(32)
    save_dataset(data / "nn_dataset.txt", zs, ys)
    print(f"reference inputs written under {data}/")


if __name__ == "__main__":
    main()
