#!/usr/bin/env python3
"""Annealed noisy descent vs plain particle gradient descent on paired
seeds, plus plot specs for the comparison and a terminal configuration
scatter."""
import argparse
from pathlib import Path

import yaml

from mfl.cli import main as mfl_main
from mfl.measures import save_snapshot
from mfl.presets import uniform_target_atoms

SEEDS = list(range(1, 11))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--output-dir", default="out/fig_anneal")
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    target = out / "target_2d_atoms.txt"
    save_snapshot(target, uniform_target_atoms())

    cfg = {
        "objective": {"kind": "kmmd", "n_freq": 5, "target": str(target)},
        "run": {
            "m": 50, "eta": 0.08, "steps": args.steps,
            "checkpoint_every": 10, "snapshot_every": args.steps,
            "init": "uniform",
            "schedule": {"kind": "polynomial", "c": 20.0, "beta": 1.0,
                         "cutoff": 800},
        },
        "seeds": SEEDS,
        "output_dir": str(out),
    }
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    code = mfl_main(["anneal-compare", "--config", str(cfg_path),
                     "--threads", str(args.threads)])
    if code != 0:
        raise SystemExit(code)

    compare_spec = {
        "kind": "compare",
        "column": "G",
        "arms": {
            "annealed": {
                "label": "annealed",
                "traces": [str(out / "annealed" / f"seed_{s}" / "trace.csv")
                           for s in SEEDS],
            },
            "baseline": {
                "label": "plain descent",
                "traces": [str(out / "pgd" / f"seed_{s}" / "trace.csv")
                           for s in SEEDS],
            },
        },
        "output": str(out / "compare.png"),
    }
    (out / "plot_compare.yaml").write_text(
        yaml.safe_dump(compare_spec, sort_keys=False))

    scatter_spec = {
        "kind": "config-scatter",
        "snapshot": str(out / "annealed" / "seed_1" / f"snap_{args.steps}.txt"),
        "target": str(target),
        "output": str(out / "config_scatter.png"),
    }
    (out / "plot_scatter.yaml").write_text(
        yaml.safe_dump(scatter_spec, sort_keys=False))
    print(f"done; render with: mfl-plot --spec {out}/plot_compare.yaml "
          f"and mfl-plot --spec {out}/plot_scatter.yaml")


if __name__ == "__main__":
    main()
