#!/usr/bin/env python3
"""Grid-solver verification run: 1-D two-bump target at tau=0.1, dense
frames, fixed point, sandwich/rate/energy diagnostics."""
import argparse
from pathlib import Path

import yaml

from mfl.cli import main as mfl_main
from mfl.measures import save_snapshot
from mfl.presets import two_bump_grid_target


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--output-dir", default="out/grid_rate")
    ap.add_argument("--n-grid", type=int, default=256)
    ap.add_argument("--tau", type=float, default=0.1)
    ap.add_argument("--t-end", type=float, default=20.0)
    args = ap.parse_args()
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    target = out / "target_1d_two_bump.txt"
    save_snapshot(target, two_bump_grid_target(args.n_grid))

    cfg = {
        "objective": {"kind": "kmmd", "n_freq": 5, "target": str(target)},
        "oracle": {
            "n_grid": args.n_grid,
            "dt": "auto",
            "t_end": args.t_end,
            "record_every": 50,
            "tau": args.tau,
            "fixed_point": {"damping": 0.2, "tol": 1e-13, "max_iter": 20000},
        },
        "seeds": [1],
        "output_dir": str(out),
    }
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    raise SystemExit(mfl_main(["oracle", "--config", str(cfg_path)]))


if __name__ == "__main__":
    main()
