import json
import math
from pathlib import Path

import numpy as np
import pytest

from mfl.cli import main
from mfl.config import load_config, load_dataset, save_dataset
from mfl.dynamics import PolynomialSchedule, parse_trace_csv
from mfl.errors import ConfigError
from mfl.functionals import KernelMMDObjective, TwoLayerNNObjective
from mfl.measures import save_snapshot, uniform_grid, torus
from mfl.presets import two_bump_grid_target, uniform_target_atoms

TWO_PI = 2.0 * np.pi


@pytest.fixture()
def target2d_file(tmp_path):
    path = tmp_path / "target2d.txt"
    save_snapshot(path, uniform_target_atoms())
    return path


@pytest.fixture()
def target1d_file(tmp_path):
    path = tmp_path / "target1d.txt"
    save_snapshot(path, two_bump_grid_target(64))
    return path


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL_RUN = """
objective:
  kind: kmmd
  n_freq: 5
  target: {target}
run:
  m: 10
  eta: 0.08
  steps: 20
  checkpoint_every: 5
  init: uniform
  schedule: {{kind: constant, tau: 0.1}}
seeds: [1, 2]
output_dir: {outdir}
"""


class TestLoadConfig:
    def test_minimal_valid(self, tmp_path, target2d_file):
        cfg_path = write_config(
            tmp_path, MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path / "out"))
        cfg = load_config(cfg_path)
        assert isinstance(cfg.objective, KernelMMDObjective)
        assert cfg.run.m == 10
        assert cfg.seeds == [1, 2]

    def test_negative_eta_names_field(self, tmp_path, target2d_file):
        text = MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path).replace(
            "eta: 0.08", "eta: -0.1")
        with pytest.raises(ConfigError, match="run.eta"):
            load_config(write_config(tmp_path, text))

    def test_unknown_key_names_path(self, tmp_path, target2d_file):
        text = MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path).replace(
            "eta: 0.08", "eta: 0.08\n  momentum: 0.9")
        with pytest.raises(ConfigError, match="run.momentum"):
            load_config(write_config(tmp_path, text))

    def test_parse_error_has_line_column(self, tmp_path):
        path = write_config(tmp_path, "objective: [unclosed\n  bad: {\n")
        with pytest.raises(ConfigError, match=r"line \d+, column \d+"):
            load_config(path)

    def test_seeds_required_nonempty(self, tmp_path, target2d_file):
        text = MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path).replace(
            "seeds: [1, 2]", "seeds: []")
        with pytest.raises(ConfigError, match="seeds"):
            load_config(write_config(tmp_path, text))

    def test_needs_run_or_oracle(self, tmp_path, target2d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target2d_file}
seeds: [1]
"""
        with pytest.raises(ConfigError, match="run, oracle"):
            load_config(write_config(tmp_path, text))

    def test_oracle_block(self, tmp_path, target1d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target1d_file}
oracle:
  n_grid: 64
  dt: auto
  t_end: 2.0
  record_every: 10
  tau: 0.1
  fixed_point: {{damping: 0.2, tol: 1e-13, max_iter: 500}}
seeds: [1]
"""
        cfg = load_config(write_config(tmp_path, text))
        assert cfg.oracle.n_grid == 64
        assert cfg.oracle.dt is None
        assert cfg.oracle.fixed_point.tol == 1e-13

    def test_oracle_tau_xor_schedule(self, tmp_path, target1d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target1d_file}
oracle:
  n_grid: 32
  t_end: 1.0
  tau: 0.1
  schedule: {{kind: constant, tau: 0.2}}
seeds: [1]
"""
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(write_config(tmp_path, text))

    def test_linear_and_nn_objectives(self, tmp_path):
        rng = np.random.default_rng(0)
        data = tmp_path / "data.txt"
        save_dataset(data, rng.standard_normal((8, 2)), rng.standard_normal(8))
        text = f"""
objective:
  kind: two_layer_nn
  dataset: {data}
  loss: logistic
  weight_decay: 0.5
  feature_bound: 1.0
run:
  m: 4
  eta: 0.01
  steps: 5
  init: gaussian:1.0
  schedule: {{kind: constant, tau: 0.05}}
seeds: [3]
"""
        cfg = load_config(write_config(tmp_path, text))
        assert isinstance(cfg.objective, TwoLayerNNObjective)
        assert cfg.objective.domain.dim == 3

        text2 = """
objective:
  kind: linear
  potential: quadratic
  lam: 1.0
  dim: 2
run:
  m: 4
  eta: 0.01
  steps: 5
  init: gaussian:1.0
  schedule: {kind: constant, tau: 0.05}
seeds: [3]
"""
        cfg2 = load_config(write_config(tmp_path, text2, "cfg2.yaml"))
        assert cfg2.objective.name == "quadratic"

    def test_bad_loss_choice(self, tmp_path):
        data = tmp_path / "d.txt"
        save_dataset(data, np.zeros((2, 1)), np.zeros(2))
        text = f"""
objective:
  kind: two_layer_nn
  dataset: {data}
  loss: hinge
  weight_decay: 0.5
run:
  m: 2
  eta: 0.01
  steps: 1
  init: gaussian:1.0
  schedule: {{kind: constant, tau: 0.0}}
seeds: [1]
"""
        with pytest.raises(ConfigError, match="objective.loss"):
            load_config(write_config(tmp_path, text))


def test_dataset_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    zs, ys = rng.standard_normal((5, 3)), rng.standard_normal(5)
    path = tmp_path / "data.txt"
    save_dataset(path, zs, ys)
    zs2, ys2 = load_dataset(path)
    assert np.array_equal(zs, zs2)
    assert np.array_equal(ys, ys2)


class TestCliRun:
    def test_end_to_end_row_count(self, tmp_path, target2d_file):
        outdir = tmp_path / "out"
        cfg_path = write_config(
            tmp_path, MINIMAL_RUN.format(target=target2d_file, outdir=outdir))
        assert main(["run", "--config", str(cfg_path)]) == 0
        for seed in (1, 2):
            text = (outdir / f"seed_{seed}" / "trace.csv").read_text()
            rows = parse_trace_csv(text).rows
            assert len(rows) == 1 + math.ceil(20 / 5)
            assert (outdir / f"seed_{seed}" / "snap_0.txt").exists()
            assert (outdir / f"seed_{seed}" / "snap_20.txt").exists()
        summary = json.loads((outdir / "summary.json").read_text())
        assert len(summary["per_seed"]) == 2
        assert "median_G" in summary["aggregates"]

    def test_determinism_across_threads(self, tmp_path, target2d_file):
        cfg_path = write_config(
            tmp_path, MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path / "x"))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(cfg_path), "--output-dir", str(a),
                     "--threads", "1"]) == 0
        assert main(["run", "--config", str(cfg_path), "--output-dir", str(b),
                     "--threads", "8"]) == 0
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_config_error_exit_code(self, tmp_path):
        bad = write_config(tmp_path, "objective: {kind: nope}\nseeds: [1]\n")
        assert main(["run", "--config", str(bad)]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_diverged_exit_code(self, tmp_path):
        text = """
objective:
  kind: linear
  potential: quadratic
  lam: 1.0
  dim: 1
run:
  m: 2
  eta: 3.0
  steps: 500
  init: gaussian:1.0
  schedule: {kind: constant, tau: 0.0}
seeds: [1]
output_dir: out
"""
        cfg_path = write_config(tmp_path, text)
        assert main(["run", "--config", str(cfg_path),
                     "--output-dir", str(tmp_path / "d")]) == 3


class TestCliAnnealCompare:
    def test_cutoff_zero_arms_identical(self, tmp_path, target2d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target2d_file}
run:
  m: 8
  eta: 0.08
  steps: 30
  checkpoint_every: 10
  init: uniform
  schedule: {{kind: polynomial, c: 20.0, beta: 1.0, cutoff: 0}}
seeds: [1, 2, 3]
"""
        outdir = tmp_path / "ac"
        cfg_path = write_config(tmp_path, text)
        code = main(["anneal-compare", "--config", str(cfg_path),
                     "--output-dir", str(outdir)])
        assert code == 0
        for seed in (1, 2, 3):
            a = (outdir / "annealed" / f"seed_{seed}" / "trace.csv").read_bytes()
            b = (outdir / "pgd" / f"seed_{seed}" / "trace.csv").read_bytes()
            assert a == b
        payload = json.loads((outdir / "comparison.json").read_text())
        assert payload["comparison"]["ties"] == 3

    def test_diag_on_compare_dir(self, tmp_path, target2d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target2d_file}
run:
  m: 10
  eta: 0.08
  steps: 200
  checkpoint_every: 50
  init: uniform
  schedule: {{kind: polynomial, c: 20.0, beta: 1.0, cutoff: 100}}
seeds: [1, 2, 3, 4]
"""
        outdir = tmp_path / "ac2"
        cfg_path = write_config(tmp_path, text)
        main(["anneal-compare", "--config", str(cfg_path), "--output-dir", str(outdir)])
        code = main(["diag", "--config", str(cfg_path), "--output-dir", str(outdir)])
        records = [json.loads(line)
                   for line in (outdir / "diag.jsonl").read_text().splitlines()]
        names = {r["check"] for r in records}
        assert "paired_final_G" in names
        assert code in (0, 4)  # exit reflects whether annealing won on these seeds

    def test_diag_failure_exit_code(self, tmp_path, target2d_file):
        # identical arms produce a tied comparison, which the check flags
        text = f"""
objective:
  kind: kmmd
  target: {target2d_file}
run:
  m: 6
  eta: 0.08
  steps: 20
  checkpoint_every: 10
  init: uniform
  schedule: {{kind: polynomial, c: 1.0, beta: 1.0, cutoff: 0}}
seeds: [1, 2]
"""
        outdir = tmp_path / "ac3"
        cfg_path = write_config(tmp_path, text)
        main(["anneal-compare", "--config", str(cfg_path), "--output-dir", str(outdir)])
        assert main(["diag", "--config", str(cfg_path),
                     "--output-dir", str(outdir)]) == 4

    def test_diag_empty_dir_is_config_error(self, tmp_path, target2d_file):
        cfg_path = write_config(
            tmp_path, MINIMAL_RUN.format(target=target2d_file, outdir=tmp_path / "e"))
        assert main(["diag", "--config", str(cfg_path),
                     "--output-dir", str(tmp_path / "empty")]) == 2


class TestCliOracle:
    def test_linear_cos_terminal_gibbs(self, tmp_path):
        text = """
objective:
  kind: linear
  potential: cosine
  amplitude: 1.0
  dim: 1
oracle:
  n_grid: 64
  dt: auto
  t_end: 20.0
  record_every: 25
  tau: 0.5
  fixed_point: {damping: 1.0, tol: 1e-13, max_iter: 50}
seeds: [1]
"""
        outdir = tmp_path / "oracle"
        cfg_path = write_config(tmp_path, text)
        assert main(["oracle", "--config", str(cfg_path),
                     "--output-dir", str(outdir)]) == 0
        from mfl.entropy import grid_kl
        from mfl.measures import grid_from_density_fn, load_snapshot
        final_files = sorted(outdir.glob("frame_*.txt"),
                             key=lambda p: int(p.stem.split("_")[1]))
        final = load_snapshot(final_files[-1])
        gibbs = grid_from_density_fn(
            torus(1), 64, lambda x: np.exp(-np.cos(x[:, 0]) / 0.5))
        assert grid_kl(final, gibbs) <= 1e-6
        log_lines = (outdir / "oracle_log.csv").read_text().splitlines()
        assert log_lines[0] == "t,tau,G,H,F,fisher"
        records = [json.loads(line) for line in
                   (outdir / "diagnostics.jsonl").read_text().splitlines()]
        assert all(r["pass"] is not False for r in records)
        by_check = {r["check"]: r for r in records if r["check"] != "entropy_sandwich"}
        assert by_check["exponential_rate"]["pass"] is True
        assert by_check["energy_identity"]["pass"] is True

    def test_fixed_point_subcommand(self, tmp_path, target1d_file):
        text = f"""
objective:
  kind: kmmd
  target: {target1d_file}
oracle:
  n_grid: 64
  t_end: 1.0
  tau: 10.0
  fixed_point: {{damping: 0.5, tol: 1e-12, max_iter: 2000}}
seeds: [1]
"""
        outdir = tmp_path / "fp"
        cfg_path = write_config(tmp_path, text)
        assert main(["fixed-point", "--config", str(cfg_path),
                     "--output-dir", str(outdir)]) == 0
        payload = json.loads((outdir / "fixed_point.json").read_text())
        assert payload["tau"] == 10.0
        assert (outdir / "fixed_point.txt").exists()

    def test_oracle_needs_grid_objective(self, tmp_path):
        text = """
objective:
  kind: linear
  potential: quadratic
  lam: 1.0
  dim: 2
oracle:
  n_grid: 32
  t_end: 1.0
  tau: 0.5
seeds: [1]
"""
        cfg_path = write_config(tmp_path, text)
        assert main(["oracle", "--config", str(cfg_path),
                     "--output-dir", str(tmp_path / "x")]) == 2
