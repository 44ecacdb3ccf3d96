import json
import subprocess
import sys

import pytest

TINY_CONFIG = {
    "seed": 11,
    "topology": {"n_blue": 5, "branching": 2, "n_red": 5, "edge_prob": 0.6,
                 "n_contact_blue": 2, "n_contact_red": 2},
    "params": {"kappa_br": 0.01, "kappa_rb": 0.01},
    "game": {"n_actions": 2, "decision_times": [0.0, 20.0], "horizon": 40.0,
             "step": 2.0},
    "mcts": {"iterations": 16},
    "sweep": {"zeta_b": [0.3, 0.8], "zeta_r": [0.3, 0.8],
              "solvers": ["nash-dominant", "myopic"], "overrides": {}},
    "bench": {"depths": [1, 2], "branchings": [3], "repeats": 1,
              "solvers": ["full", "myopic"]},
}


def run_engine(*argv):
    """Drive the solver CLI exactly as a user would."""
    proc = subprocess.run([sys.executable, "-m", "bklgame.cli", *argv],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """One completed solve + sweep + bench run, shared by all figure tests."""
    base = tmp_path_factory.mktemp("artifacts")
    config = base / "config.json"
    config.write_text(json.dumps(TINY_CONFIG))
    solve_dir = base / "solve"
    sweep_dir = base / "sweep"
    bench_dir = base / "bench"
    run_engine("solve", "--config", str(config), "--solver", "nash-dominant",
               "--out", str(solve_dir))
    run_engine("sweep", "--config", str(config), "--out", str(sweep_dir))
    run_engine("bench", "--config", str(config), "--out", str(bench_dir))
    return {
        "config": config,
        "trajectory": solve_dir / "trajectory.csv",
        "path": solve_dir / "path.nash-dominant.csv",
        "solve_manifest": solve_dir / "manifest.json",
        "heatmap": sweep_dir / "heatmap.csv",
        "sweep_manifest": sweep_dir / "manifest.json",
        "bench": bench_dir / "bench.csv",
    }
