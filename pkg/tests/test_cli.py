import csv
import json

import numpy as np
import pytest

from bklgame.cli import main
from bklgame.config import (RunConfig, apply_overrides, config_digest,
                            default_document, load_config)
from bklgame.errors import ValidationError
from bklgame.game import GameState, apply_actions, make_action_grid, terminal_utility


def _tiny_doc(**game_overrides):
    """Desk-scale config: 5+5 nodes, two short windows, coarse step."""
    doc = default_document()
    doc["topology"] = {"n_blue": 5, "branching": 2, "n_red": 5, "edge_prob": 0.6,
                       "n_contact_blue": 2, "n_contact_red": 2}
    doc["params"]["kappa_br"] = 0.01
    doc["params"]["kappa_rb"] = 0.01
    doc["game"] = {"n_actions": 2, "decision_times": [0.0, 20.0], "horizon": 40.0,
                   "step": 2.0}
    doc["game"].update(game_overrides)
    doc["mcts"] = {"iterations": 30, "exploration_c": 1.0}
    doc["sweep"] = {"zeta_b": [0.5], "zeta_r": [0.5], "solvers": ["nash-dominant"],
                    "overrides": {}}
    doc["bench"] = {"depths": [2], "branchings": [3], "repeats": 1,
                    "solvers": ["full", "myopic"]}
    return doc


def _write_doc(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestConfig:
    def test_defaults_validate(self):
        cfg = load_config(default_document())
        assert cfg.game.n_actions == 4
        assert cfg.game.decision_times == (0.0, 300.0, 600.0, 900.0)
        assert cfg.initial.pop_blue == 100.0 and cfg.initial.pop_red == 47.0
        assert cfg.params.gamma_b == 1e-3 and cfg.params.gamma_r == 1e-5

    def test_round_trip_identity(self):
        doc = _tiny_doc()
        cfg = load_config(doc)
        again = load_config(cfg.to_document())
        assert cfg.to_document() == again.to_document()
        assert config_digest(cfg.to_document()) == config_digest(again.to_document())

    def test_unknown_keys_rejected(self):
        doc = _tiny_doc()
        doc["game"]["n_acts"] = 3
        with pytest.raises(ValidationError, match="n_acts"):
            load_config(doc)
        doc2 = _tiny_doc()
        doc2["mystery"] = 1
        with pytest.raises(ValidationError, match="mystery"):
            load_config(doc2)

    def test_explicit_vectors_accepted(self):
        doc = _tiny_doc()
        doc["params"]["omega"] = [0.5] * 5
        doc["initial"]["beta"] = [0.0, 0.1, 0.2, 0.3, 0.4]
        cfg = load_config(doc)
        assert np.array_equal(cfg.params.omega, np.full(5, 0.5))
        assert cfg.initial.beta[3] == 0.3

    def test_length_mismatch_rejected(self):
        doc = _tiny_doc()
        doc["params"]["omega"] = [0.5] * 4
        with pytest.raises(ValidationError):
            load_config(doc)

    def test_dotted_overrides(self):
        doc = apply_overrides(_tiny_doc(), {"params.zeta_b": 0.9, "seed": 5})
        cfg = load_config(doc)
        assert cfg.params.zeta_b == 0.9
        assert cfg.seed == 5

    def test_explicit_topology_matrices(self):
        doc = _tiny_doc()
        pair = [[0.0, 1.0], [1.0, 0.0]]
        doc["topology"] = {"blue_adj": pair, "red_adj": pair,
                           "cross_adj": [[1.0, 0.0], [0.0, 1.0]]}
        doc["params"]["omega"] = [0.5, 0.5]
        doc["params"]["nu"] = [0.5, 0.5]
        doc["initial"]["beta"] = [0.0, 1.0]
        doc["initial"]["rho"] = [0.0, 1.0]
        cfg = load_config(doc)
        assert cfg.topology.n_blue == 2

    def test_mcts_budget_derived_from_leaf_fraction(self):
        doc = _tiny_doc()
        del doc["mcts"]["iterations"]
        doc["mcts"]["leaf_fraction"] = 0.5
        cfg = load_config(doc)
        assert cfg.mcts.iterations == int(np.ceil(0.5 * 2 ** 4))  # floored at B^2=4 -> 8


class TestSimulate:
    def test_zero_attrition_preserves_populations(self, tmp_path):
        doc = _tiny_doc()
        doc["params"]["kappa_br"] = 0.0
        doc["params"]["kappa_rb"] = 0.0
        cfg_path = _write_doc(tmp_path, doc)
        out = tmp_path / "run"
        code = main(["simulate", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader((out / "trajectory.csv").open()))
        assert float(rows[0]["pop_blue"]) == 100.0
        assert float(rows[-1]["pop_blue"]) == 100.0
        assert float(rows[-1]["pop_red"]) == 47.0

    def test_decision_boundaries_present(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out = tmp_path / "run"
        assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
        rows = list(csv.DictReader((out / "trajectory.csv").open()))
        times = {float(r["t"]) for r in rows}
        manifest = json.loads((out / "manifest.json").read_text())
        for t in manifest["decision_times"]:
            assert t in times
        assert manifest["initial_utility"] == 53.0

    def test_repeat_invocations_identical(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg_path), "--out", str(out1),
              "--phi", "0.5", "--psi", "1.0"])
        main(["simulate", "--config", str(cfg_path), "--out", str(out2),
              "--phi", "0.5", "--psi", "1.0"])
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["files"] == m2["files"]

    def test_invalid_config_exits_one(self, tmp_path, capsys):
        doc = _tiny_doc()
        doc["game"]["n_actions"] = 1
        cfg_path = _write_doc(tmp_path, doc)
        code = main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "x")])
        assert code == 1
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"]["kind"] == "validation"


class TestSolve:
    def test_toy_game_matches_hand_built_matrix(self, tmp_path):
        doc = _tiny_doc(decision_times=[0.0], horizon=20.0)
        cfg_path = _write_doc(tmp_path, doc)
        out = tmp_path / "run"
        code = main(["solve", "--config", str(cfg_path), "--solver", "full",
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.full.json").read_text())

        # brute force the 2x2 by direct integration
        cfg = load_config(doc)
        root = GameState(system=cfg.initial)
        values = np.empty((2, 2))
        for bi in range(2):
            for ri in range(2):
                child = apply_actions(root, bi, ri, cfg.game, cfg.topology, cfg.params)
                values[bi, ri] = terminal_utility(child)[0]
        expected = max(min(row) for row in values)
        assert report["value"] == expected

    def test_exact_solvers_agree_via_cli(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out1, out2 = tmp_path / "f", tmp_path / "nd"
        main(["solve", "--config", str(cfg_path), "--solver", "full", "--out", str(out1)])
        main(["solve", "--config", str(cfg_path), "--solver", "nash-dominant",
              "--out", str(out2)])
        r1 = json.loads((out1 / "report.full.json").read_text())
        r2 = json.loads((out2 / "report.nash-dominant.json").read_text())
        assert r1["value"] == r2["value"]
        assert r1["path"] == r2["path"]

    def test_mcts_deterministic_across_runs(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        outs = []
        for name in ("m1", "m2"):
            out = tmp_path / name
            main(["solve", "--config", str(cfg_path), "--solver", "mcts",
                  "--out", str(out)])
            doc = json.loads((out / "report.mcts.json").read_text())
            outs.append({k: doc[k] for k in ("value", "path", "leaf_evaluations",
                                             "nodes_expanded", "config_digest")})
        assert outs[0] == outs[1]

    def test_path_csv_schema(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out = tmp_path / "run"
        main(["solve", "--config", str(cfg_path), "--solver", "myopic",
              "--out", str(out)])
        rows = list(csv.DictReader((out / "path.myopic.csv").open()))
        assert set(rows[0]) == {"stage", "phi", "psi", "pop_blue", "pop_red"}
        assert len(rows) == 2
        grid = make_action_grid(2)
        assert all(float(r["phi"]) in grid.values for r in rows)


class TestSweepAndBench:
    def test_single_cell_sweep_artifacts(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out = tmp_path / "run"
        code = main(["sweep", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader((out / "heatmap.csv").open()))
        assert len(rows) == 1
        assert rows[0]["solver"] == "nash-dominant"
        stats = json.loads((out / "error_stats.json").read_text())
        assert stats["stats"] == []

    def test_bench_leaf_counts(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out = tmp_path / "run"
        assert main(["bench", "--config", str(cfg_path), "--out", str(out)]) == 0
        rows = list(csv.DictReader((out / "bench.csv").open()))
        full = [r for r in rows if r["solver"] == "full"][0]
        assert full["leaf_evals"] == "81"

    def test_rerun_from_manifest_reproduces_csvs(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out1 = tmp_path / "run1"
        main(["sweep", "--config", str(cfg_path), "--out", str(out1)])
        out2 = tmp_path / "run2"
        code = main(["sweep", "--config", str(out1 / "manifest.json"),
                     "--out", str(out2)])
        assert code == 0
        assert (out1 / "heatmap.csv").read_bytes() == (out2 / "heatmap.csv").read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["files"]["heatmap.csv"] == m2["files"]["heatmap.csv"]

    def test_set_override_changes_outcome(self, tmp_path):
        cfg_path = _write_doc(tmp_path, _tiny_doc())
        out = tmp_path / "run"
        code = main(["solve", "--config", str(cfg_path), "--solver", "myopic",
                     "--out", str(out), "--set", "params.kappa_br=0.0",
                     "--set", "params.kappa_rb=0.0"])
        assert code == 0
        report = json.loads((out / "report.myopic.json").read_text())
        assert report["value"] == 53.0  # no attrition: balance never moves
