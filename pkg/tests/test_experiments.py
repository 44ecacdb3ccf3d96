import csv
import math

import numpy as np
import pytest

import bklgame.experiments as experiments
from bklgame.config import Scenario
from bklgame.errors import ValidationError
from bklgame.experiments import (BenchRecord, HeatmapGrid, SweepSpec,
                                 compute_error_stats, error_stats_document,
                                 run_scaling_bench, run_sweep, write_bench_csv,
                                 write_heatmap_csv)
from bklgame.solvers import MctsConfig

from conftest import make_scenario


def _scenario(**kwargs) -> Scenario:
    topo, params, state, config = make_scenario(**kwargs)
    mcts = MctsConfig(iterations=max(config.n_actions ** 2, 20), seed=99)
    return Scenario(topo=topo, params=params, initial=state, game=config, mcts=mcts)


def _grid(values) -> HeatmapGrid:
    arr = np.asarray(values, dtype=float)
    return HeatmapGrid(tuple(range(arr.shape[0])), tuple(range(arr.shape[1])), arr)


class TestErrorStats:
    def test_identical_grids_score_zero(self):
        g = _grid([[1.0, 2.0], [3.0, 4.0]])
        stats = compute_error_stats(g, g, solver="x")
        assert stats.mean_abs == 0.0 and stats.std_abs == 0.0
        assert stats.normalized_mean == 0.0 and stats.normalized_std == 0.0

    def test_hand_case(self):
        exact = _grid([[0.0, 10.0]])
        approx = _grid([[1.0, 9.0]])
        stats = compute_error_stats(exact, approx)
        assert stats.mean_abs == 1.0
        assert stats.normalized_mean == pytest.approx(0.1)

    def test_zero_range_marks_normalised_undefined(self):
        exact = _grid([[5.0, 5.0]])
        approx = _grid([[5.5, 4.5]])
        stats = compute_error_stats(exact, approx)
        assert stats.mean_abs == 0.5
        assert math.isnan(stats.normalized_mean)
        doc = error_stats_document([stats])
        assert doc["stats"][0]["normalized_mean"] is None

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            compute_error_stats(_grid([[1.0]]), _grid([[1.0, 2.0]]))

    def test_reference_magnitudes_attached_for_known_scenarios(self):
        doc = error_stats_document([], pop_red=47.0)
        assert "reference_magnitudes" in doc
        assert doc["reference_magnitudes"]["mcts"]["mean_abs"] == 0.465
        assert "reference_magnitudes" not in error_stats_document([], pop_red=55.0)


class TestRunSweep:
    def test_single_cell_exact_only(self):
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.5,),
                         zeta_r_values=(0.5,), solvers=("nash-dominant",), seed=1)
        result = run_sweep(spec)
        assert len(result.grids) == 1
        assert result.grids[0][1].values.shape == (1, 1)
        assert np.isfinite(result.grids[0][1].values).all()
        assert result.error_stats == ()
        assert result.failures == ()

    def test_duplicate_solver_has_zero_error(self):
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.4, 0.8),
                         zeta_r_values=(0.6,),
                         solvers=("nash-dominant", "nash-dominant"), seed=1)
        result = run_sweep(spec)
        assert len(result.error_stats) == 1
        assert result.error_stats[0].mean_abs == 0.0

    def test_exact_grids_agree_between_full_and_pruned(self):
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.3, 0.9),
                         zeta_r_values=(0.3, 0.9),
                         solvers=("full", "nash-dominant"), seed=1)
        result = run_sweep(spec)
        full = dict(result.grids)["full"]
        nd = dict(result.grids)["nash-dominant"]
        assert np.array_equal(full.values, nd.values)

    def test_deterministic_for_fixed_seed(self):
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.4, 0.7),
                         zeta_r_values=(0.5,),
                         solvers=("nash-dominant", "mcts"), seed=77)
        a = run_sweep(spec)
        b = run_sweep(spec)
        for (_, ga), (_, gb) in zip(a.grids, b.grids):
            assert np.array_equal(ga.values, gb.values)

    def test_parallel_matches_sequential(self):
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.4, 0.7),
                         zeta_r_values=(0.5, 0.9),
                         solvers=("nash-dominant", "mcts"), seed=77)
        seq = run_sweep(spec, jobs=1)
        par = run_sweep(spec, jobs=2)
        for (_, gs), (_, gp) in zip(seq.grids, par.grids):
            assert np.array_equal(gs.values, gp.values)

    def test_cell_failures_recorded_not_fatal(self, monkeypatch):
        calls = {"n": 0}
        original = experiments.solve

        def flaky(name, root, game, topo, params, mcts=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("synthetic cell failure")
            return original(name, root, game, topo, params, mcts=mcts)

        monkeypatch.setattr(experiments, "solve", flaky)
        spec = SweepSpec(scenario=_scenario(), zeta_b_values=(0.4, 0.7),
                         zeta_r_values=(0.5,), solvers=("myopic",), seed=1)
        result = run_sweep(spec)
        assert len(result.failures) == 1
        assert "synthetic cell failure" in result.failures[0].error
        assert math.isnan(result.grids[0][1].values[0, 0])
        assert np.isfinite(result.grids[0][1].values[1, 0])

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            SweepSpec(scenario=_scenario(), zeta_b_values=(),
                      zeta_r_values=(0.5,), solvers=("full",))


class TestScalingBench:
    def test_count_laws_per_cell(self):
        scenario = _scenario(window=5.0, step=2.5, kappa=0.0)
        result = run_scaling_bench(scenario, depths=[2], branchings=[3],
                                   repeats=1, solvers=["full", "myopic"])
        assert result.failures == ()
        by_solver = {r.solver: r for r in result.records}
        assert by_solver["full"].leaf_evaluations == 3 ** 4
        assert by_solver["full"].tree_size == 3 ** 4
        assert by_solver["myopic"].leaf_evaluations == 2 * 3 ** 2

    def test_myopic_faster_than_full_tree(self):
        scenario = _scenario(window=5.0, step=1.0)
        result = run_scaling_bench(scenario, depths=[2], branchings=[4],
                                   repeats=3, solvers=["full", "myopic"])
        by_solver = {r.solver: r for r in result.records}
        assert by_solver["myopic"].wall_time_mean < by_solver["full"].wall_time_mean

    def test_records_sorted_by_tree_size(self):
        scenario = _scenario(window=5.0, step=2.5)
        result = run_scaling_bench(scenario, depths=[1, 2], branchings=[2, 3],
                                   repeats=1, solvers=["myopic"])
        sizes = [r.tree_size for r in result.records]
        assert sizes == sorted(sizes)

    def test_mcts_budget_is_leaf_fraction(self):
        scenario = _scenario(window=5.0, step=2.5)
        result = run_scaling_bench(scenario, depths=[2], branchings=[3],
                                   repeats=1, solvers=["mcts"],
                                   mcts_leaf_fraction=0.2)
        assert result.records[0].leaf_evaluations == math.ceil(0.2 * 3 ** 4)

    def test_cell_failures_recorded_not_fatal(self, monkeypatch):
        calls = {"n": 0}
        original = experiments.solve

        def flaky(name, root, game, topo, params, mcts=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("synthetic bench failure")
            return original(name, root, game, topo, params, mcts=mcts)

        monkeypatch.setattr(experiments, "solve", flaky)
        scenario = _scenario(window=5.0, step=2.5)
        result = run_scaling_bench(scenario, depths=[1, 2], branchings=[2],
                                   repeats=1, solvers=["myopic"])
        assert len(result.failures) == 1
        assert result.failures[0].depth == 1
        assert len(result.records) == 1  # the second cell still ran


class TestWriters:
    def test_heatmap_csv_layout(self, tmp_path):
        grid = _grid([[1.0, 2.0], [3.0, 4.0]])
        out = tmp_path / "heatmap.csv"
        write_heatmap_csv(out, [("full", grid)])
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4
        assert set(rows[0]) == {"zeta_b", "zeta_r", "solver", "value"}
        assert rows[0]["solver"] == "full"

    def test_bench_csv_layout(self, tmp_path):
        rec = BenchRecord(solver="myopic", depth=2, branching=3, tree_size=81,
                          leaf_evaluations=18, wall_time_mean=0.5,
                          wall_time_std=0.01, value=1.0)
        out = tmp_path / "bench.csv"
        write_bench_csv(out, [rec])
        rows = list(csv.DictReader(out.open()))
        assert rows[0]["tree_size"] == "81"
        assert rows[0]["leaf_evals"] == "18"
        assert float(rows[0]["wall_ms_mean"]) == pytest.approx(500.0)
