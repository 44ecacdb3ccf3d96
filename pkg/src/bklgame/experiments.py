"""Experiment drivers: coupling-space sweeps and solver scaling benches.

A sweep re-solves the configured game over a grid of internal coupling
strengths (zeta_b, zeta_r), one grid per requested solver, and scores each
approximate solver against the exact grid. A bench times every solver over a
range of tree shapes (depth, branching). Cells are independent work items;
results merge deterministically by cell index regardless of worker count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import Scenario
from .errors import ValidationError
from .game import GameConfig, GameState
from .solvers import EXACT_SOLVERS, MctsConfig, solve

__all__ = [
    "SweepSpec",
    "HeatmapGrid",
    "ErrorStats",
    "CellFailure",
    "SweepResult",
    "BenchRecord",
    "BenchFailure",
    "BenchResult",
    "run_sweep",
    "compute_error_stats",
    "run_scaling_bench",
    "write_heatmap_csv",
    "write_bench_csv",
    "error_stats_document",
    "REFERENCE_ERROR_MAGNITUDES",
    "REFERENCE_ERROR_PERCENTAGES",
]

HEATMAP_COLUMNS = ("zeta_b", "zeta_r", "solver", "value")
BENCH_COLUMNS = ("solver", "depth", "branching", "tree_size", "leaf_evals",
                 "wall_ms_mean", "wall_ms_std")

# Reference absolute-error magnitudes for this scenario family, keyed by the
# initial Red population; emitted alongside computed stats for comparison.
REFERENCE_ERROR_MAGNITUDES = {
    47: {"mcts": {"mean_abs": 0.465, "normalized_mean": 0.027,
                  "std_abs": 0.530, "normalized_std": 0.031},
         "myopic": {"mean_abs": 0.635, "normalized_mean": 0.037,
                    "std_abs": 0.458, "normalized_std": 0.027}},
    80: {"mcts": {"mean_abs": 1.341, "normalized_mean": 0.056,
                  "std_abs": 1.137, "normalized_std": 0.055},
         "myopic": {"mean_abs": 0.885, "normalized_mean": 0.038,
                    "std_abs": 0.777, "normalized_std": 0.038}},
    100: {"mcts": {"mean_abs": 6.440, "normalized_mean": 0.192,
                   "std_abs": 3.558, "normalized_std": 0.106},
          "myopic": {"mean_abs": 4.469, "normalized_mean": 0.133,
                     "std_abs": 3.247, "normalized_std": 0.097}},
}
# Reference mean relative utility errors (percent) from tree-shape studies.
REFERENCE_ERROR_PERCENTAGES = {
    "myopic": {"mean_pct": 2.07, "std_pct": 0.50},
    "mcts": {"mean_pct": 1.57, "std_pct": 1.15},
}


@dataclass(frozen=True)
class SweepSpec:
    """Grid of coupling strengths to re-solve, plus the solvers to run."""

    scenario: Scenario
    zeta_b_values: tuple[float, ...]
    zeta_r_values: tuple[float, ...]
    solvers: tuple[str, ...]
    seed: int = 0

    def __post_init__(self):
        if not self.zeta_b_values or not self.zeta_r_values:
            raise ValidationError("sweep grids must be non-empty")
        if any(v <= 0 for v in self.zeta_b_values + self.zeta_r_values):
            raise ValidationError("sweep grid values must be positive")
        if not self.solvers:
            raise ValidationError("sweep needs at least one solver")


@dataclass(frozen=True)
class HeatmapGrid:
    zeta_b_values: tuple[float, ...]
    zeta_r_values: tuple[float, ...]
    values: np.ndarray  # shape (len(zeta_b), len(zeta_r))


@dataclass(frozen=True)
class ErrorStats:
    """Absolute-error statistics of one approximate grid vs the exact grid.

    Normalised figures divide by the exact grid's value range; they are NaN
    when that range is zero.
    """

    solver: str
    mean_abs: float
    std_abs: float
    normalized_mean: float
    normalized_std: float


@dataclass(frozen=True)
class CellFailure:
    zeta_b: float
    zeta_r: float
    solver: str
    error: str


@dataclass(frozen=True)
class SweepResult:
    grids: tuple[tuple[str, HeatmapGrid], ...]
    error_stats: tuple[ErrorStats, ...]
    failures: tuple[CellFailure, ...]


def _cell_mcts_seed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])


def _sweep_cell(args) -> tuple[int, int, list]:
    """One grid cell: solve with every requested solver. Worker-safe."""
    spec, i, j = args
    scenario = spec.scenario
    params = replace(scenario.params,
                     zeta_b=spec.zeta_b_values[i], zeta_r=spec.zeta_r_values[j])
    root = GameState(system=scenario.initial)
    out = []
    for pos, name in enumerate(spec.solvers):
        mcts = replace(scenario.mcts, seed=_cell_mcts_seed(spec.seed, i, j)) \
            if name == "mcts" else None
        try:
            report = solve(name, root, scenario.game, scenario.topo, params, mcts=mcts)
            out.append((pos, report.value, None))
        except Exception as exc:  # cell failures are recorded, not fatal
            out.append((pos, math.nan, f"{type(exc).__name__}: {exc}"))
    return i, j, out


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Solve every (zeta_b, zeta_r) cell with every solver in the spec.

    Cells are independent and deterministic given the spec seed; failures
    are recorded per cell and the sweep continues.
    """
    nb, nr = len(spec.zeta_b_values), len(spec.zeta_r_values)
    values = [np.full((nb, nr), np.nan) for _ in spec.solvers]
    failures: list[CellFailure] = []
    tasks = [(spec, i, j) for i in range(nb) for j in range(nr)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cell_results = list(pool.map(_sweep_cell, tasks))
    else:
        cell_results = [_sweep_cell(t) for t in tasks]
    for i, j, per_solver in cell_results:
        for pos, value, error in per_solver:
            values[pos][i, j] = value
            if error is not None:
                failures.append(CellFailure(spec.zeta_b_values[i], spec.zeta_r_values[j],
                                            spec.solvers[pos], error))
    grids = tuple((name, HeatmapGrid(spec.zeta_b_values, spec.zeta_r_values, values[pos]))
                  for pos, name in enumerate(spec.solvers))
    exact_pos = next((pos for pos, name in enumerate(spec.solvers)
                      if name in EXACT_SOLVERS), None)
    stats = []
    if exact_pos is not None:
        exact_grid = grids[exact_pos][1]
        for pos, (name, grid) in enumerate(grids):
            if pos == exact_pos:
                continue
            stats.append(compute_error_stats(exact_grid, grid, solver=name))
    return SweepResult(grids=grids, error_stats=tuple(stats), failures=tuple(failures))


def compute_error_stats(exact: HeatmapGrid, approx: HeatmapGrid,
                        solver: str = "") -> ErrorStats:
    """Mean/std of |approx - exact| over cells, plus range-normalised forms."""
    if exact.values.shape != approx.values.shape:
        raise ValidationError("error stats need matching grid shapes")
    diff = np.abs(approx.values - exact.values)
    mean_abs = float(np.nanmean(diff))
    std_abs = float(np.nanstd(diff))
    value_range = float(np.nanmax(exact.values) - np.nanmin(exact.values))
    if value_range > 0:
        norm_mean, norm_std = mean_abs / value_range, std_abs / value_range
    else:
        norm_mean, norm_std = math.nan, math.nan
    return ErrorStats(solver=solver, mean_abs=mean_abs, std_abs=std_abs,
                      normalized_mean=norm_mean, normalized_std=norm_std)


@dataclass(frozen=True)
class BenchRecord:
    solver: str
    depth: int
    branching: int
    tree_size: int
    leaf_evaluations: int
    wall_time_mean: float
    wall_time_std: float
    value: float


@dataclass(frozen=True)
class BenchFailure:
    solver: str
    depth: int
    branching: int
    error: str


@dataclass(frozen=True)
class BenchResult:
    records: tuple[BenchRecord, ...]
    failures: tuple[BenchFailure, ...]


def run_scaling_bench(scenario: Scenario, depths, branchings, repeats: int,
                      solvers, mcts_leaf_fraction: float = 0.2, seed: int = 0,
                      window: float | None = None) -> BenchResult:
    """Time every solver over each (depth, branching) tree shape.

    Each cell rebuilds the decision structure with ``depth`` evenly spaced
    decision points and ``branching`` actions per player, keeping the
    scenario's dynamics. The MCTS budget is the given fraction of the cell's
    full leaf count. Records are sorted by tree size; cell failures are
    recorded and the bench continues.
    """
    if repeats < 1:
        raise ValidationError("bench repeats must be >= 1")
    base = scenario.game
    if window is None:
        window = base.decision_times[1] - base.decision_times[0] \
            if base.n_stages >= 2 else base.horizon
    records = []
    failures = []
    for depth in depths:
        for branching in branchings:
            game = GameConfig(
                n_actions=branching,
                decision_times=tuple(i * window for i in range(depth)),
                horizon=depth * window,
                termination_floors=base.termination_floors,
                step=base.step)
            root = GameState(system=scenario.initial)
            tree_size = branching ** (2 * depth)
            for name in solvers:
                mcts = None
                if name == "mcts":
                    mcts = MctsConfig.from_leaf_fraction(
                        mcts_leaf_fraction, branching, depth,
                        exploration_c=scenario.mcts.exploration_c,
                        seed=_cell_mcts_seed(seed, depth, branching))
                walls = []
                leaf_evals = 0
                value = math.nan
                try:
                    for rep in range(repeats):
                        report = solve(name, root, game, scenario.topo,
                                       scenario.params, mcts=mcts)
                        walls.append(report.wall_time)
                        if rep == 0:
                            leaf_evals = report.leaf_evaluations
                            value = report.value
                except Exception as exc:  # record and move to the next cell
                    failures.append(BenchFailure(
                        solver=name, depth=depth, branching=branching,
                        error=f"{type(exc).__name__}: {exc}"))
                    continue
                records.append(BenchRecord(
                    solver=name, depth=depth, branching=branching,
                    tree_size=tree_size, leaf_evaluations=leaf_evals,
                    wall_time_mean=float(np.mean(walls)),
                    wall_time_std=float(np.std(walls)), value=value))
    records.sort(key=lambda r: (r.tree_size, r.depth, r.branching))
    return BenchResult(records=tuple(records), failures=tuple(failures))


# -- artifact writers ----------------------------------------------------


def write_heatmap_csv(path, grids) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEATMAP_COLUMNS)
        for name, grid in grids:
            for i, zb in enumerate(grid.zeta_b_values):
                for j, zr in enumerate(grid.zeta_r_values):
                    writer.writerow([repr(float(zb)), repr(float(zr)), name,
                                     repr(float(grid.values[i, j]))])


def write_bench_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for r in records:
            writer.writerow([r.solver, r.depth, r.branching, r.tree_size,
                             r.leaf_evaluations, repr(r.wall_time_mean * 1e3),
                             repr(r.wall_time_std * 1e3)])


def error_stats_document(stats, pop_red: float | None = None) -> dict:
    """JSON document for the computed stats plus reference magnitudes."""
    doc = {
        "stats": [{
            "solver": s.solver,
            "mean_abs": s.mean_abs,
            "std_abs": s.std_abs,
            "normalized_mean": None if math.isnan(s.normalized_mean) else s.normalized_mean,
            "normalized_std": None if math.isnan(s.normalized_std) else s.normalized_std,
        } for s in stats],
        "normalization": "divide by (max - min) of the exact grid",
        "reference_percentages": REFERENCE_ERROR_PERCENTAGES,
    }
    if pop_red is not None:
        key = int(round(pop_red))
        if key in REFERENCE_ERROR_MAGNITUDES:
            doc["reference_magnitudes"] = REFERENCE_ERROR_MAGNITUDES[key]
    return doc
