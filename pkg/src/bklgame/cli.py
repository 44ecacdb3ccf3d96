"""Command-line entry point: simulate / solve / sweep / bench.

Every command consumes one JSON config document (defaults used when
``--config`` is omitted), writes delimited artifacts plus a ``manifest.json``
into the output directory, and is deterministic given config and seeds.
Exit codes: 0 success, 1 validation error, 2 runtime error, 3 partial
failure (some sweep/bench cells failed).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from .config import (RunConfig, apply_overrides, config_digest,
                     default_document, load_config)
from .dynamics import integrate_segment, write_trajectory_csv
from .errors import BklError, ValidationError
from .experiments import (SweepSpec, error_stats_document, run_scaling_bench,
                          run_sweep, write_bench_csv, write_heatmap_csv)
from .game import GameState, is_terminal, make_action_grid, terminal_utility
from .solvers import SOLVER_NAMES, solve

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


def _parse_set(values: list[str]) -> dict:
    overrides = {}
    for item in values:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return overrides


def _load(args) -> RunConfig:
    doc = load_config(args.config).to_document() if args.config else default_document()
    if args.set:
        doc = apply_overrides(doc, _parse_set(args.set))
    if args.seed is not None:
        doc["seed"] = args.seed
    return RunConfig(doc)


def _out_dir(args, cfg: RunConfig) -> Path:
    out = args.out or cfg.output_dir or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, cfg: RunConfig, files: list[str],
                    annotations: dict | None = None) -> None:
    doc = cfg.to_document()
    manifest = {
        "command": command,
        "config": doc,
        "config_digest": config_digest(doc),
        "seeds": {
            "master": cfg.seed,
            "mcts": cfg.mcts.seed,
            "sweep": cfg.sweep["seed"],
            "bench": cfg.bench["seed"],
        },
        "initial_utility": cfg.initial.pop_blue - cfg.initial.pop_red,
        "decision_times": list(cfg.game.decision_times),
        "horizon": cfg.game.horizon,
        "files": {name: _sha256(out / name) for name in files},
        "annotations": annotations or {},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _segment_bounds(decision_times, duration: float) -> list[tuple[float, float]]:
    cuts = [0.0] + [t for t in decision_times if 0.0 < t < duration] + [duration]
    return list(zip(cuts, cuts[1:]))


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    scenario = cfg.scenario()
    duration = args.duration if args.duration is not None else cfg.game.horizon
    if duration <= 0:
        raise ValidationError("duration must be positive")
    segments = []
    state = scenario.initial
    for start, end in _segment_bounds(cfg.game.decision_times, duration):
        traj = integrate_segment(state, scenario.topo, scenario.params,
                                 args.phi, args.psi, duration=end - start,
                                 step=min(cfg.game.step, end - start))
        segments.append(traj)
        state = traj.final_state
    write_trajectory_csv(out / "trajectory.csv", segments)
    _write_manifest(out, "simulate", cfg, ["trajectory.csv"],
                    {"phi": args.phi, "psi": args.psi, "duration": duration})
    u_blue = state.pop_blue - state.pop_red
    print(f"final populations: blue={state.pop_blue:.6g} red={state.pop_red:.6g}")
    print(f"final utilities: blue={u_blue:.6g} red={-u_blue:.6g}")
    return EXIT_OK


def _write_path_csv(path: Path, cfg: RunConfig, scenario, report) -> None:
    """Equilibrium path: committed lags and end-of-window populations."""
    grid = make_action_grid(cfg.game.n_actions)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "phi", "psi", "pop_blue", "pop_red"])
        node = GameState(system=scenario.initial)
        for stage, (bi, ri) in enumerate(report.path):
            if is_terminal(node, cfg.game).terminal:
                break
            start, end = cfg.game.stage_window(node.stage)
            traj = integrate_segment(node.system, scenario.topo, scenario.params,
                                     grid[bi], grid[ri], duration=end - start,
                                     step=min(cfg.game.step, end - start))
            node = GameState(system=traj.final_state, stage=node.stage + 1,
                             history=node.history + ((bi, ri),))
            writer.writerow([stage, repr(grid[bi]), repr(grid[ri]),
                             repr(node.system.pop_blue), repr(node.system.pop_red)])


def _replay_segments(cfg: RunConfig, scenario, report) -> list:
    grid = make_action_grid(cfg.game.n_actions)
    segments = []
    node = GameState(system=scenario.initial)
    for bi, ri in report.path:
        if is_terminal(node, cfg.game).terminal:
            break
        start, end = cfg.game.stage_window(node.stage)
        traj = integrate_segment(node.system, scenario.topo, scenario.params,
                                 grid[bi], grid[ri], duration=end - start,
                                 step=min(cfg.game.step, end - start))
        segments.append(traj)
        node = GameState(system=traj.final_state, stage=node.stage + 1,
                         history=node.history + ((bi, ri),))
    return segments


def cmd_solve(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    solver = args.solver or cfg.solver
    if solver is None:
        raise ValidationError(f"--solver is required (one of {SOLVER_NAMES})")
    scenario = cfg.scenario()
    root = GameState(system=scenario.initial)
    report = solve(solver, root, cfg.game, scenario.topo, scenario.params,
                   mcts=scenario.mcts)
    report_name = f"report.{solver}.json"
    path_name = f"path.{solver}.csv"
    with open(out / report_name, "w") as fh:
        json.dump(report.to_json_dict(config_digest(cfg.to_document())), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    _write_path_csv(out / path_name, cfg, scenario, report)
    segments = _replay_segments(cfg, scenario, report)
    files = [report_name, path_name]
    if segments:
        write_trajectory_csv(out / "trajectory.csv", segments)
        files.append("trajectory.csv")
    _write_manifest(out, "solve", cfg, files, {"solver": solver})
    print(f"{solver}: value={report.value:.6g} path={list(report.path)} "
          f"leaves={report.leaf_evaluations} wall={report.wall_time:.3f}s")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    base_doc = apply_overrides(cfg.to_document(), cfg.sweep.get("overrides", {}))
    swept = RunConfig(base_doc)
    spec = SweepSpec(scenario=swept.scenario(),
                     zeta_b_values=tuple(cfg.sweep["zeta_b_values"]),
                     zeta_r_values=tuple(cfg.sweep["zeta_r_values"]),
                     solvers=tuple(cfg.sweep["solvers"]),
                     seed=cfg.sweep["seed"])
    result = run_sweep(spec, jobs=args.jobs)
    write_heatmap_csv(out / "heatmap.csv", result.grids)
    stats_doc = error_stats_document(result.error_stats, swept.initial.pop_red)
    with open(out / "error_stats.json", "w") as fh:
        json.dump(stats_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    annotations = {
        "failures": [[f.zeta_b, f.zeta_r, f.solver, f.error] for f in result.failures],
        "solvers": list(spec.solvers),
    }
    _write_manifest(out, "sweep", cfg, ["heatmap.csv", "error_stats.json"], annotations)
    for stats in result.error_stats:
        print(f"{stats.solver}: mean_abs={stats.mean_abs:.4g} "
              f"normalized_mean={stats.normalized_mean:.4g}")
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    bench = cfg.bench
    # timing cells run sequentially regardless of --jobs: concurrency would
    # contaminate the wall-clock measurements
    result = run_scaling_bench(cfg.scenario(), bench["depths"], bench["branchings"],
                               bench["repeats"], bench["solvers"],
                               mcts_leaf_fraction=bench["mcts_leaf_fraction"],
                               seed=bench["seed"], window=bench.get("window"))
    write_bench_csv(out / "bench.csv", result.records)
    annotations = {
        "repeats": bench["repeats"],
        "solvers": bench["solvers"],
        "failures": [[f.solver, f.depth, f.branching, f.error]
                     for f in result.failures],
    }
    _write_manifest(out, "bench", cfg, ["bench.csv"], annotations)
    for r in result.records:
        print(f"{r.solver} d={r.depth} B={r.branching}: "
              f"leaves={r.leaf_evaluations} wall={r.wall_time_mean * 1e3:.2f}ms")
    if result.failures:
        print(f"{len(result.failures)} bench cell(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bklgame",
        description="Coupled oscillator-attrition games: simulate, solve, sweep, bench.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config (or a previous run's manifest)")
        p.add_argument("--out", help="output directory (default: config output_dir or ./out)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field by dotted path, e.g. params.zeta_b=0.7")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for experiment cells")

    p_sim = sub.add_parser("simulate", help="integrate with fixed lags and export a trajectory")
    common(p_sim)
    p_sim.add_argument("--phi", type=float, default=0.0, help="Blue lag in radians")
    p_sim.add_argument("--psi", type=float, default=0.0, help="Red lag in radians")
    p_sim.add_argument("--duration", type=float, help="override horizon")
    p_sim.set_defaults(fn=cmd_simulate)

    p_solve = sub.add_parser("solve", help="solve the configured game")
    common(p_solve)
    p_solve.add_argument("--solver", choices=SOLVER_NAMES)
    p_solve.set_defaults(fn=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="re-solve over a coupling grid")
    common(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_bench = sub.add_parser("bench", help="time all solvers across tree shapes")
    common(p_bench)
    p_bench.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(json.dumps({"error": {"kind": "validation", "message": str(exc)}}),
              file=sys.stderr)
        return EXIT_VALIDATION
    except BklError as exc:
        print(json.dumps({"error": {"kind": "runtime", "message": str(exc)}}),
              file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - map anything else to runtime failure
        print(json.dumps({"error": {"kind": "runtime",
                                    "message": f"{type(exc).__name__}: {exc}"}}),
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
