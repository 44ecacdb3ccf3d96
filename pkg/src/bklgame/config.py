"""Single JSON configuration document for all CLI commands.

One document describes the network topology (explicit matrices or generator
settings), the model coefficients, the initial condition, the decision
structure, and the experiment blocks. Loading validates every module-level
invariant eagerly and rejects unknown keys; a loaded config serialises back
to an identical document, so runs can be reproduced from their manifests.

Component seeds default to fixed offsets from the master ``seed``:
red graph +1, cross links +2, omega +3, nu +4, initial phases +5, mcts +6,
sweep +7, bench +8.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .dynamics import (BklParameters, NetworkTopology, SystemState,
                       build_cross_links, draw_frequencies, generate_hierarchy,
                       generate_random_graph)
from .errors import ValidationError
from .game import GameConfig
from .solvers import MctsConfig, SOLVER_NAMES

__all__ = [
    "Scenario",
    "RunConfig",
    "default_document",
    "load_config",
    "apply_overrides",
    "config_digest",
]


def default_document() -> dict:
    """Full default configuration: the balanced 13-vs-13 reference scenario."""
    return {
        "seed": 2024,
        "topology": {
            "n_blue": 13,
            "branching": 3,
            "n_red": 13,
            "edge_prob": 0.4,
            "n_contact_blue": 4,
            "n_contact_red": 4,
        },
        "params": {
            "omega": {"mean": 0.5032, "std": 0.05},
            "nu": {"mean": 0.5513, "std": 0.05},
            "zeta_b": 0.5,
            "zeta_r": 0.5,
            "zeta_br": 0.4,
            "zeta_rb": 0.4,
            "kappa_br": 0.005,
            "kappa_rb": 0.005,
            "epsilon1": 1e-15,
            "epsilon2": 1e-20,
            "gamma_b": 1e-3,
            "gamma_r": 1e-5,
            "circular_mean": False,
        },
        "initial": {
            "pop_blue": 100.0,
            "pop_red": 47.0,
            "beta": "random",
            "rho": "random",
        },
        "game": {
            "n_actions": 4,
            "decision_times": [0.0, 300.0, 600.0, 900.0],
            "horizon": 1200.0,
            "step": 0.5,
        },
        "mcts": {
            "leaf_fraction": 0.2,
            "exploration_c": math.sqrt(2.0),
        },
        "sweep": {
            "zeta_b": {"start": 0.05, "stop": 1.0, "count": 10},
            "zeta_r": {"start": 0.05, "stop": 1.0, "count": 10},
            "solvers": ["nash-dominant", "myopic", "mcts"],
            "overrides": {"params.kappa_br": 0.002, "params.kappa_rb": 0.002},
        },
        "bench": {
            "depths": [2, 3, 4],
            "branchings": [3, 4, 5, 6],
            "repeats": 6,
            "solvers": ["full", "nash-dominant", "myopic", "mcts"],
            "mcts_leaf_fraction": 0.2,
        },
        "solver": None,
        "output_dir": None,
    }


_TOPOLOGY_GEN_KEYS = {"n_blue", "branching", "n_red", "edge_prob",
                      "n_contact_blue", "n_contact_red",
                      "seed_red", "seed_cross"}
_TOPOLOGY_EXPLICIT_KEYS = {"blue_adj", "red_adj", "cross_adj"}
_PARAM_KEYS = {"omega", "nu", "zeta_b", "zeta_r", "zeta_br", "zeta_rb",
               "kappa_br", "kappa_rb", "epsilon1", "epsilon2",
               "gamma_b", "gamma_r", "circular_mean"}
_INITIAL_KEYS = {"pop_blue", "pop_red", "beta", "rho", "seed_phases"}
_GAME_KEYS = {"n_actions", "decision_times", "horizon", "step", "termination_floors"}
_MCTS_KEYS = {"iterations", "leaf_fraction", "exploration_c", "seed"}
_SWEEP_KEYS = {"zeta_b", "zeta_r", "solvers", "overrides", "seed"}
_BENCH_KEYS = {"depths", "branchings", "repeats", "solvers",
               "mcts_leaf_fraction", "window", "seed"}
_TOP_KEYS = {"seed", "topology", "params", "initial", "game", "mcts",
             "sweep", "bench", "solver", "output_dir"}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _merge_defaults(doc: dict) -> dict:
    merged = default_document()
    for key, value in doc.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            base = dict(merged[key])
            base.update(value)
            merged[key] = base
        else:
            merged[key] = value
    # explicit topology matrices replace the generator block entirely
    if isinstance(doc.get("topology"), dict) and \
            _TOPOLOGY_EXPLICIT_KEYS & set(doc["topology"]):
        merged["topology"] = dict(doc["topology"])
    return merged


def _frequency_vector(spec, size: int, default_seed: int, name: str) -> np.ndarray:
    if isinstance(spec, list):
        return np.asarray(spec, dtype=np.float64)
    if isinstance(spec, dict):
        _reject_unknown(spec, {"mean", "std", "seed"}, f"params.{name}")
        seed = int(spec.get("seed", default_seed))
        return draw_frequencies(size, float(spec["mean"]),
                                float(spec.get("std", 0.05)), seed)
    raise ValidationError(f"params.{name} must be a list or a mean/std object")


def _phase_vector(spec, size: int, rng: np.random.Generator, name: str) -> np.ndarray:
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=np.float64)
        if arr.shape[0] != size:
            raise ValidationError(f"initial.{name} has length {arr.shape[0]}, expected {size}")
        return arr
    if spec == "random":
        return rng.uniform(0.0, 2.0 * np.pi, size)
    raise ValidationError(f'initial.{name} must be a list or "random"')


def _grid_values(spec, where: str) -> tuple[float, ...]:
    if isinstance(spec, list):
        values = tuple(float(v) for v in spec)
    elif isinstance(spec, dict):
        _reject_unknown(spec, {"start", "stop", "count"}, where)
        values = tuple(np.linspace(float(spec["start"]), float(spec["stop"]),
                                   int(spec["count"])).tolist())
    else:
        raise ValidationError(f"{where} must be a list or a start/stop/count object")
    if not values:
        raise ValidationError(f"{where} must not be empty")
    if any(v <= 0 for v in values):
        raise ValidationError(f"{where} values must be positive")
    return values


def _check_solver_names(names, where: str) -> list[str]:
    names = list(names)
    if not names:
        raise ValidationError(f"{where} must list at least one solver")
    for name in names:
        if name not in SOLVER_NAMES:
            raise ValidationError(f"{where}: unknown solver {name!r}")
    return names


@dataclass(frozen=True)
class Scenario:
    """Fully built model objects for one game instance."""

    topo: NetworkTopology
    params: BklParameters
    initial: SystemState
    game: GameConfig
    mcts: MctsConfig


class RunConfig:
    """Validated configuration; building it constructs every model object."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise ValidationError("config document must be a JSON object")
        doc = _merge_defaults(doc)
        _reject_unknown(doc, _TOP_KEYS, "config")
        self._doc = doc
        self.seed = int(doc["seed"])
        self.topology = self._build_topology(doc["topology"])
        self.params = self._build_params(doc["params"])
        self.params.validate_against(self.topology)
        self.initial = self._build_initial(doc["initial"])
        self.game = self._build_game(doc["game"])
        self.mcts = self._build_mcts(doc["mcts"])
        self.solver = doc["solver"]
        if self.solver is not None and self.solver not in SOLVER_NAMES:
            raise ValidationError(f"unknown solver {self.solver!r}")
        self.output_dir = doc["output_dir"]
        self.sweep = self._check_sweep(doc["sweep"])
        self.bench = self._check_bench(doc["bench"])

    def _build_topology(self, section: dict) -> NetworkTopology:
        if not isinstance(section, dict):
            raise ValidationError("topology must be an object")
        if _TOPOLOGY_EXPLICIT_KEYS & set(section):
            _reject_unknown(section, _TOPOLOGY_EXPLICIT_KEYS, "topology")
            return NetworkTopology.from_dict(section)
        _reject_unknown(section, _TOPOLOGY_GEN_KEYS, "topology")
        blue = generate_hierarchy(int(section["n_blue"]), int(section["branching"]))
        red = generate_random_graph(int(section["n_red"]), float(section["edge_prob"]),
                                    int(section.get("seed_red", self.seed + 1)))
        cross = build_cross_links(blue, red,
                                  int(section["n_contact_blue"]),
                                  int(section["n_contact_red"]),
                                  int(section.get("seed_cross", self.seed + 2)))
        return NetworkTopology(blue, red, cross)

    def _build_params(self, section: dict) -> BklParameters:
        _reject_unknown(section, _PARAM_KEYS, "params")
        omega = _frequency_vector(section["omega"], self.topology.n_blue,
                                  self.seed + 3, "omega")
        nu = _frequency_vector(section["nu"], self.topology.n_red,
                               self.seed + 4, "nu")
        scalars = {k: section[k] for k in _PARAM_KEYS - {"omega", "nu"}}
        return BklParameters(omega=omega, nu=nu, **scalars)

    def _build_initial(self, section: dict) -> SystemState:
        _reject_unknown(section, _INITIAL_KEYS, "initial")
        rng = np.random.default_rng(int(section.get("seed_phases", self.seed + 5)))
        beta = _phase_vector(section["beta"], self.topology.n_blue, rng, "beta")
        rho = _phase_vector(section["rho"], self.topology.n_red, rng, "rho")
        return SystemState(beta=beta, rho=rho,
                           pop_blue=float(section["pop_blue"]),
                           pop_red=float(section["pop_red"]), time=0.0)

    def _build_game(self, section: dict) -> GameConfig:
        _reject_unknown(section, _GAME_KEYS, "game")
        floors = section.get("termination_floors")
        if floors is None:
            floors = (self.params.gamma_b, self.params.gamma_r)
        return GameConfig(n_actions=int(section["n_actions"]),
                          decision_times=tuple(section["decision_times"]),
                          horizon=float(section["horizon"]),
                          termination_floors=tuple(floors),
                          step=float(section["step"]))

    def _build_mcts(self, section: dict) -> MctsConfig:
        _reject_unknown(section, _MCTS_KEYS, "mcts")
        seed = int(section.get("seed", self.seed + 6))
        c = float(section.get("exploration_c", math.sqrt(2.0)))
        if "iterations" in section and section["iterations"] is not None:
            return MctsConfig(iterations=int(section["iterations"]),
                              exploration_c=c, seed=seed)
        return MctsConfig.from_leaf_fraction(float(section.get("leaf_fraction", 0.2)),
                                             self.game.n_actions, self.game.n_stages,
                                             exploration_c=c, seed=seed)

    def _check_sweep(self, section: dict) -> dict:
        _reject_unknown(section, _SWEEP_KEYS, "sweep")
        resolved = dict(section)
        resolved["zeta_b_values"] = _grid_values(section["zeta_b"], "sweep.zeta_b")
        resolved["zeta_r_values"] = _grid_values(section["zeta_r"], "sweep.zeta_r")
        resolved["solvers"] = _check_solver_names(section["solvers"], "sweep.solvers")
        overrides = section.get("overrides", {})
        if not isinstance(overrides, dict):
            raise ValidationError("sweep.overrides must be an object")
        resolved["overrides"] = overrides
        resolved["seed"] = int(section.get("seed", self.seed + 7))
        return resolved

    def _check_bench(self, section: dict) -> dict:
        _reject_unknown(section, _BENCH_KEYS, "bench")
        resolved = dict(section)
        depths = [int(d) for d in section["depths"]]
        branchings = [int(b) for b in section["branchings"]]
        if not depths or not branchings:
            raise ValidationError("bench depths/branchings must not be empty")
        if any(d < 1 for d in depths) or any(b < 2 for b in branchings):
            raise ValidationError("bench depths must be >= 1 and branchings >= 2")
        repeats = int(section.get("repeats", 6))
        if repeats < 1:
            raise ValidationError("bench repeats must be >= 1")
        resolved["depths"] = depths
        resolved["branchings"] = branchings
        resolved["repeats"] = repeats
        resolved["solvers"] = _check_solver_names(section["solvers"], "bench.solvers")
        resolved["mcts_leaf_fraction"] = float(section.get("mcts_leaf_fraction", 0.2))
        resolved["seed"] = int(section.get("seed", self.seed + 8))
        return resolved

    def scenario(self) -> Scenario:
        return Scenario(topo=self.topology, params=self.params, initial=self.initial,
                        game=self.game, mcts=self.mcts)

    def to_document(self) -> dict:
        return copy.deepcopy(self._doc)


def apply_overrides(doc: dict, overrides: dict[str, Any]) -> dict:
    """Apply dotted-path overrides (e.g. ``params.zeta_b`` -> 0.7) to a document."""
    out = copy.deepcopy(doc)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        target = out
        for part in parts[:-1]:
            nxt = target.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ValidationError(f"cannot descend into {dotted!r}: "
                                      f"{part!r} is not an object")
            target = nxt
        target[parts[-1]] = value
    return out


def load_config(source: dict | str | Path) -> RunConfig:
    """Load from a path or an in-memory document; accepts run manifests too."""
    if isinstance(source, (str, Path)):
        try:
            with open(source) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {source} is not valid JSON: {exc}") from exc
    else:
        doc = source
    if isinstance(doc, dict) and "config" in doc and "files" in doc:
        doc = doc["config"]  # a manifest from a previous run
    return RunConfig(doc)


def config_digest(doc: dict) -> str:
    """Stable short digest of a canonical config document."""
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
