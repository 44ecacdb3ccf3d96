"""Four interchangeable solvers for staged simultaneous-move zero-sum games.

* full tree: depth-first enumeration with security-value backup (exact).
* nash dominant: identical backup, but rows whose partial minima prove they
  cannot hold the max-min cell are cut off mid-exploration (exact, cheaper).
* myopic: stage-by-stage greedy equilibrium of one-step matrices (approximate).
* mcts: decoupled UCT where both players keep independent bandit statistics
  at every node (approximate, budgeted).

All solvers run against a minimal tree-game interface so they can be tested
on synthetic payoff trees as well as the coupled-dynamics game; the public
``solve_*`` functions wrap the dynamics-backed game.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .dynamics import BklParameters, NetworkTopology
from .errors import ValidationError
from .game import (GameConfig, GameState, apply_actions, is_terminal,
                   security_solve, terminal_utility)

__all__ = [
    "TreeGame",
    "BklTreeGame",
    "SolveReport",
    "MctsConfig",
    "MctsNodeStats",
    "MctsSearch",
    "solve_full_tree",
    "solve_nash_dominant",
    "solve_myopic",
    "solve_mcts",
    "replay_path",
    "solve_game_full",
    "solve_game_nash_dominant",
    "solve_game_myopic",
    "SOLVER_NAMES",
    "EXACT_SOLVERS",
]

SOLVER_NAMES = ("full", "nash-dominant", "myopic", "mcts")
EXACT_SOLVERS = frozenset({"full", "nash-dominant"})

Path = tuple[tuple[int, int], ...]


class TreeGame(Protocol):
    """What a solver needs from a game: a rooted tree with scored nodes."""

    n_actions: int

    def root(self) -> Any: ...

    def is_terminal(self, node: Any) -> bool: ...

    def child(self, node: Any, blue_idx: int, red_idx: int) -> Any: ...

    def utility(self, node: Any) -> float: ...


class BklTreeGame:
    """Tree-game adapter over the coupled-dynamics staged game."""

    def __init__(self, root: GameState, config: GameConfig,
                 topo: NetworkTopology, params: BklParameters):
        self._root = root
        self.config = config
        self.topo = topo
        self.params = params
        self.n_actions = config.n_actions

    def root(self) -> GameState:
        return self._root

    def is_terminal(self, node: GameState) -> bool:
        return is_terminal(node, self.config).terminal

    def child(self, node: GameState, blue_idx: int, red_idx: int) -> GameState:
        return apply_actions(node, blue_idx, red_idx, self.config, self.topo, self.params)

    def utility(self, node: GameState) -> float:
        return terminal_utility(node)[0]


@dataclass(frozen=True)
class SolveReport:
    """Common solver output: equilibrium value, action path, and work done.

    ``leaf_evaluations`` counts state-utility evaluations (terminal nodes
    for the tree solvers, one-step child scores for myopic, one per
    iteration for mcts). For exact solvers, replaying ``path`` through the
    game reproduces ``value`` exactly.
    """

    solver: str
    value: float
    path: Path
    leaf_evaluations: int
    nodes_expanded: int
    wall_time: float

    def to_json_dict(self, config_digest: str = "") -> dict:
        return {
            "solver": self.solver,
            "value": self.value,
            "path": [list(p) for p in self.path],
            "leaf_evaluations": self.leaf_evaluations,
            "nodes_expanded": self.nodes_expanded,
            "wall_ms": self.wall_time * 1e3,
            "config_digest": config_digest,
        }


class _Counters:
    __slots__ = ("leaves", "expanded")

    def __init__(self):
        self.leaves = 0
        self.expanded = 0


def _full_value(game: TreeGame, node: Any, counters: _Counters) -> tuple[float, Path]:
    if game.is_terminal(node):
        counters.leaves += 1
        return game.utility(node), ()
    counters.expanded += 1
    b = game.n_actions
    values = np.empty((b, b))
    tails: dict[tuple[int, int], Path] = {}
    for bi in range(b):
        for ri in range(b):
            v, tail = _full_value(game, game.child(node, bi, ri), counters)
            values[bi, ri] = v
            tails[(bi, ri)] = tail
    cell = security_solve(values)
    pick = (cell.blue_index, cell.red_index)
    return cell.value, (pick,) + tails[pick]


def _nash_dominant_value(game: TreeGame, node: Any, counters: _Counters) -> tuple[float, Path]:
    if game.is_terminal(node):
        counters.leaves += 1
        return game.utility(node), ()
    counters.expanded += 1
    b = game.n_actions
    values = np.empty((b, b))
    tails: dict[tuple[int, int], Path] = {}
    best_floor = -math.inf  # largest fully-explored row minimum so far
    for bi in range(b):
        pruned_at = -1
        for ri in range(b):
            if pruned_at >= 0:
                # This row cannot hold the max-min cell; stamp the remaining
                # entries with the triggering value and skip their subgames.
                values[bi, ri] = values[bi, pruned_at]
                continue
            v, tail = _nash_dominant_value(game, game.child(node, bi, ri), counters)
            values[bi, ri] = v
            tails[(bi, ri)] = tail
            if v < best_floor:
                pruned_at = ri
        if pruned_at < 0:
            row_min = values[bi].min()
            if row_min > best_floor:
                best_floor = row_min
    cell = security_solve(values)
    pick = (cell.blue_index, cell.red_index)
    return cell.value, (pick,) + tails[pick]


def _myopic(game: TreeGame, counters: _Counters) -> tuple[float, Path]:
    node = game.root()
    path: Path = ()
    b = game.n_actions
    while not game.is_terminal(node):
        values = np.empty((b, b))
        children: dict[tuple[int, int], Any] = {}
        for bi in range(b):
            for ri in range(b):
                child = game.child(node, bi, ri)
                children[(bi, ri)] = child
                values[bi, ri] = game.utility(child)
                counters.leaves += 1
        counters.expanded += 1
        cell = security_solve(values)
        pick = (cell.blue_index, cell.red_index)
        path = path + (pick,)
        node = children[pick]
    return game.utility(node), path


def _timed_solve(game: TreeGame, solver: str, fn) -> SolveReport:
    counters = _Counters()
    start = time.perf_counter()
    if game.is_terminal(game.root()):
        counters.leaves = 1
        value, path = game.utility(game.root()), ()
    else:
        value, path = fn(counters)
    elapsed = time.perf_counter() - start
    return SolveReport(solver=solver, value=value, path=path,
                       leaf_evaluations=counters.leaves,
                       nodes_expanded=counters.expanded, wall_time=elapsed)


def solve_game_full(game: TreeGame) -> SolveReport:
    """Exact solve by exhaustive depth-first backup of security values."""
    return _timed_solve(game, "full",
                        lambda c: _full_value(game, game.root(), c))


def solve_game_nash_dominant(game: TreeGame) -> SolveReport:
    """Exact solve with dominated-row cutoffs; matches ``solve_game_full``.

    Rows (Blue actions) are explored in index order. Once a row is fully
    explored its minimum raises the pruning floor; any later row that shows
    an entry below the floor is abandoned, since its minimum can no longer
    reach the max-min. Stamped placeholder entries keep the matrix shape but
    can never be selected, so value and path are identical to the full tree.
    """
    return _timed_solve(game, "nash-dominant",
                        lambda c: _nash_dominant_value(game, game.root(), c))


def solve_game_myopic(game: TreeGame) -> SolveReport:
    """Greedy stage-by-stage equilibrium using intermediate utilities."""
    return _timed_solve(game, "myopic", lambda c: _myopic(game, c))


@dataclass(frozen=True)
class MctsConfig:
    """Search budget and exploration settings for the decoupled-UCT solver."""

    iterations: int
    exploration_c: float = math.sqrt(2.0)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("mcts iterations must be positive")
        if self.exploration_c < 0:
            raise ValidationError("exploration constant must be non-negative")

    @classmethod
    def from_leaf_fraction(cls, fraction: float, n_actions: int, n_stages: int,
                           exploration_c: float = math.sqrt(2.0), seed: int = 0) -> "MctsConfig":
        """Budget as a fraction of the full leaf count B^(2K), floored at B^2."""
        if fraction <= 0:
            raise ValidationError("leaf fraction must be positive")
        leaves = n_actions ** (2 * n_stages)
        iterations = max(int(math.ceil(fraction * leaves)), n_actions * n_actions)
        return cls(iterations=iterations, exploration_c=exploration_c, seed=seed)


class MctsNodeStats:
    """Per-node decoupled bandit statistics.

    Each player keeps its own reward sums and visit counts per action;
    ``n_selections`` counts action-pair selections made at this node, so it
    always equals each player's total visit count.
    """

    __slots__ = ("state", "terminal", "n_selections",
                 "blue_sum", "blue_n", "red_sum", "red_n", "children")

    def __init__(self, state: Any, terminal: bool, n_actions: int):
        self.state = state
        self.terminal = terminal
        self.n_selections = 0
        self.blue_sum = np.zeros(n_actions)
        self.blue_n = np.zeros(n_actions, dtype=np.int64)
        self.red_sum = np.zeros(n_actions)
        self.red_n = np.zeros(n_actions, dtype=np.int64)
        self.children: dict[tuple[int, int], "MctsNodeStats"] = {}


class MctsSearch:
    """Decoupled UCT over a tree game.

    Every iteration walks the stored tree with both players independently
    selecting actions: unvisited actions first (seeded-uniformly), then the
    bandit rule mean-exploitation + C * sqrt(ln n_s / n_{s,a}), with the
    mean mapped into [0, 1] by the running min/max of all observed leaf
    rewards. Reaching an unexpanded pair creates that one child, whose
    utility is backpropagated as Blue's reward (negated for Red) along the
    walked path. The final recommendation re-walks the tree with C = 0 and
    is scored by replaying it through the real game.
    """

    def __init__(self, game: TreeGame, config: MctsConfig):
        b = game.n_actions
        if config.iterations < b * b:
            raise ValidationError(
                f"mcts budget {config.iterations} cannot cover the {b}x{b} root matrix")
        self.game = game
        self.config = config
        self._rng = np.random.default_rng(config.seed)
        root_state = game.root()
        self.root = MctsNodeStats(root_state, game.is_terminal(root_state), b)
        self.reward_low = math.inf
        self.reward_high = -math.inf
        self.leaf_evaluations = 0
        self.nodes_expanded = 0

    # -- bandit pieces -------------------------------------------------

    def _normalise(self, means: np.ndarray, player: int) -> np.ndarray:
        lo, hi = self.reward_low, self.reward_high
        if player == 1:
            lo, hi = -self.reward_high, -self.reward_low
        if not (hi > lo):
            return np.full_like(means, 0.5)
        return np.clip((means - lo) / (hi - lo), 0.0, 1.0)

    def _select(self, node: MctsNodeStats, player: int) -> int:
        counts = node.blue_n if player == 0 else node.red_n
        unvisited = np.nonzero(counts == 0)[0]
        if unvisited.size:
            return int(unvisited[self._rng.integers(unvisited.size)])
        sums = node.blue_sum if player == 0 else node.red_sum
        exploit = self._normalise(sums / counts, player)
        bonus = self.config.exploration_c * np.sqrt(np.log(node.n_selections) / counts)
        return int(np.argmax(exploit + bonus))

    def _recommend_at(self, node: MctsNodeStats, player: int) -> int | None:
        counts = node.blue_n if player == 0 else node.red_n
        visited = counts > 0
        if not visited.any():
            return None
        sums = node.blue_sum if player == 0 else node.red_sum
        exploit = np.where(visited, self._normalise(
            np.divide(sums, counts, out=np.zeros_like(sums), where=visited), player), -np.inf)
        return int(np.argmax(exploit))

    # -- search --------------------------------------------------------

    def run_iteration(self) -> None:
        node = self.root
        selections: list[tuple[MctsNodeStats, int, int]] = []
        while True:
            if node.terminal:
                reward = self.game.utility(node.state)
                break
            bi = self._select(node, 0)
            ri = self._select(node, 1)
            selections.append((node, bi, ri))
            child = node.children.get((bi, ri))
            if child is None:
                child_state = self.game.child(node.state, bi, ri)
                child = MctsNodeStats(child_state, self.game.is_terminal(child_state),
                                      self.game.n_actions)
                node.children[(bi, ri)] = child
                self.nodes_expanded += 1
                reward = self.game.utility(child_state)
                break
            node = child
        self.leaf_evaluations += 1
        self.reward_low = min(self.reward_low, reward)
        self.reward_high = max(self.reward_high, reward)
        for parent, bi, ri in selections:
            parent.n_selections += 1
            parent.blue_n[bi] += 1
            parent.blue_sum[bi] += reward
            parent.red_n[ri] += 1
            parent.red_sum[ri] += -reward

    def recommend(self) -> Path:
        path: list[tuple[int, int]] = []
        node: MctsNodeStats | None = self.root
        while node is not None and not node.terminal:
            bi = self._recommend_at(node, 0)
            ri = self._recommend_at(node, 1)
            if bi is None or ri is None:
                break
            path.append((bi, ri))
            node = node.children.get((bi, ri))
        return tuple(path)

    def run(self) -> SolveReport:
        start = time.perf_counter()
        for _ in range(self.config.iterations):
            self.run_iteration()
        path = self.recommend()
        node = self.game.root()
        for bi, ri in path:
            if self.game.is_terminal(node):
                break
            node = self.game.child(node, bi, ri)
        value = self.game.utility(node)
        elapsed = time.perf_counter() - start
        return SolveReport(solver="mcts", value=value, path=path,
                           leaf_evaluations=self.leaf_evaluations,
                           nodes_expanded=self.nodes_expanded, wall_time=elapsed)


# -- dynamics-backed entry points ---------------------------------------


def solve_full_tree(root: GameState, config: GameConfig, topo: NetworkTopology,
                    params: BklParameters) -> SolveReport:
    return solve_game_full(BklTreeGame(root, config, topo, params))


def solve_nash_dominant(root: GameState, config: GameConfig, topo: NetworkTopology,
                        params: BklParameters) -> SolveReport:
    return solve_game_nash_dominant(BklTreeGame(root, config, topo, params))


def solve_myopic(root: GameState, config: GameConfig, topo: NetworkTopology,
                 params: BklParameters) -> SolveReport:
    return solve_game_myopic(BklTreeGame(root, config, topo, params))


def solve_mcts(root: GameState, config: GameConfig, topo: NetworkTopology,
               params: BklParameters, mcts: MctsConfig) -> SolveReport:
    return MctsSearch(BklTreeGame(root, config, topo, params), mcts).run()


def replay_path(root: GameState, path: Path, config: GameConfig,
                topo: NetworkTopology, params: BklParameters) -> tuple[GameState, float]:
    """Re-simulate a committed action sequence; returns (end state, Blue utility).

    Stops early if the game terminates before the path is exhausted.
    """
    node = root
    for blue_idx, red_idx in path:
        if is_terminal(node, config).terminal:
            break
        node = apply_actions(node, blue_idx, red_idx, config, topo, params)
    return node, terminal_utility(node)[0]


def solve(solver: str, root: GameState, config: GameConfig, topo: NetworkTopology,
          params: BklParameters, mcts: MctsConfig | None = None) -> SolveReport:
    """Dispatch by solver name; ``mcts`` settings are required for "mcts"."""
    if solver == "full":
        return solve_full_tree(root, config, topo, params)
    if solver == "nash-dominant":
        return solve_nash_dominant(root, config, topo, params)
    if solver == "myopic":
        return solve_myopic(root, config, topo, params)
    if solver == "mcts":
        if mcts is None:
            mcts = MctsConfig.from_leaf_fraction(0.2, config.n_actions, config.n_stages)
        return solve_mcts(root, config, topo, params, mcts)
    raise ValidationError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")
