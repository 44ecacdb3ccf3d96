"""Simultaneous-move staged game over the coupled dynamics.

At each decision time both players simultaneously commit a phase lag from a
shared discrete grid spanning [0, pi]; the dynamics then run to the next
decision time. The game ends when the horizon is reached or a side's
strength falls to its termination floor. Utilities are the final strength
balance, so the game is exactly zero-sum.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import BklParameters, NetworkTopology, SystemState, integrate_final
from .errors import ValidationError

__all__ = [
    "GameConfig",
    "ActionGrid",
    "GameState",
    "EquilibriumCell",
    "TerminalStatus",
    "make_action_grid",
    "apply_actions",
    "is_terminal",
    "terminal_utility",
    "security_solve",
]


@dataclass(frozen=True)
class GameConfig:
    """Decision structure: action resolution, timing, and stopping rule.

    ``decision_times`` must be strictly increasing, start at 0 and end
    strictly before ``horizon``; an empty tuple is the degenerate
    zero-decision game. ``termination_floors`` are the (Blue, Red)
    population levels at or below which the engagement stops early.
    """

    n_actions: int
    decision_times: tuple[float, ...]
    horizon: float
    termination_floors: tuple[float, float] = (1e-3, 1e-5)
    step: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "decision_times",
                           tuple(float(t) for t in self.decision_times))
        object.__setattr__(self, "termination_floors",
                           (float(self.termination_floors[0]),
                            float(self.termination_floors[1])))
        if self.n_actions < 2:
            raise ValidationError("n_actions must be >= 2")
        times = self.decision_times
        if times:
            if times[0] != 0.0:
                raise ValidationError("decision_times must start at 0")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValidationError("decision_times must be strictly increasing")
            if times[-1] >= self.horizon:
                raise ValidationError("last decision time must precede the horizon")
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive")
        if self.step <= 0:
            raise ValidationError("step must be positive")
        if self.termination_floors[0] < 0 or self.termination_floors[1] < 0:
            raise ValidationError("termination floors must be non-negative")

    @property
    def n_stages(self) -> int:
        return len(self.decision_times)

    def stage_window(self, stage: int) -> tuple[float, float]:
        """Integration window [start, end) covered by the given stage."""
        if not 0 <= stage < self.n_stages:
            raise ValidationError(f"stage {stage} out of range")
        start = self.decision_times[stage]
        end = self.decision_times[stage + 1] if stage + 1 < self.n_stages else self.horizon
        return start, end

    def to_dict(self) -> dict:
        return {
            "n_actions": self.n_actions,
            "decision_times": list(self.decision_times),
            "horizon": self.horizon,
            "termination_floors": list(self.termination_floors),
            "step": self.step,
        }


@dataclass(frozen=True)
class ActionGrid:
    """Evenly spaced lag targets spanning [0, pi], endpoints included."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValidationError("action grid needs at least 2 values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValidationError("action grid must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, idx: int) -> float:
        return self.values[idx]


@functools.lru_cache(maxsize=None)
def make_action_grid(n_actions: int) -> ActionGrid:
    """Grid {k * pi / (B - 1) : k = 0..B-1} shared by both players."""
    if n_actions < 2:
        raise ValidationError("n_actions must be >= 2")
    b = n_actions
    return ActionGrid(tuple(k * np.pi / (b - 1) for k in range(b)))


@dataclass(frozen=True)
class GameState:
    """A node of the staged game: dynamics state plus decision history."""

    system: SystemState
    stage: int = 0
    history: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.stage != len(self.history):
            raise ValidationError("stage must equal history length")
        if self.stage < 0:
            raise ValidationError("stage must be non-negative")


class TerminalStatus(NamedTuple):
    terminal: bool
    reason: str | None


class EquilibriumCell(NamedTuple):
    """Security cell of a utility matrix: max over rows of row minima."""

    blue_index: int
    red_index: int
    value: float


def apply_actions(state: GameState, blue_idx: int, red_idx: int, config: GameConfig,
                  topo: NetworkTopology, params: BklParameters) -> GameState:
    """Advance one stage with both players' committed grid actions.

    Integrates from the current decision time to the next one (or to the
    horizon from the last decision point) holding the chosen lags fixed.
    """
    status = is_terminal(state, config)
    if status.terminal:
        raise ValidationError(f"cannot act on a terminal state ({status.reason})")
    grid = make_action_grid(config.n_actions)
    if not (0 <= blue_idx < len(grid) and 0 <= red_idx < len(grid)):
        raise ValidationError(
            f"action indices ({blue_idx}, {red_idx}) outside grid of size {len(grid)}")
    start, end = config.stage_window(state.stage)
    system = integrate_final(state.system, topo, params, grid[blue_idx], grid[red_idx],
                             duration=end - start, step=min(config.step, end - start))
    return GameState(system=system, stage=state.stage + 1,
                     history=state.history + ((blue_idx, red_idx),))


def is_terminal(state: GameState, config: GameConfig) -> TerminalStatus:
    """Stop at the horizon or when either side hits its termination floor."""
    gamma_b, gamma_r = config.termination_floors
    if state.system.pop_blue <= gamma_b:
        return TerminalStatus(True, "blue_depleted")
    if state.system.pop_red <= gamma_r:
        return TerminalStatus(True, "red_depleted")
    if state.stage >= config.n_stages:
        return TerminalStatus(True, "horizon")
    return TerminalStatus(False, None)


def terminal_utility(state: GameState) -> tuple[float, float]:
    """Strength balance (Blue, Red); zero-sum. Valid mid-game as well."""
    u_blue = state.system.pop_blue - state.system.pop_red
    return u_blue, -u_blue


def security_solve(matrix: np.ndarray) -> EquilibriumCell:
    """Max-min cell of a Blue-utility matrix (rows Blue, columns Red).

    Ties are broken by lowest index for both players, so exact solvers that
    share this routine produce identical paths. If the matrix has a saddle
    point the returned cell is a pure equilibrium.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValidationError(f"utility matrix must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("utility matrix contains non-finite entries")
    row_minima = m.min(axis=1)
    blue = int(np.argmax(row_minima))
    red = int(np.argmin(m[blue]))
    return EquilibriumCell(blue_index=blue, red_index=red, value=float(row_minima[blue]))
