"""Coupled two-network oscillator-attrition dynamics and game-tree solvers."""

from .dynamics import (BklParameters, NetworkTopology, SystemState, Trajectory,
                       bkl_derivative, build_cross_links, generate_hierarchy,
                       generate_random_graph, integrate_segment,
                       lanchester_closed_form, order_parameter, phase_derivative)
from .errors import BklError, IntegrationError, ValidationError
from .game import (ActionGrid, EquilibriumCell, GameConfig, GameState,
                   apply_actions, is_terminal, make_action_grid, security_solve,
                   terminal_utility)
from .solvers import (MctsConfig, MctsSearch, SolveReport, replay_path, solve,
                      solve_full_tree, solve_mcts, solve_myopic,
                      solve_nash_dominant)

__version__ = "0.1.0"
