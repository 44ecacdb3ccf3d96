import numpy as np
import pytest

from bklgame.dynamics import (BklParameters, NetworkTopology, SystemState,
                              build_cross_links, draw_frequencies,
                              generate_hierarchy, generate_random_graph)
from bklgame.game import GameConfig


def make_scenario(n_actions=2, n_stages=2, window=20.0, step=2.0, kappa=0.01,
                  seed=7, pops=(100.0, 47.0), n_blue=5, n_red=5,
                  zeta=(0.5, 0.5, 0.4, 0.4), floors=(1e-3, 1e-5)):
    """Small, fast game instance used across the solver and game tests."""
    blue = generate_hierarchy(n_blue, 2)
    red = generate_random_graph(n_red, 0.6, seed + 1)
    cross = build_cross_links(blue, red, 2, 2, seed + 2)
    topo = NetworkTopology(blue, red, cross)
    params = BklParameters(
        omega=draw_frequencies(n_blue, 0.5032, 0.05, seed + 3),
        nu=draw_frequencies(n_red, 0.5513, 0.05, seed + 4),
        zeta_b=zeta[0], zeta_r=zeta[1], zeta_br=zeta[2], zeta_rb=zeta[3],
        kappa_br=kappa, kappa_rb=kappa)
    rng = np.random.default_rng(seed + 5)
    state = SystemState(beta=rng.uniform(0, 2 * np.pi, n_blue),
                        rho=rng.uniform(0, 2 * np.pi, n_red),
                        pop_blue=pops[0], pop_red=pops[1])
    config = GameConfig(n_actions=n_actions,
                        decision_times=tuple(i * window for i in range(n_stages)),
                        horizon=n_stages * window,
                        termination_floors=floors, step=step)
    return topo, params, state, config


@pytest.fixture
def small_scenario():
    return make_scenario()
