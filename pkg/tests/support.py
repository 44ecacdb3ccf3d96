"""Shared test apparatus: synthetic tree games that replace the dynamics.

These implement the same minimal interface the solvers consume, with payoffs
that are pure deterministic functions of the decision history, so solver
behaviour can be checked against brute force without touching the ODEs.
"""

import hashlib
import struct


class PayoffTreeGame:
    """Fixed-depth tree whose node payoffs are a seeded hash of the history.

    Every node (terminal or not) has a utility in [-1, 1); terminality is
    purely depth-based.
    """

    def __init__(self, n_actions: int, depth: int, seed: int):
        self.n_actions = n_actions
        self.depth = depth
        self.seed = seed

    def root(self):
        return ()

    def is_terminal(self, node) -> bool:
        return len(node) >= self.depth

    def child(self, node, blue_idx, red_idx):
        return node + ((blue_idx, red_idx),)

    def utility(self, node) -> float:
        blob = repr((self.seed, node)).encode()
        digest = hashlib.blake2b(blob, digest_size=8).digest()
        (raw,) = struct.unpack(">Q", digest)
        return raw / 2.0 ** 63 - 1.0


class BlueLadderGame(PayoffTreeGame):
    """Payoff rewards Blue for playing action 0 at every stage.

    utility = sum over played stages of 2^-stage * [blue action == 0], so at
    every node the zero row strictly dominates and each later row's first
    entry already proves the row dominated. Best-case shape for pruning:
    exactly 2B-1 children explored per node.
    """

    def utility(self, node) -> float:
        return sum(2.0 ** -s for s, (b, _) in enumerate(node) if b == 0)


class ConstantGame(PayoffTreeGame):
    """Every node scores the same constant."""

    def __init__(self, n_actions: int, depth: int, constant: float = 3.5):
        super().__init__(n_actions, depth, seed=0)
        self.constant = constant

    def utility(self, node) -> float:
        return self.constant


class DominantRowDepthOneGame(PayoffTreeGame):
    """Depth-1 game where Blue action 0 strictly dominates.

    utility(b, r) = (1 if b == 0 else 0) + 0.01 * r, so the security row is
    0 regardless of sampling balance.
    """

    def __init__(self, n_actions: int):
        super().__init__(n_actions, depth=1, seed=0)

    def utility(self, node) -> float:
        if not node:
            return 0.0
        b, r = node[-1]
        return (1.0 if b == 0 else 0.0) + 0.01 * r


def brute_force_value(game, node=None):
    """Independent recursive oracle: security value by full enumeration."""
    if node is None:
        node = game.root()
    if game.is_terminal(node):
        return game.utility(node)
    b = game.n_actions
    rows = []
    for bi in range(b):
        row = [brute_force_value(game, game.child(node, bi, ri)) for ri in range(b)]
        rows.append(min(row))
    return max(rows)
