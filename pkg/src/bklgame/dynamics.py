"""Two-network coupled oscillator dynamics with population attrition.

Two adversarial groups, Blue (N agents) and Red (M agents), each run an
internal Kuramoto-Sakaguchi phase model and couple to the other group through
a bipartite contact graph with a controllable phase lag:

    dbeta_i/dt = omega_i
                 - zeta_b * sum_j B_ij sin(beta_i - beta_j) / sum_j B_ij
                 - zeta_br * sum_j A_ij sin(beta_i - rho_j - phi)
    drho_i/dt  = nu_i
                 - zeta_r * sum_j R_ij sin(rho_i - rho_j) / sum_j R_ij
                 - zeta_rb * sum_j A^T_ij sin(rho_i - beta_j - psi)

The lags phi (Blue) and psi (Red) are the players' control variables: each
side tries to hold its mean phase ahead of the opponent's by that amount.

Group synchrony and relative phase gate a Lanchester attrition layer on the
force strengths P_B, P_R:

    dP_B/dt = -kappa_rb * r_R * (sin(mean_rho - mean_beta) + 1)/2 * P_R
    dP_R/dt = -kappa_br * r_B * (sin(mean_beta - mean_rho) + 1)/2 * P_B

where r_B, r_R are the groups' order-parameter magnitudes
|sum exp(i theta)| / K and mean_* are arithmetic mean phases (a
circular-mean variant is available via ``BklParameters.circular_mean``).
Populations are clamped at zero: a depleted side neither decays further nor
inflicts losses.

Integration uses a fixed-step Dormand-Prince 5(4) scheme (5th-order
propagation, no step-size control) so that repeated runs are bit-identical
and segment cost is a known constant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernel
from .errors import IntegrationError, ValidationError

__all__ = [
    "NetworkTopology",
    "BklParameters",
    "SystemState",
    "Trajectory",
    "StateDerivative",
    "phase_derivative",
    "order_parameter",
    "bkl_derivative",
    "lanchester_closed_form",
    "integrate_segment",
    "integrate_final",
    "generate_hierarchy",
    "generate_random_graph",
    "build_cross_links",
    "draw_frequencies",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]

TRAJECTORY_COLUMNS = ("t", "pop_blue", "pop_red", "order_blue", "order_red",
                      "mean_beta", "mean_rho", "phi", "psi")


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkTopology:
    """Adjacency structure of the engagement.

    ``blue_adj`` (N x N) and ``red_adj`` (M x M) are symmetric, zero-diagonal
    intra-group graphs with no isolated nodes (the internal coupling divides
    by row sums). ``cross_adj`` (N x M) holds the Blue-to-Red contact links;
    the Red-to-Blue direction is its transpose by construction.
    """

    blue_adj: np.ndarray
    red_adj: np.ndarray
    cross_adj: np.ndarray
    blue_row_sums: np.ndarray = field(init=False, repr=False, compare=False)
    red_row_sums: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        blue = _as_matrix(self.blue_adj, "blue_adj")
        red = _as_matrix(self.red_adj, "red_adj")
        cross = _as_matrix(self.cross_adj, "cross_adj")
        n, m = blue.shape[0], red.shape[0]
        if blue.shape != (n, n):
            raise ValidationError(f"blue_adj must be square, got {blue.shape}")
        if red.shape != (m, m):
            raise ValidationError(f"red_adj must be square, got {red.shape}")
        if cross.shape != (n, m):
            raise ValidationError(
                f"cross_adj must be {n}x{m} to match blue/red sizes, got {cross.shape}")
        for name, mat in (("blue_adj", blue), ("red_adj", red), ("cross_adj", cross)):
            if np.any(mat < 0):
                raise ValidationError(f"{name} has negative weights")
        for name, mat in (("blue_adj", blue), ("red_adj", red)):
            if not np.array_equal(mat, mat.T):
                raise ValidationError(f"{name} must be symmetric")
            if np.any(np.diag(mat) != 0):
                raise ValidationError(f"{name} must have a zero diagonal")
            if np.any(mat.sum(axis=1) <= 0):
                raise ValidationError(f"{name} has an isolated node (zero row sum)")
        object.__setattr__(self, "blue_adj", _freeze(blue))
        object.__setattr__(self, "red_adj", _freeze(red))
        object.__setattr__(self, "cross_adj", _freeze(cross))
        object.__setattr__(self, "blue_row_sums", _freeze(blue.sum(axis=1)))
        object.__setattr__(self, "red_row_sums", _freeze(red.sum(axis=1)))

    @property
    def n_blue(self) -> int:
        return self.blue_adj.shape[0]

    @property
    def n_red(self) -> int:
        return self.red_adj.shape[0]

    def to_dict(self) -> dict:
        return {
            "blue_adj": self.blue_adj.tolist(),
            "red_adj": self.red_adj.tolist(),
            "cross_adj": self.cross_adj.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkTopology":
        try:
            return cls(data["blue_adj"], data["red_adj"], data["cross_adj"])
        except KeyError as exc:
            raise ValidationError(f"topology document missing key {exc}") from exc


@dataclass(frozen=True)
class BklParameters:
    """All scalar and vector coefficients of the coupled model.

    ``epsilon1``/``epsilon2`` are reserved numeric floors carried through
    configuration for compatibility; the dynamics do not consume them.
    ``gamma_b``/``gamma_r`` are the per-player population floors used as the
    game's early-termination thresholds.
    """

    omega: np.ndarray
    nu: np.ndarray
    zeta_b: float = 0.5
    zeta_r: float = 0.5
    zeta_br: float = 0.4
    zeta_rb: float = 0.4
    kappa_br: float = 0.005
    kappa_rb: float = 0.005
    epsilon1: float = 1e-15
    epsilon2: float = 1e-20
    gamma_b: float = 1e-3
    gamma_r: float = 1e-5
    circular_mean: bool = False

    def __post_init__(self):
        object.__setattr__(self, "omega", _freeze(_as_vector(self.omega, "omega")))
        object.__setattr__(self, "nu", _freeze(_as_vector(self.nu, "nu")))
        for name in ("zeta_b", "zeta_r", "zeta_br", "zeta_rb", "kappa_br", "kappa_rb"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    def validate_against(self, topo: NetworkTopology) -> None:
        if self.omega.shape[0] != topo.n_blue:
            raise ValidationError(
                f"omega has length {self.omega.shape[0]}, topology has {topo.n_blue} Blue nodes")
        if self.nu.shape[0] != topo.n_red:
            raise ValidationError(
                f"nu has length {self.nu.shape[0]}, topology has {topo.n_red} Red nodes")

    def to_dict(self) -> dict:
        return {
            "omega": self.omega.tolist(),
            "nu": self.nu.tolist(),
            "zeta_b": self.zeta_b,
            "zeta_r": self.zeta_r,
            "zeta_br": self.zeta_br,
            "zeta_rb": self.zeta_rb,
            "kappa_br": self.kappa_br,
            "kappa_rb": self.kappa_rb,
            "epsilon1": self.epsilon1,
            "epsilon2": self.epsilon2,
            "gamma_b": self.gamma_b,
            "gamma_r": self.gamma_r,
            "circular_mean": self.circular_mean,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BklParameters":
        try:
            return cls(**data)
        except TypeError as exc:
            raise ValidationError(f"bad parameter document: {exc}") from exc


@dataclass(frozen=True)
class SystemState:
    """Instantaneous model state: phases, force strengths, and clock."""

    beta: np.ndarray
    rho: np.ndarray
    pop_blue: float
    pop_red: float
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _freeze(_as_vector(self.beta, "beta")))
        object.__setattr__(self, "rho", _freeze(_as_vector(self.rho, "rho")))
        object.__setattr__(self, "pop_blue", float(self.pop_blue))
        object.__setattr__(self, "pop_red", float(self.pop_red))
        object.__setattr__(self, "time", float(self.time))
        if self.pop_blue < 0 or self.pop_red < 0:
            raise ValidationError("populations must be non-negative")
        if self.time < 0:
            raise ValidationError("time must be non-negative")

    def packed(self) -> np.ndarray:
        """Flat state vector ``[beta, rho, P_B, P_R]`` (a fresh copy)."""
        return np.concatenate([self.beta, self.rho, [self.pop_blue, self.pop_red]])


class StateDerivative(NamedTuple):
    dbeta: np.ndarray
    drho: np.ndarray
    dpop_blue: float
    dpop_red: float


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one integration segment at fixed actions."""

    samples: tuple[SystemState, ...]
    step_size: float
    phi: float
    psi: float

    def __post_init__(self):
        if not self.samples:
            raise ValidationError("trajectory must contain at least the initial state")
        times = [s.time for s in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("trajectory sample times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.samples])

    @property
    def final_state(self) -> SystemState:
        return self.samples[-1]


def _trusted_state(beta: np.ndarray, rho: np.ndarray, pop_blue: float,
                   pop_red: float, time: float) -> SystemState:
    """Build a SystemState from kernel output, skipping re-validation.

    The kernel clamps populations at zero and its inputs were validated, so
    the invariants hold by construction; this bypass matters in tree solvers
    that construct millions of states.
    """
    state = object.__new__(SystemState)
    object.__setattr__(state, "beta", _freeze(beta))
    object.__setattr__(state, "rho", _freeze(rho))
    object.__setattr__(state, "pop_blue", float(pop_blue))
    object.__setattr__(state, "pop_red", float(pop_red))
    object.__setattr__(state, "time", float(time))
    return state


def _check_dimensions(state: SystemState, topo: NetworkTopology, params: BklParameters) -> None:
    # row-sum positivity is a NetworkTopology constructor invariant; only
    # the cheap shape agreements need checking per call
    if state.beta.shape[0] != topo.n_blue or state.rho.shape[0] != topo.n_red:
        raise ValidationError(
            f"state has {state.beta.shape[0]}+{state.rho.shape[0]} phases, "
            f"topology expects {topo.n_blue}+{topo.n_red}")
    if params.omega.shape[0] != topo.n_blue or params.nu.shape[0] != topo.n_red:
        raise ValidationError("parameter vector lengths do not match the topology")


def phase_derivative(state: SystemState, topo: NetworkTopology, params: BklParameters,
                     phi: float, psi: float) -> tuple[np.ndarray, np.ndarray]:
    """Phase velocities of both groups under lags ``phi`` (Blue), ``psi`` (Red).

    Direct transcription of the coupled model: natural frequency, minus
    row-sum-normalised internal sine coupling, minus unnormalised cross
    coupling through the contact graph (transposed for Red).
    """
    _check_dimensions(state, topo, params)
    if np.any(topo.blue_row_sums <= 0) or np.any(topo.red_row_sums <= 0):
        raise ValidationError("adjacency row sums must be positive")
    beta, rho = state.beta, state.rho
    internal_b = (topo.blue_adj * np.sin(beta[:, None] - beta[None, :])).sum(axis=1)
    cross_b = (topo.cross_adj * np.sin(beta[:, None] - rho[None, :] - phi)).sum(axis=1)
    dbeta = params.omega - params.zeta_b * internal_b / topo.blue_row_sums \
        - params.zeta_br * cross_b
    internal_r = (topo.red_adj * np.sin(rho[:, None] - rho[None, :])).sum(axis=1)
    cross_r = (topo.cross_adj.T * np.sin(rho[:, None] - beta[None, :] - psi)).sum(axis=1)
    drho = params.nu - params.zeta_r * internal_r / topo.red_row_sums \
        - params.zeta_rb * cross_r
    return dbeta, drho


def order_parameter(phases: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """Synchrony magnitude and arithmetic mean phase of a group.

    Returns ``(|sum exp(i theta)| / K, sum theta / K)``. The mean is the
    plain arithmetic mean of the (unwrapped) phases, not the circular mean.
    """
    arr = np.asarray(phases, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("order_parameter requires a non-empty phase vector")
    magnitude = float(np.abs(np.exp(1j * arr).sum()) / arr.size)
    return min(magnitude, 1.0), float(arr.mean())


def bkl_derivative(state: SystemState, topo: NetworkTopology, params: BklParameters,
                   phi: float, psi: float) -> StateDerivative:
    """Full state derivative: phase velocities plus attrition rates.

    Each side's loss rate is the opponent's strength scaled by the opponent's
    synchrony magnitude and by how far ahead (in mean phase) the opponent
    sits, mapped through (sin(delta) + 1)/2 into [0, 1]. Both attrition terms
    are always <= 0; a side at zero strength is frozen.
    """
    dbeta, drho = phase_derivative(state, topo, params, phi, psi)
    mag_blue, mean_beta = order_parameter(state.beta)
    mag_red, mean_rho = order_parameter(state.rho)
    if params.circular_mean:
        zb = np.exp(1j * state.beta).sum()
        zr = np.exp(1j * state.rho).sum()
        mean_beta = float(np.angle(zb))
        mean_rho = float(np.angle(zr))
    if state.pop_blue <= 0:
        dpb = 0.0
    else:
        dpb = -params.kappa_rb * mag_red * (math.sin(mean_rho - mean_beta) + 1.0) / 2.0 \
            * max(state.pop_red, 0.0)
    if state.pop_red <= 0:
        dpr = 0.0
    else:
        dpr = -params.kappa_br * mag_blue * (math.sin(mean_beta - mean_rho) + 1.0) / 2.0 \
            * max(state.pop_blue, 0.0)
    return StateDerivative(dbeta, drho, dpb, dpr)


def lanchester_closed_form(p_b0: float, p_r0: float, alpha_br: float, alpha_rb: float,
                           t: float) -> tuple[float, float]:
    """Analytic solution of the constant-coefficient attrition pair.

    Solves dP_B/dt = -alpha_rb * P_R, dP_R/dt = -alpha_br * P_B in the
    hyperbolic form, clamping negative values to zero. Used as the
    integrator's validation oracle.
    """
    if alpha_br < 0 or alpha_rb < 0:
        raise ValidationError("attrition constants must be non-negative")
    if t < 0:
        raise ValidationError("t must be non-negative")
    k = math.sqrt(alpha_br * alpha_rb)
    if k == 0.0:
        pb = p_b0 - alpha_rb * t * p_r0
        pr = p_r0 - alpha_br * t * p_b0
    else:
        ch, sh = math.cosh(k * t), math.sinh(k * t)
        pb = p_b0 * ch - p_r0 * math.sqrt(alpha_rb / alpha_br) * sh
        pr = p_r0 * ch - p_b0 * math.sqrt(alpha_br / alpha_rb) * sh
    return max(pb, 0.0), max(pr, 0.0)


def _step_plan(duration: float, step: float) -> tuple[int, float]:
    """Number of whole steps and the closing partial step (0 if none)."""
    n_full = int(math.floor(duration / step + 1e-12))
    h_last = duration - n_full * step
    if h_last <= step * 1e-12:
        h_last = 0.0
    return n_full, h_last


def _run_kernel(state: SystemState, topo: NetworkTopology, params: BklParameters,
                phi: float, psi: float, duration: float, step: float,
                record: bool) -> tuple[np.ndarray, int, float]:
    if duration <= 0:
        raise ValidationError("duration must be positive")
    if step <= 0:
        raise ValidationError("step must be positive")
    if step > duration:
        raise ValidationError("step must not exceed duration")
    _check_dimensions(state, topo, params)
    n_full, h_last = _step_plan(duration, step)
    y0 = state.packed()
    n_rows = (n_full + (1 if h_last > 0 else 0) + 1) if record else 1
    samples = np.empty((n_rows, y0.shape[0]))
    bad_step = _kernel.integrate_fixed(
        y0, topo.blue_adj, topo.blue_row_sums, topo.red_adj, topo.red_row_sums,
        topo.cross_adj, params.omega, params.nu,
        params.zeta_b, params.zeta_r, params.zeta_br, params.zeta_rb,
        params.kappa_br, params.kappa_rb, float(phi), float(psi),
        params.circular_mean, n_full, float(step), h_last, samples, record)
    if bad_step >= 0:
        t_bad = state.time + min(bad_step + 1, n_full) * step
        raise IntegrationError(
            f"non-finite state at step {bad_step} (t ~ {t_bad:g})", bad_step, t_bad)
    return samples, n_full, h_last


def integrate_segment(state: SystemState, topo: NetworkTopology, params: BklParameters,
                      phi: float, psi: float, duration: float, step: float) -> Trajectory:
    """Integrate one decision window holding ``(phi, psi)`` fixed.

    Fixed-step Dormand-Prince 5(4): the step size never adapts and the final
    partial step is shortened to land exactly on ``duration``. After each
    step the populations are clamped into the model's feasible set
    (non-negative, non-increasing). Pure function of its inputs; repeated
    calls are bit-identical.
    """
    samples, n_full, h_last = _run_kernel(state, topo, params, phi, psi,
                                          duration, step, record=True)
    n, m = topo.n_blue, topo.n_red
    states = []
    n_total = n_full + (1 if h_last > 0 else 0)
    for i in range(n_total + 1):
        if i == 0:
            t = state.time
        elif i <= n_full:
            t = state.time + i * step
        else:
            t = state.time + duration
        row = samples[i]
        states.append(_trusted_state(row[:n].copy(), row[n:n + m].copy(),
                                     row[n + m], row[n + m + 1], t))
    # guard against an accumulated rounding shortfall on the last full step
    if abs(states[-1].time - (state.time + duration)) > 1e-9:
        states[-1] = replace(states[-1], time=state.time + duration)
    return Trajectory(samples=tuple(states), step_size=step, phi=float(phi), psi=float(psi))


def integrate_final(state: SystemState, topo: NetworkTopology, params: BklParameters,
                    phi: float, psi: float, duration: float, step: float) -> SystemState:
    """Like ``integrate_segment`` but returns only the segment endpoint.

    Identical stepping (same kernel, same clamping); skips intermediate
    sample storage, which matters inside game-tree solvers.
    """
    samples, _, _ = _run_kernel(state, topo, params, phi, psi, duration, step, record=False)
    n, m = topo.n_blue, topo.n_red
    row = samples[0]
    return _trusted_state(row[:n].copy(), row[n:n + m].copy(), row[n + m],
                          row[n + m + 1], state.time + duration)


def generate_hierarchy(n: int, branching: int, seed: int | None = None) -> np.ndarray:
    """Adjacency of a rooted balanced tree filled level by level.

    Node 0 is the root; node k attaches to node (k-1) // branching. The
    result is symmetric and unweighted. ``seed`` is accepted for signature
    uniformity with the other generators and ignored (the tree is
    deterministic).
    """
    if n < 1:
        raise ValidationError("hierarchy size must be >= 1")
    if branching < 1:
        raise ValidationError("branching must be >= 1")
    adj = np.zeros((n, n))
    for k in range(1, n):
        parent = (k - 1) // branching
        adj[k, parent] = 1.0
        adj[parent, k] = 1.0
    return adj


def generate_random_graph(m: int, edge_prob: float, seed: int,
                          max_retries: int = 1000) -> np.ndarray:
    """Connected Erdos-Renyi draw: symmetric, zero diagonal, unweighted.

    Redraws until connected, up to ``max_retries`` attempts.
    """
    if m < 2:
        raise ValidationError("random graph needs at least 2 nodes")
    if not 0 < edge_prob <= 1:
        raise ValidationError("edge_prob must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        upper = rng.random((m, m)) < edge_prob
        adj = np.triu(upper, k=1).astype(np.float64)
        adj = adj + adj.T
        if _is_connected(adj):
            return adj
    raise ValidationError(
        f"no connected graph found in {max_retries} draws (m={m}, p={edge_prob})")


def _is_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(adj[i])[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def _node_depths(adj: np.ndarray, root: int = 0) -> np.ndarray:
    n = adj.shape[0]
    depth = np.full(n, -1, dtype=np.int64)
    depth[root] = 0
    frontier = [root]
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.nonzero(adj[i])[0]:
                if depth[j] < 0:
                    depth[j] = depth[i] + 1
                    nxt.append(int(j))
        frontier = nxt
    return depth


def build_cross_links(blue_adj: np.ndarray, red_adj: np.ndarray,
                      n_contact_blue: int, n_contact_red: int, seed: int) -> np.ndarray:
    """Contact matrix linking the groups' boundary nodes all-to-all.

    Blue contacts are taken deepest-level first from the hierarchy rooted at
    node 0 (leaves before their parents, lowest index first within a level);
    Red contacts are a seeded random subset. Non-contact nodes keep all-zero
    rows/columns and act purely internally.
    """
    n = blue_adj.shape[0]
    m = red_adj.shape[0]
    if not 0 <= n_contact_blue <= n:
        raise ValidationError("n_contact_blue out of range")
    if not 0 <= n_contact_red <= m:
        raise ValidationError("n_contact_red out of range")
    depths = _node_depths(np.asarray(blue_adj, dtype=np.float64))
    order = sorted(range(n), key=lambda i: (-depths[i], i))
    blue_contacts = order[:n_contact_blue]
    rng = np.random.default_rng(seed)
    red_contacts = rng.choice(m, size=n_contact_red, replace=False)
    cross = np.zeros((n, m))
    for i in blue_contacts:
        for j in red_contacts:
            cross[i, j] = 1.0
    return cross


def draw_frequencies(size: int, mean: float, std: float, seed: int) -> np.ndarray:
    """Seeded normal draw of natural frequencies."""
    if size < 1:
        raise ValidationError("frequency vector needs positive length")
    if std < 0:
        raise ValidationError("frequency std must be non-negative")
    rng = np.random.default_rng(seed)
    return rng.normal(mean, std, size)


def trajectory_rows(segments: Sequence[Trajectory]) -> list[dict]:
    """Flatten trajectory segments into CSV-ready rows.

    Boundary samples shared between consecutive segments are emitted once,
    carrying the lags of the window that produced them.
    """
    rows = []
    for seg_idx, seg in enumerate(segments):
        samples = seg.samples[1:] if seg_idx > 0 else seg.samples
        for s in samples:
            mag_b, mean_b = order_parameter(s.beta)
            mag_r, mean_r = order_parameter(s.rho)
            rows.append({
                "t": s.time,
                "pop_blue": s.pop_blue,
                "pop_red": s.pop_red,
                "order_blue": mag_b,
                "order_red": mag_r,
                "mean_beta": mean_b,
                "mean_rho": mean_r,
                "phi": seg.phi,
                "psi": seg.psi,
            })
    return rows


def write_trajectory_csv(path, segments: Sequence[Trajectory]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS)
        writer.writeheader()
        for row in trajectory_rows(segments):
            writer.writerow({k: repr(row[k]) for k in TRAJECTORY_COLUMNS})
