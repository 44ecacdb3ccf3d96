"""Figure renderers over the solver CLI's delimited artifacts.

Pure readers: every function takes files the engine already wrote
(trajectory/path/heatmap/bench CSVs plus the run manifest) and renders a
matplotlib figure. Nothing here recomputes dynamics or solutions, and
rendering is deterministic for fixed inputs and style options.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

FIGURE_KINDS = ("trajectory", "polar-actions", "heatmap", "scaling")

_SCHEMAS = {
    "trajectory": {"t", "pop_blue", "pop_red", "phi", "psi"},
    "polar-actions": {"stage", "phi", "psi"},
    "heatmap": {"zeta_b", "zeta_r", "solver", "value"},
    "scaling": {"solver", "tree_size", "wall_ms_mean"},
}


class SchemaError(ValueError):
    """Input file does not match the expected artifact schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: input artifact(s), kind, destination, style."""

    kind: str
    source: Path
    output: Path
    manifest: Path | None = None
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {FIGURE_KINDS}")
        if not Path(self.source).exists():
            raise SchemaError(f"input file {self.source} does not exist")
        if self.manifest is not None and not Path(self.manifest).exists():
            raise SchemaError(f"manifest {self.manifest} does not exist")


def _load_frame(path, kind: str) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = _SCHEMAS[kind] - set(frame.columns)
    if missing:
        raise SchemaError(
            f"{path} is missing column(s) {sorted(missing)} required for {kind}")
    return frame


def _load_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def find_manifest(source: Path) -> Path | None:
    """The engine writes manifest.json next to its artifacts."""
    candidate = Path(source).parent / "manifest.json"
    return candidate if candidate.exists() else None


def plot_trajectory(source, decision_times=None, manifest=None,
                    style=None) -> plt.Figure:
    """Force-balance curve with one vertical marker per decision time."""
    style = style or {}
    frame = _load_frame(source, "trajectory").sort_values("t")
    if decision_times is None:
        if manifest is None:
            raise SchemaError("trajectory figures need decision times: pass them "
                              "directly or provide the run manifest")
        decision_times = _load_manifest(manifest)["decision_times"]
    fig, ax = plt.subplots(figsize=style.get("figsize", (7, 4)))
    diff = frame["pop_blue"] - frame["pop_red"]
    ax.plot(frame["t"], diff, color="black", lw=1.5, label="blue - red strength")
    for t in decision_times:
        ax.axvline(t, color="green", lw=1.0, alpha=0.8)
    ax.set_xlabel("time")
    ax.set_ylabel("force strength difference")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def plot_polar_actions(source, style=None) -> plt.Figure:
    """Committed lag targets on a polar axis, radius increasing with stage."""
    style = style or {}
    frame = _load_frame(source, "polar-actions").sort_values("stage")
    fig = plt.figure(figsize=style.get("figsize", (5, 5)))
    ax = fig.add_subplot(projection="polar")
    radius = frame["stage"].to_numpy(dtype=float) + 1.0
    ax.plot(frame["phi"], radius, "o-", color="tab:blue", label="blue lag")
    ax.plot(frame["psi"], radius, "s-", color="tab:red", label="red lag")
    ax.set_rticks(radius)
    ax.set_rlabel_position(135)
    ax.legend(loc="lower left", bbox_to_anchor=(1.0, 0.9))
    fig.tight_layout()
    return fig


def plot_heatmap(source, center=None, manifest=None, style=None) -> plt.Figure:
    """Coupling-sweep utilities, one panel per solver, diverging about center.

    The diverging scale is centred on the run's initial utility (from the
    manifest unless given explicitly); colours below the centre mark cells
    where the second player gained ground.
    """
    style = style or {}
    frame = _load_frame(source, "heatmap")
    if center is None:
        if manifest is None:
            raise SchemaError("heatmap figures need a centre value: pass one "
                              "directly or provide the run manifest")
        center = _load_manifest(manifest)["initial_utility"]
    solvers = list(dict.fromkeys(frame["solver"]))
    fig, axes = plt.subplots(1, len(solvers),
                             figsize=style.get("figsize", (4.5 * len(solvers), 4)),
                             squeeze=False)
    span = max(float(np.nanmax(np.abs(frame["value"] - center))), 1e-9)
    mesh = None
    for ax, solver in zip(axes[0], solvers):
        pivot = frame[frame["solver"] == solver].pivot(
            index="zeta_r", columns="zeta_b", values="value")
        mesh = ax.pcolormesh(pivot.columns, pivot.index, pivot.to_numpy(),
                             cmap=style.get("cmap", "RdBu"),
                             vmin=center - span, vmax=center + span)
        ax.set_title(solver)
        ax.set_xlabel("blue internal coupling")
        ax.set_ylabel("red internal coupling")
    fig.colorbar(mesh, ax=axes[0], label="blue utility")
    return fig


def plot_scaling(source, style=None) -> plt.Figure:
    """Log-log wall time against tree size, one series per solver."""
    style = style or {}
    frame = _load_frame(source, "scaling")
    fig, ax = plt.subplots(figsize=style.get("figsize", (6, 4.5)))
    for solver, group in frame.groupby("solver", sort=False):
        group = group.sort_values("tree_size")
        ax.loglog(group["tree_size"], group["wall_ms_mean"], "o-", label=solver)
    ax.set_xlabel("game tree size")
    ax.set_ylabel("wall time (ms)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render one spec to its output path and return that path."""
    manifest = spec.manifest or find_manifest(spec.source)
    if spec.kind == "trajectory":
        fig = plot_trajectory(spec.source, manifest=manifest, style=spec.style)
    elif spec.kind == "polar-actions":
        fig = plot_polar_actions(spec.source, style=spec.style)
    elif spec.kind == "heatmap":
        fig = plot_heatmap(spec.source, center=spec.style.get("center"),
                           manifest=manifest, style=spec.style)
    else:
        fig = plot_scaling(spec.source, style=spec.style)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=spec.style.get("dpi", 150),
                metadata={"Software": None})
    plt.close(fig)
    return out
