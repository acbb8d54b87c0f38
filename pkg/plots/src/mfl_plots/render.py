"""Figure rendering.

Three kinds: seed-averaged decay curves (one per temperature), a
two-arm comparison of objective curves, and a terminal particle
configuration scatter with the target atoms overlaid.

Rendering is a pure function of the input files: a fixed style, no
timestamps in the output metadata and a pinned SVG hash salt make
re-renders byte-identical under fixed library versions.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "mfl-plots"
import matplotlib.pyplot as plt  # noqa: E402

from .io import read_particle_snapshot, read_trace_csv  # noqa: E402
from .spec import CurveGroup, PlotSpec  # noqa: E402

_SAVE_KW = dict(dpi=120, metadata={"Date": None})


def assemble_curve(group: CurveGroup, column: str) -> tuple[np.ndarray, np.ndarray]:
    """Mean of one column across a group's traces, on their shared step grid."""
    tables = [read_trace_csv(p) for p in group.traces]
    steps = tables[0].steps
    for tb in tables[1:]:
        if not np.array_equal(tb.steps, steps):
            raise ValueError(
                f"{tb.path}: step grid differs from {tables[0].path}; "
                "curves can only average traces with matching checkpoints"
            )
    values = np.mean([tb.column(column) for tb in tables], axis=0)
    return steps, values


def normalize_end_at_one(values: np.ndarray) -> np.ndarray:
    """Vertical shift so the final value is exactly 1.0."""
    shifted = values - values[-1]
    return shifted + 1.0


def _render_curves(spec: PlotSpec, ylabel: str) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for group in spec.curves:
        steps, values = assemble_curve(group, spec.column)
        if spec.kind == "decay" and spec.normalize:
            values = normalize_end_at_one(values)
        ax.plot(steps, values, label=group.label, linewidth=1.4)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _render_scatter(spec: PlotSpec) -> plt.Figure:
    cloud = read_particle_snapshot(spec.snapshot)
    if cloud.positions.shape[1] != 2:
        raise ValueError("config-scatter needs 2-D snapshots")
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    ax.scatter(cloud.positions[:, 0], cloud.positions[:, 1],
               s=14, c="black", label="particles", zorder=2)
    if spec.target:
        target = read_particle_snapshot(spec.target)
        ax.scatter(target.positions[:, 0], target.positions[:, 1],
                   s=42, c="red", marker="o", label="target atoms", zorder=3)
    period = cloud.period if cloud.domain == "torus" else None
    if period:
        ax.set_xlim(0, period)
        ax.set_ylim(0, period)
    ax.set_aspect("equal")
    ax.legend(frameon=False, loc="upper right")
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> str:
    """Render the figure described by ``spec`` and write the image file."""
    if spec.kind == "decay":
        label = spec.column + (" (shifted to end at 1)" if spec.normalize else "")
        fig = _render_curves(spec, ylabel=label)
    elif spec.kind == "compare":
        fig = _render_curves(spec, ylabel=spec.column)
    else:
        fig = _render_scatter(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, **_SAVE_KW)
    plt.close(fig)
    return str(out)
