"""Figure rendering from the simulator's output files.

Each kind maps a fixed input schema onto one image; styling is fixed here
(with the few overrides FigureSpec carries) so identical inputs give
byte-identical images.
"""

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import (PLATEAU_TRACES, SchemaMismatch, read_branches_csv,
                   read_grid_csv, read_plateau_csv, read_sticks_json)

KINDS = ("sweep-map", "plateau", "pump-probe", "sticks")

STYLE = {
    "figure.dpi": 130,
    "font.size": 9,
    "axes.linewidth": 0.8,
    "svg.hashsalt": "trionw-figures",
}

TRACE_COLORS = {
    "lambda_up": "#c43d3d",
    "lambda_down": "#3d5ac4",
    "cycling_up": "#d88a2c",
    "cycling_down": "#3d9949",
}


@dataclass
class FigureSpec:
    """One figure request: inputs, kind, axis ranges, output path."""

    kind: str
    inputs: list
    out_path: str
    xlim: tuple | None = None
    ylim: tuple | None = None
    cmap: str = "inferno"
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _finish(fig, ax, spec):
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    if spec.title:
        ax.set_title(spec.title)
    fig.savefig(spec.out_path, metadata=_metadata(spec.out_path))
    plt.close(fig)
    return spec.out_path


def _metadata(path):
    # strip timestamps so repeated renders are byte-identical
    if path.endswith(".svg"):
        return {"Date": None}
    if path.endswith(".pdf"):
        return {"CreationDate": None}
    return {}


def _render_sweep_map(spec):
    grid = read_grid_csv(spec.inputs[0])
    branches = (read_branches_csv(spec.inputs[1])
                if len(spec.inputs) > 1 else None)
    if branches is None:
        fig, ax = plt.subplots(figsize=(4.6, 3.4), constrained_layout=True)
    else:
        fig, (ax_b, ax) = plt.subplots(
            2, 1, figsize=(4.6, 5.4), sharex=True, constrained_layout=True,
            height_ratios=[1, 1.6])
        for label in sorted(branches.energies):
            ax_b.plot(branches.sweep_values, branches.energies[label],
                      lw=0.9, label=label)
        ax_b.set_ylabel("state energy (ueV)")
        ax_b.legend(fontsize=5, ncols=2, frameon=False)
    mesh = ax.pcolormesh(grid.sweep_values, grid.energies, grid.signal.T,
                         cmap=spec.cmap, shading="auto", rasterized=True)
    fig.colorbar(mesh, ax=ax, label="intensity (arb.)")
    ax.set_xlabel("magnetic field (T)")
    ax.set_ylabel("transition energy (ueV)")
    return _finish(fig, ax, spec)


def _render_plateau(spec):
    data = read_plateau_csv(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(4.6, 3.2), constrained_layout=True)
    for name in PLATEAU_TRACES:
        ax.plot(data.v_mv, data.traces[name], marker="o", ms=2.5, lw=1.0,
                color=TRACE_COLORS[name], label=name.replace("_", " "))
    ax.set_xlabel("bias (mV)")
    ax.set_ylabel("peak intensity (arb.)")
    ax.legend(fontsize=7, frameon=False)
    return _finish(fig, ax, spec)


def _render_pump_probe(spec):
    grids = [read_grid_csv(path) for path in spec.inputs]
    fig, axes = plt.subplots(1, len(grids),
                             figsize=(3.4 * len(grids) + 1.0, 3.2),
                             constrained_layout=True, squeeze=False)
    for ax, grid, path in zip(axes[0], grids, spec.inputs):
        masked = np.ma.masked_invalid(grid.signal.T)
        mesh = ax.pcolormesh(grid.sweep_values, grid.energies, masked,
                             cmap=spec.cmap, shading="auto", rasterized=True)
        fig.colorbar(mesh, ax=ax, label="probe signal (arb.)")
        ax.set_xlabel("initialization energy (ueV)")
        ax.set_ylabel("measurement energy (ueV)")
    return _finish(fig, axes[0][0], spec)


def _render_sticks(spec):
    data = read_sticks_json(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(4.6, 3.0), constrained_layout=True)
    for ln in data.lines:
        if ln["dark"]:
            continue
        color = "#c43d3d" if ln["ground_spin"] > 0 else "#222222"
        ax.vlines(ln["energy"], 0.0, ln["strength"], color=color,
                  lw=1.4 if ln["strength"] > 0.5 else 0.9)
    ax.axhline(0.0, color="#888888", lw=0.6)
    ax.set_xlabel("transition energy (ueV)")
    ax.set_ylabel("oscillator strength (norm.)")
    return _finish(fig, ax, spec)


_RENDERERS = {
    "sweep-map": _render_sweep_map,
    "plateau": _render_plateau,
    "pump-probe": _render_pump_probe,
    "sticks": _render_sticks,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path.

    Never mutates the inputs; rendering the same inputs twice produces
    byte-identical image files.
    """
    with plt.rc_context(STYLE):
        try:
            return _RENDERERS[spec.kind](spec)
        except OSError as exc:
            raise SchemaMismatch(f"cannot read input: {exc}")
