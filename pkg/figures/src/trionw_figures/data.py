"""Readers for the simulator's documented CSV/JSON output schemas.

Inputs are validated strictly: a file that does not match its declared
schema raises SchemaMismatch, and a known schema with columns missing
raises MissingColumn naming the first absent column.
"""

import json
import math
from dataclasses import dataclass

import numpy as np


class SchemaMismatch(ValueError):
    """Input file does not follow the declared CSV/JSON schema."""


class MissingColumn(SchemaMismatch):
    def __init__(self, column, path):
        super().__init__(f"missing column {column!r} in {path}")
        self.column = column


PLATEAU_TRACES = ("lambda_up", "lambda_down", "cycling_up", "cycling_down")


@dataclass
class GridData:
    """Spectrum-grid CSV: sweep values, energy columns, signal matrix."""

    sweep_values: np.ndarray
    energies: np.ndarray
    signal: np.ndarray  # NaN where the run masked the cell


def read_grid_csv(path) -> GridData:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "sweep_value":
            raise MissingColumn("sweep_value", path)
        if len(header) < 2:
            raise SchemaMismatch(f"{path}: no energy columns")
        try:
            energies = np.array([float(c) for c in header[1:]])
        except ValueError:
            raise SchemaMismatch(f"{path}: energy header is not numeric")
        sweeps, rows = [], []
        for k, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(header):
                raise SchemaMismatch(
                    f"{path}: line {k} has {len(cells)} cells, "
                    f"expected {len(header)}")
            sweeps.append(float(cells[0]))
            rows.append([float(c) if c else math.nan for c in cells[1:]])
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return GridData(np.array(sweeps), energies, np.array(rows))


@dataclass
class BranchData:
    """Eigen-branch CSV: energies per branch over the sweep."""

    sweep_values: np.ndarray
    energies: dict        # branch label -> energy array


def read_branches_csv(path) -> BranchData:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        for col in ("sweep_value", "branch_id", "label", "energy_microev"):
            if col not in header:
                raise MissingColumn(col, path)
        ix = {c: header.index(c) for c in ("sweep_value", "branch_id",
                                           "label", "energy_microev")}
        rows = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            rows.append((float(cells[ix["sweep_value"]]),
                         cells[ix["branch_id"]],
                         cells[ix["label"]],
                         float(cells[ix["energy_microev"]])))
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    sweeps = sorted({r[0] for r in rows})
    branches = {}
    for sweep, bid, label, energy in rows:
        branches.setdefault((bid, label), {})[sweep] = energy
    energies = {}
    for (bid, label), series in branches.items():
        if len(series) != len(sweeps):
            raise SchemaMismatch(
                f"{path}: branch {bid} has {len(series)} points, "
                f"expected {len(sweeps)}")
        energies[label] = np.array([series[s] for s in sweeps])
    return BranchData(np.array(sweeps), energies)


@dataclass
class PlateauData:
    v_mv: np.ndarray
    traces: dict          # trace name -> array


def read_plateau_csv(path) -> PlateauData:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:1] != ["v_mv"]:
            raise MissingColumn("v_mv", path)
        for col in PLATEAU_TRACES:
            if col not in header:
                raise MissingColumn(col, path)
        idx = {c: header.index(c) for c in PLATEAU_TRACES}
        vs, cols = [], {c: [] for c in PLATEAU_TRACES}
        for k, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(header):
                raise SchemaMismatch(f"{path}: line {k} is truncated")
            vs.append(float(cells[0]))
            for c in PLATEAU_TRACES:
                cols[c].append(float(cells[idx[c]]))
    if not vs:
        raise SchemaMismatch(f"{path}: no data rows")
    return PlateauData(np.array(vs), {c: np.array(v) for c, v in cols.items()})


@dataclass
class StickData:
    lines: list           # dicts with energy/strength/ground_spin/... fields


def read_sticks_json(path) -> StickData:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path}: not valid JSON ({exc})")
    if not isinstance(payload, dict) or "lines" not in payload:
        raise MissingColumn("lines", path)
    required = {"energy", "strength", "ground_spin", "polarization", "dark"}
    for k, ln in enumerate(payload["lines"]):
        missing = required - set(ln)
        if missing:
            raise MissingColumn(sorted(missing)[0], path)
    return StickData(payload["lines"])
