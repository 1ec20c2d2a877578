"""Deterministic CSV/JSON writers and the run manifest.

Numbers are written with 9 significant digits and '.' decimals so that
identical inputs give byte-identical files; masked grid cells become
empty CSV fields, never zeros.
"""

import hashlib
import json
import math
import os

import numpy as np


def fmt(x):
    """Canonical number rendering: 9 significant digits, blank for NaN."""
    if x is None:
        return ""
    xf = float(x)
    if math.isnan(xf):
        return ""
    return f"{xf:.9g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(c if isinstance(c, str) else fmt(c) for c in row)
                     + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def spectrum_grid_rows(grid):
    """SpectrumGrid CSV schema: header of energies, one row per sweep value."""
    header = ["sweep_value"] + [fmt(e) for e in grid.energies]
    rows = [[v] + list(sig) for v, sig in zip(grid.sweep_values, grid.signal)]
    return header, rows


def write_spectrum_grid(path, grid):
    header, rows = spectrum_grid_rows(grid)
    write_csv(path, header, rows)


def write_sweep_branches(path, grid_values, branches):
    """Eigen-branch CSV: sweep_value, branch_id, label, energy, eigenvector."""
    n_dim = branches[0].vectors.shape[1]
    header = (["sweep_value", "branch_id", "label", "energy_microev"]
              + [f"v{k}_{part}" for k in range(n_dim) for part in ("re", "im")])
    rows = []
    for i, x in enumerate(grid_values):
        for br in branches:
            vec = br.vectors[i]
            amps = []
            for a in vec:
                amps.extend((a.real, a.imag))
            rows.append([x, br.branch_id, br.label, br.energies[i]] + amps)
    write_csv(path, header, rows)


def stick_lines_payload(lines):
    return [{"energy": float(ln.energy), "strength": float(ln.strength),
             "ground_spin": float(ln.ground_spin),
             "polarization": ln.polarization, "dark": bool(ln.dark),
             "label": ln.label} for ln in lines]


def write_sticks_json(path, lines):
    write_json(path, {"lines": stick_lines_payload(lines)})


def write_sticks_csv(path, lines):
    header = ["energy", "strength", "ground_spin", "polarization", "dark",
              "label"]
    rows = [[ln.energy, ln.strength, ln.ground_spin, ln.polarization,
             "1" if ln.dark else "0", ln.label] for ln in lines]
    write_csv(path, header, rows)


def write_steady_state_json(path, rho, frame, polarization, residual):
    pops = {"ground_up": float(np.real(rho[0, 0])),
            "ground_down": float(np.real(rho[1, 1]))}
    for n, label in enumerate(frame.labels):
        pops[f"trion_{label}"] = frame.eigenstate_population(rho, n)
    write_json(path, {"populations": pops,
                      "polarization": float(polarization),
                      "residual": float(residual)})


def write_peak_table(path, peaks):
    header = ["sweep_value", "energy_microev", "height", "label"]
    rows = []
    for k in range(len(peaks)):
        label = peaks.labels[k] if peaks.labels else ""
        rows.append([peaks.sweep_values[k], peaks.energies[k],
                     peaks.heights[k], label])
    write_csv(path, header, rows)


def read_peak_table(path):
    from .fitting import PeakTable
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["sweep_value", "energy_microev", "height"]:
            raise ValueError(f"not a peak-table CSV: header {header[:3]}")
        sweeps, energies, heights, labels = [], [], [], []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            sweeps.append(float(cells[0]))
            energies.append(float(cells[1]))
            heights.append(float(cells[2]))
            labels.append(cells[3] if len(cells) > 3 else "")
    return PeakTable(np.array(sweeps), np.array(energies), np.array(heights),
                     labels)


def read_spectrum_grid(path, sweep_name="sweep"):
    from .optics import SpectrumGrid
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "sweep_value":
            raise ValueError("not a spectrum-grid CSV (missing sweep_value)")
        energies = np.array([float(c) for c in header[1:]])
        sweeps, signal = [], []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            sweeps.append(float(cells[0]))
            signal.append([float(c) if c else math.nan for c in cells[1:]])
    signal = np.array(signal)
    return SpectrumGrid(sweep_name, np.array(sweeps), energies, signal,
                        np.nansum(signal, axis=1), 0.0)


def write_fit_report(path, report):
    payload = {
        "free": list(report.free_names),
        "values": {n: float(v) for n, v in zip(report.free_names, report.values)},
        "confidence": {n: float(c) for n, c in report.confidence.items()},
        "residual_norm": float(report.residual_norm),
        "converged": bool(report.converged),
        "n_iterations": int(report.n_iterations),
        "n_unassigned": int(report.n_unassigned),
        "cost_history": [float(c) for c in report.cost_history],
        "params": {k: (float(v) if isinstance(v, (int, float)) else v)
                   for k, v in report.params.flat_dict().items()},
    }
    write_json(path, payload)


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, params, subcommand, argv, version, wall_time_s,
                   outputs):
    """RunManifest JSON; written after every listed output exists."""
    manifest = {
        "tool_version": version,
        "subcommand": subcommand,
        "flags": list(argv),
        "params": {k: float(v) for k, v in params.flat_dict().items()},
        "wall_time_s": float(wall_time_s),
        "outputs": [{"path": os.path.basename(p), "sha256": sha256_of(p)}
                    for p in sorted(outputs)],
    }
    path = os.path.join(out_dir, "run_manifest.json")
    write_json(path, manifest)
    return path


def verify_manifest(out_dir):
    """Recompute digests of the manifest's outputs; return mismatch list."""
    path = os.path.join(out_dir, "run_manifest.json")
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    mismatches = []
    for entry in manifest["outputs"]:
        target = os.path.join(out_dir, entry["path"])
        if not os.path.exists(target):
            mismatches.append((entry["path"], "missing"))
        elif sha256_of(target) != entry["sha256"]:
            mismatches.append((entry["path"], "digest mismatch"))
    return mismatches
