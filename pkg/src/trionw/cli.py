"""Command-line interface.

Subcommands: spectrum, sweep-field, plateau, pump-probe, pump-fidelity,
lockin, eq3-check, calibrate, fit.  Common flags: --config, --out,
--format, --threads (TRION_W_THREADS as fallback), --verify.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
"""

import os

# keep small dense linear algebra single-threaded unless asked otherwise;
# must happen before numpy loads its BLAS
os.environ.setdefault("OPENBLAS_NUM_THREADS",
                      os.environ.get("TRION_W_BLAS_THREADS", "1"))

import argparse
import sys
import time

import numpy as np

from . import __version__
from . import io as tio
from .config import ParseError, RunConfig, load_config
from .params import ParamError, validate_params
from .hamiltonian import (CalibrationDiverged, NoMinimumInWindow,
                          TrackingLost, calibrate_defaults,
                          effective_exchange_eq3, effective_exchange_exact,
                          sweep_eigensystem)
from .optics import SpectrumGrid, field_sweep_map, transition_spectrum
from .dynamics import DegenerateSteadyState, LaserField
from .experiments import (cycling_photon_budget, find_saturating_rabi,
                          lockin_spectrum, one_laser_plateau,
                          spin_pumping_polarization, two_laser_map,
                          w_line_catalog, solve_point)
from .fitting import (EmptyMap, MaxIterations, SingularJacobian,
                      extract_peaks, fit_parameters)

USAGE_ERROR, NUMERIC_ERROR = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _add_common(parser, suppress=False):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d if suppress else None,
                        help="configuration file (INI sections)")
    parser.add_argument("--out", default=d if suppress else "trionw-out",
                        help="output directory")
    parser.add_argument("--format", choices=("csv", "json"),
                        default=d if suppress else "csv")
    parser.add_argument("--threads", type=int, default=d if suppress else None)
    parser.add_argument("--verify", action="store_true",
                        default=d if suppress else False,
                        help="verify output digests against the run manifest")


def build_parser():
    p = _Parser(prog="trionw", description=__doc__)
    _add_common(p)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command")
    for name in ("spectrum", "sweep-field", "plateau", "pump-probe",
                 "pump-fidelity", "lockin", "eq3-check", "calibrate", "fit"):
        sp = sub.add_parser(name, prog=f"trionw {name}")
        _add_common(sp, suppress=True)
        if name == "fit":
            sp.add_argument("peaks_csv", help="peak-table or spectrum-grid CSV")
        if name == "calibrate":
            sp.add_argument("--targets", default="1.0,2.8",
                            help="anticrossing fields B1,B2 in tesla")
    return p


def _v_bias(cfg):
    return cfg.params.v_center if cfg.sweep.v_bias is None else cfg.sweep.v_bias


def _b_field(cfg):
    return (cfg.sweep.b_fixed if cfg.lasers.b_field is None
            else cfg.lasers.b_field)


def _auto_energy_grid(cfg, b_tesla):
    lines, _ = w_line_catalog(cfg.params, b_tesla, _v_bias(cfg))
    centers = [ln.energy for ln in lines.values()]
    lo = cfg.sweep.e_min if cfg.sweep.e_min is not None else min(centers) - 25
    hi = cfg.sweep.e_max if cfg.sweep.e_max is not None else max(centers) + 25
    return np.linspace(lo, hi, cfg.sweep.n_e)


def cmd_spectrum(cfg, out, fmt_kind, threads, argv):
    lines = transition_spectrum(cfg.params, cfg.sweep.b_fixed, _v_bias(cfg))
    if fmt_kind == "json":
        path = os.path.join(out, "sticks.json")
        tio.write_sticks_json(path, lines)
    else:
        path = os.path.join(out, "sticks.csv")
        tio.write_sticks_csv(path, lines)
    return [path]


def cmd_sweep_field(cfg, out, fmt_kind, threads, argv):
    grid = np.linspace(cfg.sweep.b_min, cfg.sweep.b_max, cfg.sweep.n_b)
    branches = sweep_eigensystem(cfg.params, grid, sweep="B", fixed=_v_bias(cfg))
    p1 = os.path.join(out, "sweep_branches.csv")
    tio.write_sweep_branches(p1, grid, branches)
    e_grid = _auto_energy_grid(cfg, cfg.sweep.b_fixed)
    smap = field_sweep_map(cfg.params, grid, _v_bias(cfg), e_grid,
                           cfg.sweep.linewidth,
                           subtract_diamagnetic=cfg.sweep.subtract_diamagnetic)
    p2 = os.path.join(out, "sweep_map.csv")
    tio.write_spectrum_grid(p2, smap)
    return [p1, p2]


def cmd_plateau(cfg, out, fmt_kind, threads, argv):
    b = _b_field(cfg)
    v_grid = np.linspace(cfg.sweep.v_min, cfg.sweep.v_max, cfg.sweep.n_v)
    e_grid = _auto_energy_grid(cfg, b)
    res = one_laser_plateau(cfg.params, b, v_grid, e_grid,
                            rabi=cfg.dynamics.rabi,
                            n_nodes=cfg.dynamics.gh_nodes, threads=threads)
    p1 = os.path.join(out, "plateau_map.csv")
    tio.write_spectrum_grid(p1, SpectrumGrid("V (mV)", v_grid, e_grid,
                                             res.signal,
                                             res.signal.sum(axis=1), 0.0))
    p2 = os.path.join(out, "plateau_traces.csv")
    names = ("lambda_up", "lambda_down", "cycling_up", "cycling_down")
    rows = [[v] + [res.traces[nm][i] for nm in names]
            for i, v in enumerate(v_grid)]
    tio.write_csv(p2, ["v_mv"] + list(names), rows)
    return [p1, p2]


def cmd_pump_probe(cfg, out, fmt_kind, threads, argv):
    b = _b_field(cfg)
    lines, frame = w_line_catalog(cfg.params, b, _v_bias(cfg))
    lam = [lines["lambda_up"].energy, lines["lambda_down"].energy]
    meas = [lines["cycling_up"].energy, lines["cycling_down"].energy]
    init_grid = np.linspace(min(lam) - cfg.lasers.init_margin,
                            max(lam) + cfg.lasers.init_margin,
                            cfg.lasers.n_init)
    meas_grid = np.linspace(min(meas) - cfg.lasers.meas_margin,
                            max(meas) + cfg.lasers.meas_margin,
                            cfg.lasers.n_meas)
    res = two_laser_map(cfg.params, b, _v_bias(cfg), init_grid, meas_grid,
                        cfg.lasers.init_rabi, cfg.lasers.meas_rabi,
                        n_nodes=cfg.dynamics.gh_nodes, threads=threads)
    paths = []
    for nm, sigmap in res.signal.items():
        path = os.path.join(out, f"pump_probe_{nm}.csv")
        tio.write_spectrum_grid(path, SpectrumGrid(
            "init energy (ueV)", init_grid, meas_grid, sigmap,
            np.nansum(sigmap, axis=1), 0.0))
        paths.append(path)
    return paths


def cmd_pump_fidelity(cfg, out, fmt_kind, threads, argv):
    p = cfg.params
    b = _b_field(cfg)
    v = _v_bias(cfg)
    lines, frame = w_line_catalog(p, b, v)
    from .experiments import WLine
    comp = lines["lambda_down"].trion_states[0]
    e_drive = float(frame.trion_energies[comp] - np.real(frame.h_rwa[1, 1]))
    rabi_sat = find_saturating_rabi(
        p, b, v, WLine("lambda_component", 1, (comp,), e_drive))
    pol = spin_pumping_polarization(p, b, v, LaserField(e_drive, rabi_sat),
                                    n_nodes=cfg.dynamics.gh_nodes)
    pol_cyc = spin_pumping_polarization(
        p, b, v, LaserField(lines["cycling_down"].energy, rabi_sat),
        n_nodes=cfg.dynamics.gh_nodes)
    budget, saturated = cycling_photon_budget(p, b, v, rabi=cfg.dynamics.rabi,
                                              n_nodes=cfg.dynamics.gh_nodes)
    rho, fr, chans = solve_point(p, b, v, [LaserField(e_drive, rabi_sat)])
    from .dynamics import build_liouvillian
    lv = build_liouvillian(fr.h_rwa, chans)
    residual = float(np.linalg.norm(lv @ rho.reshape(-1)))
    path = os.path.join(out, "pump_fidelity.json")
    tio.write_json(path, {
        "b_tesla": b, "v_mv": v, "saturating_rabi": rabi_sat,
        "lambda_polarization": float(pol),
        "cycling_polarization": float(pol_cyc),
        "photon_budget": float(budget), "budget_saturated": bool(saturated),
    })
    n_up, n_down = rho[0, 0].real, rho[1, 1].real
    path2 = os.path.join(out, "steady_state.json")
    tio.write_steady_state_json(
        path2, rho, fr, (n_up - n_down) / (n_up + n_down), residual)
    print(f"saturating rabi {rabi_sat:.3g} ueV; lambda polarization "
          f"{pol:+.4f}; cycling polarization {pol_cyc:+.4f}; photon budget "
          f"{budget:.3g}")
    return [path, path2]


def cmd_lockin(cfg, out, fmt_kind, threads, argv):
    b = _b_field(cfg)
    e_grid = _auto_energy_grid(cfg, b)
    sig = lockin_spectrum(cfg.params, b, _v_bias(cfg), e_grid,
                          rabi=cfg.dynamics.rabi,
                          delta_v=cfg.dynamics.delta_v,
                          n_nodes=cfg.dynamics.gh_nodes)
    path = os.path.join(out, "lockin.csv")
    tio.write_csv(path, ["energy_microev", "signal"],
                  [[e, s] for e, s in zip(e_grid, sig)])
    return [path]


def cmd_eq3_check(cfg, out, fmt_kind, threads, argv):
    p = cfg.params
    eq3 = effective_exchange_eq3(p.h_so, p.t_e, p.delta_eh0)
    exact = effective_exchange_exact(p)
    ratio = exact / eq3 if eq3 else float("nan")
    print(f"perturbative gap {eq3:.4f} ueV; exact gap {exact:.4f} ueV; "
          f"ratio {ratio:.4f}")
    path = os.path.join(out, "eq3_check.json")
    tio.write_json(path, {"eq3_microev": eq3, "exact_microev": exact,
                          "ratio": ratio})
    return [path]


def cmd_calibrate(cfg, out, fmt_kind, threads, argv, targets="1.0,2.8"):
    b1, b2 = (float(t) for t in targets.split(","))
    q = calibrate_defaults(cfg.params, (b1, b2))
    path = os.path.join(out, "calibrated_params.json")
    tio.write_json(path, {k: float(v) for k, v in q.flat_dict().items()})
    print(f"calibrated: eps0 {q.eps0:.6g} ueV, g_h {q.g_h:.6g}")
    return [path]


def cmd_fit(cfg, out, fmt_kind, threads, argv, peaks_csv=None):
    with open(peaks_csv, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[0] == "sweep_value" and header[1] == "energy_microev":
        peaks = tio.read_peak_table(peaks_csv)
    else:
        grid = tio.read_spectrum_grid(peaks_csv)
        peaks = extract_peaks(grid, cfg.fit.min_prominence)
    report = fit_parameters(peaks, cfg.params, cfg.fit.free,
                            v_mv=_v_bias(cfg), linewidth=cfg.fit.linewidth,
                            max_iter=cfg.fit.max_iter)
    path = os.path.join(out, "fit_report.json")
    tio.write_fit_report(path, report)
    print(f"fit converged in {report.n_iterations} iterations; residual "
          f"{report.residual_norm:.4g} ueV; {report.n_unassigned} peaks "
          f"unassigned")
    return [path]


COMMANDS = {
    "spectrum": cmd_spectrum,
    "sweep-field": cmd_sweep_field,
    "plateau": cmd_plateau,
    "pump-probe": cmd_pump_probe,
    "pump-fidelity": cmd_pump_fidelity,
    "lockin": cmd_lockin,
    "eq3-check": cmd_eq3_check,
    "calibrate": cmd_calibrate,
    "fit": cmd_fit,
}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.verify:
        try:
            mismatches = tio.verify_manifest(args.out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"verify failed: {exc}", file=sys.stderr)
            return NUMERIC_ERROR
        if mismatches:
            for name, why in mismatches:
                print(f"MISMATCH {name}: {why}", file=sys.stderr)
            return NUMERIC_ERROR
        print("all digests match")
        return 0

    if not args.command:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR

    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("TRION_W_THREADS", "1"))
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        validate_params(cfg.params)
    except (ParseError, ParamError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    os.makedirs(args.out, exist_ok=True)
    extra = {}
    if args.command == "fit":
        extra["peaks_csv"] = args.peaks_csv
    if args.command == "calibrate":
        extra["targets"] = args.targets

    start = time.time()
    try:
        outputs = COMMANDS[args.command](cfg, args.out, args.format, threads,
                                         argv, **extra)
    except (CalibrationDiverged, NoMinimumInWindow, TrackingLost,
            DegenerateSteadyState, SingularJacobian, MaxIterations,
            EmptyMap, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (ParamError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    tio.write_manifest(args.out, cfg.params, args.command, argv, __version__,
                       time.time() - start, outputs)
    return 0


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
