"""Peak extraction from spectral maps and model-parameter fitting.

The fit objective uses peak positions only: heights depend on the
instrument response, while the positions carry the level structure.
Peaks are matched to the nearest bright model transition, re-assigned on
every iteration, with a three-linewidth gate; unmatched peaks contribute
nothing to the residual and are counted in the report.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .params import ModelParams, validate_params
from .optics import SpectrumGrid, transition_spectrum

# relative oscillator strength below which a model line cannot claim a peak
VISIBLE_STRENGTH = 0.02


class EmptyMap(ValueError):
    """The spectrum grid has no rows or no energy columns."""


class SingularJacobian(RuntimeError):
    """Normal equations irreparably singular (parameters unidentifiable)."""


class MaxIterations(RuntimeError):
    """Optimizer failed to converge within the iteration budget."""


@dataclass
class PeakTable:
    """Extracted peak positions: one row per (sweep value, peak)."""

    sweep_values: np.ndarray
    energies: np.ndarray
    heights: np.ndarray
    labels: list | None = None

    def __len__(self):
        return len(self.sweep_values)


def extract_peaks(grid: SpectrumGrid, min_prominence) -> PeakTable:
    """Local maxima per sweep row with quadratic sub-grid refinement."""
    if min_prominence <= 0:
        raise ValueError("min_prominence must be > 0")
    if grid.signal.size == 0 or len(grid.energies) == 0:
        raise EmptyMap("spectrum grid has no data")
    sweeps, energies, heights = [], [], []
    de = np.diff(grid.energies)
    for i, row in enumerate(grid.signal):
        idx, _ = find_peaks(row, prominence=min_prominence)
        for j in idx:
            if 0 < j < len(row) - 1:
                # parabola through the three samples around the maximum
                y0, y1, y2 = row[j - 1], row[j], row[j + 1]
                denom = y0 - 2 * y1 + y2
                shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
                shift = np.clip(shift, -0.5, 0.5)
                e = grid.energies[j] + shift * de[min(j, len(de) - 1)]
                h = y1 - 0.25 * (y0 - y2) * shift
            else:
                e, h = grid.energies[j], row[j]
            sweeps.append(grid.sweep_values[i])
            energies.append(e)
            heights.append(h)
    return PeakTable(np.asarray(sweeps), np.asarray(energies),
                     np.asarray(heights))


@dataclass
class FitReport:
    """Outcome of a damped least-squares parameter fit."""

    params: ModelParams
    free_names: list
    values: np.ndarray
    residual_norm: float
    confidence: dict            # name -> half-width from the local quadratic model
    converged: bool
    n_iterations: int
    n_unassigned: int
    cost_history: list = field(default_factory=list)


def _model_line_energies(p, sweep_values, v_mv):
    """Bright transition energies per unique sweep (field) value."""
    cache = {}
    out = []
    for b in sweep_values:
        key = float(b)
        if key not in cache:
            lines = transition_spectrum(p, key, v_mv, include_dark=False)
            cache[key] = np.array(sorted(
                ln.energy for ln in lines if ln.strength >= VISIBLE_STRENGTH))
        out.append(cache[key])
    return out


def _residuals(p, peaks: PeakTable, v_mv, gate):
    """Peak-to-nearest-line residuals with the assignment gate applied."""
    model = _model_line_energies(p, peaks.sweep_values, v_mv)
    res = np.zeros(len(peaks))
    unassigned = 0
    for k in range(len(peaks)):
        lines = model[k]
        if len(lines) == 0:
            unassigned += 1
            continue
        d = peaks.energies[k] - lines
        j = np.argmin(np.abs(d))
        if abs(d[j]) > gate:
            unassigned += 1
            continue
        res[k] = d[j]
    return res, unassigned


def fit_parameters(peaks: PeakTable, p0: ModelParams, free,
                   v_mv=None, linewidth=5.0, max_iter=40,
                   xtol=1e-10, ftol=1e-12) -> FitReport:
    """Levenberg-Marquardt-style damped least squares over named parameters.

    `free` is a sequence of ModelParams field names to vary.  The
    peak-to-line assignment is recomputed on every objective evaluation;
    the assignment gate is three linewidths.  Deterministic: no random
    restarts, fixed step rules.
    """
    validate_params(p0)
    free = list(free)
    v_mv = p0.v_center if v_mv is None else v_mv
    gate = 3.0 * linewidth
    if free and len(peaks) < 2 * len(free):
        raise ValueError("need at least 2x more peak rows than free parameters")

    def make(params_vec):
        return p0.with_(**dict(zip(free, params_vec)))

    def cost_of(r):
        return float(r @ r)

    x = np.array([getattr(p0, name) for name in free], dtype=float)
    r, n_un = _residuals(p0, peaks, v_mv, gate)
    cost = cost_of(r)
    history = [cost]
    if not free:
        return FitReport(p0, [], x, np.sqrt(cost), {}, True, 0, n_un, history)

    lam = 1e-3
    n_iter = 0
    converged = np.sqrt(cost) < 1e-10
    while not converged and n_iter < max_iter:
        n_iter += 1
        jac = np.empty((len(peaks), len(free)))
        for m in range(len(free)):
            step = 1e-4 * max(abs(x[m]), 1e-2)
            xp = x.copy()
            xp[m] += step
            rp, _ = _residuals(make(xp), peaks, v_mv, gate)
            jac[:, m] = (rp - r) / step
        jtj = jac.T @ jac
        jtr = jac.T @ r
        scale = np.diag(jtj).copy()
        if np.any(scale <= 0):
            raise SingularJacobian(
                f"no sensitivity for {[free[m] for m in np.nonzero(scale <= 0)[0]]}")
        accepted = False
        for _ in range(12):
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(scale), -jtr)
            except np.linalg.LinAlgError:
                raise SingularJacobian("normal equations singular")
            r_new, n_un_new = _residuals(make(x + delta), peaks, v_mv, gate)
            cost_new = cost_of(r_new)
            if cost_new <= cost:
                accepted = True
                break
            lam *= 8.0
        if not accepted:
            converged = True  # no downhill direction left: local optimum
            break
        improvement = cost - cost_new
        x = x + delta
        r, n_un, cost = r_new, n_un_new, cost_new
        history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if improvement < ftol * (1.0 + cost) or np.linalg.norm(delta) < xtol:
            converged = True
    if not converged:
        raise MaxIterations(f"no convergence after {max_iter} iterations")

    # confidence half-widths from the local quadratic model
    jac = np.empty((len(peaks), len(free)))
    for m in range(len(free)):
        step = 1e-4 * max(abs(x[m]), 1e-2)
        xp = x.copy()
        xp[m] += step
        rp, _ = _residuals(make(xp), peaks, v_mv, gate)
        jac[:, m] = (rp - r) / step
    dof = max(len(peaks) - len(free), 1)
    sigma2 = cost / dof
    try:
        cov = sigma2 * np.linalg.inv(jac.T @ jac)
        conf = {name: float(np.sqrt(max(cov[m, m], 0.0)))
                for m, name in enumerate(free)}
    except np.linalg.LinAlgError:
        conf = {name: float("inf") for name in free}
    return FitReport(make(x), free, x, float(np.sqrt(cost)), conf, True,
                     n_iter, n_un, history)
