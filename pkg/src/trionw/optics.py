"""Dipole operator, selection rules, transition spectra and spectral maps.

In Faraday geometry the photon creates the electron-hole pair in the top
dot with fixed spin pairing: sigma+ creates (e_top down, hole up),
sigma- creates (e_top up, hole down); the resident electron is a
spectator.  Only the four (1,1) product states reachable this way carry
dipole weight; the (2,0) singlets are optically inert and acquire
brightness only through tunneling admixture.
"""

from dataclasses import dataclass

import numpy as np

from .basis import UP, DOWN, StateIndex
from .params import ModelParams, validate_params
from .hamiltonian import (build_ground_hamiltonian, build_trion_hamiltonian,
                          character_vectors, dominant_label)

# normalized strengths below this are reported as dark
DARK_THRESHOLD = 1e-12


@dataclass(frozen=True)
class DipoleOperator:
    """sigma+/sigma- dipole blocks from the ground to the trion manifold.

    Matrices have shape (n_trion, 2); column g is the trion-space vector
    d |g>.  Entries are in units of the configured dipole (Debye).
    """

    d_plus: np.ndarray
    d_minus: np.ndarray

    @property
    def total(self):
        """Linear-drive combination (both circular channels)."""
        return self.d_plus + self.d_minus


def build_dipole_operator(p: ModelParams, idx: StateIndex | None = None) -> DipoleOperator:
    """Four equal-magnitude matrix elements, two per ground spin."""
    idx = idx or StateIndex()
    dp = np.zeros((idx.n_trion, 2), dtype=complex)
    dm = np.zeros((idx.n_trion, 2), dtype=complex)
    for col, g in enumerate((UP, DOWN)):
        dp[idx.trion_local(idx.one_one(g, DOWN, UP)), col] = p.dipole
        dm[idx.trion_local(idx.one_one(g, UP, DOWN)), col] = p.dipole
    return DipoleOperator(d_plus=dp, d_minus=dm)


@dataclass(frozen=True)
class TransitionLine:
    """One optical line from a ground spin to a trion eigenstate."""

    energy: float          # E_trion - E_ground, ueV
    strength: float        # |<n|d|g>|^2 normalized to the strongest line
    strength_raw: float    # un-normalized |<n|d+|g>|^2 + |<n|d-|g>|^2
    ground_spin: float     # +-0.5
    polarization: str      # "sigma+", "sigma-" or "mixed"
    dark: bool
    label: str             # dominant character of the trion eigenstate
    trion_index: int       # eigenstate index (ascending energy)
    w_plus: float = 0.0    # raw sigma+ share of strength_raw
    w_minus: float = 0.0   # raw sigma- share

    @property
    def purity(self):
        """Largest circular-channel share (0.5 = fully mixed, 1 = pure)."""
        tot = self.w_plus + self.w_minus
        return max(self.w_plus, self.w_minus) / tot if tot else 0.0


def _polarization_tag(w_plus, w_minus, purity=0.99):
    tot = w_plus + w_minus
    if tot == 0:
        return "mixed"
    if w_plus / tot > purity:
        return "sigma+"
    if w_minus / tot > purity:
        return "sigma-"
    return "mixed"


def transition_spectrum(p: ModelParams, b_tesla, v_mv,
                        include_dark=True) -> list[TransitionLine]:
    """All ground -> trion-eigenstate lines with oscillator strengths.

    Strengths are normalized to the strongest line of the full set; lines
    below DARK_THRESHOLD (normalized) are flagged dark and dropped unless
    include_dark is set.
    """
    validate_params(p)
    idx = StateIndex()
    dip = build_dipole_operator(p, idx)
    e_ground = np.real(np.diag(build_ground_hamiltonian(p, b_tesla)))
    evals, evecs = np.linalg.eigh(build_trion_hamiltonian(p, b_tesla, v_mv))
    chars = character_vectors()

    amp_p = evecs.conj().T @ dip.d_plus    # (n_trion, 2)
    amp_m = evecs.conj().T @ dip.d_minus
    w_p = np.abs(amp_p) ** 2
    w_m = np.abs(amp_m) ** 2
    raw = w_p + w_m
    max_raw = raw.max()

    lines = []
    for n in range(idx.n_trion):
        label = dominant_label(evecs[:, n], chars)
        for col, g in enumerate((UP, DOWN)):
            strength = raw[n, col] / max_raw
            dark = strength < DARK_THRESHOLD
            if dark and not include_dark:
                continue
            lines.append(TransitionLine(
                energy=evals[n] - e_ground[col],
                strength=strength,
                strength_raw=raw[n, col],
                ground_spin=g,
                polarization=_polarization_tag(w_p[n, col], w_m[n, col]),
                dark=dark,
                label=label,
                trion_index=n,
                w_plus=w_p[n, col],
                w_minus=w_m[n, col],
            ))
    return lines


def apply_diamagnetic(energy, b_tesla, kappa_dia, mode="add"):
    """Shift an energy by +-kappa_dia * B^2."""
    if mode not in ("add", "subtract"):
        raise ValueError(f"mode must be 'add' or 'subtract', got {mode!r}")
    sign = 1.0 if mode == "add" else -1.0
    return energy + sign * kappa_dia * b_tesla**2


@dataclass
class SpectrumGrid:
    """Rectangular signal table vs (sweep axis x photon energy).

    `signal[i, j]` is the broadened intensity at sweep_values[i],
    energies[j].  `row_strength` holds the analytic integrated intensity
    (sum of line strengths) per sweep row, which is conserved by the
    Lorentzian broadening.
    """

    sweep_name: str
    sweep_values: np.ndarray
    energies: np.ndarray
    signal: np.ndarray
    row_strength: np.ndarray
    linewidth: float


def field_sweep_map(p: ModelParams, b_grid, v_mv, e_grid, linewidth,
                    subtract_diamagnetic=False) -> SpectrumGrid:
    """Lorentzian-broadened transition map over a magnetic-field sweep.

    With subtract_diamagnetic the kappa_dia*B^2 shift is removed from the
    line energies before broadening, replicating the display convention
    of field-sweep transmission maps.  `linewidth` is the Lorentzian
    half width at half maximum.
    """
    if linewidth <= 0:
        raise ValueError("linewidth must be > 0")
    b_grid = np.asarray(b_grid, dtype=float)
    e_grid = np.asarray(e_grid, dtype=float)
    signal = np.zeros((len(b_grid), len(e_grid)))
    row_strength = np.zeros(len(b_grid))

    # normalize strengths over the whole map so rows share one scale
    all_lines = []
    for b in b_grid:
        all_lines.append(transition_spectrum(p, b, v_mv))
    max_raw = max(ln.strength_raw for lines in all_lines for ln in lines)

    for i, (b, lines) in enumerate(zip(b_grid, all_lines)):
        for ln in lines:
            s = ln.strength_raw / max_raw
            if s == 0.0:
                continue
            e0 = ln.energy
            if subtract_diamagnetic:
                e0 = apply_diamagnetic(e0, b, p.kappa_dia, "subtract")
            signal[i] += s * (linewidth / np.pi) / ((e_grid - e0) ** 2 + linewidth**2)
            row_strength[i] += s
    return SpectrumGrid("B (T)", b_grid, e_grid, signal, row_strength, linewidth)
