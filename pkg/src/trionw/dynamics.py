"""Open-system dynamics: rotating frame, Lindblad generator, steady states.

Units: energies in micro-eV, hbar = 1, so rates are in micro-eV and time
in hbar/micro-eV (0.6582 ps).  Density matrices live on the 12-dim
ground + trion space; superoperators act on row-major vectorized density
matrices, so vec(A rho B) = (A kron B^T) vec(rho).

Rotating frame: each trion eigenstate is assigned to (at most) one laser
and rotates at that laser's frequency; the ground states keep their
Zeeman energies.  Drive terms from a state's own laser are static; terms
from other lasers are dropped, which is valid only when every bright
transition is detuned from every non-assigned laser by more than twenty
times its Rabi energy under that laser (enforced, AmbiguousAssignment
otherwise).
Coherences between trion states assigned to different lasers are treated
as static, the usual multi-frequency RWA bookkeeping.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .basis import UP, DOWN, StateIndex
from .params import ModelParams, validate_params
from .hamiltonian import (build_ground_hamiltonian, build_trion_hamiltonian,
                          character_vectors, dominant_label)
from .optics import build_dipole_operator


class AmbiguousAssignment(ValueError):
    """A bright transition is too close to a laser not assigned to it."""


class DegenerateSteadyState(RuntimeError):
    """Null space is degenerate and propagation did not converge."""


class StepSizeUnderflow(RuntimeError):
    """Adaptive propagation could not keep the trace drift in tolerance."""


class ChannelKind(enum.Enum):
    EMISSION = "emission"
    COTUNNEL_FLIP = "cotunnel"
    PURE_DEPHASING = "dephasing"


@dataclass(frozen=True)
class LaserField:
    """One cw laser: photon energy (ueV, model scale), Rabi energy, role."""

    photon_energy: float
    rabi: float
    role: str = "initialize"   # "initialize" or "measure"

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError(f"rabi must be >= 0, got {self.rabi}")


@dataclass(frozen=True)
class CollapseChannel:
    """One Lindblad jump operator with its rate (the operator is unit-weight;
    the rate multiplies the Lindblad dissipator)."""

    operator: np.ndarray
    rate: float
    kind: ChannelKind

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class Transition:
    ground_col: int        # 0 = spin up, 1 = spin down
    trion_index: int       # trion eigenstate index
    laser_index: int | None
    energy: float          # E_n - E_g (laboratory frame), ueV
    amplitude: complex     # <n|(d+ + d-)|g> / dipole
    strength_raw: float    # |<n|d+|g>|^2 + |<n|d-|g>|^2 (dipole units)


@dataclass
class RwaFrame:
    """Rotating-frame Hamiltonian plus the eigenbasis bookkeeping."""

    p: ModelParams
    b_tesla: float
    v_mv: float
    lasers: list
    h_rwa: np.ndarray            # (dim, dim)
    trion_energies: np.ndarray   # lab-frame eigenenergies (with offset)
    trion_vectors: np.ndarray    # columns = eigenstates, trion block
    labels: list
    assignment: dict             # trion eigenstate -> laser index
    transitions: list
    idx: StateIndex = field(default_factory=StateIndex)

    def eigenstate_population(self, rho, n):
        """Population of trion eigenstate n (density matrices are kept in
        the frame's ground + trion-eigenstate representation)."""
        return float(np.real(rho[self.idx.n_ground + n, self.idx.n_ground + n]))

    def label_index(self, label):
        return self.labels.index(label)


def cotunneling_rate(v_mv, p: ModelParams):
    """Co-tunneling ground-spin flip rate kappa(V), micro-eV.

    kappa_center plus exponential shoulders rising at the plateau edges;
    the shoulder contribution is clamped at 10*kappa_edge outside the
    plateau so the rate stays finite.
    """
    c = p.cotun
    edge = np.exp((c.v_left - v_mv) / c.width) + np.exp((v_mv - c.v_right) / c.width)
    return c.kappa_center + min(c.kappa_edge * edge, 10.0 * c.kappa_edge)


def rwa_hamiltonian(p: ModelParams, b_tesla, v_mv, lasers, assignment=None,
                    trion_offset=0.0, v_stark=None,
                    enforce_contract=True) -> RwaFrame:
    """Time-independent rotating-frame Hamiltonian for 1 or 2 lasers.

    `assignment` maps trion-eigenstate index -> laser index; None selects
    for each eigenstate the laser closest to resonance with any of its
    transitions.  `trion_offset` shifts the whole trion manifold (used
    for spectral-wandering averaging).  `v_stark` lets the Hamiltonian
    bias differ from the co-tunneling bias (lock-in modulation).

    The assignment contract requires every bright transition to be
    detuned from each non-assigned laser by more than twenty times its
    Rabi energy under that laser (laser Rabi scaled by the transition's
    dipole amplitude).  `enforce_contract=False` skips the check, used
    for wandering-offset evaluations around an already validated nominal
    point.
    """
    validate_params(p)
    if not 1 <= len(lasers) <= 2:
        raise ValueError("need 1 or 2 lasers")
    idx = StateIndex()
    vh = v_mv if v_stark is None else v_stark
    e_ground = np.real(np.diag(build_ground_hamiltonian(p, b_tesla)))
    evals, evecs = np.linalg.eigh(build_trion_hamiltonian(p, b_tesla, vh))
    evals = evals + trion_offset
    chars = character_vectors()
    labels = [dominant_label(evecs[:, n], chars) for n in range(idx.n_trion)]

    dip = build_dipole_operator(p, idx)
    amp = evecs.conj().T @ dip.total / p.dipole      # (n_trion, 2)
    raw = (np.abs(evecs.conj().T @ dip.d_plus) ** 2
           + np.abs(evecs.conj().T @ dip.d_minus) ** 2)

    if assignment is None:
        assignment = {}
        for n in range(idx.n_trion):
            det = [min(abs(evals[n] - e_ground[g] - las.photon_energy)
                       for g in (0, 1)) for las in lasers]
            assignment[n] = int(np.argmin(det))
    else:
        assignment = dict(assignment)
        for n, li in assignment.items():
            if li is not None and not 0 <= li < len(lasers):
                raise ValueError(f"assignment of state {n} to missing laser {li}")
    # a powerless laser defines no rotating frame: leave its states in the
    # lab frame so its nominal frequency cannot enter the generator
    assignment = {n: (li if li is not None and lasers[li].rabi > 0 else None)
                  for n, li in assignment.items()}

    transitions = []
    bright_floor = 1e-6 * max(raw.max(), 1e-300)
    for n in range(idx.n_trion):
        for g in (0, 1):
            if raw[n, g] <= bright_floor:
                continue
            energy = evals[n] - e_ground[g]
            li = assignment.get(n)
            transitions.append(Transition(g, n, li, energy, amp[n, g], raw[n, g]))

    # validity: every bright transition far from every non-assigned laser
    if enforce_contract:
        for t in transitions:
            for li, las in enumerate(lasers):
                if li == t.laser_index or las.rabi == 0:
                    continue
                eff_rabi = las.rabi * abs(t.amplitude)
                if abs(t.energy - las.photon_energy) <= 20.0 * eff_rabi:
                    raise AmbiguousAssignment(
                        f"transition at {t.energy:.2f} ueV lies within 20x its "
                        f"Rabi under laser {li} at {las.photon_energy:.2f} ueV")

    dim = idx.dim
    h = np.zeros((dim, dim), dtype=complex)
    h[0, 0], h[1, 1] = e_ground
    for n in range(idx.n_trion):
        li = assignment.get(n)
        omega = lasers[li].photon_energy if li is not None else 0.0
        h[idx.n_ground + n, idx.n_ground + n] = evals[n] - omega
    for t in transitions:
        if t.laser_index is None:
            continue
        las = lasers[t.laser_index]
        row = idx.n_ground + t.trion_index
        h[row, t.ground_col] += 0.5 * las.rabi * t.amplitude
        h[t.ground_col, row] += 0.5 * las.rabi * np.conj(t.amplitude)

    return RwaFrame(p, b_tesla, v_mv, list(lasers), h, evals, evecs, labels,
                    assignment, transitions, idx)


def emission_channels(p: ModelParams, frame: RwaFrame):
    """One jump operator per dipole-allowed basis pair, total rate gamma_sp.

    Each bright (1,1) component decays only to its selection-rule-allowed
    ground spin; the four channels are kept separate (distinguishable
    photon frequencies), so eigenstates decay at gamma_sp times their
    bright weight.  Operators are expressed in the frame's ground +
    trion-eigenstate representation.
    """
    idx = frame.idx
    pairs = [
        (UP, idx.one_one(UP, UP, DOWN)),
        (UP, idx.one_one(UP, DOWN, UP)),
        (DOWN, idx.one_one(DOWN, UP, DOWN)),
        (DOWN, idx.one_one(DOWN, DOWN, UP)),
    ]
    chans = []
    for g, b in pairs:
        op = np.zeros((idx.dim, idx.dim), dtype=complex)
        # <b| expressed in the eigenbasis: row b_local of the eigenvector matrix
        op[idx.of(idx.ground_state(g)), idx.n_ground:] = \
            frame.trion_vectors[idx.trion_local(b), :]
        chans.append(CollapseChannel(op, p.gamma_sp, ChannelKind.EMISSION))
    return chans


def cotunnel_channels(p: ModelParams, v_mv, idx: StateIndex | None = None):
    """Symmetric ground-spin flips at rate kappa(V), both directions."""
    idx = idx or StateIndex()
    kappa = cotunneling_rate(v_mv, p)
    chans = []
    for a, b in ((0, 1), (1, 0)):
        op = np.zeros((idx.dim, idx.dim), dtype=complex)
        op[a, b] = 1.0
        chans.append(CollapseChannel(op, kappa, ChannelKind.COTUNNEL_FLIP))
    return chans


def default_channels(p: ModelParams, v_mv, frame: RwaFrame):
    return emission_channels(p, frame) + cotunnel_channels(p, v_mv, frame.idx)


def channel_flux(rho, channel: CollapseChannel):
    """Steady jump rate through one channel, rate * Tr(C rho C^dag)."""
    c = channel.operator
    return channel.rate * float(np.real(np.trace(c @ rho @ c.conj().T)))


def build_liouvillian(h_rwa, channels) -> np.ndarray:
    """Lindblad generator as a d^2 x d^2 matrix on row-major vec(rho)."""
    h = np.asarray(h_rwa)
    d = h.shape[0]
    eye = np.eye(d)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for ch in channels:
        if ch.rate == 0:
            continue
        c = np.sqrt(ch.rate) * ch.operator
        cdc = c.conj().T @ c
        lv += (np.kron(c, c.conj())
               - 0.5 * np.kron(cdc, eye)
               - 0.5 * np.kron(eye, cdc.T))
    return lv


def _maximally_mixed_ground(dim):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = rho[1, 1] = 0.5
    return rho


def _connected_components(h_rwa, channels, rel_tol=1e-9):
    """Partition states by coupling connectivity (H or any channel).

    Couplings below rel_tol of the largest matrix entry count as absent:
    they correspond to relaxation rates far beyond any physical time
    scale, so the propagation tie-break never populates across them.
    """
    d = h_rwa.shape[0]
    cut_h = rel_tol * max(np.abs(h_rwa).max(), 1e-300)
    adj = np.abs(h_rwa) > cut_h
    for ch in channels:
        if ch.rate > 0:
            cut_c = rel_tol * max(np.abs(ch.operator).max(), 1e-300)
            link = np.abs(ch.operator) > cut_c
            adj |= link | link.T
    np.fill_diagonal(adj, True)
    comp = -np.ones(d, dtype=int)
    n_comp = 0
    for start in range(d):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            i = stack.pop()
            for j in np.nonzero(adj[i])[0]:
                if comp[j] < 0:
                    comp[j] = n_comp
                    stack.append(j)
        n_comp += 1
    return comp, n_comp


def _solve_block(lv_block, d, tol):
    """Trace-one null vector of a block Liouvillian by a bordered direct
    solve with iterative refinement; None if the residual will not drop."""
    from scipy.linalg import lu_factor, lu_solve
    m = lv_block.copy()
    trace_row = np.eye(d, dtype=complex).reshape(-1)
    m[0, :] = trace_row
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        lu = lu_factor(m)
    except np.linalg.LinAlgError:
        return None
    x = lu_solve(lu, b)
    for _ in range(3):
        r = b - m @ x
        x = x + lu_solve(lu, r)
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if not np.isfinite(tr) or abs(tr) < 1e-8:
        return None
    rho /= tr
    if np.linalg.norm(lv_block @ rho.reshape(-1)) > tol:
        return None
    return rho


def _propagate_block(lv_block, d, rho0, tol):
    """Long-time propagation limit within one block (tie-break path)."""
    scale = max(np.abs(lv_block).max(), 1e-12)
    t = 100.0 / scale
    rho = rho0.reshape(-1)
    for _ in range(40):
        prop = expm(lv_block * t)
        r1 = prop @ rho
        r2 = prop @ r1
        if np.linalg.norm(r2 - r1) < 1e-13 and np.linalg.norm(lv_block @ r2) < tol:
            out = r2.reshape(d, d)
            out = 0.5 * (out + out.conj().T)
            return out / np.trace(out).real * np.trace(rho0).real
        rho, t = r2, t * 4.0
    raise DegenerateSteadyState(
        f"block residual {np.linalg.norm(lv_block @ rho):.2e} after propagation")


def steady_state(lv, h_rwa=None, channels=None, rho0=None, tol=1e-10) -> np.ndarray:
    """Steady density matrix of a trace-preserving Lindblad generator.

    The solve is restricted to the basis-state components actually coupled
    to the initial state (default: the maximally mixed ground state), which
    is exactly the long-time propagation limit when decoupled dark states
    make the full null space degenerate.  Within a component the null
    vector comes from a bordered direct solve with iterative refinement;
    if its residual cannot reach `tol` (a degenerate component), explicit
    propagation is used, and DegenerateSteadyState raised if that fails.

    `h_rwa` and `channels` enable the connectivity reduction; without
    them the full-space solve is attempted directly.
    """
    d2 = lv.shape[0]
    d = int(round(np.sqrt(d2)))
    rho0 = _maximally_mixed_ground(d) if rho0 is None else np.asarray(rho0)

    if h_rwa is None or channels is None:
        rho = _solve_block(lv, d, tol)
        if rho is None:
            rho = _propagate_block(lv, d, rho0.astype(complex), tol)
        return rho

    comp, n_comp = _connected_components(h_rwa, channels)
    rho_full = np.zeros((d, d), dtype=complex)
    for c in range(n_comp):
        sel = np.nonzero(comp == c)[0]
        weight = float(np.real(np.trace(rho0[np.ix_(sel, sel)])))
        if weight <= 0:
            continue
        dc = len(sel)
        if dc == 1:
            rho_full[sel[0], sel[0]] = weight
            continue
        vec_idx = (sel[:, None] * d + sel[None, :]).reshape(-1)
        lv_block = lv[np.ix_(vec_idx, vec_idx)]
        rho_c = _solve_block(lv_block, dc, tol)
        if rho_c is None:
            seed = rho0[np.ix_(sel, sel)].astype(complex) / weight
            rho_c = _propagate_block(lv_block, dc, seed, tol)
        rho_full[np.ix_(sel, sel)] = weight * rho_c
    return rho_full


def time_evolve(lv, rho0, t_final, dt_control=None, trace_tol=1e-9):
    """Propagate vec(rho) with the matrix exponential in controlled steps.

    Steps are sized so ||L|| dt stays moderate; the trace drift is
    monitored each step and the step is halved (propagator recomputed)
    when it exceeds trace_tol.  Raises StepSizeUnderflow below the step
    floor.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if t_final == 0:
        return rho0.copy()
    if t_final < 0:
        raise ValueError("t_final must be >= 0")
    scale = max(np.abs(lv).max(), 1e-12)
    dt = dt_control if dt_control else min(t_final, 64.0 / scale)
    dt_min = t_final / 2**24
    while True:
        n_steps = max(1, int(np.ceil(t_final / dt)))
        step = t_final / n_steps
        prop = expm(lv * step)
        x = rho0.reshape(-1).copy()
        ok = True
        for _ in range(n_steps):
            x = prop @ x
            drift = abs(np.trace(x.reshape(d, d)).real - np.trace(rho0).real)
            if drift > trace_tol:
                ok = False
                break
        if ok:
            return x.reshape(d, d)
        dt = step / 2.0
        if dt < dt_min:
            raise StepSizeUnderflow(f"dt {dt:g} below floor {dt_min:g}")


def broadened_observable(p: ModelParams, observable_fn, sigma_wander=None,
                         n_nodes=7):
    """Gauss-Hermite average of observable_fn(detuning_offset).

    The offset is a rigid shift of all trion levels, normally distributed
    with standard deviation sigma_wander (defaults to p.sigma_wander).
    observable_fn may return a scalar or an ndarray.
    """
    sigma = p.sigma_wander if sigma_wander is None else sigma_wander
    if sigma < 0:
        raise ValueError("sigma_wander must be >= 0")
    if n_nodes < 1 or n_nodes % 2 == 0:
        raise ValueError("n_nodes must be odd and >= 1")
    if sigma == 0:
        return observable_fn(0.0)
    xs, ws = np.polynomial.hermite.hermgauss(n_nodes)
    total = None
    for x, w in zip(xs, ws):
        val = observable_fn(np.sqrt(2.0) * sigma * x)
        term = (w / np.sqrt(np.pi)) * np.asarray(val, dtype=float)
        total = term if total is None else total + term
    return total


def absorption_signal(rho, frame: RwaFrame, states=None, laser_index=None):
    """Absorption proxy: gamma_sp times the excited population share.

    `states` selects trion eigenstate indices to attribute; alternatively
    laser_index attributes all eigenstates assigned to that laser.
    Linear in power for weak drive; arbitrary units.
    """
    if states is None:
        if laser_index is None:
            states = range(frame.idx.n_trion)
        else:
            states = [n for n, li in frame.assignment.items() if li == laser_index]
    return frame.p.gamma_sp * sum(frame.eigenstate_population(rho, n)
                                  for n in states)


def ground_populations(rho):
    """(n_up, n_down) of the resident electron."""
    return float(np.real(rho[0, 0])), float(np.real(rho[1, 1]))
