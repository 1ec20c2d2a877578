"""Ground and trion Hamiltonians, eigen-branch sweeps and anticrossings.

Hamiltonians are built in the product spin basis of `basis.enumerate_basis`
with all energies in micro-eV.  Fixed sign/amplitude conventions:

* Zeeman energy of each particle is g * mu_B * B * s_z with s_z = +-1/2.
* Axial e-h exchange on (1,1) states is +delta_eh0/2 when the top-dot
  electron and the hole pseudo-spin are aligned, -delta_eh0/2 otherwise.
* Spin-conserving tunneling couples the (1,1) interdot singlet to the
  (2,0) singlet with amplitude sqrt(2)*t_e (product-basis elements +-t_e).
* Spin-flip tunneling couples the polarized (1,1) states (uu,h)/(dd,h)
  to the (2,0) singlet of the same hole spin with amplitude
  +-sqrt(2)*h_so; both channels carry the same sqrt(2) enhancement into
  the doubly occupied orbital, which is what makes the exact minimum gap
  at the triplet anticrossing reproduce the perturbative product
  (h_so/t_e)*delta_eh0.
* The asymmetric e-h exchange flips the top electron and the hole
  together, (x,u,D) <-> (x,d,U), with element delta_eh_asym/2.
* The charge detuning eps(V) sits on the (2,0) states; the whole trion
  manifold additionally Stark-shifts by lever_arm*(V - V_center) so that
  optical lines move rigidly with bias, and kappa_dia*B^2 shifts it with
  field.
"""

import numpy as np

from .basis import UP, DOWN, StateIndex
from .params import MU_B, ModelParams, validate_params


class TrackingLost(RuntimeError):
    """Eigen-branch continuity lost: best overlap below 0.5 (grid too coarse)."""


class NoMinimumInWindow(RuntimeError):
    """The inter-branch gap has no interior minimum in the search window."""


class CalibrationDiverged(RuntimeError):
    """Anticrossing calibration failed to converge."""


class ZeroTunneling(ZeroDivisionError):
    """Eq.-(3)-style effective exchange is undefined at t_e = 0."""


# Spectroscopic state names for the ten trion characters (electron
# triplet/singlet combinations tensored with the hole pseudo-spin, plus
# the (2,0) singlets); subscripts are total spin projections.
TRIPLET_LABELS = ("T-1/2", "T+3/2", "T+1/2", "T-3/2", "T+5/2", "T-5/2")
SINGLET_LABELS = ("S11+3/2", "S11-3/2", "S20+3/2", "S20-3/2")


def build_ground_hamiltonian(p: ModelParams, b_tesla: float) -> np.ndarray:
    """2x2 resident-electron Zeeman Hamiltonian, diagonal (+,-) g mu_B B / 2."""
    z = 0.5 * p.g_e_bottom * MU_B * b_tesla
    return np.diag([z, -z]).astype(complex)


def build_trion_hamiltonian(p: ModelParams, b_tesla: float, v_mv: float,
                            include_zero_two: bool = False) -> np.ndarray:
    """Trion-manifold Hamiltonian (10x10, or 12x12 with the (0,2) flag).

    The optional (0,2) singlets enter as uncoupled placeholder levels
    (hole Zeeman and rigid shifts only): the spin-pumping chain needs only
    the (2,0) intermediates, so no tunneling into (0,2) is modeled.
    """
    idx = StateIndex(include_zero_two)
    n = idx.n_trion
    h = np.zeros((n, n), dtype=complex)
    loc = idx.trion_local
    zb = p.g_e_bottom * MU_B * b_tesla
    zt = p.g_e_top * MU_B * b_tesla
    zh = p.g_h * MU_B * b_tesla

    for s in idx.trion_states():
        i = loc(s)
        if s.e_bottom is not None:  # (1,1) product state
            h[i, i] += zb * s.e_bottom + zt * s.e_top + zh * s.hole
            h[i, i] += 2.0 * p.delta_eh0 * s.e_top * s.hole
        else:  # intradot singlet: electron Zeeman cancels
            h[i, i] += zh * s.hole

    eps = p.epsilon(v_mv)
    for hole in (UP, DOWN):
        s20 = loc(idx.two_zero(hole))
        h[s20, s20] += eps
        # spin-conserving tunneling: +-t_e from the two interdot components
        h[s20, loc(idx.one_one(UP, DOWN, hole))] += p.t_e
        h[s20, loc(idx.one_one(DOWN, UP, hole))] += -p.t_e
    # spin-flip tunneling: one circular spin-orbit channel, so only the
    # polarized state of each Kramers pair couples ((uu,D) and (dd,U))
    h[loc(idx.two_zero(DOWN)), loc(idx.one_one(UP, UP, DOWN))] += np.sqrt(2.0) * p.h_so
    h[loc(idx.two_zero(UP)), loc(idx.one_one(DOWN, DOWN, UP))] += np.sqrt(2.0) * p.h_so
    for eb in (UP, DOWN):
        # asymmetric exchange: simultaneous top-electron and hole flip
        h[loc(idx.one_one(eb, DOWN, UP)),
          loc(idx.one_one(eb, UP, DOWN))] += 0.5 * p.delta_eh_asym

    h = h + h.conj().T - np.diag(h.diagonal())

    # rigid shifts of the whole manifold: diamagnetic and bias Stark
    shift = p.kappa_dia * b_tesla**2 + p.lever_arm * (v_mv - p.v_center)
    h += shift * np.eye(n)
    return h


def character_vectors(include_zero_two: bool = False):
    """Label -> unit vector (in the trion block) for the named characters."""
    idx = StateIndex(include_zero_two)
    n = idx.n_trion
    loc = idx.trion_local

    def ket(*states_weights):
        v = np.zeros(n, dtype=complex)
        for s, w in states_weights:
            v[loc(s)] = w
        return v

    r = 1.0 / np.sqrt(2.0)
    chars = {
        "T-1/2": ket((idx.one_one(UP, UP, DOWN), 1.0)),
        "T+5/2": ket((idx.one_one(UP, UP, UP), 1.0)),
        "T+1/2": ket((idx.one_one(DOWN, DOWN, UP), 1.0)),
        "T-5/2": ket((idx.one_one(DOWN, DOWN, DOWN), 1.0)),
        "T+3/2": ket((idx.one_one(UP, DOWN, UP), r), (idx.one_one(DOWN, UP, UP), r)),
        "T-3/2": ket((idx.one_one(UP, DOWN, DOWN), r), (idx.one_one(DOWN, UP, DOWN), r)),
        "S11+3/2": ket((idx.one_one(UP, DOWN, UP), r), (idx.one_one(DOWN, UP, UP), -r)),
        "S11-3/2": ket((idx.one_one(UP, DOWN, DOWN), r), (idx.one_one(DOWN, UP, DOWN), -r)),
        "S20+3/2": ket((idx.two_zero(UP), 1.0)),
        "S20-3/2": ket((idx.two_zero(DOWN), 1.0)),
    }
    if include_zero_two:
        from .basis import BasisState, Config, Manifold
        for hole, tag in ((UP, "S02+3/2"), (DOWN, "S02-3/2")):
            s = BasisState(Manifold.TRION, Config.ZERO_TWO, hole=hole)
            chars[tag] = ket((s, 1.0))
    return chars


def character_weights(vec, chars):
    """Weights |<char|vec>|^2 keyed by label."""
    return {lab: abs(np.vdot(c, vec)) ** 2 for lab, c in chars.items()}


def dominant_label(vec, chars):
    w = character_weights(vec, chars)
    return max(w, key=w.get)


class EigenBranch:
    """One adiabatically tracked eigenvalue branch over a parameter sweep."""

    def __init__(self, branch_id, label, energies, vectors):
        self.branch_id = branch_id
        self.label = label
        self.energies = np.asarray(energies)
        self.vectors = np.asarray(vectors)  # shape (n_points, dim)

    def __repr__(self):
        return (f"EigenBranch({self.branch_id}, {self.label!r}, "
                f"{len(self.energies)} points)")


def sweep_eigensystem(p: ModelParams, grid, sweep="B", fixed=None,
                      include_zero_two=False) -> list[EigenBranch]:
    """Diagonalize the trion Hamiltonian along a monotone B or V grid.

    Branches are connected point-to-point by greedy maximal eigenvector
    overlap (ties broken by energy proximity) and labeled by the dominant
    character near the start of the sweep.  Raises TrackingLost when the
    best available overlap for some branch falls below 0.5.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1:
        raise ValueError("grid must be a non-empty 1-d array")
    d = np.diff(grid)
    if len(d) and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("grid must be strictly monotone")
    validate_params(p)
    if sweep == "B":
        v = p.v_center if fixed is None else fixed
        hams = [build_trion_hamiltonian(p, b, v, include_zero_two) for b in grid]
    elif sweep == "V":
        b = 0.0 if fixed is None else fixed
        hams = [build_trion_hamiltonian(p, b, vv, include_zero_two) for vv in grid]
    else:
        raise ValueError(f"sweep must be 'B' or 'V', got {sweep!r}")

    n = hams[0].shape[0]
    energies = np.empty((len(grid), n))
    vectors = np.empty((len(grid), n, n), dtype=complex)
    evals, evecs = np.linalg.eigh(hams[0])
    energies[0] = evals
    vectors[0] = evecs.T

    for k in range(1, len(grid)):
        evals, evecs = np.linalg.eigh(hams[k])
        prev = vectors[k - 1]
        overlap = np.abs(prev.conj() @ evecs)  # (branch, new eigvec)
        de = np.abs(energies[k - 1][:, None] - evals[None, :])
        assigned_new = np.full(n, -1)
        taken = np.zeros(n, dtype=bool)
        # greedy: repeatedly take the best remaining (branch, eigvec) pair
        flat = sorted(((-overlap[a, b], de[a, b], a, b)
                       for a in range(n) for b in range(n)))
        remaining = n
        for negov, _, a, b in flat:
            if assigned_new[a] >= 0 or taken[b]:
                continue
            if -negov < 0.5:
                raise TrackingLost(
                    f"overlap {-negov:.3f} < 0.5 between sweep points "
                    f"{grid[k - 1]:g} and {grid[k]:g}")
            assigned_new[a] = b
            taken[b] = True
            remaining -= 1
            if remaining == 0:
                break
        energies[k] = evals[assigned_new]
        vectors[k] = evecs.T[assigned_new]

    chars = character_vectors(include_zero_two)
    labels = _assign_labels(vectors, chars)
    return [EigenBranch(i, labels[i], energies[:, i], vectors[:, i, :])
            for i in range(n)]


def _assign_labels(vectors, chars):
    """Pick the first sweep point where every branch has a clear, unique
    dominant character; fall back to point 0 with #k suffixes."""
    n_points, n, _ = vectors.shape
    for k in range(min(n_points, 12)):
        labels = [dominant_label(vectors[k, i], chars) for i in range(n)]
        weights = [character_weights(vectors[k, i], chars)[labels[i]]
                   for i in range(n)]
        if len(set(labels)) == n and min(weights) > 0.5:
            return labels
    labels = [dominant_label(vectors[0, i], chars) for i in range(n)]
    seen = {}
    out = []
    for lab in labels:
        seen[lab] = seen.get(lab, 0) + 1
        out.append(lab if seen[lab] == 1 else f"{lab}#{seen[lab]}")
    return out


def _pair_gap(p, b_tesla, v_mv, pair, chars=None):
    """Energy gap between the two eigenstates carrying the given characters."""
    if chars is None:
        chars = character_vectors()
    h = build_trion_hamiltonian(p, b_tesla, v_mv)
    evals, evecs = np.linalg.eigh(h)
    ca, cb = chars[pair[0]], chars[pair[1]]
    score = np.abs(ca.conj() @ evecs) ** 2 + np.abs(cb.conj() @ evecs) ** 2
    i, j = np.argsort(score)[-2:]
    return abs(evals[i] - evals[j])


def _golden_min(f, lo, hi, xtol):
    """Plain golden-section minimization on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def find_crossing_field(p: ModelParams, branch_pair, b_window, v_mv=None,
                        xtol=1e-4):
    """Field of the minimum gap between two labeled branches.

    The window must bracket an interior gap minimum; a minimum within
    2*xtol of a window edge raises NoMinimumInWindow.
    """
    validate_params(p)
    v = p.v_center if v_mv is None else v_mv
    chars = character_vectors()
    lo, hi = float(b_window[0]), float(b_window[1])
    f = lambda b: _pair_gap(p, b, v, branch_pair, chars)
    b_min, _ = _golden_min(f, lo, hi, xtol)
    if b_min - lo < 2 * xtol or hi - b_min < 2 * xtol:
        raise NoMinimumInWindow(
            f"gap minimum for {branch_pair} sits at the edge of "
            f"[{lo:g}, {hi:g}] T")
    return b_min


def anticrossing_gap(p: ModelParams, branch_pair, b_window, v_mv=None):
    """Minimum eigen-gap (ueV) between two labeled branches over a window.

    The minimum is refined beyond the 1e-4 T field tolerance so that a
    true crossing (no coupling) evaluates to a numerically zero gap.
    """
    v = p.v_center if v_mv is None else v_mv
    b = find_crossing_field(p, branch_pair, b_window, v_mv=v_mv)
    chars = character_vectors()
    f = lambda x: _pair_gap(p, x, v, branch_pair, chars)
    b_fine, gap = _golden_min(f, b - 2e-4, b + 2e-4, 1e-9)
    return gap


def effective_exchange_eq3(h_so, t_e, delta_eh):
    """Perturbative triplet-triplet exchange (h_so / t_e) * delta_eh."""
    if t_e == 0:
        raise ZeroTunneling("t_e must be nonzero")
    return (h_so / t_e) * delta_eh


def effective_exchange_exact(p: ModelParams, b_window=(0.5, 6.0), v_mv=None):
    """Exact minimum gap at the T-1/2 / T-3/2 anticrossing.

    Brute-force oracle for effective_exchange_eq3: diagonalizes the full
    trion Hamiltonian at the crossing field found inside `b_window`.
    """
    if p.h_so == 0:
        # no spin-orbit tunneling: the crossing is exact, gap 0
        return 0.0
    return anticrossing_gap(p, ("T-1/2", "T-3/2"), b_window, v_mv=v_mv)


def calibrate_defaults(p: ModelParams, targets=(1.0, 2.8), tol_tesla=0.02,
                       max_iter=12):
    """Tune (eps0, g_h) so the two bright anticrossings sit at the targets.

    targets = (B1, B2): B1 for the T-1/2 x T+3/2 anticrossing (asymmetric
    e-h exchange), B2 for the T-1/2 x T-3/2 one (spin-orbit tunneling).
    The measured couplings (t_e, delta_eh0, h_so, kappa_dia) are held
    fixed.  Two-dimensional damped
    Newton iteration with a finite-difference Jacobian; raises
    CalibrationDiverged if the residual does not fall below tol_tesla
    within max_iter steps.
    """
    b1_t, b2_t = targets
    if not (0 < b1_t < b2_t):
        raise ValueError("targets must satisfy 0 < B1 < B2")
    validate_params(p)
    win1 = (max(0.1, 0.35 * b1_t), min(2.4 * b1_t, 0.5 * (b1_t + b2_t) + 0.4))
    win2 = (0.5 * (b1_t + b2_t), 2.2 * b2_t)

    def residual(q):
        r1 = find_crossing_field(q, ("T-1/2", "T+3/2"), win1) - b1_t
        r2 = find_crossing_field(q, ("T-1/2", "T-3/2"), win2) - b2_t
        return np.array([r1, r2])

    q = p
    try:
        r = residual(q)
    except NoMinimumInWindow as exc:
        raise CalibrationDiverged(f"initial parameters out of range: {exc}")
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol_tesla:
            return q
        d_eps = max(50.0, 0.02 * abs(q.eps0))
        d_gh = 0.01
        jac = np.empty((2, 2))
        try:
            jac[:, 0] = (residual(q.with_(eps0=q.eps0 + d_eps)) - r) / d_eps
            jac[:, 1] = (residual(q.with_(g_h=q.g_h + d_gh)) - r) / d_gh
            step = np.linalg.solve(jac, -r)
        except (NoMinimumInWindow, np.linalg.LinAlgError) as exc:
            raise CalibrationDiverged(str(exc))
        # damp oversized steps to stay inside the crossing windows
        step[0] = np.clip(step[0], -3000.0, 3000.0)
        step[1] = np.clip(step[1], -0.25, 0.25)
        q = q.with_(eps0=q.eps0 + step[0], g_h=q.g_h + step[1])
        try:
            r = residual(q)
        except NoMinimumInWindow as exc:
            raise CalibrationDiverged(str(exc))
    raise CalibrationDiverged(
        f"residual {np.max(np.abs(r)):.3f} T after {max_iter} iterations")
