"""Model parameters, physical constants and unit helpers.

All energies are in micro-eV, magnetic fields in tesla, bias voltages in
millivolt.  Time, where it appears, is in units of hbar/micro-eV
(0.6582 ps per unit).
"""

import math
from dataclasses import dataclass, field, replace, asdict

# Bohr magneton in micro-eV per tesla.
MU_B = 57.8838

# Planck constant in micro-eV per GHz (fixes the GHz <-> energy conversion).
PLANCK_UEV_PER_GHZ = 4.135667

# hbar in micro-eV * ps; 1 time unit of the master equation is HBAR_UEV_PS ps.
HBAR_UEV_PS = 658.2119569 / 1000.0


class ParamError(ValueError):
    """A model parameter violates an invariant.  `field` names the offender."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NonPositiveTunneling(ParamError):
    pass


class NegativeRate(ParamError):
    pass


class InvertedBiasWindow(ParamError):
    pass


@dataclass(frozen=True)
class CoTunnelingProfile:
    """Phenomenological co-tunneling rate profile over the bias plateau.

    The rate is fast near the plateau edges (v_left, v_right) where the
    resident electron exchanges rapidly with the doped contact, and drops
    to kappa_center in the middle.  All rates in micro-eV, voltages in mV.
    """

    kappa_edge: float = 0.3
    kappa_center: float = 0.0003
    v_left: float = 10.0
    v_right: float = 90.0
    width: float = 3.0


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the quantum dot molecule trion system.

    Defaults follow the measured values where known (tunneling 850 ueV,
    axial e-h exchange 130 ueV, spin-orbit spin-flip tunneling 95 ueV,
    diamagnetic coefficient 10.8 ueV/T^2, dipole 25 D, emission rate
    hbar/500 ps).  The g-factors, the asymmetric e-h exchange and the
    charge detuning are free calibration parameters; their defaults are
    tuned so the two bright-branch anticrossings sit at 1.0 T and 2.8 T.
    """

    t_e: float = 850.0              # electron tunneling amplitude, ueV
    delta_eh0: float = 130.0        # axial e-h exchange, ueV
    h_so: float = 95.0              # spin-flip tunneling amplitude, ueV
    delta_eh_asym: float = 10.0     # asymmetric e-h exchange (uncalibrated), ueV
    g_e_bottom: float = 0.446       # calibration parameter
    g_e_top: float = 0.446          # calibration parameter
    g_h: float = -0.82041           # hole pseudo-spin g-factor, calibration
    kappa_dia: float = 10.8         # diamagnetic coefficient, ueV/T^2
    eps0: float = 2463.73           # (2,0)-(1,1) charge detuning at V_center, ueV
    lever_arm: float = 2.0          # bias lever arm, ueV/mV
    gamma_sp: float = 1.3164        # spontaneous emission rate, ueV (hbar/500 ps)
    dipole: float = 25.0            # transition dipole, Debye
    cotun: CoTunnelingProfile = field(default_factory=CoTunnelingProfile)
    sigma_wander: float = 8.2713    # spectral wandering std dev, ueV (~2 GHz)

    @property
    def v_center(self):
        """Bias plateau midpoint; reference for the detuning lever arm."""
        return 0.5 * (self.cotun.v_left + self.cotun.v_right)

    def epsilon(self, v_mv):
        """Charge-configuration detuning eps(V) = eps0 + lever_arm*(V - V_center)."""
        return self.eps0 + self.lever_arm * (v_mv - self.v_center)

    def with_(self, **kwargs):
        """Return a copy with the given fields replaced (cotun fields flattened)."""
        cot_fields = {"kappa_edge", "kappa_center", "v_left", "v_right", "width"}
        cot_updates = {k: kwargs.pop(k) for k in list(kwargs) if k in cot_fields}
        p = replace(self, **kwargs)
        if cot_updates:
            p = replace(p, cotun=replace(p.cotun, **cot_updates))
        return p

    def flat_dict(self):
        """All fields as a flat name -> value dict (cotun fields inlined)."""
        d = asdict(self)
        d.update(d.pop("cotun"))
        return d


def validate_params(p: ModelParams) -> ModelParams:
    """Check all parameter invariants; return `p` unchanged if they hold.

    Raises
    ------
    NonPositiveTunneling
        If t_e <= 0.
    NegativeRate
        If any rate or width is negative (gamma_sp must be > 0).
    InvertedBiasWindow
        If the plateau window is empty.
    """
    if p.t_e <= 0:
        raise NonPositiveTunneling("t_e", f"must be > 0, got {p.t_e}")
    if p.gamma_sp <= 0:
        raise NegativeRate("gamma_sp", f"must be > 0, got {p.gamma_sp}")
    for name in ("h_so", "delta_eh0", "delta_eh_asym", "sigma_wander", "dipole"):
        if getattr(p, name) < 0:
            raise NegativeRate(name, f"must be >= 0, got {getattr(p, name)}")
    for name in ("kappa_edge", "kappa_center", "width"):
        if getattr(p.cotun, name) < 0:
            raise NegativeRate(name, f"must be >= 0, got {getattr(p.cotun, name)}")
    if not p.cotun.v_left < p.cotun.v_right:
        raise InvertedBiasWindow(
            "v_left", f"v_left={p.cotun.v_left} must be < v_right={p.cotun.v_right}")
    return p


def ghz_to_microev(f_ghz):
    """Convert a frequency in GHz to an energy in micro-eV (h*f)."""
    if f_ghz < 0:
        raise ValueError(f"frequency must be >= 0, got {f_ghz}")
    return PLANCK_UEV_PER_GHZ * f_ghz


def rabi_from_power(power_uw, dipole_debye=25.0, spot_diameter_um=2.0):
    """Advisory helper: laser power (uW) to Rabi energy (ueV).

    Assumes a Gaussian spot of the given diameter (waist = diameter/2) and
    the full field amplitude at the beam center; collection and coupling
    efficiencies of a real setup are not modeled, so treat the result as
    an order-of-magnitude guide only.
    """
    debye = 3.33564e-30           # C m
    eps0_si = 8.8541878128e-12
    c_si = 2.99792458e8
    waist = 0.5 * spot_diameter_um * 1e-6
    intensity = 2.0 * power_uw * 1e-6 / (math.pi * waist**2)
    e_field = math.sqrt(2.0 * intensity / (c_si * eps0_si))
    hbar_omega_j = dipole_debye * debye * e_field
    return hbar_omega_j / 1.602176634e-19 * 1e6
