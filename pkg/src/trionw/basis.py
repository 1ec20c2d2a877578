"""Spin-orbital basis for the ground and trion manifolds.

Ground manifold: one resident electron in the bottom dot, spin +-1/2.
Trion manifold: two electrons and one hole.  In the (1,1) charge
configuration one electron sits in each dot and the hole in the top dot;
in the (2,0) configuration both electrons form a singlet in the bottom
dot.  The hole is a pseudo-spin 1/2 (its +-3/2 projection is bookkeeping
recovered in the state labels only).

Index order is fixed: ground states first (up, down), then the eight
(1,1) product states in lexicographic order with spin up before down
(e_bottom, e_top, hole), then the (2,0) singlet x hole-spin states, then
optionally the (0,2) states when enabled.
"""

import enum
from dataclasses import dataclass

UP = +0.5
DOWN = -0.5


class Manifold(enum.Enum):
    GROUND = "ground"
    TRION = "trion"


class Config(enum.Enum):
    ONE_ONE = "1,1"
    TWO_ZERO = "2,0"
    ZERO_TWO = "0,2"


def _arrow(spin, kind="e"):
    glyphs = {"e": ("u", "d"), "h": ("U", "D")}
    up, down = glyphs[kind]
    return up if spin > 0 else down


@dataclass(frozen=True)
class BasisState:
    """One basis vector.  Spin fields are +-0.5 or None when absent.

    For TWO_ZERO / ZERO_TWO states the two electrons form a spin singlet
    in a single dot, so e_bottom and e_top are None and only the hole
    spin remains.
    """

    manifold: Manifold
    config: Config | None = None
    e_bottom: float | None = None
    e_top: float | None = None
    hole: float | None = None

    def name(self):
        if self.manifold is Manifold.GROUND:
            return f"g{_arrow(self.e_bottom)}"
        if self.config is Config.ONE_ONE:
            return (f"({_arrow(self.e_bottom)}{_arrow(self.e_top)},"
                    f"{_arrow(self.hole, 'h')})")
        tag = "S20" if self.config is Config.TWO_ZERO else "S02"
        return f"{tag}({_arrow(self.hole, 'h')})"


def enumerate_basis(include_zero_two: bool = False) -> list[BasisState]:
    """Ordered basis: 2 ground + 10 trion states (12 with the (0,2) flag)."""
    states = [
        BasisState(Manifold.GROUND, e_bottom=UP),
        BasisState(Manifold.GROUND, e_bottom=DOWN),
    ]
    for eb in (UP, DOWN):
        for et in (UP, DOWN):
            for h in (UP, DOWN):
                states.append(BasisState(Manifold.TRION, Config.ONE_ONE,
                                         e_bottom=eb, e_top=et, hole=h))
    for h in (UP, DOWN):
        states.append(BasisState(Manifold.TRION, Config.TWO_ZERO, hole=h))
    if include_zero_two:
        for h in (UP, DOWN):
            states.append(BasisState(Manifold.TRION, Config.ZERO_TWO, hole=h))
    return states


class StateIndex:
    """Index bookkeeping over an enumerated basis.

    Provides the ground/trion block slices and lookups between indices
    and BasisState values.  Trion-local indices (used by the trion
    Hamiltonian) count from the first trion state.
    """

    def __init__(self, include_zero_two: bool = False):
        self.states = enumerate_basis(include_zero_two)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.n_ground = 2
        self.dim = len(self.states)
        self.n_trion = self.dim - self.n_ground
        self.ground = slice(0, self.n_ground)
        self.trion = slice(self.n_ground, self.dim)

    def of(self, state: BasisState) -> int:
        return self.index[state]

    def trion_local(self, state: BasisState) -> int:
        """Index of a trion state within the trion block."""
        return self.index[state] - self.n_ground

    def one_one(self, eb, et, h) -> BasisState:
        return BasisState(Manifold.TRION, Config.ONE_ONE,
                          e_bottom=eb, e_top=et, hole=h)

    def two_zero(self, h) -> BasisState:
        return BasisState(Manifold.TRION, Config.TWO_ZERO, hole=h)

    def ground_state(self, spin) -> BasisState:
        return BasisState(Manifold.GROUND, e_bottom=spin)

    def trion_states(self):
        return self.states[self.trion]
