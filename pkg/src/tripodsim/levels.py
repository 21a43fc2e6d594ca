"""Atomic level schemes for tripod-type light storage.

Two schemes are provided:

``tripod4``
    The idealized four-level tripod: three stable ground states
    ``g-``, ``g0``, ``g+`` and one decaying excited state ``e``.
    Signal field 1 drives ``g- -> e`` (sigma+), the control field drives
    ``g0 -> e`` (pi), and signal field 2 drives ``g+ -> e`` (sigma-).
    Spontaneous decay branches equally (1/3) to each ground state.

``zeeman8``
    The F=2 -> F'=1 manifold of the Rb D1 line: five Zeeman ground
    sublevels m = -2..+2 and three excited sublevels m' = -1..+1.
    The pi-polarized control couples m = -1, +1 to m' = -1, +1 (the
    m=0 pi line has zero Clebsch-Gordan weight), the sigma+ component
    of signal 1 and the sigma- component of signal 2 supply the tripod
    couplings, and the off-resonant sigma-/sigma+ partner components
    are optional "leakage" channels that turn the dark states into
    gray states.  Coupling weights and branching ratios are squared
    Clebsch-Gordan coefficients of the 2 (x) 1 -> 1 decomposition,
    so branching from each excited sublevel sums to exactly 1.

The rotating frame is chosen so that every resonantly driven coupling is
time independent: the one-photon detuning ``Delta`` and the two-photon
detunings ``delta1``, ``delta2`` appear as diagonal entries, and only the
leakage couplings retain an explicit phase rotating at the signal-field
frequency difference.  Each state carries the coefficients of its diagonal
entry in terms of (delta1, delta2, Delta, zeta), where zeta is the
adjacent-sublevel Zeeman splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .constants import zeeman_rate

# Polarization label for a transition with Delta m = m_upper - m_lower.
POLARIZATION_BY_DM = {-1: "sigma-", 0: "pi", +1: "sigma+"}

VARIANTS = ("tripod4", "zeeman8")


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | j m> (integer spins).

    Racah's closed form, evaluated with exact rational arithmetic before
    the final square root.
    """
    if m1 + m2 != m:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m) > j:
        return 0.0
    if not (abs(j1 - j2) <= j <= j1 + j2):
        return 0.0

    f = math.factorial
    pref = Fraction(
        (2 * j + 1) * f(j1 + j2 - j) * f(j1 - j2 + j) * f(-j1 + j2 + j),
        f(j1 + j2 + j + 1),
    ) * Fraction(
        f(j + m) * f(j - m) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)
    )

    total = Fraction(0)
    k_min = max(0, j2 - j - m1, j1 + m2 - j)
    k_max = min(j1 + j2 - j, j1 - m1, j2 + m2)
    for k in range(k_min, k_max + 1):
        denom = (
            f(k)
            * f(j1 + j2 - j - k)
            * f(j1 - m1 - k)
            * f(j2 + m2 - k)
            * f(j - j2 + m1 + k)
            * f(j - j1 - m2 + k)
        )
        total += Fraction((-1) ** k, denom)

    sign = 1.0 if total >= 0 else -1.0
    return sign * math.sqrt(float(pref)) * abs(float(total))


@dataclass(frozen=True)
class State:
    """One atomic level.

    ``diag_coeffs`` are the coefficients (c_delta1, c_delta2, c_Delta,
    c_zeta) of this state's rotating-frame diagonal energy; ``energy_shift``
    is the lab-frame Zeeman shift m * zeta (rad/us) for the field given to
    :func:`build_scheme`, kept for bookkeeping only.
    """

    label: str
    zeeman_m: int
    energy_shift: float
    excited: bool
    diag_coeffs: tuple[float, float, float, float]


@dataclass(frozen=True)
class Transition:
    """A driven dipole coupling between two levels.

    ``weight`` is the relative coupling strength (Clebsch-Gordan value,
    sign included).  ``field`` names the driving field: "control", "s1" or
    "s2".  ``frame_coeffs`` are the coefficients of this coupling's
    residual rotation rate in terms of (delta1, delta2, Delta, zeta): the
    Hamiltonian term oscillates as exp(-i * r * t) with r the dot product.
    The frame is chosen (strong couplings first) so that every coupling
    a tripod storage sequence relies on is static; only leakage channels
    and the weak mid-manifold couplings of the Zeeman scheme rotate.
    """

    lower: str
    upper: str
    polarization: str
    weight: float
    field: str
    frame_coeffs: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    leakage: bool = False

    @property
    def static(self) -> bool:
        return all(c == 0.0 for c in self.frame_coeffs)


@dataclass(frozen=True)
class LevelScheme:
    """States, couplings and decay data for one scheme variant."""

    variant: str
    states: tuple[State, ...]
    transitions: tuple[Transition, ...]
    decay_rate: float
    branching: tuple[tuple[str, tuple[tuple[str, float], ...]], ...]
    # (control-state label, signal-state label) for the two storage
    # coherences: spin_pairs[0] holds signal 1, spin_pairs[1] signal 2.
    spin_pairs: tuple[tuple[str, str], tuple[str, str]]
    # Ground states populated in the polariton vacuum (half each).
    vacuum_labels: tuple[str, str]

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states)

    @property
    def excited_labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states if s.excited)

    @property
    def ground_labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states if not s.excited)

    def index(self, label: str) -> int:
        for i, s in enumerate(self.states):
            if s.label == label:
                return i
        raise KeyError(f"unknown state label {label!r}")


def _validate(scheme: LevelScheme) -> LevelScheme:
    by_label = {s.label: s for s in scheme.states}
    for tr in scheme.transitions:
        lo, up = by_label[tr.lower], by_label[tr.upper]
        if not up.excited or lo.excited:
            raise ValueError(f"transition {tr.lower}->{tr.upper} must go ground->excited")
        dm = up.zeeman_m - lo.zeeman_m
        if POLARIZATION_BY_DM.get(dm) != tr.polarization:
            raise ValueError(
                f"transition {tr.lower}->{tr.upper}: polarization "
                f"{tr.polarization} inconsistent with Delta m = {dm}"
            )
    for upper, channels in scheme.branching:
        total = sum(frac for _, frac in channels)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"branching from {upper} sums to {total}, expected 1")
    return scheme


def _tripod4(gamma: float, zeta: float) -> LevelScheme:
    states = (
        State("g-", -1, -zeta, False, (-1.0, 0.0, 0.0, 0.0)),
        State("g0", 0, 0.0, False, (0.0, 0.0, 0.0, 0.0)),
        State("g+", +1, +zeta, False, (0.0, -1.0, 0.0, 0.0)),
        State("e", 0, 0.0, True, (0.0, 0.0, -1.0, 0.0)),
    )
    transitions = (
        Transition("g-", "e", "sigma+", 1.0, "s1"),
        Transition("g0", "e", "pi", 1.0, "control"),
        Transition("g+", "e", "sigma-", 1.0, "s2"),
    )
    branching = (("e", (("g-", 1.0 / 3.0), ("g0", 1.0 / 3.0), ("g+", 1.0 / 3.0))),)
    return LevelScheme(
        variant="tripod4",
        states=states,
        transitions=transitions,
        decay_rate=gamma,
        branching=branching,
        spin_pairs=(("g0", "g-"), ("g0", "g+")),
        vacuum_labels=("g-", "g+"),
    )


# Rotating-frame diagonal coefficients (c_delta1, c_delta2, c_Delta, c_zeta)
# for the zeeman8 scheme.  Each state rotates at the frequency of the
# field chain reaching it through the spanning tree
#   g-1 -pi- e-1 { -s1- g-2, -s2- g0 -pi- e0 -s2- g+1 -pi- e+1 -s2- g+2 }
# (anchor: m = -1 ground), which keeps all pi couplings and both
# storage-relevant signal couplings static.
_ZEEMAN8_DIAG = {
    "g-2": (-1.0, 0.0, 0.0, 0.0),
    "g-1": (0.0, 0.0, 0.0, 0.0),
    "g0": (0.0, -1.0, 0.0, 0.0),
    "g+1": (0.0, -2.0, 0.0, 0.0),
    "g+2": (0.0, -3.0, 0.0, 0.0),
    "e-1": (0.0, 0.0, -1.0, +1.0),
    "e0": (0.0, -1.0, -1.0, 0.0),
    "e+1": (0.0, -2.0, -1.0, -1.0),
}

# Residual rotation coefficients for couplings that are not tree edges.
# Keys: (field, Delta-m of the driven transition, lower-state m).
_ZEEMAN8_FRAME = {
    ("s1", +1, -1): (-1.0, -1.0, 0.0, 0.0),  # sigma+ into e0
    ("s1", +1, 0): (-1.0, -1.0, 0.0, 0.0),  # sigma+ into e+1
    ("s1", -1, 0): (-1.0, +1.0, 0.0, +2.0),  # leakage, rotates at +omega_12
    ("s1", -1, +1): (-1.0, +1.0, 0.0, +2.0),
    ("s1", -1, +2): (-1.0, +1.0, 0.0, +2.0),
    ("s2", +1, -2): (+1.0, -1.0, 0.0, -2.0),  # leakage, rotates at -omega_12
    ("s2", +1, -1): (0.0, -2.0, 0.0, -2.0),
    ("s2", +1, 0): (0.0, -2.0, 0.0, -2.0),
}


def _zeeman8(gamma: float, zeta: float, leakage_on: bool) -> LevelScheme:
    ground_ms = (-2, -1, 0, 1, 2)
    excited_ms = (-1, 0, 1)

    def glabel(m):
        return f"g{m:+d}".replace("+0", "0").replace("-0", "0") if m else "g0"

    def elabel(m):
        return f"e{m:+d}" if m else "e0"

    states = []
    for m in ground_ms:
        lbl = glabel(m)
        states.append(State(lbl, m, m * zeta, False, _ZEEMAN8_DIAG[lbl]))
    for m in excited_ms:
        lbl = elabel(m)
        states.append(State(lbl, m, 0.0, True, _ZEEMAN8_DIAG[lbl]))

    def cg(m_lower: int, q: int) -> float:
        return clebsch_gordan(2, m_lower, 1, q, 1, m_lower + q)

    transitions = []

    def add(m_lo: int, q: int, field: str, leak: bool):
        m_up = m_lo + q
        if abs(m_up) > 1:
            return
        w = cg(m_lo, q)
        if w == 0.0:
            return
        coeffs = _ZEEMAN8_FRAME.get((field, q, m_lo), (0.0, 0.0, 0.0, 0.0))
        transitions.append(
            Transition(glabel(m_lo), elabel(m_up), POLARIZATION_BY_DM[q],
                       w, field, coeffs, leak)
        )

    # Resonant couplings (solid lines): pi control, sigma+ of signal 1,
    # sigma- of signal 2.
    for m in ground_ms:
        add(m, 0, "control", False)
    for m in ground_ms:
        add(m, +1, "s1", False)
    for m in ground_ms:
        add(m, -1, "s2", False)

    # Leakage (dashed lines): each signal's opposite circular component,
    # detuned by the Delta-m = 2 Zeeman splitting.
    if leakage_on:
        for m in ground_ms:
            add(m, -1, "s1", True)
        for m in ground_ms:
            add(m, +1, "s2", True)

    branching = []
    for m_up in excited_ms:
        channels = []
        for q in (-1, 0, +1):
            m_lo = m_up - q
            if abs(m_lo) > 2:
                continue
            frac = cg(m_lo, q) ** 2
            if frac > 0.0:
                channels.append((glabel(m_lo), frac))
        branching.append((elabel(m_up), tuple(channels)))

    return LevelScheme(
        variant="zeeman8",
        states=tuple(states),
        transitions=tuple(transitions),
        decay_rate=gamma,
        branching=tuple(branching),
        spin_pairs=(("g-1", "g-2"), ("g+1", "g+2")),
        vacuum_labels=("g-2", "g+2"),
    )


def build_scheme(
    variant: str,
    gamma: float,
    leakage_on: bool = False,
    b_field: float = 0.0,
    g_factor: float = 0.5,
) -> LevelScheme:
    """Build a level scheme.

    Parameters
    ----------
    variant : {"tripod4", "zeeman8"}
    gamma : float
        Excited-state decay rate, rad/us (> 0).
    leakage_on : bool
        Include the off-resonant circular signal components (zeeman8
        only; the idealized tripod4 has purely polarized couplings and
        ignores the flag).
    b_field, g_factor : float
        Used only to record lab-frame Zeeman shifts on the states; the
        dynamics take the splitting from the drive configuration.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    zeta = zeeman_rate(b_field, g_factor)
    if variant == "tripod4":
        return _validate(_tripod4(gamma, zeta))
    if variant == "zeeman8":
        return _validate(_zeeman8(gamma, zeta, leakage_on))
    raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
