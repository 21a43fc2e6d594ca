"""Coupled atom-field propagation in the co-moving frame.

One-dimensional slowly-varying-envelope propagation of the two signal
fields through a uniform medium of tripod atoms, in the retarded time
tau = t - z/c where vacuum propagation is trivial.  Per tau step the
scheme is a first-order split: every cell's density matrix advances by
one RK4 step of the local Lindblad equation (signal fields frozen over
the step; the analytic control envelope and leakage phases are evaluated
at the RK4 stage times), then the field envelopes are re-integrated
along z from the boundary condition,

    d Omega_i / dz = i * (G / 2c) * P_i(z),      G = g^2 * n,

with P_i the weighted sum of optical coherences driven by field i and
the integral evaluated by trapezoidal quadrature in a fixed order (so
results do not depend on any threading above this module).  The control
field is imposed everywhere, undepleted.

The G/(2c) source constant together with the -Omega/2 coupling
convention makes a weak pulse on two-photon resonance propagate at
v_g = c / (1 + G / (2 Omega_C^2)) when half the atoms sit in each of
the two signal-coupled ground states: the factor 2 relative to a
single-Lambda medium is carried by the populations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C_LIGHT
from .dynamics import NumericalError, polariton_vacuum
from .hamiltonian import DriveConfig, diagonal_energies, lindblad_dissipators
from .levels import LevelScheme


@dataclass(frozen=True)
class Grid:
    """Space-time discretization (co-moving frame)."""

    nz: int
    length: float  # mm
    nt: int
    t_max: float  # us

    def __post_init__(self):
        if self.nz < 2 or self.nt < 2:
            raise ValueError("grid needs nz >= 2 and nt >= 2")
        if self.length <= 0 or self.t_max <= 0:
            raise ValueError("grid extents must be positive")

    @property
    def dz(self) -> float:
        return self.length / (self.nz - 1)

    @property
    def dt(self) -> float:
        return self.t_max / (self.nt - 1)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.nz)

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.nt)


@dataclass(frozen=True)
class MediumParams:
    """Medium coupling parameters.

    Only the product G = g^2 * n_density enters propagation; g and
    n_density individually matter for the polariton normalization.
    """

    g: float  # atom-field coupling, rad/us per sqrt(atom)
    n_density: float  # effective atoms per mm
    gamma_g: float = 0.0  # ground-state dephasing rate, rad/us

    def __post_init__(self):
        if self.g < 0 or self.n_density < 0:
            raise ValueError("g and n_density must be >= 0")
        if self.gamma_g < 0:
            raise ValueError("gamma_g must be >= 0")

    @property
    def coupling_density(self) -> float:
        """G = g^2 * n, rad^2/us^2."""
        return self.g**2 * self.n_density


@dataclass
class FieldRecord:
    """Propagation history: boundary traces at full time resolution,
    strided interior snapshots, full density matrices at requested times."""

    grid: Grid
    scheme: LevelScheme
    medium: MediumParams
    drive: DriveConfig
    tau: np.ndarray
    control: np.ndarray
    input_s1: np.ndarray
    input_s2: np.ndarray
    output_s1: np.ndarray
    output_s2: np.ndarray
    snap_tau: np.ndarray
    snap_s1: np.ndarray  # (n_snap, nz)
    snap_s2: np.ndarray
    snap_sigma_plus: np.ndarray  # collective spin amplitude 2*rho[ctrl, sig]
    snap_sigma_minus: np.ndarray
    snap_control: np.ndarray
    rho_snapshots: dict = field(default_factory=dict)  # time -> (nz, d, d)
    min_eigenvalue: float = 0.0

    def boundary(self, which: str, side: str) -> np.ndarray:
        traces = {
            ("s1", "in"): self.input_s1,
            ("s2", "in"): self.input_s2,
            ("s1", "out"): self.output_s1,
            ("s2", "out"): self.output_s2,
        }
        return traces[(which, side)]

    def intensity(self, which: str, side: str) -> np.ndarray:
        """|Omega|^2 trace; which = "s1", "s2" or "total" (incoherent sum)."""
        if which == "total":
            return self.intensity("s1", side) + self.intensity("s2", side)
        return np.abs(self.boundary(which, side)) ** 2

    def detected_intensity(self, side: str) -> np.ndarray:
        """Photodiode model: total intensity of both signal fields
        including their beat at the carrier difference omega_12."""
        s1 = self.boundary("s1", side)
        s2 = self.boundary("s2", side)
        w12 = self.drive.signal_freq_difference
        cross = 2.0 * np.real(s1 * np.conj(s2) * np.exp(-1j * w12 * self.tau))
        return np.abs(s1) ** 2 + np.abs(s2) ** 2 + cross

    def spin_profile(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(sigma_plus(z), sigma_minus(z)) at the snapshot nearest t."""
        i = int(np.argmin(np.abs(self.snap_tau - t)))
        return self.snap_sigma_plus[i].copy(), self.snap_sigma_minus[i].copy()


def _coupling_groups(scheme: LevelScheme, drive: DriveConfig):
    """Group transitions by (field, residual rotation rate) into coupling
    matrices; returns build info for the Hamiltonian and field sources."""
    from .hamiltonian import residual_rate

    d = scheme.dim
    groups = {}
    for tr in scheme.transitions:
        key = (tr.field, residual_rate(tr, drive))
        if key not in groups:
            groups[key] = np.zeros((d, d), dtype=complex)
        groups[key][scheme.index(tr.upper), scheme.index(tr.lower)] += -0.5 * tr.weight
    keys = sorted(groups.keys())
    mats = np.stack([groups[k] for k in keys])
    fields = [k[0] for k in keys]
    rates = np.array([k[1] for k in keys], dtype=float)
    # Source gather lists per signal field: indices and weights of the
    # coherences radiating into that field at its carrier.
    source = {}
    for name in ("s1", "s2"):
        ups, los, ws, rs = [], [], [], []
        for tr in scheme.transitions:
            if tr.field != name:
                continue
            ups.append(scheme.index(tr.upper))
            los.append(scheme.index(tr.lower))
            ws.append(tr.weight)
            rs.append(residual_rate(tr, drive))
        source[name] = (
            np.array(ups, dtype=int),
            np.array(los, dtype=int),
            np.array(ws, dtype=float),
            np.array(rs, dtype=float),
        )
    return mats, fields, rates, source


def estimate_h_norm(scheme: LevelScheme, drive: DriveConfig, peak_signal: float,
                    peak_control: float | None = None) -> float:
    """Conservative scale of max(||H||, Gamma) for step-size selection."""
    ctrl = drive.omega_c if peak_control is None else peak_control
    detune = max(abs(drive.delta), abs(drive.delta1), abs(drive.delta2), abs(drive.zeta))
    return max(scheme.decay_rate, 0.5 * (abs(ctrl) + abs(peak_signal)) + detune)


def propagate(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    schedule,
    grid: Grid,
    rho_snapshot_times: tuple[float, ...] = (),
    snapshot_stride: int = 0,
    check_cfl: bool = True,
    dt_bound: float = 0.05,
) -> FieldRecord:
    """March the coupled Maxwell-Bloch system over the grid.

    ``schedule`` must provide ``control_amplitude(t)`` and
    ``signal_boundary(t)`` accepting array arguments, plus
    ``min_smooth_duration()`` for the ramp-resolution check.  Outputs at
    tau never depend on boundary values later than tau (exact causality
    of the marching scheme).
    """
    dt, dz, nz, nt = grid.dt, grid.dz, grid.nz, grid.nt
    tau = grid.tau

    bnd_s1, bnd_s2 = schedule.signal_boundary(tau)
    peak_s1 = float(np.max(np.abs(bnd_s1)))
    peak_s2 = float(np.max(np.abs(bnd_s2)))
    peak_sig = max(peak_s1, peak_s2)
    peak_ctrl = float(np.max(np.abs(schedule.control_amplitude(tau))))
    hscale = estimate_h_norm(scheme, drive, peak_sig, peak_ctrl)
    if dt * hscale > dt_bound * (1 + 1e-9):
        raise ValueError(
            f"dt={dt:.3e} us too large: dt*max(||H||,Gamma)={dt * hscale:.3f} "
            f"exceeds {dt_bound}; need nt >= {int(grid.t_max * hscale / dt_bound) + 2}"
        )
    ramp = schedule.min_smooth_duration()
    if ramp > 0 and dt > ramp / 20.0:
        raise ValueError(
            f"dt={dt:.3e} us does not resolve the shortest ramp "
            f"({ramp:.3f} us needs >= 20 steps)"
        )
    v_g_pre = C_LIGHT / (1.0 + medium.coupling_density
                         / (2.0 * max(peak_ctrl, 1e-12) ** 2))
    if check_cfl and ramp > 0 and peak_sig > 0 and dz > v_g_pre * ramp / 3.0:
        raise ValueError(
            f"dz={dz:.3f} mm cannot resolve the compressed pulse features "
            f"({v_g_pre:.2f} mm/us x {ramp:.2f} us); need nz >= "
            f"{int(3.0 * grid.length / (v_g_pre * ramp)) + 2}"
        )

    d = scheme.dim
    mats, group_fields, group_rates, source = _coupling_groups(scheme, drive)
    n_groups = mats.shape[0]
    dissipators = lindblad_dissipators(scheme, medium.gamma_g)
    # Effective non-Hermitian generator split: with K = -iH - (1/2) sum
    # gamma L'L (all jumps here are |l><u| or projectors), the Lindblad
    # RHS of a Hermitian rho is K rho + (K rho)' plus a diagonal refill
    # J[l,l] = sum gamma rho[u,u], which costs one batched matmul.
    k_sink = np.zeros((d, d), dtype=complex)
    jump_matrix = np.zeros((d, d), dtype=complex)
    for op, rate in dissipators:
        k_sink += -0.5 * rate * (op.conj().T @ op)
        nz_entries = np.argwhere(np.abs(op) > 0)
        if len(nz_entries) != 1:
            raise NumericalError("jump operators must have a single entry")
        il, iu = nz_entries[0]
        jump_matrix[iu, il] += rate * abs(op[il, iu]) ** 2
    k_diag = -1j * np.diag(diagonal_energies(scheme, drive)).astype(complex) + k_sink

    ctrl_idx = [gi for gi in range(n_groups) if group_fields[gi] == "control"]
    sig_idx = [gi for gi in range(n_groups) if group_fields[gi] != "control"]

    src_const = 1j * medium.coupling_density / (2.0 * C_LIGHT)
    # The entering pulse front occupies < 1 cell until the group motion
    # has filled several cells; the profile check only makes sense after.
    t_profile_check = 10.0 * dz / v_g_pre
    run_max_norm2 = [0.0, 0.0]

    ctrl_full = np.asarray(schedule.control_amplitude(tau), dtype=complex)
    ctrl_half = np.asarray(schedule.control_amplitude(tau + 0.5 * dt), dtype=complex)
    s1_in, s2_in = (np.asarray(a, dtype=complex) for a in schedule.signal_boundary(tau))

    rho = np.broadcast_to(polariton_vacuum(scheme), (nz, d, d)).copy()
    omega = np.zeros((nz, 2), dtype=complex)
    omega[:, 0] = s1_in[0]
    omega[:, 1] = s2_in[0]

    out_s1 = np.empty(nt, dtype=complex)
    out_s2 = np.empty(nt, dtype=complex)
    out_s1[0], out_s2[0] = omega[-1]

    stride = snapshot_stride if snapshot_stride > 0 else max(1, nt // 1200)
    snap_idx = set(range(0, nt, stride)) | {nt - 1}
    n_snap = len(snap_idx)
    snap_tau = np.empty(n_snap)
    snap_s1 = np.empty((n_snap, nz), dtype=complex)
    snap_s2 = np.empty((n_snap, nz), dtype=complex)
    snap_sp = np.empty((n_snap, nz), dtype=complex)
    snap_sm = np.empty((n_snap, nz), dtype=complex)
    snap_ctrl = np.empty(n_snap, dtype=complex)

    (c1, g1), (c2, g2) = scheme.spin_pairs
    ic1, ig1 = scheme.index(c1), scheme.index(g1)
    ic2, ig2 = scheme.index(c2), scheme.index(g2)

    rho_wanted = {}
    for t_req in rho_snapshot_times:
        idx = int(round(t_req / dt))
        rho_wanted[min(max(idx, 0), nt - 1)] = None
    rho_out: dict[float, np.ndarray] = {}

    min_eig = 0.0

    n_sig = len(sig_idx)
    mats_k = np.concatenate([
        -1j * mats[sig_idx],
        -1j * np.conj(np.swapaxes(mats[sig_idx], 1, 2)),
    ])
    sig_col = np.array(
        [0 if group_fields[gi] == "s1" else 1 for gi in sig_idx], dtype=int
    )
    sig_rates = group_rates[sig_idx]

    static_signals = not np.any(sig_rates)

    def signal_part(sig_fields, t):
        """z-dependent part of K = -iH - (1/2) sum gamma L'L."""
        amps = np.empty((2 * n_sig, nz), dtype=complex)
        for j in range(n_sig):
            col = sig_fields[:, sig_col[j]]
            if sig_rates[j]:
                col = col * np.exp(-1j * sig_rates[j] * t)
            amps[j] = col
            np.conj(col, out=amps[n_sig + j])
        return np.einsum("gz,gab->zab", amps, mats_k)

    def control_part(ctrl_amp, t):
        """Global (z-independent) part of K at one RK4 stage time."""
        ctrl_mat = np.zeros((d, d), dtype=complex)
        for gi in ctrl_idx:
            amp = ctrl_amp * np.exp(-1j * group_rates[gi] * t) if group_rates[gi] \
                else ctrl_amp
            ctrl_mat += -1j * amp * mats[gi]
            ctrl_mat += -1j * np.conj(amp) * mats[gi].conj().T
        return k_diag + ctrl_mat

    def rhs(r, k_stage):
        p = k_stage @ r
        out = p + np.conj(np.swapaxes(p, 1, 2))
        refill = r.diagonal(axis1=1, axis2=2) @ jump_matrix
        out.reshape(nz, d * d)[:, :: d + 1] += refill
        return out

    def field_source(which, t):
        ups, los, ws, rates = source[which]
        coh = rho[:, ups, los]
        weights = ws * np.exp(1j * rates * t)
        return coh @ weights

    def integrate_fields(t, boundary):
        new = np.empty_like(omega)
        for col, which in enumerate(("s1", "s2")):
            p = field_source(which, t)
            integral = np.empty(nz, dtype=complex)
            integral[0] = 0.0
            np.cumsum(0.5 * (p[1:] + p[:-1]), out=integral[1:])
            integral[1:] *= dz
            new[:, col] = boundary[col] + src_const * integral
        return new

    snap_count = 0

    def record_snapshot(n):
        nonlocal snap_count, min_eig
        snap_tau[snap_count] = tau[n]
        snap_s1[snap_count] = omega[:, 0]
        snap_s2[snap_count] = omega[:, 1]
        snap_sp[snap_count] = 2.0 * rho[:, ic1, ig1]
        snap_sm[snap_count] = 2.0 * rho[:, ic2, ig2]
        snap_ctrl[snap_count] = ctrl_full[n]
        snap_count += 1
        lam = np.linalg.eigvalsh(rho)[:, 0].min()
        min_eig = min(min_eig, float(lam))
        if lam < -1e-6:
            raise NumericalError(
                f"positivity violated at tau={tau[n]:.3f} us "
                f"(min eigenvalue {lam:.2e}); reduce dt"
            )

    if 0 in snap_idx:
        record_snapshot(0)
    if 0 in rho_wanted:
        rho_out[tau[0]] = rho.copy()

    for n in range(1, nt):
        t0 = tau[n - 1]
        if static_signals:
            kz = signal_part(omega, t0)
            g0 = kz + control_part(ctrl_full[n - 1], t0)[None, :, :]
            gh = kz + control_part(ctrl_half[n - 1], t0 + 0.5 * dt)[None, :, :]
            g1 = kz + control_part(ctrl_full[n], tau[n])[None, :, :]
        else:
            g0 = signal_part(omega, t0)
            g0 += control_part(ctrl_full[n - 1], t0)[None, :, :]
            gh = signal_part(omega, t0 + 0.5 * dt)
            gh += control_part(ctrl_half[n - 1], t0 + 0.5 * dt)[None, :, :]
            g1 = signal_part(omega, tau[n])
            g1 += control_part(ctrl_full[n], tau[n])[None, :, :]

        k1 = rhs(rho, g0)
        k2 = rhs(rho + (0.5 * dt) * k1, gh)
        k3 = rhs(rho + (0.5 * dt) * k2, gh)
        k4 = rhs(rho + dt * k3, g1)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        np.copyto(rho, 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2))))

        omega = integrate_fields(tau[n], (s1_in[n], s2_in[n]))

        if check_cfl and (n % 4 == 0 or n == nt - 1):
            # Norm-relative change per z-step: flags a globally
            # under-resolved profile (pulse narrower than a few cells).
            # Gated on fill time and on energy significance so the
            # sub-cell entering front and exiting low-energy tails,
            # which are sharp at any resolution but carry no energy,
            # do not trip it.
            for col in (0, 1):
                norm2 = float(np.sum(np.abs(omega[:, col]) ** 2))
                run_max_norm2[col] = max(run_max_norm2[col], norm2)
                if (tau[n] < t_profile_check
                        or norm2 < 0.05 * run_max_norm2[col]
                        or norm2 == 0.0):
                    continue
                change = float(np.linalg.norm(np.diff(omega[:, col])))
                ratio = change / math.sqrt(norm2)
                if ratio > 0.2:
                    raise NumericalError(
                        f"field profile changes {ratio:.0%} per z-step "
                        f"at tau={tau[n]:.3f} us; increase nz"
                    )

        out_s1[n], out_s2[n] = omega[-1]

        if n in snap_idx:
            record_snapshot(n)
        if n in rho_wanted:
            rho_out[tau[n]] = rho.copy()

    order = np.argsort(snap_tau[:snap_count])
    return FieldRecord(
        grid=grid,
        scheme=scheme,
        medium=medium,
        drive=drive,
        tau=tau,
        control=ctrl_full,
        input_s1=s1_in,
        input_s2=s2_in,
        output_s1=out_s1,
        output_s2=out_s2,
        snap_tau=snap_tau[:snap_count][order],
        snap_s1=snap_s1[:snap_count][order],
        snap_s2=snap_s2[:snap_count][order],
        snap_sigma_plus=snap_sp[:snap_count][order],
        snap_sigma_minus=snap_sm[:snap_count][order],
        snap_control=snap_ctrl[:snap_count][order],
        rho_snapshots=rho_out,
        min_eigenvalue=min_eig,
    )


def _centroid(t: np.ndarray, intensity: np.ndarray) -> float:
    norm = np.trapezoid(intensity, t)
    if norm <= 0:
        raise NumericalError("no pulse found: trace energy is zero")
    return float(np.trapezoid(t * intensity, t) / norm)


def measure_delay(record: FieldRecord, which: str = "total",
                  energy_threshold: float = 1e-9) -> float:
    """Centroid delay (us) of the output pulse relative to the input.

    Uses the incoherent intensity (no beat carrier) so the centroid is
    insensitive to the interference fringe.  Raises when the output
    energy is below ``energy_threshold`` times the input energy.
    """
    t = record.tau
    i_in = record.intensity(which, "in")
    i_out = record.intensity(which, "out")
    e_in = np.trapezoid(i_in, t)
    e_out = np.trapezoid(i_out, t)
    if e_in <= 0:
        raise NumericalError("no pulse found: input energy is zero")
    if e_out < energy_threshold * e_in:
        raise NumericalError(
            f"no pulse found: output energy {e_out:.3e} below threshold"
        )
    return _centroid(t, i_out) - _centroid(t, i_in)


def transmission(record: FieldRecord, which: str = "total") -> float:
    """Output/input energy ratio for one signal or the incoherent total."""
    t = record.tau
    e_in = np.trapezoid(record.intensity(which, "in"), t)
    e_out = np.trapezoid(record.intensity(which, "out"), t)
    if e_in <= 0:
        raise NumericalError("transmission undefined: input energy is zero")
    return float(e_out / e_in)


def expected_delay(medium: MediumParams, omega_c: float, length: float) -> float:
    """Analytic slow-light delay L/v_g - L/c for the tripod vacuum."""
    g_over = medium.coupling_density / (2.0 * omega_c**2)
    return length / C_LIGHT * g_over


def auto_nt(t_max: float, hscale: float, dt_bound: float = 0.05,
            min_ramp: float = 0.0) -> int:
    """Number of time steps satisfying the step-size bounds."""
    dt = dt_bound / hscale
    if min_ramp > 0:
        dt = min(dt, min_ramp / 20.0)
    return int(math.ceil(t_max / dt)) + 1
