"""End-to-end experiment drivers.

Builds pulse schedules, runs the storage/retrieval sequence, scans cw
transmission over the two-photon detuning plane, and sweeps the magnetic
bias field at fixed signal difference frequency.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .constants import C_LIGHT, zeeman_rate
from .dynamics import (
    NumericalError,
    steady_state,
    vacuum_tie_break_ops,
)
from .hamiltonian import DriveConfig, build_hamiltonian, lindblad_dissipators
from .levels import LevelScheme
from .polariton import group_velocity_from_coupling
from .propagation import (
    FieldRecord,
    Grid,
    MediumParams,
    auto_nt,
    estimate_h_norm,
    propagate,
)

SHAPES = ("rect", "gauss", "ramp_cos")


@dataclass(frozen=True)
class Segment:
    """One piecewise envelope element.

    rect: constant ``amplitude``.
    gauss: peak ``amplitude``, sigma = ``param``, centered mid-segment.
    ramp_cos: half-cosine from ``amplitude`` to ``param`` over the segment.
    A complex phase factor exp(i*phase) multiplies the value.
    """

    t_start: float
    t_end: float
    shape: str
    amplitude: float
    phase: float = 0.0
    param: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown segment shape {self.shape!r}")
        if self.t_end <= self.t_start:
            raise ValueError("segment must have t_end > t_start")

    def value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = (t >= self.t_start) & (t < self.t_end)
        out = np.zeros(t.shape, dtype=complex)
        if self.shape == "rect":
            out[inside] = self.amplitude
        elif self.shape == "gauss":
            mid = 0.5 * (self.t_start + self.t_end)
            sig = self.param
            out[inside] = self.amplitude * np.exp(
                -((t[inside] - mid) ** 2) / (2.0 * sig**2)
            )
        else:  # ramp_cos
            x = (t[inside] - self.t_start) / (self.t_end - self.t_start)
            out[inside] = self.amplitude + (self.param - self.amplitude) * 0.5 * (
                1.0 - np.cos(math.pi * x)
            )
        return out * np.exp(1j * self.phase)

    @property
    def feature_time(self) -> float:
        """Shortest time scale of this envelope piece (inf for rect)."""
        if self.shape == "rect":
            return math.inf
        if self.shape == "gauss":
            return 2.0 * self.param
        return self.t_end - self.t_start


@dataclass(frozen=True)
class StorageWindow:
    """Control switching times: off-ramp start, ramp duration, dark
    interval, on-ramp start."""

    t_off: float
    ramp_dur: float
    t_dark: float
    t_on: float

    def __post_init__(self):
        if self.ramp_dur <= 0:
            raise ValueError("ramp_dur must be > 0")
        if self.t_dark < 0:
            raise ValueError("t_dark must be >= 0")
        expected_on = self.t_off + self.ramp_dur + self.t_dark
        if abs(self.t_on - expected_on) > 1e-9:
            raise ValueError("t_on must equal t_off + ramp_dur + t_dark")

    @property
    def t_mid_dark(self) -> float:
        return self.t_off + self.ramp_dur + 0.5 * self.t_dark

    @property
    def t_retrieved(self) -> float:
        """Time the control is fully back on."""
        return self.t_on + self.ramp_dur


def _check_overlap(segments: list[Segment], name: str):
    segs = sorted(segments, key=lambda s: s.t_start)
    for a, b in zip(segs, segs[1:]):
        if b.t_start < a.t_end - 1e-12:
            raise ValueError(f"{name} segments overlap at t={b.t_start}")


@dataclass(frozen=True)
class PulseSchedule:
    """Boundary envelopes for the control and the two signal fields."""

    control: tuple[Segment, ...]
    signal1: tuple[Segment, ...]
    signal2: tuple[Segment, ...]
    t_total: float
    storage: StorageWindow | None = None

    def __post_init__(self):
        _check_overlap(list(self.control), "control")
        _check_overlap(list(self.signal1), "signal1")
        _check_overlap(list(self.signal2), "signal2")

    @staticmethod
    def _eval(segments: tuple[Segment, ...], t: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(t), dtype=complex)
        for seg in segments:
            out += seg.value(t)
        return out

    def control_amplitude(self, t: np.ndarray) -> np.ndarray:
        return self._eval(self.control, t)

    def signal_boundary(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._eval(self.signal1, t), self._eval(self.signal2, t)

    def min_smooth_duration(self) -> float:
        """Shortest envelope feature time over all fields (0 if all rect)."""
        times = [
            s.feature_time
            for s in (*self.control, *self.signal1, *self.signal2)
            if math.isfinite(s.feature_time)
        ]
        return min(times) if times else 0.0

    def with_spinor(self, alpha: complex, beta: complex,
                    rel_phase: float = 0.0) -> "PulseSchedule":
        """Scale signal 1 by alpha and signal 2 by beta*exp(i rel_phase)."""

        def scaled(segs, factor):
            mag, ph = abs(factor), np.angle(factor)
            return tuple(
                replace(s, amplitude=s.amplitude * mag,
                        param=s.param * mag if s.shape != "gauss" else s.param,
                        phase=s.phase + ph)
                for s in segs
            )

        return replace(
            self,
            signal1=scaled(self.signal1, complex(alpha)),
            signal2=scaled(self.signal2, complex(beta) * np.exp(1j * rel_phase)),
        )


def smoothed_pulse(t0: float, duration: float, edge: float, amplitude: float,
                   phase: float = 0.0) -> tuple[Segment, ...]:
    """Rectangular pulse with half-cosine rising/falling edges."""
    if duration <= 2 * edge:
        raise ValueError("pulse duration must exceed both edges")
    return (
        Segment(t0, t0 + edge, "ramp_cos", 0.0, phase, amplitude),
        Segment(t0 + edge, t0 + duration - edge, "rect", amplitude, phase),
        Segment(t0 + duration - edge, t0 + duration, "ramp_cos", amplitude, phase, 0.0),
    )


def storage_schedule(
    omega_c: float,
    signal_amp: float,
    t_signal: float = 20.0,
    edge: float = 1.0,
    ramp: float = 1.0,
    t_dark: float = 10.0,
    tail: float = 6.0,
) -> PulseSchedule:
    """Standard storage sequence.

    A smoothed rectangular signal pulse of length ``t_signal`` enters with
    the control on; the control ramps to zero at the signal's falling
    edge, stays off for ``t_dark``, ramps back on with no signal input,
    and remains on while the retrieved pulse leaves (duration ~t_signal
    plus ``tail`` margin).
    """
    t_off = t_signal
    t_on = t_off + ramp + t_dark
    t_total = t_on + ramp + t_signal + tail
    control = (
        Segment(0.0, t_off, "rect", omega_c),
        Segment(t_off, t_off + ramp, "ramp_cos", omega_c, 0.0, 0.0),
        Segment(t_on, t_on + ramp, "ramp_cos", 0.0, 0.0, omega_c),
        # extends past t_total so the half-open interval covers the grid end
        Segment(t_on + ramp, t_total + 1.0, "rect", omega_c),
    )
    sig = smoothed_pulse(0.0, t_signal, edge, signal_amp)
    window = StorageWindow(t_off, ramp, t_dark, t_on)
    return PulseSchedule(control, sig, sig, t_total, window)


def slow_light_schedule(
    omega_c: float,
    signal_amp: float,
    sigma: float,
    t_center: float,
    t_total: float,
) -> PulseSchedule:
    """Constant control, Gaussian signal pulses (slow-light measurement)."""
    control = (Segment(0.0, t_total + 1.0, "rect", omega_c),)
    sig = (Segment(0.0, min(2 * t_center, t_total), "gauss", signal_amp, 0.0, sigma),)
    return PulseSchedule(control, sig, sig, t_total)


def cw_schedule(omega_c: float, signal_amp: float, rise: float,
                t_total: float) -> PulseSchedule:
    """Control on, signals ramped up once and held (cw transmission)."""
    control = (Segment(0.0, t_total + 1.0, "rect", omega_c),)
    sig = (
        Segment(0.0, rise, "ramp_cos", 0.0, 0.0, signal_amp),
        Segment(rise, t_total + 1.0, "rect", signal_amp),
    )
    return PulseSchedule(control, sig, sig, t_total)


def storage_grid(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    schedule: PulseSchedule,
    nz: int = 81,
    dt_bound: float = 0.05,
) -> Grid:
    """Grid satisfying the step-size and ramp-resolution bounds."""
    tau_probe = np.linspace(0.0, schedule.t_total, 4096)
    peak_sig = float(np.max(np.abs(np.concatenate(schedule.signal_boundary(tau_probe)))))
    peak_ctrl = float(np.max(np.abs(schedule.control_amplitude(tau_probe))))
    hscale = estimate_h_norm(scheme, drive, peak_sig, peak_ctrl)
    nt = auto_nt(schedule.t_total, hscale, dt_bound, schedule.min_smooth_duration())
    return Grid(nz=nz, length=50.0, nt=nt, t_max=schedule.t_total)


@dataclass
class StorageResult:
    """Traces and bookkeeping of one storage/retrieval run."""

    record: FieldRecord
    window: StorageWindow
    t: np.ndarray
    detected_in: np.ndarray
    detected_out: np.ndarray
    z: np.ndarray
    sigma_plus_z: np.ndarray
    sigma_minus_z: np.ndarray
    retrieval_window: tuple[float, float]
    input_energy: float
    retrieved_energy: float
    stored_excitation: float
    retrieved_photons: float
    efficiency: float
    retrieval_efficiency: float

    def retrieved_trace(self) -> tuple[np.ndarray, np.ndarray]:
        """(t, detected intensity) restricted to the retrieval fit window."""
        t0, t1 = self.retrieval_window
        mask = (self.t >= t0) & (self.t <= t1)
        return self.t[mask], self.detected_out[mask]


def run_storage(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    schedule: PulseSchedule,
    grid: Grid,
    input_spinor: tuple[float, float, float] | None = None,
    settle: float = 1.0,
) -> StorageResult:
    """Store both signal modes and retrieve them.

    ``input_spinor`` = (alpha, beta, relative phase) scales the scheduled
    signal amplitudes.  Requires a schedule with a storage window and a
    pulse that fits in the medium at the group velocity.
    """
    if schedule.storage is None:
        raise ValueError("schedule has no storage window")
    win = schedule.storage
    if input_spinor is not None:
        alpha, beta, rel_phase = input_spinor
        schedule = schedule.with_spinor(alpha, beta, rel_phase)

    v_g = group_velocity_from_coupling(medium.coupling_density, drive.omega_c)
    extent = v_g * (win.t_off + win.ramp_dur)
    if extent > grid.length:
        needed = extent / grid.length
        raise ValueError(
            f"pulse does not fit: spatial extent {extent:.1f} mm exceeds "
            f"{grid.length:.1f} mm; compress by >= {needed:.2f}x "
            "(raise the coupling density or shorten the pulse)"
        )
    if win.ramp_dur * drive.omega_c < 10:
        warnings.warn(
            f"non-adiabatic ramp: ramp_dur*Omega_C = "
            f"{win.ramp_dur * drive.omega_c:.1f} < 10",
            stacklevel=2,
        )

    record = propagate(
        scheme, medium, drive, schedule, grid,
        rho_snapshot_times=(win.t_mid_dark,),
    )

    t = record.tau
    detected_in = record.detected_intensity("in")
    detected_out = record.detected_intensity("out")
    sp, sm = record.spin_profile(win.t_mid_dark)

    # Fit window: the plateau of the retrieved pulse.  The leading part of
    # the stored pulse is eroded by the finite transparency bandwidth, so
    # the flat region is found from the (beat-free) incoherent intensity
    # rather than from schedule times alone.
    i_total = record.intensity("total", "out")
    ret_mask = record.tau >= win.t_retrieved
    if np.any(ret_mask) and i_total[ret_mask].max() > 0:
        i_ret = i_total[ret_mask]
        t_ret = record.tau[ret_mask]
        above = i_ret >= 0.75 * i_ret.max()
        t_fit0 = float(t_ret[above][0]) + 0.5 * settle
        t_fit1 = float(t_ret[above][-1]) - 0.5 * settle
    else:
        t_fit0 = win.t_retrieved + settle
        t_fit1 = min(win.t_retrieved + win.t_off - settle, grid.t_max)

    i_in = record.intensity("total", "in")
    i_out = record.intensity("total", "out")
    input_energy = float(np.trapezoid(i_in, t))
    ret_mask = t >= win.t_on
    retrieved_energy = float(np.trapezoid(i_out[ret_mask], t[ret_mask]))

    g2 = medium.g**2 if medium.g > 0 else 1.0
    dz = record.grid.dz
    stored = float(
        0.5 * medium.n_density
        * np.trapezoid(np.abs(sp) ** 2 + np.abs(sm) ** 2, dx=dz)
    )
    retrieved_photons = C_LIGHT * retrieved_energy / g2

    return StorageResult(
        record=record,
        window=win,
        t=t,
        detected_in=detected_in,
        detected_out=detected_out,
        z=record.grid.z,
        sigma_plus_z=sp,
        sigma_minus_z=sm,
        retrieval_window=(t_fit0, t_fit1),
        input_energy=input_energy,
        retrieved_energy=retrieved_energy,
        stored_excitation=stored,
        retrieved_photons=retrieved_photons,
        efficiency=retrieved_energy / input_energy if input_energy > 0 else 0.0,
        retrieval_efficiency=(
            retrieved_photons / stored if stored > 0 else 0.0
        ),
    )


def _static_transitions(scheme: LevelScheme) -> LevelScheme:
    """Scheme restricted to frame-static couplings (time-independent H).

    Drops leakage channels and the weak mid-manifold couplings of the
    Zeeman scheme; at weak probe these act on unpopulated states only.
    """
    if all(tr.static for tr in scheme.transitions):
        return scheme
    return replace(
        scheme, transitions=tuple(tr for tr in scheme.transitions if tr.static)
    )


def transmission_point(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    length: float,
    signal_amp: float,
) -> tuple[float, float, float]:
    """Beer-law cw transmission (T1, T2, total) from the steady state.

    Weak-probe fast path: the stationary optical coherences give each
    field's amplitude attenuation rate, accumulated over the cell length.
    Leakage couplings are excluded (they are time dependent in this
    frame and average out for cw scans).
    """
    static = _static_transitions(scheme)
    h = build_hamiltonian(static, drive, (signal_amp, signal_amp))
    diss = lindblad_dissipators(static, medium.gamma_g)
    rho = steady_state(h, diss, tie_break=vacuum_tie_break_ops(static))
    src_const = 1j * medium.coupling_density / (2.0 * C_LIGHT)
    ts = []
    for name in ("s1", "s2"):
        src = 0.0 + 0.0j
        for tr in static.transitions:
            if tr.field == name:
                src += tr.weight * rho[static.index(tr.upper), static.index(tr.lower)]
        gain = (src_const * src / signal_amp).real
        ts.append(float(np.exp(2.0 * gain * length)))
    t1, t2 = ts
    return t1, t2, 0.5 * (t1 + t2)


@dataclass
class TransmissionMap:
    """cw transmission over the two-photon detuning plane."""

    delta1: np.ndarray
    delta2: np.ndarray
    total: np.ndarray  # (n1, n2)
    signal1: np.ndarray
    signal2: np.ndarray
    crosschecks: list = field(default_factory=list)  # (d1, d2, fast, propagated)
    failures: list = field(default_factory=list)  # (d1, d2, message)


def scan_transmission(
    scheme: LevelScheme,
    medium: MediumParams,
    drive_base: DriveConfig,
    delta1_values: np.ndarray,
    delta2_values: np.ndarray,
    length: float = 50.0,
    signal_amp: float | None = None,
    crosscheck_points: int = 3,
    threads: int = 1,
) -> TransmissionMap:
    """Map total cw signal transmission versus (delta1, delta2).

    Steady-state Beer-law fast path per point, cross-checked against the
    full propagation on ``crosscheck_points`` well-transmitting points.
    Solver failures are recorded per point, not fatal.
    """
    amp = signal_amp if signal_amp is not None else 1e-3 * drive_base.omega_c
    d1s = np.asarray(delta1_values, dtype=float)
    d2s = np.asarray(delta2_values, dtype=float)
    n1, n2 = len(d1s), len(d2s)
    total = np.full((n1, n2), np.nan)
    sig1 = np.full((n1, n2), np.nan)
    sig2 = np.full((n1, n2), np.nan)
    failures = []

    def one(point):
        i, j = point
        drive = replace(drive_base, delta1=d1s[i], delta2=d2s[j])
        return transmission_point(scheme, medium, drive, length, amp)

    points = [(i, j) for i in range(n1) for j in range(n2)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _try_point(one, p), points))
    else:
        results = [_try_point(one, p) for p in points]
    for (i, j), res in zip(points, results):
        if isinstance(res, str):
            failures.append((d1s[i], d2s[j], res))
        else:
            sig1[i, j], sig2[i, j], total[i, j] = res

    crosschecks = []
    if crosscheck_points > 0:
        flat = np.argsort(np.nan_to_num(total, nan=-1.0).ravel())[::-1]
        chosen = []
        for k in flat:
            i, j = divmod(int(k), n2)
            if all(abs(i - ci) + abs(j - cj) > max(n1, n2) // 4 for ci, cj in chosen):
                chosen.append((i, j))
            if len(chosen) >= crosscheck_points:
                break
        for i, j in chosen:
            drive = replace(drive_base, delta1=d1s[i], delta2=d2s[j])
            t_prop = _propagated_transmission(scheme, medium, drive, length, amp)
            crosschecks.append((d1s[i], d2s[j], float(total[i, j]), t_prop))

    return TransmissionMap(d1s, d2s, total, sig1, sig2, crosschecks, failures)


def _try_point(fn, point):
    try:
        return fn(point)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        return str(exc)


def _propagated_transmission(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    length: float,
    amp: float,
    nz: int = 101,
) -> float:
    """Full Maxwell-Bloch cw transmission at one detuning point."""
    v_g = group_velocity_from_coupling(medium.coupling_density, drive.omega_c)
    settle = 3.0 * length / v_g + 8.0
    t_total = settle * 1.5
    schedule = cw_schedule(drive.omega_c, amp, rise=2.0, t_total=t_total)
    hscale = estimate_h_norm(scheme, drive, amp)
    nt = auto_nt(t_total, hscale, min_ramp=2.0)
    grid = Grid(nz=nz, length=length, nt=nt, t_max=t_total)
    rec = propagate(scheme, medium, drive, schedule, grid)
    mask = rec.tau >= settle
    i_in = rec.intensity("total", "in")[mask]
    i_out = rec.intensity("total", "out")[mask]
    return float(np.mean(i_out) / np.mean(i_in))


def eit_halfwidth(
    scheme: LevelScheme,
    medium: MediumParams,
    drive: DriveConfig,
    length: float = 50.0,
    span: float | None = None,
    n_points: int = 81,
    signal_amp: float | None = None,
) -> float:
    """Half width (rad/us) of the transparency window along the
    antisymmetric cut delta1 = -delta2 = x, measured at half height
    between the resonant maximum and the far-detuned floor."""
    if span is None:
        span = 0.1 * drive.omega_c
    amp = signal_amp if signal_amp is not None else 1e-3 * drive.omega_c
    xs = np.linspace(0.0, span, n_points)
    ts = []
    for x in xs:
        d = replace(drive, delta1=x, delta2=-x)
        ts.append(transmission_point(scheme, medium, d, length, amp)[2])
    ts = np.array(ts)
    t_half = 0.5 * (ts[0] + ts.min())
    below = np.nonzero(ts <= t_half)[0]
    if len(below) == 0:
        raise NumericalError(
            f"EIT window wider than scanned span {span:.2f} rad/us"
        )
    k = below[0]
    if k == 0:
        return 0.0
    frac = (ts[k - 1] - t_half) / (ts[k - 1] - ts[k])
    return float(xs[k - 1] + frac * (xs[k] - xs[k - 1]))


@dataclass
class SweepPoint:
    b_field: float
    delta1: float
    delta2: float
    fit: "analysis.BeatFitResult | None"
    error: str | None = None


@dataclass
class SweepResult:
    points: list[SweepPoint]
    diff_freq: float  # fixed input difference, rad/us

    def good_points(self) -> list[SweepPoint]:
        return [p for p in self.points if p.fit is not None]

    def linear_fit(self) -> "analysis.LinFit":
        pts = self.good_points()
        if len(pts) < 3:
            raise NumericalError("fewer than 3 successful beat fits in sweep")
        b = np.array([p.b_field for p in pts])
        f = np.array([p.fit.frequency for p in pts])
        err = np.array([max(p.fit.frequency_err, 1e-12) for p in pts])
        return analysis.fit_linear(b, f, err)


def sweep_field(
    scheme: LevelScheme,
    medium: MediumParams,
    drive_base: DriveConfig,
    schedule: PulseSchedule,
    grid: Grid,
    b_values,
    b_ref: float | None = None,
    diff_freq_offset: float = 0.0,
    threads: int = 1,
) -> SweepResult:
    """Storage runs over magnetic fields at one fixed input difference
    frequency.

    The signal difference frequency is pinned to the Zeeman splitting at
    ``b_ref`` (midpoint of the sweep by default) plus an optional offset;
    each field value then implies two-photon detunings
    delta1 = -delta2 = zeta(B) - zeta(b_ref) - offset/2, which must stay
    inside the transparency window.  The retrieved beat of each run is
    fitted with the known input difference as the initial frequency
    guess.
    """
    b_values = list(b_values)
    if b_ref is None:
        b_ref = 0.5 * (min(b_values) + max(b_values))
    zeta_ref = zeeman_rate(b_ref, drive_base.g_factor)
    diff_freq = 2.0 * zeta_ref + diff_freq_offset

    def one(b: float) -> SweepPoint:
        zeta_b = zeeman_rate(b, drive_base.g_factor)
        d1 = zeta_b - zeta_ref - 0.5 * diff_freq_offset
        d2 = -(zeta_b - zeta_ref) + 0.5 * diff_freq_offset
        drive = replace(drive_base, b_field=b, delta1=d1, delta2=d2)
        try:
            result = run_storage(scheme, medium, drive, schedule, grid)
            t_fit, y_fit = result.retrieved_trace()
            fit = analysis.fit_beat(t_fit, y_fit, f0=diff_freq / (2.0 * math.pi))
            return SweepPoint(b, d1, d2, fit)
        except (analysis.AnalysisError, NumericalError, ValueError) as exc:
            return SweepPoint(b, d1, d2, None, str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(one, b_values))
    else:
        points = [one(b) for b in b_values]
    return SweepResult(points, diff_freq)
