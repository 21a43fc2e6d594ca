"""Trace analysis: damped-sinusoid beat fits and weighted linear regression.

The beat model is

    I(t) = offset + A * exp(-t / tau) * (1 + V * cos(2 pi f t + phi))

fitted by nonlinear least squares.  The initial frequency comes from the
discrete Fourier transform of the detrended trace, zero-padded 4x with
parabolic interpolation around the peak; an explicit ``f0`` (e.g. the
known input difference frequency) can override it for short windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


class AnalysisError(RuntimeError):
    pass


class NoBeatError(AnalysisError):
    """The trace has no significant oscillation to fit."""


class NoConvergenceError(AnalysisError):
    """The least-squares refinement did not converge."""


@dataclass
class BeatFitResult:
    frequency: float  # MHz
    phase: float  # rad, in (-pi, pi]
    visibility: float
    tau: float  # decay time, us
    offset: float
    amplitude: float
    frequency_err: float
    phase_err: float
    visibility_err: float
    tau_err: float
    offset_err: float
    residual_rms: float
    n_points: int

    def as_dict(self) -> dict:
        return {
            "f_beat_MHz": self.frequency,
            "f_err_MHz": self.frequency_err,
            "phase_rad": self.phase,
            "phase_err_rad": self.phase_err,
            "visibility": self.visibility,
            "visibility_err": self.visibility_err,
            "tau_us": self.tau,
            "tau_err_us": self.tau_err,
            "offset": self.offset,
            "offset_err": self.offset_err,
            "amplitude": self.amplitude,
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
        }


def dft_peak_frequency(t: np.ndarray, y: np.ndarray,
                       pad_factor: int = 4) -> tuple[float, float, float]:
    """Dominant non-dc frequency of a uniformly sampled trace.

    Returns (frequency MHz, phase rad, peak-to-floor ratio).  The spectrum
    is zero-padded by ``pad_factor`` and the peak refined by parabolic
    interpolation on log magnitude.
    """
    n = len(t)
    dt = (t[-1] - t[0]) / (n - 1)
    detrended = y - np.mean(y)
    spec = np.fft.rfft(detrended, n=pad_factor * n)
    freqs = np.fft.rfftfreq(pad_factor * n, dt)
    mag = np.abs(spec)
    # Exclude the dc lobe: the first pad_factor bins belong to the mean.
    lo = pad_factor
    if len(mag) <= lo + 2:
        raise NoBeatError("trace too short for a spectral estimate")
    k = lo + int(np.argmax(mag[lo:]))
    floor = np.median(mag[lo:])
    ratio = mag[k] / floor if floor > 0 else np.inf
    if 0 < k < len(mag) - 1 and mag[k] > 0:
        lm, l0, lp = np.log(mag[k - 1] + 1e-300), np.log(mag[k] + 1e-300), np.log(
            mag[k + 1] + 1e-300
        )
        denom = lm - 2 * l0 + lp
        shift = 0.5 * (lm - lp) / denom if denom != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    df = freqs[1] - freqs[0]
    f_est = freqs[k] + shift * df
    phase = float(np.angle(spec[k]) - 2.0 * math.pi * f_est * t[0])
    return float(f_est), phase, float(ratio)


def _beat_model(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    off, amp, inv_tau, vis, f, phi = p
    return off + amp * np.exp(-t * inv_tau) * (
        1.0 + vis * np.cos(2.0 * math.pi * f * t + phi)
    )


def fit_beat(
    t: np.ndarray,
    y: np.ndarray,
    window: tuple[float, float] | None = None,
    f0: float | None = None,
    max_iter: int = 200,
    noise_ratio_min: float = 3.0,
) -> BeatFitResult:
    """Fit a damped beat note to an intensity trace.

    ``window`` restricts the fit to t in [t0, t1].  ``f0`` (MHz) overrides
    the DFT initial frequency guess; the refinement always runs on the
    data.  Raises :class:`NoBeatError` when no oscillation stands out of
    the spectrum and :class:`NoConvergenceError` when the least-squares
    loop exhausts its iteration budget.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, y = t[mask], y[mask]
    if len(t) < 10:
        raise AnalysisError(f"too few samples in window ({len(t)})")

    t0 = t[0]
    ts = t - t0
    span = ts[-1]
    scale = float(np.max(np.abs(y)))
    if scale <= 0 or np.ptp(y) < 1e-12 * max(scale, 1.0):
        raise NoBeatError("trace is constant")

    f_dft, phi_dft, ratio = dft_peak_frequency(ts, y)
    if ratio < noise_ratio_min and f0 is None:
        raise NoBeatError(
            f"spectral peak only {ratio:.1f}x above the noise floor"
        )
    f_init = f0 if f0 is not None else f_dft
    if f_init <= 0:
        f_init = max(f_dft, 1.0 / span)

    off0 = float(np.percentile(y, 5))
    amp0 = max(float(np.mean(y) - off0), 1e-6 * scale)
    vis0 = min(float(0.5 * np.ptp(y) / amp0), 1.0) if amp0 > 0 else 0.5
    p0 = np.array([off0, amp0, 0.1 / span, min(vis0, 0.95), f_init, phi_dft % (2 * math.pi)])

    lower = [-np.inf, 0.0, 0.0, 0.0, 0.1 / span, -2.0 * math.pi]
    upper = [np.inf, np.inf, 50.0 / span, 1.0, 0.5 * (len(ts) - 1) / span, 4.0 * math.pi]
    p0 = np.clip(p0, lower, upper)

    res = least_squares(
        lambda p: _beat_model(p, ts) - y,
        p0,
        bounds=(lower, upper),
        xtol=1e-8,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=max_iter * len(p0),
    )
    if res.status == 0:
        raise NoConvergenceError(
            f"beat fit did not converge within {max_iter} iterations"
        )
    p = res.x
    n, npar = len(ts), len(p)
    dof = max(n - npar, 1)
    resid = res.fun
    rms = float(np.sqrt(np.mean(resid**2)))
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj) * (2.0 * res.cost / dof)
        errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        errs = np.full(npar, np.nan)
    floor = 1e-15
    errs = np.maximum(errs, floor)

    off, amp, inv_tau, vis, f, phi = p
    # Phase is referenced to the window start, folded into (-pi, pi]:
    # shifting the window by dt shifts it by 2*pi*f*dt.
    phase = math.remainder(phi, 2.0 * math.pi)
    if inv_tau > 1e-9 / span:
        tau_val = 1.0 / inv_tau
        tau_err = errs[2] / inv_tau**2
    else:
        tau_val = math.inf
        tau_err = math.inf

    return BeatFitResult(
        frequency=float(f),
        phase=float(phase),
        visibility=float(vis),
        tau=float(tau_val),
        offset=float(off),
        amplitude=float(amp),
        frequency_err=float(errs[4]),
        phase_err=float(errs[5]),
        visibility_err=float(errs[3]),
        tau_err=float(tau_err),
        offset_err=float(errs[0]),
        residual_rms=rms,
        n_points=n,
    )


@dataclass
class LinFit:
    slope: float
    intercept: float
    slope_err: float
    intercept_err: float
    r_squared: float

    def as_dict(self) -> dict:
        return {
            "slope": self.slope,
            "slope_err": self.slope_err,
            "intercept": self.intercept,
            "intercept_err": self.intercept_err,
            "r_squared": self.r_squared,
        }


def fit_linear(x: np.ndarray, y: np.ndarray,
               yerr: np.ndarray | None = None) -> LinFit:
    """Error-weighted least-squares line fit, exact closed form."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise AnalysisError("need at least 3 points")
    if np.ptp(x) == 0:
        raise AnalysisError("degenerate abscissas: all x identical")
    if yerr is None:
        w = np.ones_like(x)
    else:
        yerr = np.asarray(yerr, dtype=float)
        if np.any(yerr <= 0):
            raise AnalysisError("point errors must be positive")
        w = 1.0 / yerr**2

    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    sxy = (w * (x - xm) * (y - ym)).sum()
    slope = sxy / sxx
    intercept = ym - slope * xm

    resid = y - (slope * x + intercept)
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot

    if yerr is None:
        dof = max(len(x) - 2, 1)
        var = ss_res / dof
        slope_err = math.sqrt(var / sxx)
        intercept_err = math.sqrt(var * (1.0 / sw + xm**2 / sxx))
    else:
        slope_err = math.sqrt(1.0 / sxx)
        intercept_err = math.sqrt(1.0 / sw + xm**2 / sxx)

    return LinFit(float(slope), float(intercept), float(slope_err),
                  float(intercept_err), float(max(min(r2, 1.0), 0.0)))
