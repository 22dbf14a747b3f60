"""FFT spectra, Lorentzian peak fits, and damped-sinusoid fits.

Frequency extraction happens two ways: spectrally (FFT followed by a
Lorentzian line fit, matching how the three-peak Ramsey spectrum is
analyzed) and in the time domain (damped-sinusoid least squares, which is
what the dephasing pipeline and the precision frequency-shift scans use).

All nonlinear fits share one damped Gauss-Newton core with analytic
Jacobians: parameters are scaled to order unity internally, steps are
backtracked until the cost decreases, iteration stops when the relative
step drops below 1e-10, and FitFailure is raised after 200 iterations
without convergence.  Every fit result carries the residual norm of the
returned parameters and the iteration count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitFailure, InsufficientSpan, NonUniformGrid
from .trace import SignalTrace

__all__ = [
    "Spectrum",
    "PeakFit",
    "LorentzianFit",
    "DecayFit",
    "fft_spectrum",
    "find_peaks",
    "fit_lorentzian_peaks",
    "fit_damped_sinusoid",
]

_MAX_ITER = 200
_STEP_TOL = 1e-10
# Fitted decay longer than this multiple of the trace span is unidentifiable.
_UNBOUNDED_T2_SPAN_RATIO = 3.0


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum: an on-grid cosine of amplitude A shows
    up as a peak of height A.  `resolution` is 1/(n dt) of the underlying
    trace (independent of zero-padding)."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    resolution: float

    def __post_init__(self):
        freqs = np.array(self.frequencies, dtype=float)
        amps = np.array(self.amplitudes, dtype=float)
        freqs.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "amplitudes", amps)
        if len(freqs) != len(amps):
            raise ValueError("frequencies and amplitudes must have equal length")
        if len(freqs) and (freqs[0] < 0 or np.any(np.diff(freqs) <= 0)):
            raise ValueError("frequencies must be nonnegative and increasing")
        if len(amps) and amps.min() < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")


def fft_spectrum(trace: SignalTrace, pad_factor: int = 8, window: str | None = None) -> Spectrum:
    """One-sided amplitude spectrum of a uniformly sampled trace.

    The mean is removed before transforming.  Zero-padding (pad_factor x)
    interpolates the line shapes so peak fitting is well conditioned; it
    does not change the resolution, which stays 1/(n dt).  No window is
    applied by default (coherent, fit-generated traces); pass
    window="hann" for imported experimental data.
    """
    times, values = trace.times, trace.values
    if len(times) < 16:
        raise ValueError(f"need at least 16 samples, got {len(times)}")
    steps = np.diff(times)
    dt = float(np.median(steps))
    if np.any(np.abs(steps - dt) > 1e-8 * dt):
        raise NonUniformGrid(
            f"time grid is not uniform (max deviation {np.abs(steps - dt).max():.3e} s)"
        )
    n = len(times)
    y = values - values.mean()
    gain = 1.0
    if window == "hann":
        w = np.hanning(n)
        y = y * w
        gain = w.mean()
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    nfft = int(pad_factor) * n
    amps = 2.0 * np.abs(np.fft.rfft(y, nfft)) / (n * gain)
    amps[0] *= 0.5
    if nfft % 2 == 0:
        amps[-1] *= 0.5
    freqs = np.fft.rfftfreq(nfft, dt)
    return Spectrum(freqs, amps, resolution=1.0 / (n * dt))


def find_peaks(spectrum: Spectrum, min_prominence: float = 5.0):
    """Indices of local maxima above min_prominence x median amplitude,
    sorted by descending amplitude.  Empty for featureless spectra."""
    a = spectrum.amplitudes
    if len(a) < 3:
        return []
    interior = (a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:])
    idx = np.nonzero(interior)[0] + 1
    floor = min_prominence * np.median(a)
    idx = idx[a[idx] > floor]
    return list(idx[np.argsort(a[idx])[::-1]])


def _gauss_newton(residual_jacobian, x0):
    """Damped Gauss-Newton on pre-scaled parameters.

    residual_jacobian(x) -> (r, J).  Returns (x, n_iter, residual_norm).
    """
    x = np.array(x0, dtype=float)
    r, jac = residual_jacobian(x)
    cost = float(r @ r)
    for n_iter in range(1, _MAX_ITER + 1):
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        alpha = 1.0
        improved = False
        while alpha > 2.0**-24:
            x_new = x + alpha * step
            r_new, jac_new = residual_jacobian(x_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                improved = True
                break
            alpha *= 0.5
        if not improved:
            # No descent along the Gauss-Newton direction: at a minimum if
            # the step itself is already negligible.
            if np.abs(step).max() <= _STEP_TOL * (1.0 + np.abs(x).max()):
                return x, n_iter, np.sqrt(cost)
            raise FitFailure(
                f"line search failed after {n_iter} iterations", np.sqrt(cost)
            )
        x, r, jac, cost = x_new, r_new, jac_new, cost_new
        if np.abs(alpha * step).max() <= _STEP_TOL * (1.0 + np.abs(x).max()):
            return x, n_iter, np.sqrt(cost)
    raise FitFailure(f"no convergence after {_MAX_ITER} iterations", np.sqrt(cost))


def _covariance(jac, residual, n_params):
    """Linearized parameter covariance, residual-variance scaled."""
    dof = max(len(residual) - n_params, 1)
    s2 = float(residual @ residual) / dof
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * s2
    return cov


@dataclass(frozen=True)
class PeakFit:
    """One Lorentzian line: center and FWHM in Hz, peak amplitude, with
    1-sigma uncertainties from the linearized covariance."""

    center: float
    width: float
    amplitude: float
    center_err: float
    width_err: float
    amplitude_err: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        for name in ("center_err", "width_err", "amplitude_err"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LorentzianFit:
    """Converged multi-peak fit, peaks sorted by center."""

    peaks: tuple
    residual_norm: float
    n_iterations: int

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def __getitem__(self, i):
        return self.peaks[i]

    def to_json_dict(self):
        return {
            "model": "sum_of_lorentzians",
            "peaks": [
                {
                    "center_hz": p.center,
                    "fwhm_hz": p.width,
                    "amplitude": p.amplitude,
                    "center_err_hz": p.center_err,
                    "fwhm_err_hz": p.width_err,
                    "amplitude_err": p.amplitude_err,
                }
                for p in self.peaks
            ],
            "residual_norm": self.residual_norm,
            "iterations": self.n_iterations,
        }


def _lorentzian_model(freqs, params):
    """Sum of Lorentzians; params = (c, w, A) x k in scaled frequency."""
    model = np.zeros_like(freqs)
    for c, w, amp in params.reshape(-1, 3):
        h = 0.25 * w * w
        model += amp * h / ((freqs - c) ** 2 + h)
    return model


def _estimate_width(spectrum, idx):
    """FWHM estimate from half-max crossings around a local maximum."""
    a, f = spectrum.amplitudes, spectrum.frequencies
    half = 0.5 * a[idx]
    lo = idx
    while lo > 0 and a[lo] > half:
        lo -= 1
    hi = idx
    while hi < len(a) - 1 and a[hi] > half:
        hi += 1
    width = f[hi] - f[lo]
    return width if width > 0 else 2.0 * spectrum.resolution


def fit_lorentzian_peaks(spectrum: Spectrum, k: int) -> LorentzianFit:
    """Joint nonlinear least-squares fit of k Lorentzian lines.

    Initialized from the k largest local maxima (ties broken by
    amplitude); raises FitFailure when fewer than k candidate peaks exist
    or the iteration does not converge.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    candidates = find_peaks(spectrum)
    if len(candidates) < k:
        # Fall back to unthresholded local maxima before giving up.
        candidates = find_peaks(spectrum, min_prominence=0.0)
    if len(candidates) < k:
        raise FitFailure(
            f"spectrum shows {len(candidates)} candidate peaks, need {k}"
        )
    chosen = sorted(candidates[:k])

    f_scale = float(spectrum.frequencies[-1])
    a_scale = float(spectrum.amplitudes[max(chosen, key=lambda i: spectrum.amplitudes[i])])
    freqs = spectrum.frequencies / f_scale
    data = spectrum.amplitudes / a_scale

    x0 = np.empty(3 * k)
    for j, idx in enumerate(chosen):
        x0[3 * j] = spectrum.frequencies[idx] / f_scale
        x0[3 * j + 1] = _estimate_width(spectrum, idx) / f_scale
        x0[3 * j + 2] = spectrum.amplitudes[idx] / a_scale

    def residual_jacobian(x):
        model = _lorentzian_model(freqs, x)
        jac = np.empty((len(freqs), len(x)))
        for j in range(k):
            c, w, amp = x[3 * j: 3 * j + 3]
            h = 0.25 * w * w
            u = freqs - c
            denom = u * u + h
            jac[:, 3 * j] = amp * h * 2.0 * u / denom**2
            jac[:, 3 * j + 1] = amp * u * u * (0.5 * w) / denom**2
            jac[:, 3 * j + 2] = h / denom
        return model - data, jac

    x, n_iter, _ = _gauss_newton(residual_jacobian, x0)
    r, jac = residual_jacobian(x)
    cov = _covariance(jac, r, len(x))
    sigma = np.sqrt(np.maximum(np.diag(cov), 0.0))

    peaks = []
    for j in range(k):
        c, w, amp = x[3 * j: 3 * j + 3]
        sc, sw, sa = sigma[3 * j: 3 * j + 3]
        peaks.append(
            PeakFit(
                center=c * f_scale,
                width=abs(w) * f_scale,
                amplitude=amp * a_scale,
                center_err=sc * f_scale,
                width_err=sw * f_scale,
                amplitude_err=sa * a_scale,
            )
        )
    peaks.sort(key=lambda p: p.center)
    residual_norm = float(np.linalg.norm(_lorentzian_model(freqs, x) - data) * a_scale)
    return LorentzianFit(tuple(peaks), residual_norm, n_iter)


@dataclass(frozen=True)
class DecayFit:
    """Damped-sinusoid fit A sin(w t + phi) exp(-(t/T2*)^2) + c.

    frequency is cyclic (Hz).  When the decay is unidentifiable (fitted
    T2* beyond 3x the trace span, or a non-decaying envelope) `unbounded`
    is set and t2_star is +inf rather than a spurious finite value.
    """

    frequency: float
    t2_star: float
    amplitude: float
    phase: float
    offset: float
    frequency_err: float
    t2_star_err: float
    amplitude_err: float
    phase_err: float
    offset_err: float
    residual_norm: float
    n_iterations: int
    unbounded: bool = False

    def __post_init__(self):
        if not self.t2_star > 0:
            raise ValueError("t2_star must be positive (inf when unbounded)")

    def to_json_dict(self):
        def clean(x):
            return x if np.isfinite(x) else None

        return {
            "model": "damped_sinusoid",
            "frequency_hz": self.frequency,
            "t2_star_s": clean(self.t2_star),
            "amplitude": self.amplitude,
            "phase_rad": self.phase,
            "offset": self.offset,
            "frequency_err_hz": self.frequency_err,
            "t2_star_err_s": clean(self.t2_star_err),
            "amplitude_err": self.amplitude_err,
            "phase_err_rad": self.phase_err,
            "offset_err": self.offset_err,
            "residual_norm": self.residual_norm,
            "iterations": self.n_iterations,
            "t2_star_unbounded": self.unbounded,
        }


def _dominant_frequency(trace):
    spectrum = fft_spectrum(trace, pad_factor=8)
    a = spectrum.amplitudes.copy()
    a[0] = 0.0
    idx = int(np.argmax(a))
    return float(spectrum.frequencies[idx]), float(a[idx])


def _varpro_init(ts, y, ws, g_candidates):
    """Best (A, phi, c, g) over a coarse decay grid, amplitudes by linear
    least squares at fixed frequency and decay."""
    best = None
    for g in g_candidates:
        env = np.exp(-g * ts * ts)
        design = np.column_stack([np.sin(ws * ts) * env, np.cos(ws * ts) * env,
                                  np.ones_like(ts)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        res = y - design @ coef
        cost = float(res @ res)
        if best is None or cost < best[0]:
            best = (cost, coef, g)
    _, (a_sin, a_cos, c0), g0 = best
    amp = float(np.hypot(a_sin, a_cos))
    phase = float(np.arctan2(a_cos, a_sin))
    return amp, phase, float(c0), float(g0)


def fit_damped_sinusoid(trace: SignalTrace, fit_decay: bool = True) -> DecayFit:
    """Least-squares fit of A sin(w t + phi) exp(-(t/T2*)^2) + c.

    The frequency is initialized from the dominant FFT peak and the other
    parameters from a linear solve over a coarse decay grid.  With
    fit_decay=False the envelope is held at 1 (pure sinusoid fit, used for
    precision frequency extraction of undamped traces); the result is then
    flagged unbounded.
    """
    t, y = trace.times, trace.values
    if len(t) < 16:
        raise InsufficientSpan(f"need at least 16 samples, got {len(t)}")

    f0, peak_amp = _dominant_frequency(trace)
    if f0 <= 0 or peak_amp <= 0:
        raise FitFailure("trace shows no oscillation to fit")
    span = trace.span
    if span < 1.0 / f0:
        raise InsufficientSpan(
            f"trace span {span:.3e} s is below one oscillation period {1.0 / f0:.3e} s"
        )

    tau = span
    ts = (t - t[0]) / tau
    ws0 = 2.0 * np.pi * f0 * tau
    if fit_decay:
        g_grid = (0.0, 0.25, 1.0, 2.25, 4.0, 9.0, 16.0, 36.0, 64.0)
    else:
        g_grid = (0.0,)
    amp0, phi0, c0, g0 = _varpro_init(ts, y, ws0, g_grid)

    if fit_decay:
        x0 = np.array([amp0, ws0, phi0, g0, c0])
    else:
        x0 = np.array([amp0, ws0, phi0, c0])

    def residual_jacobian(x):
        if fit_decay:
            amp, ws, phi, g, c = x
        else:
            amp, ws, phi = x[0], x[1], x[2]
            g, c = 0.0, x[3]
        env = np.exp(-g * ts * ts)
        arg = ws * ts + phi
        s, co = np.sin(arg), np.cos(arg)
        model = amp * s * env + c
        cols = [s * env, amp * co * ts * env, amp * co * env]
        if fit_decay:
            cols.append(-amp * s * ts * ts * env)
        cols.append(np.ones_like(ts))
        return model - y, np.column_stack(cols)

    x, n_iter, residual_norm = _gauss_newton(residual_jacobian, x0)
    r, jac = residual_jacobian(x)
    cov = _covariance(jac, r, len(x))
    sigma = np.sqrt(np.maximum(np.diag(cov), 0.0))

    if fit_decay:
        amp, ws, phi, g, c = x
        s_amp, s_ws, s_phi, s_g, s_c = sigma
    else:
        amp, ws, phi, c = x
        s_amp, s_ws, s_phi, s_c = sigma
        g, s_g = 0.0, 0.0

    # Normalize to positive amplitude and fold the time offset back in.
    omega = ws / tau
    phase = phi - omega * t[0]
    if amp < 0:
        amp, phase = -amp, phase + np.pi
    phase = float(np.remainder(phase + np.pi, 2.0 * np.pi) - np.pi)

    g_floor = 1.0 / _UNBOUNDED_T2_SPAN_RATIO**2
    unbounded = (not fit_decay) or g < g_floor
    if unbounded:
        t2_star, t2_err = np.inf, np.inf
    else:
        t2_star = tau / np.sqrt(g)
        t2_err = 0.5 * tau * g ** (-1.5) * s_g

    return DecayFit(
        frequency=omega / (2.0 * np.pi),
        t2_star=float(t2_star),
        amplitude=float(amp),
        phase=phase,
        offset=float(c),
        frequency_err=float(s_ws / tau / (2.0 * np.pi)),
        t2_star_err=float(t2_err),
        amplitude_err=float(s_amp),
        phase_err=float(s_phi),
        offset_err=float(s_c),
        residual_norm=float(residual_norm),
        n_iterations=n_iter,
        unbounded=bool(unbounded),
    )
