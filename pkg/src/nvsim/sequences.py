"""Ramsey protocol in the dressed-state space: gates, engines, sampling.

The sequence is: polarize to |0>, microwave chain U_Y(pi) U_Z(pi) U_X(pi/2)
to prepare the circular state (an equal superposition of two dressed
states), continuous phase-modulated driving for a time t, the reversed
chain, and readout of the |0> population.  Three engines compute the same
readout probability:

  "analytic"  closed form of the rotating-wave model,
              S(t) = (3 + cos(O1 t) + 2cos((O1/2 + w+)t)
                        + 2cos((O1/2 - w+)t)) / 8
  "gates"     ideal gate matrices composed with dressed-frame evolution
  "full"      brute-force integration of the lab-frame Hamiltonian

Agreement of "full" with the other two, within the rotating-wave error
budget, is the core validation this package performs.

Microwave gates act in the two-level space {|0>, bright}, with bright =
(|+1> + |-1>)/sqrt(2); the dark state is untouched.  Axial Z pulses impart
a relative phase between |+1> and |-1>.  Phase conventions are fixed so
the initialization chain maps |0> exactly to |+1>; all downstream physics
is tested at the population/frequency level, which is convention-free.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EngineMismatch, PropagationError, RwaHierarchyWarning
from .hamiltonians import (
    DriveParameters,
    FieldEnvironment,
    NvConstants,
    check_rwa_hierarchy,
    detuning_delta,
    drive_phase,
    rwa_hamiltonian,
    transition_frequencies,
)
from .propagator import PropagationConfig, propagate_with_samples
from .spin import KET_ZERO, SX, SY, SZ, SZ2, matrix_exponential
from .trace import SignalTrace

__all__ = [
    "PulseSpec",
    "gate_unitary",
    "u_x",
    "u_y",
    "u_z_real",
    "composite_z_pi",
    "initialization_chain",
    "readout_chain",
    "readout_chain_real",
    "closed_form_signal",
    "ramsey_signal",
    "ramsey_protocol",
    "ramsey_trace",
    "undersampled_trace",
    "undersample_period",
    "frequency_shift_scan",
    "ShiftPoint",
]

ENGINES = ("analytic", "gates", "full")

# Generator of the microwave Y quadrature in the {|0>, bright} two-level
# space: -i|B><0| + i|0><B| written in the bare basis.  The X quadrature
# generator is Sx itself (Sx = |B><0| + |0><B| with the dark state inert).
_SIGMA_Y_BRIGHT = np.array(
    [[0, -1j, 0], [1j, 0, 1j], [0, -1j, 0]], dtype=complex
) / np.sqrt(2.0)
_SIGMA_Y_BRIGHT.setflags(write=False)


def u_x(theta: float) -> np.ndarray:
    """Microwave rotation by theta about X in the {|0>, bright} space."""
    return matrix_exponential(SX, theta / 2.0)


def u_y(theta: float) -> np.ndarray:
    """Microwave rotation by theta about Y (90 degree phase offset)."""
    return matrix_exponential(_SIGMA_Y_BRIGHT, theta / 2.0)


def u_z_real(phi: float) -> np.ndarray:
    """Axial pulse imparting relative phase phi between |+1> and |-1>:
    diag(e^{-i phi/2}, 1, e^{+i phi/2})."""
    return np.diag([np.exp(-0.5j * phi), 1.0, np.exp(0.5j * phi)]).astype(complex)


def composite_z_pi(gate=None) -> np.ndarray:
    """Composite Z pi pulse U_Z(pi) = U_Z,real(pi/2) U_X(2pi) U_Z,real(-pi/2).

    Unlike the plain axial pi pulse it also swaps bright and dark
    populations (the 2pi microwave contributes a minus sign in the driven
    subspace); the readout chain ordering accounts for that.

    `gate` optionally supplies the gate factory used for the three factors
    (defaults to the ideal gates), so a waveform-mode composite can be
    assembled from waveform primitives.
    """
    if gate is None:
        return u_z_real(np.pi / 2) @ u_x(2 * np.pi) @ u_z_real(-np.pi / 2)
    return (
        gate(PulseSpec("axial_z", np.pi / 2))
        @ gate(PulseSpec("microwave_x", 2 * np.pi))
        @ gate(PulseSpec("axial_z", -np.pi / 2))
    )


@dataclass(frozen=True)
class PulseSpec:
    """One control pulse.

    kind is "microwave_x", "microwave_y" (resonant pulses, 90 degrees
    apart in drive phase) or "axial_z" (bias pulse along the NV axis).
    In "waveform" mode the pulse carries an amplitude (rad/s) and a
    duration consistent with angle = amplitude * duration; in "ideal"
    mode the rotation is applied as an exact matrix.
    """

    kind: str
    angle: float
    mode: str = "ideal"
    amplitude: float | None = None
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in ("microwave_x", "microwave_y", "axial_z"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if not np.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")
        if self.mode not in ("ideal", "waveform"):
            raise ValueError(f"unknown pulse mode {self.mode!r}")
        if self.mode == "waveform":
            if self.amplitude is None or self.amplitude <= 0:
                raise ValueError("waveform pulses need a positive amplitude")
            duration = self.duration
            if duration is None:
                duration = abs(self.angle) / self.amplitude
                object.__setattr__(self, "duration", duration)
            booked = self.amplitude * duration
            if abs(booked - abs(self.angle)) > 1e-9 * max(1.0, abs(self.angle)):
                raise ValueError(
                    f"waveform bookkeeping violated: amplitude*duration = {booked!r} "
                    f"but |angle| = {abs(self.angle)!r}"
                )


def _ideal_gate(pulse: PulseSpec) -> np.ndarray:
    if pulse.kind == "microwave_x":
        return u_x(pulse.angle)
    if pulse.kind == "microwave_y":
        return u_y(pulse.angle)
    return u_z_real(pulse.angle)


def _waveform_gate(pulse: PulseSpec, constants: NvConstants, dt: float) -> np.ndarray:
    """Propagate the physical pulse at the resonant carrier and return its
    effective gate in the carrier rotating frame."""
    sign = 1.0 if pulse.angle >= 0 else -1.0
    tau = pulse.duration
    if tau == 0:
        return np.eye(3, dtype=complex)
    base = constants.zfs
    if pulse.kind == "axial_z":
        # Bias rate amplitude/2 per level gives relative phase rate
        # `amplitude`; commutes with the carrier, so this is exact.
        h = base * SZ2 + sign * (pulse.amplitude / 2.0) * SZ
        u = matrix_exponential(h, tau)
    else:
        # Resonant microwave with drive phase 0 (X) or pi/2 (Y).
        offset = 0.0 if pulse.kind == "microwave_x" else np.pi / 2.0
        n = max(1, int(np.ceil(tau / dt)))
        step = tau / n
        t_mid = (np.arange(n) + 0.5) * step
        coeff = sign * pulse.amplitude * np.cos(base * t_mid + offset)
        stack = (base * SZ2)[None, :, :] + coeff[:, None, None] * SX[None, :, :]
        w, v = np.linalg.eigh(stack)
        units = (v * np.exp(-1j * w * step)[:, None, :]) @ v.conj().swapaxes(-1, -2)
        u = np.eye(3, dtype=complex)
        for k in range(n):
            u = units[k] @ u
    carrier = np.diag(np.exp(1j * base * tau * np.array([1.0, 0.0, 1.0])))
    return carrier @ u


def gate_unitary(pulse: PulseSpec, constants: NvConstants | None = None,
                 dt: float = 5e-12, fidelity_floor: float = 0.999) -> np.ndarray:
    """Unitary realizing the pulse.

    Ideal mode returns the exact rotation.  Waveform mode propagates a
    resonant pulse at the carrier frequency and checks the result against
    the ideal gate; fidelity below `fidelity_floor` raises
    PropagationError rather than silently degrading the sequence.
    """
    if pulse.mode == "ideal":
        return _ideal_gate(pulse)
    constants = constants or NvConstants()
    gate = _waveform_gate(pulse, constants, dt)
    ideal = _ideal_gate(pulse)
    fidelity = abs(np.trace(ideal.conj().T @ gate)) / 3.0
    if fidelity < fidelity_floor:
        raise PropagationError(
            f"waveform gate for {pulse.kind} angle {pulse.angle:.4f} reached "
            f"fidelity {fidelity:.6f} < {fidelity_floor}"
        )
    return gate


def _gate_factory(pulse_mode, constants, amplitude):
    if pulse_mode == "ideal":
        return _ideal_gate

    def factory(pulse: PulseSpec) -> np.ndarray:
        spec = PulseSpec(pulse.kind, pulse.angle, mode="waveform", amplitude=amplitude)
        return gate_unitary(spec, constants)

    return factory


def initialization_chain(pulse_mode="ideal", constants=None, amplitude=None):
    """U_Y(pi) U_Z(pi) U_X(pi/2): maps |0> to the circular state |+1>."""
    g = _gate_factory(pulse_mode, constants, amplitude)
    return (
        g(PulseSpec("microwave_y", np.pi))
        @ composite_z_pi(None if pulse_mode == "ideal" else g)
        @ g(PulseSpec("microwave_x", np.pi / 2))
    )


def readout_chain(pulse_mode="ideal", constants=None, amplitude=None):
    """Reversed chain U_X(pi/2) U_Z(pi) U_Y(pi); maps accumulated dressed
    phase into |0> population."""
    g = _gate_factory(pulse_mode, constants, amplitude)
    return (
        g(PulseSpec("microwave_x", np.pi / 2))
        @ composite_z_pi(None if pulse_mode == "ideal" else g)
        @ g(PulseSpec("microwave_y", np.pi))
    )


def readout_chain_real(pulse_mode="ideal", constants=None, amplitude=None):
    """Alternative readout U_Y(pi/2) U_Z,real(pi) U_X(pi) using the plain
    axial pi pulse; yields identical probabilities for every input."""
    g = _gate_factory(pulse_mode, constants, amplitude)
    return (
        g(PulseSpec("microwave_y", np.pi / 2))
        @ g(PulseSpec("axial_z", np.pi))
        @ g(PulseSpec("microwave_x", np.pi))
    )


def closed_form_signal(omega1, omega_plus, times):
    """Rotating-wave closed form of the readout probability."""
    t = np.asarray(times, dtype=float)
    return (
        3.0
        + np.cos(omega1 * t)
        + 2.0 * np.cos((0.5 * omega1 + omega_plus) * t)
        + 2.0 * np.cos((0.5 * omega1 - omega_plus) * t)
    ) / 8.0


def _require_sane_gates_regime(constants, fields, drive):
    delta = detuning_delta(constants, fields, drive)
    if drive.omega1 < 2.0 * drive.omega2 or (drive.omega2 > 0 and delta > drive.omega2 / 2.0):
        raise EngineMismatch(
            "dressed-frame engines need omega1 >= 2*omega2 and detuning <= omega2/2; "
            f"got omega1={drive.omega1:.3e}, omega2={drive.omega2:.3e}, delta={delta:.3e}"
        )
    violations = check_rwa_hierarchy(constants, fields, drive)
    if violations:
        warnings.warn(
            "rotating-wave hierarchy marginal for dressed-frame engine: "
            + "; ".join(violations),
            RwaHierarchyWarning,
            stacklevel=3,
        )


def ramsey_signal(constants, fields, drive, times, engine="analytic", *,
                  second_order=False, cfg=None, pulse_mode="ideal",
                  pulse_amplitude=None):
    """Readout probabilities at the given times (sorted, >= 0).

    engine: "analytic" evaluates the closed form; "gates" composes ideal
    gate matrices with dressed-frame evolution; "full" integrates the
    lab-frame Hamiltonian without approximation.  `second_order` adds the
    Delta^2/Omega2 splitting correction to the analytic/gates models.
    `pulse_mode`/`pulse_amplitude` select waveform-realized chains for the
    full engine.
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if len(times) == 0:
        return np.empty(0)
    if times.min() < 0:
        raise ValueError("times must be >= 0")

    if engine == "analytic":
        _require_sane_gates_regime(constants, fields, drive)
        omega_plus, _ = transition_frequencies(constants, fields, drive, second_order)
        return closed_form_signal(drive.omega1, omega_plus, times)

    if engine == "gates":
        _require_sane_gates_regime(constants, fields, drive)
        return _gates_signal(constants, fields, drive, times, second_order)

    return _full_signal(constants, fields, drive, times, cfg, pulse_mode, pulse_amplitude)


def _gates_signal(constants, fields, drive, times, second_order):
    psi0 = initialization_chain() @ KET_ZERO
    readout_row = readout_chain()[1, :]  # <0| row of the readout chain

    h_rwa = rwa_hamiltonian(constants, fields, drive, second_order)
    w, v = np.linalg.eigh(h_rwa)
    coeff = v.conj().T @ psi0
    evolved = (np.exp(-1j * np.outer(times, w)) * coeff[None, :]) @ v.T  # (nt, 3)

    wx, vx = np.linalg.eigh(SX)
    cx = evolved @ vx.conj()  # components in the Sx eigenbasis
    # U2^dagger(t) = exp(-i (omega1/2) t Sx)
    cx = cx * np.exp(-1j * 0.5 * drive.omega1 * np.outer(times, wx))
    psi_r1 = cx @ vx.T

    amplitudes = psi_r1 @ readout_row
    return np.abs(amplitudes) ** 2


def _full_signal(constants, fields, drive, times, cfg, pulse_mode, pulse_amplitude):
    if pulse_mode == "waveform" and pulse_amplitude is None:
        pulse_amplitude = drive.omega1
    init = initialization_chain(pulse_mode, constants, pulse_amplitude)
    readout_row = readout_chain(pulse_mode, constants, pulse_amplitude)[1, :]
    psi0 = init @ KET_ZERO
    psi0 = psi0 / np.linalg.norm(psi0)

    cfg = cfg or PropagationConfig()
    states = propagate_with_samples(constants, fields, drive, psi0, times, cfg)

    base = drive.zfs_or_base(constants)
    phases = drive_phase(drive, times, base)
    carrier = np.exp(1j * np.outer(phases, np.array([1.0, 0.0, 1.0])))
    psi_r1 = carrier * states

    amplitudes = psi_r1 @ readout_row
    return np.abs(amplitudes) ** 2


def ramsey_protocol(constants, fields, drive, t, engine="analytic", **kwargs):
    """Readout probability of a single free-evolution duration t >= 0."""
    return float(ramsey_signal(constants, fields, drive, np.array([float(t)]),
                               engine, **kwargs)[0])


def _trace_metadata(constants, fields, drive, engine, extra=None):
    meta = {
        "engine": engine,
        "omega1_rad_per_s": drive.omega1,
        "omega2_rad_per_s": drive.omega2,
        "base_frequency_rad_per_s": drive.zfs_or_base(constants),
        "zfs_rad_per_s": constants.zfs,
        "d_par_rad_per_s_cm_per_v": constants.d_par,
        "d_perp_rad_per_s_cm_per_v": constants.d_perp,
        "gamma_rad_per_s_per_t": constants.gamma,
        "b_field_t": [fields.bx, fields.by, fields.bz],
        "e_field_v_per_cm": [fields.ex, fields.ey, fields.ez],
    }
    if extra:
        meta.update(extra)
    return meta


def ramsey_trace(constants, fields, drive, times, engine="analytic", **kwargs):
    """Dense SignalTrace over an explicit time grid."""
    times = np.asarray(times, dtype=float)
    values = ramsey_signal(constants, fields, drive, times, engine, **kwargs)
    return SignalTrace(times, values, sampling="dense",
                       metadata=_trace_metadata(constants, fields, drive, engine))


def undersample_period(drive: DriveParameters) -> float:
    """Sampling period T = 2 pi / Omega1 that aliases away all but the
    electric-field-dependent frequency."""
    return 2.0 * np.pi / drive.omega1


def undersampled_trace(constants, fields, drive, n_max, engine="analytic", **kwargs):
    """Ramsey signal sampled at t = n T, n = 0 .. n_max-1, T = 2 pi/Omega1.

    This is plain sampling of the same signal the dense trace sees; the
    surviving oscillation sits at the single frequency Omega1/2 - omega_plus.
    """
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max!r}")
    period = undersample_period(drive)
    times = period * np.arange(int(n_max))
    values = ramsey_signal(constants, fields, drive, times, engine, **kwargs)
    meta = _trace_metadata(constants, fields, drive, engine,
                           {"undersample_period_s": period})
    return SignalTrace(times, values, sampling="undersampled",
                       undersample_period=period, metadata=meta)


@dataclass(frozen=True)
class ShiftPoint:
    """Fitted under-sampled frequency shift for one field environment."""

    fields: FieldEnvironment
    shift_hz: float
    shift_err_hz: float


def frequency_shift_scan(constants, drive, scan, *, n_max=256, engine="analytic",
                         reference=None, threads=1, **kwargs):
    """Fit the under-sampled oscillation frequency for each environment in
    `scan` and return shifts relative to the zero-field reference.

    Fits are time-domain sinusoid fits (frequency precision well below the
    spectral resolution of the grid).  Raises FitFailure if any trace
    cannot be fit.  Scan points are independent pure evaluations; with
    threads > 1 they run on a thread pool (results keep scan order).
    """
    from .spectral import fit_damped_sinusoid

    scan = list(scan)
    if not scan:
        raise ValueError("scan must contain at least one field environment")

    def fitted_frequency(fields):
        trace = undersampled_trace(constants, fields, drive, n_max, engine, **kwargs)
        fit = fit_damped_sinusoid(trace, fit_decay=False)
        return fit.frequency, fit.frequency_err

    reference = reference or FieldEnvironment()
    f_ref, _ = fitted_frequency(reference)
    if threads > 1 and len(scan) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(fitted_frequency, scan))
    else:
        fits = [fitted_frequency(fields) for fields in scan]
    return [
        ShiftPoint(fields, f_i - f_ref, err_i)
        for fields, (f_i, err_i) in zip(scan, fits)
    ]
