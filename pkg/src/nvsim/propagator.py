"""Brute-force time-domain integration of the driven spin, H0 + H1(t).

This is the independent oracle the analytic dressed-frame model is checked
against: no rotating-wave approximation is made in the default "lab" mode.
The integrator exponentiates the instantaneous Hamiltonian step by step
(piecewise-constant midpoint rule, i.e. second-order Magnus), with an
optional fourth-order commutator-free scheme for convergence studies.
Every step is a true unitary (built by eigendecomposition), so norm is
preserved to floating point over arbitrarily long traces.

A "rotating" mode integrates the slow residual Hamiltonian left after the
carrier-frame rotation (one rotating-wave approximation applied), which is
two orders of magnitude faster for multi-microsecond traces; states are
converted back to the lab frame before returning, so both modes share one
contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PropagationError, StepSizeTooCoarse
from .hamiltonians import (
    DriveParameters,
    FieldEnvironment,
    NvConstants,
    drive_phase,
    lab_hamiltonian,
)
from .spin import SX, SY, SZ, SZ2

__all__ = ["PropagationConfig", "propagate", "propagate_unitary", "propagate_with_samples"]

_MIDPOINT = "midpoint"
_CF4 = "fourth-order-commutator"

# Gauss-Legendre nodes and weights of the fourth-order commutator-free
# scheme: U = exp(-i dt (a- H(c1) + a+ H(c2))) exp(-i dt (a+ H(c1) + a- H(c2)))
# applied right-to-left, with c1/c2 the early/late node.
_CF4_NODE1 = 0.5 - np.sqrt(3.0) / 6.0
_CF4_NODE2 = 0.5 + np.sqrt(3.0) / 6.0
_CF4_A_PLUS = 0.25 + np.sqrt(3.0) / 6.0
_CF4_A_MINUS = 0.25 - np.sqrt(3.0) / 6.0

_CHUNK = 65536


@dataclass(frozen=True)
class PropagationConfig:
    """Integration settings.

    dt is the step size (s); with the default 5 ps a 2.87 GHz carrier is
    resolved by ~70 points per period.  `order` selects the midpoint
    exponential or the fourth-order commutator-free scheme.  `frame` picks
    full lab-frame integration or the single-RWA rotating frame (where
    dt can be ~coarser by the ratio carrier/Omega1).  The accumulated
    propagator is checked for unitarity every `unitarity_check_interval`
    steps.
    """

    dt: float = 5e-12
    order: str = _MIDPOINT
    frame: str = "lab"
    unitarity_check_interval: int = 200_000

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.order not in (_MIDPOINT, _CF4):
            raise ValueError(f"unknown integrator order {self.order!r}")
        if self.frame not in ("lab", "rotating"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.unitarity_check_interval < 1:
            raise ValueError("unitarity_check_interval must be >= 1")


def _fastest_scale(constants, fields, drive, base, frame):
    field_scale = (
        constants.gamma * float(np.linalg.norm(fields.b_vec))
        + constants.d_par * abs(fields.ez)
        + constants.d_perp * (abs(fields.ex) + abs(fields.ey))
    )
    if frame == "lab":
        return base + drive.omega1 + field_scale
    return drive.omega1 + 2.0 * drive.omega2 + field_scale


def _check_resolution(constants, fields, drive, base, cfg):
    scale = _fastest_scale(constants, fields, drive, base, cfg.frame)
    if cfg.dt * scale >= 0.1:
        raise StepSizeTooCoarse(
            f"dt = {cfg.dt:.3e} s does not resolve the fastest scale "
            f"{scale:.3e} rad/s (dt*scale = {cfg.dt * scale:.3f} >= 0.1)"
        )


def _expm_stack(h_stack, dt):
    """exp(-i H dt) for a stack (n, 3, 3) of Hermitian matrices."""
    w, v = np.linalg.eigh(h_stack)
    phases = np.exp(-1j * w * dt)
    return (v * phases[:, None, :]) @ v.conj().swapaxes(-1, -2)


_EYE3 = np.eye(3, dtype=complex)


def _ordered_product(u_stack):
    """Product U[n-1] @ ... @ U[1] @ U[0] by pairwise tree reduction."""
    u = u_stack
    while len(u) > 1:
        if len(u) % 2:
            u = np.concatenate([u, _EYE3[None]])
        u = u[1::2] @ u[0::2]
    return u[0]


class _Integrator:
    """Stateless step-unitary factory for one (constants, fields, drive) set."""

    def __init__(self, constants, fields, drive, cfg):
        self.cfg = cfg
        self.drive = drive
        self.base = drive.zfs_or_base(constants)
        _check_resolution(constants, fields, drive, self.base, cfg)
        if cfg.frame == "lab":
            self.h_static = lab_hamiltonian(constants, fields)
        else:
            # Residual Hamiltonian after the carrier-frame rotation: the
            # carrier term is removed, transverse Zeeman terms average out,
            # and the drive splits into (Omega1/2) Sx plus the modulation
            # tone -2 Omega2 cos(Omega1 t) Sz^2.
            c, f = constants, fields
            self.h_static = (
                c.d_par * f.ez * SZ2
                + c.gamma * f.bz * SZ
                - c.d_perp * f.ex * (SX @ SX - SY @ SY)
                + c.d_perp * f.ey * (SX @ SY + SY @ SX)
                + 0.5 * drive.omega1 * SX
            )

    def _coefficient(self, times):
        """Coefficient of the time-dependent operator at given times."""
        if self.cfg.frame == "lab":
            return self.drive.omega1 * np.cos(drive_phase(self.drive, times, self.base))
        return -2.0 * self.drive.omega2 * np.cos(self.drive.omega1 * times)

    @property
    def _time_dependent_op(self):
        return SX if self.cfg.frame == "lab" else SZ2

    def _stack(self, times):
        coeff = self._coefficient(times)
        return self.h_static[None, :, :] + coeff[:, None, None] * self._time_dependent_op[None, :, :]

    def step_unitaries(self, t0, dt, n):
        """Unitaries for n consecutive steps of size dt starting at t0."""
        offsets = t0 + dt * np.arange(n)
        if self.cfg.order == _MIDPOINT:
            return _expm_stack(self._stack(offsets + 0.5 * dt), dt)
        h1 = self._stack(offsets + _CF4_NODE1 * dt)
        h2 = self._stack(offsets + _CF4_NODE2 * dt)
        first = _expm_stack(_CF4_A_PLUS * h1 + _CF4_A_MINUS * h2, dt)
        second = _expm_stack(_CF4_A_MINUS * h1 + _CF4_A_PLUS * h2, dt)
        return second @ first


def _unitarity_drift(u):
    return float(np.abs(u.conj().T @ u - _EYE3).max())


def _segment_unitary(integ, t0, t1, cfg, steps_done):
    """Propagator over [t0, t1]; returns (U, steps)."""
    span = t1 - t0
    if span < 0:
        raise ValueError(f"segment end {t1!r} precedes start {t0!r}")
    if span == 0:
        return _EYE3.copy(), steps_done
    n = max(1, int(np.ceil(span / cfg.dt - 1e-12)))
    dt = span / n
    u = _EYE3.copy()
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        stack = integ.step_unitaries(t0 + done * dt, dt, m)
        u = _ordered_product(stack) @ u
        done += m
        steps_done += m
        if steps_done % cfg.unitarity_check_interval < m:
            drift = _unitarity_drift(u)
            if drift > 1e-7:
                raise PropagationError(
                    f"accumulated propagator lost unitarity (drift {drift:.2e})"
                )
    return u, steps_done


def propagate_unitary(constants: NvConstants, fields: FieldEnvironment,
                      drive: DriveParameters, t0: float, t1: float,
                      cfg: PropagationConfig | None = None) -> np.ndarray:
    """Full propagator of H0 + H1(t) over [t0, t1], t1 >= t0.

    Lab-frame by default; with cfg.frame == "rotating" the propagator of
    the residual rotating-frame Hamiltonian is converted back so that the
    returned matrix always maps lab states at t0 to lab states at t1.
    Deterministic for fixed inputs.
    """
    cfg = cfg or PropagationConfig()
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    integ = _Integrator(constants, fields, drive, cfg)
    u, _ = _segment_unitary(integ, t0, t1, cfg, 0)
    if cfg.frame == "rotating":
        u = _carrier_unitary(drive, integ.base, t1).conj().T @ u @ _carrier_unitary(
            drive, integ.base, t0
        )
    return u


def _carrier_unitary(drive, base, t):
    """Diagonal carrier-frame rotation exp(i phase(t) Sz^2)."""
    phi = float(drive_phase(drive, t, base))
    return np.diag(np.exp(1j * phi * np.array([1.0, 0.0, 1.0]))).astype(complex)


def propagate_with_samples(constants, fields, drive, state0, sample_times,
                           cfg: PropagationConfig | None = None):
    """Lab-frame states at each of the (sorted, >= 0) sample times.

    One pass of incremental propagation from t = 0; returns an array of
    shape (len(sample_times), 3).
    """
    cfg = cfg or PropagationConfig()
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("sample_times must be a non-empty 1-d sequence")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("sample_times must be sorted and non-negative")
    state0 = np.asarray(state0, dtype=complex)
    if abs(np.linalg.norm(state0) - 1.0) > 1e-9:
        raise ValueError("state0 must be normalized")

    integ = _Integrator(constants, fields, drive, cfg)
    states = np.empty((len(times), 3), dtype=complex)
    u = _EYE3.copy()
    t_prev = 0.0
    steps = 0
    for k, t in enumerate(times):
        seg, steps = _segment_unitary(integ, t_prev, t, cfg, steps)
        u = seg @ u
        if cfg.frame == "rotating":
            states[k] = _carrier_unitary(drive, integ.base, t).conj().T @ (u @ state0)
        else:
            states[k] = u @ state0
        t_prev = t
    return states


def propagate(constants, fields, drive, state0, t_final,
              cfg: PropagationConfig | None = None):
    """Lab-frame state at t_final starting from `state0` at t = 0."""
    return propagate_with_samples(constants, fields, drive, state0, [t_final], cfg)[0]
