"""Lab-frame Hamiltonian, phase-modulated drive, and the dressed-frame model.

The static Hamiltonian of the NV ground-state spin is

    H0 = (D + d_par Ez) Sz^2 + gamma B.S
         - d_perp Ex (Sx^2 - Sy^2) + d_perp Ey (Sx Sy + Sy Sx)

and the continuous phase-modulated drive is

    H1(t) = Omega1 cos(f t + (2 Omega2/Omega1) sin(Omega1 t)) Sx.

With f on resonance (f = D) and the frequency hierarchy
D >> Omega1 >> Omega2 >> Delta, two frame rotations (U1 at the modulated
carrier phase, U2 at Omega1/2 about Sx) reduce the dynamics to a static
dressed-frame Hamiltonian whose transition frequencies are

    omega_pm = Omega2/2 + Delta^2/Omega2 +- (d_par Ez + 3 d_perp Ex)/2,

linear in the electric field and only quadratically sensitive to the
magnetic field through Delta.

All quantities are angular (rad/s); electric fields are V/cm and magnetic
fields are Tesla, matching the units of the dipole constants.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PerturbationWarning, RwaHierarchyWarning
from .spin import BRIGHT, DARK, KET_ZERO, SX, SY, SZ, SZ2, matrix_exponential

__all__ = [
    "TWO_PI",
    "NvConstants",
    "FieldEnvironment",
    "DriveParameters",
    "NoisePerturbation",
    "lab_hamiltonian",
    "drive_phase",
    "drive_hamiltonian",
    "detuning_delta",
    "detuning_delta2",
    "rwa_hamiltonian",
    "dressed_hamiltonian",
    "transition_frequencies",
    "frame_transformations",
    "check_rwa_hierarchy",
]

TWO_PI = 2.0 * np.pi

# Anticommutator Sx Sy + Sy Sx = -i(|+1><-1| - |-1><+1|), precomputed.
_SXSY_SYSX = SX @ SY + SY @ SX
_SXSY_SYSX.setflags(write=False)
_SX2_SY2 = SX @ SX - SY @ SY
_SX2_SY2.setflags(write=False)

# Change of basis whose columns are the dressed states; maps dressed-basis
# coordinates to bare-basis coordinates.
_DRESSED_COLUMNS = np.column_stack([BRIGHT, DARK, KET_ZERO])
_DRESSED_COLUMNS.setflags(write=False)


@dataclass(frozen=True)
class NvConstants:
    """Physical constants of one NV center, angular units.

    Defaults are the accepted ground-state values: zero-field splitting
    D = 2pi x 2.87 GHz, axial dipole d_par = 2pi x 0.35 (rad/s)/(V/cm),
    non-axial dipole d_perp = 2pi x 17 (rad/s)/(V/cm), and gyromagnetic
    ratio gamma = 2pi x 28.03 GHz/T.
    """

    zfs: float = TWO_PI * 2.87e9
    d_par: float = TWO_PI * 0.35
    d_perp: float = TWO_PI * 17.0
    gamma: float = TWO_PI * 28.03e9

    def __post_init__(self):
        for name in ("zfs", "d_par", "d_perp", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"NvConstants.{name} must be strictly positive, got {value!r}")

    @classmethod
    def from_cyclic(cls, zfs_hz=2.87e9, d_par_hz_cm_per_v=0.35,
                    d_perp_hz_cm_per_v=17.0, gamma_hz_per_t=28.03e9):
        """Build from cyclic-frequency values (the units papers quote)."""
        return cls(
            zfs=TWO_PI * zfs_hz,
            d_par=TWO_PI * d_par_hz_cm_per_v,
            d_perp=TWO_PI * d_perp_hz_cm_per_v,
            gamma=TWO_PI * gamma_hz_per_t,
        )


@dataclass(frozen=True)
class FieldEnvironment:
    """Static magnetic (Tesla) and electric (V/cm) fields in the NV frame."""

    bx: float = 0.0
    by: float = 0.0
    bz: float = 0.0
    ex: float = 0.0
    ey: float = 0.0
    ez: float = 0.0

    def __post_init__(self):
        for name in ("bx", "by", "bz", "ex", "ey", "ez"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"FieldEnvironment.{name} must be finite")

    @property
    def b_vec(self):
        return np.array([self.bx, self.by, self.bz])

    @property
    def e_vec(self):
        return np.array([self.ex, self.ey, self.ez])


@dataclass(frozen=True)
class DriveParameters:
    """Continuous-drive settings: Rabi frequency Omega1, phase-modulation
    strength Omega2, and the carrier base frequency (None means "resonant",
    i.e. equal to the zero-field splitting of whatever NvConstants the
    drive is used with).  Angular units.
    """

    omega1: float
    omega2: float
    base_frequency: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.omega1) or self.omega1 <= 0:
            raise ValueError(f"omega1 must be > 0, got {self.omega1!r}")
        if not np.isfinite(self.omega2) or self.omega2 < 0:
            raise ValueError(f"omega2 must be >= 0, got {self.omega2!r}")
        if self.omega2 >= self.omega1:
            raise ValueError(
                "drive hierarchy violated: omega2 must be smaller than omega1 "
                f"(omega1={self.omega1!r}, omega2={self.omega2!r})"
            )
        if self.base_frequency is not None and (
            not np.isfinite(self.base_frequency) or self.base_frequency <= 0
        ):
            raise ValueError(f"base_frequency must be > 0 or None, got {self.base_frequency!r}")

    def resolve_base(self, constants: NvConstants) -> float:
        """Carrier frequency actually used: explicit value or resonance."""
        return self.zfs_or_base(constants)

    def zfs_or_base(self, constants: NvConstants) -> float:
        return self.base_frequency if self.base_frequency is not None else constants.zfs


@dataclass(frozen=True)
class NoisePerturbation:
    """Quasi-static fluctuations of the zero-field splitting and of the
    Rabi amplitude, angular rad/s."""

    delta_zfs: float = 0.0
    delta_omega1: float = 0.0

    def __post_init__(self):
        for name in ("delta_zfs", "delta_omega1"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"NoisePerturbation.{name} must be finite")


def lab_hamiltonian(constants: NvConstants, fields: FieldEnvironment) -> np.ndarray:
    """Static lab-frame Hamiltonian of the NV spin in the given fields."""
    c, f = constants, fields
    h = (c.zfs + c.d_par * f.ez) * SZ2
    h = h + c.gamma * (f.bx * SX + f.by * SY + f.bz * SZ)
    h = h - c.d_perp * f.ex * _SX2_SY2
    h = h + c.d_perp * f.ey * _SXSY_SYSX
    return h


def drive_phase(drive: DriveParameters, t, base_frequency: float) -> np.ndarray:
    """Instantaneous phase of the modulated carrier,
    f t + (2 Omega2/Omega1) sin(Omega1 t).  Vectorized over t."""
    t = np.asarray(t, dtype=float)
    return base_frequency * t + (2.0 * drive.omega2 / drive.omega1) * np.sin(drive.omega1 * t)


def drive_hamiltonian(drive: DriveParameters, t: float,
                      base_frequency: float | None = None) -> np.ndarray:
    """Instantaneous drive matrix Omega1 cos(phase(t)) Sx at time t >= 0.

    `base_frequency` overrides the drive's own setting; if both are None
    the default zero-field splitting is used (resonant convention).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    if base_frequency is None:
        base_frequency = (drive.base_frequency if drive.base_frequency is not None
                          else NvConstants().zfs)
    phase = drive_phase(drive, t, base_frequency)
    return drive.omega1 * np.cos(phase) * SX


def detuning_delta(constants: NvConstants, fields: FieldEnvironment,
                   drive: DriveParameters) -> float:
    """Second-order detuning of the driven transition,

        Delta = (gamma Bz)^2/Omega1 + (d_par Ez - d_perp Ex)^2/(4 Omega1)
                + (d_perp Ey)^2/Omega1.

    Quadratic in every field component, hence always >= 0.
    """
    c, f, d = constants, fields, drive
    return (
        (c.gamma * f.bz) ** 2 / d.omega1
        + (c.d_par * f.ez - c.d_perp * f.ex) ** 2 / (4.0 * d.omega1)
        + (c.d_perp * f.ey) ** 2 / d.omega1
    )


def detuning_delta2(constants: NvConstants, fields: FieldEnvironment,
                    drive: DriveParameters, noise: NoisePerturbation) -> float:
    """Detuning including drive-amplitude and zero-field-splitting
    fluctuations,

        Delta2 = dOmega1/2 + (gamma Bz)^2/Omega1
                 + (dD + d_par Ez - d_perp Ex)^2/(4 Omega1)
                 + (d_perp Ey)^2/Omega1.
    """
    c, f, d, n = constants, fields, drive, noise
    for name, value in (("delta_zfs", n.delta_zfs), ("delta_omega1", n.delta_omega1)):
        if abs(value) >= d.omega1 / 10.0:
            warnings.warn(
                f"|{name}| = {abs(value):.3e} rad/s is not small against "
                f"omega1/10 = {d.omega1 / 10.0:.3e}; perturbative detuning "
                "is only qualitative",
                PerturbationWarning,
                stacklevel=2,
            )
    return (
        n.delta_omega1 / 2.0
        + (c.gamma * f.bz) ** 2 / d.omega1
        + (n.delta_zfs + c.d_par * f.ez - c.d_perp * f.ex) ** 2 / (4.0 * d.omega1)
        + (c.d_perp * f.ey) ** 2 / d.omega1
    )


def _splitting_terms(constants, fields, drive, second_order):
    """(lambda, mu): dressed S_z,d and S_z,d^2 coefficients."""
    lam = drive.omega2 / 2.0
    if second_order and drive.omega2 > 0:
        lam += detuning_delta(constants, fields, drive) ** 2 / drive.omega2
    mu = 0.5 * constants.d_par * fields.ez + 1.5 * constants.d_perp * fields.ex
    return lam, mu


def check_rwa_hierarchy(constants, fields, drive):
    """Return a list of human-readable hierarchy violations (empty if the
    regime D >= 50 Omega1, Omega1 >= 5 Omega2, Omega2 >= 10 Delta holds)."""
    base = drive.zfs_or_base(constants)
    delta = detuning_delta(constants, fields, drive)
    margin = 1.0 - 1e-9  # boundary ratios count as satisfied despite rounding
    violations = []
    if base < 50.0 * drive.omega1 * margin:
        violations.append(
            f"base frequency {base:.3e} < 50 x omega1 {drive.omega1:.3e}"
        )
    if drive.omega1 < 5.0 * drive.omega2 * margin:
        violations.append(f"omega1 {drive.omega1:.3e} < 5 x omega2 {drive.omega2:.3e}")
    if drive.omega2 > 0 and drive.omega2 < 10.0 * delta * margin:
        violations.append(f"omega2 {drive.omega2:.3e} < 10 x detuning {delta:.3e}")
    return violations


def _warn_hierarchy(constants, fields, drive):
    violations = check_rwa_hierarchy(constants, fields, drive)
    if violations:
        warnings.warn(
            "dressed-frame model outside its validity hierarchy: "
            + "; ".join(violations),
            RwaHierarchyWarning,
            stacklevel=3,
        )


def rwa_hamiltonian(constants, fields, drive, second_order=False):
    """Static rotating-wave Hamiltonian in the bare basis,

        H = lambda (Sz^2 - Sy^2) + mu Sx^2,

    where lambda = Omega2/2 (+ Delta^2/Omega2 with `second_order`) and
    mu = d_par Ez / 2 + 3 d_perp Ex / 2.  Its eigenstates are the dressed
    states; exp(-i H t) gives the dressed-frame evolution of a state
    expressed in the bare basis.
    """
    lam, mu = _splitting_terms(constants, fields, drive, second_order)
    return lam * (SZ2 - SY @ SY) + mu * SX @ SX


def dressed_hamiltonian(constants, fields, drive, second_order=False):
    """Dressed-frame Hamiltonian in the dressed basis
    (|+1>_d, |0>_d, |-1>_d): diag(lambda + mu, 0, -lambda + mu).

    With `second_order` the Delta^2/Omega2 correction to the splitting is
    included.  Warns (RwaHierarchyWarning) when the frequency hierarchy
    the model relies on is violated; the validation suite deliberately
    drives it into that regime.
    """
    _warn_hierarchy(constants, fields, drive)
    lam, mu = _splitting_terms(constants, fields, drive, second_order)
    return np.diag([lam + mu, 0.0, -lam + mu]).astype(complex)


def transition_frequencies(constants, fields, drive, second_order=False):
    """Dressed transition frequencies (omega_plus, omega_minus) between
    |0>_d and |+1>_d / |-1>_d.  Their difference is d_par Ez + 3 d_perp Ex,
    the electric-field observable."""
    lam, mu = _splitting_terms(constants, fields, drive, second_order)
    return lam + mu, lam - mu


def dressed_to_bare(matrix_dressed):
    """Rewrite a dressed-basis matrix in the bare (|+1>,|0>,|-1>) basis."""
    return _DRESSED_COLUMNS @ matrix_dressed @ _DRESSED_COLUMNS.conj().T


def frame_transformations(drive: DriveParameters, t: float,
                          base_frequency: float | None = None):
    """Rotating-frame unitaries (U1, U2) at time t.

    U1 = exp[i (f t + (2 Omega2/Omega1) sin(Omega1 t)) Sz^2] removes the
    modulated carrier; U2 = exp[i (Omega1/2) t Sx] removes the dressed
    Rabi rotation.  Applying U2 U1 to an exact lab-frame state rotates it
    into the frame where the dressed model is static.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t!r}")
    if base_frequency is None:
        base_frequency = (drive.base_frequency if drive.base_frequency is not None
                          else NvConstants().zfs)
    phi = float(drive_phase(drive, t, base_frequency))
    u1 = np.diag(np.exp(1j * phi * np.diag(SZ2.real))).astype(complex)
    u2 = matrix_exponential(SX, -0.5 * drive.omega1 * t)
    return u1, u2
