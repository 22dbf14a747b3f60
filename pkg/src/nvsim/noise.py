"""Quasi-static electric-noise ensembles and dielectric-screening analysis.

The noise model: each protocol shot sees one frozen electric-field sample
with i.i.d. Gaussian components; averaging the under-sampled Ramsey signal
over shots yields a Gaussian envelope

    S(t) = (1 + cos((Omega1 - Omega2) t / 2) exp(-t^2 / T2*^2)) / 2,
    1/T2* = d_eff sigma / sqrt(2),
    d_eff = sqrt((3 d_perp / 2)^2 + (d_par / 2)^2),

so the dephasing rate is linear in the field noise magnitude.  Covering
the surface with a dielectric (permittivity kappa_ext) screens the surface
noise channel by (kappa_d + kappa_air)/(kappa_d + kappa_ext), which gives
the two-channel rate model fitted here:

    1/T2*(kappa_ext) = sqrt(F^2 + ((kappa_d + kappa_air)/(kappa_d + kappa_ext))^2 S^2)

with F the kappa-independent noise floor and S the in-air surface rate.

Random numbers come from numpy's counter-based Philox generator with the
seed recorded in trace metadata, so ensembles are bit-reproducible and can
be partitioned deterministically across workers.
"""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .errors import DegenerateDesign
from .hamiltonians import DriveParameters, NvConstants
from .trace import SignalTrace

__all__ = [
    "effective_dipole",
    "t2_star_closed_form",
    "dephasing_closed_form",
    "GaussianFieldNoise",
    "ensemble_dephasing_trace",
    "DielectricModel",
    "DielectricFit",
    "t2star_model",
    "fit_dielectric_model",
    "fit_pure_inverse",
    "noise_ratio",
    "Delta2Fluctuations",
    "delta2_dephasing_trace",
    "temperature_budget",
]

_ENSEMBLE_CHUNK = 2048


def effective_dipole(constants: NvConstants) -> float:
    """Effective dipole moment sqrt((3 d_perp/2)^2 + (d_par/2)^2) mapping
    isotropic field noise to the dephasing rate; angular (rad/s)/(V/cm)."""
    return float(np.hypot(1.5 * constants.d_perp, 0.5 * constants.d_par))


def t2_star_closed_form(constants: NvConstants, sigma: float) -> float:
    """Gaussian-ensemble dephasing time sqrt(2)/(d_eff sigma), seconds."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0 for a finite dephasing time")
    return float(np.sqrt(2.0) / (effective_dipole(constants) * sigma))


def dephasing_closed_form(constants, drive, sigma, t_grid):
    """Closed-form ensemble-averaged under-sampled signal values."""
    t = np.asarray(t_grid, dtype=float)
    envelope = np.exp(-0.5 * (effective_dipole(constants) * sigma * t) ** 2)
    return 0.5 * (1.0 + np.cos(0.5 * (drive.omega1 - drive.omega2) * t) * envelope)


@dataclass(frozen=True)
class GaussianFieldNoise:
    """Isotropic quasi-static field noise: per-component standard
    deviation sigma (V/cm), generator seed, and ensemble size."""

    sigma: float
    seed: int = 0
    n_samples: int = 10_000

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")

    def sample_fields(self):
        """(n_samples, 3) array of (Ex, Ey, Ez) draws, deterministic in seed."""
        rng = np.random.Generator(np.random.Philox(self.seed))
        return rng.normal(0.0, self.sigma, size=(self.n_samples, 3)) if self.sigma > 0 \
            else np.zeros((self.n_samples, 3))


def ensemble_dephasing_trace(constants, drive, noise: GaussianFieldNoise, t_grid,
                             metadata=None) -> SignalTrace:
    """Monte-Carlo average of the under-sampled Ramsey signal over i.i.d.
    Gaussian field samples, one frozen sample per shot.

    Each member is evaluated through the analytic under-sampled formula:
    only Ex and Ez move the surviving frequency (Ey enters the signal only
    through the second-order detuning, which the under-sampled line does
    not see at first order).  Deterministic for a given seed.
    """
    if noise.n_samples < 100:
        raise ValueError("ensemble operations need n_samples >= 100")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0:
        raise ValueError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")

    fields = noise.sample_fields()
    # Surviving oscillation frequency per member: Omega1/2 - omega_plus(E).
    omega_plus = (
        0.5 * drive.omega2
        + 0.5 * (constants.d_par * fields[:, 2] + 3.0 * constants.d_perp * fields[:, 0])
    )
    freq = 0.5 * drive.omega1 - omega_plus

    total = np.zeros(len(t))
    for start in range(0, noise.n_samples, _ENSEMBLE_CHUNK):
        block = freq[start:start + _ENSEMBLE_CHUNK]
        total += np.cos(np.outer(block, t)).sum(axis=0)
    values = 0.5 * (1.0 + total / noise.n_samples)

    meta = {
        "engine": "ensemble-analytic",
        "sigma_v_per_cm": noise.sigma,
        "seed": noise.seed,
        "n_samples": noise.n_samples,
        "omega1_rad_per_s": drive.omega1,
        "omega2_rad_per_s": drive.omega2,
    }
    if metadata:
        meta.update(metadata)
    return SignalTrace(t, values, sampling="undersampled",
                       undersample_period=2.0 * np.pi / drive.omega1, metadata=meta)


@dataclass(frozen=True)
class DielectricModel:
    """Two-channel dephasing-rate model: kappa-independent floor F and
    surface rate S (both in the caller's rate units, conventionally Hz),
    screened by the cover permittivity."""

    noise_floor: float
    surface_amplitude: float
    kappa_d: float = 5.7
    kappa_air: float = 1.0

    def __post_init__(self):
        if self.noise_floor < 0 or self.surface_amplitude < 0:
            raise ValueError("noise_floor and surface_amplitude must be >= 0")
        if self.kappa_d < 1 or self.kappa_air < 1:
            raise ValueError("permittivities must be >= 1")


def t2star_model(kappa_ext: float, model: DielectricModel) -> float:
    """Dephasing rate at cover permittivity kappa_ext:
    sqrt(F^2 + ((kappa_d + kappa_air)/(kappa_d + kappa_ext))^2 S^2).
    Nonincreasing in kappa_ext, approaching F from above."""
    if kappa_ext < 1:
        raise ValueError(f"kappa_ext must be >= 1, got {kappa_ext!r}")
    screen = (model.kappa_d + model.kappa_air) / (model.kappa_d + kappa_ext)
    return float(np.hypot(model.noise_floor, screen * model.surface_amplitude))


@dataclass(frozen=True)
class DielectricFit:
    """Fitted DielectricModel with 1-sigma uncertainties and the residual
    norm of the returned parameters (weighted, in rate units)."""

    model: DielectricModel
    noise_floor_err: float
    surface_amplitude_err: float
    residual_norm: float

    def to_json_dict(self):
        return {
            "model": "dielectric_screening",
            "noise_floor_hz": self.model.noise_floor,
            "surface_amplitude_hz": self.model.surface_amplitude,
            "noise_floor_err_hz": self.noise_floor_err,
            "surface_amplitude_err_hz": self.surface_amplitude_err,
            "kappa_d": self.model.kappa_d,
            "kappa_air": self.model.kappa_air,
            "residual_norm": self.residual_norm,
        }


def _parse_points(points):
    kappas, rates, errs = [], [], []
    for row in points:
        row = tuple(row)
        if len(row) == 2:
            k, r = row
            e = None
        elif len(row) == 3:
            k, r, e = row
        else:
            raise ValueError("points must be (kappa, rate[, rate_err]) tuples")
        if k < 1:
            raise ValueError(f"kappa_ext must be >= 1, got {k!r}")
        if r < 0:
            raise ValueError("rates must be >= 0")
        kappas.append(float(k))
        rates.append(float(r))
        errs.append(None if e is None else float(e))
    have_errs = [e is not None for e in errs]
    if any(have_errs) and not all(have_errs):
        raise ValueError("either all points carry uncertainties or none do")
    err_arr = np.array([e for e in errs], dtype=float) if all(have_errs) else None
    if err_arr is not None and np.any(err_arr <= 0):
        raise ValueError("rate uncertainties must be > 0")
    return np.array(kappas), np.array(rates), err_arr


def fit_dielectric_model(points, kappa_d: float = 5.7, kappa_air: float = 1.0) -> DielectricFit:
    """Weighted least-squares fit of (F, S) to (kappa_ext, rate[, err]) data.

    In squared-rate coordinates the model is exactly linear,
    rate^2 = F^2 + g(kappa)^2 S^2, so the fit is a closed-form weighted
    linear solve (weights propagated from the rate uncertainties);
    uncertainties on F and S follow by propagation, switching to the
    square-root scale sqrt(sigma_p) when a parameter is consistent with
    zero (where the derivative-based propagation degenerates).

    Needs at least two points with distinct kappa_ext; raises
    DegenerateDesign when all kappa coincide.
    """
    kappas, rates, errs = _parse_points(points)
    if len(kappas) < 2:
        raise ValueError("need at least 2 points to determine (F, S)")
    if np.unique(kappas).size < 2:
        raise DegenerateDesign("all kappa_ext values coincide; (F, S) are not separable")

    g = (kappa_d + kappa_air) / (kappa_d + kappas)
    design = np.column_stack([np.ones_like(g), g * g])
    y = rates * rates
    if errs is not None:
        w = 1.0 / (2.0 * np.maximum(rates, 1e-300) * errs) ** 2
    else:
        w = np.ones_like(y)

    wd = design * w[:, None]
    normal = design.T @ wd
    beta = np.linalg.solve(normal, wd.T @ y)
    cov = np.linalg.inv(normal)
    if errs is None and len(y) > 2:
        resid_sq = y - design @ beta
        cov = cov * float(resid_sq @ resid_sq) / (len(y) - 2)

    p, q = beta
    sig_p, sig_q = np.sqrt(np.maximum(np.diag(cov), 0.0))
    floor = float(np.sqrt(max(p, 0.0)))
    surface = float(np.sqrt(max(q, 0.0)))

    def propagated(value, sig_sq):
        # sig_sq is the std of the squared parameter (units rate^2); away
        # from zero propagate through the square root, otherwise report the
        # rate scale at which the squared parameter separates from zero.
        if sig_sq <= 0:
            return 0.0
        zero_scale = float(np.sqrt(sig_sq))
        if value > zero_scale:
            return float(sig_sq / (2.0 * value))
        return zero_scale

    model = DielectricModel(floor, surface, kappa_d, kappa_air)
    pred = np.array([t2star_model(k, model) for k in kappas])
    if errs is not None:
        residual = (pred - rates) / errs
    else:
        residual = pred - rates
    return DielectricFit(
        model=model,
        noise_floor_err=propagated(floor, sig_p),
        surface_amplitude_err=propagated(surface, sig_q),
        residual_norm=float(np.linalg.norm(residual)),
    )


def fit_pure_inverse(points, kappa_d: float = 5.7) -> float:
    """Amplitude C of the floorless model rate = C/(kappa_d + kappa_ext),
    weighted least squares; the comparison curve for the screening fit."""
    kappas, rates, errs = _parse_points(points)
    g = 1.0 / (kappa_d + kappas)
    w = np.ones_like(g) if errs is None else 1.0 / errs**2
    return float((w * rates * g).sum() / (w * g * g).sum())


def noise_ratio(rate_plus0: float, rate_plusminus: float) -> float:
    """Ratio r = rate(+1d,0d) / (rate(+1d,-1d)/2).

    The detuning-squared channel dephases the (+1d, -1d) coherence twice
    as fast as the (+1d, 0d) one, so r >> 1 means electric noise dominates
    that channel.  r = 10 is the conventional reference threshold.
    """
    if rate_plus0 <= 0 or rate_plusminus <= 0:
        raise ValueError("both rates must be > 0")
    return 2.0 * rate_plus0 / rate_plusminus


@dataclass(frozen=True)
class Delta2Fluctuations:
    """Gaussian quasi-static spreads feeding the second-order detuning:
    zero-field-splitting std and Rabi-amplitude std (angular rad/s), and
    axial field std (Tesla)."""

    delta_zfs_std: float = 0.0
    delta_omega1_std: float = 0.0
    bz_std: float = 0.0
    seed: int = 0
    n_samples: int = 10_000

    def __post_init__(self):
        for name in ("delta_zfs_std", "delta_omega1_std", "bz_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


def delta2_dephasing_trace(constants, drive: DriveParameters,
                           fluctuations: Delta2Fluctuations, t_grid,
                           metadata=None) -> SignalTrace:
    """Ensemble-averaged coherence between the two outer dressed states.

    That transition sees noise only through the second-order detuning: its
    frequency is Omega2 + 2 Delta2^2/Omega2, with
    Delta2 = dOmega1/2 + (gamma Bz)^2/Omega1 + dD^2/(4 Omega1) per member.
    Requires Omega2 > 0.
    """
    if drive.omega2 <= 0:
        raise ValueError("delta2 dephasing needs omega2 > 0")
    if fluctuations.n_samples < 100:
        raise ValueError("ensemble operations need n_samples >= 100")
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be a non-empty strictly increasing 1-d array")

    rng = np.random.Generator(np.random.Philox(fluctuations.seed))
    n = fluctuations.n_samples
    d_zfs = rng.normal(0.0, fluctuations.delta_zfs_std, n) if fluctuations.delta_zfs_std else np.zeros(n)
    d_om1 = rng.normal(0.0, fluctuations.delta_omega1_std, n) if fluctuations.delta_omega1_std else np.zeros(n)
    bz = rng.normal(0.0, fluctuations.bz_std, n) if fluctuations.bz_std else np.zeros(n)

    delta2 = (
        0.5 * d_om1
        + (constants.gamma * bz) ** 2 / drive.omega1
        + d_zfs**2 / (4.0 * drive.omega1)
    )
    freq = drive.omega2 + 2.0 * delta2**2 / drive.omega2

    total = np.zeros(len(t))
    for start in range(0, n, _ENSEMBLE_CHUNK):
        total += np.cos(np.outer(freq[start:start + _ENSEMBLE_CHUNK], t)).sum(axis=0)
    values = 0.5 * (1.0 + total / n)

    meta = {
        "engine": "delta2-ensemble",
        "delta_zfs_std_rad_per_s": fluctuations.delta_zfs_std,
        "delta_omega1_std_rad_per_s": fluctuations.delta_omega1_std,
        "bz_std_t": fluctuations.bz_std,
        "seed": fluctuations.seed,
        "n_samples": n,
        "omega1_rad_per_s": drive.omega1,
        "omega2_rad_per_s": drive.omega2,
    }
    if metadata:
        meta.update(metadata)
    return SignalTrace(t, values, metadata=meta)


def temperature_budget(delta_zfs_std: float) -> float:
    """Worst-case dephasing-rate contribution of zero-field-splitting
    fluctuations.

    The splitting fluctuation enters the dressed transition at dD/2, so a
    Gaussian spread of std s bounds the rate by s/(2 sqrt(2)) (same units
    as the input; the Gaussian envelope convention exp(-(t/T2*)^2)).
    """
    if delta_zfs_std < 0:
        raise ValueError("delta_zfs_std must be >= 0")
    return float(delta_zfs_std / (2.0 * np.sqrt(2.0)))
