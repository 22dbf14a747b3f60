"""Command-line surface: simulation runs, analysis pipelines, plot data.

Subcommands
    ramsey        dense and/or under-sampled Ramsey traces (CSV + metadata)
    scan          frequency-shift scan over a field axis (CSV + linear fit)
    dephasing     Gaussian-ensemble dephasing trace and its decay fit
    fit-kappa     dielectric-screening fit of a kappa/rate dataset
    validate-rwa  exact-vs-analytic comparison report

Exit codes are a stable contract: 0 success, 2 configuration or input
validation failure, 3 simulation failure, 4 fit failure.  All outputs are
deterministic for a fixed config and seed (byte-identical reruns); plot
emission is data-only CSV, no rendering.

NVSIM_THREADS caps internal parallelism (scan points are independent).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    DegenerateDesign,
    EngineMismatch,
    FitFailure,
    InsufficientSpan,
    NonUniformGrid,
    PropagationError,
    StepSizeTooCoarse,
)
from .hamiltonians import FieldEnvironment, check_rwa_hierarchy, detuning_delta
from .noise import (
    GaussianFieldNoise,
    ensemble_dephasing_trace,
    fit_dielectric_model,
    fit_pure_inverse,
    t2_star_closed_form,
    t2star_model,
)
from .propagator import PropagationConfig, propagate_with_samples
from .sequences import (
    frequency_shift_scan,
    ramsey_signal,
    ramsey_trace,
    undersample_period,
    undersampled_trace,
)
from .spectral import fft_spectrum, fit_damped_sinusoid
from .spin import BRIGHT, DARK, KET_PLUS, KET_ZERO, SX, matrix_exponential
from .trace import SignalTrace, save_trace

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM = 3
EXIT_FIT = 4


def _threads() -> int:
    raw = os.environ.get("NVSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _sanitize(obj):
    """Make an object JSON-safe: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header]
    lines.extend(",".join(f"{x:.17g}" for x in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _out_dir(cfg: RunConfig, args) -> Path:
    return Path(args.out) if args.out else Path(cfg.output_dir)


def _dense_times(settings):
    if settings.times is not None:
        return np.asarray(settings.times, dtype=float)
    n = max(2, int(round(settings.span / settings.sample_dt)))
    return settings.sample_dt * np.arange(n)


def cmd_ramsey(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    engine = args.engine or cfg.ramsey.engine
    prefix = cfg.prefix

    times = _dense_times(cfg.ramsey)
    if len(times) == 0:
        # Explicit no-op run: emit an empty trace and succeed.
        save_trace(SignalTrace(np.empty(0), np.empty(0)), out / f"{prefix}_dense.csv")
        return EXIT_OK

    kwargs = dict(second_order=cfg.ramsey.second_order)
    if engine == "full":
        kwargs["cfg"] = cfg.propagation

    if cfg.ramsey.dense:
        trace = ramsey_trace(cfg.constants, cfg.fields, cfg.drive, times, engine, **kwargs)
        save_trace(trace, out / f"{prefix}_dense.csv")
        if cfg.ramsey.write_spectrum:
            spectrum = fft_spectrum(trace)
            _write_csv(
                out / f"{prefix}_spectrum.csv",
                "frequency_hz,amplitude",
                zip(spectrum.frequencies, spectrum.amplitudes),
            )

    if cfg.ramsey.undersampled:
        period = undersample_period(cfg.drive)
        n_max = cfg.ramsey.n_max or max(2, int(cfg.ramsey.span / period))
        trace_u = undersampled_trace(cfg.constants, cfg.fields, cfg.drive, n_max,
                                     engine, **kwargs)
        save_trace(trace_u, out / f"{prefix}_undersampled.csv")
    return EXIT_OK


def _scan_environments(cfg: RunConfig):
    scan = cfg.scan
    base = cfg.fields
    envs = []
    for v in scan.values:
        kwargs = dict(bx=base.bx, by=base.by, bz=base.bz,
                      ex=base.ex, ey=base.ey, ez=base.ez)
        if scan.axis == "Ex":
            kwargs["ex"] = v
        elif scan.axis == "Ez":
            kwargs["ez"] = v
        elif scan.axis == "Bz":
            kwargs["bz"] = 1e-6 * v  # scan values in microtesla
        else:  # voltage proxy: electrode geometry folded into coefficients
            kwargs["ex"] = scan.voltage_to_ex_v_per_cm * v
            kwargs["ez"] = scan.voltage_to_ez_v_per_cm * v
        envs.append(FieldEnvironment(**kwargs))
    return envs


_SCAN_UNITS = {"Ex": "v_per_cm", "Ez": "v_per_cm", "Bz": "ut", "voltage": "volts"}


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    if cfg.scan is None:
        raise ConfigError("scan command needs a 'scan' section in the config")
    if len(cfg.scan.values) < 2:
        raise ConfigError("scan needs at least 2 values")
    if len(set(cfg.scan.values)) < 2:
        raise ConfigError("scan values are degenerate (all equal)")
    engine = args.engine or cfg.scan.engine
    out = _out_dir(cfg, args)

    envs = _scan_environments(cfg)
    kwargs = {}
    if engine == "full":
        kwargs["cfg"] = cfg.propagation
    points = frequency_shift_scan(cfg.constants, cfg.drive, envs,
                                  n_max=cfg.scan.n_max, engine=engine,
                                  threads=_threads(), **kwargs)

    values = np.asarray(cfg.scan.values, dtype=float)
    shifts = np.array([p.shift_hz for p in points])
    errs = np.array([p.shift_err_hz for p in points])
    _write_csv(out / f"{cfg.prefix}_scan.csv", "value,shift_hz,shift_err_hz",
               zip(values, shifts, errs))

    slope, intercept = np.polyfit(values, shifts, 1)
    model = slope * values + intercept
    ss_res = float(np.sum((shifts - model) ** 2))
    ss_tot = float(np.sum((shifts - shifts.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    two_pi = 2.0 * np.pi
    predicted = {
        "Ex": -1.5 * cfg.constants.d_perp / two_pi,
        "Ez": -0.5 * cfg.constants.d_par / two_pi,
        "Bz": 0.0,
    }.get(cfg.scan.axis)
    summary = {
        "axis": cfg.scan.axis,
        "value_unit": _SCAN_UNITS[cfg.scan.axis],
        "engine": engine,
        "slope_hz_per_unit": float(slope),
        "intercept_hz": float(intercept),
        "r_squared": r_squared,
        "predicted_slope_hz_per_unit": predicted,
        "n_points": len(points),
    }
    _write_json(out / f"{cfg.prefix}_scan_fit.json", summary)
    return EXIT_OK


def cmd_dephasing(args) -> int:
    cfg = load_config(args.config)
    if cfg.noise is None:
        raise ConfigError("dephasing command needs a 'noise' section in the config")
    out = _out_dir(cfg, args)
    seed = args.seed if args.seed is not None else cfg.seed

    period = undersample_period(cfg.drive)
    n_points = cfg.noise.n_points
    if cfg.noise.sigma > 0:
        span = cfg.noise.span_t2_multiples * t2_star_closed_form(cfg.constants, cfg.noise.sigma)
        stride = max(1, int(round(span / (n_points * period))))
    else:
        stride = 1
    times = stride * period * np.arange(n_points)

    noise = GaussianFieldNoise(sigma=cfg.noise.sigma, seed=seed,
                               n_samples=cfg.noise.n_samples)
    trace = ensemble_dephasing_trace(cfg.constants, cfg.drive, noise, times)
    save_trace(trace, out / f"{cfg.prefix}_dephasing.csv")

    fit = fit_damped_sinusoid(trace)
    doc = fit.to_json_dict()
    doc["sigma_v_per_cm"] = cfg.noise.sigma
    doc["seed"] = seed
    doc["n_samples"] = cfg.noise.n_samples
    if cfg.noise.sigma > 0:
        doc["t2_star_closed_form_s"] = t2_star_closed_form(cfg.constants, cfg.noise.sigma)
    _write_json(out / f"{cfg.prefix}_decay_fit.json", doc)
    return EXIT_OK


def _read_kappa_csv(path: Path):
    try:
        rows = path.read_text().strip().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} is empty")
    header = [h.strip() for h in rows[0].split(",")]
    if header[:2] != ["kappa", "rate_hz"]:
        raise ConfigError(f"{path}: expected header 'kappa,rate_hz[,rate_err_hz]'")
    with_err = len(header) > 2 and header[2] == "rate_err_hz"
    points = []
    for line in rows[1:]:
        if not line.strip():
            continue
        parts = [float(x) for x in line.split(",")]
        points.append(tuple(parts[: 3 if with_err else 2]))
    return points


def cmd_fit_kappa(args) -> int:
    cfg = load_config(args.config) if args.config else None
    kappa_d = cfg.kappa.kappa_d if cfg else 5.7
    kappa_air = cfg.kappa.kappa_air if cfg else 1.0
    prefix = cfg.prefix if cfg else "kappa"
    out = Path(args.out) if args.out else Path(cfg.output_dir if cfg else "out")

    points = _read_kappa_csv(Path(args.data))
    if len(points) < 3:
        raise ConfigError(f"need at least 3 kappa points, got {len(points)}")

    fit = fit_dielectric_model(points, kappa_d=kappa_d, kappa_air=kappa_air)
    _write_json(out / f"{prefix}_kappa_fit.json", fit.to_json_dict())

    # Plot data: fitted two-channel curve plus the floorless inverse law.
    c_inverse = fit_pure_inverse(points, kappa_d=kappa_d)
    k_max = max(k for k, *_ in points)
    grid = np.linspace(1.0, max(70.0, 1.2 * k_max), 300)
    rows = (
        (k, t2star_model(k, fit.model), c_inverse / (kappa_d + k))
        for k in grid
    )
    _write_csv(out / f"{prefix}_kappa_curves.csv",
               "kappa,model_hz,pure_inverse_hz", rows)
    return EXIT_OK


def _frame_population_drift(cfg: RunConfig, span: float, n: int = 33) -> float:
    """Max drift of dressed-basis populations of an exact trajectory after
    rotation into the doubly rotating frame (zero fields assumption not
    required; uses the config fields)."""
    times = np.linspace(0.0, span, n)
    states = propagate_with_samples(cfg.constants, cfg.fields, cfg.drive,
                                    KET_PLUS, times, cfg.propagation)
    base = cfg.drive.zfs_or_base(cfg.constants)
    from .hamiltonians import drive_phase

    pops = np.empty((n, 3))
    basis = np.column_stack([BRIGHT, DARK, KET_ZERO])
    for k, t in enumerate(times):
        phi = float(drive_phase(cfg.drive, t, base))
        u1 = np.exp(1j * phi * np.array([1.0, 0.0, 1.0]))
        u2 = matrix_exponential(SX, -0.5 * cfg.drive.omega1 * t)
        psi = u2 @ (u1 * states[k])
        pops[k] = np.abs(basis.conj().T @ psi) ** 2
    return float(np.abs(pops - pops[0]).max())


def _step_halving_infidelity(cfg: RunConfig, span: float = 10e-9) -> float:
    base_cfg = cfg.propagation
    fine = PropagationConfig(dt=base_cfg.dt / 2, order="fourth-order-commutator",
                             frame=base_cfg.frame,
                             unitarity_check_interval=base_cfg.unitarity_check_interval)
    coarse = PropagationConfig(dt=base_cfg.dt, order="fourth-order-commutator",
                               frame=base_cfg.frame,
                               unitarity_check_interval=base_cfg.unitarity_check_interval)
    psi_a = propagate_with_samples(cfg.constants, cfg.fields, cfg.drive,
                                   KET_PLUS, [span], coarse)[0]
    psi_b = propagate_with_samples(cfg.constants, cfg.fields, cfg.drive,
                                   KET_PLUS, [span], fine)[0]
    return float(1.0 - np.abs(np.vdot(psi_a, psi_b)) ** 2)


def cmd_validate_rwa(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    times = _dense_times(cfg.ramsey)
    if len(times) == 0:
        raise ConfigError("validate-rwa needs a non-empty ramsey time grid")

    analytic = ramsey_signal(cfg.constants, cfg.fields, cfg.drive, times, "analytic",
                             second_order=cfg.ramsey.second_order)
    gates = ramsey_signal(cfg.constants, cfg.fields, cfg.drive, times, "gates",
                          second_order=cfg.ramsey.second_order)
    full = ramsey_signal(cfg.constants, cfg.fields, cfg.drive, times, "full",
                         cfg=cfg.propagation)
    rms = float(np.sqrt(np.mean((full - analytic) ** 2)))

    report = {
        "n_times": len(times),
        "span_s": float(times[-1]),
        "rms_full_vs_analytic": rms,
        "max_abs_gates_vs_analytic": float(np.abs(gates - analytic).max()),
        "frame_population_drift": _frame_population_drift(cfg, float(times[-1])),
        "step_halving_infidelity": _step_halving_infidelity(cfg),
        "hierarchy_violations": check_rwa_hierarchy(cfg.constants, cfg.fields, cfg.drive),
        "detuning_rad_per_s": detuning_delta(cfg.constants, cfg.fields, cfg.drive),
        "omega1_rad_per_s": cfg.drive.omega1,
        "omega2_rad_per_s": cfg.drive.omega2,
        "rms_within_0.02": bool(rms < 0.02),
    }
    _write_json(out / f"{cfg.prefix}_rwa_report.json", report)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvsim",
        description="Dressed-state NV electrometry simulator and analysis pipelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True, engine=False):
        p.add_argument("--config", required=needs_config, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        if engine:
            p.add_argument("--engine", choices=("analytic", "gates", "full"),
                           default=None, help="signal engine override")

    p = sub.add_parser("ramsey", help="simulate Ramsey traces")
    common(p, engine=True)
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("scan", help="frequency-shift scan over a field axis")
    common(p, engine=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("dephasing", help="Gaussian-ensemble dephasing and decay fit")
    common(p)
    p.set_defaults(func=cmd_dephasing)

    p = sub.add_parser("fit-kappa", help="dielectric-screening fit of kappa/rate data")
    common(p, needs_config=False)
    p.add_argument("--data", required=True, help="CSV with kappa,rate_hz[,rate_err_hz]")
    p.set_defaults(func=cmd_fit_kappa)

    p = sub.add_parser("validate-rwa", help="exact-vs-analytic comparison report")
    common(p)
    p.set_defaults(func=cmd_validate_rwa)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DegenerateDesign) as exc:
        print(f"nvsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FitFailure, InsufficientSpan, NonUniformGrid) as exc:
        print(f"nvsim: fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (StepSizeTooCoarse, PropagationError, EngineMismatch, ValueError) as exc:
        print(f"nvsim: simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
