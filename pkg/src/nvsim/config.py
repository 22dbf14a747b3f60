"""Run configuration: one JSON document describing a complete experiment.

Every physical quantity in the document carries an explicit unit suffix in
its key name (`_mhz`, `_ut`, `_v_per_cm`, ...) and is converted exactly
once, here, to the package's internal units (angular rad/s, Tesla, V/cm,
seconds).  Unknown keys are rejected so typos cannot silently change a
run.  Parsing then serializing yields a canonical document; re-parsing
that document gives an equal configuration (round-trip idempotence).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .hamiltonians import TWO_PI, DriveParameters, FieldEnvironment, NvConstants
from .propagator import PropagationConfig

__all__ = [
    "RamseySettings",
    "ScanSettings",
    "NoiseSettings",
    "KappaSettings",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "load_config",
]

_SCAN_AXES = ("Ex", "Ez", "Bz", "voltage")
_ENGINES = ("analytic", "gates", "full")


@dataclass(frozen=True)
class RamseySettings:
    span: float = 2e-6
    sample_dt: float = 1e-8
    times: tuple | None = None  # explicit grid (s); empty tuple = no-op run
    dense: bool = True
    undersampled: bool = False
    n_max: int | None = None
    engine: str = "analytic"
    second_order: bool = False
    write_spectrum: bool = False


@dataclass(frozen=True)
class ScanSettings:
    axis: str
    values: tuple
    n_max: int = 256
    engine: str = "analytic"
    voltage_to_ex_v_per_cm: float = 1.0
    voltage_to_ez_v_per_cm: float = 0.0


@dataclass(frozen=True)
class NoiseSettings:
    sigma: float  # V/cm
    n_samples: int = 10_000
    span_t2_multiples: float = 3.0
    n_points: int = 240


@dataclass(frozen=True)
class KappaSettings:
    kappa_d: float = 5.7
    kappa_air: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    constants: NvConstants
    fields: FieldEnvironment
    drive: DriveParameters
    propagation: PropagationConfig
    ramsey: RamseySettings
    scan: ScanSettings | None
    noise: NoiseSettings | None
    kappa: KappaSettings
    output_dir: str
    prefix: str
    seed: int


class _Section:
    """Typed key extraction with unknown-key rejection."""

    def __init__(self, name, mapping):
        if not isinstance(mapping, dict):
            raise ConfigError(f"section {name!r} must be a JSON object")
        self.name = name
        self.data = dict(mapping)

    def take(self, key, default=None, required=False, kind=None):
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.name}: missing required key {key!r}")
            return default
        value = self.data.pop(key)
        if value is None and not required:
            return default
        if kind == "number":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{self.name}.{key}: expected a number, got {value!r}")
            value = float(value)
            if not np.isfinite(value):
                raise ConfigError(f"{self.name}.{key}: must be finite")
        elif kind == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{self.name}.{key}: expected an integer, got {value!r}")
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"{self.name}.{key}: expected a boolean, got {value!r}")
        elif kind == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{self.name}.{key}: expected a string, got {value!r}")
        elif kind == "list":
            if not isinstance(value, list):
                raise ConfigError(f"{self.name}.{key}: expected a list, got {value!r}")
        return value

    def take_unit(self, stem, variants, default=0.0):
        """One quantity accepted under alternative unit suffixes.

        variants: {suffix: factor-to-internal-units}; at most one may be
        present in the document.
        """
        present = [s for s in variants if f"{stem}_{s}" in self.data]
        if len(present) > 1:
            raise ConfigError(
                f"{self.name}: give {stem!r} in only one unit, found "
                + ", ".join(f"{stem}_{s}" for s in present)
            )
        if not present:
            return default
        suffix = present[0]
        raw = self.take(f"{stem}_{suffix}", kind="number")
        return default if raw is None else raw * variants[suffix]

    def finish(self):
        if self.data:
            raise ConfigError(f"{self.name}: unknown keys {sorted(self.data)}")


_B_UNITS = {"ut": 1e-6, "t": 1.0}
_E_UNITS = {"v_per_cm": 1.0, "v_per_m": 1e-2}


def _parse_nv(raw):
    sec = _Section("nv", raw)
    constants = NvConstants.from_cyclic(
        zfs_hz=1e9 * sec.take("zfs_ghz", 2.87, kind="number"),
        d_par_hz_cm_per_v=sec.take("d_par_hz_cm_per_v", 0.35, kind="number"),
        d_perp_hz_cm_per_v=sec.take("d_perp_hz_cm_per_v", 17.0, kind="number"),
        gamma_hz_per_t=1e9 * sec.take("gamma_ghz_per_t", 28.03, kind="number"),
    )
    sec.finish()
    return constants


def _parse_fields(raw):
    sec = _Section("fields", raw)
    kwargs = {}
    for comp in ("bx", "by", "bz"):
        kwargs[comp] = sec.take_unit(comp, _B_UNITS)
    for comp in ("ex", "ey", "ez"):
        kwargs[comp] = sec.take_unit(comp, _E_UNITS)
    sec.finish()
    return FieldEnvironment(**kwargs)


def _parse_drive(raw):
    sec = _Section("drive", raw)
    omega1 = sec.take("omega1_mhz", required=True, kind="number")
    omega2 = sec.take("omega2_mhz", required=True, kind="number")
    base_ghz = sec.take("base_frequency_ghz", kind="number")
    sec.finish()
    try:
        return DriveParameters(
            omega1=TWO_PI * 1e6 * omega1,
            omega2=TWO_PI * 1e6 * omega2,
            base_frequency=None if base_ghz is None else TWO_PI * 1e9 * base_ghz,
        )
    except ValueError as exc:
        raise ConfigError(f"drive: {exc}") from exc


def _parse_propagation(raw):
    sec = _Section("propagation", raw)
    kwargs = dict(
        dt=1e-12 * sec.take("dt_ps", 5.0, kind="number"),
        order=sec.take("order", "midpoint", kind="str"),
        frame=sec.take("frame", "lab", kind="str"),
        unitarity_check_interval=sec.take("unitarity_check_interval", 200_000, kind="int"),
    )
    sec.finish()
    try:
        return PropagationConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"propagation: {exc}") from exc


def _check_engine(name, engine):
    if engine not in _ENGINES:
        raise ConfigError(f"{name}: unknown engine {engine!r}, expected one of {_ENGINES}")
    return engine


def _parse_ramsey(raw):
    sec = _Section("ramsey", raw)
    times_us = sec.take("times_us", kind="list")
    times = None
    if times_us is not None:
        try:
            times = tuple(1e-6 * float(t) for t in times_us)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ramsey.times_us: {exc}") from exc
        if any(not np.isfinite(t) or t < 0 for t in times):
            raise ConfigError("ramsey.times_us: entries must be finite and >= 0")
        if len(times) > 1 and any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("ramsey.times_us: must be strictly increasing")
    settings = RamseySettings(
        span=1e-6 * sec.take("span_us", 2.0, kind="number"),
        sample_dt=1e-9 * sec.take("sample_ns", 10.0, kind="number"),
        times=times,
        dense=sec.take("dense", True, kind="bool"),
        undersampled=sec.take("undersampled", False, kind="bool"),
        n_max=sec.take("n_max", kind="int"),
        engine=_check_engine("ramsey", sec.take("engine", "analytic", kind="str")),
        second_order=sec.take("second_order", False, kind="bool"),
        write_spectrum=sec.take("write_spectrum", False, kind="bool"),
    )
    sec.finish()
    if settings.span <= 0 or settings.sample_dt <= 0:
        raise ConfigError("ramsey: span_us and sample_ns must be > 0")
    if settings.n_max is not None and settings.n_max < 2:
        raise ConfigError("ramsey.n_max must be >= 2")
    return settings


def _parse_scan(raw):
    if raw is None:
        return None
    sec = _Section("scan", raw)
    axis = sec.take("axis", required=True, kind="str")
    if axis not in _SCAN_AXES:
        raise ConfigError(f"scan.axis must be one of {_SCAN_AXES}, got {axis!r}")
    values = sec.take("values", required=True, kind="list")
    try:
        values = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scan.values: {exc}") from exc
    if any(not np.isfinite(v) for v in values):
        raise ConfigError("scan.values must be finite")
    settings = ScanSettings(
        axis=axis,
        values=values,
        n_max=sec.take("n_max", 256, kind="int"),
        engine=_check_engine("scan", sec.take("engine", "analytic", kind="str")),
        voltage_to_ex_v_per_cm=sec.take("voltage_to_ex_v_per_cm", 1.0, kind="number"),
        voltage_to_ez_v_per_cm=sec.take("voltage_to_ez_v_per_cm", 0.0, kind="number"),
    )
    sec.finish()
    if settings.n_max < 2:
        raise ConfigError("scan.n_max must be >= 2")
    return settings


def _parse_noise(raw):
    if raw is None:
        return None
    sec = _Section("noise", raw)
    settings = NoiseSettings(
        sigma=sec.take_unit("sigma", _E_UNITS, default=None),
        n_samples=sec.take("n_samples", 10_000, kind="int"),
        span_t2_multiples=sec.take("span_t2_multiples", 3.0, kind="number"),
        n_points=sec.take("n_points", 240, kind="int"),
    )
    sec.finish()
    if settings.sigma is None or settings.sigma < 0:
        raise ConfigError("noise: sigma_v_per_cm (>= 0) is required")
    if settings.n_samples < 100:
        raise ConfigError("noise.n_samples must be >= 100")
    if settings.n_points < 16 or settings.span_t2_multiples <= 0:
        raise ConfigError("noise: n_points >= 16 and span_t2_multiples > 0 required")
    return settings


def _parse_kappa(raw):
    sec = _Section("fit_kappa", raw or {})
    settings = KappaSettings(
        kappa_d=sec.take("kappa_d", 5.7, kind="number"),
        kappa_air=sec.take("kappa_air", 1.0, kind="number"),
    )
    sec.finish()
    if settings.kappa_d < 1 or settings.kappa_air < 1:
        raise ConfigError("fit_kappa: permittivities must be >= 1")
    return settings


def parse_config(doc: dict) -> RunConfig:
    """Validate a configuration document and convert to internal units."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    top = _Section("config", doc)
    constants = _parse_nv(top.take("nv", {}))
    fields = _parse_fields(top.take("fields", {}))
    drive_raw = top.take("drive", required=True)
    drive = _parse_drive(drive_raw)
    propagation = _parse_propagation(top.take("propagation", {}))
    ramsey = _parse_ramsey(top.take("ramsey", {}))
    scan = _parse_scan(top.take("scan"))
    noise = _parse_noise(top.take("noise"))
    kappa = _parse_kappa(top.take("fit_kappa"))
    out = _Section("output", top.take("output", {}))
    output_dir = out.take("dir", "out", kind="str")
    prefix = out.take("prefix", "run", kind="str")
    out.finish()
    seed = top.take("seed", 0, kind="int")
    top.finish()
    return RunConfig(
        constants=constants,
        fields=fields,
        drive=drive,
        propagation=propagation,
        ramsey=ramsey,
        scan=scan,
        noise=noise,
        kappa=kappa,
        output_dir=output_dir,
        prefix=prefix,
        seed=seed,
    )


def serialize_config(cfg: RunConfig) -> dict:
    """Canonical JSON document for a RunConfig; parse(serialize(cfg)) == cfg."""
    doc = {
        "nv": {
            "zfs_ghz": cfg.constants.zfs / (TWO_PI * 1e9),
            "d_par_hz_cm_per_v": cfg.constants.d_par / TWO_PI,
            "d_perp_hz_cm_per_v": cfg.constants.d_perp / TWO_PI,
            "gamma_ghz_per_t": cfg.constants.gamma / (TWO_PI * 1e9),
        },
        "fields": {
            "bx_ut": cfg.fields.bx / 1e-6,
            "by_ut": cfg.fields.by / 1e-6,
            "bz_ut": cfg.fields.bz / 1e-6,
            "ex_v_per_cm": cfg.fields.ex,
            "ey_v_per_cm": cfg.fields.ey,
            "ez_v_per_cm": cfg.fields.ez,
        },
        "drive": {
            "omega1_mhz": cfg.drive.omega1 / (TWO_PI * 1e6),
            "omega2_mhz": cfg.drive.omega2 / (TWO_PI * 1e6),
            "base_frequency_ghz": (
                None if cfg.drive.base_frequency is None
                else cfg.drive.base_frequency / (TWO_PI * 1e9)
            ),
        },
        "propagation": {
            "dt_ps": cfg.propagation.dt / 1e-12,
            "order": cfg.propagation.order,
            "frame": cfg.propagation.frame,
            "unitarity_check_interval": cfg.propagation.unitarity_check_interval,
        },
        "ramsey": {
            "span_us": cfg.ramsey.span / 1e-6,
            "sample_ns": cfg.ramsey.sample_dt / 1e-9,
            "times_us": (
                None if cfg.ramsey.times is None
                else [t / 1e-6 for t in cfg.ramsey.times]
            ),
            "dense": cfg.ramsey.dense,
            "undersampled": cfg.ramsey.undersampled,
            "n_max": cfg.ramsey.n_max,
            "engine": cfg.ramsey.engine,
            "second_order": cfg.ramsey.second_order,
            "write_spectrum": cfg.ramsey.write_spectrum,
        },
        "fit_kappa": {
            "kappa_d": cfg.kappa.kappa_d,
            "kappa_air": cfg.kappa.kappa_air,
        },
        "output": {"dir": cfg.output_dir, "prefix": cfg.prefix},
        "seed": cfg.seed,
    }
    if cfg.scan is not None:
        doc["scan"] = {
            "axis": cfg.scan.axis,
            "values": list(cfg.scan.values),
            "n_max": cfg.scan.n_max,
            "engine": cfg.scan.engine,
            "voltage_to_ex_v_per_cm": cfg.scan.voltage_to_ex_v_per_cm,
            "voltage_to_ez_v_per_cm": cfg.scan.voltage_to_ez_v_per_cm,
        }
    if cfg.noise is not None:
        doc["noise"] = {
            "sigma_v_per_cm": cfg.noise.sigma,
            "n_samples": cfg.noise.n_samples,
            "span_t2_multiples": cfg.noise.span_t2_multiples,
            "n_points": cfg.noise.n_points,
        }
    return doc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
