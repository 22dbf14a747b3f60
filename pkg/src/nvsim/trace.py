"""Sampled Ramsey signals and their on-disk form.

A SignalTrace serializes to a two-column CSV (`time_s,signal`, full
precision) with run metadata in a JSON sidecar next to it, so any plotting
tool can consume the data without this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["SignalTrace", "save_trace", "load_trace", "metadata_path"]

_VALUE_BAND = (-0.05, 1.05)  # fit-noise tolerance around physical [0, 1]


@dataclass(frozen=True)
class SignalTrace:
    """Time grid plus readout-probability samples.

    sampling is "dense" for free grids or "undersampled" for grids locked
    to the drive period; undersampled traces carry that period.
    """

    times: np.ndarray
    values: np.ndarray
    sampling: str = "dense"
    undersample_period: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or values.ndim != 1 or len(times) != len(values):
            raise ValueError("times and values must be 1-d arrays of equal length")
        if len(times) and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if len(values) and (values.min() < _VALUE_BAND[0] or values.max() > _VALUE_BAND[1]):
            raise ValueError(
                f"signal values outside the tolerated band {_VALUE_BAND}: "
                f"[{values.min():.4f}, {values.max():.4f}]"
            )
        if self.sampling not in ("dense", "undersampled"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "undersampled":
            if self.undersample_period is None or self.undersample_period <= 0:
                raise ValueError("undersampled traces need a positive undersample_period")

    def __len__(self):
        return len(self.times)

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def save_trace(trace: SignalTrace, csv_path) -> Path:
    """Write `time_s,signal` CSV plus a `<name>.meta.json` sidecar.

    Full-precision decimal output; byte-identical across runs for
    identical traces.
    """
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["time_s,signal"]
    lines.extend(f"{t:.17g},{v:.17g}" for t, v in zip(trace.times, trace.values))
    csv_path.write_text("\n".join(lines) + "\n")

    meta = dict(trace.metadata)
    meta["sampling"] = trace.sampling
    if trace.undersample_period is not None:
        meta["undersample_period_s"] = trace.undersample_period
    metadata_path(csv_path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return csv_path


def load_trace(csv_path) -> SignalTrace:
    """Read a trace written by save_trace (metadata sidecar optional)."""
    csv_path = Path(csv_path)
    rows = csv_path.read_text().strip().splitlines()
    if not rows or rows[0] != "time_s,signal":
        raise ValueError(f"{csv_path} is not a signal-trace CSV")
    data = np.array([[float(x) for x in row.split(",")] for row in rows[1:]], dtype=float)
    times = data[:, 0] if len(data) else np.empty(0)
    values = data[:, 1] if len(data) else np.empty(0)
    meta_file = metadata_path(csv_path)
    metadata = {}
    sampling = "dense"
    period = None
    if meta_file.exists():
        metadata = json.loads(meta_file.read_text())
        sampling = metadata.pop("sampling", "dense")
        period = metadata.pop("undersample_period_s", None)
    return SignalTrace(times, values, sampling=sampling,
                       undersample_period=period, metadata=metadata)
