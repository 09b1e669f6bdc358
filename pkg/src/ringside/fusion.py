"""Calibrated, interval-valued sensor fusion producing bounded impact scores.

The fused impact is a convex combination of normalized pressure, IMU and
vision features scaled to an interpretable range; interval endpoints
propagate independently because all weights are nonnegative, so the fused
interval is the tight image of the input box.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .core import Interval
from .errors import ConfigInvalid, InvalidArgument

WEIGHT_SUM_TOL = 1e-12
UNIT = Interval(0.0, 1.0)


@dataclass(frozen=True)
class SensorReading:
    """Normalized pressure / IMU / vision intervals, each within [0, 1]."""

    pressure: Interval
    imu: Interval
    vision: Interval

    def __post_init__(self) -> None:
        for name, iv in (("pressure", self.pressure), ("imu", self.imu), ("vision", self.vision)):
            if iv.lo < 0.0 or iv.hi > 1.0:
                raise InvalidArgument(f"{name} interval {list(iv)} outside [0, 1]")


@dataclass(frozen=True)
class SensorCalibration:
    """Affine map from raw sensor units into [0, 1] plus symmetric drift.

    calibrate(raw) = clip([gain * raw + offset +/- drift], 0, 1)
    """

    gain: float = 1.0
    offset: float = 0.0
    drift: float = 0.0

    def __post_init__(self) -> None:
        if self.drift < 0.0:
            raise ConfigInvalid(f"drift half-width must be >= 0, got {self.drift}")
        if not all(math.isfinite(v) for v in (self.gain, self.offset, self.drift)):
            raise ConfigInvalid("calibration parameters must be finite")

    def calibrate(self, raw: float) -> Interval:
        center = self.gain * raw + self.offset
        lo = min(max(center - self.drift, 0.0), 1.0)
        hi = min(max(center + self.drift, 0.0), 1.0)
        return Interval(lo, hi)


@dataclass(frozen=True)
class FusionConfig:
    """Fusion weights on the simplex, calibration scale and per-division thresholds."""

    alpha_p: float
    alpha_i: float
    alpha_v: float
    scale_s: float
    thresholds: Mapping[str, float]
    calibration: Mapping[str, SensorCalibration] = field(default_factory=dict)

    def __post_init__(self) -> None:
        alphas = (self.alpha_p, self.alpha_i, self.alpha_v)
        if any(a < 0.0 or not math.isfinite(a) for a in alphas):
            raise ConfigInvalid(f"fusion weights must be >= 0 and finite, got {alphas}")
        if abs(math.fsum(alphas) - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigInvalid(f"fusion weights must sum to 1 within {WEIGHT_SUM_TOL}, got {alphas}")
        if self.scale_s <= 0.0 or not math.isfinite(self.scale_s):
            raise ConfigInvalid(f"scale must be > 0, got {self.scale_s}")
        for division, t_w in self.thresholds.items():
            if t_w <= 0.0:
                raise ConfigInvalid(f"threshold for division {division!r} must be > 0, got {t_w}")
        object.__setattr__(self, "thresholds", dict(self.thresholds))
        object.__setattr__(self, "calibration", dict(self.calibration))

    def threshold_for(self, division: str | None) -> float:
        """Impact threshold T_w for a division key, falling back to 'default'."""
        if division is not None and division in self.thresholds:
            return self.thresholds[division]
        if "default" in self.thresholds:
            return self.thresholds["default"]
        raise ConfigInvalid(f"no threshold configured for division {division!r} and no default")


def fuse_point(x_p: float, x_i: float, x_v: float, cfg: FusionConfig) -> float:
    """Fused impact I = s * (alpha_p*x_p + alpha_i*x_i + alpha_v*x_v)."""
    for name, x in (("pressure", x_p), ("imu", x_i), ("vision", x_v)):
        if not (0.0 <= x <= 1.0):
            raise InvalidArgument(f"{name} feature {x} outside [0, 1]")
    return cfg.scale_s * (cfg.alpha_p * x_p + cfg.alpha_i * x_i + cfg.alpha_v * x_v)


def fuse_interval(reading: SensorReading, cfg: FusionConfig) -> Interval:
    """Propagate interval measurements through the fusion: endpoints fuse independently."""
    lo = fuse_point(reading.pressure.lo, reading.imu.lo, reading.vision.lo, cfg)
    hi = fuse_point(reading.pressure.hi, reading.imu.hi, reading.vision.hi, cfg)
    return Interval(lo, hi)


def load_fusion_config(path: str | Path) -> FusionConfig:
    """Load and validate a fusion config from a JSON file.

    Schema::

        {
          "alpha_p": 0.5, "alpha_i": 0.3, "alpha_v": 0.2,
          "scale_s": 100.0,
          "thresholds": {"default": 65.0, "<division>": ...},
          "calibration": {            # optional, per sensor
            "pressure": {"gain": 1.0, "offset": 0.0, "drift": 0.04},
            ...
          }
        }
    """
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"fusion config is not valid JSON: {exc}") from exc
    try:
        calibration = {
            sensor: SensorCalibration(**params)
            for sensor, params in obj.get("calibration", {}).items()
        }
        return FusionConfig(
            alpha_p=float(obj["alpha_p"]),
            alpha_i=float(obj["alpha_i"]),
            alpha_v=float(obj["alpha_v"]),
            scale_s=float(obj["scale_s"]),
            thresholds={k: float(v) for k, v in obj["thresholds"].items()},
            calibration=calibration,
        )
    except KeyError as exc:
        raise ConfigInvalid(f"fusion config missing field: {exc}") from exc
    except TypeError as exc:
        raise ConfigInvalid(f"fusion config field has wrong shape: {exc}") from exc
