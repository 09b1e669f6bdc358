from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ringside.core import EnsemblePrediction, Interval, ProbVector
from ringside.engine import EngineConfig, MarginModel
from ringside.fusion import FusionConfig, SensorReading

# The three-member dropout ensemble used throughout the uncertainty examples.
UQ_MEMBERS = (
    ProbVector([0.60, 0.25, 0.15]),
    ProbVector([0.65, 0.20, 0.15]),
    ProbVector([0.50, 0.30, 0.20]),
)


@pytest.fixture
def uq_ensemble() -> EnsemblePrediction:
    return EnsemblePrediction(UQ_MEMBERS)


@pytest.fixture
def gen4_config() -> FusionConfig:
    return FusionConfig(
        alpha_p=0.5, alpha_i=0.3, alpha_v=0.2, scale_s=100.0, thresholds={"default": 65.0}
    )


@pytest.fixture
def gen4_reading() -> SensorReading:
    return SensorReading(
        pressure=Interval(0.78, 0.86),
        imu=Interval(0.60, 0.70),
        vision=Interval(0.50, 0.58),
    )


@pytest.fixture
def borderline_reading() -> SensorReading:
    return SensorReading(
        pressure=Interval(0.72, 0.80),
        imu=Interval(0.55, 0.63),
        vision=Interval(0.48, 0.54),
    )


@pytest.fixture
def engine_config(gen4_config: FusionConfig) -> EngineConfig:
    return EngineConfig(
        fusion=gen4_config,
        margin=MarginModel(
            theta_p=Interval(2.1, 2.5),
            theta_i=Interval(1.3, 1.7),
            theta_v=Interval(0.8, 1.2),
            bias=-2.2,
        ),
        tau=0.70,
    )
