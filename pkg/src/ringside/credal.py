"""Imprecise-probability machinery over ensembles of class predictions.

Entropy is reported in nats internally (:func:`nats_to_bits` converts).
Per-class variance uses the population estimator (divide by M), computed in
central form so identical members give exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import EnsemblePrediction, Interval, ProbVector
from .errors import DimensionMismatch, IndexOutOfRange, InvalidArgument

LN2 = math.log(2.0)


@dataclass(frozen=True)
class CredalResult:
    """Ensemble summary: mean, per-class variance/bounds, entropy, credal set."""

    mean: ProbVector
    variance: tuple[float, ...]
    entropy_nats: float
    credal_set: frozenset[int]
    prob_bounds: tuple[Interval, ...]


@dataclass(frozen=True)
class MarginBound:
    """Classifier margin bounded by parameter drift: m in [lo, hi]."""

    margin: Interval


def ensemble_mean(ensemble: EnsemblePrediction) -> ProbVector:
    """Component-wise arithmetic mean of the members; stays on the simplex."""
    k = ensemble.num_classes
    m = ensemble.m
    return ProbVector([math.fsum(member[c] for member in ensemble.members) / m for c in range(k)])


def _population_variance(values: list[float]) -> float:
    # Shift by the first value so identical inputs give exactly zero.
    shifted = [v - values[0] for v in values]
    mu = math.fsum(shifted) / len(shifted)
    return math.fsum((s - mu) ** 2 for s in shifted) / len(shifted)


def ensemble_variance(ensemble: EnsemblePrediction) -> tuple[float, ...]:
    """Per-class population variance over the M members (divide by M)."""
    return tuple(
        _population_variance([member[c] for member in ensemble.members])
        for c in range(ensemble.num_classes)
    )


def predictive_entropy(p: ProbVector) -> float:
    """Shannon entropy -sum p*ln(p) in nats, with 0*ln(0) := 0."""
    return -math.fsum(x * math.log(x) for x in p if x > 0.0)


def nats_to_bits(entropy_nats: float) -> float:
    return entropy_nats / LN2


def credal_set(p: ProbVector, theta: float) -> frozenset[int]:
    """Classes whose probability reaches the membership threshold theta.

    An empty set is legal and signals maximal ambiguity; the engine never
    invents a fallback class.
    """
    if not (0.0 < theta <= 1.0):
        raise InvalidArgument(f"theta must be in (0, 1], got {theta}")
    return frozenset(c for c, x in enumerate(p) if x >= theta)


def _sigmoid(m: float) -> float:
    # Overflow-safe logistic: branch on sign so exp never sees a large positive arg.
    if m >= 0.0:
        return 1.0 / (1.0 + math.exp(-m))
    z = math.exp(m)
    return z / (1.0 + z)


def sigmoid_bounds(bound: MarginBound) -> Interval:
    """Map margin bounds through the logistic; monotone, so endpoints map directly."""
    return Interval(_sigmoid(bound.margin.lo), _sigmoid(bound.margin.hi))


def confidence_interval(ensemble: EnsemblePrediction, class_idx: int) -> Interval:
    """[min, max] of one class probability across the ensemble members."""
    if not 0 <= class_idx < ensemble.num_classes:
        raise IndexOutOfRange(
            f"class {class_idx} outside [0, {ensemble.num_classes - 1}]"
        )
    values = [member[class_idx] for member in ensemble.members]
    return Interval(min(values), max(values))


def uncertainty_decompose(
    ensemble: EnsemblePrediction,
    aleatoric_vars: list[float] | tuple[float, ...] | None = None,
) -> tuple[float, float]:
    """Split predictive variance into (aleatoric, epistemic) parts.

    Epistemic is the population variance across members of the predicted
    class probability (predicted class = argmax of the ensemble mean);
    aleatoric is the mean of the supplied per-member variances, 0 if absent.
    """
    if aleatoric_vars is not None and len(aleatoric_vars) != ensemble.m:
        raise DimensionMismatch(
            f"aleatoric_vars has length {len(aleatoric_vars)}, expected M={ensemble.m}"
        )
    cls = ensemble_mean(ensemble).argmax()
    epistemic = _population_variance([member[cls] for member in ensemble.members])
    aleatoric = 0.0
    if aleatoric_vars is not None:
        if any(v < 0.0 for v in aleatoric_vars):
            raise InvalidArgument("aleatoric variances must be >= 0")
        aleatoric = math.fsum(aleatoric_vars) / len(aleatoric_vars)
    return aleatoric, epistemic


def summarize(ensemble: EnsemblePrediction, theta: float) -> CredalResult:
    """Bundle the standard credal summary for one ensemble."""
    mean = ensemble_mean(ensemble)
    return CredalResult(
        mean=mean,
        variance=ensemble_variance(ensemble),
        entropy_nats=predictive_entropy(mean),
        credal_set=credal_set(mean, theta),
        prob_bounds=tuple(
            confidence_interval(ensemble, c) for c in range(ensemble.num_classes)
        ),
    )
