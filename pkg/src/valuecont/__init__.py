"""Continuity of discounted value functions of bounded dynamical systems."""
from .bounds import CaseLabel, ContinuityParams, LinearModulus, ConcaveModulus, ModulusCurve
from .systems import ClippedLinear, DomainError, Logistic, MetricInterval, NoisyMap, PowerMap, RngStream, TimeDomain
from .value import RewardSpec, ValueEstimate

__version__ = "0.1.0"

__all__ = [
    "CaseLabel",
    "ContinuityParams",
    "LinearModulus",
    "ConcaveModulus",
    "ModulusCurve",
    "ClippedLinear",
    "DomainError",
    "Logistic",
    "MetricInterval",
    "NoisyMap",
    "PowerMap",
    "RngStream",
    "TimeDomain",
    "RewardSpec",
    "ValueEstimate",
]
