"""Score normalization, the weighted fitness combination, cosine similarity,
and the percent-change statistic used by the results aggregator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "AESTHETIC_RANGE",
    "CLIP_RANGE",
    "ZeroNormError",
    "RawScores",
    "FitnessWeights",
    "FitnessScore",
    "norm_aesthetic",
    "norm_clip",
    "combine",
    "cosine_similarity",
    "delta_percent",
]

AESTHETIC_RANGE = (1.0, 10.0)
CLIP_RANGE = (-1.0, 1.0)


class ZeroNormError(ValueError):
    """A vector with zero norm has no direction to compare."""


@dataclass(frozen=True)
class RawScores:
    """Backend scores as reported: aesthetic on a 1-10 scale, image/text
    alignment as a cosine in [-1, 1]. Out-of-range values are kept as-is
    and only clamped during normalization."""

    aesthetic: float
    clip: float


@dataclass(frozen=True)
class FitnessWeights:
    """Convex weights on the two normalized score channels."""

    aesthetic: float = 0.4
    clip: float = 0.6

    def __post_init__(self) -> None:
        if math.isnan(self.aesthetic) or math.isnan(self.clip):
            raise ValueError("weights must not be NaN")
        if self.aesthetic < 0 or self.clip < 0:
            raise ValueError(f"weights must be non-negative, got {self}")
        if abs(self.aesthetic + self.clip - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.aesthetic + self.clip}")


@dataclass(frozen=True)
class FitnessScore:
    """Raw scores plus their normalized forms and the weighted combination."""

    raw: RawScores
    norm_aesthetic: float
    norm_clip: float
    combined: float


def _reject_nan(value: float, label: str) -> float:
    value = float(value)
    if math.isnan(value):
        raise ValueError(f"{label} is NaN")
    return value


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def norm_aesthetic(score: float) -> float:
    """Affine map of the 1-10 aesthetic scale onto [0, 1], clamped."""
    score = _reject_nan(score, "aesthetic score")
    return _clamp01((score - AESTHETIC_RANGE[0]) / (AESTHETIC_RANGE[1] - AESTHETIC_RANGE[0]))


def norm_clip(score: float) -> float:
    """Affine map of the [-1, 1] cosine similarity onto [0, 1], clamped."""
    score = _reject_nan(score, "clip score")
    return _clamp01((score - CLIP_RANGE[0]) / (CLIP_RANGE[1] - CLIP_RANGE[0]))


def combine(raw: RawScores, weights: FitnessWeights = FitnessWeights()) -> FitnessScore:
    """Weighted sum of the normalized channels; always lands in [0, 1]."""
    na = norm_aesthetic(raw.aesthetic)
    nc = norm_clip(raw.clip)
    return FitnessScore(
        raw=raw,
        norm_aesthetic=na,
        norm_clip=nc,
        combined=weights.aesthetic * na + weights.clip * nc,
    )


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1] against
    floating-point overshoot. Rejects mismatched lengths, empty vectors and
    zero-norm inputs (the latter with ZeroNormError)."""
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")
    if len(u) == 0:
        raise ValueError("vectors must have at least one component")
    dot = 0.0
    nu = 0.0
    nv = 0.0
    for a, b in zip(u, v):
        a = _reject_nan(a, "vector component")
        b = _reject_nan(b, "vector component")
        dot += a * b
        nu += a * a
        nv += b * b
    if nu == 0.0 or nv == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero-norm vectors")
    return min(1.0, max(-1.0, dot / math.sqrt(nu * nv)))


def delta_percent(new: float, base: float) -> float:
    """Percent change of ``new`` relative to ``base``."""
    new = _reject_nan(new, "new value")
    base = _reject_nan(base, "base value")
    if base == 0.0:
        raise ValueError("delta_percent undefined for base == 0")
    return 100.0 * (new - base) / base
