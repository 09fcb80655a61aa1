"""RSSI data representations: positive, normalized, exponential, powed.

All four share the clamp step r' = max(rss, tau): readings below the
detection threshold tau, including the not-received sentinel, are treated as
"not detected" and pulled up to tau before the representation is applied.
The scalar functions broadcast over numpy arrays and are pure functions of
their parameters, so the same message never needs re-ingestion when tau,
alpha, or beta change.

With the default denominator (-tau), outputs are:

    positive     max(rss, tau) - tau            in [0, -tau]
    normalized   positive / -tau                in [0, 1]
    exponential  exp(positive/alpha) / exp(-tau/alpha)   in (0, 1]
    powed        positive**beta / (-tau)**beta  in [0, 1]
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import FingerprintSet
from .errors import InputError


class RepresentationKind(enum.Enum):
    POSITIVE = "positive"
    NORMALIZED = "normalized"
    EXPONENTIAL = "exponential"
    POWED = "powed"


@dataclass(frozen=True)
class TransformParams:
    """Representation selector plus everything the four transforms need.

    `denominator`, when given, replaces -tau as the normalization magnitude
    (compatibility switch for pipelines that normalized by the training floor
    rather than the clamp threshold; a uniform rescale of the feature matrix,
    so neighbor selection is unaffected for every supported metric).
    """

    kind: RepresentationKind
    tau: float = -200.0
    alpha: float = 24.0
    beta: float = math.e
    denominator: float | None = None

    def __post_init__(self):
        if not self.tau <= -1.0:
            raise InputError(f"tau must be <= -1 dBm, got {self.tau!r}")
        if not self.alpha > 0:
            raise InputError(f"alpha must be positive, got {self.alpha!r}")
        if not self.beta > 0:
            raise InputError(f"beta must be positive, got {self.beta!r}")
        if self.denominator is not None and not self.denominator > 0:
            raise InputError(
                f"denominator override must be positive, got {self.denominator!r}"
            )

    @property
    def scale(self) -> float:
        """Magnitude of the normalization denominator."""
        return -self.tau if self.denominator is None else self.denominator


def positive(rss, tau: float):
    """Clamp to tau, then shift so the threshold maps to 0."""
    return np.maximum(rss, tau) - tau


def normalized(rss, tau: float, scale: float | None = None):
    """Positive representation rescaled into [0, 1]."""
    return positive(rss, tau) / (scale if scale is not None else -tau)


def exponential(rss, tau: float, alpha: float, scale: float | None = None):
    """Exponentially shaped representation; alpha controls the curvature."""
    return np.exp(positive(rss, tau) / alpha) / np.exp(
        (scale if scale is not None else -tau) / alpha
    )


def powed(rss, tau: float, beta: float, scale: float | None = None):
    """Power-shaped representation; beta = 1 reduces exactly to normalized."""
    return positive(rss, tau) ** beta / (scale if scale is not None else -tau) ** beta


def apply_params(rss, params: TransformParams):
    """Apply the representation selected by `params` element-wise."""
    kind = params.kind
    if kind is RepresentationKind.POSITIVE:
        return positive(rss, params.tau)
    if kind is RepresentationKind.NORMALIZED:
        return normalized(rss, params.tau, params.scale)
    if kind is RepresentationKind.EXPONENTIAL:
        return exponential(rss, params.tau, params.alpha, params.scale)
    if kind is RepresentationKind.POWED:
        return powed(rss, params.tau, params.beta, params.scale)
    raise InputError(f"unknown representation kind: {kind!r}")


@dataclass(frozen=True)
class TransformedMatrix:
    """Feature matrix produced by one representation, tagged with its params."""

    values: np.ndarray
    params: TransformParams

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InputError("transformed matrix contains non-finite entries")
        if self.values.size and self.values.min() < 0.0:
            raise InputError("transformed matrix contains negative entries")
        self.values.flags.writeable = False


def transform_set(
    fps: FingerprintSet, rows, params: TransformParams
) -> TransformedMatrix:
    """Transform the selected rows of a fingerprint set into feature space."""
    raw = fps.rssi_rows(rows)
    return TransformedMatrix(values=apply_params(raw, params), params=params)
