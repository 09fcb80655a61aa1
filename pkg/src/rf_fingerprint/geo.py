"""Geodesic distance between geographic coordinates.

Localization error is measured in meters along the Earth's surface, either on
a sphere (haversine) or on the WGS-84 ellipsoid (Vincenty's inverse method).
Both functions are pure and safe for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RFFingerprintError

EARTH_RADIUS_M = 6_371_000.0  # mean Earth radius for the spherical model

WGS84_A = 6_378_137.0  # semi-major axis, meters
WGS84_F = 1.0 / 298.257223563  # flattening
WGS84_B = WGS84_A * (1.0 - WGS84_F)  # semi-minor axis

VINCENTY_TOLERANCE = 1e-12  # convergence threshold on the longitude iterate
VINCENTY_MAX_ITERATIONS = 200


class VincentyNonConvergence(RFFingerprintError):
    """Vincenty's inverse method failed to converge.

    Happens only for near-antipodal point pairs, far outside the extent of
    any fingerprint dataset this package targets. Callers that need a value
    anyway may fall back to :func:`haversine_distance`, but must do so
    explicitly.
    """

    def __init__(self, a: "GeoPoint", b: "GeoPoint"):
        super().__init__(f"vincenty iteration did not converge for {a} -> {b}")
        self.a = a
        self.b = b


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in decimal degrees (WGS-84 datum)."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and -90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude out of range [-90, 90]: {self.lat!r}")
        if not (math.isfinite(self.lon) and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude out of range [-180, 180]: {self.lon!r}")


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters; accepts scalars or numpy arrays.

    Uses a sphere of radius ``EARTH_RADIUS_M``. The atan2 form is numerically
    stable for both tiny and near-antipodal separations.
    """
    lat1 = np.radians(np.asarray(lat1, dtype=np.float64))
    lon1 = np.radians(np.asarray(lon1, dtype=np.float64))
    lat2 = np.radians(np.asarray(lat2, dtype=np.float64))
    lon2 = np.radians(np.asarray(lon2, dtype=np.float64))
    sin_dlat = np.sin((lat2 - lat1) / 2.0)
    sin_dlon = np.sin((lon2 - lon1) / 2.0)
    h = sin_dlat * sin_dlat + np.cos(lat1) * np.cos(lat2) * sin_dlon * sin_dlon
    h = np.clip(h, 0.0, 1.0)
    return EARTH_RADIUS_M * 2.0 * np.arctan2(np.sqrt(h), np.sqrt(1.0 - h))


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters."""
    return float(haversine_m(a.lat, a.lon, b.lat, b.lon))


def _vincenty(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Inverse geodesic on the WGS-84 ellipsoid (Vincenty 1975), meters.

    Iterates the longitude difference on the auxiliary sphere until it moves
    by less than ``VINCENTY_TOLERANCE`` radians, or gives up after
    ``VINCENTY_MAX_ITERATIONS`` rounds (raises ValueError sentinel handled by
    the public wrappers).
    """
    if lat1 == lat2 and lon1 == lon2:
        return 0.0
    u1 = math.atan((1.0 - WGS84_F) * math.tan(math.radians(lat1)))
    u2 = math.atan((1.0 - WGS84_F) * math.tan(math.radians(lat2)))
    big_l = math.radians(lon2 - lon1)
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = big_l
    for _ in range(VINCENTY_MAX_ITERATIONS):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(
            cos_u2 * sin_lam, cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam
        )
        if sin_sigma == 0.0:
            return 0.0  # coincident on the auxiliary sphere
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos_sq_alpha = 1.0 - sin_alpha * sin_alpha
        if cos_sq_alpha == 0.0:
            cos_2sigma_m = 0.0  # both points on the equator
        else:
            cos_2sigma_m = cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        c = WGS84_F / 16.0 * cos_sq_alpha * (4.0 + WGS84_F * (4.0 - 3.0 * cos_sq_alpha))
        lam_prev = lam
        lam = big_l + (1.0 - c) * WGS84_F * sin_alpha * (
            sigma
            + c
            * sin_sigma
            * (cos_2sigma_m + c * cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2))
        )
        if abs(lam - lam_prev) < VINCENTY_TOLERANCE:
            break
    else:
        raise _NonConvergent()

    u_sq = cos_sq_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)))
    big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
    delta_sigma = big_b * sin_sigma * (
        cos_2sigma_m
        + big_b
        / 4.0
        * (
            cos_sigma * (-1.0 + 2.0 * cos_2sigma_m**2)
            - big_b
            / 6.0
            * cos_2sigma_m
            * (-3.0 + 4.0 * sin_sigma**2)
            * (-3.0 + 4.0 * cos_2sigma_m**2)
        )
    )
    return WGS84_B * big_a * (sigma - delta_sigma)


class _NonConvergent(Exception):
    """Internal marker; rethrown with coordinates attached by the wrappers."""


def vincenty_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Shortest geodesic between two points on the WGS-84 ellipsoid, meters.

    Raises VincentyNonConvergence for near-antipodal pairs instead of
    returning a wrong value.
    """
    try:
        return _vincenty(a.lat, a.lon, b.lat, b.lon)
    except _NonConvergent:
        raise VincentyNonConvergence(a, b) from None


def vincenty_m(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Element-wise Vincenty distance over coordinate arrays, meters."""
    lat1 = np.atleast_1d(np.asarray(lat1, dtype=np.float64))
    lon1 = np.atleast_1d(np.asarray(lon1, dtype=np.float64))
    lat2 = np.atleast_1d(np.asarray(lat2, dtype=np.float64))
    lon2 = np.atleast_1d(np.asarray(lon2, dtype=np.float64))
    out = np.empty(lat1.shape, dtype=np.float64)
    for i in range(lat1.shape[0]):
        try:
            out[i] = _vincenty(lat1[i], lon1[i], lat2[i], lon2[i])
        except _NonConvergent:
            raise VincentyNonConvergence(
                GeoPoint(float(lat1[i]), float(lon1[i])),
                GeoPoint(float(lat2[i]), float(lon2[i])),
            ) from None
    return out
