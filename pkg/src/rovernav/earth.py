"""WGS-84 Earth model: gravity, curvature radii, local tangent plane.

All latitudes and longitudes are in radians, heights in meters above the
ellipsoid. The local tangent plane is an east-north-up frame anchored at a
fixed origin, with meters-per-radian scale factors evaluated once at that
origin. This flat-Earth approximation is accurate to well below the sensor
noise floor for trajectories up to a few kilometers across.
"""

from __future__ import annotations

import numpy as np

# WGS-84 defining and derived constants
SEMI_MAJOR_AXIS = 6_378_137.0  # m
SEMI_MINOR_AXIS = 6_356_752.314245  # m
ECCENTRICITY_SQ = 0.00669437999014
GRAVITY_EQUATOR = 9.7803253359  # m/s^2, normal gravity at the equator
SOMIGLIANA_K = 0.00193185265241
EARTH_RATE = 7.292115e-5  # rad/s


def gravity(lat: float) -> float:
    """Normal gravity magnitude at the ellipsoid surface (Somigliana)."""
    s2 = np.sin(lat) ** 2
    return GRAVITY_EQUATOR * (1.0 + SOMIGLIANA_K * s2) / np.sqrt(
        1.0 - ECCENTRICITY_SQ * s2
    )


def gravity_gradient_lat(lat: float) -> float:
    """d(gravity)/d(lat), used in the error-state dynamics."""
    s, c = np.sin(lat), np.cos(lat)
    u = 1.0 + SOMIGLIANA_K * s * s
    w2 = 1.0 - ECCENTRICITY_SQ * s * s
    w = np.sqrt(w2)
    return GRAVITY_EQUATOR * s * c * (2.0 * SOMIGLIANA_K * w2 + u * ECCENTRICITY_SQ) / (
        w2 * w
    )


def principal_radii(lat: float) -> tuple[float, float]:
    """Meridian and prime-vertical curvature radii ``(R_m, R_n)``."""
    s2 = np.sin(lat) ** 2
    t = 1.0 - ECCENTRICITY_SQ * s2
    r_m = SEMI_MAJOR_AXIS * (1.0 - ECCENTRICITY_SQ) / t**1.5
    r_n = SEMI_MAJOR_AXIS / np.sqrt(t)
    return float(r_m), float(r_n)


def ltp_scale(lat0: float, h0: float) -> tuple[float, float]:
    """Meters per radian of latitude and longitude at the plane origin."""
    r_m, r_n = principal_radii(lat0)
    return r_m + h0, (r_n + h0) * np.cos(lat0)


def geodetic_to_enu(lat, lon, h, lat0: float, lon0: float, h0: float):
    """Project geodetic coordinates onto the tangent plane at the origin.

    Accepts scalars or equal-length arrays and returns ``(e, n, u)`` in
    meters.
    """
    m_per_rad_lat, m_per_rad_lon = ltp_scale(lat0, h0)
    e = (np.asarray(lon) - lon0) * m_per_rad_lon
    n = (np.asarray(lat) - lat0) * m_per_rad_lat
    u = np.asarray(h) - h0
    return e, n, u


def enu_to_geodetic(e, n, u, lat0: float, lon0: float, h0: float):
    """Inverse tangent-plane projection, returns ``(lat, lon, h)``."""
    m_per_rad_lat, m_per_rad_lon = ltp_scale(lat0, h0)
    lat = lat0 + np.asarray(n) / m_per_rad_lat
    lon = lon0 + np.asarray(e) / m_per_rad_lon
    h = h0 + np.asarray(u)
    return lat, lon, h
