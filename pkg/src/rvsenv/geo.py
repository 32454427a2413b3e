"""Exact geodesic primitives: points, boxes, distances, bearings.

All coordinates are WGS84 degrees; all distances are meters on a sphere of
the IUGG mean radius, so golden numbers are stable across machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CoincidentPoints

EARTH_RADIUS_M = 6_371_008.8
"""IUGG arithmetic mean Earth radius in meters."""

COORD_EPS_DEG = 1e-9
"""Fixed epsilon for coordinate comparisons, in degrees."""

CARDINALS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 latitude/longitude pair in degrees."""

    lat: float
    lng: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lng < 180.0):
            raise ValueError(f"longitude {self.lng} outside [-180, 180)")

    def almost_equals(self, other: "GeoPoint", eps: float = COORD_EPS_DEG) -> bool:
        return abs(self.lat - other.lat) <= eps and abs(self.lng - other.lng) <= eps


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned lat/lng box; must not cross the antimeridian."""

    south: float
    west: float
    north: float
    east: float

    def __post_init__(self):
        if self.south > self.north:
            raise ValueError("south > north")
        if self.west > self.east:
            raise ValueError("box crosses the antimeridian (west > east)")

    def contains(self, p: GeoPoint) -> bool:
        return self.south <= p.lat <= self.north and self.west <= p.lng <= self.east

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(0.5 * (self.south + self.north), 0.5 * (self.west + self.east))

    def area_km2(self) -> float:
        """Spherical area of the box in square kilometers."""
        r_km = EARTH_RADIUS_M / 1000.0
        dlng = math.radians(self.east - self.west)
        band = math.sin(math.radians(self.north)) - math.sin(math.radians(self.south))
        return r_km * r_km * dlng * band


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters."""
    la1, la2 = math.radians(a.lat), math.radians(b.lat)
    sin_dlat = math.sin(0.5 * (la2 - la1))
    sin_dlng = math.sin(0.5 * math.radians(b.lng - a.lng))
    h = sin_dlat * sin_dlat + math.cos(la1) * math.cos(la2) * sin_dlng * sin_dlng
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from a to b, degrees in [0, 360)."""
    if a.almost_equals(b):
        raise CoincidentPoints(f"bearing undefined for coincident points {a}")
    la1, la2 = math.radians(a.lat), math.radians(b.lat)
    dlng = math.radians(b.lng - a.lng)
    y = math.cos(la2) * math.sin(dlng)
    x = math.cos(la1) * math.sin(la2) - math.sin(la1) * math.cos(la2) * math.cos(dlng)
    return math.degrees(math.atan2(y, x)) % 360.0


def cardinal_bearing(a: GeoPoint, b: GeoPoint) -> tuple[float, str]:
    """Initial bearing plus the nearest of the 8 compass points.

    Each cardinal owns a 45-degree sector centered on its compass bearing.
    """
    bearing = initial_bearing(a, b)
    sector = int(round(bearing / 45.0)) % 8
    return bearing, CARDINALS[sector]


def destination_point(start: GeoPoint, bearing_deg: float, distance_m: float) -> GeoPoint:
    """Point reached from `start` along the great circle at `bearing_deg`."""
    delta = distance_m / EARTH_RADIUS_M
    theta = math.radians(bearing_deg)
    la1 = math.radians(start.lat)
    lo1 = math.radians(start.lng)
    la2 = math.asin(
        math.sin(la1) * math.cos(delta) + math.cos(la1) * math.sin(delta) * math.cos(theta)
    )
    lo2 = lo1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(la1),
        math.cos(delta) - math.sin(la1) * math.sin(la2),
    )
    lng = math.degrees(lo2)
    lng = (lng + 180.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(la2), lng)


def haversine_many(lat: "object", lng: "object", p: GeoPoint):
    """Vectorized haversine from arrays of lat/lng degrees to a fixed point.

    Accepts numpy arrays; returns an array of meters.
    """
    import numpy as np

    la1 = np.radians(lat)
    la2 = math.radians(p.lat)
    sin_dlat = np.sin(0.5 * (la2 - la1))
    sin_dlng = np.sin(0.5 * np.radians(p.lng - np.asarray(lng)))
    h = sin_dlat**2 + np.cos(la1) * math.cos(la2) * sin_dlng**2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))
