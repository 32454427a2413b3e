"""Geospatial instruction-following environment engine and evaluation toolkit."""

from .geo import BoundingBox, GeoPoint, cardinal_bearing, haversine_distance

__all__ = [
    "BoundingBox",
    "GeoPoint",
    "cardinal_bearing",
    "haversine_distance",
]

__version__ = "0.1.0"
