"""Non-learning reference systems: Stop, Center, Landmark."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geo import BoundingBox, GeoPoint, haversine_many
from .mapgraph import KIND_LANDMARK, MapGraph, prominence_rank
from .taskio import Example

DEFAULT_RADIUS_M = 1000.0


@dataclass(frozen=True)
class Prediction:
    example_id: str
    point: GeoPoint
    system: str


class BaselineContext:
    """Precomputed node/landmark arrays for vectorized radius queries."""

    def __init__(self, graph: MapGraph, region: BoundingBox | None = None):
        self.graph = graph
        ids, lat, lng = graph.coords()
        self.node_ids = ids
        self.node_lat, self.node_lng = lat, lng
        lms = sorted(graph.nodes_of_kind(KIND_LANDMARK), key=lambda n: n.id)
        self.lm_ids = [n.id for n in lms]
        self.lm_points = [n.point for n in lms]
        self.lm_lat = np.array([p.lat for p in self.lm_points])
        self.lm_lng = np.array([p.lng for p in self.lm_points])
        ranks = [prominence_rank(n.tags) for n in lms]
        self.lm_rank = np.array([99 if r is None else r for r in ranks])
        self.region = region or graph.region
        self._centroid_dist = None

    @property
    def centroid(self) -> GeoPoint:
        return self.region.center

    def node_centroid_dist(self):
        if self._centroid_dist is None:
            self._centroid_dist = haversine_many(
                self.node_lat, self.node_lng, self.centroid)
        return self._centroid_dist


def region_of_examples(examples) -> BoundingBox:
    """Bounding box over the dataset's start and goal points."""
    lats = [p for ex in examples for p in (ex.start.lat, ex.goal.lat)]
    lngs = [p for ex in examples for p in (ex.start.lng, ex.goal.lng)]
    return BoundingBox(south=min(lats), west=min(lngs),
                       north=max(lats), east=max(lngs))


def stop(ex: Example) -> Prediction:
    """Predicts the starting point."""
    return Prediction(ex.id, ex.start, "stop")


def center(ex: Example, ctx: BaselineContext,
           radius_m=DEFAULT_RADIUS_M) -> Prediction:
    """The graph node within the radius closest to the region centroid;
    falls back to the start when the radius is empty."""
    dist = haversine_many(ctx.node_lat, ctx.node_lng, ex.start)
    in_radius = np.nonzero(dist <= radius_m)[0]
    if len(in_radius) == 0:
        return Prediction(ex.id, ex.start, "center")
    to_centroid = ctx.node_centroid_dist()[in_radius]
    pick = in_radius[int(np.argmin(to_centroid))]
    point = GeoPoint(float(ctx.node_lat[pick]), float(ctx.node_lng[pick]))
    return Prediction(ex.id, point, "center")


def landmark(ex: Example, ctx: BaselineContext,
             radius_m=DEFAULT_RADIUS_M) -> Prediction:
    """The most prominent landmark within the radius (ladder rank, then
    landmark id); falls back to the start when none is prominent."""
    if len(ctx.lm_ids) == 0:
        return Prediction(ex.id, ex.start, "landmark")
    dist = haversine_many(ctx.lm_lat, ctx.lm_lng, ex.start)
    in_radius = np.nonzero((dist <= radius_m) & (ctx.lm_rank < 99))[0]
    if len(in_radius) == 0:
        return Prediction(ex.id, ex.start, "landmark")
    best = min(in_radius, key=lambda k: (ctx.lm_rank[k], ctx.lm_ids[k]))
    return Prediction(ex.id, ctx.lm_points[best], "landmark")


SYSTEMS = ("stop", "center", "landmark")


def run_baseline(system, examples, ctx: BaselineContext | None = None,
                 radius_m=DEFAULT_RADIUS_M):
    """Predictions for a whole split with one of the named systems."""
    if system == "stop":
        return [stop(ex) for ex in examples]
    if ctx is None:
        raise ValueError(f"system {system!r} needs a graph context")
    if system == "center":
        return [center(ex, ctx, radius_m) for ex in examples]
    if system == "landmark":
        return [landmark(ex, ctx, radius_m) for ex in examples]
    raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")


def save_predictions(predictions, path):
    """Point predictions in the shared prediction JSON-lines contract."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps({
                "id": pred.example_id,
                "lat": pred.point.lat,
                "lng": pred.point.lng,
                "system": pred.system,
            }, sort_keys=True) + "\n")
