"""Dataset ingestion, start/goal sampling, model I/O serialization.

The encoder sees the instruction, the start's axis position on the
region's level-16 grid, and the start cells' discrete location tokens;
the decoder target is a high-level path of axis positions ending at the
goal. Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    ExhaustedSampling,
    MalformedRecord,
    MissingTokens,
    OutOfGrid,
    OutOfRegion,
    ParseFailure,
    UnknownCity,
)
from .geo import BoundingBox, GeoPoint, haversine_distance
from .mapgraph import KIND_LANDMARK, MapGraph, prominence_rank
from .s2grid import cell_center, cell_from_point, cell_ij, region_rect

log = logging.getLogger(__name__)

CITIES = ("Manhattan", "Pittsburgh", "Philadelphia")
SPLITS = ("train", "dev_seen", "dev_unseen", "test")

GRID_LEVEL = 16
START_MARKER = "[START]"
GRAPH_MARKER = "[GRAPH]"
PATH_SEPARATOR = "; "
MAX_PAIR_DISTANCE_M = 2000.0
TARGET_LANDMARK_RADIUS_M = 500.0
TARGET_LANDMARK_COUNT = 3


@dataclass(frozen=True)
class Example:
    id: str
    instruction: str
    start: GeoPoint
    goal: GeoPoint
    city: str
    split: str


@dataclass(frozen=True)
class AxisPosition:
    loc_x: int
    loc_y: int

    def text(self) -> str:
        return f"X{self.loc_x} Y{self.loc_y}"


class AxisGrid:
    """Bijection between a region's level-16 cells and axis positions.

    Columns are ranked west to east, rows south to north, from the
    region's southwest corner; orientation is probed from the built grid
    so the ranking is valid on any cube face.
    """

    def __init__(self, region: BoundingBox, level: int = GRID_LEVEL):
        self.region = region
        self.level = level
        self.rect = region_rect(region, level)
        r = self.rect
        east = cell_center(r.cell_at(r.i0 + 1, r.j0)) if r.ncols > 1 else None
        base = cell_center(r.cell_at(r.i0, r.j0))
        self._flip_x = east is not None and east.lng < base.lng
        north = cell_center(r.cell_at(r.i0, r.j0 + 1)) if r.nrows > 1 else None
        self._flip_y = north is not None and north.lat < base.lat

    @property
    def ncols(self):
        return self.rect.ncols

    @property
    def nrows(self):
        return self.rect.nrows

    def _to_axis(self, i, j):
        x = (self.rect.i1 - i) if self._flip_x else (i - self.rect.i0)
        y = (self.rect.j1 - j) if self._flip_y else (j - self.rect.j0)
        return AxisPosition(x, y)

    def _to_ij(self, pos: AxisPosition):
        i = (self.rect.i1 - pos.loc_x) if self._flip_x else (self.rect.i0 + pos.loc_x)
        j = (self.rect.j1 - pos.loc_y) if self._flip_y else (self.rect.j0 + pos.loc_y)
        return i, j

    def position_of(self, p: GeoPoint) -> AxisPosition:
        if not self.region.contains(p):
            raise OutOfRegion(f"{p} outside region")
        cell = cell_from_point(p, self.level)
        i, j = cell_ij(cell)
        if not self.rect.contains_ij(i, j):
            raise OutOfRegion(f"{p} outside region grid")
        return self._to_axis(i, j)

    def center_of(self, pos: AxisPosition) -> GeoPoint:
        if not (0 <= pos.loc_x < self.ncols and 0 <= pos.loc_y < self.nrows):
            raise OutOfGrid(f"{pos} outside {self.ncols}x{self.nrows} grid")
        i, j = self._to_ij(pos)
        return cell_center(self.rect.cell_at(i, j))


# -- dataset -----------------------------------------------------------------

def _parse_example(rec, line_no):
    for key in ("id", "instruction", "start_lat", "start_lng",
                "goal_lat", "goal_lng", "city", "split"):
        if key not in rec:
            raise MalformedRecord(line_no, f"missing field {key!r}")
    if rec["city"] not in CITIES:
        raise UnknownCity(line_no, f"unknown city {rec['city']!r}")
    if rec["split"] not in SPLITS:
        raise MalformedRecord(line_no, f"unknown split {rec['split']!r}")
    try:
        start = GeoPoint(float(rec["start_lat"]), float(rec["start_lng"]))
        goal = GeoPoint(float(rec["goal_lat"]), float(rec["goal_lng"]))
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, str(exc)) from exc
    if start.almost_equals(goal):
        raise MalformedRecord(line_no, "start equals goal")
    return Example(str(rec["id"]), str(rec["instruction"]), start, goal,
                   rec["city"], rec["split"])


def load_dataset(path, split=None, city=None):
    """Validated examples from the JSON-lines dataset contract.

    Geodesic start-goal distances beyond the 2 km task bound (plus 5 %
    release slack) are logged, not fatal.
    """
    examples = []
    counts = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from exc
            ex = _parse_example(rec, line_no)
            if split and ex.split != split:
                continue
            if city and ex.city != city:
                continue
            d = haversine_distance(ex.start, ex.goal)
            if d > MAX_PAIR_DISTANCE_M * 1.05:
                log.warning("example %s: start-goal distance %.0f m exceeds task bound",
                            ex.id, d)
            examples.append(ex)
            counts[ex.split] = counts.get(ex.split, 0) + 1
    log.info("loaded %d examples from %s (%s)", len(examples), path,
             ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return examples


def save_dataset(examples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "id": ex.id,
                "instruction": ex.instruction,
                "start_lat": ex.start.lat,
                "start_lng": ex.start.lng,
                "goal_lat": ex.goal.lat,
                "goal_lng": ex.goal.lng,
                "city": ex.city,
                "split": ex.split,
            }, sort_keys=True) + "\n")


DEFAULT_FIELD_MAP = {
    "id": ("id", "example_id", "uuid"),
    "instruction": ("instruction", "content", "text"),
    "start": ("start", "start_point", "rvs_start_point"),
    "goal": ("goal", "goal_point", "rvs_goal_point", "end_point"),
    "city": ("city", "region"),
    "split": ("split",),
}


def adapt_release(src_path, out_path, field_map=None, default_split=None,
                  default_city=None):
    """Map a published-release JSON-lines file onto the internal contract.

    Points may appear as {lat, lng} objects, [lng, lat] arrays, or flat
    *_lat/*_lng fields. Unmapped city/split fall back to the defaults.
    """
    fmap = dict(DEFAULT_FIELD_MAP)
    if field_map:
        fmap.update(field_map)

    def pick(rec, key):
        for name in fmap[key]:
            if name in rec:
                return rec[name]
        return None

    def as_point(val, rec, prefix):
        if val is None:
            lat, lng = rec.get(f"{prefix}_lat"), rec.get(f"{prefix}_lng")
            if lat is None or lng is None:
                return None
            return float(lat), float(lng)
        if isinstance(val, dict):
            lat = val.get("lat", val.get("latitude"))
            lng = val.get("lng", val.get("lon", val.get("longitude")))
            return (float(lat), float(lng)) if lat is not None else None
        if isinstance(val, (list, tuple)) and len(val) == 2:
            lng, lat = val  # GeoJSON order
            return float(lat), float(lng)
        return None

    n = 0
    with open(src_path, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as out:
        for line_no, line in enumerate(src, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            start = as_point(pick(rec, "start"), rec, "start")
            goal = as_point(pick(rec, "goal"), rec, "goal")
            if start is None or goal is None:
                raise MalformedRecord(line_no, "could not locate start/goal fields")
            out.write(json.dumps({
                "id": str(pick(rec, "id") if pick(rec, "id") is not None else line_no),
                "instruction": pick(rec, "instruction") or "",
                "start_lat": start[0], "start_lng": start[1],
                "goal_lat": goal[0], "goal_lng": goal[1],
                "city": pick(rec, "city") or default_city,
                "split": pick(rec, "split") or default_split,
            }, sort_keys=True) + "\n")
            n += 1
    return n


# -- start/goal sampling --------------------------------------------------------

def sample_pairs(graph: MapGraph, n, max_path=MAX_PAIR_DISTANCE_M, seed=0,
                 max_rejects=10_000):
    """n (start, goal, path_length) tuples by uniform rejection sampling.

    Starts are street-layer nodes, goals are landmark nodes; a draw is
    accepted when the graph path length is within `max_path`. Both ends
    are redrawn on rejection.
    """
    rng = np.random.default_rng(seed)
    ids, index, _ = graph.to_csr()
    start_ids = sorted(
        nid for nid in ids if graph.nodes[nid].kind != KIND_LANDMARK
    )
    goal_ids = sorted(nid for nid in ids if graph.nodes[nid].kind == KIND_LANDMARK)
    if not start_ids or not goal_ids:
        raise ExhaustedSampling("graph lacks street nodes or landmarks")

    out = []
    rejects = 0
    chunk = max(64, min(512, n * 8))
    while len(out) < n:
        starts = rng.integers(0, len(start_ids), size=chunk)
        goals = rng.integers(0, len(goal_ids), size=chunk)
        uniq = sorted(set(starts.tolist()))
        _, _, dist = graph.batch_distances([start_ids[k] for k in uniq],
                                           cutoff=max_path)
        row_of = {k: r for r, k in enumerate(uniq)}
        for s_idx, g_idx in zip(starts.tolist(), goals.tolist()):
            d = dist[row_of[s_idx]][index[goal_ids[g_idx]]]
            if np.isfinite(d) and d <= max_path:
                start_node = graph.nodes[start_ids[s_idx]]
                goal_node = graph.nodes[goal_ids[g_idx]]
                out.append((start_node.point, goal_node.point, float(d)))
                rejects = 0
                if len(out) == n:
                    break
            else:
                rejects += 1
                if rejects >= max_rejects:
                    raise ExhaustedSampling(
                        f"{max_rejects} consecutive rejections at {max_path} m")
    return out


def sample_pair(graph: MapGraph, max_path=MAX_PAIR_DISTANCE_M, seed=0,
                max_rejects=10_000):
    """One (start, goal) pair within the path-length bound."""
    start, goal, _ = sample_pairs(graph, 1, max_path, seed, max_rejects)[0]
    return start, goal


# -- decoder targets and records ------------------------------------------------

class LandmarkIndex:
    """Vectorized prominence/radius queries over a graph's landmarks."""

    def __init__(self, graph: MapGraph):
        nodes = sorted(graph.nodes_of_kind(KIND_LANDMARK), key=lambda n: n.id)
        self.ids = [n.id for n in nodes]
        self.points = [n.point for n in nodes]
        self.lat = np.array([p.lat for p in self.points])
        self.lng = np.array([p.lng for p in self.points])
        ranks = [prominence_rank(n.tags) for n in nodes]
        self.rank = np.array([99 if r is None else r for r in ranks])

    def near(self, p: GeoPoint, radius_m):
        from .geo import haversine_many

        if not self.ids:
            return []
        dist = haversine_many(self.lat, self.lng, p)
        hits = np.nonzero(dist <= radius_m)[0]
        return [(int(k), float(dist[k])) for k in hits]


def build_target_path(ex: Example, landmarks: LandmarkIndex, grid: AxisGrid,
                      n_landmarks=TARGET_LANDMARK_COUNT,
                      radius_m=TARGET_LANDMARK_RADIUS_M) -> str:
    """Serialized high-level path: start, waypoint landmarks, goal.

    Waypoints are the most prominent landmarks within `radius_m` of the
    goal, emitted farthest-from-goal first so the sequence converges on
    the goal.
    """
    near = [
        (landmarks.rank[k], landmarks.ids[k], d, k)
        for k, d in landmarks.near(ex.goal, radius_m)
        if landmarks.rank[k] < 99
    ]
    near.sort(key=lambda t: (t[0], t[1]))
    chosen = near[:n_landmarks]
    chosen.sort(key=lambda t: (-t[2], t[1]))
    items = [grid.position_of(ex.start).text()]
    items += [grid.position_of(landmarks.points[k]).text() for _, _, _, k in chosen]
    items.append(grid.position_of(ex.goal).text())
    return PATH_SEPARATOR.join(items)


@dataclass(frozen=True)
class TokenizedRecord:
    id: str
    input_text: str
    target_text: str


def graph_token_text(token_id) -> str:
    return f"[G{int(token_id)}]"


class RecordBuilder:
    """Builds encoder/decoder text records for a region.

    The encoder side carries the start's axis position plus the start
    cells' tokens at the three grid levels, finest first (6 tokens: 2
    quantization layers x 3 levels).
    """

    def __init__(self, grid: AxisGrid, landmarks: LandmarkIndex,
                 tokens, levels=(17, 16, 15),
                 n_landmarks=TARGET_LANDMARK_COUNT,
                 radius_m=TARGET_LANDMARK_RADIUS_M):
        self.grid = grid
        self.landmarks = landmarks
        self.tokens = tokens  # TokenAssignment or mapping node id -> tuple
        self.levels = levels
        self.n_landmarks = n_landmarks
        self.radius_m = radius_m
        self._token_map = tokens.as_dict() if hasattr(tokens, "as_dict") else dict(tokens)

    def graph_tokens(self, p: GeoPoint):
        out = []
        for level in self.levels:
            node_id = cell_from_point(p, level).token()
            if node_id not in self._token_map:
                raise MissingTokens(f"no tokens for cell {node_id} (level {level})")
            out.extend(self._token_map[node_id])
        return out

    def build(self, ex: Example) -> TokenizedRecord:
        start_axis = self.grid.position_of(ex.start).text()
        tok_text = " ".join(graph_token_text(t) for t in self.graph_tokens(ex.start))
        input_text = (f"{ex.instruction} {START_MARKER} {start_axis} "
                      f"{GRAPH_MARKER} {tok_text}")
        target = build_target_path(ex, self.landmarks, self.grid,
                                   self.n_landmarks, self.radius_m)
        return TokenizedRecord(ex.id, input_text, target)


def save_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "id": rec.id,
                "input_text": rec.input_text,
                "target_text": rec.target_text,
            }, sort_keys=True) + "\n")


def load_records(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out.append(TokenizedRecord(rec["id"], rec["input_text"], rec["target_text"]))
    return out


# -- prediction parsing -----------------------------------------------------------

_AXIS_RE = re.compile(r"X(\d+)\s+Y(\d+)")


def parse_prediction(text, grid: AxisGrid) -> GeoPoint:
    """Center of the level-16 cell named by the final axis pair in `text`."""
    matches = _AXIS_RE.findall(text or "")
    if not matches:
        raise ParseFailure(f"no axis pair in {text!r}")
    loc_x, loc_y = map(int, matches[-1])
    return grid.center_of(AxisPosition(loc_x, loc_y))


def load_predictions(path, grid: AxisGrid | None = None):
    """Prediction map from the JSON-lines contract.

    Lines carry either `output_text` (parsed against the axis grid) or
    raw `lat`/`lng` (point systems such as the baselines). Unparseable
    text maps to None, which the scorer counts at the sentinel error.
    """
    from .errors import DuplicatePrediction

    preds = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            pid = str(rec.get("id", line_no))
            if pid in preds:
                raise DuplicatePrediction(pid)
            if "lat" in rec and "lng" in rec:
                preds[pid] = GeoPoint(float(rec["lat"]), float(rec["lng"]))
            elif "output_text" in rec:
                if grid is None:
                    raise MalformedRecord(line_no, "textual prediction needs a region grid")
                try:
                    preds[pid] = parse_prediction(rec["output_text"], grid)
                except (ParseFailure, OutOfGrid):
                    preds[pid] = None
            else:
                raise MalformedRecord(line_no, "prediction needs output_text or lat/lng")
    return preds
