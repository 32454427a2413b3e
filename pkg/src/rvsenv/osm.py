"""OpenStreetMap extract ingestion (XML and PBF) and landmark extraction.

The PBF reader decodes the protobuf wire format directly (nodes, dense
nodes and ways; relations are skipped), so no protobuf dependency is
needed. Both readers produce the same in-memory primitives.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
import zlib
from dataclasses import dataclass, field

from .errors import EmptyRegion, UnreadableExtract
from .geo import BoundingBox, GeoPoint

# Tag keys that qualify an element as a landmark. A bare `building` needs
# a name to qualify.
LANDMARK_TAG_KEYS = (
    "amenity", "shop", "tourism", "brand", "wikipedia", "wikidata",
    "leisure", "historic",
)

# Highway classes treated as streets; configurable because the class mix
# materially changes graph density.
DEFAULT_STREET_CLASSES = frozenset(
    {"primary", "secondary", "tertiary", "residential", "unclassified",
     "pedestrian", "living_street"}
)


@dataclass
class OsmNode:
    id: int
    lat: float
    lng: float
    tags: dict = field(default_factory=dict)


@dataclass
class OsmWay:
    id: int
    refs: list
    tags: dict = field(default_factory=dict)


@dataclass
class Landmark:
    """A named map feature with a point or polygon geometry."""

    id: str
    name: str | None
    tags: dict
    geometry: list  # list[GeoPoint]; single entry for point features
    centroid: GeoPoint


@dataclass
class Street:
    """One street way: an open polyline with its original node ids."""

    id: str
    name: str | None
    tags: dict
    node_ids: list
    points: list  # list[GeoPoint]


@dataclass(frozen=True)
class IngestConfig:
    street_classes: frozenset = DEFAULT_STREET_CLASSES
    landmark_keys: tuple = LANDMARK_TAG_KEYS


# -- XML ---------------------------------------------------------------

def _read_xml(path):
    nodes, ways = {}, []
    try:
        context = ET.iterparse(path, events=("end",))
        for _, elem in context:
            if elem.tag == "node":
                tags = {t.attrib["k"]: t.attrib.get("v", "") for t in elem.findall("tag")}
                nodes[int(elem.attrib["id"])] = OsmNode(
                    int(elem.attrib["id"]),
                    float(elem.attrib["lat"]),
                    float(elem.attrib["lon"]),
                    tags,
                )
                elem.clear()
            elif elem.tag == "way":
                refs = [int(nd.attrib["ref"]) for nd in elem.findall("nd")]
                tags = {t.attrib["k"]: t.attrib.get("v", "") for t in elem.findall("tag")}
                ways.append(OsmWay(int(elem.attrib["id"]), refs, tags))
                elem.clear()
    except (ET.ParseError, KeyError, ValueError, OSError) as exc:
        raise UnreadableExtract(f"{path}: {exc}") from exc
    return nodes, ways


def write_xml(nodes, ways, path):
    """Emit a minimal OSM XML file (used by the synthetic city generator)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write('<osm version="0.6" generator="rvsenv">\n')
        for n in nodes:
            if n.tags:
                fh.write(f'  <node id="{n.id}" lat="{n.lat:.7f}" lon="{n.lng:.7f}">\n')
                for k, v in n.tags.items():
                    fh.write(f'    <tag k="{_esc(k)}" v="{_esc(v)}"/>\n')
                fh.write("  </node>\n")
            else:
                fh.write(f'  <node id="{n.id}" lat="{n.lat:.7f}" lon="{n.lng:.7f}"/>\n')
        for w in ways:
            fh.write(f'  <way id="{w.id}">\n')
            for r in w.refs:
                fh.write(f'    <nd ref="{r}"/>\n')
            for k, v in w.tags.items():
                fh.write(f'    <tag k="{_esc(k)}" v="{_esc(v)}"/>\n')
            fh.write("  </way>\n")
        fh.write("</osm>\n")


def _esc(text):
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


# -- PBF ---------------------------------------------------------------

def _varint(buf, pos):
    result = shift = 0
    while True:
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7


def _zigzag(n):
    return (n >> 1) ^ -(n & 1)


def _fields(buf):
    """Iterate (field_number, wire_type, value) over a protobuf message."""
    pos = 0
    end = len(buf)
    while pos < end:
        key, pos = _varint(buf, pos)
        fnum, wire = key >> 3, key & 7
        if wire == 0:
            val, pos = _varint(buf, pos)
        elif wire == 1:
            val, pos = buf[pos:pos + 8], pos + 8
        elif wire == 2:
            ln, pos = _varint(buf, pos)
            val, pos = buf[pos:pos + ln], pos + ln
        elif wire == 5:
            val, pos = buf[pos:pos + 4], pos + 4
        else:
            raise UnreadableExtract(f"unsupported protobuf wire type {wire}")
        yield fnum, wire, val


def _packed_varints(buf, signed=False):
    out, pos = [], 0
    while pos < len(buf):
        v, pos = _varint(buf, pos)
        out.append(_zigzag(v) if signed else v)
    return out


def _read_pbf(path):
    nodes, ways = {}, []
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UnreadableExtract(f"{path}: {exc}") from exc
    pos = 0
    try:
        while pos < len(data):
            header_len = int.from_bytes(data[pos:pos + 4], "big")
            pos += 4
            header = data[pos:pos + header_len]
            pos += header_len
            blob_type, datasize = None, 0
            for fnum, _, val in _fields(header):
                if fnum == 1:
                    blob_type = val.decode()
                elif fnum == 3:
                    datasize = val
            blob = data[pos:pos + datasize]
            pos += datasize
            raw = None
            for fnum, _, val in _fields(blob):
                if fnum == 1:
                    raw = val
                elif fnum == 3:
                    raw = zlib.decompress(val)
            if blob_type != "OSMData" or raw is None:
                continue
            _parse_primitive_block(raw, nodes, ways)
    except (IndexError, zlib.error, UnicodeDecodeError) as exc:
        raise UnreadableExtract(f"{path}: {exc}") from exc
    return nodes, ways


def _parse_primitive_block(buf, nodes, ways):
    stringtable = []
    groups = []
    granularity, lat_offset, lon_offset = 100, 0, 0
    for fnum, _, val in _fields(buf):
        if fnum == 1:
            stringtable = [s for f, _, s in _fields(val) if f == 1]
        elif fnum == 2:
            groups.append(val)
        elif fnum == 17:
            granularity = val
        elif fnum == 19:
            lat_offset = val
        elif fnum == 20:
            lon_offset = val

    def coord(off, raw):
        return 1e-9 * (off + granularity * raw)

    def text(idx):
        return stringtable[idx].decode("utf-8")

    for group in groups:
        for fnum, _, val in _fields(group):
            if fnum == 1:  # plain node
                nid = lat = lon = 0
                keys, vals = [], []
                for f2, _, v2 in _fields(val):
                    if f2 == 1:
                        nid = _zigzag(v2)
                    elif f2 == 2:
                        keys = _packed_varints(v2)
                    elif f2 == 3:
                        vals = _packed_varints(v2)
                    elif f2 == 8:
                        lat = _zigzag(v2)
                    elif f2 == 9:
                        lon = _zigzag(v2)
                tags = {text(k): text(v) for k, v in zip(keys, vals)}
                nodes[nid] = OsmNode(nid, coord(lat_offset, lat), coord(lon_offset, lon), tags)
            elif fnum == 2:  # dense nodes
                ids = lats = lons = []
                keys_vals = []
                for f2, _, v2 in _fields(val):
                    if f2 == 1:
                        ids = _packed_varints(v2, signed=True)
                    elif f2 == 8:
                        lats = _packed_varints(v2, signed=True)
                    elif f2 == 9:
                        lons = _packed_varints(v2, signed=True)
                    elif f2 == 10:
                        keys_vals = _packed_varints(v2)
                nid = lat = lon = 0
                kv_pos = 0
                for k in range(len(ids)):
                    nid += ids[k]
                    lat += lats[k]
                    lon += lons[k]
                    tags = {}
                    while kv_pos < len(keys_vals) and keys_vals[kv_pos] != 0:
                        tags[text(keys_vals[kv_pos])] = text(keys_vals[kv_pos + 1])
                        kv_pos += 2
                    kv_pos += 1  # skip terminator
                    nodes[nid] = OsmNode(nid, coord(lat_offset, lat), coord(lon_offset, lon), tags)
            elif fnum == 3:  # way
                wid = 0
                keys, vals, refs = [], [], []
                for f2, _, v2 in _fields(val):
                    if f2 == 1:
                        wid = v2
                    elif f2 == 2:
                        keys = _packed_varints(v2)
                    elif f2 == 3:
                        vals = _packed_varints(v2)
                    elif f2 == 8:
                        deltas = _packed_varints(v2, signed=True)
                        acc = 0
                        for d in deltas:
                            acc += d
                            refs.append(acc)
                tags = {text(k): text(v) for k, v in zip(keys, vals)}
                ways.append(OsmWay(wid, refs, tags))
            # fnum == 4 (relations) skipped


# -- extraction ---------------------------------------------------------

def read_extract(path):
    """Parse an OSM XML or PBF file into raw nodes and ways."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(64)
    except OSError as exc:
        raise UnreadableExtract(f"{path}: {exc}") from exc
    if b"<" in head[:8]:
        return _read_xml(path)
    return _read_pbf(path)


def _is_landmark(tags, config):
    if any(k in tags for k in config.landmark_keys):
        return True
    return "building" in tags and "name" in tags


def _polygon_centroid(points):
    """Area centroid in a local equirectangular plane; vertex mean fallback."""
    lat0 = points[0].lat
    k = math.cos(math.radians(lat0))
    xy = [(p.lng * k, p.lat) for p in points]
    if xy[0] == xy[-1]:
        xy = xy[:-1]
    if len(xy) < 3:
        return _vertex_mean(points)
    a = cx = cy = 0.0
    for idx in range(len(xy)):
        x0, y0 = xy[idx]
        x1, y1 = xy[(idx + 1) % len(xy)]
        cross = x0 * y1 - x1 * y0
        a += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    if abs(a) < 1e-14:
        return _vertex_mean(points)
    cx /= 3.0 * a
    cy /= 3.0 * a
    return GeoPoint(cy, cx / k)


def _vertex_mean(points):
    uniq = points[:-1] if len(points) > 1 and points[0] == points[-1] else points
    return GeoPoint(
        sum(p.lat for p in uniq) / len(uniq),
        sum(p.lng for p in uniq) / len(uniq),
    )


def ingest_osm(path, region: BoundingBox, config: IngestConfig | None = None):
    """Extract landmarks and streets from an OSM file within a region.

    Streets are highway ways of the configured classes with at least one
    node inside the region; landmarks are elements carrying a whitelist
    tag whose centroid lies inside the region.
    """
    config = config or IngestConfig()
    nodes, ways = read_extract(path)

    landmarks, streets = [], []
    for node in nodes.values():
        if not node.tags or not _is_landmark(node.tags, config):
            continue
        p = GeoPoint(node.lat, node.lng)
        if region.contains(p):
            landmarks.append(Landmark(f"n{node.id}", node.tags.get("name"), node.tags, [p], p))

    for way in ways:
        pts = [GeoPoint(nodes[r].lat, nodes[r].lng) for r in way.refs if r in nodes]
        if len(pts) < 2:
            continue
        highway = way.tags.get("highway")
        if highway is not None and highway in config.street_classes:
            if any(region.contains(p) for p in pts):
                streets.append(Street(
                    f"w{way.id}", way.tags.get("name"), way.tags,
                    [r for r in way.refs if r in nodes], pts,
                ))
        if _is_landmark(way.tags, config):
            centroid = _polygon_centroid(pts)
            if region.contains(centroid):
                landmarks.append(Landmark(f"w{way.id}", way.tags.get("name"), way.tags, pts, centroid))

    if not streets:
        raise EmptyRegion(f"no streets found in {region}")
    landmarks.sort(key=lambda lm: lm.id)
    streets.sort(key=lambda s: s.id)
    return landmarks, streets
