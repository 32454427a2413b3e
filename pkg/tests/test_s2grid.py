import random

import pytest

from rvsenv.errors import InvalidLevel, LevelOverflow, LevelUnderflow, OutOfRegion
from rvsenv.geo import BoundingBox, GeoPoint, haversine_distance
from rvsenv.s2grid import (
    CellId,
    cell_center,
    cell_from_face_ij,
    cell_from_point,
    cell_ij,
    cell_st_bounds,
    cell_vertices,
    children,
    contains,
    edge_neighbors,
    parent,
    region_rect,
    _face_uv_to_xyz,
    _st_to_uv,
    _xyz_to_latlng,
)


def _random_point(rnd, lat_limit=89.0):
    return GeoPoint(rnd.uniform(-lat_limit, lat_limit), rnd.uniform(-180.0, 179.999))


def _sample_in_cell(rnd, cell):
    """Uniform-in-face-coordinates point inside the cell's interior."""
    s0, t0, s1, t1 = cell_st_bounds(cell)
    s = rnd.uniform(s0 + 1e-12, s1 - 1e-12)
    t = rnd.uniform(t0 + 1e-12, t1 - 1e-12)
    return _xyz_to_latlng(*_face_uv_to_xyz(cell.face, _st_to_uv(s), _st_to_uv(t)))


def test_level0_has_six_cells():
    rnd = random.Random(1)
    seen = {cell_from_point(_random_point(rnd, 89.99), 0) for _ in range(5000)}
    assert len(seen) == 6


def test_level1_has_24_cells():
    rnd = random.Random(2)
    seen = {cell_from_point(_random_point(rnd, 89.99), 1) for _ in range(20000)}
    assert len(seen) == 24


def test_containment_roundtrip_random_levels():
    rnd = random.Random(3)
    for _ in range(1000):
        p = _random_point(rnd)
        level = rnd.randint(0, 30)
        assert contains(cell_from_point(p, level), p)


def test_invalid_level():
    with pytest.raises(InvalidLevel):
        cell_from_point(GeoPoint(0, 0), 31)
    with pytest.raises(InvalidLevel):
        cell_from_point(GeoPoint(0, 0), -1)


def test_parent_children_inverse():
    rnd = random.Random(4)
    for _ in range(200):
        c = cell_from_point(_random_point(rnd), rnd.randint(0, 29))
        kids = children(c)
        assert len(kids) == 4
        for kid in kids:
            assert parent(kid) == c
            assert kid.level == c.level + 1


def test_parent_level_decrements():
    c = cell_from_point(GeoPoint(40.758, -73.985), 16)
    assert parent(c).level == 15


def test_level_underflow_overflow():
    face = cell_from_point(GeoPoint(10, 10), 0)
    with pytest.raises(LevelUnderflow):
        parent(face)
    leaf = cell_from_point(GeoPoint(10, 10), 30)
    with pytest.raises(LevelOverflow):
        children(leaf)


def test_children_partition_parent():
    # Sampled points of the parent land in exactly one child.
    rnd = random.Random(5)
    for _ in range(50):
        c = cell_from_point(_random_point(rnd), rnd.randint(1, 20))
        kids = children(c)
        for _ in range(40):
            p = _sample_in_cell(rnd, c)
            owners = [kid for kid in kids if contains(kid, p)]
            assert len(owners) == 1
            assert owners[0] == cell_from_point(p, c.level + 1)


def test_parent_region_contains_child_samples():
    rnd = random.Random(6)
    for _ in range(50):
        c = cell_from_point(_random_point(rnd), rnd.randint(1, 20))
        for kid in children(c):
            for _ in range(10):
                assert contains(c, _sample_in_cell(rnd, kid))


def test_neighbor_levels_and_symmetry():
    rnd = random.Random(7)
    for _ in range(300):
        c = cell_from_point(_random_point(rnd, 89.9), rnd.randint(1, 14))
        nbrs = edge_neighbors(c)
        assert len(nbrs) == 4
        assert len(set(nbrs)) == 4
        for nb in nbrs:
            assert nb.level == c.level
            assert c in edge_neighbors(nb)


def test_neighbors_underflow():
    with pytest.raises(LevelUnderflow):
        edge_neighbors(cell_from_point(GeoPoint(0, 0), 0))


def _probe_neighbors(cell):
    """Independent neighbor oracle: probe just past each edge midpoint.

    Probes work in the face tangent plane, extended linearly past the face
    boundary, so they cross onto adjacent faces where applicable.
    """
    s0, t0, s1, t1 = cell_st_bounds(cell)
    eps = (s1 - s0) * 0.01

    def uv_ext(s):
        if 0.0 <= s <= 1.0:
            return _st_to_uv(s)
        if s < 0.0:
            return -1.0 - (-s) * 3.0
        return 1.0 + (s - 1.0) * 3.0

    mids = [
        (s0 - eps, 0.5 * (t0 + t1)),
        (s1 + eps, 0.5 * (t0 + t1)),
        (0.5 * (s0 + s1), t0 - eps),
        (0.5 * (s0 + s1), t1 + eps),
    ]
    out = []
    for s, t in mids:
        p = _xyz_to_latlng(*_face_uv_to_xyz(cell.face, uv_ext(s), uv_ext(t)))
        out.append(cell_from_point(p, cell.level))
    return out


def test_neighbors_agree_with_point_probe_interior():
    rnd = random.Random(8)
    checked = 0
    while checked < 150:
        c = cell_from_point(_random_point(rnd, 85.0), rnd.randint(3, 12))
        i, j = cell_ij(c)
        size = 1 << c.level
        if not (0 < i < size - 1 and 0 < j < size - 1):
            continue  # interior cells only for this case
        assert sorted(edge_neighbors(c), key=lambda x: x.token()) == sorted(
            _probe_neighbors(c), key=lambda x: x.token()
        )
        checked += 1


def test_neighbors_agree_with_point_probe_across_faces():
    # Cells hugging a face edge: the probe crosses the cube boundary.
    rnd = random.Random(9)
    checked = 0
    while checked < 60:
        level = rnd.randint(1, 8)
        size = 1 << level
        face = rnd.randrange(6)
        edge = rnd.choice(["W", "E", "S", "N"])
        k = rnd.randrange(size)
        if edge == "W":
            i, j = 0, k
        elif edge == "E":
            i, j = size - 1, k
        elif edge == "S":
            i, j = k, 0
        else:
            i, j = k, size - 1
        c = cell_from_face_ij(face, level, i, j)
        assert set(edge_neighbors(c)) == set(_probe_neighbors(c))
        checked += 1


def test_center_inside_own_cell():
    rnd = random.Random(10)
    for _ in range(300):
        c = cell_from_point(_random_point(rnd), rnd.randint(0, 24))
        assert contains(c, cell_center(c))


def test_level16_cell_size_bound():
    c = cell_from_point(GeoPoint(40.758, -73.985), 16)
    center = cell_center(c)
    rnd = random.Random(11)
    worst = max(
        haversine_distance(center, _sample_in_cell(rnd, c)) for _ in range(500)
    )
    worst = max(worst, max(haversine_distance(center, v) for v in cell_vertices(c)))
    assert worst < 300.0


def test_level30_diameter_under_2cm():
    c = cell_from_point(GeoPoint(40.758, -73.985), 30)
    vs = cell_vertices(c)
    diam = max(haversine_distance(a, b) for a in vs for b in vs)
    assert diam < 0.02


def test_token_roundtrip():
    c = cell_from_point(GeoPoint(40.758, -73.985), 16)
    text = c.token()
    face_str, _, digits = text.partition("/")
    assert face_str.isdigit() and len(digits) == 16
    assert CellId.from_token(text) == c


def test_region_rect_covers_box():
    box = BoundingBox(south=40.70, west=-74.02, north=40.80, east=-73.93)
    rect = region_rect(box, 16)
    rnd = random.Random(12)
    for _ in range(500):
        p = GeoPoint(rnd.uniform(box.south, box.north), rnd.uniform(box.west, box.east))
        assert rect.contains_cell(cell_from_point(p, 16))
    assert rect.child_rect().ncells == 4 * rect.ncells


def test_region_rect_rejects_multi_face():
    with pytest.raises(OutOfRegion):
        region_rect(BoundingBox(south=-10, west=-50, north=10, east=-40), 10)
