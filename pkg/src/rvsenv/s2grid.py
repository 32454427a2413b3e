"""Hierarchical spherical cell grid.

The sphere is split by projecting the six cube faces onto it (gnomonic
projection with the standard quadratic uv transform for near-uniform cell
areas); each face is subdivided recursively into four children, levels
0 to 30. Children are ordered along a Hilbert traversal per face, so a
cell id is (face, level, path of child indices).

Cell ids are internal to this toolkit: the traversal and face layout are
fixed here and are not binary-compatible with any external cell library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidLevel, LevelOverflow, LevelUnderflow, OutOfRegion
from .geo import BoundingBox, GeoPoint

MAX_LEVEL = 30

# Face layout: centers and (u, v) tangent axes. The four equatorial faces
# have u pointing east and v pointing north, which keeps grid columns on
# those faces aligned with meridians (the region-axis code relies on this).
_FACES = (
    # center           u axis           v axis
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),   # 0: +X, lng 0
    ((0, 1, 0), (-1, 0, 0), (0, 0, 1)),  # 1: +Y, lng 90
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),   # 2: +Z, north pole
    ((-1, 0, 0), (0, -1, 0), (0, 0, 1)), # 3: -X, lng 180
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),  # 4: -Y, lng -90
    ((0, 0, -1), (1, 0, 0), (0, -1, 0)), # 5: -Z, south pole
)


def _latlng_to_xyz(p: GeoPoint) -> tuple[float, float, float]:
    la, lo = math.radians(p.lat), math.radians(p.lng)
    return (math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la))


def _xyz_to_latlng(x: float, y: float, z: float) -> GeoPoint:
    lat = math.degrees(math.atan2(z, math.hypot(x, y)))
    lng = math.degrees(math.atan2(y, x))
    if lng >= 180.0:
        lng -= 360.0
    return GeoPoint(max(-90.0, min(90.0, lat)), lng)


def _face_of(x: float, y: float, z: float) -> int:
    ax, ay, az = abs(x), abs(y), abs(z)
    if ax >= ay and ax >= az:
        return 0 if x > 0 else 3
    if ay >= az:
        return 1 if y > 0 else 4
    return 2 if z > 0 else 5


def _xyz_to_face_uv(x: float, y: float, z: float) -> tuple[int, float, float]:
    face = _face_of(x, y, z)
    c, u_ax, v_ax = _FACES[face]
    w = x * c[0] + y * c[1] + z * c[2]
    u = (x * u_ax[0] + y * u_ax[1] + z * u_ax[2]) / w
    v = (x * v_ax[0] + y * v_ax[1] + z * v_ax[2]) / w
    return face, max(-1.0, min(1.0, u)), max(-1.0, min(1.0, v))


def _face_uv_to_xyz(face: int, u: float, v: float) -> tuple[float, float, float]:
    c, u_ax, v_ax = _FACES[face]
    x = c[0] + u * u_ax[0] + v * v_ax[0]
    y = c[1] + u * u_ax[1] + v * v_ax[1]
    z = c[2] + u * u_ax[2] + v * v_ax[2]
    n = math.sqrt(x * x + y * y + z * z)
    return x / n, y / n, z / n


def _st_to_uv(s: float) -> float:
    # Quadratic transform: near-uniform cell areas across a face.
    if s >= 0.5:
        return (1.0 / 3.0) * (4.0 * s * s - 1.0)
    return (1.0 / 3.0) * (1.0 - 4.0 * (1.0 - s) * (1.0 - s))


def _uv_to_st(u: float) -> float:
    if u >= 0.0:
        return 0.5 * math.sqrt(1.0 + 3.0 * u)
    return 1.0 - 0.5 * math.sqrt(1.0 - 3.0 * u)


def _st_to_index(s: float, size: int) -> int:
    # Half-open ownership: a cell owns its min edge. The clamp keeps points
    # exactly on the face's max edge inside the face deterministically.
    return max(0, min(size - 1, int(math.floor(s * size))))


def _hilbert_pos(level: int, i: int, j: int) -> int:
    """Hilbert curve index of cell (i, j) on the 2^level grid."""
    n = 1 << level
    pos = 0
    s = n >> 1
    while s > 0:
        rx = 1 if (i & s) else 0
        ry = 1 if (j & s) else 0
        pos += s * s * ((3 * rx) ^ ry)
        if ry == 0:
            if rx == 1:
                i = n - 1 - i
                j = n - 1 - j
            i, j = j, i
        s >>= 1
    return pos


def _hilbert_ij(level: int, pos: int) -> tuple[int, int]:
    """Inverse of _hilbert_pos."""
    n = 1 << level
    i = j = 0
    t = pos
    s = 1
    while s < n:
        rx = 1 & (t >> 1)
        ry = 1 & (t ^ rx)
        if ry == 0:
            if rx == 1:
                i = s - 1 - i
                j = s - 1 - j
            i, j = j, i
        i += s * rx
        j += s * ry
        t >>= 2
        s <<= 1
    return i, j


@dataclass(frozen=True)
class CellId:
    """One cell of the hierarchical grid: face, level, Hilbert child path."""

    face: int
    level: int
    path: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.face <= 5:
            raise ValueError(f"face {self.face} outside [0, 5]")
        if not 0 <= self.level <= MAX_LEVEL:
            raise InvalidLevel(f"level {self.level} outside [0, {MAX_LEVEL}]")
        if len(self.path) != self.level:
            raise ValueError("path length must equal level")
        if any(d not in (0, 1, 2, 3) for d in self.path):
            raise ValueError("path digits must be in [0, 3]")

    @property
    def pos(self) -> int:
        p = 0
        for d in self.path:
            p = (p << 2) | d
        return p

    def token(self) -> str:
        """Textual id form, e.g. '4/0312'."""
        return f"{self.face}/" + "".join(str(d) for d in self.path)

    @classmethod
    def from_token(cls, text: str) -> "CellId":
        face_s, _, digits = text.partition("/")
        return cls(int(face_s), len(digits), tuple(int(d) for d in digits))


def _path_from_pos(level: int, pos: int) -> tuple[int, ...]:
    return tuple((pos >> (2 * (level - 1 - k))) & 3 for k in range(level))


def cell_ij(c: CellId) -> tuple[int, int]:
    """Grid coordinates of the cell on its face (2^level per side)."""
    return _hilbert_ij(c.level, c.pos)


def cell_from_face_ij(face: int, level: int, i: int, j: int) -> CellId:
    return CellId(face, level, _path_from_pos(level, _hilbert_pos(level, i, j)))


def cell_from_point(p: GeoPoint, level: int) -> CellId:
    """The unique cell at `level` containing p (min-edge ownership)."""
    if not 0 <= level <= MAX_LEVEL:
        raise InvalidLevel(f"level {level} outside [0, {MAX_LEVEL}]")
    face, u, v = _xyz_to_face_uv(*_latlng_to_xyz(p))
    size = 1 << level
    i = _st_to_index(_uv_to_st(u), size)
    j = _st_to_index(_uv_to_st(v), size)
    return cell_from_face_ij(face, level, i, j)


def parent(c: CellId) -> CellId:
    if c.level < 1:
        raise LevelUnderflow("face cells have no parent")
    return CellId(c.face, c.level - 1, c.path[:-1])


def children(c: CellId) -> list[CellId]:
    if c.level >= MAX_LEVEL:
        raise LevelOverflow(f"cells at level {MAX_LEVEL} have no children")
    return [CellId(c.face, c.level + 1, c.path + (k,)) for k in range(4)]


def cell_st_bounds(c: CellId) -> tuple[float, float, float, float]:
    """(s_min, t_min, s_max, t_max) of the cell in face coordinates."""
    i, j = cell_ij(c)
    size = 1 << c.level
    return i / size, j / size, (i + 1) / size, (j + 1) / size


def cell_center(c: CellId) -> GeoPoint:
    """Sphere projection of the cell's face-coordinate midpoint."""
    i, j = cell_ij(c)
    size = 1 << c.level
    u = _st_to_uv((i + 0.5) / size)
    v = _st_to_uv((j + 0.5) / size)
    return _xyz_to_latlng(*_face_uv_to_xyz(c.face, u, v))


def cell_vertices(c: CellId) -> list[GeoPoint]:
    """The four corners of the cell, counterclockwise in face coordinates."""
    s0, t0, s1, t1 = cell_st_bounds(c)
    out = []
    for s, t in ((s0, t0), (s1, t0), (s1, t1), (s0, t1)):
        out.append(_xyz_to_latlng(*_face_uv_to_xyz(c.face, _st_to_uv(s), _st_to_uv(t))))
    return out


def contains(c: CellId, p: GeoPoint) -> bool:
    """Consistent with cell_from_point: true iff p's cell at this level is c."""
    return cell_from_point(p, c.level) == c


# Cross-face edge relations, derived once from the cube geometry. For each
# (face, side) the shared edge maps onto the neighbor face by an exact
# index relation: the along-edge index is kept or reversed, and lands on
# one fixed side of the neighbor.
_SIDES = ("W", "E", "S", "N")  # s=0, s=1, t=0, t=1


def _derive_edge_map(face: int, side: str):
    delta = 1e-6
    probes = []
    for a in (0.25, 0.75):
        q = _st_to_uv(a)
        if side == "W":
            u, v = -1.0 - delta, q
        elif side == "E":
            u, v = 1.0 + delta, q
        elif side == "S":
            u, v = q, -1.0 - delta
        else:
            u, v = q, 1.0 + delta
        c, u_ax, v_ax = _FACES[face]
        x = c[0] + u * u_ax[0] + v * v_ax[0]
        y = c[1] + u * u_ax[1] + v * v_ax[1]
        z = c[2] + u * u_ax[2] + v * v_ax[2]
        g, gu, gv = _xyz_to_face_uv(x, y, z)
        probes.append((g, _uv_to_st(gu), _uv_to_st(gv)))
    (g1, s1, t1), (g2, s2, t2) = probes
    assert g1 == g2 and g1 != face
    near_edge_s = s1 < 0.01 or s1 > 0.99
    if near_edge_s:
        along_axis, cross_side, a1, a2 = "j", (1 if s1 > 0.5 else 0), t1, t2
    else:
        along_axis, cross_side, a1, a2 = "i", (1 if t1 > 0.5 else 0), s1, s2
    assert {round(a1, 2), round(a2, 2)} == {0.25, 0.75}
    reversed_ = a1 > 0.5
    return g1, along_axis, reversed_, cross_side


_EDGE_MAPS = {
    (face, side): _derive_edge_map(face, side) for face in range(6) for side in _SIDES
}


def _neighbor_across(face: int, level: int, i: int, j: int) -> CellId:
    size = 1 << level
    if i < 0:
        side, k = "W", j
    elif i >= size:
        side, k = "E", j
    elif j < 0:
        side, k = "S", i
    else:
        side, k = "N", i
    g, along_axis, rev, cross_side = _EDGE_MAPS[(face, side)]
    k2 = size - 1 - k if rev else k
    cross = size - 1 if cross_side == 1 else 0
    if along_axis == "i":
        return cell_from_face_ij(g, level, k2, cross)
    return cell_from_face_ij(g, level, cross, k2)


def edge_neighbors(c: CellId) -> list[CellId]:
    """The four same-level cells sharing an edge with c (W, E, S, N)."""
    if c.level < 1:
        raise LevelUnderflow("edge neighbors are defined for level >= 1")
    i, j = cell_ij(c)
    size = 1 << c.level
    out = []
    for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
        if 0 <= ni < size and 0 <= nj < size:
            out.append(cell_from_face_ij(c.face, c.level, ni, nj))
        else:
            out.append(_neighbor_across(c.face, c.level, ni, nj))
    return out


@dataclass(frozen=True)
class RegionRect:
    """Rectangle of cells, in face (i, j) coordinates, covering a region.

    The rectangle is the (i, j) bounding box of the region's corners at the
    given level; it over-covers slightly where the grid is sheared against
    the lat/lng axes.
    """

    face: int
    level: int
    i0: int
    i1: int
    j0: int
    j1: int

    @property
    def ncols(self) -> int:
        return self.i1 - self.i0 + 1

    @property
    def nrows(self) -> int:
        return self.j1 - self.j0 + 1

    @property
    def ncells(self) -> int:
        return self.ncols * self.nrows

    def contains_ij(self, i: int, j: int) -> bool:
        return self.i0 <= i <= self.i1 and self.j0 <= j <= self.j1

    def contains_cell(self, c: CellId) -> bool:
        if c.face != self.face or c.level != self.level:
            return False
        i, j = cell_ij(c)
        return self.contains_ij(i, j)

    def cell_at(self, i: int, j: int) -> CellId:
        if not self.contains_ij(i, j):
            raise OutOfRegion(f"(i={i}, j={j}) outside region rect")
        return cell_from_face_ij(self.face, self.level, i, j)

    def iter_cells(self):
        for j in range(self.j0, self.j1 + 1):
            for i in range(self.i0, self.i1 + 1):
                yield cell_from_face_ij(self.face, self.level, i, j)

    def child_rect(self) -> "RegionRect":
        """The rectangle of all children of these cells, one level down."""
        return RegionRect(
            self.face, self.level + 1,
            2 * self.i0, 2 * self.i1 + 1, 2 * self.j0, 2 * self.j1 + 1,
        )


def region_rect(box: BoundingBox, level: int) -> RegionRect:
    """Cells at `level` covering the box; the box must sit on one face."""
    corners = [
        GeoPoint(box.south, box.west), GeoPoint(box.south, box.east),
        GeoPoint(box.north, box.west), GeoPoint(box.north, box.east),
    ]
    faces, si, ti = set(), [], []
    size = 1 << level
    for p in corners:
        face, u, v = _xyz_to_face_uv(*_latlng_to_xyz(p))
        faces.add(face)
        si.append(_st_to_index(_uv_to_st(u), size))
        ti.append(_st_to_index(_uv_to_st(v), size))
    if len(faces) != 1:
        raise OutOfRegion(f"region spans cube faces {sorted(faces)}; one face required")
    return RegionRect(faces.pop(), level, min(si), max(si), min(ti), max(ti))
