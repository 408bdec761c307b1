"""Specular multipath enumeration over 2D polygonal scenes via the image method.

A scene is a set of wall segments (building footprints) plus base-station
sites. Propagation paths between a site and a receiver are enumerated by
mirroring the source across ordered wall sequences and back-tracing reflection
points from the receiver. Only specular reflections are modeled; a reflection
point must fall strictly inside its wall segment, and every leg of a path must
be clear of all other walls.

Scenes are 2D; site heights are carried only so that downstream range
corrections can account for the antenna height offset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

from .errors import ConfigError, DataError, DegenerateGeometry
from .geometry import Bearing, Point2, Segment, bearing_from_to, mirror_point

# Reflection points closer than this to a wall endpoint are rejected
# (endpoint hits correspond to diffraction, which is not modeled).
INTERIOR_TOL = 1e-9
# Hard ceiling on the reflection order to keep enumeration tractable.
MAX_ORDER_LIMIT = 8

GnbId = Union[int, str]


@dataclass(frozen=True)
class Wall:
    """A wall segment with its per-bounce reflection loss in dB."""

    segment: Segment
    loss_db: float = 6.0

    def __post_init__(self):
        if not (math.isfinite(self.loss_db) and self.loss_db >= 0.0):
            raise ConfigError(f"wall reflection loss must be >= 0 dB, got {self.loss_db}")


@dataclass(frozen=True)
class GnbSite:
    """A base-station site: identifier, 2D position, and antenna height."""

    id: GnbId
    position: Point2
    height: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.height):
            raise ConfigError(f"gnb {self.id}: non-finite height")


@dataclass(frozen=True)
class Scene:
    """Immutable world model: walls plus base-station sites."""

    walls: tuple[Wall, ...] = ()
    gnbs: tuple[GnbSite, ...] = ()

    def __post_init__(self):
        ids = [g.id for g in self.gnbs]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate gnb ids in scene: {ids}")

    @property
    def bounds(self) -> Optional[tuple[float, float, float, float]]:
        """Axis-aligned extent (min_x, min_y, max_x, max_y) of walls and sites."""
        xs: list[float] = []
        ys: list[float] = []
        for w in self.walls:
            xs += [w.segment.a.x, w.segment.b.x]
            ys += [w.segment.a.y, w.segment.b.y]
        for g in self.gnbs:
            xs.append(g.position.x)
            ys.append(g.position.y)
        if not xs:
            return None
        return (min(xs), min(ys), max(xs), max(ys))

    def gnb_by_id(self, gnb_id: GnbId) -> GnbSite:
        for g in self.gnbs:
            if g.id == gnb_id:
                return g
        raise DataError(f"unknown gnb id {gnb_id!r}")


@dataclass(frozen=True)
class PropagationPath:
    """One propagation path from a site to a receiver.

    vertices runs [site, reflection points..., receiver]; order counts the
    reflections; aod is the departure bearing at the site and aoa the bearing
    from the receiver toward the last scatterer (toward the site for a direct
    path); wall_ids are indices into the scene's wall list, in bounce order.
    """

    order: int
    vertices: tuple[Point2, ...]
    length: float
    aod: Bearing
    aoa: Bearing
    wall_ids: tuple[int, ...] = field(default=())


# ---------------------------------------------------------------------------
# low-level occlusion / intersection helpers
# ---------------------------------------------------------------------------

def _leg_blocked_by(a: Point2, b: Point2, s: Segment, tol: float = INTERIOR_TOL) -> bool:
    """True if segment s obstructs the leg a->b anywhere away from the leg's
    own endpoints (reflection points touch their wall at a leg endpoint)."""
    rx, ry = b.x - a.x, b.y - a.y
    sx, sy = s.b.x - s.a.x, s.b.y - s.a.y
    qx, qy = s.a.x - a.x, s.a.y - a.y
    rlen = math.hypot(rx, ry)
    slen = math.hypot(sx, sy)
    denom = rx * sy - ry * sx
    if abs(denom) <= 1e-12 * rlen * slen:
        # Parallel. Only a collinear overlap of positive length blocks.
        if abs(qx * ry - qy * rx) > 1e-12 * max(math.hypot(qx, qy), slen) * rlen:
            return False
        r2 = rx * rx + ry * ry
        t0 = (qx * rx + qy * ry) / r2
        t1 = t0 + (sx * rx + sy * ry) / r2
        lo, hi = max(min(t0, t1), 0.0), min(max(t0, t1), 1.0)
        return (hi - lo) * rlen > tol
    t = (qx * sy - qy * sx) / denom
    u = (qx * ry - qy * rx) / denom
    if u < 0.0 or u > 1.0 or t < 0.0 or t > 1.0:
        return False
    return t * rlen > tol and (1.0 - t) * rlen > tol


def _leg_clear(scene: Scene, a: Point2, b: Point2) -> bool:
    for w in scene.walls:
        if _leg_blocked_by(a, b, w.segment):
            return False
    return True


def _reflection_point(img: Point2, target: Point2, wall: Segment,
                      tol: float = INTERIOR_TOL) -> Optional[Point2]:
    """Crossing of the segment img->target with `wall`, required to be strictly
    interior to the wall and strictly between img and target."""
    rx, ry = target.x - img.x, target.y - img.y
    sx, sy = wall.b.x - wall.a.x, wall.b.y - wall.a.y
    qx, qy = wall.a.x - img.x, wall.a.y - img.y
    rlen = math.hypot(rx, ry)
    slen = math.hypot(sx, sy)
    denom = rx * sy - ry * sx
    if abs(denom) <= 1e-12 * rlen * slen:
        return None
    t = (qx * sy - qy * sx) / denom
    u = (qx * ry - qy * rx) / denom
    if not (t * rlen > tol and (1.0 - t) * rlen > tol):
        return None
    if not (u * slen > tol and (1.0 - u) * slen > tol):
        return None
    return Point2(img.x + t * rx, img.y + t * ry)


# ---------------------------------------------------------------------------
# image tree (source mirrored across ordered wall sequences)
# ---------------------------------------------------------------------------

def _side(wall: Segment, p: Point2) -> float:
    """Signed area cross product; sign tells which side of the wall line p is on."""
    return (wall.b.x - wall.a.x) * (p.y - wall.a.y) - (wall.b.y - wall.a.y) * (p.x - wall.a.x)


@lru_cache(maxsize=64)
def _image_tree(scene: Scene, source: Point2,
                max_order: int) -> tuple[tuple[tuple[int, ...], tuple[Point2, ...]], ...]:
    """All ordered wall sequences up to max_order with their mirrored sources.

    A sequence is pruned when no point of the candidate next wall lies strictly
    on the far side of the previous wall's line from the current image: the
    back-trace segment could then never cross the previous wall.
    """
    nodes: list[tuple[tuple[int, ...], tuple[Point2, ...]]] = []

    def extend(seq: tuple[int, ...], images: tuple[Point2, ...]):
        last_img = images[-1] if images else source
        prev_wall = scene.walls[seq[-1]].segment if seq else None
        side_img = _side(prev_wall, last_img) if prev_wall is not None else 0.0
        for wi, wall in enumerate(scene.walls):
            if seq and wi == seq[-1]:
                continue  # a planar wall cannot reflect twice in a row
            seg = wall.segment
            if prev_wall is not None:
                if side_img == 0.0:
                    return  # image on the previous wall's line: degenerate
                ea = _side(prev_wall, seg.a) * side_img
                eb = _side(prev_wall, seg.b) * side_img
                if ea >= 0.0 and eb >= 0.0:
                    continue  # wall entirely on the image's side: unreachable
            img = mirror_point(last_img, seg)
            if img.distance_to(last_img) <= INTERIOR_TOL:
                continue  # source on the wall line: no reflection
            node = (seq + (wi,), images + (img,))
            nodes.append(node)
            if len(node[0]) < max_order:
                extend(*node)

    if max_order >= 1:
        extend((), ())
    return tuple(nodes)


def _assemble(scene: Scene, gnb: Point2, ue: Point2, seq: tuple[int, ...],
              images: tuple[Point2, ...]) -> Optional[PropagationPath]:
    """Back-trace reflection points for one wall sequence; None if invalid."""
    points: list[Point2] = []
    target = ue
    for j in range(len(seq) - 1, -1, -1):
        r = _reflection_point(images[j], target, scene.walls[seq[j]].segment)
        if r is None:
            return None
        points.append(r)
        target = r
    points.reverse()
    vertices = [gnb] + points + [ue]
    length = 0.0
    for a, b in zip(vertices, vertices[1:]):
        leg = a.distance_to(b)
        if leg <= INTERIOR_TOL:
            return None
        if not _leg_clear(scene, a, b):
            return None
        length += leg
    return PropagationPath(
        order=len(seq),
        vertices=tuple(vertices),
        length=length,
        aod=bearing_from_to(gnb, vertices[1]),
        aoa=bearing_from_to(ue, vertices[-2]),
        wall_ids=seq,
    )


def trace_paths(scene: Scene, gnb: Point2, ue: Point2, max_order: int = 3) -> list[PropagationPath]:
    """Enumerate every valid propagation path of order <= max_order.

    The direct path is included iff the gnb-ue segment is clear of all walls.
    Results are deduplicated and sorted by (order, length, aod, aoa) so output
    order is deterministic.
    """
    if max_order < 0 or max_order > MAX_ORDER_LIMIT:
        raise ConfigError(f"max_order must be in [0, {MAX_ORDER_LIMIT}], got {max_order}")
    if gnb.x == ue.x and gnb.y == ue.y:
        raise DegenerateGeometry("gnb and ue coincide")

    paths: list[PropagationPath] = []
    if _leg_clear(scene, gnb, ue):
        paths.append(PropagationPath(
            order=0,
            vertices=(gnb, ue),
            length=gnb.distance_to(ue),
            aod=bearing_from_to(gnb, ue),
            aoa=bearing_from_to(ue, gnb),
        ))
    for seq, images in _image_tree(scene, gnb, max_order):
        p = _assemble(scene, gnb, ue, seq, images)
        if p is not None:
            paths.append(p)

    seen: set[tuple] = set()
    unique: list[PropagationPath] = []
    for p in paths:
        key = (p.order, tuple((round(v.x, 9), round(v.y, 9)) for v in p.vertices))
        if key not in seen:
            seen.add(key)
            unique.append(p)
    unique.sort(key=lambda p: (p.order, p.length, p.aod.degrees, p.aoa.degrees))
    return unique


def validate_path(scene: Scene, path: PropagationPath, angle_tol: float = 1e-9) -> bool:
    """Check a path obeys the specular reflection law at every bounce and that
    all legs are unobstructed. Returns False on any violation."""
    v = path.vertices
    if len(v) < 2 or path.order != len(v) - 2 or len(path.wall_ids) != path.order:
        return False
    for a, b in zip(v, v[1:]):
        if a.distance_to(b) <= INTERIOR_TOL or not _leg_clear(scene, a, b):
            return False
    for i, wi in enumerate(path.wall_ids):
        if wi < 0 or wi >= len(scene.walls):
            return False
        seg = scene.walls[wi].segment
        prev_pt, pt, next_pt = v[i], v[i + 1], v[i + 2]
        dx, dy = seg.b.x - seg.a.x, seg.b.y - seg.a.y
        nlen = math.hypot(dx, dy)
        nx, ny = dy / nlen, -dx / nlen
        ix, iy = pt.x - prev_pt.x, pt.y - prev_pt.y
        ilen = math.hypot(ix, iy)
        ix, iy = ix / ilen, iy / ilen
        dot = ix * nx + iy * ny
        rx, ry = ix - 2.0 * dot * nx, iy - 2.0 * dot * ny  # mirrored incident ray
        ox, oy = next_pt.x - pt.x, next_pt.y - pt.y
        olen = math.hypot(ox, oy)
        ox, oy = ox / olen, oy / olen
        ang = abs(math.atan2(rx * oy - ry * ox, rx * ox + ry * oy))
        if ang > angle_tol:
            return False
    return True


# ---------------------------------------------------------------------------
# scene file format
# ---------------------------------------------------------------------------

def scene_to_json(scene: Scene) -> str:
    """Serialize a scene to its JSON text form."""
    doc = {
        "walls": [
            {
                "x1": w.segment.a.x, "y1": w.segment.a.y,
                "x2": w.segment.b.x, "y2": w.segment.b.y,
                "loss_db": w.loss_db,
            }
            for w in scene.walls
        ],
        "gnbs": [
            {"id": g.id, "x": g.position.x, "y": g.position.y, "z": g.height}
            for g in scene.gnbs
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    """Parse a scene from JSON text; raises DataError with position info."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataError(f"scene JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise DataError("scene JSON must be an object with 'walls' and 'gnbs'")
    walls = []
    for i, w in enumerate(doc.get("walls", [])):
        try:
            seg = Segment(Point2(float(w["x1"]), float(w["y1"])),
                          Point2(float(w["x2"]), float(w["y2"])))
            walls.append(Wall(seg, float(w.get("loss_db", 6.0))))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"walls[{i}]: {e}") from e
    gnbs = []
    for i, g in enumerate(doc.get("gnbs", [])):
        try:
            gnbs.append(GnbSite(g["id"], Point2(float(g["x"]), float(g["y"])),
                                float(g.get("z", 0.0))))
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"gnbs[{i}]: {e}") from e
    return Scene(walls=tuple(walls), gnbs=tuple(gnbs))


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(scene_to_json(scene))


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_json(f.read())
