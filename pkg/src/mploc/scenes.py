"""Built-in scene layouts and trajectory sampling.

Site placement follows a dense-deployment pattern: sites every `spacing`
meters along the receiver route, offset `lateral` meters sideways from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import TrajectoryPoint
from .errors import ConfigError
from .geometry import Point2, Segment
from .raytracer import GnbSite, Scene, Wall

SCENE_KINDS = ("corridor", "grid", "manhattan-block")


@dataclass(frozen=True)
class SceneBundle:
    """A generated scene plus the route its receiver is meant to travel."""

    scene: Scene
    route: tuple[Point2, ...]
    closed: bool = False


def _gnb_xs(length: float, spacing: float) -> list[float]:
    n = math.ceil(length / spacing) + 1
    return [i * spacing for i in range(n)]


def corridor(length: float = 500.0, width: float = 20.0, spacing: float = 250.0,
             lateral: float = 4.0, wall_loss_db: float = 6.0,
             gnb_height: float = 0.0, margin: float = 50.0) -> SceneBundle:
    """Street canyon: two parallel walls with the route along the center line."""
    if length <= 0 or width <= 0 or spacing <= 0:
        raise ConfigError("corridor length, width, and spacing must be positive")
    if abs(lateral) >= width / 2:
        raise ConfigError(f"lateral offset {lateral} must stay inside the {width} m corridor")
    half = width / 2.0
    walls = (
        Wall(Segment(Point2(-margin, half), Point2(length + margin, half)), wall_loss_db),
        Wall(Segment(Point2(-margin, -half), Point2(length + margin, -half)), wall_loss_db),
    )
    gnbs = tuple(
        GnbSite(id=i, position=Point2(x, lateral), height=gnb_height)
        for i, x in enumerate(_gnb_xs(length, spacing))
    )
    return SceneBundle(
        scene=Scene(walls=walls, gnbs=gnbs),
        route=(Point2(0.0, 0.0), Point2(length, 0.0)),
    )


def grid(blocks_x: int = 2, blocks_y: int = 2, block: float = 40.0, street: float = 20.0,
         spacing: float = 250.0, lateral: float = 4.0, wall_loss_db: float = 6.0,
         gnb_height: float = 0.0) -> SceneBundle:
    """Rectangular city blocks; the route runs along a central horizontal street."""
    if blocks_x < 1 or blocks_y < 1:
        raise ConfigError(f"grid needs at least 1x1 blocks, got {blocks_x}x{blocks_y}")
    if block <= 0 or street <= 0:
        raise ConfigError("block and street sizes must be positive")
    if abs(lateral) >= street / 2:
        raise ConfigError(f"lateral offset {lateral} must stay inside the {street} m street")
    pitch = block + street
    walls = []
    for i in range(blocks_x):
        for j in range(blocks_y):
            x0, y0 = street + i * pitch, street + j * pitch
            x1, y1 = x0 + block, y0 + block
            corners = [Point2(x0, y0), Point2(x1, y0), Point2(x1, y1), Point2(x0, y1)]
            for a, b in zip(corners, corners[1:] + corners[:1]):
                walls.append(Wall(Segment(a, b), wall_loss_db))
    width = blocks_x * pitch + street
    y_route = (blocks_y // 2) * pitch + street / 2.0
    x_start, x_end = street / 2.0, width - street / 2.0
    gnbs = tuple(
        GnbSite(id=i, position=Point2(x_start + x, y_route + lateral), height=gnb_height)
        for i, x in enumerate(_gnb_xs(x_end - x_start, spacing))
    )
    return SceneBundle(
        scene=Scene(walls=tuple(walls), gnbs=gnbs),
        route=(Point2(x_start, y_route), Point2(x_end, y_route)),
    )


def manhattan_block(block: float = 60.0, street: float = 20.0, spacing: float = 250.0,
                    lateral: float = 4.0, wall_loss_db: float = 6.0,
                    gnb_height: float = 0.0) -> SceneBundle:
    """A single building circled by the route; sites sit outside the loop.

    Around each corner the direct path to most sites is blocked, which makes
    this layout a compact source of purely reflected epochs.
    """
    if block <= 0 or street <= 0:
        raise ConfigError("block and street sizes must be positive")
    corners = [Point2(0, 0), Point2(block, 0), Point2(block, block), Point2(0, block)]
    walls = tuple(
        Wall(Segment(a, b), wall_loss_db)
        for a, b in zip(corners, corners[1:] + corners[:1])
    )
    s2 = street / 2.0
    route = (
        Point2(-s2, -s2), Point2(block + s2, -s2),
        Point2(block + s2, block + s2), Point2(-s2, block + s2),
    )
    ring = _rect_ring(-s2 - lateral, block + s2 + lateral)
    perimeter = 4.0 * (block + street + 2.0 * lateral)
    n_gnbs = max(2, math.ceil(perimeter / spacing))
    gnbs = tuple(
        GnbSite(id=i, position=_point_at(ring, perimeter * i / n_gnbs), height=gnb_height)
        for i in range(n_gnbs)
    )
    return SceneBundle(scene=Scene(walls=walls, gnbs=gnbs), route=route, closed=True)


def _rect_ring(lo: float, hi: float) -> tuple[Point2, ...]:
    return (Point2(lo, lo), Point2(hi, lo), Point2(hi, hi), Point2(lo, hi))


def _point_at(loop: tuple[Point2, ...], s: float) -> Point2:
    """Point at arclength s along a closed polyline."""
    legs = list(zip(loop, loop[1:] + loop[:1]))
    total = sum(a.distance_to(b) for a, b in legs)
    s = s % total
    for a, b in legs:
        leg = a.distance_to(b)
        if s <= leg:
            f = s / leg
            return Point2(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
        s -= leg
    return loop[0]


def sample_trajectory(bundle: SceneBundle, epochs: int, z: float = 0.0,
                      t0: float = 0.0, dt: float = 1.0) -> list[TrajectoryPoint]:
    """Evenly spaced epochs along a bundle's route, one per time step."""
    if epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {epochs}")
    pts = list(bundle.route)
    if bundle.closed:
        legs = list(zip(pts, pts[1:] + pts[:1]))
    else:
        legs = list(zip(pts, pts[1:]))
    total = sum(a.distance_to(b) for a, b in legs)

    def at(s: float) -> Point2:
        for a, b in legs:
            leg = a.distance_to(b)
            if s <= leg or (a, b) == legs[-1]:
                f = min(s / leg, 1.0)
                return Point2(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
            s -= leg
        return pts[-1]

    out = []
    for i in range(epochs):
        if bundle.closed:
            s = total * i / epochs
        else:
            s = 0.0 if epochs == 1 else total * i / (epochs - 1)
        out.append(TrajectoryPoint(t=t0 + i * dt, position=at(s), z=z))
    return out
