"""Shared scene builders and fixtures for the test suite."""

from __future__ import annotations

import math

import pytest

from mploc.geometry import Point2, Segment
from mploc.raytracer import GnbSite, Scene, Wall
from mploc.scenes import SceneBundle


def corner_scene(length: float = 60.0, spacing: float = 20.0, gnb_y: float = 4.0,
                 loss: float = 6.0) -> SceneBundle:
    """One horizontal wall above the route plus one vertical end wall.

    Every epoch sees exactly two single-bounce paths, off perpendicular walls,
    so the pair of constraint lines always crosses at a right angle.
    """
    walls = (
        Wall(Segment(Point2(-40.0, 8.0), Point2(length + 80.0, 8.0)), loss),
        Wall(Segment(Point2(length + 30.0, -40.0), Point2(length + 30.0, 7.0)), loss),
    )
    n = math.ceil(length / spacing) + 1
    gnbs = tuple(GnbSite(id=i, position=Point2(i * spacing, gnb_y)) for i in range(n))
    return SceneBundle(scene=Scene(walls=walls, gnbs=gnbs),
                       route=(Point2(0.0, 0.0), Point2(length, 0.0)))


def sawtooth_street(length: float = 80.0, period: float = 6.0, tooth: float = 4.0,
                    offset: float = 1.5, gnb_y: float = 0.75, spacing: float = 5.0,
                    loss: float = 6.0) -> SceneBundle:
    """Street lined with 45-degree facets: north teeth rise, south teeth fall.

    Any (north, south) bounce pair reflects off perpendicular surfaces, which
    keeps two-path positioning well conditioned; paths stay a few meters long.
    """
    walls = []
    x = -period
    while x < length + period:
        walls.append(Wall(Segment(Point2(x, offset), Point2(x + tooth, offset + tooth)), loss))
        walls.append(Wall(Segment(Point2(x, -offset), Point2(x + tooth, -offset - tooth)), loss))
        x += period
    n = math.ceil(length / spacing) + 1
    gnbs = tuple(GnbSite(id=i, position=Point2(i * spacing, gnb_y)) for i in range(n))
    return SceneBundle(scene=Scene(walls=tuple(walls), gnbs=gnbs),
                       route=(Point2(0.0, 0.0), Point2(length, 0.0)))


@pytest.fixture(scope="session")
def corner_bundle() -> SceneBundle:
    return corner_scene()


@pytest.fixture(scope="session")
def sawtooth_bundle() -> SceneBundle:
    return sawtooth_street()
