import math

import numpy as np
import pytest

from mploc.errors import ConfigError, DataError
from mploc.geometry import Point2, Segment
from mploc.raytracer import (
    GnbSite,
    PropagationPath,
    Scene,
    Wall,
    load_scene,
    save_scene,
    scene_from_json,
    scene_to_json,
    trace_paths,
    validate_path,
)

from conftest import corner_scene, sawtooth_street


def mirror_y(p: Point2, c: float) -> Point2:
    """Reflection across the horizontal line y=c, computed by hand."""
    return Point2(p.x, 2.0 * c - p.y)


def wall_y(c: float, x0: float = -50.0, x1: float = 550.0, loss: float = 6.0) -> Wall:
    return Wall(Segment(Point2(x0, c), Point2(x1, c)), loss)


class TestTraceDirect:
    def test_empty_scene_single_direct_path(self):
        paths = trace_paths(Scene(), Point2(0, 0), Point2(30, 0), 3)
        assert len(paths) == 1
        p = paths[0]
        assert p.order == 0
        assert p.length == pytest.approx(30.0)
        assert p.aod.degrees == pytest.approx(90.0)
        assert p.aoa.degrees == pytest.approx(270.0)

    def test_blocking_wall_kills_direct_path(self):
        scene = Scene(walls=(Wall(Segment(Point2(10, -5), Point2(10, 5))),))
        paths = trace_paths(scene, Point2(0, 0), Point2(20, 0), 1)
        assert all(p.order != 0 for p in paths)

    def test_max_order_guard(self):
        with pytest.raises(ConfigError):
            trace_paths(Scene(), Point2(0, 0), Point2(1, 0), 9)
        with pytest.raises(ConfigError):
            trace_paths(Scene(), Point2(0, 0), Point2(1, 0), -1)


class TestSingleBounce:
    def test_one_wall_image_path(self):
        scene = Scene(walls=(wall_y(10.0),))
        gnb, ue = Point2(0, 0), Point2(20, 0)
        paths = trace_paths(scene, gnb, ue, 1)
        assert sorted(p.order for p in paths) == [0, 1]
        bounce = next(p for p in paths if p.order == 1)
        # image oracle: mirror the source across y=10 and measure to the receiver
        expect = math.hypot(20 - 0, 0 - 20)
        assert bounce.length == pytest.approx(expect, abs=1e-9)
        assert bounce.vertices[1].x == pytest.approx(10.0)
        assert bounce.vertices[1].y == pytest.approx(10.0)

    def test_reflection_point_outside_wall_rejected(self):
        # wall too short to host the reflection point at x=10
        scene = Scene(walls=(Wall(Segment(Point2(0, 10), Point2(8, 10))),))
        paths = trace_paths(scene, Point2(0, 0), Point2(20, 0), 1)
        assert [p.order for p in paths] == [0]

    def test_endpoint_hit_rejected(self):
        # reflection point would land exactly on the wall end at x=10
        scene = Scene(walls=(Wall(Segment(Point2(0, 10), Point2(10, 10))),))
        paths = trace_paths(scene, Point2(0, 0), Point2(20, 0), 1)
        assert [p.order for p in paths] == [0]

    def test_image_identity_random_single_walls(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 200:
            gnb = Point2(rng.uniform(-20, 20), rng.uniform(-20, 20))
            ue = Point2(rng.uniform(-20, 20), rng.uniform(-20, 20))
            a = Point2(rng.uniform(-30, 30), rng.uniform(25, 40))
            b = Point2(rng.uniform(-30, 30), rng.uniform(25, 40))
            if a.distance_to(b) < 1.0 or gnb.distance_to(ue) < 1.0:
                continue
            seg = Segment(a, b)
            scene = Scene(walls=(Wall(seg),))
            for p in trace_paths(scene, gnb, ue, 1):
                if p.order != 1:
                    continue
                from mploc.geometry import mirror_point
                img = mirror_point(gnb, seg)
                assert p.length == pytest.approx(img.distance_to(ue), abs=1e-9)
                checked += 1


class TestCorridorCensus:
    def test_two_wall_corridor_orders_and_lengths(self):
        top, bot = 10.0, -10.0
        scene = Scene(walls=(wall_y(top), wall_y(bot)))
        gnb, ue = Point2(0, 4), Point2(30, 0)
        paths = trace_paths(scene, gnb, ue, 3)
        assert sorted(p.order for p in paths) == [0, 1, 1, 2, 2, 3, 3]
        # hand-built nested images for each bounce sequence
        seqs = {
            (0,): mirror_y(gnb, top),
            (1,): mirror_y(gnb, bot),
            (0, 1): mirror_y(mirror_y(gnb, top), bot),
            (1, 0): mirror_y(mirror_y(gnb, bot), top),
            (0, 1, 0): mirror_y(mirror_y(mirror_y(gnb, top), bot), top),
            (1, 0, 1): mirror_y(mirror_y(mirror_y(gnb, bot), top), bot),
        }
        by_walls = {p.wall_ids: p for p in paths if p.order > 0}
        assert set(by_walls) == set(seqs)
        for seq, img in seqs.items():
            assert by_walls[seq].length == pytest.approx(img.distance_to(ue), abs=1e-9)

    def test_monotone_in_max_order(self):
        scene = Scene(walls=(wall_y(10.0), wall_y(-10.0)))
        gnb, ue = Point2(0, 4), Point2(30, 0)
        previous = set()
        for k in range(0, 5):
            keys = {(p.order, p.wall_ids) for p in trace_paths(scene, gnb, ue, k)}
            assert previous <= keys
            previous = keys


class TestReversibility:
    @pytest.mark.parametrize("builder", [corner_scene, sawtooth_street])
    def test_reverse_trace_mirrors_paths(self, builder):
        bundle = builder()
        gnb, ue = Point2(3.0, 1.0), Point2(17.0, 0.2)
        fwd = trace_paths(bundle.scene, gnb, ue, 2)
        rev = trace_paths(bundle.scene, ue, gnb, 2)
        assert len(fwd) == len(rev)
        rev_keys = {}
        for p in rev:
            key = (p.order, tuple(reversed(p.wall_ids)))
            rev_keys[key] = p
        for p in fwd:
            q = rev_keys[(p.order, p.wall_ids)]
            assert q.length == pytest.approx(p.length, abs=1e-9)
            assert q.aoa.degrees == pytest.approx(p.aod.degrees, abs=1e-9)
            assert q.aod.degrees == pytest.approx(p.aoa.degrees, abs=1e-9)
            for va, vb in zip(p.vertices, reversed(q.vertices)):
                assert va.distance_to(vb) < 1e-9


class TestValidatePath:
    def test_traced_paths_validate(self):
        scene = Scene(walls=(wall_y(10.0), wall_y(-10.0)))
        for p in trace_paths(scene, Point2(0, 4), Point2(30, 0), 3):
            assert validate_path(scene, p)

    def test_perturbed_reflection_point_fails(self):
        scene = Scene(walls=(wall_y(10.0),))
        paths = trace_paths(scene, Point2(0, 0), Point2(20, 0), 1)
        bounce = next(p for p in paths if p.order == 1)
        bad = PropagationPath(
            order=1,
            vertices=(bounce.vertices[0], Point2(11.0, 10.0), bounce.vertices[2]),
            length=bounce.length,
            aod=bounce.aod,
            aoa=bounce.aoa,
            wall_ids=bounce.wall_ids,
        )
        assert not validate_path(scene, bad)

    def test_direct_path_validates(self):
        scene = Scene(walls=(wall_y(10.0),))
        direct = next(p for p in trace_paths(scene, Point2(0, 0), Point2(20, 0), 1)
                      if p.order == 0)
        assert validate_path(scene, direct)

    def test_occluded_direct_path_fails(self):
        blocker = Wall(Segment(Point2(10, -5), Point2(10, 5)))
        clear = Scene()
        direct = trace_paths(clear, Point2(0, 0), Point2(20, 0), 0)[0]
        assert not validate_path(Scene(walls=(blocker,)), direct)


class TestSceneModel:
    def test_negative_loss_rejected(self):
        with pytest.raises(ConfigError):
            Wall(Segment(Point2(0, 0), Point2(1, 0)), loss_db=-1.0)

    def test_duplicate_gnb_ids_rejected(self):
        with pytest.raises(ConfigError):
            Scene(gnbs=(GnbSite(id=1, position=Point2(0, 0)),
                        GnbSite(id=1, position=Point2(5, 0))))

    def test_bounds(self):
        scene = Scene(walls=(Wall(Segment(Point2(-3, 1), Point2(4, 2))),),
                      gnbs=(GnbSite(id=0, position=Point2(0, -7)),))
        assert scene.bounds == (-3, -7, 4, 2)
        assert Scene().bounds is None


class TestSceneJson:
    def test_round_trip(self, tmp_path):
        scene = Scene(
            walls=(Wall(Segment(Point2(0, 10), Point2(100, 10)), 5.5),),
            gnbs=(GnbSite(id=0, position=Point2(0, 4), height=10.0),
                  GnbSite(id="site-b", position=Point2(250, 4), height=0.0)),
        )
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        assert load_scene(path) == scene

    def test_exact_field_names(self):
        scene = Scene(walls=(Wall(Segment(Point2(1, 2), Point2(3, 4)), 6.0),),
                      gnbs=(GnbSite(id=7, position=Point2(5, 6), height=8.0),))
        text = scene_to_json(scene)
        for token in ('"x1"', '"y1"', '"x2"', '"y2"', '"loss_db"', '"id"', '"x"', '"y"', '"z"'):
            assert token in text

    def test_parse_error_reports_position(self):
        with pytest.raises(DataError, match="line"):
            scene_from_json('{"walls": [\n  {"x1": }\n]}')

    def test_missing_field_reports_index(self):
        with pytest.raises(DataError, match=r"walls\[0\]"):
            scene_from_json('{"walls": [{"x1": 0, "y1": 0, "x2": 1}], "gnbs": []}')
