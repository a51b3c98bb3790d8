"""Core types, config validation and formation geometry."""

import math
import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from binc.core import (ConfigError, EmptyFormation, Obstacle, SimParams, Vec2,
                       formation_center, formation_radius, format_config,
                       parse_config, validate_config, vec2)


def test_vec2_ops():
    a = Vec2(3.0, 4.0)
    assert a.norm() == 5.0
    assert a.unit() == Vec2(0.6, 0.8)
    assert (a + Vec2(1.0, 1.0)) == Vec2(4.0, 5.0)
    assert (a - Vec2(3.0, 4.0)) == Vec2(0.0, 0.0)
    assert a * 2.0 == Vec2(6.0, 8.0)
    assert a.clamped(5.0) == a
    assert a.clamped(2.5) == Vec2(1.5, 2.0)


def test_vec2_rejects_non_finite():
    with pytest.raises(ValueError):
        vec2(float("nan"), 0.0)
    with pytest.raises(ValueError):
        vec2(0.0, float("inf"))


class TestValidateConfig:
    def test_default_table_accepted(self):
        p = SimParams()
        assert validate_config(p) is p

    def test_idempotent(self):
        p = validate_config(SimParams())
        assert validate_config(p) is p

    def test_chello_guard_boundary(self):
        # t_chello * v_max = 100 >= 100 = R_rep / 2 must be rejected
        p = replace(SimParams(), t_chello=5.0)
        with pytest.raises(ConfigError) as exc:
            validate_config(p)
        codes = {v.code for v in exc.value.violations}
        assert "CHelloTooSlow" in codes
        msg = str(exc.value)
        assert "100.0" in msg  # substituted values rendered

    def test_chello_guard_default_margin(self):
        # default 2 s * 20 m/s = 40 < 100
        assert SimParams().t_chello * SimParams().v_max < SimParams().R_rep / 2

    def test_radii_ordering(self):
        p = replace(SimParams(), r_att=250.0)  # > d_tr = 200
        with pytest.raises(ConfigError) as exc:
            validate_config(p)
        assert any(v.code == "RadiiOrdering" for v in exc.value.violations)

    def test_nonpositive_tick(self):
        with pytest.raises(ConfigError) as exc:
            validate_config(replace(SimParams(), dt=0.0))
        assert any(v.code == "NonPositiveTick" for v in exc.value.violations)

    def test_timer_multiple(self):
        with pytest.raises(ConfigError) as exc:
            validate_config(replace(SimParams(), t_hello=0.7))
        assert any(v.code == "TimerNotTickMultiple" for v in exc.value.violations)

    def test_zero_nodes(self):
        with pytest.raises(ConfigError):
            validate_config(replace(SimParams(), n_uavs=0))

    def test_all_violations_reported(self):
        p = replace(SimParams(), dt=-1.0, r_att=250.0, t_chello=5.0)
        with pytest.raises(ConfigError) as exc:
            validate_config(p)
        codes = {v.code for v in exc.value.violations}
        assert {"NonPositiveTick", "RadiiOrdering", "CHelloTooSlow"} <= codes


class TestFormationGeometry:
    def test_center_triangle(self):
        pts = [Vec2(0, 0), Vec2(2, 0), Vec2(1, 3)]
        assert formation_center(pts) == Vec2(1.0, 1.0)

    def test_center_singleton(self):
        assert formation_center([Vec2(5, 5)]) == Vec2(5.0, 5.0)

    def test_center_matches_bruteforce_oracle(self):
        rng = random.Random(520)
        pts = [Vec2(rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4))
               for _ in range(520)]
        # independent summation oracle
        ox = sum(p.x for p in pts) / len(pts)
        oy = sum(p.y for p in pts) / len(pts)
        got = formation_center(pts)
        assert abs(got.x - ox) < 1e-9 and abs(got.y - oy) < 1e-9

    def test_radius_triangle(self):
        pts = [Vec2(0, 0), Vec2(2, 0), Vec2(1, 3)]
        # hand oracle: max(sqrt(2), sqrt(2), 2) = 2
        assert formation_radius(Vec2(1, 1), pts) == pytest.approx(2.0, abs=1e-12)

    def test_radius_singleton_zero(self):
        assert formation_radius(Vec2(5, 5), [Vec2(5, 5)]) == 0.0

    def test_radius_matches_scan_oracle(self):
        rng = random.Random(7)
        pts = [Vec2(rng.uniform(-100, 100), rng.uniform(-100, 100))
               for _ in range(100)]
        c = formation_center(pts)
        oracle = max(math.hypot(p.x - c.x, p.y - c.y) for p in pts)
        assert formation_radius(c, pts) == pytest.approx(oracle, abs=1e-9)

    def test_empty_raises(self):
        with pytest.raises(EmptyFormation):
            formation_center([])
        with pytest.raises(EmptyFormation):
            formation_radius(Vec2(0, 0), [])

    @given(st.lists(st.tuples(st.floats(-1e5, 1e5), st.floats(-1e5, 1e5)),
                    min_size=1, max_size=40))
    def test_radius_bounded_by_diameter(self, raw):
        pts = [Vec2(x, y) for x, y in raw]
        c = formation_center(pts)
        r = formation_radius(c, pts)
        diam = max((a - b).norm() for a in pts for b in pts)
        assert r <= diam + 1e-9
        assert r >= diam / 2 - 1e-9

    @given(st.lists(st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)),
                    min_size=1, max_size=30),
           st.tuples(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4)))
    def test_translation_equivariance(self, raw, shift):
        pts = [Vec2(x, y) for x, y in raw]
        t = Vec2(*shift)
        moved = [p + t for p in pts]
        c0 = formation_center(pts)
        c1 = formation_center(moved)
        assert abs(c1.x - (c0.x + t.x)) < 1e-9
        assert abs(c1.y - (c0.y + t.y)) < 1e-9
        r0 = formation_radius(c0, pts)
        r1 = formation_radius(c1, moved)
        assert abs(r0 - r1) < 1e-9


class TestConfigFile:
    def test_roundtrip(self):
        p = replace(SimParams(), n_uavs=60, seed=9,
                    obstacle=Obstacle(Vec2(2593.0, 0.0), 1000.0))
        text = format_config(p)
        assert parse_config(text) == p

    def test_comments_and_unknown_keys(self):
        assert parse_config("# just a comment\nn_uavs = 7\n").n_uavs == 7
        with pytest.raises(ConfigError) as exc:
            parse_config("bogus_key = 3\n")
        assert any(v.code == "UnknownKey" for v in exc.value.violations)

    def test_case_sensitive_radii(self):
        p = parse_config("r_rep = 90\nR_rep = 210\n")
        assert p.r_rep == 90.0
        assert p.R_rep == 210.0

    def test_obstacle_none(self):
        assert parse_config("obstacle = none\n").obstacle is None

    def test_destination(self):
        p = parse_config("destination = 500, -20\n")
        assert p.destination == Vec2(500.0, -20.0)
