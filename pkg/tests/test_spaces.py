from fractions import Fraction

import numpy as np
import pytest

from coarsebound.errors import BallSizeError, CapabilityError, PointOutsideBallError, SpaceSpecError
from coarsebound.spaces import (
    axis_distortion,
    ball,
    ball_containing,
    lines_through,
    parse_space,
    ray_from,
    simplex_length,
)


def test_parse_space_families():
    assert parse_space("zd:2").generator_count == 4
    assert parse_space("bs:1:2").spec == "bs:1:2"
    assert parse_space("lumberjack").spec == "lumberjack"
    assert parse_space("lumberjack:slope=1/2").height(3) == 2
    assert not parse_space("lumberjack").capabilities.has_geodesic_oracle


@pytest.mark.parametrize("spec", ["zd:0", "nope:3", "bs:2:3", "free:x", "lamp"])
def test_parse_space_rejects_with_supported_list(spec):
    with pytest.raises(SpaceSpecError) as exc:
        parse_space(spec)
    assert "supported" in str(exc.value)


def test_neighbors_of_identity(z2, heis):
    got = {z2.format_point(p) for p in z2.neighbors(z2.basepoint)}
    assert got == {"1,0", "-1,0", "0,1", "0,-1"}
    assert len(set(heis.neighbors(heis.basepoint))) == 4


def test_lamplighter_generators():
    lamp = parse_space("lamp:1")
    got = {lamp.format_point(p) for p in lamp.neighbors(lamp.basepoint)}
    assert got == {"1|", "-1|", "0|0"}
    assert len(ball(lamp, 2)) == 10


def test_heisenberg_relations(heis):
    x, y = heis.parse_point("1,0,0"), heis.parse_point("0,1,0")
    commutator = heis.multiply(heis.multiply(x, y), heis.multiply(heis.inverse(x), heis.inverse(y)))
    assert heis.format_point(commutator) == "0,0,1"
    assert heis.multiply(x, heis.inverse(x)) == heis.basepoint


def test_baumslag_solitar_relation():
    bs = parse_space("bs:1:2")
    a, b = bs.parse_point("1|0"), bs.parse_point("0|1")
    lhs = bs.multiply(bs.multiply(a, b), bs.inverse(a))
    assert lhs == bs.multiply(b, b)


@pytest.mark.parametrize(
    "spec, R, size",
    [("zd:1", 3, 7), ("zd:2", 2, 13), ("free:2", 3, 53), ("heis", 1, 5), ("lumberjack", 1, 2)],
)
def test_ball_sizes(spec, R, size):
    assert len(ball(parse_space(spec), R)) == size


def test_ball_interior_and_lengths(z1):
    b = ball(z1, 3)
    assert sorted(b.lengths) == [0, 1, 1, 2, 2, 3, 3]
    interior = {z1.format_point(b.points[i]) for i in b.interior_indices()}
    assert interior == {"-2", "-1", "0", "1", "2"}
    assert b.points[0] == z1.basepoint
    assert b.max_degree() == 2


def test_ball_cap_names_radius(monkeypatch, z2):
    monkeypatch.setenv("COARSEBOUND_BALL_CAP", "10")
    with pytest.raises(BallSizeError) as exc:
        ball(z2, 3)
    assert exc.value.radius == 2
    assert "COARSEBOUND_BALL_CAP" in str(exc.value)


def test_point_outside_ball(z2):
    b = ball(z2, 1)
    with pytest.raises(PointOutsideBallError):
        b.idx(z2.parse_point("2,0"))
    assert ball_containing(z2, z2.parse_point("2,1")).radius == 3


def test_simplex_length(z2):
    b = ball(z2, 5)
    p = z2.parse_point
    assert simplex_length(b, (p("0,0"), p("1,0"))) == 1
    assert simplex_length(b, (p("3,0"), p("4,0"))) == 4
    assert simplex_length(b, (p("0,0"), p("1,0"), p("1,1"))) == 2


def test_lines_through_lattice(z2):
    delta = z2.parse_point("2,3")
    (line,) = lines_through(z2, delta)
    assert z2.format_point(line.base) == "0,3"
    assert line.weight == 1
    assert z2.format_point(ray_from(z2, line, delta, 1)) == "3,3"
    assert ray_from(z2, line, delta, 0) == delta


def test_ray_far_out_stays_on_line(z2):
    delta = z2.parse_point("2,3")
    (line,) = lines_through(z2, delta)
    assert z2.format_point(ray_from(z2, line, delta, 4)) == "6,3"
    assert ball(z2, 9).length(ray_from(z2, line, delta, 4)) == 9


def test_tie_break_is_deterministic(z2):
    (line,) = lines_through(z2, z2.basepoint)
    first = ray_from(z2, line, z2.basepoint, 1)
    assert first == ray_from(z2, line, z2.basepoint, 1)
    assert z2.format_point(first) == "1,0"


def test_heisenberg_axis(heis):
    (line,) = lines_through(heis, heis.basepoint)
    assert line.base == heis.basepoint
    x2 = heis.parse_point("2,0,0")
    (line,) = lines_through(heis, x2)
    assert heis.format_point(ray_from(heis, line, x2, 2)) == "4,0,0"


def test_free_group_line_base(free2):
    ab = free2.parse_point("ab")
    (line,) = lines_through(free2, ab)
    assert line.base == ab


def test_lumberjack_has_no_oracle():
    lj = parse_space("lumberjack")
    with pytest.raises(CapabilityError):
        lines_through(lj, lj.basepoint)


def test_lumberjack_metric():
    lj = parse_space("lumberjack")
    p, q = lj.parse_point("3,2"), lj.parse_point("5,1")
    assert lj.distance(p, q) == 5
    assert lj.distance(p, lj.parse_point("3,3")) == 1
    b = ball(lj, 6)
    assert b.distance(p, q) == 5
    with pytest.raises(SpaceSpecError):
        lj.parse_point("2,5")


def test_axis_distortion():
    z2 = parse_space("zd:2")
    assert axis_distortion(z2, "e1", 5) == [(n, n) for n in range(6)]
    table = dict(axis_distortion(parse_space("bs:1:2"), "b", 8))
    assert table[8] <= 6 < 8


def test_unknown_generator(z2):
    with pytest.raises(SpaceSpecError):
        axis_distortion(z2, "q", 3)


SPACES = ["zd:2", "free:2", "heis", "lamp:1", "bs:1:2", "lumberjack"]
ORACLE_SPACES = ["zd:2", "free:2", "heis", "lamp:1", "bs:1:2"]


@pytest.mark.parametrize("spec", SPACES)
def test_neighbors_are_symmetric(spec):
    space = parse_space(spec)
    b = ball(space, 5)
    rng = np.random.default_rng(1)
    for k in rng.integers(len(b), size=1000):
        p = b.points[int(k)]
        for q in space.neighbors(p):
            assert p in space.neighbors(q)


@pytest.mark.parametrize("spec", SPACES)
def test_lengths_respect_distance(spec):
    space = parse_space(spec)
    b = ball(space, 5)
    rng = np.random.default_rng(6)
    for _ in range(100):
        i, j = (int(k) for k in rng.integers(len(b), size=2))
        p, q = b.points[i], b.points[j]
        assert abs(b.lengths[i] - b.lengths[j]) <= b.distance(p, q)


@pytest.mark.parametrize("spec", ORACLE_SPACES)
def test_rays_walk_away_from_base(spec):
    space = parse_space(spec)
    b = ball(space, 7)
    for p, n in zip(b.points, b.lengths):
        if n > 2:
            break
        (line,) = lines_through(space, p, b)
        offset = b.distance(p, line.base)
        prev = p
        for k in range(1, 4):
            q = ray_from(space, line, p, k)
            assert abs(b.length(q) - b.length(prev)) <= 1
            assert b.distance(q, line.base) == offset + k
            prev = q


@pytest.mark.parametrize("spec", ORACLE_SPACES)
def test_line_weights_sum_to_one(spec):
    space = parse_space(spec)
    b = ball(space, 4)
    for p in b.points:
        assert sum((line.weight for line in lines_through(space, p, b)), Fraction(0)) == 1
