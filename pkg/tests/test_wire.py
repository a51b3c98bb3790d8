"""Codec roundtrips, sizing arithmetic and sequence-number order."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from binc.core import Vec2
from binc import wire
from binc.wire import (CHello, Cmn, GroupInfo, Hello, Htc, MalformedPacket,
                       NeighborInfo, RangeViolation, Tc, decode, encode,
                       newer_than, purpose_split, size_of)


def q(x):
    return round(x * 100) / 100


def _rand_vec(rng, lim=20000.0):
    return Vec2(q(rng.uniform(-lim, lim)), q(rng.uniform(-lim, lim)))


def _rand_hello(rng: random.Random) -> Hello:
    n = rng.randrange(0, 8)
    ids = rng.sample(range(2, 1000), n)
    follow = rng.random() < 0.5
    return Hello(
        origin=1,
        degree=rng.randrange(0, 128),
        position=_rand_vec(rng),
        velocity=_rand_vec(rng, 20.0),
        head_id=rng.choice([None, rng.randrange(1, 1000)]),
        leader_id=rng.choice([None, rng.randrange(1, 1000)]),
        vel_seq=rng.randrange(0, 65536),
        follow_group=rng.randrange(1, 1000) if follow else None,
        follow_seq=rng.randrange(0, 65536) if follow else None,
        neighbors=tuple(NeighborInfo(i, rng.randrange(0, 128), _rand_vec(rng),
                                     rng.random() < 0.3) for i in ids),
    )


def _rand_chello(rng: random.Random) -> CHello:
    g = rng.randrange(0, 6)
    heads = rng.sample(range(2, 1000), g)
    follow = rng.random() < 0.5
    return CHello(
        origin_head=1,
        center=_rand_vec(rng),
        radius=q(rng.uniform(0, 5000)),
        velocity=_rand_vec(rng, 20.0),
        leader_id=rng.randrange(1, 1000),
        vel_seq=rng.randrange(0, 65536),
        follow_group=rng.randrange(1, 1000) if follow else None,
        follow_seq=rng.randrange(0, 65536) if follow else None,
        neighbor_groups=tuple(GroupInfo(h, _rand_vec(rng), q(rng.uniform(0, 5000)),
                                        _rand_vec(rng, 20.0)) for h in heads),
    )


def _rand_cmn(rng: random.Random) -> Cmn:
    n = rng.randrange(1, 12)
    ids = rng.sample(range(1, 1000), n)
    ranks = [rng.randrange(1, 5) for _ in ids]
    ranks[rng.randrange(n)] = 0  # exactly one leader
    return Cmn(head_id=ids[0], group_force=_rand_vec(rng, 5.0),
               members=tuple(zip(ids, ranks)))


def _rand_tc(rng: random.Random) -> Tc:
    ids = tuple(rng.sample(range(1, 1000), rng.randrange(1, 10)))
    return Tc(origin=rng.randrange(1, 1000), advertised=ids,
              seq=rng.randrange(0, 65536))


def _rand_htc(rng: random.Random) -> Htc:
    ids = tuple(rng.sample(range(1, 1000), rng.randrange(1, 10)))
    return Htc(origin_head=rng.randrange(1, 1000), members=ids,
               seq=rng.randrange(0, 65536))


MAKERS = [_rand_hello, _rand_chello, _rand_cmn, _rand_tc, _rand_htc]


class TestSizes:
    def test_hello_base(self):
        # layout sum: 4 hdr + 2+1+8+8+2+2+2+2+2+1 = 34
        m = Hello(1, 3, Vec2(0, 0), Vec2(0, 0), None, None, 0)
        assert size_of(m) == 34
        assert len(encode(m)) == 34

    def test_hello_per_neighbor(self):
        # entry = id 2 + degree 1 + position 8 = 11
        nbrs = tuple(NeighborInfo(i + 2, 1, Vec2(1, 1)) for i in range(5))
        m = Hello(1, 5, Vec2(0, 0), Vec2(0, 0), None, None, 0, neighbors=nbrs)
        assert size_of(m) == 34 + 55
        assert len(encode(m)) == 34 + 55

    def test_chello_per_group(self):
        # entry = head 2 + center 8 + radius 4 + velocity 8 = 22
        groups = tuple(GroupInfo(i + 2, Vec2(0, 0), 10.0, Vec2(0, 0))
                       for i in range(3))
        m = CHello(1, Vec2(0, 0), 5.0, Vec2(0, 0), 1, 0, neighbor_groups=groups)
        assert size_of(m) == 35 + 66
        assert len(encode(m)) == 35 + 66

    def test_cmn_per_member(self):
        members = tuple((i + 1, min(i, 4) if i else 0) for i in range(10))
        m = Cmn(1, Vec2(0, 0), members)
        assert size_of(m) == 15 + 30
        assert len(encode(m)) == 15 + 30

    def test_tc_htc_per_id(self):
        t = Tc(1, (2, 3, 4), 7)
        h = Htc(1, (2, 3), 7)
        assert size_of(t) == 9 + 6 == len(encode(t))
        assert size_of(h) == 9 + 4 == len(encode(h))

    def test_monotone_in_list_length(self):
        rng = random.Random(0)
        base = _rand_hello(rng)
        longer = Hello(**{**base.__dict__,
                          "neighbors": base.neighbors + (
                              NeighborInfo(1001, 1, Vec2(0, 0)),)})
        assert size_of(longer) == size_of(base) + 11


class TestRoundtrip:
    def test_fuzz_roundtrip_all_types(self):
        rng = random.Random(42)
        for maker in MAKERS:
            for _ in range(2000):
                msg = maker(rng)
                blob = encode(msg)
                assert len(blob) == size_of(msg)
                assert decode(blob) == msg

    def test_truncated_raises(self):
        blob = encode(_rand_hello(random.Random(1)))
        with pytest.raises(MalformedPacket):
            decode(blob[:-1])
        with pytest.raises(MalformedPacket):
            decode(blob[:3])
        with pytest.raises(MalformedPacket):
            decode(blob + b"\x00")

    def test_unknown_tag(self):
        with pytest.raises(MalformedPacket):
            decode(bytes([99, 0, 0, 0]))


class TestRangeChecks:
    def test_empty_tc_forbidden(self):
        with pytest.raises(RangeViolation):
            encode(Tc(1, (), 0))
        with pytest.raises(RangeViolation):
            encode(Htc(1, (), 0))

    def test_origin_in_neighbor_list(self):
        m = Hello(1, 1, Vec2(0, 0), Vec2(0, 0), None, None, 0,
                  neighbors=(NeighborInfo(1, 0, Vec2(0, 0)),))
        with pytest.raises(RangeViolation):
            encode(m)

    def test_duplicate_neighbor(self):
        m = Hello(1, 2, Vec2(0, 0), Vec2(0, 0), None, None, 0,
                  neighbors=(NeighborInfo(2, 0, Vec2(0, 0)),
                             NeighborInfo(2, 0, Vec2(1, 1)),))
        with pytest.raises(RangeViolation):
            encode(m)

    def test_follow_fields_paired(self):
        m = Hello(1, 0, Vec2(0, 0), Vec2(0, 0), None, None, 0,
                  follow_group=5, follow_seq=None)
        with pytest.raises(RangeViolation):
            encode(m)

    def test_cmn_head_must_be_member(self):
        with pytest.raises(RangeViolation):
            encode(Cmn(9, Vec2(0, 0), ((1, 0),)))

    def test_cmn_single_leader(self):
        with pytest.raises(RangeViolation):
            encode(Cmn(1, Vec2(0, 0), ((1, 0), (2, 0))))

    def test_coordinate_overflow(self):
        m = Hello(1, 0, Vec2(3e7, 0), Vec2(0, 0), None, None, 0)
        with pytest.raises(RangeViolation):
            encode(m)


class TestSeqNum:
    def test_plain_order(self):
        assert newer_than(5, 3)
        assert not newer_than(3, 5)

    def test_wraparound(self):
        # (2 - 65534) mod 2^16 = 4 < 2^15
        assert newer_than(2, 65534)
        assert not newer_than(65534, 2)

    def test_never_newer_than_self(self):
        for a in (0, 1, 32767, 65535):
            assert not newer_than(a, a)

    @given(st.integers(0, 65535), st.integers(0, 65535))
    def test_antisymmetric(self, a, b):
        if a != b and (a - b) % 65536 != 32768:
            assert newer_than(a, b) != newer_than(b, a)


class TestPurposeSplit:
    def test_split_sums_to_size(self):
        rng = random.Random(3)
        for maker in MAKERS:
            for _ in range(200):
                msg = maker(rng)
                r, c = purpose_split(msg)
                assert r + c == size_of(msg)

    def test_cmn_is_pure_control(self):
        m = _rand_cmn(random.Random(0))
        r, c = purpose_split(m)
        assert r == 0 and c == size_of(m)

    def test_tc_is_pure_routing(self):
        m = _rand_tc(random.Random(0))
        r, c = purpose_split(m)
        assert c == 0 and r == size_of(m)


def test_annotate_dump():
    msg = Hello(1, 2, Vec2(10.0, -4.5), Vec2(1.0, 0.0), 7, 7, 12,
                neighbors=(NeighborInfo(2, 1, Vec2(0, 0), True),))
    text = wire.annotate(encode(msg))
    assert "HELLO" in text
    assert "origin" in text
    assert "hex:" in text
