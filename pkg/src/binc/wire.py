"""Byte-exact encode/decode and sizing for the five fused message types.

Canonical layout, little-endian throughout:

    header    tag u8 | flags u8 | payload_len u16
    ids       u16 (0 is the "none" sentinel, real ids start at 1)
    coords    i32 fixed-point, 0.01 m   (velocities 0.01 m/s)
    radii     u32 fixed-point, 0.01 m
    seq       u16, serial-number arithmetic
    counts    u8
    degree    u8: low 7 bits saturate at 127, top bit marks "this
              neighbor is one of my MPRs"

Sizes (bytes): HELLO 34 + 11/neighbor, C-HELLO 35 + 22/group,
CMN 15 + 3/member, TC and HTC 9 + 2/id.  flags bit0 signals that the
follow fields are meaningful; their space is always reserved so message
sizes depend only on list lengths.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Union

from .core import Vec2

TAG_HELLO = 1
TAG_CHELLO = 2
TAG_CMN = 3
TAG_TC = 4
TAG_HTC = 5

FLAG_FOLLOW = 0x01
MPR_BIT = 0x80
DEGREE_MAX = 0x7F

SEQ_MOD = 1 << 16
_COORD_MAX = (1 << 31) - 1


class RangeViolation(ValueError):
    """A field is outside its encodable range or violates an invariant."""


class MalformedPacket(ValueError):
    """Byte string does not decode to a well-formed message."""


def newer_than(a: int, b: int) -> bool:
    """Serial-number comparison: a is newer than b (mod 2^16)."""
    return 0 < (a - b) % SEQ_MOD < SEQ_MOD // 2


def seq_next(a: int) -> int:
    return (a + 1) % SEQ_MOD


def quantize(value: float) -> float:
    """Snap to the 0.01 wire resolution."""
    return round(value * 100.0) / 100.0


def quantize_vec(v: Vec2) -> Vec2:
    return Vec2(quantize(v.x), quantize(v.y))


@dataclass(frozen=True)
class NeighborInfo:
    """One advertised 1-hop neighbor inside a HELLO."""

    id: int
    degree: int
    position: Vec2
    is_mpr: bool = False


@dataclass(frozen=True)
class GroupInfo:
    """One advertised neighboring group inside a C-HELLO."""

    head: int
    center: Vec2
    radius: float
    velocity: Vec2


@dataclass(frozen=True)
class Hello:
    origin: int
    degree: int
    position: Vec2
    velocity: Vec2
    head_id: Optional[int]
    leader_id: Optional[int]
    vel_seq: int
    follow_group: Optional[int] = None
    follow_seq: Optional[int] = None
    neighbors: tuple[NeighborInfo, ...] = ()


@dataclass(frozen=True)
class CHello:
    origin_head: int
    center: Vec2
    radius: float
    velocity: Vec2
    leader_id: int
    vel_seq: int
    follow_group: Optional[int] = None
    follow_seq: Optional[int] = None
    neighbor_groups: tuple[GroupInfo, ...] = ()


@dataclass(frozen=True)
class Cmn:
    head_id: int
    group_force: Vec2
    members: tuple[tuple[int, int], ...]  # (node id, social rank)


@dataclass(frozen=True)
class Tc:
    origin: int
    advertised: tuple[int, ...]  # MPR selectors
    seq: int


@dataclass(frozen=True)
class Htc:
    origin_head: int
    members: tuple[int, ...]
    seq: int


Message = Union[Hello, CHello, Cmn, Tc, Htc]

_HELLO_BASE = 34
_CHELLO_BASE = 35
_CMN_BASE = 15
_TC_BASE = 9


def size_of(m: Message) -> int:
    """Exact encoded length in bytes without encoding."""
    if isinstance(m, Hello):
        return _HELLO_BASE + 11 * len(m.neighbors)
    if isinstance(m, CHello):
        return _CHELLO_BASE + 22 * len(m.neighbor_groups)
    if isinstance(m, Cmn):
        return _CMN_BASE + 3 * len(m.members)
    if isinstance(m, Tc):
        return _TC_BASE + 2 * len(m.advertised)
    if isinstance(m, Htc):
        return _TC_BASE + 2 * len(m.members)
    raise TypeError(f"not a message: {m!r}")


def purpose_split(m: Message) -> tuple[int, int]:
    """(routing bytes, control bytes) for the overhead ledger.

    Base routing fields of HELLO/C-HELLO/TC/HTC count as Routing; CMN
    entirely, and the kinematic + leadership + follow fields of
    HELLO/C-HELLO, count as Control.
    """
    if isinstance(m, Hello):
        n = len(m.neighbors)
        return 10 + 3 * n, 24 + 8 * n
    if isinstance(m, CHello):
        g = len(m.neighbor_groups)
        return 7 + 2 * g, 28 + 20 * g
    if isinstance(m, Cmn):
        return 0, size_of(m)
    if isinstance(m, (Tc, Htc)):
        return size_of(m), 0
    raise TypeError(f"not a message: {m!r}")


def _enc_coord(value: float, what: str) -> int:
    raw = round(value * 100.0)
    if not -_COORD_MAX - 1 <= raw <= _COORD_MAX:
        raise RangeViolation(f"{what} = {value} outside fixed-point range")
    return raw


def _enc_radius(value: float) -> int:
    if value < 0:
        raise RangeViolation(f"radius = {value} < 0")
    raw = round(value * 100.0)
    if raw > 0xFFFFFFFF:
        raise RangeViolation(f"radius = {value} outside fixed-point range")
    return raw


def _enc_id(value: Optional[int], what: str) -> int:
    raw = 0 if value is None else value
    if not 0 <= raw <= 0xFFFF:
        raise RangeViolation(f"{what} = {value} outside u16 range")
    if value is not None and value == 0:
        raise RangeViolation(f"{what} = 0 is reserved for 'none'")
    return raw


def _enc_seq(value: int, what: str) -> int:
    if not 0 <= value < SEQ_MOD:
        raise RangeViolation(f"{what} = {value} outside u16 range")
    return value


def _enc_count(value: int, what: str) -> int:
    if not 0 <= value <= 0xFF:
        raise RangeViolation(f"{what} = {value} outside u8 range")
    return value


def _enc_degree(degree: int, is_mpr: bool = False) -> int:
    if degree < 0:
        raise RangeViolation(f"degree = {degree} < 0")
    return min(degree, DEGREE_MAX) | (MPR_BIT if is_mpr else 0)


def _check_follow(group: Optional[int], seq: Optional[int]) -> None:
    if (group is None) != (seq is None):
        raise RangeViolation("follow_group and follow_seq must both be set or both none")


def encode(m: Message) -> bytes:
    if isinstance(m, Hello):
        return _encode_hello(m)
    if isinstance(m, CHello):
        return _encode_chello(m)
    if isinstance(m, Cmn):
        return _encode_cmn(m)
    if isinstance(m, Tc):
        return _encode_tc(m)
    if isinstance(m, Htc):
        return _encode_htc(m)
    raise TypeError(f"not a message: {m!r}")


def _header(tag: int, flags: int, payload_len: int) -> bytes:
    return struct.pack("<BBH", tag, flags, payload_len)


def _encode_hello(m: Hello) -> bytes:
    _check_follow(m.follow_group, m.follow_seq)
    seen = set()
    for nb in m.neighbors:
        if nb.id == m.origin:
            raise RangeViolation("neighbor list contains the origin")
        if nb.id in seen:
            raise RangeViolation(f"duplicate neighbor id {nb.id}")
        seen.add(nb.id)
    body = struct.pack(
        "<HBiiiiHHHHHB",
        _enc_id(m.origin, "origin"),
        _enc_degree(m.degree),
        _enc_coord(m.position.x, "position.x"),
        _enc_coord(m.position.y, "position.y"),
        _enc_coord(m.velocity.x, "velocity.x"),
        _enc_coord(m.velocity.y, "velocity.y"),
        _enc_id(m.head_id, "head_id"),
        _enc_id(m.leader_id, "leader_id"),
        _enc_seq(m.vel_seq, "vel_seq"),
        _enc_id(m.follow_group, "follow_group"),
        _enc_seq(m.follow_seq or 0, "follow_seq"),
        _enc_count(len(m.neighbors), "neighbor count"),
    )
    parts = [body]
    for nb in m.neighbors:
        parts.append(struct.pack(
            "<HBii",
            _enc_id(nb.id, "neighbor id"),
            _enc_degree(nb.degree, nb.is_mpr),
            _enc_coord(nb.position.x, "neighbor position.x"),
            _enc_coord(nb.position.y, "neighbor position.y"),
        ))
    payload = b"".join(parts)
    flags = FLAG_FOLLOW if m.follow_group is not None else 0
    return _header(TAG_HELLO, flags, len(payload)) + payload


def _encode_chello(m: CHello) -> bytes:
    _check_follow(m.follow_group, m.follow_seq)
    heads = [g.head for g in m.neighbor_groups]
    if len(heads) != len(set(heads)):
        raise RangeViolation("duplicate head ids in neighbor_groups")
    body = struct.pack(
        "<HiiIiiHHHHB",
        _enc_id(m.origin_head, "origin_head"),
        _enc_coord(m.center.x, "center.x"),
        _enc_coord(m.center.y, "center.y"),
        _enc_radius(m.radius),
        _enc_coord(m.velocity.x, "velocity.x"),
        _enc_coord(m.velocity.y, "velocity.y"),
        _enc_id(m.leader_id, "leader_id"),
        _enc_seq(m.vel_seq, "vel_seq"),
        _enc_id(m.follow_group, "follow_group"),
        _enc_seq(m.follow_seq or 0, "follow_seq"),
        _enc_count(len(m.neighbor_groups), "group count"),
    )
    parts = [body]
    for g in m.neighbor_groups:
        parts.append(struct.pack(
            "<HiiIii",
            _enc_id(g.head, "group head"),
            _enc_coord(g.center.x, "group center.x"),
            _enc_coord(g.center.y, "group center.y"),
            _enc_radius(g.radius),
            _enc_coord(g.velocity.x, "group velocity.x"),
            _enc_coord(g.velocity.y, "group velocity.y"),
        ))
    payload = b"".join(parts)
    flags = FLAG_FOLLOW if m.follow_group is not None else 0
    return _header(TAG_CHELLO, flags, len(payload)) + payload


def _encode_cmn(m: Cmn) -> bytes:
    ids = [mid for mid, _ in m.members]
    if m.head_id not in ids:
        raise RangeViolation("head_id must appear in the member list")
    if len(ids) != len(set(ids)):
        raise RangeViolation("duplicate member ids")
    zero_ranked = sum(1 for _, rank in m.members if rank == 0)
    if zero_ranked > 1:
        raise RangeViolation(f"{zero_ranked} members have rank 0, at most one allowed")
    body = struct.pack(
        "<HiiB",
        _enc_id(m.head_id, "head_id"),
        _enc_coord(m.group_force.x, "group_force.x"),
        _enc_coord(m.group_force.y, "group_force.y"),
        _enc_count(len(m.members), "member count"),
    )
    parts = [body]
    for mid, rank in m.members:
        if not 0 <= rank <= 0xFF:
            raise RangeViolation(f"rank = {rank} outside u8 range")
        parts.append(struct.pack("<HB", _enc_id(mid, "member id"), rank))
    payload = b"".join(parts)
    return _header(TAG_CMN, 0, len(payload)) + payload


def _encode_id_list(tag: int, origin: int, seq: int, ids: tuple[int, ...],
                    what: str) -> bytes:
    if not ids:
        raise RangeViolation(f"{what} list must be non-empty")
    if len(ids) != len(set(ids)):
        raise RangeViolation(f"duplicate ids in {what} list")
    body = struct.pack(
        "<HHB",
        _enc_id(origin, "origin"),
        _enc_seq(seq, "seq"),
        _enc_count(len(ids), f"{what} count"),
    )
    parts = [body]
    for i in ids:
        parts.append(struct.pack("<H", _enc_id(i, f"{what} id")))
    payload = b"".join(parts)
    return _header(tag, 0, len(payload)) + payload


def _encode_tc(m: Tc) -> bytes:
    return _encode_id_list(TAG_TC, m.origin, m.seq, m.advertised, "advertised")


def _encode_htc(m: Htc) -> bytes:
    return _encode_id_list(TAG_HTC, m.origin_head, m.seq, m.members, "members")


def _dec_id(raw: int) -> Optional[int]:
    return None if raw == 0 else raw


def _dec_coord(raw: int) -> float:
    return raw / 100.0


class _Reader:
    def __init__(self, buf: bytes, offset: int):
        self.buf = buf
        self.off = offset

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise MalformedPacket(
                f"truncated: need {size} bytes at offset {self.off}, "
                f"have {len(self.buf) - self.off}")
        vals = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return vals


def decode(data: bytes) -> Message:
    if len(data) < 4:
        raise MalformedPacket(f"{len(data)} bytes is shorter than the header")
    tag, flags, payload_len = struct.unpack_from("<BBH", data, 0)
    if len(data) != 4 + payload_len:
        raise MalformedPacket(
            f"length field says {4 + payload_len} bytes, got {len(data)}")
    r = _Reader(data, 4)
    if tag == TAG_HELLO:
        msg = _decode_hello(r, flags)
    elif tag == TAG_CHELLO:
        msg = _decode_chello(r, flags)
    elif tag == TAG_CMN:
        msg = _decode_cmn(r)
    elif tag == TAG_TC:
        origin, seq, ids = _decode_id_list(r)
        msg = Tc(origin=origin, advertised=ids, seq=seq)
    elif tag == TAG_HTC:
        origin, seq, ids = _decode_id_list(r)
        msg = Htc(origin_head=origin, members=ids, seq=seq)
    else:
        raise MalformedPacket(f"unknown message tag {tag}")
    if r.off != len(data):
        raise MalformedPacket(f"{len(data) - r.off} trailing bytes")
    return msg


def _decode_hello(r: _Reader, flags: int) -> Hello:
    (origin, degree, px, py, vx, vy, head, leader,
     vel_seq, fg, fs, count) = r.take("<HBiiiiHHHHHB")
    neighbors = []
    for _ in range(count):
        nid, deg, nx, ny = r.take("<HBii")
        neighbors.append(NeighborInfo(
            id=nid,
            degree=deg & DEGREE_MAX,
            position=Vec2(_dec_coord(nx), _dec_coord(ny)),
            is_mpr=bool(deg & MPR_BIT),
        ))
    follow = bool(flags & FLAG_FOLLOW)
    return Hello(
        origin=origin,
        degree=degree & DEGREE_MAX,
        position=Vec2(_dec_coord(px), _dec_coord(py)),
        velocity=Vec2(_dec_coord(vx), _dec_coord(vy)),
        head_id=_dec_id(head),
        leader_id=_dec_id(leader),
        vel_seq=vel_seq,
        follow_group=_dec_id(fg) if follow else None,
        follow_seq=fs if follow else None,
        neighbors=tuple(neighbors),
    )


def _decode_chello(r: _Reader, flags: int) -> CHello:
    (origin, cx, cy, radius, vx, vy, leader,
     vel_seq, fg, fs, count) = r.take("<HiiIiiHHHHB")
    groups = []
    for _ in range(count):
        head, gx, gy, grad, gvx, gvy = r.take("<HiiIii")
        groups.append(GroupInfo(
            head=head,
            center=Vec2(_dec_coord(gx), _dec_coord(gy)),
            radius=grad / 100.0,
            velocity=Vec2(_dec_coord(gvx), _dec_coord(gvy)),
        ))
    follow = bool(flags & FLAG_FOLLOW)
    return CHello(
        origin_head=origin,
        center=Vec2(_dec_coord(cx), _dec_coord(cy)),
        radius=radius / 100.0,
        velocity=Vec2(_dec_coord(vx), _dec_coord(vy)),
        leader_id=leader,
        vel_seq=vel_seq,
        follow_group=_dec_id(fg) if follow else None,
        follow_seq=fs if follow else None,
        neighbor_groups=tuple(groups),
    )


def _decode_cmn(r: _Reader) -> Cmn:
    head, fx, fy, count = r.take("<HiiB")
    members = []
    for _ in range(count):
        mid, rank = r.take("<HB")
        members.append((mid, rank))
    return Cmn(
        head_id=head,
        group_force=Vec2(_dec_coord(fx), _dec_coord(fy)),
        members=tuple(members),
    )


def _decode_id_list(r: _Reader):
    origin, seq, count = r.take("<HHB")
    ids = []
    for _ in range(count):
        (i,) = r.take("<H")
        ids.append(i)
    return origin, seq, tuple(ids)


_TAG_NAMES = {
    TAG_HELLO: "HELLO", TAG_CHELLO: "C-HELLO", TAG_CMN: "CMN",
    TAG_TC: "TC", TAG_HTC: "HTC",
}


def annotate(data: bytes) -> str:
    """Human-readable hex dump of an encoded message for dump-packet."""
    msg = decode(data)  # raises MalformedPacket on garbage
    tag = data[0]
    lines = [
        f"type        {_TAG_NAMES[tag]} (tag {tag})",
        f"flags       0x{data[1]:02x}",
        f"payload     {struct.unpack_from('<H', data, 2)[0]} bytes",
        f"total       {len(data)} bytes",
        "fields:",
    ]
    for fname in msg.__dataclass_fields__:
        lines.append(f"  {fname} = {getattr(msg, fname)!r}")
    hexstr = data.hex()
    lines.append("hex:")
    for i in range(0, len(hexstr), 64):
        lines.append("  " + hexstr[i:i + 64])
    return "\n".join(lines)
