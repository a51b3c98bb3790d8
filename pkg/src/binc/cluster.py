"""Per-node clustering state machine.

Multi-round head election by 2-hop maximum connectivity degree, CMN
driven membership, split/overlap/merge maintenance and greedy MPR
selection. Every handler is a deterministic function of (state,
message, tick); nodes never share mutable state.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .core import SimParams, Vec2, ZERO
from . import wire


class Phase(enum.Enum):
    UNCLUSTERED = "unclustered"
    CLUSTERED = "clustered"


@dataclass
class NeighborEntry:
    """Last heard HELLO state of one 1-hop neighbor."""

    id: int
    degree: int
    position: Vec2
    velocity: Vec2
    head_id: Optional[int]
    leader_id: Optional[int]
    vel_seq: int
    follow: Optional[tuple[int, int]]
    neighbors: tuple[wire.NeighborInfo, ...]
    marked_me_mpr: bool
    last_heard: int


@dataclass
class GroupView:
    """Last heard C-HELLO state of one neighboring group (heads only)."""

    head: int
    center: Vec2
    radius: float
    velocity: Vec2
    velocity_prev: Optional[Vec2]
    vel_seq: int
    follow: Optional[tuple[int, int]]
    last_heard: int


@dataclass
class ClusterEvent:
    tick: int
    node: int
    old_head: Optional[int]
    new_head: Optional[int]
    cause: str  # election | cmn-join | overlap | split | merge


@dataclass
class UavState:
    """Full protocol state of one node (kinematics live in the world)."""

    id: int
    phase: Phase = Phase.UNCLUSTERED
    head_id: Optional[int] = None
    hops_to_head: int = 0
    rank: Optional[int] = None
    leader_id: Optional[int] = None
    last_cmn_tick: Optional[int] = None
    waiting_since: int = 0
    view_changed_tick: int = 0

    one_hop: dict[int, NeighborEntry] = field(default_factory=dict)
    # id -> (head id or None, tick); membership hints from CMN/HELLO
    clustered_hint: dict[int, tuple[Optional[int], int]] = field(default_factory=dict)
    mpr_set: frozenset[int] = frozenset()

    # group rank map from the last CMN of my own head
    cmn_members: dict[int, int] = field(default_factory=dict)
    last_group_force: Vec2 = ZERO
    # foreign heads whose CMN reached me while I am a head: head -> tick
    foreign_head_cmn: dict[int, int] = field(default_factory=dict)

    # routing state
    tc_seq: int = 0
    htc_seq: int = 0
    seen_tc: dict[int, int] = field(default_factory=dict)
    tc_links: dict[int, tuple[frozenset, int]] = field(default_factory=dict)
    seen_htc: dict[int, int] = field(default_factory=dict)
    dir_members: dict[int, tuple[tuple[int, ...], int, int]] = field(default_factory=dict)
    head_links: dict[tuple[int, int], int] = field(default_factory=dict)

    # formation / starling state (meaningful while head)
    gview: dict[int, GroupView] = field(default_factory=dict)
    vel_seq: int = 0
    vel_at_bump: Vec2 = ZERO
    follow_chain: Optional[tuple[int, int]] = None
    follow_records: dict[int, int] = field(default_factory=dict)
    pattern: str = "collective"
    form_center: Vec2 = ZERO
    form_radius: float = 0.0
    form_velocity: Vec2 = ZERO
    my_group_force: Vec2 = ZERO
    observed: tuple[int, ...] = ()

    def is_head(self) -> bool:
        return self.phase is Phase.CLUSTERED and self.head_id == self.id


def entry_live(entry: NeighborEntry, tick: int, p: SimParams) -> bool:
    return tick - entry.last_heard <= 3 * p.hello_ticks


def live_neighbors(state: UavState, tick: int, p: SimParams) -> list[NeighborEntry]:
    return [e for e in state.one_hop.values() if entry_live(e, tick, p)]


def connectivity_degree(state: UavState, tick: int, p: SimParams,
                        eligible_only: bool = False) -> int:
    """Count of live 1-hop neighbors.

    With eligible_only, clustered neighbors are excluded; this is the
    degree an unclustered node advertises and competes with during
    re-election rounds.
    """
    count = 0
    for e in state.one_hop.values():
        if not entry_live(e, tick, p):
            continue
        if eligible_only and e.head_id is not None:
            continue
        count += 1
    return count


def advertised_degree(state: UavState, tick: int, p: SimParams) -> int:
    if state.phase is Phase.UNCLUSTERED:
        return connectivity_degree(state, tick, p, eligible_only=True)
    return connectivity_degree(state, tick, p)


def _hint_clustered(state: UavState, node: int, tick: int, p: SimParams) -> bool:
    """Best knowledge of whether `node` already belongs to a cluster."""
    e = state.one_hop.get(node)
    if e is not None and entry_live(e, tick, p):
        return e.head_id is not None
    hint = state.clustered_hint.get(node)
    if hint is not None and tick - hint[1] <= p.mwt_ticks:
        return hint[0] is not None
    return False


def wins_election(state: UavState, tick: int, p: SimParams) -> bool:
    """Am I the maximum-degree unclustered node in my known 2-hop range?

    The competitor set is the subgraph induced on unclustered nodes:
    unclustered live 1-hop neighbors, and entries of their advertised
    lists that are not hinted clustered. Ties break to the lowest id.
    """
    my_deg = connectivity_degree(state, tick, p, eligible_only=True)
    my_key = (my_deg, -state.id)
    one_hop_ids = set()
    eligible: list[NeighborEntry] = []
    for e in live_neighbors(state, tick, p):
        one_hop_ids.add(e.id)
        if e.head_id is None:
            eligible.append(e)
    for e in eligible:
        if (e.degree, -e.id) > my_key:
            return False
    for e in eligible:
        for sub in e.neighbors:
            if sub.id == state.id or sub.id in one_hop_ids:
                continue
            if _hint_clustered(state, sub.id, tick, p):
                continue
            if (sub.degree, -sub.id) > my_key:
                return False
    return True


def process_hello(state: UavState, sender: int, msg: wire.Hello, tick: int,
                  p: SimParams) -> None:
    """Refresh the 1-hop table; track view changes for election gating."""
    prev = state.one_hop.get(sender)
    marked = any(nb.id == state.id and nb.is_mpr for nb in msg.neighbors)
    entry = NeighborEntry(
        id=sender, degree=msg.degree, position=msg.position,
        velocity=msg.velocity, head_id=msg.head_id, leader_id=msg.leader_id,
        vel_seq=msg.vel_seq,
        follow=(msg.follow_group, msg.follow_seq) if msg.follow_group is not None else None,
        neighbors=msg.neighbors, marked_me_mpr=marked, last_heard=tick)
    if prev is None:
        state.view_changed_tick = tick
    else:
        same_view = (
            prev.degree == msg.degree
            and (prev.head_id is None) == (msg.head_id is None)
            and len(prev.neighbors) == len(msg.neighbors)
            and all(a.id == b.id and a.degree == b.degree
                    for a, b in zip(prev.neighbors, msg.neighbors)))
        if not same_view:
            state.view_changed_tick = tick
    state.one_hop[sender] = entry
    state.clustered_hint[sender] = (msg.head_id, tick)


def _become_head(state: UavState, tick: int, cause: str) -> ClusterEvent:
    old = state.head_id if state.phase is Phase.CLUSTERED else None
    state.phase = Phase.CLUSTERED
    state.head_id = state.id
    state.hops_to_head = 0
    state.rank = 0
    state.leader_id = state.id
    state.last_cmn_tick = tick
    state.cmn_members = {state.id: 0}
    return ClusterEvent(tick, state.id, old, state.id, cause)


def _go_unclustered(state: UavState, tick: int, cause: str) -> ClusterEvent:
    old = state.head_id
    state.phase = Phase.UNCLUSTERED
    state.head_id = None
    state.hops_to_head = 0
    state.rank = None
    state.leader_id = None
    state.last_cmn_tick = None
    state.waiting_since = tick
    state.cmn_members = {}
    return ClusterEvent(tick, state.id, old, None, cause)


def _clear_head_role(state: UavState) -> None:
    state.gview = {}
    state.follow_chain = None
    state.follow_records = {}
    state.pattern = "collective"
    state.foreign_head_cmn = {}
    state.observed = ()


def _adopt_cmn(state: UavState, msg: wire.Cmn, tick: int) -> None:
    state.last_cmn_tick = tick
    state.cmn_members = dict(msg.members)
    state.rank = state.cmn_members.get(state.id)
    leader = [mid for mid, rank in msg.members if rank == 0]
    state.leader_id = min(leader) if leader else None
    state.last_group_force = msg.group_force


def process_cmn(state: UavState, sender: int, msg: wire.Cmn, tick: int,
                p: SimParams) -> tuple[list[ClusterEvent], bool]:
    """Apply one CMN; returns (events, should_forward).

    should_forward is true for 1-hop members of the sending head: they
    re-broadcast the message once so it reaches the 2-hop boundary.
    """
    events: list[ClusterEvent] = []
    hops = 1 if sender == msg.head_id else 2
    for mid, _rank in msg.members:
        state.clustered_hint[mid] = (msg.head_id, tick)

    if state.is_head():
        if msg.head_id != state.id:
            state.foreign_head_cmn[msg.head_id] = tick
        return events, False

    if state.phase is Phase.UNCLUSTERED:
        state.phase = Phase.CLUSTERED
        state.head_id = msg.head_id
        state.hops_to_head = hops
        _adopt_cmn(state, msg, tick)
        events.append(ClusterEvent(tick, state.id, None, msg.head_id, "cmn-join"))
    elif msg.head_id == state.head_id:
        new_cycle = state.last_cmn_tick is None or state.last_cmn_tick < tick
        state.hops_to_head = hops if new_cycle else min(state.hops_to_head, hops)
        _adopt_cmn(state, msg, tick)
    else:
        # overlap: adopt the head with fewer hops, stay put on ties
        if hops < state.hops_to_head:
            old = state.head_id
            state.head_id = msg.head_id
            state.hops_to_head = hops
            _adopt_cmn(state, msg, tick)
            events.append(ClusterEvent(tick, state.id, old, msg.head_id, "overlap"))
        else:
            return events, False

    forward = hops == 1 and state.head_id == msg.head_id
    return events, forward


def known_heads(state: UavState, tick: int, p: SimParams) -> set[int]:
    """Heads this node currently believes exist (excluding itself)."""
    out = set()
    for h, view in state.gview.items():
        if tick - view.last_heard <= 3 * p.chello_ticks:
            out.add(h)
    for origin, (_members, _seq, t) in state.dir_members.items():
        if tick - t <= 3 * p.htc_ticks:
            out.add(origin)
    for e in live_neighbors(state, tick, p):
        if e.head_id == e.id:
            out.add(e.id)
    for h, t in state.foreign_head_cmn.items():
        if tick - t <= p.mwt_ticks:
            out.add(h)
    out.discard(state.id)
    return out


def _merge_check(state: UavState, tick: int, p: SimParams) -> Optional[ClusterEvent]:
    """Demote if another head within 2 hops beats me on (degree, id).

    The lower-degree head joins the other; on degree ties the higher id
    steps down.
    """
    heads = known_heads(state, tick, p)
    if not heads:
        return None
    my_deg = connectivity_degree(state, tick, p)
    rivals: dict[int, tuple[int, int]] = {}  # id -> (degree, hops)
    for e in live_neighbors(state, tick, p):
        if e.id in heads:
            prev = rivals.get(e.id)
            if prev is None or prev[1] > 1:
                rivals[e.id] = (e.degree, 1)
        for sub in e.neighbors:
            if sub.id in heads and sub.id != state.id:
                rivals.setdefault(sub.id, (sub.degree, 2))
    winners = [(deg, -rid) for rid, (deg, _h) in rivals.items()
               if my_deg < deg or (my_deg == deg and state.id > rid)]
    if not winners:
        return None
    deg, neg_id = max(winners)
    rid = -neg_id
    old = state.head_id
    state.phase = Phase.CLUSTERED
    state.head_id = rid
    state.hops_to_head = rivals[rid][1]
    state.rank = None
    state.leader_id = None
    state.last_cmn_tick = tick  # grace until the winner's CMN arrives
    state.cmn_members = {}
    _clear_head_role(state)
    return ClusterEvent(tick, state.id, old, rid, "merge")


def maintenance_tick(state: UavState, tick: int, p: SimParams) -> list[ClusterEvent]:
    """Prune stale entries, then apply split / election / merge rules."""
    events: list[ClusterEvent] = []
    horizon = 3 * p.hello_ticks
    stale = [nid for nid, e in state.one_hop.items()
             if tick - e.last_heard > horizon]
    for nid in stale:
        del state.one_hop[nid]
        state.view_changed_tick = tick
    if len(state.clustered_hint) > 4096:
        cutoff = tick - 2 * p.mwt_ticks
        state.clustered_hint = {k: v for k, v in state.clustered_hint.items()
                                if v[1] >= cutoff}

    if state.phase is Phase.CLUSTERED and not state.is_head():
        if state.last_cmn_tick is None or tick - state.last_cmn_tick > p.mwt_ticks:
            events.append(_go_unclustered(state, tick, "split"))

    if state.phase is Phase.UNCLUSTERED:
        settled = (tick - state.waiting_since >= 2 * p.hello_ticks
                   and tick - state.view_changed_tick >= 2 * p.hello_ticks)
        if settled and wins_election(state, tick, p):
            events.append(_become_head(state, tick, "election"))
        elif tick - state.waiting_since > 2 * p.mwt_ticks:
            # two extra rounds with no win and no CMN: singleton head
            events.append(_become_head(state, tick, "election"))

    if state.is_head():
        ev = _merge_check(state, tick, p)
        if ev is not None:
            events.append(ev)
    return events


def two_hop_map(state: UavState, tick: int, p: SimParams) -> dict[int, set[int]]:
    """2-hop neighbor id -> set of 1-hop ids it is reachable through."""
    one = {e.id for e in live_neighbors(state, tick, p)}
    out: dict[int, set[int]] = {}
    for e in live_neighbors(state, tick, p):
        for sub in e.neighbors:
            if sub.id == state.id or sub.id in one:
                continue
            out.setdefault(sub.id, set()).add(e.id)
    return out


def select_mprs(one_hop: dict[int, int], two_hop: dict[int, set[int]]) -> frozenset[int]:
    """Greedy minimal cover of the 2-hop set by 1-hop relays.

    one_hop maps neighbor id -> degree. Ties prefer the higher degree,
    then the lower id.
    """
    uncovered = {nid for nid, via in two_hop.items() if via}
    chosen: set[int] = set()
    while uncovered:
        best = None
        best_key = None
        for nid, deg in one_hop.items():
            if nid in chosen:
                continue
            gain = sum(1 for t in uncovered if nid in two_hop.get(t, ()))
            if gain == 0:
                continue
            key = (gain, deg, -nid)
            if best_key is None or key > best_key:
                best, best_key = nid, key
        if best is None:
            break  # some 2-hop targets have no live relay
        chosen.add(best)
        uncovered = {t for t in uncovered if best not in two_hop.get(t, ())}
    return frozenset(chosen)


def recompute_mprs(state: UavState, tick: int, p: SimParams) -> None:
    one = {e.id: e.degree for e in live_neighbors(state, tick, p)}
    state.mpr_set = select_mprs(one, two_hop_map(state, tick, p))


def my_selectors(state: UavState, tick: int, p: SimParams) -> list[int]:
    """Neighbors that chose me as one of their MPRs."""
    return sorted(e.id for e in live_neighbors(state, tick, p) if e.marked_me_mpr)


@dataclass
class MemberView:
    """A head's working picture of its own cluster."""

    members: set[int]
    links: set[frozenset]
    positions: dict[int, Vec2]
    velocities: dict[int, Vec2]  # direct 1-hop members only


def cluster_member_view(state: UavState, self_pos: Vec2, self_vel: Vec2,
                        tick: int, p: SimParams) -> MemberView:
    """Claimed membership: direct members plus their advertised
    neighbors that are not hinted or HTC-claimed as someone else's."""
    members = {state.id}
    links: set[frozenset] = set()
    positions = {state.id: self_pos}
    velocities = {state.id: self_vel}
    direct = []
    live = live_neighbors(state, tick, p)
    for e in live:
        if e.head_id == state.id:
            direct.append(e)
            members.add(e.id)
            positions[e.id] = e.position
            velocities[e.id] = e.velocity
            links.add(frozenset((state.id, e.id)))
    one_hop_ids = {e.id for e in live}
    # 2-hop claims defer to other heads' fresh HTC claims: a head never
    # sees a 2-hop member's own allegiance (entries carry no head id)
    foreign_claimed: set[int] = set()
    htc_horizon = 3 * p.htc_ticks
    for origin, (ids, _seq, t) in state.dir_members.items():
        if origin != state.id and tick - t <= htc_horizon:
            foreign_claimed.update(ids)
    for e in direct:
        for sub in e.neighbors:
            if sub.id == state.id:
                continue
            if sub.id in members:
                links.add(frozenset((e.id, sub.id)))
                continue
            if sub.id in one_hop_ids:
                continue  # direct evidence says it is not mine
            if sub.id in foreign_claimed:
                continue
            hint = state.clustered_hint.get(sub.id)
            foreign = (hint is not None and tick - hint[1] <= p.mwt_ticks
                       and hint[0] not in (None, state.id))
            if foreign:
                continue
            members.add(sub.id)
            positions.setdefault(sub.id, sub.position)
            links.add(frozenset((e.id, sub.id)))
    # member-member links among direct members' lists
    for e in direct:
        for sub in e.neighbors:
            if sub.id in members and sub.id != state.id:
                links.add(frozenset((e.id, sub.id)))
    return MemberView(members, links, positions, velocities)


def coincident_direction(id_a: int, id_b: int) -> Vec2:
    """Deterministic pseudo-random unit vector for a coincident pair.

    The lower id gets this direction, the higher id its negation.
    """
    lo, hi = (id_a, id_b) if id_a < id_b else (id_b, id_a)
    rng = random.Random(lo * 1_000_003 + hi)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return Vec2(math.cos(theta), math.sin(theta))
