"""Deterministic fixed-tick simulation loop.

Each tick runs fixed phases: (1) due timers queue messages, (2) last
tick's queue is delivered and charged to the byte ledger, (3) protocol
handlers consume inboxes in (sender, type, seq) order and maintenance
rules fire, (4) per-node forces are computed from node-local tables
only, (5) Euler integration with force and speed clamps, (6) metrics
sampling. Messages queued at tick t are seen by handlers at t+1, never
earlier.

Per-node work in phases 3 and 4 touches only that node's state, so an
order-preserving map over nodes (serial, or a thread pool when
BINC_THREADS > 0) yields identical results either way.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (ConfigError, EmptyFormation, Obstacle, SimParams, Vec2,
                   ZERO, formation_center, formation_radius, validate_config)
from . import baselines, cluster, metrics, pigeon, route, starling, wire
from .cluster import Phase, UavState
from .radio import ChannelKind, LongChannelByNonHead, Radio

ARRIVAL_DEADBAND = 100.0  # m
HEADING_BUMP_DEG = 15.0   # self-originated velocity event thresholds
SPEED_BUMP = 2.0          # m/s
MAX_WIRE_LIST = 255

CONTROLLERS = ("binc", "boids", "none")
ROUTERS = ("binc", "flat")


class SinkFailure(RuntimeError):
    """An output file could not be written."""


@dataclass(frozen=True)
class Scenario:
    kind: str  # "straight" | "obstacle"
    spawn_min: Vec2
    spawn_max: Vec2
    destination: Vec2
    obstacle: Optional[Obstacle] = None
    random_headings: bool = False


def default_spawn_side(n: int) -> float:
    """Desk-scale spawn square side preserving the reference density."""
    return 60000.0 * math.sqrt(n / 1000.0)


def straight_sailing(n: int, spawn_side: Optional[float] = None,
                     random_headings: bool = False) -> Scenario:
    side = spawn_side if spawn_side is not None else default_spawn_side(n)
    return Scenario(
        kind="straight",
        spawn_min=Vec2(-side, -side / 2.0),
        spawn_max=Vec2(0.0, side / 2.0),
        destination=Vec2(1_000_000.0, 0.0),
        obstacle=None,
        random_headings=random_headings,
    )


def obstacle_avoidance(n: int, course_scale: float = 1.0,
                       spawn_side: Optional[float] = None,
                       random_headings: bool = False) -> Scenario:
    side = spawn_side if spawn_side is not None else 60000.0 * course_scale
    return Scenario(
        kind="obstacle",
        spawn_min=Vec2(-side, -side / 2.0),
        spawn_max=Vec2(0.0, side / 2.0),
        destination=Vec2(60000.0 * course_scale, 0.0),
        obstacle=Obstacle(Vec2(14000.0 * course_scale, 0.0),
                          5400.0 * course_scale),
        random_headings=random_headings,
    )


@dataclass
class FormationView:
    """Ground-truth per-group bookkeeping (not a node's belief)."""

    head: int
    leader: int
    members: tuple[int, ...]
    center: Vec2
    radius: float
    velocity: Vec2
    pattern: str


@dataclass
class ProbeSpec:
    src: int
    dst: int
    period_ticks: int


@dataclass
class _Probe:
    dst: int
    holder: int
    hops: int
    born: int
    ttl: int


def goal_force(pos: Vec2, destination: Vec2, p: SimParams) -> Vec2:
    """Unit pull toward the destination, silent inside the arrival
    deadband."""
    d = destination - pos
    if d.norm() <= ARRIVAL_DEADBAND:
        return ZERO
    return d.unit() * p.w_goal


def env_threads() -> int:
    raw = os.environ.get("BINC_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        return 0


class World:
    """Full simulation state; step() advances exactly one tick."""

    def __init__(self, params: SimParams, scenario: Scenario,
                 seed: Optional[int] = None, controller: str = "binc",
                 router: str = "binc", threads: Optional[int] = None,
                 eq14_verbatim: bool = False, eq18_verbatim: bool = False):
        if controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if router not in ROUTERS:
            raise ValueError(f"router must be one of {ROUTERS}")
        self.params = validate_config(params)
        self.scenario = scenario
        self.seed = params.seed if seed is None else seed
        self.controller = controller
        self.router = router
        self.eq14_verbatim = eq14_verbatim
        self.eq18_verbatim = eq18_verbatim
        self.threads = env_threads() if threads is None else threads
        self._pool: Optional[ThreadPoolExecutor] = None

        n = params.n_uavs
        rng = random.Random(self.seed)
        self.pos = np.empty((n, 2), dtype=np.float64)
        self.vel = np.zeros((n, 2), dtype=np.float64)
        for i in range(n):
            self.pos[i, 0] = rng.uniform(scenario.spawn_min.x, scenario.spawn_max.x)
            self.pos[i, 1] = rng.uniform(scenario.spawn_min.y, scenario.spawn_max.y)
        if scenario.random_headings:
            for i in range(n):
                ang = rng.uniform(0.0, 2.0 * math.pi)
                speed = rng.uniform(0.0, params.v_max)
                self.vel[i, 0] = speed * math.cos(ang)
                self.vel[i, 1] = speed * math.sin(ang)

        self.nodes = [UavState(id=i + 1) for i in range(n)]
        self.radio = Radio(self.params)
        self.obstacle = scenario.obstacle if scenario.obstacle is not None else params.obstacle
        self.destination = scenario.destination
        self.tick = 0
        self.pending: list[tuple[int, ChannelKind, wire.Message]] = []
        self.inflight: list[tuple[int, ChannelKind, wire.Message]] = []
        self.formations: dict[int, FormationView] = {}
        self.probe_spec: Optional[ProbeSpec] = None
        self.probe_stats = metrics.ProbeStats()
        self._probes: list[_Probe] = []
        # per-tick outputs for the metrics collector
        self.tick_entries: list = []
        self.tick_cluster_events: list[cluster.ClusterEvent] = []
        self.tick_pattern_events: list[starling.PatternEvent] = []

    # -- helpers -------------------------------------------------------

    def node_pos(self, nid: int) -> Vec2:
        return Vec2(float(self.pos[nid - 1, 0]), float(self.pos[nid - 1, 1]))

    def node_vel(self, nid: int) -> Vec2:
        return Vec2(float(self.vel[nid - 1, 0]), float(self.vel[nid - 1, 1]))

    def head_ids(self) -> set[int]:
        return {s.id for s in self.nodes if s.is_head()}

    def _map(self, fn: Callable, items: list) -> list:
        if self.threads > 0:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=self.threads)
            return list(self._pool.map(fn, items))
        return [fn(x) for x in items]

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _fires(self, interval_ticks: int, nid: int) -> bool:
        return (self.tick + nid) % interval_ticks == 0

    # -- phase 1: message generation ----------------------------------

    def _enqueue(self, sender: int, kind: ChannelKind, msg: wire.Message) -> None:
        if kind is ChannelKind.LONG and not self.nodes[sender - 1].is_head():
            raise LongChannelByNonHead(f"node {sender} is not a head")
        self.pending.append((sender, kind, msg))

    def _build_hello(self, s: UavState) -> wire.Hello:
        p = self.params
        pos = self.node_pos(s.id)
        live = cluster.live_neighbors(s, self.tick, p)
        if len(live) > MAX_WIRE_LIST:
            live = sorted(
                live, key=lambda e: ((e.position - pos).norm(), e.id))[:MAX_WIRE_LIST]
        else:
            live = sorted(live, key=lambda e: e.id)
        neighbors = tuple(
            wire.NeighborInfo(id=e.id, degree=min(e.degree, wire.DEGREE_MAX),
                              position=wire.quantize_vec(e.position),
                              is_mpr=e.id in s.mpr_set)
            for e in live)
        follow = s.follow_chain
        if follow is None and s.head_id is not None and not s.is_head():
            head_entry = s.one_hop.get(s.head_id)
            if head_entry is not None and cluster.entry_live(head_entry, self.tick, p):
                follow = head_entry.follow
        return wire.Hello(
            origin=s.id,
            degree=min(cluster.advertised_degree(s, self.tick, p), wire.DEGREE_MAX),
            position=wire.quantize_vec(pos),
            velocity=wire.quantize_vec(self.node_vel(s.id)),
            head_id=s.head_id,
            leader_id=s.leader_id,
            vel_seq=s.vel_seq,
            follow_group=follow[0] if follow else None,
            follow_seq=follow[1] if follow else None,
            neighbors=neighbors,
        )

    def _build_chello(self, s: UavState) -> wire.CHello:
        p = self.params
        views = [v for v in s.gview.values()
                 if self.tick - v.last_heard <= 3 * p.chello_ticks]
        views.sort(key=lambda v: ((v.center - s.form_center).norm(), v.head))
        views = views[:MAX_WIRE_LIST]
        views.sort(key=lambda v: v.head)
        groups = tuple(
            wire.GroupInfo(head=v.head, center=wire.quantize_vec(v.center),
                           radius=wire.quantize(v.radius),
                           velocity=wire.quantize_vec(v.velocity))
            for v in views)
        chain = s.follow_chain
        return wire.CHello(
            origin_head=s.id,
            center=wire.quantize_vec(s.form_center),
            radius=wire.quantize(s.form_radius),
            velocity=wire.quantize_vec(s.form_velocity),
            leader_id=s.leader_id if s.leader_id is not None else s.id,
            vel_seq=s.vel_seq,
            follow_group=chain[0] if chain else None,
            follow_seq=chain[1] if chain else None,
            neighbor_groups=groups,
        )

    def _build_cmn(self, s: UavState) -> wire.Cmn:
        p = self.params
        mview = cluster.cluster_member_view(
            s, self.node_pos(s.id), self.node_vel(s.id), self.tick, p)
        goal_dir = (self.destination - self.node_pos(s.id)).unit()
        try:
            leader = pigeon.select_leader(mview.positions, goal_dir)
        except (EmptyFormation, ValueError):
            leader = s.leader_id if s.leader_id in mview.members else s.id
        levels = pigeon.assign_social_levels(
            mview.links, mview.members, leader, p.s_max)
        s.leader_id = leader
        s.cmn_members = levels
        s.rank = levels[s.id]
        members = sorted(levels.items(), key=lambda kv: (kv[1], kv[0]))
        if len(members) > MAX_WIRE_LIST:
            keep = members[:MAX_WIRE_LIST]
            if not any(mid == s.id for mid, _ in keep):
                keep[-1] = (s.id, levels[s.id])
            members = keep
        members.sort(key=lambda kv: kv[0])
        return wire.Cmn(
            head_id=s.id,
            group_force=wire.quantize_vec(s.my_group_force.clamped(p.f_clamp)),
            members=tuple(members),
        )

    def _generate(self) -> None:
        p = self.params
        binc_router = self.router == "binc"
        for s in self.nodes:
            if self._fires(p.hello_ticks, s.id):
                self._enqueue(s.id, ChannelKind.SHORT, self._build_hello(s))
            if binc_router:
                if s.is_head():
                    if self._fires(p.cmn_ticks, s.id):
                        self._enqueue(s.id, ChannelKind.SHORT, self._build_cmn(s))
                        s.last_cmn_tick = self.tick
                    if self._fires(p.chello_ticks, s.id):
                        self._enqueue(s.id, ChannelKind.LONG, self._build_chello(s))
                    if self._fires(p.htc_ticks, s.id):
                        members = tuple(sorted(s.cmn_members))[:MAX_WIRE_LIST]
                        if members:
                            s.htc_seq = wire.seq_next(s.htc_seq)
                            self._enqueue(s.id, ChannelKind.LONG, wire.Htc(
                                origin_head=s.id, members=members, seq=s.htc_seq))
                if s.phase is Phase.CLUSTERED and self._fires(p.tc_ticks, s.id):
                    selectors = cluster.my_selectors(s, self.tick, p)[:MAX_WIRE_LIST]
                    if selectors:
                        s.tc_seq = wire.seq_next(s.tc_seq)
                        self._enqueue(s.id, ChannelKind.SHORT, wire.Tc(
                            origin=s.id, advertised=tuple(selectors), seq=s.tc_seq))
            else:
                if self._fires(p.tc_ticks, s.id):
                    s.tc_seq = wire.seq_next(s.tc_seq)
                    lsa = baselines.flat_lsa(s, self.tick, p)
                    if lsa is not None:
                        self._enqueue(s.id, ChannelKind.SHORT, lsa)

    # -- phase 3: handlers ---------------------------------------------

    @staticmethod
    def _msg_sort_key(item) -> tuple:
        sender, msg = item
        if isinstance(msg, wire.Hello):
            return (sender, 1, msg.vel_seq)
        if isinstance(msg, wire.CHello):
            return (sender, 2, msg.vel_seq)
        if isinstance(msg, wire.Cmn):
            return (sender, 3, 0)
        if isinstance(msg, wire.Tc):
            return (sender, 4, msg.seq)
        return (sender, 5, msg.seq)

    def _handle_node(self, args) -> tuple[list, list]:
        s, inbox = args
        p = self.params
        tick = self.tick
        forwards: list[tuple[ChannelKind, wire.Message]] = []
        events: list[cluster.ClusterEvent] = []
        binc_router = self.router == "binc"
        for sender, msg in sorted(inbox, key=self._msg_sort_key):
            if isinstance(msg, wire.Hello):
                cluster.process_hello(s, sender, msg, tick, p)
            elif isinstance(msg, wire.Cmn):
                if binc_router:
                    ev, fwd = cluster.process_cmn(s, sender, msg, tick, p)
                    events.extend(ev)
                    if fwd:
                        forwards.append((ChannelKind.SHORT, msg))
            elif isinstance(msg, wire.Tc):
                if binc_router:
                    if route.on_tc(s, sender, msg, tick, p):
                        forwards.append((ChannelKind.SHORT, msg))
                else:
                    if baselines.on_flat_lsa(s, sender, msg, tick, p):
                        forwards.append((ChannelKind.SHORT, msg))
            elif isinstance(msg, wire.CHello):
                self._on_chello(s, sender, msg)
            elif isinstance(msg, wire.Htc):
                if binc_router and route.on_htc(s, sender, msg, tick, p):
                    if s.is_head():
                        forwards.append((ChannelKind.LONG, msg))
        if binc_router:
            events.extend(cluster.maintenance_tick(s, tick, p))
        else:
            horizon = 3 * p.hello_ticks
            stale = [nid for nid, e in s.one_hop.items()
                     if tick - e.last_heard > horizon]
            for nid in stale:
                del s.one_hop[nid]
                s.view_changed_tick = tick
        if s.view_changed_tick == tick:
            cluster.recompute_mprs(s, tick, p)
        return forwards, events

    def _on_chello(self, s: UavState, sender: int, msg: wire.CHello) -> None:
        tick = self.tick
        prev = s.gview.get(msg.origin_head)
        s.gview[msg.origin_head] = cluster.GroupView(
            head=msg.origin_head,
            center=msg.center,
            radius=msg.radius,
            velocity=msg.velocity,
            velocity_prev=prev.velocity if prev is not None else None,
            vel_seq=msg.vel_seq,
            follow=(msg.follow_group, msg.follow_seq)
                   if msg.follow_group is not None else None,
            last_heard=tick)
        key = (min(s.id, msg.origin_head), max(s.id, msg.origin_head))
        s.head_links[key] = tick
        for g in msg.neighbor_groups:
            if g.head != s.id:
                key = (min(msg.origin_head, g.head), max(msg.origin_head, g.head))
                s.head_links[key] = tick

    # -- phase 4: forces -----------------------------------------------

    def _head_update(self, s: UavState) -> list[starling.PatternEvent]:
        p = self.params
        tick = self.tick
        pos = self.node_pos(s.id)
        vel = self.node_vel(s.id)
        mview = cluster.cluster_member_view(s, pos, vel, tick, p)
        pts = list(mview.positions.values())
        s.form_center = formation_center(pts)
        s.form_radius = formation_radius(s.form_center, pts)
        leader = s.leader_id if s.leader_id is not None else s.id
        if leader == s.id:
            s.form_velocity = vel
        elif leader in mview.velocities:
            s.form_velocity = mview.velocities[leader]
        else:
            entry = s.one_hop.get(leader)
            if entry is not None and cluster.entry_live(entry, tick, p):
                s.form_velocity = entry.velocity
            else:
                s.form_velocity = vel

        horizon = 3 * p.chello_ticks
        stale = [h for h, v in s.gview.items() if tick - v.last_heard > horizon]
        for h in stale:
            del s.gview[h]
        views = [s.gview[h] for h in sorted(s.gview)]
        observed = starling.observation_neighbors(s.form_center, s.form_velocity, views)
        s.observed = tuple(v.head for v in observed)

        f_n = ZERO
        for v in observed:
            f_n = f_n + starling.group_pair_force(
                v.center - s.form_center, s.form_radius, v.radius, p,
                self.eq14_verbatim)
        decision = starling.pattern_force(
            s.form_velocity, s.form_center, s.form_radius, observed,
            self.obstacle, s.follow_records, p,
            self.eq14_verbatim, self.eq18_verbatim)

        events = []
        root: Optional[tuple[int, int]] = None
        if decision.adopted is not None:
            g, seq = decision.adopted
            s.follow_records[g] = seq
            s.follow_chain = decision.adopted
            root = decision.adopted
        elif decision.pattern == starling.EVASION:
            if s.pattern != starling.EVASION:
                s.vel_seq = wire.seq_next(s.vel_seq)
                s.follow_records[s.id] = s.vel_seq
                s.vel_at_bump = s.form_velocity
                s.follow_chain = None
        else:
            dv = s.form_velocity - s.vel_at_bump
            speed_now = s.form_velocity.norm()
            speed_then = s.vel_at_bump.norm()
            bump = abs(speed_now - speed_then) > SPEED_BUMP
            if not bump and speed_now >= pigeon.SPEED_FLOOR and speed_then >= pigeon.SPEED_FLOOR:
                cos_a = max(-1.0, min(1.0, s.form_velocity.dot(s.vel_at_bump)
                                      / (speed_now * speed_then)))
                bump = math.degrees(math.acos(cos_a)) > HEADING_BUMP_DEG
            if bump:
                s.vel_seq = wire.seq_next(s.vel_seq)
                s.follow_records[s.id] = s.vel_seq
                s.vel_at_bump = s.form_velocity
                s.follow_chain = None
        s.pattern = decision.pattern
        s.my_group_force = f_n + decision.force
        events.append(starling.PatternEvent(
            tick=tick, group=s.id, pattern=decision.pattern,
            k_star=decision.k_star, indicator=decision.indicator,
            threshold=decision.threshold,
            root_group=root[0] if root else None,
            root_seq=root[1] if root else None))
        return events

    def _member_force(self, s: UavState) -> Vec2:
        p = self.params
        tick = self.tick
        pos = self.node_pos(s.id)
        vel = self.node_vel(s.id)
        same_group = [(e.id, e.position) for e in cluster.live_neighbors(s, tick, p)
                      if e.head_id == s.head_id]
        inter_ids = set(pigeon.interactive_neighbors(pos, vel, same_group, p))
        nf = pigeon.neighbor_force(
            pos, s.id, [(nid, ep) for nid, ep in same_group if nid in inter_ids], p)
        superiors: list[tuple[Vec2, Vec2]] = []
        if s.rank is not None:
            for e in cluster.live_neighbors(s, tick, p):
                if e.head_id != s.head_id:
                    continue
                other = s.cmn_members.get(e.id)
                if other is not None and 0 < s.rank - other <= 2:
                    superiors.append((e.position, e.velocity))
        ff = pigeon.following_force(pos, vel, superiors)
        return pigeon.member_total_force(nf, ff, p)

    def _force_node(self, s: UavState) -> tuple[Vec2, list[starling.PatternEvent]]:
        p = self.params
        pos = self.node_pos(s.id)
        vel = self.node_vel(s.id)
        if self.controller == "none":
            return ZERO, []
        if self.controller == "boids":
            nbrs = baselines.boids_neighbors(s, pos, self.tick, p)
            f = baselines.boids_force(pos, vel, nbrs, p)
            f = f + goal_force(pos, self.destination, p)
            if self.obstacle is not None:
                f = f + starling.evasion_force(pos, 0.0, self.obstacle, p,
                                               self.eq14_verbatim)
            return f.clamped(p.f_clamp), []
        # binc controller
        if s.phase is not Phase.CLUSTERED:
            return ZERO, []
        events: list[starling.PatternEvent] = []
        if s.is_head():
            events = self._head_update(s)
            if s.leader_id in (None, s.id):
                f = s.my_group_force + goal_force(pos, self.destination, p)
            else:
                f = self._member_force(s)
            return f.clamped(p.f_clamp), events
        if s.rank == 0 or s.leader_id == s.id:
            f = s.last_group_force + goal_force(pos, self.destination, p)
            return f.clamped(p.f_clamp), events
        return self._member_force(s), events

    # -- probes ---------------------------------------------------------

    def add_probe(self, src: int, dst: int, period_s: float) -> None:
        n = self.params.n_uavs
        if not (1 <= src <= n and 1 <= dst <= n):
            raise ValueError("probe endpoints must be valid node ids")
        self.probe_spec = ProbeSpec(src, dst, max(1, self.params.ticks(period_s)))

    def _flat_probe_hop(self, s: UavState, dst: int) -> route.Action:
        routes = route.build_intra_routes(
            baselines.flat_topology(s, self.tick, self.params), s.id)
        if dst == s.id:
            return route.Action(route.DELIVER)
        hop = routes.get(dst)
        if hop is None:
            return route.Action(route.DROP, reason=route.UNKNOWN_DESTINATION)
        return route.Action(route.NEXT_HOP, next_hop=hop)

    def _step_probes(self) -> None:
        spec = self.probe_spec
        if spec is not None and self.tick % spec.period_ticks == 0:
            self._probes.append(_Probe(dst=spec.dst, holder=spec.src, hops=0,
                                       born=self.tick, ttl=route.TTL_INITIAL))
            self.probe_stats.sent += 1
        if not self._probes:
            return
        remaining: list[_Probe] = []
        for pk in self._probes:
            s = self.nodes[pk.holder - 1]
            if self.router == "flat":
                action = self._flat_probe_hop(s, pk.dst)
            else:
                action = route.forward(s, pk.dst, self.tick, self.params)
            if action.kind == route.DELIVER:
                self.probe_stats.delivered += 1
                self.probe_stats.hop_counts.append(pk.hops)
                self.probe_stats.latencies.append(self.tick - pk.born)
                continue
            if action.kind == route.DROP:
                reason = action.reason or "unknown"
                self.probe_stats.dropped[reason] = \
                    self.probe_stats.dropped.get(reason, 0) + 1
                continue
            nxt = action.next_hop
            kind = (ChannelKind.LONG if action.kind == route.INTER_CLUSTER
                    else ChannelKind.SHORT)
            up = self.radio.link_up(self.node_pos(pk.holder), self.node_pos(nxt),
                                    kind, tick=self.tick, id_a=pk.holder, id_b=nxt)
            if not up:
                self.probe_stats.dropped[route.LINK_DOWN] = \
                    self.probe_stats.dropped.get(route.LINK_DOWN, 0) + 1
                continue
            pk.holder = nxt
            pk.hops += 1
            pk.ttl -= 1
            if pk.ttl <= 0:
                self.probe_stats.dropped[route.TTL_EXCEEDED] = \
                    self.probe_stats.dropped.get(route.TTL_EXCEEDED, 0) + 1
                continue
            remaining.append(pk)
        self._probes = remaining

    # -- ground truth bookkeeping ---------------------------------------

    def _rebuild_formations(self) -> None:
        groups: dict[int, list[int]] = {}
        for s in self.nodes:
            if s.phase is Phase.CLUSTERED and s.head_id is not None:
                groups.setdefault(s.head_id, []).append(s.id)
        out: dict[int, FormationView] = {}
        for head, members in sorted(groups.items()):
            head_state = self.nodes[head - 1]
            if not head_state.is_head():
                continue
            pts = [self.node_pos(m) for m in members]
            center = formation_center(pts)
            radius = formation_radius(center, pts)
            leader = head_state.leader_id
            if leader is None or leader not in members:
                leader = head
            out[head] = FormationView(
                head=head, leader=leader, members=tuple(sorted(members)),
                center=center, radius=radius,
                velocity=self.node_vel(leader),
                pattern=head_state.pattern)
        self.formations = out

    # -- the tick --------------------------------------------------------

    def step(self) -> None:
        p = self.params
        self._generate()

        inboxes, entries = self.radio.deliver(
            self.inflight, self.pos, self.head_ids(), self.tick)
        self.tick_entries = entries
        self.inflight = []

        work = [(s, inboxes.get(s.id, [])) for s in self.nodes]
        results = self._map(self._handle_node, work)
        cluster_events: list[cluster.ClusterEvent] = []
        for s, (forwards, events) in zip(self.nodes, results):
            for kind, msg in forwards:
                if kind is ChannelKind.LONG and not s.is_head():
                    continue
                self.pending.append((s.id, kind, msg))
            cluster_events.extend(events)
        self.tick_cluster_events = cluster_events

        self._step_probes()

        force_results = self._map(self._force_node, self.nodes)
        pattern_events: list[starling.PatternEvent] = []
        forces = np.zeros_like(self.vel)
        for s, (f, pevents) in zip(self.nodes, force_results):
            forces[s.id - 1, 0] = f.x
            forces[s.id - 1, 1] = f.y
            pattern_events.extend(pevents)
        self.tick_pattern_events = pattern_events

        norms = np.linalg.norm(forces, axis=1)
        over = norms > p.f_clamp
        if over.any():
            forces[over] *= (p.f_clamp / norms[over])[:, None]
        self.vel += forces * p.dt
        speeds = np.linalg.norm(self.vel, axis=1)
        fast = speeds > p.v_max
        if fast.any():
            self.vel[fast] *= (p.v_max / speeds[fast])[:, None]
        self.pos += self.vel * p.dt
        if not np.isfinite(self.pos).all() or not np.isfinite(self.vel).all():
            raise AssertionError(f"non-finite state at tick {self.tick}")

        self._rebuild_formations()
        self.inflight = self.pending
        self.pending = []
        self.tick += 1

    # -- metrics inputs ---------------------------------------------------

    def cluster_count(self) -> int:
        return sum(1 for s in self.nodes if s.is_head())

    def geometry(self) -> dict[int, tuple[Vec2, float]]:
        return {gid: (fv.center, fv.radius) for gid, fv in self.formations.items()}

    def observation_pairs(self) -> list[tuple[int, int]]:
        pairs = []
        for gid in sorted(self.formations):
            head_state = self.nodes[gid - 1]
            for k in head_state.observed:
                if k in self.formations:
                    pairs.append((gid, k))
        return pairs

    def min_obstacle_distance_tick(self) -> Optional[float]:
        if self.obstacle is None:
            return None
        c = self.obstacle.center
        d = np.hypot(self.pos[:, 0] - c.x, self.pos[:, 1] - c.y)
        return float(d.min())

    def snapshot(self) -> dict:
        nodes = []
        for s in self.nodes:
            nodes.append([s.id, round(float(self.pos[s.id - 1, 0]), 3),
                          round(float(self.pos[s.id - 1, 1]), 3),
                          round(float(self.vel[s.id - 1, 0]), 3),
                          round(float(self.vel[s.id - 1, 1]), 3),
                          s.head_id if s.head_id is not None else 0,
                          s.rank if s.rank is not None else -1])
        groups = []
        for gid in sorted(self.formations):
            fv = self.formations[gid]
            groups.append([fv.head, round(fv.center.x, 3), round(fv.center.y, 3),
                           round(fv.radius, 3), fv.pattern])
        return {"tick": self.tick, "nodes": nodes, "groups": groups}


def init(params: SimParams, scenario: Scenario, seed: Optional[int] = None,
         **kwargs) -> World:
    return World(params, scenario, seed=seed, **kwargs)


@dataclass
class RunReport:
    summary: dict
    wall_time_s: float
    out_dir: Optional[str]


def run(params: SimParams, scenario: Scenario, duration_s: float,
        seed: Optional[int] = None, out_dir: Optional[str] = None,
        controller: str = "binc", router: str = "binc",
        threads: Optional[int] = None, snapshot_every_s: float = 10.0,
        header_bytes: int = 0, window_s: float = 10.0,
        eq14_verbatim: bool = False, eq18_verbatim: bool = False,
        probe: Optional[tuple[int, int, float]] = None,
        collector: Optional[metrics.MetricsCollector] = None) -> RunReport:
    """Execute a full scenario and write metrics/events/summary files.

    Returns the in-memory summary; wall time is reported here but kept
    out of summary.json so identical runs produce identical files.
    """
    p = validate_config(params)
    n_steps = int(round(duration_s / p.dt))
    if abs(n_steps * p.dt - duration_s) > 1e-9:
        raise ValueError(f"duration {duration_s} is not a multiple of dt {p.dt}")

    world = World(p, scenario, seed=seed, controller=controller, router=router,
                  threads=threads, eq14_verbatim=eq14_verbatim,
                  eq18_verbatim=eq18_verbatim)
    if probe is not None:
        world.add_probe(probe[0], probe[1], probe[2])
    coll = collector if collector is not None else metrics.MetricsCollector(
        p, window_seconds=window_s, header_bytes=header_bytes)

    snap_ticks = p.ticks(snapshot_every_s) if snapshot_every_s > 0 else 0
    snapshots: list[str] = []
    started = time.perf_counter()
    for _ in range(n_steps):
        world.step()
        coll.on_tick(
            world.tick, world.tick_entries, world.tick_cluster_events,
            world.tick_pattern_events, world.vel, world.cluster_count(),
            world.geometry(), world.observation_pairs(),
            world.min_obstacle_distance_tick())
        if snap_ticks and world.tick % snap_ticks == 0:
            snapshots.append(json.dumps(world.snapshot(), separators=(",", ":")))
    wall = time.perf_counter() - started
    world.close()

    summary = coll.summary()
    summary.update({
        "scenario": scenario.kind,
        "controller": controller,
        "router": router,
        "n_uavs": p.n_uavs,
        "seed": world.seed,
        "probe": world.probe_stats.as_dict() if probe is not None else None,
    })

    if out_dir is not None:
        try:
            os.makedirs(out_dir, exist_ok=True)
            metrics.write_atomic(os.path.join(out_dir, "metrics.csv"),
                                 coll.metrics_csv())
            metrics.write_atomic(os.path.join(out_dir, "events.csv"),
                                 coll.events_csv())
            metrics.write_json_atomic(os.path.join(out_dir, "summary.json"),
                                      summary)
            metrics.write_atomic(os.path.join(out_dir, "snapshots.jsonl"),
                                 "\n".join(snapshots) + ("\n" if snapshots else ""))
        except OSError as e:
            raise SinkFailure(str(e)) from e
    return RunReport(summary=summary, wall_time_s=wall, out_dir=out_dir)
