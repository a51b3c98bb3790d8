"""Comparator stacks: Boids control and a flat link-state router.

Boids senses through the same HELLO-table path as the clustered
controller, so runs differ only in the control law. The flat router
floods every node's link state network-wide through MPR relays; it
stands in for OLSR-class overhead and makes no routing-optimality
claims.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import SimParams, Vec2, ZERO
from .cluster import UavState, entry_live, live_neighbors
from . import wire


@dataclass(frozen=True)
class BoidsParams:
    w_sep: float
    w_align: float
    w_coh: float

    @classmethod
    def from_sim(cls, p: SimParams) -> "BoidsParams":
        if min(p.w_sep, p.w_align, p.w_coh) <= 0:
            raise ValueError("boids weights must be positive")
        return cls(p.w_sep, p.w_align, p.w_coh)


def boids_force(self_pos: Vec2, self_vel: Vec2,
                neighbors: list[tuple[Vec2, Vec2]], p: SimParams) -> Vec2:
    """Separation + alignment + cohesion over neighbors within r_att."""
    if not neighbors:
        return ZERO
    w = BoidsParams.from_sim(p)
    sep = ZERO
    vel_sum = ZERO
    pos_sum = ZERO
    for pos, vel in neighbors:
        d_vec = pos - self_pos
        d = d_vec.norm()
        if 0.0 < d < p.r_rep:
            sep = sep - d_vec.unit() * (1.0 / d)
        vel_sum = vel_sum + vel
        pos_sum = pos_sum + pos
    n = len(neighbors)
    align = vel_sum * (1.0 / n) - self_vel
    coh = (pos_sum * (1.0 / n) - self_pos) * (1.0 / p.r_att)
    total = sep * w.w_sep + align * w.w_align + coh * w.w_coh
    return total.clamped(p.f_clamp)


def boids_neighbors(state: UavState, self_pos: Vec2, tick: int,
                    p: SimParams) -> list[tuple[Vec2, Vec2]]:
    """All live 1-hop neighbors within r_att, cluster-blind."""
    out = []
    for e in live_neighbors(state, tick, p):
        if (e.position - self_pos).norm() <= p.r_att:
            out.append((e.position, e.velocity))
    return out


def flat_lsa(state: UavState, tick: int, p: SimParams) -> wire.Tc | None:
    """Link-state advertisement: this node's full 1-hop neighbor set."""
    ids = tuple(sorted(e.id for e in live_neighbors(state, tick, p)))
    if not ids:
        return None
    return wire.Tc(origin=state.id, advertised=ids, seq=state.tc_seq)


def on_flat_lsa(state: UavState, sender: int, msg: wire.Tc, tick: int,
                p: SimParams) -> bool:
    """Store network-wide link state; True when I must re-flood."""
    seen = state.seen_tc.get(msg.origin)
    if seen is not None and not wire.newer_than(msg.seq, seen):
        return False
    state.seen_tc[msg.origin] = msg.seq
    links = frozenset(frozenset((msg.origin, a)) for a in msg.advertised)
    state.tc_links[msg.origin] = (links, tick)
    entry = state.one_hop.get(sender)
    return entry is not None and entry_live(entry, tick, p) and entry.marked_me_mpr


def flat_topology(state: UavState, tick: int, p: SimParams) -> set[frozenset]:
    """Whole-network link set from stored LSAs plus own 1-hop links."""
    links: set[frozenset] = set()
    for e in live_neighbors(state, tick, p):
        links.add(frozenset((state.id, e.id)))
    horizon = 3 * p.tc_ticks
    for _origin, (tlinks, t) in state.tc_links.items():
        if tick - t > horizon:
            continue
        links |= tlinks
    return links
