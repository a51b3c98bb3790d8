"""Routing tables from TC/HTC state and two-layer packet forwarding.

Intra-cluster routes are hop-count shortest paths over links learned
from HELLO neighbor lists and TC floods, recomputed from the node's
local tables. Inter-cluster forwarding resolves the destination's head
through the HTC directory and relays head-to-head over the long
channel, multi-hop via BFS when the target head is out of direct reach.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .core import SimParams
from .cluster import Phase, UavState, entry_live, live_neighbors
from . import wire

TTL_INITIAL = 16

DELIVER = "deliver"
NEXT_HOP = "next-hop"
TO_HEAD = "to-head"
INTER_CLUSTER = "inter-cluster"
DROP = "drop"

UNKNOWN_DESTINATION = "UnknownDestination"
TTL_EXCEEDED = "Ttl"
LINK_DOWN = "LinkDown"
NOT_CLUSTERED = "NotClustered"


@dataclass(frozen=True)
class Action:
    kind: str
    next_hop: Optional[int] = None   # NEXT_HOP / TO_HEAD resolution
    dst_head: Optional[int] = None   # INTER_CLUSTER target
    reason: Optional[str] = None     # DROP


def on_tc(state: UavState, sender: int, msg: wire.Tc, tick: int,
          p: SimParams) -> bool:
    """Learn origin->selector links; True when I must re-flood.

    Only TCs originated inside my own cluster count, and only a node
    the transmitter selected as MPR relays them.
    """
    if state.phase is not Phase.CLUSTERED:
        return False
    if msg.origin != state.id and msg.origin not in state.cmn_members:
        return False
    seen = state.seen_tc.get(msg.origin)
    if seen is not None and not wire.newer_than(msg.seq, seen):
        return False
    state.seen_tc[msg.origin] = msg.seq
    links = frozenset(frozenset((msg.origin, a)) for a in msg.advertised)
    state.tc_links[msg.origin] = (links, tick)
    entry = state.one_hop.get(sender)
    return entry is not None and entry_live(entry, tick, p) and entry.marked_me_mpr


def on_htc(state: UavState, sender: int, msg: wire.Htc, tick: int,
           p: SimParams) -> bool:
    """Update the inter-cluster directory; True when unseen (re-flood)."""
    key = (min(state.id, sender), max(state.id, sender))
    state.head_links[key] = tick
    seen = state.seen_htc.get(msg.origin_head)
    if seen is not None and not wire.newer_than(msg.seq, seen):
        return False
    state.seen_htc[msg.origin_head] = msg.seq
    state.dir_members[msg.origin_head] = (msg.members, msg.seq, tick)
    return True


def membership_map(state: UavState, tick: int, p: SimParams) -> dict[int, int]:
    """node -> head from fresh HTC claims; the newest claim wins."""
    horizon = 3 * p.htc_ticks
    best: dict[int, tuple[int, int]] = {}
    winner: dict[int, int] = {}
    for origin, (members, _seq, t) in state.dir_members.items():
        if tick - t > horizon:
            continue
        for node in members:
            key = (t, -origin)
            if node not in best or key > best[node]:
                best[node] = key
                winner[node] = origin
    return winner


def intra_topology(state: UavState, tick: int, p: SimParams) -> set[frozenset]:
    """Same-cluster links from live HELLO tables and fresh TC floods."""
    if state.phase is not Phase.CLUSTERED:
        return set()
    cluster = set(state.cmn_members) | {state.id, state.head_id}
    links: set[frozenset] = set()
    for e in live_neighbors(state, tick, p):
        if e.id in cluster:
            links.add(frozenset((state.id, e.id)))
            for sub in e.neighbors:
                if sub.id in cluster and sub.id != state.id:
                    links.add(frozenset((e.id, sub.id)))
    horizon = 3 * p.tc_ticks
    for origin, (tlinks, t) in state.tc_links.items():
        if tick - t > horizon or origin not in cluster:
            continue
        for link in tlinks:
            if all(n in cluster for n in link):
                links.add(link)
    return links


def build_intra_routes(links: set[frozenset], self_id: int) -> dict[int, int]:
    """Destination -> next hop by BFS; equal-cost ties pick the lowest
    next-hop id."""
    adj: dict[int, set[int]] = {}
    for link in links:
        a, b = tuple(link)
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    if self_id not in adj:
        return {}

    def bfs(src: int) -> dict[int, int]:
        dist = {src: 0}
        q = deque([src])
        while q:
            cur = q.popleft()
            for nxt in adj[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    q.append(nxt)
        return dist

    dist_self = bfs(self_id)
    first_hops = sorted(adj[self_id])
    dist_from_hop = {h: bfs(h) for h in first_hops}
    routes: dict[int, int] = {}
    for dst, d in dist_self.items():
        if dst == self_id:
            continue
        for hop in first_hops:
            if dist_from_hop[hop].get(dst, -1) == d - 1:
                routes[dst] = hop
                break
    return routes


def inter_next_head(state: UavState, dst_head: int, tick: int,
                    p: SimParams) -> Optional[int]:
    """Next head toward dst_head over fresh head links (BFS, lowest-id
    tie-break)."""
    horizon = 3 * p.chello_ticks
    adj: dict[int, set[int]] = {}
    for (a, b), t in state.head_links.items():
        if tick - t > horizon:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    if state.id not in adj:
        return None
    routes = build_intra_routes(
        {frozenset((a, b)) for a, nbrs in adj.items() for b in nbrs}, state.id)
    return routes.get(dst_head)


def forward(state: UavState, dst: int, tick: int, p: SimParams) -> Action:
    """Forwarding decision for a unicast packet held by this node."""
    if dst == state.id:
        return Action(DELIVER)
    if state.phase is not Phase.CLUSTERED:
        return Action(DROP, reason=NOT_CLUSTERED)
    routes = build_intra_routes(intra_topology(state, tick, p), state.id)
    in_cluster = dst in state.cmn_members
    if in_cluster:
        hop = routes.get(dst)
        if hop is not None:
            return Action(NEXT_HOP, next_hop=hop)
        if state.is_head():
            return Action(DROP, reason=UNKNOWN_DESTINATION)
        # fall through: the head has the wider view
    if not state.is_head():
        hop = routes.get(state.head_id)
        if hop is None:
            return Action(DROP, reason=UNKNOWN_DESTINATION)
        return Action(TO_HEAD, next_hop=hop)
    heads = membership_map(state, tick, p)
    dst_head = heads.get(dst)
    if dst_head is None or dst_head == state.id:
        return Action(DROP, reason=UNKNOWN_DESTINATION)
    nxt = inter_next_head(state, dst_head, tick, p)
    if nxt is None:
        return Action(DROP, reason=UNKNOWN_DESTINATION)
    return Action(INTER_CLUSTER, next_hop=nxt, dst_head=dst_head)
