"""Intra-formation control: neighbor interaction and leader following.

Followers feel two forces. The neighbor-interaction term repels inside
r_rep, is silent on (r_rep, r_al] and attracts on (r_al, r_att], with a
cosine profile boosted by the constant A. The following term pulls each
node toward its superiors (social rank closer to the leader by one or
two) and averages their velocity difference.

The superior-set direction follows the prose (follow nodes CLOSER to
the leader): 0 < rank_self - rank_other <= 2.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Optional

from .core import SimParams, Vec2, ZERO, EmptyFormation
from .cluster import coincident_direction

SPEED_FLOOR = 0.01  # m/s below which a heading is undefined


def interactive_neighbors(self_pos: Vec2, self_vel: Vec2,
                          candidates: list[tuple[int, Vec2]],
                          p: SimParams) -> list[int]:
    """Ids of same-group candidates within r_att and outside the rear
    blind cone. candidates is (id, position); group filtering is the
    caller's job."""
    speed = self_vel.norm()
    use_cone = speed >= SPEED_FLOOR
    half = math.radians(p.blind_rear_half_angle_node)
    out = []
    for nid, pos in candidates:
        rel = pos - self_pos
        d = rel.norm()
        if d > p.r_att:
            continue
        if use_cone and d > 0:
            # angle between rel and the reversed heading
            cos_a = max(-1.0, min(1.0, rel.dot(-self_vel) / (d * speed)))
            if math.acos(cos_a) <= half:
                continue
        out.append(nid)
    return out


def pair_force(rel: Vec2, p: SimParams,
               id_self: Optional[int] = None,
               id_other: Optional[int] = None) -> Vec2:
    """Neighbor-interaction force from one neighbor at offset rel.

    Coincident positions repel at the law's maximum magnitude along a
    deterministic pseudo-random direction seeded by the id pair.
    """
    d = rel.norm()
    if d == 0.0:
        if id_self is not None and id_other is not None:
            direction = coincident_direction(id_self, id_other)
            if id_self > id_other:
                direction = -direction
        else:
            direction = Vec2(1.0, 0.0)
        return direction * (1.0 + p.A)
    unit = rel * (1.0 / d)
    if d <= p.r_rep:
        mag = math.cos(math.pi / 2.0 * d / p.r_rep) + p.A
        return -unit * mag
    if d <= p.r_al:
        return ZERO
    if d <= p.r_att:
        mag = math.cos(math.pi / 2.0 * (p.r_att - d) / (p.r_att - p.r_al)) + p.A
        return unit * mag
    return ZERO


def neighbor_force(self_pos: Vec2, self_id: int,
                   neighbors: list[tuple[int, Vec2]], p: SimParams) -> Vec2:
    """Sum of pair forces over the interactive set."""
    total = ZERO
    for nid, pos in neighbors:
        total = total + pair_force(pos - self_pos, p, self_id, nid)
    return total


def select_leader(positions: dict[int, Vec2], goal_dir: Vec2) -> int:
    """Forefront member along the goal direction; ties to the lowest id."""
    if not positions:
        raise EmptyFormation("no members to select a leader from")
    if goal_dir.norm() == 0.0:
        raise ValueError("goal direction must be non-zero")
    return max(positions, key=lambda nid: (positions[nid].dot(goal_dir), -nid))


def assign_social_levels(links: set[frozenset], members: set[int],
                         leader: int, s_max: int) -> dict[int, int]:
    """Rank = BFS hop count from the leader, clamped to s_max.

    Members unreachable over the intra-cluster links get s_max.
    """
    if leader not in members:
        raise ValueError(f"leader {leader} is not a member")
    adj: dict[int, set[int]] = {m: set() for m in members}
    for link in links:
        a, b = tuple(link)
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    levels = {m: s_max for m in members}
    levels[leader] = 0
    q = deque([leader])
    dist = {leader: 0}
    while q:
        cur = q.popleft()
        for nxt in sorted(adj[cur]):
            if nxt not in dist:
                dist[nxt] = dist[cur] + 1
                levels[nxt] = min(dist[nxt], s_max)
                q.append(nxt)
    return levels


def following_force(self_pos: Vec2, self_vel: Vec2,
                    superiors: list[tuple[Vec2, Vec2]]) -> Vec2:
    """Position pull toward superiors plus mean velocity difference."""
    if not superiors:
        return ZERO
    f_pos = ZERO
    f_vel = ZERO
    for pos, vel in superiors:
        f_pos = f_pos + (pos - self_pos).unit()
        f_vel = f_vel + (vel - self_vel)
    f_vel = f_vel * (1.0 / len(superiors))
    return f_pos + f_vel


def member_total_force(neighbor_f: Vec2, following_f: Vec2, p: SimParams) -> Vec2:
    return (neighbor_f + following_f).clamped(p.f_clamp)
