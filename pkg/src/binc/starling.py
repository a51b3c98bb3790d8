"""Inter-formation control: observation sectors, group forces, patterns.

A formation watches at most one neighbor per 45-degree sector across a
225-degree forward fan (the rear three sectors are blind). Group pair
forces act on the surface distance (center distance minus both
equivalent radii) with log profiles; the pattern layer switches between
Evasion, LocalFollow and Collective with that priority.

Sign convention: the log magnitudes are written so each branch is zero
at its outer boundary and grows toward its singularity while pointing
the way the behavior demands (repulsion away, attraction toward,
evasion away from the obstacle). The published form (ratio inverted,
which flips repulsion into attraction) stays available behind
verbatim=True for comparison, as does comparing the raw 1/m velocity
change indicator against the dimensionless threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .core import Obstacle, SimParams, Vec2, ZERO
from .cluster import GroupView
from .wire import newer_than

SPEED_FLOOR = 0.01

EVASION = "evasion"
LOCAL_FOLLOW = "local-follow"
COLLECTIVE = "collective"

_SECTOR = 45.0
_FORWARD_HALF = 112.5  # 5 sectors of 45 centered on the heading


def _bearing_deg(heading: Vec2, rel: Vec2) -> float:
    """Relative bearing of rel w.r.t. heading in (-180, 180]."""
    ang = math.degrees(math.atan2(rel.y, rel.x) - math.atan2(heading.y, heading.x))
    while ang <= -180.0:
        ang += 360.0
    while ang > 180.0:
        ang -= 360.0
    return ang


def observation_neighbors(center: Vec2, heading: Vec2,
                          candidates: list[GroupView]) -> list[GroupView]:
    """Nearest candidate per observation sector.

    With a defined heading (speed >= 0.01 m/s) only the 5 forward
    sectors count; otherwise all 8 sectors are open. Sector boundaries
    belong to the counterclockwise side.
    """
    blind_off = heading.norm() < SPEED_FLOOR
    best: dict[int, tuple[float, int, GroupView]] = {}
    for view in candidates:
        rel = view.center - center
        d = rel.norm()
        if d == 0.0:
            continue  # bearing undefined; surface repulsion handles overlap
        if blind_off:
            ang = _bearing_deg(Vec2(1.0, 0.0), rel)
            if ang == 180.0:
                ang = -180.0
            sector = int((ang + 180.0) // _SECTOR)
        else:
            ang = _bearing_deg(heading, rel)
            if not (-_FORWARD_HALF <= ang < _FORWARD_HALF):
                continue
            sector = int((ang + _FORWARD_HALF) // _SECTOR)
        key = (d, view.head)
        cur = best.get(sector)
        if cur is None or key < (cur[0], cur[1]):
            best[sector] = (d, view.head, view)
    return [best[s][2] for s in sorted(best)]


def _max_repulsion(direction: Vec2, p: SimParams) -> Vec2:
    if direction.norm() == 0.0:
        return Vec2(p.f_clamp, 0.0)
    return direction.unit() * p.f_clamp


def group_pair_force(d_vec: Vec2, r_m: float, r_k: float, p: SimParams,
                     verbatim: bool = False) -> Vec2:
    """Interaction force on formation m from neighbor k.

    d_vec points from m's center to k's center; the law acts on the
    surface distance s = |d_vec| - r_m - r_k and is clamped to f_clamp.
    """
    dist = d_vec.norm()
    s = dist - r_m - r_k
    if s <= 0.0:
        return _max_repulsion(-d_vec, p)
    unit = d_vec * (1.0 / dist)
    if s <= p.R_rep:
        mag = math.log(s / p.R_rep) if verbatim else math.log(p.R_rep / s)
        return (-unit * mag).clamped(p.f_clamp)
    if s <= p.R_al:
        return ZERO
    if s <= p.R_att:
        if verbatim:
            mag = math.log((p.R_att - s) / (p.R_att - p.R_al))
        else:
            mag = math.log((p.R_att - p.R_al) / (p.R_att - s))
        return (unit * mag).clamped(p.f_clamp)
    return ZERO


def evasion_force(center: Vec2, radius: float, obstacle: Obstacle,
                  p: SimParams, verbatim: bool = False) -> Vec2:
    """Repulsion from the obstacle, active within R_obs of clearance."""
    d_vec = obstacle.center - center
    clearance = d_vec.norm() - radius
    if clearance <= 0.0:
        return _max_repulsion(-d_vec, p)
    if clearance > obstacle.radius:
        return ZERO
    if verbatim:
        mag = math.log(clearance / obstacle.radius)
    else:
        mag = math.log(obstacle.radius / clearance)
    return (-d_vec.unit() * mag).clamped(p.f_clamp)


def collective_force(v_m: Vec2, views: list[GroupView]) -> Vec2:
    """Unit vector along the summed velocity differences; zero when the
    neighbor set is empty or the sum vanishes."""
    total = ZERO
    for view in views:
        total = total + (view.velocity - v_m)
    if total.norm() < 1e-9:
        return ZERO
    return total.unit()


def velocity_change_indicator(d_vec: Vec2, v_now: Vec2, v_prev: Vec2) -> float:
    """Turn sharpness of a neighbor group, weighted by proximity (1/m).

    Zero when either velocity is below the heading floor or the groups
    are coincident.
    """
    dist = d_vec.norm()
    if dist == 0.0:
        return 0.0
    if v_now.norm() < SPEED_FLOOR or v_prev.norm() < SPEED_FLOOR:
        return 0.0
    return (1.0 - v_now.unit().dot(v_prev.unit())) / dist


def follow_threshold(v_m: Vec2, neighbor_velocities: list[Vec2],
                     alpha: float) -> float:
    """Adaptive trigger level: low when local headings agree, high when
    they conflict. Entries below the heading floor are skipped and do
    not count toward n."""
    total = ZERO
    n = 0
    for v in neighbor_velocities:
        if v.norm() >= SPEED_FLOOR:
            total = total + v.unit()
            n += 1
    if v_m.norm() >= SPEED_FLOOR:
        total = total + v_m.unit()
    return math.exp(-alpha / (n + 1) * total.norm())


def loop_admit(records: dict[int, int], incoming: tuple[int, int]) -> bool:
    """May this (group, seq) velocity identity be adopted?

    True only when nothing at least as new from that group was already
    followed.
    """
    group, seq = incoming
    last = records.get(group)
    return last is None or newer_than(seq, last)


def view_identity(view: GroupView) -> tuple[int, int]:
    """Root identity of the velocity a neighbor group is flying: its
    advertised follow chain, or its own (group, vel_seq)."""
    if view.follow is not None:
        return view.follow
    return (view.head, view.vel_seq)


@dataclass(frozen=True)
class PatternEvent:
    """One pattern decision of one formation, for the event log."""

    tick: int
    group: int
    pattern: str
    k_star: Optional[int]
    indicator: float
    threshold: float
    root_group: Optional[int] = None
    root_seq: Optional[int] = None


@dataclass(frozen=True)
class PatternDecision:
    force: Vec2
    pattern: str
    k_star: Optional[int]
    indicator: float
    threshold: float
    adopted: Optional[tuple[int, int]]  # identity recorded on LocalFollow


def pattern_force(v_m: Vec2, center: Vec2, radius: float,
                  views: list[GroupView], obstacle: Optional[Obstacle],
                  records: dict[int, int], p: SimParams,
                  eq14_verbatim: bool = False,
                  eq18_verbatim: bool = False) -> PatternDecision:
    """Select the pattern (Evasion > LocalFollow > Collective) and its
    force. The caller applies the returned adoption bookkeeping."""
    if obstacle is not None:
        clearance = (obstacle.center - center).norm() - radius
        if clearance <= obstacle.radius:
            force = evasion_force(center, radius, obstacle, p, eq14_verbatim)
            return PatternDecision(force, EVASION, None, 0.0, 0.0, None)

    k_star: Optional[GroupView] = None
    best = 0.0
    for view in views:
        if view.velocity_prev is None:
            continue
        ind = velocity_change_indicator(view.center - center, view.velocity,
                                        view.velocity_prev)
        if k_star is None or ind > best or (ind == best and view.head < k_star.head):
            k_star, best = view, ind

    threshold = follow_threshold(v_m, [v.velocity for v in views], p.alpha)
    scaled = best if eq18_verbatim else best * p.R_att
    if k_star is not None and scaled > threshold:
        identity = view_identity(k_star)
        if loop_admit(records, identity):
            force = k_star.velocity - v_m
            return PatternDecision(force, LOCAL_FOLLOW, k_star.head, scaled,
                                   threshold, identity)
    force = collective_force(v_m, views)
    return PatternDecision(force, COLLECTIVE,
                           k_star.head if k_star is not None else None,
                           scaled if k_star is not None else 0.0,
                           threshold, None)
