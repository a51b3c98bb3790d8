"""Shared domain types, simulation parameters, and formation geometry.

Everything here is a plain value type or a pure function; nothing holds
references to the running world. All tie-breaking everywhere in the
package resolves by lowest node id so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields, replace
from typing import NamedTuple, Optional


class Vec2(NamedTuple):
    """2D vector of meters, m/s or m/s^2 depending on context."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":  # type: ignore[override]
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":  # type: ignore[override]
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def unit(self) -> "Vec2":
        n = self.norm()
        if n == 0.0:
            return Vec2(0.0, 0.0)
        return Vec2(self.x / n, self.y / n)

    def clamped(self, limit: float) -> "Vec2":
        n = self.norm()
        if n <= limit or n == 0.0:
            return self
        s = limit / n
        return Vec2(self.x * s, self.y * s)


ZERO = Vec2(0.0, 0.0)


def vec2(x: float, y: float) -> Vec2:
    """Checked constructor: both components must be finite."""
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite Vec2 component: ({x}, {y})")
    return Vec2(float(x), float(y))


class EmptyFormation(ValueError):
    """Raised when a geometry helper receives zero member positions."""


def formation_center(positions: list[Vec2]) -> Vec2:
    """Arithmetic mean of member positions."""
    if not positions:
        raise EmptyFormation("formation has no members")
    sx = sum(p.x for p in positions)
    sy = sum(p.y for p in positions)
    n = len(positions)
    return Vec2(sx / n, sy / n)


def formation_radius(center: Vec2, positions: list[Vec2]) -> float:
    """Equivalent radius: max member distance to the center."""
    if not positions:
        raise EmptyFormation("formation has no members")
    return max(math.hypot(p.x - center.x, p.y - center.y) for p in positions)


@dataclass(frozen=True)
class Obstacle:
    center: Vec2
    radius: float


@dataclass
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class SimParams:
    """Simulation parameters. Defaults are the standard setup.

    Field names are the exact keys accepted in config files. Lowercase
    r_* radii bound node-level interaction, uppercase R_* the
    formation-level one; both orderings are validated.
    """

    n_uavs: int = 120
    v_max: float = 20.0            # m/s
    r_rep: float = 100.0           # m
    r_al: float = 150.0            # m
    r_att: float = 200.0           # m
    R_rep: float = 200.0           # m, surface distance
    R_al: float = 400.0            # m
    R_att: float = 600.0           # m
    d_tr: float = 200.0            # m, short-channel range
    D_tr: float = 1000.0           # m, long-channel range
    A: float = 0.5                 # node force law boost
    alpha: float = 1.0             # follow-threshold sensitivity
    t_hello: float = 2.0           # s
    t_chello: float = 2.0          # s
    t_tc: float = 5.0              # s
    t_htc: float = 5.0             # s
    t_cmn: float = 2.0             # s
    t_mwt: float = 10.0            # s, max waiting time
    dt: float = 0.5                # s, control tick
    obstacle: Optional[Obstacle] = None
    destination: Vec2 = Vec2(1_000_000.0, 0.0)
    s_max: int = 4                 # social level cap
    f_clamp: float = 5.0           # m/s^2
    blind_rear_half_angle_node: float = 45.0  # degrees
    seed: int = 0
    # free parameters exposed in config (defaults are design decisions)
    w_goal: float = 1.0            # m/s^2 leader goal steering weight
    w_sep: float = 1.5             # boids baseline weights
    w_align: float = 1.0
    w_coh: float = 1.0
    fading_mode: str = "deterministic"  # or "gamma:<shape>"

    def ticks(self, seconds: float) -> int:
        return int(round(seconds / self.dt))

    @property
    def hello_ticks(self) -> int:
        return self.ticks(self.t_hello)

    @property
    def chello_ticks(self) -> int:
        return self.ticks(self.t_chello)

    @property
    def tc_ticks(self) -> int:
        return self.ticks(self.t_tc)

    @property
    def htc_ticks(self) -> int:
        return self.ticks(self.t_htc)

    @property
    def cmn_ticks(self) -> int:
        return self.ticks(self.t_cmn)

    @property
    def mwt_ticks(self) -> int:
        return self.ticks(self.t_mwt)

    def gamma_shape(self) -> Optional[float]:
        if self.fading_mode == "deterministic":
            return None
        if self.fading_mode.startswith("gamma:"):
            return float(self.fading_mode.split(":", 1)[1])
        raise ValueError(f"unknown fading_mode {self.fading_mode!r}")


def validate_config(raw: SimParams) -> SimParams:
    """Return the parameters unchanged if every invariant holds.

    Raises ConfigError listing every violated inequality with the
    offending values substituted in.
    """
    v: list[Violation] = []

    if raw.n_uavs < 1:
        v.append(Violation("BadCount", f"n_uavs = {raw.n_uavs} < 1"))
    if raw.dt <= 0:
        v.append(Violation("NonPositiveTick", f"dt = {raw.dt} <= 0"))
    if raw.v_max <= 0:
        v.append(Violation("BadSpeed", f"v_max = {raw.v_max} <= 0"))

    if not (0 < raw.r_rep < raw.r_al < raw.r_att <= raw.d_tr):
        v.append(Violation(
            "RadiiOrdering",
            f"need 0 < r_rep < r_al < r_att <= d_tr, got 0 < {raw.r_rep} "
            f"< {raw.r_al} < {raw.r_att} <= {raw.d_tr}"))
    if not (0 < raw.R_rep < raw.R_al < raw.R_att <= raw.D_tr):
        v.append(Violation(
            "RadiiOrdering",
            f"need 0 < R_rep < R_al < R_att <= D_tr, got 0 < {raw.R_rep} "
            f"< {raw.R_al} < {raw.R_att} <= {raw.D_tr}"))

    if not (raw.t_chello * raw.v_max < raw.R_rep / 2.0):
        v.append(Violation(
            "CHelloTooSlow",
            f"t_chello * v_max = {raw.t_chello * raw.v_max} >= "
            f"{raw.R_rep / 2.0} = R_rep / 2"))

    if raw.dt > 0:
        for name in ("t_hello", "t_chello", "t_tc", "t_htc", "t_cmn", "t_mwt"):
            val = getattr(raw, name)
            if val <= 0:
                v.append(Violation("NonPositiveTick", f"{name} = {val} <= 0"))
                continue
            ratio = val / raw.dt
            if abs(ratio - round(ratio)) > 1e-9:
                v.append(Violation(
                    "TimerNotTickMultiple",
                    f"{name} = {val} is not an integer multiple of dt = {raw.dt}"))

    if raw.s_max < 1:
        v.append(Violation("BadCount", f"s_max = {raw.s_max} < 1"))
    if raw.f_clamp <= 0:
        v.append(Violation("BadForce", f"f_clamp = {raw.f_clamp} <= 0"))
    if raw.alpha <= 0:
        v.append(Violation("BadCoefficient", f"alpha = {raw.alpha} <= 0"))
    if raw.A < 0:
        v.append(Violation("BadCoefficient", f"A = {raw.A} < 0"))
    if not (0 <= raw.blind_rear_half_angle_node < 180):
        v.append(Violation(
            "BadAngle",
            f"blind_rear_half_angle_node = {raw.blind_rear_half_angle_node} "
            f"not in [0, 180)"))
    if raw.obstacle is not None and raw.obstacle.radius <= 0:
        v.append(Violation(
            "BadRadius", f"obstacle radius = {raw.obstacle.radius} <= 0"))
    try:
        raw.gamma_shape()
    except ValueError as e:
        v.append(Violation("BadFadingMode", str(e)))

    if v:
        raise ConfigError(v)
    return raw


_INT_FIELDS = {"n_uavs", "s_max", "seed"}
_STR_FIELDS = {"fading_mode"}


def parse_config(text: str, base: Optional[SimParams] = None) -> SimParams:
    """Parse flat `key = value` configuration text.

    `#` starts a comment; unknown keys are an error. `destination` is
    `x,y`; `obstacle` is `cx,cy,radius` or `none`.
    """
    params = base if base is not None else SimParams()
    known = {f.name for f in dc_fields(SimParams)}
    updates: dict = {}
    violations: list[Violation] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(Violation(
                "BadSyntax", f"line {lineno}: expected 'key = value'"))
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            violations.append(Violation("UnknownKey", f"line {lineno}: {key!r}"))
            continue
        try:
            updates[key] = _parse_value(key, value)
        except ValueError as e:
            violations.append(Violation("BadValue", f"line {lineno}: {key}: {e}"))
    if violations:
        raise ConfigError(violations)
    return replace(params, **updates)


def _parse_value(key: str, value: str):
    if key == "destination":
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'x,y', got {value!r}")
        return vec2(float(parts[0]), float(parts[1]))
    if key == "obstacle":
        if value.lower() == "none":
            return None
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected 'cx,cy,radius' or 'none', got {value!r}")
        return Obstacle(vec2(float(parts[0]), float(parts[1])), float(parts[2]))
    if key in _STR_FIELDS:
        return value
    if key in _INT_FIELDS:
        return int(value)
    return float(value)


def format_config(params: SimParams) -> str:
    """Render parameters back to the flat key = value syntax."""
    lines = []
    for f in dc_fields(SimParams):
        val = getattr(params, f.name)
        if f.name == "destination":
            val = f"{val.x},{val.y}"
        elif f.name == "obstacle":
            val = "none" if val is None else f"{val.center.x},{val.center.y},{val.radius}"
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"
