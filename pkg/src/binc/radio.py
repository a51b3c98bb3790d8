"""Dual-channel link model: Friis power, link predicate, broadcast delivery.

The default mode is a deterministic disk: ranges are taken directly from
the configured d_tr / D_tr and channel constants are back-derived so the
closed-form maximum range reproduces them. Optional gamma fading draws
one independent unit-mean sample per (sender, receiver, tick, channel).
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import SimParams, Vec2
from . import wire


class ZeroDistance(ValueError):
    """Friis power is undefined at zero distance."""


class LongChannelByNonHead(RuntimeError):
    """Only current cluster heads may transmit on the long channel."""


class ChannelKind(enum.Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel constants; see `calibrated` for the usual setup."""

    tx_power: float          # P0, watts
    gain_tx: float
    gain_rx: float
    wavelength: float        # meters
    sensitivity: float       # watts
    gamma_shape: Optional[float] = None  # None = deterministic

    def __post_init__(self):
        for name in ("tx_power", "gain_tx", "gain_rx", "wavelength", "sensitivity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def calibrated(cls, range_m: float, wavelength: float = 0.125,
                   tx_power: float = 1.0, gain_tx: float = 1.0,
                   gain_rx: float = 1.0,
                   gamma_shape: Optional[float] = None) -> "ChannelParams":
        """Back-derive the sensitivity so max_range equals range_m."""
        sensitivity = tx_power * gain_tx * gain_rx * (
            wavelength / (4.0 * math.pi * range_m)) ** 2
        return cls(tx_power, gain_tx, gain_rx, wavelength, sensitivity,
                   gamma_shape)


def friis_rx_power(ch: ChannelParams, d: float, fade: float = 1.0) -> float:
    """Received power at distance d with the given small-scale fade."""
    if d <= 0:
        raise ZeroDistance(f"distance {d} must be > 0")
    loss = (ch.wavelength / (4.0 * math.pi * d)) ** 2
    return ch.tx_power * ch.gain_tx * ch.gain_rx * loss * fade


def max_range(ch: ChannelParams) -> float:
    """Distance where the deterministic received power meets sensitivity."""
    return (ch.wavelength / (4.0 * math.pi)) * math.sqrt(
        ch.tx_power * ch.gain_tx * ch.gain_rx / ch.sensitivity)


@dataclass(frozen=True)
class LedgerEntry:
    """One transmission, charged once regardless of receiver count."""

    tick: int
    sender: int
    channel: ChannelKind
    mtype: str
    size: int
    routing_bytes: int
    control_bytes: int


_MIX_A = 0x9E3779B97F4A7C15
_MIX_B = 0xBF58476D1CE4E5B9


def _fade_key(seed: int, tick: int, sender: int, receiver: int, kind: ChannelKind) -> int:
    # Stable integer mix; never use hash() here (randomized per process).
    k = seed & 0xFFFFFFFFFFFFFFFF
    for part in (tick, sender, receiver, 1 if kind is ChannelKind.LONG else 0):
        k = ((k ^ part) * _MIX_A + _MIX_B) & 0xFFFFFFFFFFFFFFFF
    return k


class Radio:
    """Link predicate plus one-tick broadcast delivery with byte accounting."""

    def __init__(self, params: SimParams):
        shape = params.gamma_shape()
        self.d_tr = params.d_tr
        self.D_tr = params.D_tr
        self.gamma_shape = shape
        self.seed = params.seed
        self.short = ChannelParams.calibrated(params.d_tr, gamma_shape=shape)
        self.long = ChannelParams.calibrated(params.D_tr, gamma_shape=shape)

    def _range(self, kind: ChannelKind) -> float:
        return self.d_tr if kind is ChannelKind.SHORT else self.D_tr

    def _channel(self, kind: ChannelKind) -> ChannelParams:
        return self.short if kind is ChannelKind.SHORT else self.long

    def _fade(self, tick: int, sender: int, receiver: int, kind: ChannelKind) -> float:
        rng = random.Random(_fade_key(self.seed, tick, sender, receiver, kind))
        return rng.gammavariate(self.gamma_shape, 1.0 / self.gamma_shape)

    def link_up(self, a: Vec2, b: Vec2, kind: ChannelKind, *,
                tick: int = 0, id_a: int = 0, id_b: int = 0) -> bool:
        """True when a transmission from a reaches b on this channel."""
        d = math.hypot(a.x - b.x, a.y - b.y)
        if self.gamma_shape is None:
            return d <= self._range(kind)
        if d == 0.0:
            return True
        fade = self._fade(tick, id_a, id_b, kind)
        ch = self._channel(kind)
        return friis_rx_power(ch, d, fade) >= ch.sensitivity

    def deliver(self, outbox: list, positions: np.ndarray, head_ids: set,
                tick: int) -> tuple[dict, list[LedgerEntry]]:
        """Deliver every queued (sender, kind, message) broadcast.

        Returns per-receiver inboxes and one ledger entry per
        transmission. Long-channel receivers are the current heads.
        """
        inboxes: dict[int, list] = {}
        entries: list[LedgerEntry] = []
        heads_arr = None
        if head_ids:
            heads_arr = np.fromiter(sorted(head_ids), dtype=np.int64)
        # With fading the disk is only a candidate prefilter; a fade of
        # 9x mean (cutoff 3x range) is beyond any realistic gamma draw.
        cutoff_scale = 1.0 if self.gamma_shape is None else 3.0
        for sender, kind, msg in outbox:
            spos = positions[sender - 1]
            if kind is ChannelKind.SHORT:
                cand = None  # all nodes
                cpos = positions
            else:
                if heads_arr is None:
                    cand = np.empty(0, dtype=np.int64)
                    cpos = positions[:0]
                else:
                    cand = heads_arr
                    cpos = positions[heads_arr - 1]
            d = np.hypot(cpos[:, 0] - spos[0], cpos[:, 1] - spos[1])
            within = d <= self._range(kind) * cutoff_scale
            if cand is None:
                rec_ids = np.nonzero(within)[0] + 1
            else:
                rec_ids = cand[within]
            for rid in rec_ids:
                rid = int(rid)
                if rid == sender:
                    continue
                if self.gamma_shape is not None:
                    dist = math.hypot(positions[rid - 1][0] - spos[0],
                                      positions[rid - 1][1] - spos[1])
                    if dist > 0:
                        fade = self._fade(tick, sender, rid, kind)
                        ch = self._channel(kind)
                        if friis_rx_power(ch, dist, fade) < ch.sensitivity:
                            continue
                inboxes.setdefault(rid, []).append((sender, msg))
            rbytes, cbytes = wire.purpose_split(msg)
            entries.append(LedgerEntry(
                tick=tick, sender=sender, channel=kind,
                mtype=type(msg).__name__, size=wire.size_of(msg),
                routing_bytes=rbytes, control_bytes=cbytes))
        return inboxes, entries
