"""Friis model, link predicate and broadcast delivery accounting."""

import math

import numpy as np
import pytest
from dataclasses import replace

from binc.core import SimParams, Vec2
from binc.radio import (ChannelKind, ChannelParams, LedgerEntry, Radio,
                        ZeroDistance, friis_rx_power, max_range)
from binc import wire


class TestFriis:
    def test_unit_identity(self):
        # P0*Gt*Gr = 1, wavelength = 4*pi, d = 1 -> L(d) = 1 -> 1 W
        ch = ChannelParams(1.0, 1.0, 1.0, 4.0 * math.pi, 1e-12)
        assert friis_rx_power(ch, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_inverse_square(self):
        ch = ChannelParams(2.0, 3.0, 1.5, 0.125, 1e-12)
        p1 = friis_rx_power(ch, 57.0)
        p2 = friis_rx_power(ch, 114.0)
        assert p2 == pytest.approx(p1 / 4.0, rel=1e-12)

    def test_zero_distance(self):
        ch = ChannelParams.calibrated(200.0)
        with pytest.raises(ZeroDistance):
            friis_rx_power(ch, 0.0)

    def test_power_at_calibrated_range_equals_sensitivity(self):
        ch = ChannelParams.calibrated(200.0)
        # closed-form oracle: tau = P0*G*(lambda/(4*pi*200))^2
        tau = 1.0 * (0.125 / (4.0 * math.pi * 200.0)) ** 2
        assert ch.sensitivity == pytest.approx(tau, rel=1e-12)
        assert friis_rx_power(ch, 200.0) == pytest.approx(ch.sensitivity, rel=1e-12)


class TestMaxRange:
    def test_calibration_inversion(self):
        assert max_range(ChannelParams.calibrated(200.0)) == pytest.approx(200.0, abs=1e-9)

    def test_quadrupling_power_doubles_range(self):
        ch = ChannelParams.calibrated(200.0)
        boosted = ChannelParams(ch.tx_power * 4.0, ch.gain_tx, ch.gain_rx,
                                ch.wavelength, ch.sensitivity)
        assert max_range(boosted) == pytest.approx(400.0, abs=1e-9)

    def test_long_channel_calibration(self):
        assert max_range(ChannelParams.calibrated(1000.0)) == pytest.approx(1000.0, abs=0.1)

    def test_identity_on_configured_ranges(self):
        radio = Radio(SimParams())
        assert abs(max_range(radio.short) - 200.0) < 0.1
        assert abs(max_range(radio.long) - 1000.0) < 0.1


class TestLinkUp:
    def setup_method(self):
        self.radio = Radio(SimParams())

    def test_boundary_inclusive(self):
        assert self.radio.link_up(Vec2(0, 0), Vec2(200.0, 0), ChannelKind.SHORT)

    def test_just_past_boundary(self):
        assert not self.radio.link_up(Vec2(0, 0), Vec2(200.0001, 0), ChannelKind.SHORT)

    def test_long_channel_900m(self):
        assert self.radio.link_up(Vec2(0, 0), Vec2(900.0, 0), ChannelKind.LONG)

    def test_symmetry(self):
        import random
        rng = random.Random(5)
        for _ in range(200):
            a = Vec2(rng.uniform(-300, 300), rng.uniform(-300, 300))
            b = Vec2(rng.uniform(-300, 300), rng.uniform(-300, 300))
            assert (self.radio.link_up(a, b, ChannelKind.SHORT)
                    == self.radio.link_up(b, a, ChannelKind.SHORT))

    def test_gamma_mode_deterministic(self):
        p = replace(SimParams(), fading_mode="gamma:3")
        r1, r2 = Radio(p), Radio(p)
        a, b = Vec2(0, 0), Vec2(150.0, 0)
        outcomes1 = [r1.link_up(a, b, ChannelKind.SHORT, tick=t, id_a=1, id_b=2)
                     for t in range(50)]
        outcomes2 = [r2.link_up(a, b, ChannelKind.SHORT, tick=t, id_a=1, id_b=2)
                     for t in range(50)]
        assert outcomes1 == outcomes2
        assert any(outcomes1)  # 150 m usually connects


def _hello(origin):
    return wire.Hello(origin, 0, Vec2(0, 0), Vec2(0, 0), None, None, 0)


class TestDeliver:
    def setup_method(self):
        self.radio = Radio(SimParams())

    def test_broadcast_three_neighbors_one_entry(self):
        pos = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 60.0], [-70.0, 0.0],
                        [500.0, 0.0]])
        inboxes, entries = self.radio.deliver(
            [(1, ChannelKind.SHORT, _hello(1))], pos, set(), tick=0)
        receivers = sorted(inboxes)
        assert receivers == [2, 3, 4]  # node 5 is out of range
        assert len(entries) == 1
        assert entries[0].size == wire.size_of(_hello(1))

    def test_isolated_sender_still_charged(self):
        pos = np.array([[0.0, 0.0], [5000.0, 0.0]])
        inboxes, entries = self.radio.deliver(
            [(1, ChannelKind.SHORT, _hello(1))], pos, set(), tick=0)
        assert inboxes == {}
        assert len(entries) == 1

    def test_heads_1200m_apart_no_delivery(self):
        pos = np.array([[0.0, 0.0], [1200.0, 0.0]])
        msg = wire.CHello(1, Vec2(0, 0), 0.0, Vec2(0, 0), 1, 0)
        inboxes, entries = self.radio.deliver(
            [(1, ChannelKind.LONG, msg), (2, ChannelKind.LONG, msg)],
            pos, {1, 2}, tick=0)
        assert inboxes == {}
        assert len(entries) == 2

    def test_long_channel_only_reaches_heads(self):
        pos = np.array([[0.0, 0.0], [100.0, 0.0], [200.0, 0.0]])
        msg = wire.Htc(1, (1,), 0)
        inboxes, _ = self.radio.deliver(
            [(1, ChannelKind.LONG, msg)], pos, {1, 3}, tick=0)
        assert sorted(inboxes) == [3]

    def test_ledger_bytes_match_sizes(self):
        pos = np.zeros((4, 2))
        outbox = [(1, ChannelKind.SHORT, _hello(1)),
                  (2, ChannelKind.SHORT, wire.Tc(2, (1, 3), 4)),
                  (3, ChannelKind.SHORT, wire.Cmn(3, Vec2(0, 0), ((3, 0),)))]
        _, entries = self.radio.deliver(outbox, pos, set(), tick=0)
        assert sum(e.size for e in entries) == sum(
            wire.size_of(m) for _, _, m in outbox)
        for e in entries:
            assert e.routing_bytes + e.control_bytes == e.size
