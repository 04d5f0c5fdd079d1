import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qjfeedback.controller import (
    FeedbackConfig, FeedbackConfigError, FeedbackController, FeedbackWarning, GateCommand,
    Level, OutOfOrderError, Phase, advance_to, check_feedback, controller_init, observe_photon,
    replay,
)

US = 1e-6
DEFAULT = FeedbackConfig(tau_d=70 * US, tau_off=400 * US, latency=0.6 * US)


def hand_trace(cfg, photons, horizon):
    """Independent re-derivation of the schedule with plain variables."""
    out = []
    phase, deadline = "mon", cfg.tau_d
    for t in list(photons) + [None]:
        limit = horizon if t is None else t
        while deadline < limit or (t is None and deadline <= limit):
            act = deadline + cfg.latency
            if phase == "mon":
                out.append((act, "OFF"))
                phase, deadline = "blank", act + cfg.tau_off
            else:
                out.append((act, "ON"))
                phase, deadline = "mon", act + cfg.tau_d
        if t is not None and phase == "mon":
            deadline = t + cfg.tau_d
    return out


class TestConfig:
    def test_bounds(self):
        with pytest.raises(FeedbackConfigError) as exc:
            FeedbackConfig(tau_d=-1.0, tau_off=0.0, latency=-1.0)
        assert len(exc.value.problems) == 3
        assert "tau_d" in str(exc.value)

    def test_warnings(self):
        cfg = FeedbackConfig(tau_d=20 * US, tau_off=100 * US)
        with pytest.warns(FeedbackWarning):
            msgs = check_feedback(cfg, tau_fluo=33 * US, tau_t=240 * US)
        assert len(msgs) == 2

    def test_no_warning_for_default_values(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert check_feedback(DEFAULT, tau_fluo=33 * US, tau_t=240 * US) == []


class TestInit:
    def test_deadline(self):
        s = controller_init(DEFAULT)
        assert s.deadline == 70 * US
        assert s.phase is Phase.MONITORING and s.last_command is Level.ON

    def test_offset(self):
        assert controller_init(DEFAULT, 1.0).deadline == 1.0 + 70 * US

    def test_disabled(self):
        s = controller_init(FeedbackConfig(70 * US, 400 * US, enabled=False))
        assert s.deadline is None
        s, cmds = advance_to(s, 100.0)
        assert cmds == []


class TestObserve:
    def test_window_reset(self):
        s, cmds = observe_photon(controller_init(DEFAULT), 50 * US)
        assert cmds == [] and s.deadline == 50 * US + 70 * US

    def test_blanked_photon_ignored(self):
        s, _ = advance_to(controller_init(DEFAULT), 100 * US)
        assert s.phase is Phase.BLANKED
        s2, cmds = observe_photon(s, 200 * US)
        assert cmds == [] and s2.ignored == 1 and s2.deadline == s.deadline

    def test_out_of_order(self):
        s, _ = observe_photon(controller_init(DEFAULT), 50 * US)
        with pytest.raises(OutOfOrderError):
            observe_photon(s, 40 * US)
        with pytest.raises(OutOfOrderError):
            advance_to(s, 40 * US)

    def test_photon_wins_tie(self):
        s = controller_init(DEFAULT)
        s, cmds = observe_photon(s, s.deadline)
        assert cmds == [] and s.phase is Phase.MONITORING


class TestAdvance:
    def test_golden_trace(self):
        s, _ = observe_photon(controller_init(DEFAULT), 0.0)
        s, cmds = advance_to(s, 600 * US)
        assert [(c.level, c.actuate_at) for c in cmds] == [
            (Level.OFF, 70 * US + 0.6 * US),
            (Level.ON, (70 * US + 0.6 * US + 400 * US) + 0.6 * US),
            (Level.OFF, ((70 * US + 0.6 * US + 400 * US) + 0.6 * US + 70 * US) + 0.6 * US),
        ]
        assert cmds[0].actuate_at == pytest.approx(70.6 * US, abs=1e-15)
        assert cmds[1].actuate_at == pytest.approx(471.2 * US, abs=1e-15)
        assert cmds[2].actuate_at == pytest.approx(541.8 * US, abs=1e-15)
        assert s.deadline == pytest.approx(941.8 * US, abs=1e-15)

    def test_continuous_photons(self):
        s = controller_init(DEFAULT)
        for t in np.arange(1, 2000) * 10 * US:
            s, cmds = observe_photon(s, float(t))
            assert cmds == []

    def test_periodic_without_photons(self):
        cfg = FeedbackConfig(100 * US, 100 * US, latency=0.0)
        # the tenth deadline sums to 1 ms plus one ulp, so look slightly past it
        _, cmds = advance_to(controller_init(cfg), 1.05e-3)
        times = [c.actuate_at for c in cmds]
        assert times == pytest.approx([k * 100 * US for k in range(1, 11)], abs=1e-15)
        assert [c.level for c in cmds] == [Level.OFF, Level.ON] * 5


class TestReplay:
    def test_empty_matches_golden(self):
        sched = replay(DEFAULT, [], 600 * US)
        s, _ = observe_photon(controller_init(DEFAULT), 0.0)
        _, cmds = advance_to(s, 600 * US)
        assert sched == cmds

    def test_saturating(self):
        assert replay(DEFAULT, np.arange(0, 5e-3, 1 * US), 5e-3) == []

    def test_disabled(self):
        cfg = FeedbackConfig(70 * US, 400 * US, enabled=False)
        assert replay(cfg, [1e-3, 5e-3], 1.0) == []

    def test_unsorted(self):
        with pytest.raises(ValueError):
            replay(DEFAULT, [2e-3, 1e-3], 1.0)

    def test_deterministic(self):
        t = np.sort(np.random.default_rng(0).uniform(0, 0.05, 500))
        assert replay(DEFAULT, t, 0.05) == replay(DEFAULT, t.copy(), 0.05)


photon_streams = st.lists(st.floats(0.0, 5e-3, allow_nan=False), max_size=60).map(sorted)


@settings(max_examples=200, deadline=None)
@given(photon_streams,
       st.floats(1e-6, 3e-4), st.floats(1e-6, 6e-4), st.floats(0.0, 2e-6))
def test_schedule_properties(photons, tau_d, tau_off, latency):
    cfg = FeedbackConfig(tau_d, tau_off, latency)
    horizon = 6e-3
    sched = replay(cfg, photons, horizon)
    assert [(c.actuate_at, c.level.value) for c in sched] == hand_trace(cfg, photons, horizon)
    # alternation starting with OFF
    assert [c.level for c in sched] == [Level.OFF, Level.ON] * (len(sched) // 2) + (
        [Level.OFF] if len(sched) % 2 else [])
    for off, on in zip(sched[::2], sched[1::2]):
        assert on.actuate_at == (off.actuate_at + tau_off) + latency
    # window soundness: no delivered photon in the window before an OFF decision
    p = np.asarray(photons)
    blanked = []
    for off, on in zip(sched[::2], sched[1::2] + [GateCommand(math.inf, Level.ON)]):
        decided = off.actuate_at - latency
        lo = decided - tau_d
        inside = p[(p >= lo + 1e-15) & (p < decided - 1e-15)]
        assert all(any(a <= x <= b for a, b in blanked) for x in inside)
        blanked.append((decided, on.actuate_at - latency))


@settings(max_examples=150, deadline=None)
@given(photon_streams, st.floats(1e-6, 3e-4), st.floats(1e-6, 6e-4),
       st.integers(1, 7))
def test_batch_matches_single(photons, tau_d, tau_off, split):
    cfg = FeedbackConfig(tau_d, tau_off, 0.6e-6)
    a = FeedbackController(cfg)
    b = FeedbackController(cfg)
    cmds_a, cmds_b = [], []
    for t in photons:
        cmds_a += a.observe_photon(t)
    times = np.asarray(photons, dtype=float)
    i = 0
    while i < len(times):
        chunk = times[i:i + split]
        k = b.observe_batch(chunk)
        i += k
        if k < len(chunk):
            cmds_b += b.advance_to(float(b.next_deadline))
    cmds_a += a.advance_to(6e-3)
    cmds_b += b.advance_to(6e-3)
    assert cmds_a == cmds_b
    assert a.state == b.state


def test_wrapper_defaults_always_on():
    c = FeedbackController()
    assert c.next_deadline == math.inf
    assert c.observe_batch(np.array([1.0, 2.0])) == 2
    assert c.advance_to(10.0) == []
