"""Quantum-jump feedback controller.

A deterministic online state machine fed with timestamped photon
detections.  While MONITORING, every photon re-arms a decision window of
length ``tau_d``.  If the window expires without a photon the controller
decides that the emitter has jumped to its dark triplet state and blanks the
excitation laser for ``tau_off``.  Commands act on the gate after a fixed
actuator ``latency``; the next decision window opens when the gate is
restored.

The state-machine core is a set of pure functions over an immutable
:class:`ControllerState`.  :class:`FeedbackController` is a thin mutable
wrapper used by the simulators.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np


class Level(str, enum.Enum):
    ON = "ON"
    OFF = "OFF"


class Phase(str, enum.Enum):
    MONITORING = "MONITORING"
    BLANKED = "BLANKED"


class FeedbackConfigError(ValueError):
    """Raised for a controller configuration outside its valid range."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class FeedbackWarning(UserWarning):
    pass


class OutOfOrderError(ValueError):
    """An event arrived with a timestamp earlier than one already processed."""


@dataclass(frozen=True)
class FeedbackConfig:
    tau_d: float
    tau_off: float
    latency: float = 600e-9
    enabled: bool = True

    def __post_init__(self):
        problems = []
        if not (self.tau_d > 0 and math.isfinite(self.tau_d)):
            problems.append(f"tau_d must be > 0 (got {self.tau_d!r})")
        if not (self.tau_off > 0 and math.isfinite(self.tau_off)):
            problems.append(f"tau_off must be > 0 (got {self.tau_off!r})")
        if not (self.latency >= 0 and math.isfinite(self.latency)):
            problems.append(f"latency must be >= 0 (got {self.latency!r})")
        if problems:
            raise FeedbackConfigError(problems)


def check_feedback(config: FeedbackConfig, tau_fluo: float | None = None,
                   tau_t: float | None = None) -> list[str]:
    """Warn about settings that defeat the feedback loop.

    A window no longer than the mean detection interval ``tau_fluo`` keeps
    the laser switched off most of the time; a blanking period no longer
    than the triplet lifetime re-exposes the molecule while still shelved.
    Returns the warning messages (also issued as :class:`FeedbackWarning`).
    """
    messages = []
    if not config.enabled:
        return messages
    if tau_fluo is not None and config.tau_d <= tau_fluo:
        messages.append(
            f"tau_d={config.tau_d:g}s <= mean detection interval {tau_fluo:g}s: "
            "the window will expire during normal fluorescence")
    if tau_t is not None and config.tau_off <= tau_t:
        messages.append(
            f"tau_off={config.tau_off:g}s <= triplet lifetime {tau_t:g}s")
    for m in messages:
        warnings.warn(m, FeedbackWarning, stacklevel=2)
    return messages


@dataclass(frozen=True)
class GateCommand:
    actuate_at: float
    level: Level


@dataclass(frozen=True)
class ControllerState:
    config: FeedbackConfig
    phase: Phase
    deadline: float | None
    last_command: Level
    last_time: float
    ignored: int = 0


def controller_init(config: FeedbackConfig, t0: float = 0.0) -> ControllerState:
    deadline = t0 + config.tau_d if config.enabled else None
    return ControllerState(config, Phase.MONITORING, deadline, Level.ON, t0)


def _check_order(state: ControllerState, t: float) -> None:
    if t < state.last_time:
        raise OutOfOrderError(
            f"event at t={t!r} precedes last processed time {state.last_time!r}")


def _fire(state: ControllerState, t: float, inclusive: bool):
    """Fire every pending deadline before ``t`` (or at ``t`` if inclusive)."""
    cfg = state.config
    phase, deadline, last = state.phase, state.deadline, state.last_command
    commands = []
    while deadline is not None and (deadline <= t if inclusive else deadline < t):
        act = deadline + cfg.latency
        if phase is Phase.MONITORING:
            commands.append(GateCommand(act, Level.OFF))
            phase, deadline, last = Phase.BLANKED, act + cfg.tau_off, Level.OFF
        else:
            commands.append(GateCommand(act, Level.ON))
            phase, deadline, last = Phase.MONITORING, act + cfg.tau_d, Level.ON
    if commands:
        state = replace(state, phase=phase, deadline=deadline, last_command=last)
    return state, commands


def observe_photon(state: ControllerState, t: float):
    """Deliver one detection at time ``t``.

    Deadlines strictly earlier than ``t`` fire first; a photon and a deadline
    at the same instant resolve in favour of the photon.  Returns the new
    state and any commands produced on the way.
    """
    _check_order(state, t)
    state, commands = _fire(state, t, inclusive=False)
    if not state.config.enabled:
        return replace(state, last_time=t), commands
    if state.phase is Phase.MONITORING:
        state = replace(state, deadline=t + state.config.tau_d, last_time=t)
    else:
        state = replace(state, ignored=state.ignored + 1, last_time=t)
    return state, commands


def advance_to(state: ControllerState, t: float):
    """Process every deadline at or before ``t``."""
    _check_order(state, t)
    state, commands = _fire(state, t, inclusive=True)
    return replace(state, last_time=t), commands


def replay(config: FeedbackConfig, photon_times: Iterable[float],
           horizon: float) -> list[GateCommand]:
    """Gate-command schedule produced by a recorded photon stream.

    Photons after ``horizon`` are not delivered.  Commands decided at or
    before the horizon are reported even when they actuate after it.
    """
    times = np.asarray(list(photon_times), dtype=float)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ValueError("photon_times must be sorted in non-decreasing order")
    state = controller_init(config, 0.0)
    schedule: list[GateCommand] = []
    for t in times[times <= horizon].tolist():
        state, cmds = observe_photon(state, t)
        schedule.extend(cmds)
    state, cmds = advance_to(state, max(horizon, state.last_time))
    schedule.extend(cmds)
    return schedule


class FeedbackController:
    """Mutable controller handle driven by a simulation loop.

    ``config=None`` or a disabled config gives a gate that is always on.
    """

    def __init__(self, config: FeedbackConfig | None = None, t0: float = 0.0):
        if config is None:
            config = FeedbackConfig(tau_d=1.0, tau_off=1.0, latency=0.0, enabled=False)
        self.config = config
        self.state = controller_init(config, t0)

    @property
    def next_deadline(self) -> float:
        d = self.state.deadline
        return math.inf if d is None else d

    @property
    def ignored(self) -> int:
        return self.state.ignored

    def observe_photon(self, t: float) -> list[GateCommand]:
        self.state, commands = observe_photon(self.state, t)
        return commands

    def advance_to(self, t: float) -> list[GateCommand]:
        self.state, commands = advance_to(self.state, t)
        return commands

    def observe_batch(self, times: np.ndarray) -> int:
        """Deliver sorted photons up to the first one preceded by a deadline.

        Returns how many photons were consumed.  The result is identical to
        calling :meth:`observe_photon` on each consumed photon in turn;
        consumption stops before a photon that would first require a
        deadline to fire.
        """
        n = len(times)
        if n == 0:
            return 0
        st = self.state
        _check_order(st, float(times[0]))
        if st.deadline is None:
            self.state = replace(st, last_time=float(times[-1]))
            return n
        if st.phase is Phase.MONITORING:
            bounds = np.empty(n)
            bounds[0] = st.deadline
            bounds[1:] = times[:-1] + st.config.tau_d
            late = times > bounds
            k = int(np.argmax(late)) if late.any() else n
            if k:
                last = float(times[k - 1])
                self.state = replace(st, deadline=last + st.config.tau_d, last_time=last)
            return k
        k = int(np.searchsorted(times, st.deadline, side="right"))
        if k:
            self.state = replace(st, ignored=st.ignored + k, last_time=float(times[k - 1]))
        return k
