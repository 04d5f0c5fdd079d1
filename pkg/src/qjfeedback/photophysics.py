"""Three-level emitter (S0, S1, T1) with a gated laser and triplet bleaching.

The molecule cycles S0 -> S1 -> S0 while the excitation gate is on, shelves
into the long-lived triplet T1 by intersystem crossing, and bleaches with a
constant hazard only while it sits in T1 *and* the laser is on.

Three trajectory samplers share one contract:

``simulate_trajectory_exact``
    Exact sampling of the continuous-time Markov chain.  Silent singlet
    cycles between two observable events (detected photon, ISC) are drawn in
    closed form: the number of S1 visits is geometric and the elapsed time is
    a sum of two gamma variates.  When the gate changes mid-cycle the S0/S1
    sub-state is drawn from its exact conditional distribution.
``simulate_trajectory_exact(..., stepwise=True)``
    Literal transition-by-transition Gillespie loop.  Slow; used as the
    reference for the batched sampler.
``simulate_trajectory_aggregated``
    Quasi-steady-state macro model: while cycling, detections and ISC events
    are independent Poisson processes.

All three interleave the controller's deterministic deadlines exactly and
resample waiting times after each one (memorylessness).
"""
from __future__ import annotations

import enum
import json
import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .controller import FeedbackConfig, FeedbackController, Level

__all__ = [
    "EmitterState", "PhotophysicsParams", "GateEvent", "Trajectory", "TrialResult",
    "active_channels", "steady_state_occupancy", "detected_photon_rate",
    "simulate_trajectory_exact", "simulate_trajectory_aggregated",
    "AggregationError", "StalledSimulationError", "PhotophysicsWarning",
]


class EmitterState(enum.Enum):
    S0 = "S0"
    S1 = "S1"
    T1 = "T1"
    BLEACHED = "BLEACHED"


class PhotophysicsWarning(UserWarning):
    pass


class StalledSimulationError(RuntimeError):
    """Nothing can ever happen again and no horizon bounds the run."""


class AggregationError(ValueError):
    """Parameters are outside the regime where the aggregated path is valid."""


@dataclass(frozen=True)
class PhotophysicsParams:
    """Rate constants (1/s), triplet lifetime (s) and detection efficiency.

    ``dark_rate`` injects Poisson false detections that reach the controller.
    """

    k_exc: float
    k_fl: float
    k_isc: float
    tau_t: float
    eta: float
    k_bleach: float
    dark_rate: float = 0.0

    def __post_init__(self):
        problems = []
        for name in ("k_exc", "k_fl", "k_isc", "k_bleach", "dark_rate"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                problems.append(f"{name} must be a finite rate >= 0 (got {v!r})")
        if not (self.tau_t > 0 and math.isfinite(self.tau_t)):
            problems.append(f"tau_t must be > 0 (got {self.tau_t!r})")
        if not 0 <= self.eta <= 1:
            problems.append(f"eta must lie in [0, 1] (got {self.eta!r})")
        if problems:
            raise ValueError("; ".join(problems))
        if self.k_fl <= 1.0 / self.tau_t:
            warnings.warn(
                f"k_fl={self.k_fl:g}/s is not faster than triplet relaxation "
                f"1/tau_t={1.0 / self.tau_t:g}/s", PhotophysicsWarning, stacklevel=3)

    def replace(self, **changes) -> "PhotophysicsParams":
        return replace(self, **changes)


class GateEvent(NamedTuple):
    t: float
    level: Level


@dataclass
class Trajectory:
    """Event record of one molecule up to bleaching or the horizon.

    ``photon_times`` is ``None`` when the run was made with
    ``record_photons=False``; ``n_photons`` is always filled.  Detections
    include dark counts (``n_dark`` of them).  ``triplet_illumination``
    holds the illuminated dwell of each triplet visit in order.
    ``state_time`` (stepwise runs only) maps state names to total dwell and
    ``n_transitions`` counts the stochastic transitions taken.
    """

    photon_times: np.ndarray | None
    n_photons: int
    gate_events: list[GateEvent]
    bleach_time: float | None
    end_time: float
    illuminated_triplet_time: float
    triplet_illumination: np.ndarray
    n_dark: int = 0
    state_time: dict | None = None
    n_transitions: int = 0

    @property
    def bleached(self) -> bool:
        return self.bleach_time is not None

    @property
    def n_triplet_visits(self) -> int:
        return len(self.triplet_illumination)

    def off_intervals(self) -> list[tuple[float, float]]:
        out = []
        start = None
        for ev in self.gate_events:
            if ev.level is Level.OFF:
                start = ev.t
            elif start is not None:
                out.append((start, ev.t))
                start = None
        if start is not None:
            out.append((start, self.end_time))
        return out

    def illuminated_time(self) -> float:
        """Total time with the gate on between t=0 and the end of the run."""
        off = sum(min(b, self.end_time) - a for a, b in self.off_intervals() if a < self.end_time)
        return self.end_time - off

    def events(self) -> Iterator[tuple[float, str]]:
        """All events as ``(t, kind)`` in time order (stable on ties)."""
        items = []
        if self.photon_times is not None:
            items.extend((float(t), 0, "photon") for t in self.photon_times)
        for ev in self.gate_events:
            items.append((ev.t, 1, "gate_on" if ev.level is Level.ON else "gate_off"))
        if self.bleach_time is not None:
            items.append((self.bleach_time, 2, "bleach"))
        items.sort(key=lambda x: (x[0], x[1]))
        for t, _, kind in items:
            yield t, kind

    def to_jsonl(self) -> Iterator[str]:
        for t, kind in self.events():
            yield json.dumps({"t": t, "kind": kind})


@dataclass(frozen=True)
class TrialResult:
    n_photons: int
    survival_time: float
    bleached: bool
    tau_t_used: float
    illuminated_triplet_time: float
    molecule_index: int = 0
    arm: str = "with"
    illuminated_time: float = float("nan")

    @classmethod
    def from_trajectory(cls, traj: Trajectory, tau_t: float, **extra) -> "TrialResult":
        return cls(
            n_photons=traj.n_photons,
            survival_time=traj.end_time,
            bleached=traj.bleached,
            tau_t_used=tau_t,
            illuminated_triplet_time=traj.illuminated_triplet_time,
            illuminated_time=traj.illuminated_time(),
            **extra,
        )


def active_channels(state: EmitterState, gate: Level | bool,
                    params: PhotophysicsParams) -> list[tuple[str, float]]:
    """Transitions enabled in ``state`` with the gate at ``gate``."""
    on = gate is Level.ON or gate is True
    if state is EmitterState.BLEACHED:
        raise ValueError("BLEACHED is absorbing: no transitions leave it")
    if state is EmitterState.S0:
        return [("excite", params.k_exc)] if on else []
    if state is EmitterState.S1:
        return [("decay", params.k_fl), ("isc", params.k_isc)]
    channels = [("relax", 1.0 / params.tau_t)]
    if on:
        channels.append(("bleach", params.k_bleach))
    return channels


def steady_state_occupancy(params: PhotophysicsParams) -> tuple[float, float, float]:
    """Stationary (p0, p1, pT) with the gate permanently on, ignoring bleaching."""
    if params.k_exc == 0:
        return (1.0, 0.0, 0.0)
    r0 = (params.k_fl + params.k_isc) / params.k_exc
    rt = params.k_isc * params.tau_t
    p1 = 1.0 / (1.0 + r0 + rt)
    return (r0 * p1, p1, rt * p1)


def detected_photon_rate(params: PhotophysicsParams) -> float:
    return params.eta * params.k_fl * steady_state_occupancy(params)[1]


def cycling_occupancy(params: PhotophysicsParams) -> float:
    """S1 population of the S0/S1 cycle alone (triplet excluded)."""
    if params.k_exc == 0:
        return 0.0
    return params.k_exc / (params.k_exc + params.k_fl)


class _Draws:
    """Buffered scalar draws from a numpy Generator."""

    def __init__(self, rng: np.random.Generator, size: int = 2048):
        self.rng = rng
        self.size = size
        self._exp: list[float] = []
        self._uni: list[float] = []

    def exp(self) -> float:
        if not self._exp:
            self._exp = self.rng.standard_exponential(self.size).tolist()
            self._exp.reverse()
        return self._exp.pop()

    def uniform(self) -> float:
        if not self._uni:
            self._uni = self.rng.random(self.size).tolist()
            self._uni.reverse()
        return self._uni.pop()


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _as_controller(controller) -> FeedbackController:
    if isinstance(controller, FeedbackController):
        return controller
    if controller is None or isinstance(controller, FeedbackConfig):
        return FeedbackController(controller)
    raise TypeError(f"unsupported controller {controller!r}")


_EMPTY = np.empty(0)


class _AggregatedCycling:
    """Cycling macro-state: independent Poisson detections and ISC events."""

    def __init__(self, params: PhotophysicsParams, rng: np.random.Generator, draws: _Draws):
        p1 = cycling_occupancy(params)
        self.photon_rate = params.eta * params.k_fl * p1
        self.isc_rate = params.k_isc * p1
        self.rng = rng
        self.draws = draws

    def renew(self, t: float, sub=None) -> None:
        pass

    def interrupt(self, t: float) -> None:
        pass

    def run_off(self, t: float, t_stop: float):
        return None

    def run_on(self, t: float, t_stop: float):
        t_isc = t + self.draws.exp() / self.isc_rate if self.isc_rate > 0 else math.inf
        end = min(t_isc, t_stop)
        if self.photon_rate == 0:
            photons = _EMPTY
        else:
            chunks = []
            pos = t
            rate = self.photon_rate
            while True:
                mean = rate * (end - pos)
                m = int(mean + 5.0 * math.sqrt(mean) + 16)
                cum = pos + np.cumsum(self.rng.standard_exponential(m) / rate)
                if cum[-1] >= end:
                    chunks.append(cum[: np.searchsorted(cum, end, side="left")])
                    break
                chunks.append(cum)
                pos = float(cum[-1])
            photons = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
        return photons, (t_isc if t_isc < t_stop else None)


class _ExactCycling:
    """Exact S0/S1 cycling with silent cycles drawn in closed form.

    Between two observable events the number of S1 visits is geometric and
    the elapsed time is Gamma(K, k_exc) + Gamma(K, k_fl + k_isc).  ``sub``
    is the S0/S1 sub-state at ``since``; when an interval ends without an
    observable event the sub-state is redrawn from its conditional law.
    """

    def __init__(self, params: PhotophysicsParams, rng: np.random.Generator, draws: _Draws):
        self.rng = rng
        self.draws = draws
        a = params.k_exc
        b = params.k_fl + params.k_isc
        det_rate = params.eta * params.k_fl
        self.a, self.b = a, b
        self.p_photon = det_rate / b if b > 0 else 0.0
        self.p_isc = params.k_isc / b if b > 0 else 0.0
        self.q = self.p_photon + self.p_isc
        self.isc_share = params.k_isc / (det_rate + params.k_isc) if self.q > 0 else 0.0
        # sub-generator of the S0/S1 chain killed at observable events
        self.Q = np.array([[-a, a], [(1.0 - params.eta) * params.k_fl, -b]])
        self._spectral()
        self.sub = EmitterState.S0
        self.since = 0.0
        self._photons = _EMPTY
        self._silent_at = None
        self._s1_exit = None
        self._base = (0.0, EmitterState.S0)

    def _spectral(self):
        Q = self.Q
        tr = Q[0, 0] + Q[1, 1]
        det = Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
        disc = (Q[0, 0] - Q[1, 1]) ** 2 + 4.0 * Q[0, 1] * Q[1, 0]
        lam2 = 0.5 * (tr - math.sqrt(disc))
        if disc <= 0 or lam2 == 0:
            self._proj = None
            return
        lam1 = det / lam2  # avoids cancellation in (tr + sqrt(disc)) / 2
        eye = np.eye(2)
        self._lam = (lam1, lam2)
        self._proj = ((Q - lam2 * eye) / (lam1 - lam2), (Q - lam1 * eye) / (lam2 - lam1))

    def conditional_s1(self, start: EmitterState, u: float) -> float:
        """P(S1 at elapsed u | start sub-state, no observable event so far)."""
        i = 0 if start is EmitterState.S0 else 1
        if u <= 0:
            return float(i)
        if self._proj is None:
            from scipy.linalg import expm
            w = expm(self.Q * u)[i]
        else:
            lam1, lam2 = self._lam
            p1, p2 = self._proj
            w = p1[i] + math.exp((lam2 - lam1) * u) * p2[i]
        tot = w[0] + w[1]
        return float(w[1] / tot) if tot > 0 else float(i)

    def renew(self, t: float, sub: EmitterState | None = None) -> None:
        self.since = t
        if sub is not None:
            self.sub = sub
        self._base = (t, self.sub)
        self._photons = _EMPTY
        self._silent_at = None
        self._s1_exit = None

    def interrupt(self, t: float) -> None:
        if self._s1_exit is not None and t < self._s1_exit:
            # the drawn S1 exit lies beyond t: still excited, not merely unobserved
            self.sub = EmitterState.S1
            self.renew(t)
            return
        base_t, base_sub = self._base
        if self._silent_at is not None and self._silent_at <= t:
            base_t, base_sub = self._silent_at, EmitterState.S0
        k = int(np.searchsorted(self._photons, t, side="right"))
        if k and self._photons[k - 1] >= base_t:
            base_t, base_sub = float(self._photons[k - 1]), EmitterState.S0
        p = self.conditional_s1(base_sub, t - base_t)
        self.sub = EmitterState.S1 if self.draws.uniform() < p else EmitterState.S0
        self.renew(t)

    def _first_exit(self, t: float):
        """Fate of one S1 visit: (time, 'photon' | 'isc' | 'silent')."""
        te = t + self.draws.exp() / self.b
        u = self.draws.uniform()
        if u < self.p_photon:
            return te, "photon"
        if u < self.q:
            return te, "isc"
        return te, "silent"

    def run_off(self, t: float, t_stop: float):
        if self.sub is not EmitterState.S1 or self.b == 0:
            return None
        te, kind = self._first_exit(t)
        if te >= t_stop:
            return None
        self.renew(te, EmitterState.S0 if kind != "isc" else EmitterState.S1)
        return te, kind

    def run_on(self, t: float, t_stop: float):
        self.renew(t)
        chunks = []
        pos = t
        if self.sub is EmitterState.S1:
            if self.b == 0:
                return _EMPTY, None
            te, kind = self._first_exit(pos)
            self._s1_exit = te
            if te >= t_stop:
                return _EMPTY, None
            if kind == "isc":
                return _EMPTY, te
            if kind == "photon":
                chunks.append(np.array([te]))
            else:
                self._silent_at = te
            pos = te
        if self.a == 0 or self.q == 0:
            photons = chunks[0] if chunks else _EMPTY
            self._photons = photons
            return photons, None
        # mean time per observable event and events expected before ISC
        cycle = 1.0 / self.a + 1.0 / self.b
        per_event = cycle / self.q
        to_isc = 1.0 / self.isc_share if self.isc_share > 0 else math.inf
        t_isc = None
        while True:
            expect = min((t_stop - pos) / per_event, to_isc)
            m = int(min(max(1.2 * expect + 16, 16), 1 << 16))
            K = self.rng.geometric(self.q, m)
            dt = self.rng.gamma(K, 1.0 / self.a) + self.rng.gamma(K, 1.0 / self.b)
            cum = pos + np.cumsum(dt)
            n_time = int(np.searchsorted(cum, t_stop, side="left"))
            isc = self.rng.random(m) < self.isc_share
            first_isc = int(np.argmax(isc)) if isc.any() else m
            n = min(n_time, first_isc)
            chunks.append(cum[:n])
            if first_isc < n_time:
                t_isc = float(cum[first_isc])
                break
            if n_time < m:
                break
            pos = float(cum[-1])
        photons = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
        self._photons = photons
        return photons, t_isc


_CYCLING, _TRIPLET = "cycling", "triplet"


def _validate_run(params, horizon):
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0 (got {horizon!r})")
    if math.isinf(horizon) and (params.k_isc == 0 or params.k_exc == 0):
        raise StalledSimulationError(
            "without a horizon the run needs k_exc > 0 and k_isc > 0 to ever end")


def _simulate(params, controller, rng, horizon, cycling_cls, record_photons,
              max_triplet_visits) -> Trajectory:
    _validate_run(params, horizon)
    rng = _as_rng(rng)
    ctrl = _as_controller(controller)
    draws = _Draws(rng)
    cyc = cycling_cls(params, rng, draws)

    t = 0.0
    gate_on = True
    state = _CYCLING
    gate_events = [GateEvent(0.0, Level.ON)]
    pending: deque = deque()
    photon_chunks: list[np.ndarray] = []
    n_photons = 0
    n_dark = 0
    visits: list[float] = []
    current = 0.0
    bleach_time = None
    relax_rate = 1.0 / params.tau_t
    dark_next = draws.exp() / params.dark_rate if params.dark_rate > 0 else math.inf
    cyc.renew(0.0, EmitterState.S0)

    def record(times):
        nonlocal n_photons
        if len(times):
            n_photons += len(times)
            if record_photons:
                photon_chunks.append(np.asarray(times, dtype=float))

    while True:
        t_act = pending[0].actuate_at if pending else math.inf
        t_fixed = min(t_act, dark_next, horizon)
        t_ctrl = ctrl.next_deadline

        if state is _CYCLING and gate_on:
            photons, t_isc = cyc.run_on(t, t_fixed)
            t_end = t_fixed if t_isc is None else t_isc
            k = ctrl.observe_batch(photons)
            d = ctrl.next_deadline
            if k < len(photons) or d < t_end:
                record(photons[:k])
                t = d
                cyc.interrupt(t)
            else:
                record(photons)
                t = t_end
                if t_isc is not None:
                    state, current = _TRIPLET, 0.0
                    continue
                cyc.interrupt(t)
        elif state is _CYCLING:
            t_det = min(t_fixed, t_ctrl)
            ev = cyc.run_off(t, t_det)
            if ev is not None:
                t, kind = ev
                if kind == "photon":
                    record([t])
                    pending.extend(ctrl.observe_photon(t))
                elif kind == "isc":
                    state, current = _TRIPLET, 0.0
                continue
            if math.isinf(t_det):
                raise StalledSimulationError("gate is off with no pending command or horizon")
            t = t_det
        else:
            t_det = min(t_fixed, t_ctrl)
            total = relax_rate + (params.k_bleach if gate_on else 0.0)
            te = t + draws.exp() / total
            if te < t_det:
                if gate_on:
                    current += te - t
                t = te
                if gate_on and draws.uniform() * total >= relax_rate:
                    bleach_time = t
                    visits.append(current)
                    break
                visits.append(current)
                state = _CYCLING
                cyc.renew(t, EmitterState.S0)
                if max_triplet_visits is not None and len(visits) >= max_triplet_visits:
                    break
                continue
            if gate_on:
                current += t_det - t
            t = t_det

        # deterministic events at t
        if t >= horizon:
            t = horizon
            if state is _TRIPLET:
                visits.append(current)
            break
        if dark_next <= t:
            record([t])
            n_dark += 1
            pending.extend(ctrl.observe_photon(t))
            dark_next = t + draws.exp() / params.dark_rate
        pending.extend(ctrl.advance_to(t))
        while pending and pending[0].actuate_at <= t:
            cmd = pending.popleft()
            gate_on = cmd.level is Level.ON
            gate_events.append(GateEvent(cmd.actuate_at, cmd.level))
            if state is _CYCLING and gate_on:
                cyc.renew(t)

    end_time = t
    illum = np.asarray(visits, dtype=float)
    photon_times = None
    if record_photons:
        photon_times = np.concatenate(photon_chunks) if photon_chunks else np.empty(0)
    return Trajectory(
        photon_times=photon_times,
        n_photons=n_photons,
        gate_events=gate_events,
        bleach_time=bleach_time,
        end_time=end_time,
        illuminated_triplet_time=float(illum.sum()),
        triplet_illumination=illum,
        n_dark=n_dark,
    )


def _simulate_stepwise(params, controller, rng, horizon, record_photons,
                       max_triplet_visits) -> Trajectory:
    """Literal Gillespie loop over every single transition."""
    _validate_run(params, horizon)
    rng = _as_rng(rng)
    ctrl = _as_controller(controller)
    draws = _Draws(rng)
    S0, S1, T1 = EmitterState.S0, EmitterState.S1, EmitterState.T1

    t = 0.0
    gate = Level.ON
    state = S0
    gate_events = [GateEvent(0.0, Level.ON)]
    pending: deque = deque()
    photons: list[float] = []
    n_photons = n_dark = 0
    visits: list[float] = []
    current = 0.0
    bleach_time = None
    occupancy = {"S0": 0.0, "S1": 0.0, "T1": 0.0}
    n_steps = 0
    dark_next = draws.exp() / params.dark_rate if params.dark_rate > 0 else math.inf

    while True:
        t_act = pending[0].actuate_at if pending else math.inf
        t_det = min(t_act, dark_next, horizon, ctrl.next_deadline)
        channels = active_channels(state, gate, params)
        total = sum(r for _, r in channels)
        if total == 0 and math.isinf(t_det):
            raise StalledSimulationError(f"no active channel in {state.name} and nothing scheduled")
        te = t + draws.exp() / total if total > 0 else math.inf
        if te < t_det:
            occupancy[state.name] += te - t
            if state is T1 and gate is Level.ON:
                current += te - t
            t = te
            n_steps += 1
            u = draws.uniform() * total
            for label, rate in channels:
                if u < rate:
                    break
                u -= rate
            if label == "excite":
                state = S1
            elif label == "decay":
                state = S0
                if draws.uniform() < params.eta:
                    n_photons += 1
                    if record_photons:
                        photons.append(t)
                    pending.extend(ctrl.observe_photon(t))
            elif label == "isc":
                state, current = T1, 0.0
            elif label == "relax":
                state = S0
                visits.append(current)
                if max_triplet_visits is not None and len(visits) >= max_triplet_visits:
                    break
            else:
                bleach_time = t
                visits.append(current)
                break
            continue

        occupancy[state.name] += t_det - t
        if state is T1 and gate is Level.ON:
            current += t_det - t
        t = t_det
        if t >= horizon:
            t = horizon
            if state is T1:
                visits.append(current)
            break
        if dark_next <= t:
            n_photons += 1
            n_dark += 1
            if record_photons:
                photons.append(t)
            pending.extend(ctrl.observe_photon(t))
            dark_next = t + draws.exp() / params.dark_rate
        pending.extend(ctrl.advance_to(t))
        while pending and pending[0].actuate_at <= t:
            cmd = pending.popleft()
            gate = cmd.level
            gate_events.append(GateEvent(cmd.actuate_at, cmd.level))

    illum = np.asarray(visits, dtype=float)
    return Trajectory(
        photon_times=np.asarray(photons, dtype=float) if record_photons else None,
        n_photons=n_photons,
        gate_events=gate_events,
        bleach_time=bleach_time,
        end_time=t,
        illuminated_triplet_time=float(illum.sum()),
        triplet_illumination=illum,
        n_dark=n_dark,
        state_time=occupancy,
        n_transitions=n_steps,
    )


def simulate_trajectory_exact(params: PhotophysicsParams, controller=None, rng=None,
                              horizon: float = math.inf, *, stepwise: bool = False,
                              record_photons: bool = True,
                              max_triplet_visits: int | None = None) -> Trajectory:
    """Sample one molecule's trajectory from the full three-level chain.

    Parameters
    ----------
    params : PhotophysicsParams
    controller : FeedbackConfig, FeedbackController or None
        Gate policy.  ``None`` keeps the laser on permanently.
    rng : numpy Generator or seed
    horizon : float
        Simulated time limit in seconds (``inf`` runs until bleaching).
    stepwise : bool
        Simulate every transition literally instead of drawing silent
        cycles in closed form.  Same distribution, far slower.
    record_photons : bool
        Keep detection timestamps.  Counting only is much lighter.
    max_triplet_visits : int, optional
        Stop after this many completed triplet visits.
    """
    if stepwise:
        return _simulate_stepwise(params, controller, rng, horizon, record_photons,
                                  max_triplet_visits)
    return _simulate(params, controller, rng, horizon, _ExactCycling, record_photons,
                     max_triplet_visits)


def aggregation_valid(params: PhotophysicsParams) -> bool:
    return params.k_isc < 0.01 * (params.k_exc + params.k_fl)


def simulate_trajectory_aggregated(params: PhotophysicsParams, controller=None, rng=None,
                                   horizon: float = math.inf, *, record_photons: bool = True,
                                   max_triplet_visits: int | None = None) -> Trajectory:
    """Fast path: singlet cycling replaced by its quasi-steady state.

    Requires ``k_isc < 0.01 * (k_exc + k_fl)``; otherwise raises
    :class:`AggregationError` and the exact path should be used.
    """
    if not aggregation_valid(params):
        raise AggregationError(
            f"k_isc={params.k_isc:g}/s is not small against k_exc + k_fl="
            f"{params.k_exc + params.k_fl:g}/s; use simulate_trajectory_exact")
    return _simulate(params, controller, rng, horizon, _AggregatedCycling, record_photons,
                     max_triplet_visits)
