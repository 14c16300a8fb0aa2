"""Simulation state for one console session: clock, vessel, queues and journals.

All mutation happens on a single logical timeline. Time only moves forward
through :meth:`World.advance_to`, which executes due burns and fires due
alarms in event-time order.
"""

from __future__ import annotations

import json
import math
import random
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any

from . import clock
from .orbit import KeplerOrbit, ManeuverNode, apply_node, apsis_times, state_at
from .vessel import (
    ExperimentResult,
    InsufficientPropellant,
    Vessel,
    burn_consume,
    propellant_mass,
)


class Deadlock(RuntimeError):
    """Raised when waiting for a notification that can never arrive."""


@dataclass(frozen=True)
class SimConfig:
    latency: float = 5.0
    noise_sigma: float = 0.0
    validation: bool = True
    # Earliest a burn is placed after "now" when nothing is queued.
    min_lead: float = 30.0
    # A node this many seconds overdue can still be flown, as a burn centred on it would still be running.
    late_tolerance: float = 60.0
    ec_drain: float = 0.2
    light_time: float = 0.0


@dataclass(frozen=True)
class Alarm:
    id: str
    name: str
    description: str
    time: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "time": clock.iso_auto(self.time),
        }


@dataclass
class Task:
    ordinal: int
    name: str
    description: str = ""
    status: str = "pending"


TASK_STATUSES = ("pending", "in_progress", "done")


@dataclass(frozen=True)
class SentMessage:
    timestamp: float
    body: str
    delivered_at: float


@dataclass(frozen=True)
class BurnRecord:
    ut: float
    delta_v: float
    propellant_used: float


@dataclass(frozen=True)
class Notification:
    kind: str  # "alarm" or "autopilot"
    event_time: float
    alarm: Alarm | None = None


def to_json(data: Any) -> str:
    return json.dumps(data, indent=4)


def orbit_document(orbit: KeplerOrbit, t: float) -> dict[str, Any]:
    """The ``get_orbit`` field set for ``orbit`` as seen at ``t``."""
    to_apo, to_peri = apsis_times(orbit, t)
    sample = state_at(orbit, t)
    return {
        "body": orbit.body.name,
        "apoapsis_altitude": orbit.apoapsis_altitude,
        "periapsis_altitude": orbit.periapsis_altitude,
        "current_altitude": sample.altitude,
        "period": orbit.period,
        "time_to_apoapsis": to_apo,
        "time_to_periapsis": to_peri,
        "inclination": math.degrees(orbit.i),
        "longitude_of_ascending_node": math.degrees(orbit.lan),
        "argument_of_periapsis": math.degrees(orbit.argp),
        "epoch": t,
        "orbital_speed": sample.speed,
        "time_to_soi_change": None,
        "next_orbit": None,
    }


def node_document(node: ManeuverNode, now: float) -> dict[str, Any]:
    return {
        "prograde": node.prograde,
        "normal": node.normal,
        "radial": node.radial,
        "delta_v": node.delta_v,
        "remaining_delta_v": node.remaining_delta_v,
        "ut": clock.iso_micro(node.ut),
        "time_to": node.ut - now,
        "orbit": orbit_document(node.predicted_orbit, node.ut),
    }


@dataclass
class World:
    vessel: Vessel
    ut: float
    mission_start: float
    brief: str
    config: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    nodes: list[ManeuverNode] = field(default_factory=list)
    armed: list[ManeuverNode] = field(default_factory=list)
    alarms: list[Alarm] = field(default_factory=list)
    fired: set[str] = field(default_factory=set)
    pending: deque[Notification] = field(default_factory=deque)
    experiment_log: list[ExperimentResult] = field(default_factory=list)
    messages: list[SentMessage] = field(default_factory=list)
    tasks: dict[int, Task] = field(default_factory=dict)
    burns: list[BurnRecord] = field(default_factory=list)
    lowest_periapsis: float = math.inf

    def __post_init__(self) -> None:
        self.rng = random.Random(self.seed)
        self.initial_propellant = propellant_mass(self.vessel)
        self.lowest_periapsis = self.vessel.orbit.periapsis_altitude

    @property
    def orbit(self) -> KeplerOrbit:
        return self.vessel.orbit

    @property
    def autopilot_on(self) -> bool:
        return bool(self.armed)

    @property
    def propellant_used(self) -> float:
        return self.initial_propellant - propellant_mass(self.vessel)

    def new_id(self) -> str:
        return uuid.UUID(int=self.rng.getrandbits(128), version=4).hex

    # -- event processing -------------------------------------------------

    def next_event_time(self) -> float | None:
        times = [n.ut for n in self.armed]
        times += [a.time for a in self.alarms if a.id not in self.fired]
        return min(times) if times else None

    def advance(self, dt: float) -> None:
        self.advance_to(self.ut + dt)

    def advance_to(self, t: float) -> None:
        """Move the clock to ``t``, processing every event due on the way."""
        while True:
            event = self.next_event_time()
            if event is None or event > t:
                break
            self._tick(max(event, self.ut))
            self._burn_due()
            self._fire_due_alarms()
        self._tick(max(t, self.ut))

    def _tick(self, t: float) -> None:
        dt = t - self.ut
        if dt > 0 and self.config.ec_drain > 0:
            tank = self.vessel.tank("ElectricCharge")
            self.vessel = self.vessel.with_tank(tank.name, max(tank.amount - self.config.ec_drain * dt, 0.0))
        self.ut = t

    def _burn_due(self) -> None:
        for node in sorted(self.armed, key=lambda n: n.ut):
            if node.ut > self.ut:
                break
            self._execute_burn(node)
            self.armed.remove(node)
            self.nodes.remove(node)
            if not self.armed:
                self.pending.append(Notification("autopilot", node.ut))

    def _execute_burn(self, node: ManeuverNode) -> None:
        scale = 1.0
        if self.config.noise_sigma > 0:
            scale = max(0.0, 1.0 + self.rng.gauss(0.0, self.config.noise_sigma))
        orbit = apply_node(self.vessel.orbit, node, scale)
        body = orbit.body
        if self.config.validation and orbit.periapsis_altitude < body.safe_altitude:
            # The autopilot refuses to overshoot below the validated plan.
            scale, orbit = 1.0, node.predicted_orbit
        before = propellant_mass(self.vessel)
        try:
            vessel = burn_consume(self.vessel, node.delta_v * scale)
        except InsufficientPropellant:
            scale, orbit = 1.0, node.predicted_orbit
            vessel = burn_consume(self.vessel, node.delta_v)
        self.vessel = replace(vessel, orbit=orbit)
        self.burns.append(BurnRecord(node.ut, node.delta_v * scale, before - propellant_mass(self.vessel)))
        self.lowest_periapsis = min(self.lowest_periapsis, orbit.periapsis_altitude)

    def _fire_due_alarms(self) -> None:
        due = sorted(
            (a for a in self.alarms if a.id not in self.fired and a.time <= self.ut),
            key=lambda a: a.time,
        )
        for alarm in due:
            self.fired.add(alarm.id)
            self.pending.append(Notification("alarm", alarm.time, alarm))

    # -- notifications ----------------------------------------------------

    def wait_for_notification(self) -> str:
        """Deliver the oldest notification, jumping the clock forward if needed."""
        while not self.pending:
            event = self.next_event_time()
            if event is None:
                raise Deadlock("no alarms or maneuvers are scheduled")
            self.advance_to(event)
        return self.render_notification(self.pending.popleft())

    def render_notification(self, note: Notification) -> str:
        when = max(note.event_time, self.ut)
        if note.kind == "alarm":
            return alarm_trigger_text(note.alarm, when)
        return f"{clock.iso_micro(when)} | Autopilot has completed execution of all nodes"


def alarm_trigger_text(alarm: Alarm, when: float) -> str:
    return f"{clock.spaced_micro(when)}::AlarmManager:: Alarm triggered:\n{to_json(alarm.to_dict())}"

