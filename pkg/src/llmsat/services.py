"""The spacecraft services reachable from the console.

Each public method implements one console command and returns a
:class:`Reply`. The console decides how to stamp and frame the text.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import clock
from .orbit import (
    ManeuverNode,
    OrbitError,
    apsis_times,
    plan_apoapsis_change,
    plan_inclination_change,
    plan_periapsis_change,
)
from .vessel import delta_v_capacity, run_temperature_scan, total_mass
from .world import (
    Alarm,
    SentMessage,
    Task,
    World,
    alarm_trigger_text,
    node_document,
    orbit_document,
    to_json,
)


@dataclass(frozen=True)
class Reply:
    text: str
    stamped: bool = False


def exception_text(kind: str, message: str) -> str:
    return f"EXCEPTION of type '{kind}' occurred with message: {message}"


def _number(value: float) -> str:
    """Render a threshold compactly: 50000.0 -> '50000'."""
    return str(int(value)) if float(value).is_integer() else repr(value)


class Service:
    def __init__(self, world: World):
        self.world = world


class SpacecraftManager(Service):
    def get_spacecraft_properties(self) -> Reply:
        v = self.world.vessel
        return Reply(
            to_json(
                {
                    "name": v.name,
                    "situation": v.situation,
                    "mass": total_mass(v),
                    "dry_mass": v.dry_mass,
                    "available_thrust": v.engine.thrust,
                    "specific_impulse": v.engine.isp,
                    "moment_of_inertia": list(v.moment_of_inertia),
                }
            )
        )

    def get_resources(self) -> Reply:
        return Reply(resource_table(self.world))

    def get_parts_tree(self) -> Reply:
        return Reply(to_json(self.world.vessel.parts.to_dict()))

    def get_ut(self) -> Reply:
        return Reply(clock.iso_micro(self.world.ut))

    def get_met(self) -> Reply:
        return Reply(clock.format_met(self.world.ut - self.world.mission_start))

    def read_mission_brief(self) -> Reply:
        return Reply(self.world.brief)


def resource_table(world: World) -> str:
    """Index/name/amount/max table with right-aligned columns."""
    tanks = world.vessel.tanks
    columns = {
        "name": [t.name for t in tanks],
        "amount": [f"{t.amount:.6f}" for t in tanks],
        "max": [f"{t.max:.6f}" for t in tanks],
    }
    index = [str(i) for i in range(len(tanks))]
    index_width = max(len(s) for s in index)
    widths = {k: max(len(k), *(len(s) for s in col)) for k, col in columns.items()}
    lines = [" " * index_width + "".join("  " + k.rjust(widths[k]) for k in columns)]
    for row, label in enumerate(index):
        cells = "".join("  " + columns[k][row].rjust(widths[k]) for k in columns)
        lines.append(label.ljust(index_width) + cells)
    return "\n".join(lines)


class OrbitPropagator(Service):
    def get_orbit(self) -> Reply:
        return Reply(to_json(orbit_document(self.world.orbit, self.world.ut)), stamped=True)


class AutopilotService(Service):
    def _plan(self, planner, target: float) -> Reply:
        world = self.world
        # Overdue nodes that were never flown no longer describe the future orbit.
        world.nodes = [n for n in world.nodes if n.ut >= world.ut or n in world.armed]
        if world.nodes:
            last = max(world.nodes, key=lambda n: n.ut)
            base, start = last.predicted_orbit, last.ut
        else:
            base, start = world.orbit, world.ut + world.config.min_lead
        try:
            node = planner(base, target, start)
        except OrbitError as exc:
            return Reply(f"Error: {exc}")
        world.nodes.append(node)
        world.nodes.sort(key=lambda n: n.ut)
        body = "The following nodes were generated:\n" + to_json(node_document(node, world.ut))
        return Reply(body, stamped=True)

    def operation_periapsis(self, new_periapsis: float) -> Reply:
        return self._plan(plan_periapsis_change, new_periapsis)

    def operation_apoapsis(self, new_apoapsis: float) -> Reply:
        return self._plan(plan_apoapsis_change, new_apoapsis)

    def operation_inclination(self, new_inclination: float) -> Reply:
        return self._plan(plan_inclination_change, new_inclination)

    def get_nodes(self) -> Reply:
        docs = [node_document(n, self.world.ut) for n in self.world.nodes]
        return Reply(to_json(docs), stamped=True)

    def remove_nodes(self) -> Reply:
        count = len(self.world.nodes)
        self.world.nodes.clear()
        self.world.armed.clear()
        return Reply(f"Removed {count} maneuver node(s).", stamped=True)

    def check_autopilot_status(self) -> Reply:
        state = "ON" if self.world.autopilot_on else "OFF"
        return Reply(f"Autopilot Status: {state}", stamped=True)

    def validate_plan(self, nodes: list[ManeuverNode]) -> str | None:
        """First reason the plan cannot be flown, or None."""
        world = self.world
        for node in nodes:
            if node.ut < world.ut - world.config.late_tolerance:
                return (
                    f"Planned maneuver node at {clock.spaced_micro(node.ut)} is in the past. "
                    "Cannot comply"
                )
            if not world.config.validation:
                continue
            orbit = node.predicted_orbit
            body = orbit.body
            if orbit.periapsis_altitude < body.safe_altitude:
                return (
                    f"Planned maneuver node at {clock.spaced_micro(node.ut)} falls below safe "
                    f"altitude threshold of {_number(body.safe_altitude)}m around {body.name}: "
                    f"{orbit.periapsis_altitude!r}m. Cannot comply"
                )
        required = sum(n.delta_v for n in nodes)
        available = delta_v_capacity(world.vessel)
        if required > available:
            return (
                f"Planned maneuvers require {required:.3f} m/s of delta-v but only "
                f"{available:.3f} m/s is available. Cannot comply"
            )
        return None

    def execute_maneuver_nodes(self) -> Reply:
        world = self.world
        nodes = list(world.nodes)
        if not nodes:
            return Reply("Executing 0 maneuver node(s).", stamped=True)
        problem = self.validate_plan(nodes)
        if problem is not None:
            return Reply(exception_text("ValueError", problem))
        world.armed = nodes
        return Reply(
            f"Executing {len(nodes)} maneuver node(s). "
            "Notification will be raised upon completion of all scheduled maneuvers.",
            stamped=True,
        )


class AlarmManager(Service):
    def _create(self, name: str, time: float, desc: str | None) -> Reply:
        world = self.world
        alarm = Alarm(world.new_id(), name, desc or "", time)
        world.alarms.append(alarm)
        text = "New alarm created:\n" + to_json(alarm.to_dict())
        if alarm.time <= world.ut:
            world.fired.add(alarm.id)
            text += alarm_trigger_text(alarm, world.ut)
        return Reply(text)

    def add_alarm(self, name: str, time: str, desc: str | None = None) -> Reply:
        try:
            when = clock.parse_alarm_time(time)
        except ValueError:
            return Reply(f"Invalid time format '{time}'. Must be YYYY-MM-DDTHH:MM:SS.")
        return self._create(name, when, desc)

    def _at_apsis(self, which: int, name: str, desc: str | None) -> Reply:
        world = self.world
        return self._create(name, world.ut + apsis_times(world.orbit, world.ut)[which], desc)

    def add_alarm_at_apoapsis(self, name: str, desc: str | None = None) -> Reply:
        return self._at_apsis(0, name, desc)

    def add_alarm_at_periapsis(self, name: str, desc: str | None = None) -> Reply:
        return self._at_apsis(1, name, desc)

    def get_alarms(self) -> Reply:
        return Reply(to_json([a.to_dict() for a in self.world.alarms]), stamped=True)


class ExperimentManager(Service):
    def get_experiments(self) -> Reply:
        docs = {name: vars(exp) for name, exp in self.world.vessel.experiments.items()}
        return Reply(to_json(docs))

    def run_experiment(self, name: str) -> Reply:
        world = self.world
        experiment = world.vessel.experiments.get(name)
        if experiment is None:
            return Reply(f"No experiment found with the name '{name}'.")
        if not experiment.available or experiment.inoperable:
            return Reply(f"Experiment '{name}' is not available.")
        result = run_temperature_scan(world.vessel, world.ut, world.experiment_log)
        doc = {
            "timestamp": clock.iso_micro(result.timestamp),
            "value": result.value,
            "altitude": result.altitude,
            "body": result.body,
        }
        return Reply(f"Running experiment {name}...\n{to_json(doc)}")


class CommunicationService(Service):
    def send_message(self, message: str) -> Reply:
        world = self.world
        world.messages.append(SentMessage(world.ut, message, world.ut + world.config.light_time))
        return Reply("Message sent")


class TaskManager(Service):
    def add_task(self, name: str, desc: str | None = None) -> Reply:
        tasks = self.world.tasks
        ordinal = len(tasks) + 1
        tasks[ordinal] = Task(ordinal, name, desc or "")
        return Reply(f"Task {ordinal}:'{name}' created")

    def read_tasks(self) -> Reply:
        return Reply(task_plan(self.world))

    def set_task_status(self, id: int, status: str) -> Reply:
        task = self.world.tasks.get(id)
        if task is None:
            return Reply(f"Error: no task with id {id}")
        task.status = status
        return Reply(f"Task {id}:'{task.name}' set to {status}")


def task_plan(world: World) -> str:
    if not world.tasks:
        return "{}"
    doc = {
        str(t.ordinal): {"name": t.name, "description": t.description, "status": t.status}
        for t in world.tasks.values()
    }
    return to_json(doc)


SERVICE_CLASSES = {
    cls.__name__: cls
    for cls in (
        AlarmManager,
        AutopilotService,
        CommunicationService,
        ExperimentManager,
        OrbitPropagator,
        SpacecraftManager,
        TaskManager,
    )
}
