"""Command shell in front of the spacecraft services.

Commands are declared once in :data:`REGISTRY`; usage lines, argument
parsing, help text and the dashboard listing are all derived from it.
"""

from __future__ import annotations

import argparse
import shlex
import textwrap
from dataclasses import dataclass, field
from itertools import groupby
from typing import Any, Callable

from . import clock
from .services import SERVICE_CLASSES, Reply, exception_text, resource_table, task_plan
from .world import TASK_STATUSES, World

BANNER = "SatelliteOS"
BUILTIN_GROUP = "Built-in Commands"
LISTING_HEADER = "Documented commands (use 'help -v' for verbose/'help <topic>' for details):"
LISTING_WIDTH = 100
MIN_NAME_COLUMN = 22
RULE = "=" * 66


class UsageError(Exception):
    """Carries the exact text shown to the operator."""


@dataclass(frozen=True)
class Arg:
    flag: str
    metavar: str
    help: str
    type: Callable[[str], Any] = str
    choices: tuple[str, ...] | None = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-")

    @property
    def label(self) -> str:
        return f"{self.flag} {self.metavar}" if self.flag.startswith("-") else self.metavar


@dataclass(frozen=True)
class CommandSpec:
    name: str
    service: str
    summary: str
    required: tuple[Arg, ...] = ()
    optional: tuple[Arg, ...] = ()
    stamped: bool = False
    listed: bool = True

    @property
    def usage(self) -> str:
        parts = [self.name]
        parts += [a.label for a in self.required]
        parts.append("[-h]")
        parts += [f"[{a.label}]" for a in self.optional]
        return " ".join(parts)


_NAME = Arg("-name", "NAME", "name of the alarm")
_DESC = Arg("-desc", "DESC", "free-text description")

REGISTRY: dict[str, CommandSpec] = {
    spec.name: spec
    for spec in (
        CommandSpec(
            "add_alarm",
            "AlarmManager",
            "Create a new alarm at a given universal time",
            required=(_NAME, Arg("-time", "TIME", "universal time as YYYY-MM-DDTHH:MM:SS")),
            optional=(_DESC,),
            listed=False,
        ),
        CommandSpec(
            "add_alarm_at_apoapsis",
            "AlarmManager",
            "Create a new alarm to trigger at apoapsis",
            required=(_NAME,),
            optional=(_DESC,),
        ),
        CommandSpec(
            "add_alarm_at_periapsis",
            "AlarmManager",
            "Create a new alarm to trigger at periapsis",
            required=(_NAME,),
            optional=(_DESC,),
        ),
        CommandSpec("get_alarms", "AlarmManager", "Get all alarms", stamped=True),
        CommandSpec(
            "check_autopilot_status",
            "AutopilotService",
            "Check the status of the autopilot.",
            stamped=True,
        ),
        CommandSpec(
            "execute_maneuver_nodes",
            "AutopilotService",
            "Execute all planned maneuver nodes",
            stamped=True,
        ),
        CommandSpec(
            "get_nodes",
            "AutopilotService",
            "Returns a list of all existing maneuver nodes, ordered by time from first to last.",
            stamped=True,
        ),
        CommandSpec(
            "operation_apoapsis",
            "AutopilotService",
            "Create a maneuver to set a new apoapsis",
            required=(Arg("--new_apoapsis", "NEW_APOAPSIS", "target apoapsis altitude in meters", float),),
            stamped=True,
        ),
        CommandSpec(
            "operation_inclination",
            "AutopilotService",
            "Create a maneuver to change inclination",
            required=(
                Arg("--new_inclination", "NEW_INCLINATION", "target inclination in degrees", float),
            ),
            stamped=True,
        ),
        CommandSpec(
            "operation_periapsis",
            "AutopilotService",
            "Create a maneuver to set a new periapsis",
            required=(Arg("--new_periapsis", "NEW_PERIAPSIS", "target periapsis altitude in meters", float),),
            stamped=True,
        ),
        CommandSpec("remove_nodes", "AutopilotService", "Remove all maneuver nodes", stamped=True),
        CommandSpec(
            "send_message",
            "CommunicationService",
            "Send a message to mission control",
            required=(Arg("-message", "MESSAGE", "text to transmit"),),
        ),
        CommandSpec(
            "get_experiments",
            "ExperimentManager",
            "Get a dictionary of all onboard scientific experiments",
        ),
        CommandSpec(
            "run_experiment",
            "ExperimentManager",
            "Run a given experiment to acquire data.",
            required=(Arg("-name", "NAME", "name of the experiment to run"),),
        ),
        CommandSpec("get_orbit", "OrbitPropagator", "The current orbit of the vessel.", stamped=True),
        CommandSpec("get_met", "SpacecraftManager", "Get the mission elapsed time"),
        CommandSpec("get_parts_tree", "SpacecraftManager", "Get a tree of all spacecraft parts."),
        CommandSpec("get_resources", "SpacecraftManager", ""),
        CommandSpec(
            "get_spacecraft_properties", "SpacecraftManager", "Get information about the spacecraft"
        ),
        CommandSpec("get_ut", "SpacecraftManager", "Get the current universal time"),
        CommandSpec("read_mission_brief", "SpacecraftManager", "Read the mission briefing"),
        CommandSpec(
            "add_task",
            "TaskManager",
            "Add a new task",
            required=(Arg("-name", "NAME", "short task name"),),
            optional=(Arg("-desc", "DESC", "task description"),),
        ),
        CommandSpec("read_tasks", "TaskManager", "Read existing tasks"),
        CommandSpec(
            "set_task_status",
            "TaskManager",
            "Set a task's status",
            required=(
                Arg("-id", "ID", "task number", int),
                Arg("-status", "STATUS", "one of " + ", ".join(TASK_STATUSES), choices=TASK_STATUSES),
            ),
        ),
        CommandSpec(
            "help",
            BUILTIN_GROUP,
            "List available commands or provide detailed help for a specific command",
            optional=(Arg("topic", "TOPIC", "command to describe"),),
        ),
    )
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise UsageError(message)


def _build_parser(spec: CommandSpec) -> _Parser:
    parser = _Parser(prog=spec.name, add_help=False, allow_abbrev=False)
    for arg in spec.required:
        parser.add_argument(arg.flag, dest=arg.dest, required=True, type=arg.type, choices=arg.choices)
    for arg in spec.optional:
        parser.add_argument(arg.flag, dest=arg.dest, type=arg.type, choices=arg.choices)
    parser.add_argument("-h", "--help", action="store_true", dest="_help")
    return parser


def usage_error(spec: CommandSpec, message: str) -> str:
    return f"Usage: {spec.usage}\n\nError: {message}"


def parse_line(line: str, registry: dict[str, CommandSpec] = REGISTRY) -> tuple[CommandSpec, dict[str, Any]]:
    """Split a console line into its command spec and parsed arguments."""
    try:
        tokens = shlex.split(line)
    except ValueError as exc:
        raise UsageError(f"Error: {exc}") from None
    if not tokens:
        raise UsageError("")
    name, rest = tokens[0], tokens[1:]
    spec = registry.get(name)
    if spec is None:
        raise UsageError(f"{name} is not a recognized command, alias, or macro")
    if spec.name == "help":
        topics = [t for t in rest if t != "-v"]
        return spec, {"topic": topics[0] if topics else None}
    if "-h" in rest or "--help" in rest:
        return spec, {"_help": True}
    try:
        namespace = _build_parser(spec).parse_args(rest)
    except UsageError as exc:
        raise UsageError(usage_error(spec, str(exc))) from None
    args = vars(namespace)
    args.pop("_help", None)
    return spec, args


def _format_rows(rows: list[tuple[str, str]], indent: int) -> list[str]:
    out = []
    for name, text in rows:
        if not text:
            out.append(name)
            continue
        wrapped = textwrap.wrap(text, LISTING_WIDTH - indent) or [""]
        out.append(name.ljust(indent) + wrapped[0])
        out += [" " * indent + more for more in wrapped[1:]]
    return out


def command_listing(registry: dict[str, CommandSpec] = REGISTRY) -> str:
    """Grouped one-line summaries of every listed command."""

    def group_key(spec: CommandSpec) -> tuple[bool, str]:
        return (spec.service == BUILTIN_GROUP, spec.service)

    listed = sorted((s for s in registry.values() if s.listed), key=lambda s: (group_key(s), s.name))
    blocks = [LISTING_HEADER]
    for (_, service), members in groupby(listed, key=group_key):
        members = list(members)
        column = max(MIN_NAME_COLUMN, max(len(m.name) for m in members) + 2)
        rows = _format_rows([(m.name, m.summary) for m in members], column)
        blocks.append("\n".join([service, RULE, *rows]))
    return "\n\n".join(blocks)


def command_help(spec: CommandSpec) -> str:
    """Usage line, summary and argument documentation for one command."""
    lines = [f"Usage: {spec.usage}"]
    if spec.summary:
        lines += ["", spec.summary]
    entries = [(a.label, a.help) for a in spec.required]
    optional = [(a.label, a.help) for a in spec.optional]
    optional.insert(0, ("-h, --help", "show this help message and exit"))
    width = max(len(label) for label, _ in entries + optional) + 2
    if entries:
        lines += ["", "required arguments:"] + [f"  {label.ljust(width)}{text}" for label, text in entries]
    lines += ["", "optional arguments:"] + [f"  {label.ljust(width)}{text}" for label, text in optional]
    return "\n".join(lines)


def help_text(topic: str | None = None, registry: dict[str, CommandSpec] = REGISTRY) -> str:
    if not topic:
        return command_listing(registry)
    spec = registry.get(topic)
    if spec is None:
        return f"No help on {topic}"
    return command_help(spec)


def stamp(now: float, body: str) -> str:
    return f"{clock.iso_micro(now)} | {body}"


def render_dashboard(world: World, registry: dict[str, CommandSpec] = REGISTRY) -> str:
    services = {name: cls(world) for name, cls in SERVICE_CLASSES.items()}
    props = services["SpacecraftManager"].get_spacecraft_properties().text
    sections = [
        BANNER,
        f"UT: {clock.iso_micro(world.ut)} | MET: {clock.format_met(world.ut - world.mission_start)}",
        "",
        world.brief,
        "",
        "Task Plan:",
        task_plan(world),
        "",
        "Spacecraft Properties:",
        props,
        "",
        "Resources:",
        resource_table(world),
        "",
        command_listing(registry),
        "",
        BANNER,
        ">",
    ]
    return "\n".join(sections)


@dataclass
class Console:
    """One command processor bound to one simulated world."""

    world: World
    registry: dict[str, CommandSpec] = field(default_factory=lambda: REGISTRY)

    def __post_init__(self) -> None:
        self.services = {name: cls(self.world) for name, cls in SERVICE_CLASSES.items()}

    def dashboard(self) -> str:
        return render_dashboard(self.world, self.registry)

    def execute(self, line: str) -> str:
        """Run one command line after the configured latency; returns the observation."""
        self.world.advance(self.world.config.latency)
        try:
            spec, args = parse_line(line, self.registry)
        except UsageError as exc:
            return str(exc)
        if args.pop("_help", False):
            return command_help(spec)
        if spec.name == "help":
            return help_text(args["topic"], self.registry)
        handler = getattr(self.services[spec.service], spec.name)
        try:
            reply: Reply = handler(**args)
        except Exception as exc:  # surfaced to the operator, as a shell would
            return exception_text(type(exc).__name__, str(exc))
        if reply.stamped:
            return stamp(self.world.ut, reply.text)
        return reply.text

    def wait(self) -> str:
        """Block until the next notification; raises :class:`Deadlock` if none can arrive."""
        self.world.advance(self.world.config.latency)
        return self.world.wait_for_notification()
