"""Spacecraft mass, propellant, parts and experiment model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Any

from .orbit import KeplerOrbit, state_at

G0 = 9.80665
SCAN_TEMPERATURE_K = 127.0


class InsufficientPropellant(ValueError):
    pass


@dataclass(frozen=True)
class Engine:
    thrust: float
    isp: float
    g0: float = G0

    def __post_init__(self) -> None:
        if self.thrust <= 0 or self.isp <= 0:
            raise ValueError("engine thrust and isp must be positive")

    @property
    def exhaust_velocity(self) -> float:
        return self.isp * self.g0


@dataclass(frozen=True)
class ResourceTank:
    name: str
    amount: float
    max: float
    density: float

    def __post_init__(self) -> None:
        if self.density < 0 or not 0.0 <= self.amount <= self.max * (1 + 1e-12):
            raise ValueError(f"tank {self.name}: need 0 <= amount <= max and density >= 0")

    @property
    def mass(self) -> float:
        return self.amount * self.density


@dataclass(frozen=True)
class PartNode:
    id: str
    name: str
    title: str
    type: str
    mass: float
    temperature: float
    max_temperature: float
    attachment: str
    children: tuple["PartNode", ...] = ()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PartNode":
        kids = tuple(cls.from_dict(c) for c in data["children"])
        return cls(**{**data, "children": kids})

    def to_dict(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "children"}
        out["children"] = [c.to_dict() for c in self.children]
        return out

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ExperimentDef:
    part: str
    name: str
    deployed: bool = False
    rerunnable: bool = True
    inoperable: bool = False
    has_data: bool = False
    available: bool = True


@dataclass(frozen=True)
class ExperimentResult:
    timestamp: float
    value: str
    altitude: float
    body: str
    # Recorded for evaluators; not part of the rendered result.
    inclination: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class Vessel:
    name: str
    situation: str
    dry_mass: float
    engine: Engine
    tanks: tuple[ResourceTank, ...]
    parts: PartNode
    experiments: dict[str, ExperimentDef]
    orbit: KeplerOrbit
    moment_of_inertia: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # Volumetric burn split, e.g. {"UDMH": 1.0, "NTO": 1.065}.
    propellant_mix: dict[str, float] = field(default_factory=dict)

    def tank(self, name: str) -> ResourceTank:
        for tank in self.tanks:
            if tank.name == name:
                return tank
        raise KeyError(name)

    def with_tank(self, name: str, amount: float) -> "Vessel":
        tanks = tuple(replace(t, amount=amount) if t.name == name else t for t in self.tanks)
        return replace(self, tanks=tanks)


def total_mass(vessel: Vessel) -> float:
    return vessel.dry_mass + sum(t.mass for t in vessel.tanks)


def propellant_mass(vessel: Vessel) -> float:
    return sum(vessel.tank(name).mass for name in vessel.propellant_mix)


def _mix_density(vessel: Vessel) -> float:
    """Propellant mass per unit of the mixture's reference volume."""
    return sum(ratio * vessel.tank(name).density for name, ratio in vessel.propellant_mix.items())


def usable_propellant_mass(vessel: Vessel) -> float:
    """Mass that can be burned before the limiting tank at the fixed mix runs dry."""
    if not vessel.propellant_mix:
        return 0.0
    volume = min(vessel.tank(name).amount / ratio for name, ratio in vessel.propellant_mix.items())
    return volume * _mix_density(vessel)


def delta_v_capacity(vessel: Vessel) -> float:
    m0 = total_mass(vessel)
    return vessel.engine.exhaust_velocity * math.log(m0 / (m0 - usable_propellant_mass(vessel)))


def burn_consume(vessel: Vessel, delta_v: float) -> Vessel:
    """Vessel after an impulsive burn of ``delta_v`` under the rocket equation."""
    if delta_v < 0 or not math.isfinite(delta_v):
        raise ValueError("delta_v must be a finite non-negative number")
    if delta_v == 0:
        return vessel
    m0 = total_mass(vessel)
    burned = m0 * -math.expm1(-delta_v / vessel.engine.exhaust_velocity)
    if burned > usable_propellant_mass(vessel) * (1 + 1e-12):
        raise InsufficientPropellant(
            f"{delta_v:.3f} m/s exceeds the remaining capability of {delta_v_capacity(vessel):.3f} m/s"
        )
    volume = burned / _mix_density(vessel)
    out = vessel
    for name, ratio in vessel.propellant_mix.items():
        out = out.with_tank(name, max(vessel.tank(name).amount - ratio * volume, 0.0))
    return out


def run_temperature_scan(
    vessel: Vessel, now: float, journal: list[ExperimentResult] | None = None
) -> ExperimentResult:
    """Take a temperature reading at the vessel's current position."""
    experiment = vessel.experiments.get("Temperature Scan")
    if experiment is None or not experiment.available:
        raise LookupError("Temperature Scan is not available")
    orbit = vessel.orbit
    result = ExperimentResult(
        timestamp=now,
        value=f"{SCAN_TEMPERATURE_K:.1f}K",
        altitude=state_at(orbit, now).altitude,
        body=orbit.body.name,
        inclination=math.degrees(orbit.i),
    )
    if journal is not None:
        journal.append(result)
    return result


def _read_data(name: str) -> str:
    return resources.files("llmsat.data").joinpath(name).read_text(encoding="utf-8")


def load_parts_tree() -> PartNode:
    return PartNode.from_dict(json.loads(_read_data("parts_tree.json")))


def load_vessel(orbit: KeplerOrbit, fixture: str = "vessel.json") -> Vessel:
    """Build the vessel fixture around ``orbit``."""
    data = json.loads(_read_data(fixture))
    return Vessel(
        name=data["name"],
        situation=data["situation"],
        dry_mass=data["dry_mass"],
        engine=Engine(**data["engine"]),
        tanks=tuple(ResourceTank(**t) for t in data["tanks"]),
        parts=load_parts_tree(),
        experiments={k: ExperimentDef(**v) for k, v in data["experiments"].items()},
        orbit=orbit,
        moment_of_inertia=tuple(data["moment_of_inertia"]),
        propellant_mix=dict(data["propellant_mix"]),
    )
