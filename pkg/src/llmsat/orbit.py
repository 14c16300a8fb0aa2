"""Two-body Keplerian orbits and impulsive maneuver planning.

Angles are stored in radians and times in UT seconds. Every operation is a
pure function of its arguments, so orbits and nodes can be shared freely
between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

# Below this eccentricity an orbit is treated as circular.
CIRCULAR_ECCENTRICITY = 1e-9
# Below this sin(i) the orbit plane is treated as equatorial.
EQUATORIAL_SINE = 1e-11
KEPLER_TOLERANCE = 1e-12
KEPLER_MAX_ITER = 50


class OrbitError(ValueError):
    """Base class for orbit construction and planning failures."""


class InvalidArgument(OrbitError):
    pass


class UnsupportedOrbit(OrbitError):
    """Raised for unbound (parabolic or hyperbolic) trajectories."""


class ManeuverError(OrbitError):
    """A planner refused the request; the message is shown to the operator."""


@dataclass(frozen=True)
class CentralBody:
    name: str
    mu: float
    radius: float
    safe_altitude: float = 0.0
    soi_radius: float = math.inf

    def __post_init__(self) -> None:
        if self.mu <= 0 or self.radius <= 0:
            raise InvalidArgument("body mu and radius must be positive")


# Circular speed and altitude read back from the flight console; mu is fitted
# so the console's own period and speed reproduce.
_ENCELADUS_RADIUS = 252100.0
_REFERENCE_ALTITUDE = 146553.0016
_REFERENCE_SPEED = 134.49740511030674

ENCELADUS = CentralBody(
    name="Enceladus",
    mu=_REFERENCE_SPEED**2 * (_ENCELADUS_RADIUS + _REFERENCE_ALTITUDE),
    radius=_ENCELADUS_RADIUS,
    safe_altitude=50000.0,
    soi_radius=483_000.0,
)


@dataclass(frozen=True)
class KeplerOrbit:
    """Closed two-body orbit anchored by mean anomaly ``m0`` at time ``t0``."""

    body: CentralBody
    a: float
    e: float
    i: float
    lan: float
    argp: float
    m0: float
    t0: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise InvalidArgument("semi-major axis must be positive")
        if not 0.0 <= self.e < 1.0:
            raise UnsupportedOrbit(f"eccentricity {self.e} is not a closed orbit")
        if not 0.0 <= self.i <= math.pi + 1e-12:
            raise InvalidArgument("inclination must lie in [0, pi]")
        if self.periapsis_radius <= 0:
            raise InvalidArgument("periapsis radius must be positive")

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.body.mu / self.a**3)

    @property
    def period(self) -> float:
        return TWO_PI / self.mean_motion

    @property
    def energy(self) -> float:
        return -self.body.mu / (2.0 * self.a)

    @property
    def periapsis_radius(self) -> float:
        return self.a * (1.0 - self.e)

    @property
    def apoapsis_radius(self) -> float:
        return self.a * (1.0 + self.e)

    @property
    def periapsis_altitude(self) -> float:
        return self.periapsis_radius - self.body.radius

    @property
    def apoapsis_altitude(self) -> float:
        return self.apoapsis_radius - self.body.radius

    def mean_anomaly(self, t: float) -> float:
        """Unwrapped mean anomaly at ``t``."""
        return self.m0 + self.mean_motion * (t - self.t0)


class StateSample(NamedTuple):
    altitude: float
    speed: float
    true_anomaly: float


@dataclass(frozen=True)
class ManeuverNode:
    """Impulsive burn expressed in the prograde/normal/radial frame."""

    prograde: float
    normal: float
    radial: float
    ut: float
    predicted_orbit: KeplerOrbit
    remaining_delta_v: float = field(default=math.nan)

    def __post_init__(self) -> None:
        if math.isnan(self.remaining_delta_v):
            object.__setattr__(self, "remaining_delta_v", self.delta_v)

    @property
    def delta_v(self) -> float:
        return math.sqrt(self.prograde**2 + self.normal**2 + self.radial**2)


def circular_orbit(
    body: CentralBody,
    altitude: float,
    inclination: float = 0.0,
    lan: float = 0.0,
    argp: float = 0.0,
    epoch: float = 0.0,
    mean_anomaly: float = 0.0,
) -> KeplerOrbit:
    """Circular orbit; angles in degrees, position set by ``mean_anomaly`` (rad) at ``epoch``."""
    if body.radius + altitude <= 0:
        raise InvalidArgument("orbit radius must be positive")
    if not 0.0 <= inclination <= 180.0:
        raise InvalidArgument("inclination must lie in [0, 180] degrees")
    return KeplerOrbit(
        body=body,
        a=body.radius + altitude,
        e=0.0,
        i=math.radians(inclination),
        lan=math.radians(lan) % TWO_PI,
        argp=math.radians(argp) % TWO_PI,
        m0=mean_anomaly,
        t0=epoch,
    )


def orbit_from_apsides(
    body: CentralBody,
    apoapsis_altitude: float,
    periapsis_altitude: float,
    inclination: float = 0.0,
    lan: float = 0.0,
    argp: float = 0.0,
    epoch: float = 0.0,
    mean_anomaly: float = 0.0,
) -> KeplerOrbit:
    """Elliptical orbit from apsis altitudes; angles in degrees."""
    ra = body.radius + apoapsis_altitude
    rp = body.radius + periapsis_altitude
    if rp <= 0 or ra < rp:
        raise InvalidArgument("apoapsis must be at or above a positive periapsis")
    e = (ra - rp) / (ra + rp)
    return KeplerOrbit(
        body=body,
        a=0.5 * (ra + rp),
        e=0.0 if e < CIRCULAR_ECCENTRICITY else e,
        i=math.radians(inclination),
        lan=math.radians(lan) % TWO_PI,
        argp=math.radians(argp) % TWO_PI,
        m0=mean_anomaly,
        t0=epoch,
    )


def solve_kepler(mean_anomaly: float, e: float) -> float:
    """Eccentric anomaly E with E - e sin E = M, in the same revolution as M."""
    if not 0.0 <= e < 1.0:
        raise InvalidArgument("eccentricity must lie in [0, 1)")
    revolutions = math.floor(mean_anomaly / TWO_PI)
    m = mean_anomaly - revolutions * TWO_PI
    if e == 0.0:
        return mean_anomaly
    big_e = math.pi if e > 0.8 else m
    for _ in range(KEPLER_MAX_ITER):
        residual = big_e - e * math.sin(big_e) - m
        big_e -= residual / (1.0 - e * math.cos(big_e))
        # One step past tolerance leaves room for re-adding whole revolutions.
        if abs(residual) < KEPLER_TOLERANCE:
            return big_e + revolutions * TWO_PI
    # Kepler's function is monotone on [0, 2pi], so bisection always converges.
    lo, hi = 0.0, TWO_PI
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - m < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) + revolutions * TWO_PI


def _true_from_eccentric(big_e: float, e: float) -> float:
    return 2.0 * math.atan2(
        math.sqrt(1.0 + e) * math.sin(0.5 * big_e), math.sqrt(1.0 - e) * math.cos(0.5 * big_e)
    )


def _eccentric_from_true(nu: float, e: float) -> float:
    return 2.0 * math.atan2(
        math.sqrt(1.0 - e) * math.sin(0.5 * nu), math.sqrt(1.0 + e) * math.cos(0.5 * nu)
    )


def _mean_from_true(nu: float, e: float) -> float:
    big_e = _eccentric_from_true(nu, e)
    return big_e - e * math.sin(big_e)


def true_anomaly_at(orbit: KeplerOrbit, t: float) -> float:
    """True anomaly wrapped to [0, 2pi)."""
    big_e = solve_kepler(orbit.mean_anomaly(t), orbit.e)
    return _true_from_eccentric(big_e, orbit.e) % TWO_PI


def radius_at(orbit: KeplerOrbit, t: float) -> float:
    big_e = solve_kepler(orbit.mean_anomaly(t), orbit.e)
    return orbit.a * (1.0 - orbit.e * math.cos(big_e))


def state_at(orbit: KeplerOrbit, t: float) -> StateSample:
    r = radius_at(orbit, t)
    speed = math.sqrt(orbit.body.mu * (2.0 / r - 1.0 / orbit.a))
    return StateSample(r - orbit.body.radius, speed, true_anomaly_at(orbit, t))


def apsis_times(orbit: KeplerOrbit, now: float) -> tuple[float, float]:
    """(time_to_apoapsis, time_to_periapsis) from ``now``; zero exactly at the apsis."""
    m = orbit.mean_anomaly(now) % TWO_PI
    n = orbit.mean_motion
    return ((math.pi - m) % TWO_PI) / n, ((TWO_PI - m) % TWO_PI) / n


def time_to_true_anomaly(orbit: KeplerOrbit, nu: float, now: float) -> float:
    """Time from ``now`` until the orbit next reaches true anomaly ``nu`` (zero if there now)."""
    target = _mean_from_true(nu, orbit.e)
    delta = (target - orbit.mean_anomaly(now)) % TWO_PI
    if delta > TWO_PI - 1e-12:
        delta = 0.0
    return delta / orbit.mean_motion


def _rotation(lan: float, i: float, argp: float) -> np.ndarray:
    """Perifocal-to-inertial rotation matrix."""
    cl, sl = math.cos(lan), math.sin(lan)
    ci, si = math.cos(i), math.sin(i)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array(
        [
            [cl * cw - sl * sw * ci, -cl * sw - sl * cw * ci, sl * si],
            [sl * cw + cl * sw * ci, -sl * sw + cl * cw * ci, -cl * si],
            [sw * si, cw * si, ci],
        ]
    )


def state_vectors(orbit: KeplerOrbit, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Inertial position (m) and velocity (m/s) at ``t``."""
    e = orbit.e
    nu = true_anomaly_at(orbit, t)
    p = orbit.a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(nu))
    scale = math.sqrt(orbit.body.mu / p)
    rot = _rotation(orbit.lan, orbit.i, orbit.argp)
    r_pf = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    v_pf = np.array([-scale * math.sin(nu), scale * (e + math.cos(nu)), 0.0])
    return rot @ r_pf, rot @ v_pf


def _signed_angle(a: np.ndarray, b: np.ndarray, axis: np.ndarray) -> float:
    """Angle from ``a`` to ``b`` measured counter-clockwise about ``axis``."""
    return math.atan2(float(np.dot(np.cross(a, b), axis)), float(np.dot(a, b)))


def orbit_from_state_vectors(
    body: CentralBody,
    r: np.ndarray,
    v: np.ndarray,
    t: float,
    lan_hint: float = 0.0,
    argp_hint: float = 0.0,
) -> KeplerOrbit:
    """Classical elements from a state vector.

    ``lan_hint`` fills the node line of equatorial orbits and ``argp_hint``
    the periapsis direction of circular ones.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    mu = body.mu
    r_norm = float(np.linalg.norm(r))
    v_sq = float(np.dot(v, v))
    energy = 0.5 * v_sq - mu / r_norm
    if energy >= 0.0:
        raise UnsupportedOrbit("trajectory is not bound to the central body")
    a = -mu / (2.0 * energy)
    h = np.cross(r, v)
    h_norm = float(np.linalg.norm(h))
    h_hat = h / h_norm
    i = math.acos(max(-1.0, min(1.0, h_hat[2])))
    node = np.cross([0.0, 0.0, 1.0], h)
    node_norm = float(np.linalg.norm(node))
    if node_norm > EQUATORIAL_SINE * h_norm:
        lan = math.atan2(node[1], node[0]) % TWO_PI
    else:
        lan = lan_hint % TWO_PI
    node_hat = np.array([math.cos(lan), math.sin(lan), 0.0])
    e_vec = ((v_sq - mu / r_norm) * r - float(np.dot(r, v)) * v) / mu
    e = float(np.linalg.norm(e_vec))
    if e < CIRCULAR_ECCENTRICITY:
        e = 0.0
        argp = argp_hint % TWO_PI
        nu = _signed_angle(node_hat, r, h_hat) - argp
    else:
        argp = _signed_angle(node_hat, e_vec, h_hat) % TWO_PI
        nu = _signed_angle(e_vec, r, h_hat)
    m0 = _mean_from_true(nu, e) % TWO_PI
    return KeplerOrbit(body=body, a=a, e=e, i=i, lan=lan, argp=argp, m0=m0, t0=t)


def _frame(r: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit (prograde, normal, radial-out) vectors of the maneuver frame."""
    prograde = v / np.linalg.norm(v)
    h = np.cross(r, v)
    normal = h / np.linalg.norm(h)
    radial = np.cross(prograde, normal)
    return prograde, normal, radial


def _node_from_velocity(
    orbit: KeplerOrbit, t: float, r: np.ndarray, v: np.ndarray, v_new: np.ndarray, lan_hint: float
) -> ManeuverNode:
    prograde, normal, radial = _frame(r, v)
    dv = v_new - v
    predicted = orbit_from_state_vectors(orbit.body, r, v_new, t, lan_hint, orbit.argp)
    return ManeuverNode(
        prograde=float(np.dot(dv, prograde)),
        normal=float(np.dot(dv, normal)),
        radial=float(np.dot(dv, radial)),
        ut=t,
        predicted_orbit=predicted,
    )


def _apsis_burn(orbit: KeplerOrbit, t: float, other_radius: float) -> ManeuverNode:
    """Tangential burn at ``t`` that places the opposite apsis at ``other_radius``."""
    r, v = state_vectors(orbit, t)
    r_burn = float(np.linalg.norm(r))
    a_new = 0.5 * (r_burn + other_radius)
    speed = math.sqrt(orbit.body.mu * (2.0 / r_burn - 1.0 / a_new))
    v_new = v / np.linalg.norm(v) * speed
    return _node_from_velocity(orbit, t, r, v, v_new, orbit.lan)


def plan_periapsis_change(orbit: KeplerOrbit, new_periapsis: float, now: float) -> ManeuverNode:
    """Burn at the next apoapsis at or after ``now`` to set the periapsis altitude."""
    body = orbit.body
    new_radius = body.radius + new_periapsis
    if not math.isfinite(new_periapsis) or new_radius <= 0:
        raise InvalidArgument(f"new periapsis must lie above the centre of {body.name}")
    burn_radius = orbit.apoapsis_radius
    if new_radius > burn_radius * (1.0 + 1e-12):
        raise ManeuverError(
            "new periapsis cannot be higher than the altitude of the burn "
            f"({(burn_radius - body.radius) / 1000.0:.1f} km)"
        )
    t_burn = now + apsis_times(orbit, now)[0]
    return _apsis_burn(orbit, t_burn, min(new_radius, burn_radius))


def plan_apoapsis_change(orbit: KeplerOrbit, new_apoapsis: float, now: float) -> ManeuverNode:
    """Burn at the next periapsis at or after ``now`` to set the apoapsis altitude."""
    body = orbit.body
    if not math.isfinite(new_apoapsis):
        raise InvalidArgument("new apoapsis must be finite")
    new_radius = body.radius + new_apoapsis
    burn_radius = orbit.periapsis_radius
    if new_radius < burn_radius * (1.0 - 1e-12):
        raise ManeuverError(
            "new apoapsis cannot be lower than the altitude of the burn "
            f"({(burn_radius - body.radius) / 1000.0:.1f} km)"
        )
    t_burn = now + apsis_times(orbit, now)[1]
    return _apsis_burn(orbit, t_burn, max(new_radius, burn_radius))


def _rotate(vector: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``vector`` about unit ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return vector * c + np.cross(axis, vector) * s + axis * float(np.dot(axis, vector)) * (1.0 - c)


def plan_inclination_change(orbit: KeplerOrbit, new_inclination: float, now: float) -> ManeuverNode:
    """Plane change at the cheaper of the next two node crossings; ``new_inclination`` in degrees.

    Equatorial orbits have no physical node line, so the burn happens where
    the true longitude equals the stored ``lan``, which stays the ascending
    node of the new plane.
    """
    if not math.isfinite(new_inclination) or not 0.0 <= new_inclination <= 180.0:
        raise InvalidArgument("new inclination must lie between 0 and 180 degrees")
    target = math.radians(new_inclination)
    delta = target - orbit.i
    equatorial = math.sin(orbit.i) < EQUATORIAL_SINE
    crossings = ((0.0, 1.0),) if equatorial else ((0.0, 1.0), (math.pi, -1.0))
    candidates = []
    for crossing, sign in crossings:
        nu = (crossing - orbit.argp) % TWO_PI
        t = now + time_to_true_anomaly(orbit, nu, now)
        r, v = state_vectors(orbit, t)
        r_hat = r / np.linalg.norm(r)
        horizontal = float(np.linalg.norm(np.cross(r_hat, v)))
        cost = 2.0 * horizontal * abs(math.sin(0.5 * delta))
        candidates.append((cost, t, r, v, r_hat, sign * delta))
    best = min(candidates, key=lambda c: (round(c[0], 9), c[1]))
    _, t, r, v, r_hat, angle = best
    v_new = _rotate(v, r_hat, angle)
    return _node_from_velocity(orbit, t, r, v, v_new, orbit.lan)


def node_velocity_change(orbit: KeplerOrbit, node: ManeuverNode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Position, pre-burn velocity and inertial delta-v vector of ``node`` on ``orbit``."""
    r, v = state_vectors(orbit, node.ut)
    prograde, normal, radial = _frame(r, v)
    dv = node.prograde * prograde + node.normal * normal + node.radial * radial
    return r, v, dv


def apply_node(orbit: KeplerOrbit, node: ManeuverNode, scale: float = 1.0) -> KeplerOrbit:
    """Orbit after executing ``node``; ``scale`` multiplies the delta-v to model execution error."""
    if scale == 1.0:
        return node.predicted_orbit
    r, v, dv = node_velocity_change(orbit, node)
    return orbit_from_state_vectors(
        orbit.body, r, v + scale * dv, node.ut, node.predicted_orbit.lan, node.predicted_orbit.argp
    )
