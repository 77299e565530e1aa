"""Circular two-body propagation for a LEO ring and its ground/GEO server.

All lengths in km, times in seconds since the common epoch, angles in
degrees at the API boundary. Earth is a sphere; no perturbations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6378.137  # km
OMEGA_EARTH = 7.2921159e-5  # rad/s
GEO_ALTITUDE = 35786.0  # km

SPACING_MODES = ("raan_spaced", "in_plane_spaced")


class ConfigurationError(ValueError):
    pass


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class OrbitSpec:
    semi_major_axis: float
    inclination: float
    raan: float
    arg_latitude_epoch: float
    eccentricity: float = 0.0
    epoch: float = 0.0

    def __post_init__(self):
        if self.eccentricity != 0.0:
            raise ConfigurationError("only circular orbits (eccentricity 0) are supported")
        if not self.semi_major_axis > R_EARTH:
            raise ConfigurationError(
                f"semi-major axis {self.semi_major_axis} km is inside the Earth"
            )
        object.__setattr__(self, "raan", self.raan % 360.0)
        object.__setattr__(self, "arg_latitude_epoch", self.arg_latitude_epoch % 360.0)

    @property
    def mean_motion(self) -> float:
        """rad/s"""
        return math.sqrt(MU_EARTH / self.semi_major_axis**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.mean_motion


@dataclass(frozen=True)
class ConstellationConfig:
    n_sats: int = 5
    altitude: float = 500.0
    inclination: float = 60.0
    spacing_mode: str = "in_plane_spaced"
    ground_station: tuple[float, float, float] = (0.0, 0.0, 0.02)
    geo_server_altitude: float | None = None

    @property
    def spacing(self) -> float:
        return 360.0 / self.n_sats


@dataclass(frozen=True, eq=False)
class EciPoint:
    position: np.ndarray
    time: float


@dataclass(frozen=True, eq=False)
class SatelliteState:
    sat_id: int
    position: np.ndarray
    velocity: np.ndarray
    time: float


Located = Union[SatelliteState, EciPoint, np.ndarray, tuple, list]


def orbital_period(altitude: float) -> float:
    a = R_EARTH + altitude
    return 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH)


def build_constellation(config: ConstellationConfig) -> list[OrbitSpec]:
    """Equally spaced circular orbits, either across RAAN or along one plane."""
    n = config.n_sats
    if n < 2:
        raise ConfigurationError(f"a ring needs at least 2 satellites, got {n}")
    if config.spacing_mode not in SPACING_MODES:
        raise ConfigurationError(f"unknown spacing_mode {config.spacing_mode!r}")
    a = R_EARTH + config.altitude
    orbits = []
    for i in range(n):
        phase = i * 360.0 / n
        if config.spacing_mode == "raan_spaced":
            orbits.append(OrbitSpec(a, config.inclination, raan=phase, arg_latitude_epoch=0.0))
        else:
            orbits.append(OrbitSpec(a, config.inclination, raan=0.0, arg_latitude_epoch=phase))
    return orbits


def propagate(orbit: OrbitSpec, t: float, sat_id: int = 0) -> SatelliteState:
    if t < 0:
        raise ValueError("propagation time must be >= 0")
    a = orbit.semi_major_axis
    n_mean = orbit.mean_motion
    # reduce before adding so long horizons keep full precision
    u = math.radians(orbit.arg_latitude_epoch) + math.fmod(n_mean * (t - orbit.epoch), 2.0 * math.pi)
    inc = math.radians(orbit.inclination)
    raan = math.radians(orbit.raan)
    cu, su = math.cos(u), math.sin(u)
    ci, si = math.cos(inc), math.sin(inc)
    cO, sO = math.cos(raan), math.sin(raan)
    pos = a * np.array([cO * cu - sO * su * ci, sO * cu + cO * su * ci, su * si])
    v = math.sqrt(MU_EARTH / a)
    vel = v * np.array([-cO * su - sO * cu * ci, -sO * su + cO * cu * ci, cu * si])
    return SatelliteState(sat_id, pos, vel, float(t))


def _unpack(p: Located) -> tuple[np.ndarray, float | None]:
    if isinstance(p, (SatelliteState, EciPoint)):
        return np.asarray(p.position, dtype=float), p.time
    return np.asarray(p, dtype=float), None


def distance(a: Located, b: Located) -> float:
    pa, ta = _unpack(a)
    pb, tb = _unpack(b)
    if ta is not None and tb is not None and ta != tb:
        raise GeometryError(f"positions taken at different times ({ta} vs {tb})")
    return float(np.linalg.norm(pa - pb))


def ground_station_eci(lat: float, lon: float, alt: float, t: float) -> EciPoint:
    """Spherical-Earth geodetic point rotated into ECI by Earth spin since epoch."""
    if abs(lat) > 90.0:
        raise GeometryError(f"latitude {lat} outside [-90, 90]")
    r = R_EARTH + alt
    phi = math.radians(lat)
    lam = math.radians(lon) + math.fmod(OMEGA_EARTH * t, 2.0 * math.pi)
    pos = r * np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])
    return EciPoint(pos, float(t))


def line_of_sight(a: Located, b: Located, grazing_margin: float = 0.0) -> bool:
    """True iff the chord a-b clears the Earth sphere inflated by grazing_margin.

    Endpoints themselves never block, so surface stations are allowed.
    """
    pa, _ = _unpack(a)
    pb, _ = _unpack(b)
    for p in (pa, pb):
        if np.linalg.norm(p) < R_EARTH - 1e-9:
            raise GeometryError("point lies inside the Earth")
    # canonical order makes the test exactly symmetric
    if tuple(pb) < tuple(pa):
        pa, pb = pb, pa
    d = pb - pa
    dd = float(d @ d)
    if dd == 0.0:
        return True
    s = -float(pa @ d) / dd
    if s <= 0.0 or s >= 1.0:
        return True
    closest = float(np.linalg.norm(pa + s * d))
    return closest > R_EARTH + grazing_margin


def server_orbit(config: ConstellationConfig) -> OrbitSpec | None:
    """Equatorial orbit for a true-GEO server; None for the quasi-ground variant."""
    alt = config.geo_server_altitude
    if alt is None or alt < 1.0:
        return None
    lon = config.ground_station[1]
    return OrbitSpec(R_EARTH + alt, 0.0, raan=0.0, arg_latitude_epoch=lon)


def server_position(config: ConstellationConfig, t: float) -> EciPoint:
    orbit = server_orbit(config)
    if orbit is not None:
        st = propagate(orbit, t)
        return EciPoint(st.position, st.time)
    lat, lon, alt = config.ground_station
    if config.geo_server_altitude is not None:
        alt = config.geo_server_altitude
    # quasi-ground server is held fixed in ECI
    fixed = ground_station_eci(lat, lon, alt, 0.0)
    return EciPoint(fixed.position, float(t))


def sample_times(duration: float, step: float) -> list[float]:
    if not step > 0:
        raise ValueError("step must be > 0")
    if duration < 0:
        raise ValueError("duration must be >= 0")
    count = int(math.floor(duration / step + 1e-9))
    return [k * step for k in range(count + 1)]


def ephemeris_rows(orbits: list[OrbitSpec], times: Iterable[float]):
    """(time_s, sat_id, x_km, y_km, z_km) for every sample."""
    for t in times:
        for i, orbit in enumerate(orbits):
            st = propagate(orbit, t, sat_id=i)
            yield (t, i, *st.position.tolist())


def pairwise_distance_rows(orbits: list[OrbitSpec], times: Iterable[float]):
    """(time_s, sat_i, sat_j, dist_km) for every unordered pair i < j."""
    for t in times:
        states = [propagate(o, t, sat_id=i) for i, o in enumerate(orbits)]
        for i in range(len(states)):
            for j in range(i + 1, len(states)):
                yield (t, i, j, distance(states[i], states[j]))
