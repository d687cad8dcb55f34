"""Core domain types for battery-electric freight corridors.

A corridor is an ordered list of stations (origin, interior candidate
stations, destination). Trains run origin -> destination, carrying up to one
battery per consist. Batteries drain sequentially (consist 1 first) and can
be recharged or swapped at deployed interior stations.

Charging follows an SOC-proportional rate: the instantaneous rate at state of
charge ``s`` is ``r0 * (1 - s)``, which integrates to the exponential
saturation curve ``s(t) = 1 - (1 - s0) * (1 - r0) ** t``. All SOC values are
fractions of one full battery; energy amounts are expressed in
battery-equivalents, times in hours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np


class RailvoltError(Exception):
    """Base class for all errors raised by this package."""


class InstanceError(RailvoltError):
    """An instance is malformed or violates a structural invariant."""


class DecodeError(RailvoltError):
    """A solver vector could not be decoded into a clean schedule."""


class InfeasibleError(RailvoltError):
    """A problem (or restricted problem) has no feasible schedule."""


# ---------------------------------------------------------------------------
# Charging physics
# ---------------------------------------------------------------------------

def _check_soc(soc: float, what: str = "soc") -> None:
    if not (-1e-12 <= soc <= 1.0 + 1e-12):
        raise ValueError(f"{what} must lie in [0, 1], got {soc!r}")


def _check_rate(r0: float) -> None:
    if not (0.0 < r0 < 1.0):
        raise ValueError(f"r0 must lie in (0, 1), got {r0!r}")


def charge_rate_at_soc(soc: float, r0: float) -> float:
    """Battery fraction gained over the next hour when starting at ``soc``.

    The rate decays linearly in the state of charge: full batteries gain
    nothing, empty batteries gain ``r0``. This is exactly the unit-hour
    increment of :func:`soc_after_charging` (the curve compounds hourly;
    its instantaneous slope is ``-ln(1-r0) * (1-soc)``).
    """
    _check_soc(soc)
    _check_rate(r0)
    return r0 * (1.0 - soc)


def soc_after_charging(soc: float, hours: float, r0: float) -> float:
    """State of charge after charging from ``soc`` for ``hours`` hours.

    Solves ds/dt = r0 * (1 - s):  s(t) = 1 - (1 - soc) * (1 - r0) ** t.
    Defined for any non-negative real duration (the curve is continuous,
    not stepwise).
    """
    _check_soc(soc)
    _check_rate(r0)
    if hours < 0:
        raise ValueError(f"charging duration must be >= 0, got {hours!r}")
    return 1.0 - (1.0 - soc) * (1.0 - r0) ** hours


def charge_time_for_target(soc: float, target: float, r0: float) -> float:
    """Hours of charging needed to go from ``soc`` to ``target``.

    Inverse of :func:`soc_after_charging`. A target of 100% is unreachable in
    finite time (the curve only saturates asymptotically) and raises.
    """
    _check_soc(soc, "start soc")
    _check_soc(target, "target soc")
    _check_rate(r0)
    if target >= 1.0:
        raise ValueError("target soc 1.0 is unreachable in finite time")
    if target < soc:
        raise ValueError(f"target {target!r} below start {soc!r}")
    if target == soc:
        return 0.0
    return math.log((1.0 - target) / (1.0 - soc)) / math.log(1.0 - r0)


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Train:
    """One train: a fixed consist count and a battery allowance."""
    name: str
    consists: int
    max_batteries: int


@dataclass
class Instance:
    """A corridor instance.

    Attributes:
        stations: Ordered station names; stations[0] is the origin and
            stations[-1] the destination. Only interior stations can be
            deployed.
        fixed_cost: Deployment cost per station (0 at the endpoints).
        chargers: Charger count per station (cap on simultaneous charges
            per train).
        full_batteries: Charged-battery stock per station (cap on swaps
            per train; restocked between trains).
        trains: Train definitions.
        energy: energy[j][a][b] = battery-equivalents train j needs from
            station a to station b. Symmetric, zero diagonal, and additive
            over intermediate stations.
        travel_time: travel_time[j][a][b] = hours of travel, same layout.
        wait_time: wait_time[i][j] = planned (cost-free) wait of train j at
            station i.
        r0: Charge-rate coefficient of the SOC curve.
        swap_hours: Fixed duration of a battery swap (restores SOC to 100%).
    """
    stations: List[str]
    fixed_cost: np.ndarray
    chargers: np.ndarray
    full_batteries: np.ndarray
    trains: List[Train]
    energy: np.ndarray
    travel_time: np.ndarray
    wait_time: np.ndarray
    r0: float = 0.40
    swap_hours: float = 2.0
    name: str = "instance"
    meta: dict = field(default_factory=dict)

    # -- shape helpers ------------------------------------------------------

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_trains(self) -> int:
        return len(self.trains)

    @property
    def interior(self) -> range:
        """Indices of deployable (interior) stations."""
        return range(1, self.n_stations - 1)

    def consists(self, j: int) -> int:
        return self.trains[j].consists

    def leg_energy(self, j: int, i: int) -> float:
        """Energy of the leg from station i to station i+1 for train j."""
        return float(self.energy[j, i, i + 1])

    def leg_time(self, j: int, i: int) -> float:
        return float(self.travel_time[j, i, i + 1])

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stations": list(self.stations),
            "trains": [asdict(t) for t in self.trains],
            "fixed_cost": np.asarray(self.fixed_cost, float).tolist(),
            "chargers": np.asarray(self.chargers, int).tolist(),
            "full_batteries": np.asarray(self.full_batteries, int).tolist(),
            "energy": np.asarray(self.energy, float).tolist(),
            "travel_time": np.asarray(self.travel_time, float).tolist(),
            "wait_time": np.asarray(self.wait_time, float).tolist(),
            "physics": {"r0": self.r0, "swap_hours": self.swap_hours},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        try:
            physics = d.get("physics", {})
            return cls(
                stations=list(d["stations"]),
                fixed_cost=np.asarray(d["fixed_cost"], float),
                chargers=np.asarray(d["chargers"], int),
                full_batteries=np.asarray(d["full_batteries"], int),
                trains=[Train(**t) for t in d["trains"]],
                energy=np.asarray(d["energy"], float),
                travel_time=np.asarray(d["travel_time"], float),
                wait_time=np.asarray(d["wait_time"], float),
                r0=float(physics.get("r0", 0.40)),
                swap_hours=float(physics.get("swap_hours", 2.0)),
                name=str(d.get("name", "instance")),
                meta=dict(d.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed instance document: {exc}") from exc

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "Instance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def validate_instance(inst: Instance, additivity_tol: float = 1e-6) -> List[str]:
    """Structural checks on an instance; returns a list of problems.

    An empty list means the instance is well formed. This checks shapes,
    signs, endpoint conventions, matrix symmetry and that long-range
    energy/time entries telescope from the adjacent legs.
    """
    problems: List[str] = []
    s = inst.n_stations
    jn = inst.n_trains
    if s < 2:
        return [f"need at least origin and destination, got {s} stations"]
    if jn < 1:
        return ["instance has no trains"]

    def shape(name, arr, want):
        if tuple(np.shape(arr)) != want:
            problems.append(f"{name} has shape {np.shape(arr)}, expected {want}")
            return False
        return True

    ok = shape("fixed_cost", inst.fixed_cost, (s,))
    ok &= shape("chargers", inst.chargers, (s,))
    ok &= shape("full_batteries", inst.full_batteries, (s,))
    ok &= shape("energy", inst.energy, (jn, s, s))
    ok &= shape("travel_time", inst.travel_time, (jn, s, s))
    ok &= shape("wait_time", inst.wait_time, (s, jn))
    if not ok:
        return problems

    if np.any(inst.fixed_cost < 0):
        problems.append("negative fixed cost")
    if np.any(inst.chargers < 0) or np.any(inst.full_batteries < 0):
        problems.append("negative station capacity")
    if np.any(inst.wait_time < 0):
        problems.append("negative wait time")
    for endpoint in (0, s - 1):
        if np.any(inst.wait_time[endpoint] != 0):
            problems.append(
                f"station {endpoint} is an endpoint and must have zero wait"
            )

    if not (0.0 < inst.r0 < 1.0):
        problems.append(f"r0 must lie in (0, 1), got {inst.r0}")
    if inst.swap_hours <= 0:
        problems.append("swap_hours must be positive")

    for j, train in enumerate(inst.trains):
        if train.consists < 1:
            problems.append(f"train {j} has no consists")
        if train.max_batteries < 1:
            problems.append(f"train {j} cannot carry any battery")

    for label, mat in (("energy", inst.energy), ("travel_time", inst.travel_time)):
        for j in range(jn):
            m = mat[j]
            if np.any(m < 0):
                problems.append(f"train {j} has a negative {label} entry")
            if np.any(np.abs(np.diag(m)) > 1e-12):
                problems.append(f"train {j} {label} diagonal is not zero")
            if not np.allclose(m, m.T, atol=1e-9):
                problems.append(f"train {j} {label} matrix is not symmetric")
            # legs must telescope: m[a, b] == sum of adjacent legs a..b
            legs = np.array([m[i, i + 1] for i in range(s - 1)])
            cum = np.concatenate([[0.0], np.cumsum(legs)])
            want = np.abs(cum[None, :] - cum[:, None])
            if np.max(np.abs(m - want)) > additivity_tol:
                a, b = np.unravel_index(np.argmax(np.abs(m - want)), m.shape)
                problems.append(
                    f"train {j} {label}[{a},{b}]={m[a, b]:g} is not the sum of "
                    f"its legs ({want[a, b]:g})"
                )
    return problems


# ---------------------------------------------------------------------------
# Solve configuration
# ---------------------------------------------------------------------------

# Big-M for rows on the SOC scale (sequential-battery linking and the PLA
# departure/surface rows). SOC lives in [0, 1], so 2 is always enough.
SOC_BIG_M = 2.0


@dataclass
class SolveConfig:
    """Weights, tolerances and limits shared by all solve paths.

    ``n`` and ``m`` are the SOC-axis and time-axis segment counts of the
    piecewise-linear charging surface; ``t_max`` is the longest modelled
    charge duration.
    """
    alpha_fixed: float = 1.0
    alpha_delay: float = 3.0
    big_M: float = 1000.0
    epsilon: float = 1e-6
    n: int = 10
    m: int = 10
    t_max: float = 10.0
    mip_gap: float = 0.01
    time_limit_seconds: float = 1800.0
    benders_gap: float = 0.05
    rmp_gap: float = 0.005
    rmp_time_limit_seconds: float = 300.0
    benders_max_iterations: int = 100000
    seed: int = 0

    def replace(self, **kw) -> "SolveConfig":
        d = asdict(self)
        d.update(kw)
        return SolveConfig(**d)


# ---------------------------------------------------------------------------
# Solution and metrics
# ---------------------------------------------------------------------------

@dataclass
class Solution:
    """A full schedule: deployment plus per-train, per-station decisions.

    Indexing: ``[j][i]`` is train j at station i, ``[j][i][k]`` adds the
    consist. ``delay[j][i]`` stores the *excess* delay beyond the planned
    wait (what the objective penalizes). SOC values are fractions in [0, 1].
    """
    deployed: List[int]
    has_battery: List[List[int]]
    swap: List[List[List[int]]]
    charge: List[List[List[int]]]
    charge_hours: List[List[List[float]]]
    arrive: List[List[float]]
    depart: List[List[float]]
    soc_arrive: List[List[List[float]]]
    soc_depart: List[List[List[float]]]
    delay: List[List[float]]
    battery_nonempty: List[List[List[int]]]
    objective_value: float
    bound: Optional[float] = None
    gap: Optional[float] = None
    status: str = "unknown"
    wall_seconds: float = 0.0
    algorithm: str = ""
    info: dict = field(default_factory=dict)

    def dwell(self, j: int, i: int) -> float:
        return self.depart[j][i] - self.arrive[j][i]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        fields = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in fields})

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "Solution":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Metrics:
    """The eight reported measures of a schedule."""
    objective: float
    stations_deployed: int
    setup_cost: float
    delay_hours_per_train: float
    charge_hours_per_train: float
    swap_hours_per_train: float
    charge_hours_per_station: float
    swap_hours_per_station: float

    def as_dict(self) -> dict:
        return asdict(self)

    FIELDS = (
        "objective", "stations_deployed", "setup_cost",
        "delay_hours_per_train", "charge_hours_per_train",
        "swap_hours_per_train", "charge_hours_per_station",
        "swap_hours_per_station",
    )
