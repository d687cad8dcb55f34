"""Seeded random instance generation.

Instances come in three size classes (station counts include the origin and
destination). Leg distances, station costs and capacities are drawn from
clamped normals; energy and travel-time matrices are derived from cumulative
leg distances, so they are additive over intermediate stations by
construction.

Draw order for a fixed seed (documented so instances are reproducible):
leg distances per train, then fixed costs, charger counts, battery stocks,
wait indicators, wait magnitudes. The generator is numpy's
``default_rng`` (PCG64); its name and the seed are recorded in the
instance's ``meta`` block.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .domain import Instance, Train

SIZE_CLASS_STATIONS = {"small": 6, "medium": 15, "large": 25}

# Legs shorter than this are clamped away: zero-length legs make the
# marginal-benefit bookkeeping of the greedy heuristic degenerate.
MIN_LEG_KM = 50.0


@dataclass(frozen=True)
class GenSpec:
    """Distribution parameters for random corridor instances.

    Costs are in millions of dollars, distances in km, durations in hours.
    Each (mean, sd, min, max) quadruple describes a clamped normal; count
    attributes are additionally rounded to integers.
    """
    size_class: str = "small"
    n_trains: int = 2
    consists_per_train: int = 3
    max_batteries: int = 3
    distance_mean_km: float = 373.0
    distance_sd_km: float = 146.0
    speed_kmh: float = 100.0
    consumption_kwh_per_km: float = 30.0
    battery_kwh: float = 7000.0
    cost_mean: float = 22.0
    cost_sd: float = 3.0
    cost_min: float = 15.0
    cost_max: float = 30.0
    chargers_mean: float = 5.0
    chargers_sd: float = 1.0
    chargers_min: float = 1.0
    chargers_max: float = 10.0
    batteries_mean: float = 10.0
    batteries_sd: float = 2.0
    batteries_min: float = 5.0
    batteries_max: float = 15.0
    wait_probability: float = 0.5
    wait_sd_hours: float = 0.3
    r0: float = 0.40
    swap_hours: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.size_class not in SIZE_CLASS_STATIONS:
            raise ValueError(
                f"size_class must be one of {sorted(SIZE_CLASS_STATIONS)}, "
                f"got {self.size_class!r}"
            )
        for stem in ("cost", "chargers", "batteries"):
            lo = getattr(self, f"{stem}_min")
            mean = getattr(self, f"{stem}_mean")
            hi = getattr(self, f"{stem}_max")
            if not (0 < lo <= mean <= hi):
                raise ValueError(
                    f"{stem} bounds must satisfy 0 < min <= mean <= max, "
                    f"got {lo}/{mean}/{hi}"
                )
        for name in ("n_trains", "consists_per_train", "max_batteries",
                     "distance_mean_km", "distance_sd_km", "speed_kmh",
                     "consumption_kwh_per_km", "battery_kwh",
                     "wait_sd_hours", "swap_hours"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.wait_probability <= 1.0):
            raise ValueError("wait_probability must lie in [0, 1]")
        if not (0.0 < self.r0 < 1.0):
            raise ValueError("r0 must lie in (0, 1)")

    @property
    def n_stations(self) -> int:
        return SIZE_CLASS_STATIONS[self.size_class]


def energy_between(distance_km, consumption_kwh_per_km: float,
                   battery_kwh: float):
    """Battery-equivalents of energy needed to cover ``distance_km``
    (scalar or array)."""
    if battery_kwh <= 0:
        raise ValueError("battery_kwh must be positive")
    if np.any(np.asarray(distance_km) < 0) or consumption_kwh_per_km < 0:
        raise ValueError("distance and consumption must be non-negative")
    return distance_km * consumption_kwh_per_km / battery_kwh


def travel_hours(distance_km, speed_kmh: float):
    """Hours to cover ``distance_km`` (scalar or array) at ``speed_kmh``."""
    if speed_kmh <= 0:
        raise ValueError("speed_kmh must be positive")
    if np.any(np.asarray(distance_km) < 0):
        raise ValueError("distance must be non-negative")
    return distance_km / speed_kmh


def _clamped_normal(rng, mean, sd, lo, hi, size, integer=False):
    x = np.clip(rng.normal(mean, sd, size=size), lo, hi)
    return np.rint(x).astype(int) if integer else x


def generate_instance(spec: GenSpec) -> Instance:
    """Draw one random corridor instance from ``spec``'s distributions."""
    rng = np.random.default_rng(spec.seed)
    s = spec.n_stations
    legs = s - 1

    # One distance per (train, leg); it drives both energy and travel time.
    dist = np.maximum(
        rng.normal(spec.distance_mean_km, spec.distance_sd_km,
                   size=(spec.n_trains, legs)),
        MIN_LEG_KM,
    )

    fixed_cost = np.zeros(s)
    chargers = np.zeros(s, dtype=int)
    stock = np.zeros(s, dtype=int)
    n_int = s - 2
    fixed_cost[1:-1] = _clamped_normal(
        rng, spec.cost_mean, spec.cost_sd, spec.cost_min, spec.cost_max, n_int)
    chargers[1:-1] = _clamped_normal(
        rng, spec.chargers_mean, spec.chargers_sd,
        spec.chargers_min, spec.chargers_max, n_int, integer=True)
    stock[1:-1] = _clamped_normal(
        rng, spec.batteries_mean, spec.batteries_sd,
        spec.batteries_min, spec.batteries_max, n_int, integer=True)

    wait = np.zeros((s, spec.n_trains))
    has_wait = rng.random(size=(n_int, spec.n_trains)) < spec.wait_probability
    magnitudes = np.abs(rng.normal(0.0, spec.wait_sd_hours,
                                   size=(n_int, spec.n_trains)))
    wait[1:-1] = np.where(has_wait, magnitudes, 0.0)

    # Full matrices from cumulative distances: additive by construction.
    energy = np.zeros((spec.n_trains, s, s))
    time = np.zeros((spec.n_trains, s, s))
    for j in range(spec.n_trains):
        cum = np.concatenate([[0.0], np.cumsum(dist[j])])
        dmat = np.abs(cum[None, :] - cum[:, None])
        energy[j] = energy_between(
            dmat, spec.consumption_kwh_per_km, spec.battery_kwh)
        time[j] = travel_hours(dmat, spec.speed_kmh)

    trains = [
        Train(name=f"Train {j + 1}", consists=spec.consists_per_train,
              max_batteries=spec.max_batteries)
        for j in range(spec.n_trains)
    ]
    stations = (["Origin"]
                + [f"Station {i}" for i in range(1, s - 1)]
                + ["Destination"])
    return Instance(
        stations=stations,
        fixed_cost=fixed_cost,
        chargers=chargers,
        full_batteries=stock,
        trains=trains,
        energy=energy,
        travel_time=time,
        wait_time=wait,
        r0=spec.r0,
        swap_hours=spec.swap_hours,
        name=f"{spec.size_class}-{spec.seed}",
        meta={
            "generator": "numpy.random.default_rng(PCG64)",
            "seed": spec.seed,
            "spec": asdict(spec),
            "notes": "legs clamped at 50 km; waits half-normal",
        },
    )


def illustrative_instance() -> Instance:
    """The six-station, two-train worked example shipped with the package.

    Adjacent-leg energies and times are the authoritative figures; longer
    entries are their cumulative sums (shipped as instances/illustrative.json).
    """
    e_legs = [
        [1.73, 1.67, 1.00, 1.83, 2.27],
        [1.41, 1.64, 0.65, 2.24, 1.54],
    ]
    t_legs = [
        [7.00, 2.18, 3.38, 3.60, 4.10],
        [2.10, 4.06, 3.48, 3.50, 5.12],
    ]
    energy = np.zeros((2, 6, 6))
    time = np.zeros((2, 6, 6))
    for j in range(2):
        for mat, legs in ((energy, e_legs[j]), (time, t_legs[j])):
            cum = np.concatenate([[0.0], np.cumsum(legs)])
            mat[j] = np.abs(cum[None, :] - cum[:, None])
    wait = np.array([
        [0.00, 0.00],
        [0.00, 0.28],
        [0.20, 0.30],
        [0.14, 0.00],
        [0.24, 0.00],
        [0.00, 0.00],
    ])
    return Instance(
        stations=["Origin", "Station 1", "Station 2", "Station 3",
                  "Station 4", "Destination"],
        fixed_cost=np.array([0.0, 21.72, 21.47, 29.02, 30.00, 0.0]),
        chargers=np.array([0, 7, 5, 6, 3, 0]),
        full_batteries=np.array([0, 8, 8, 9, 13, 0]),
        trains=[Train("Train 1", 3, 3), Train("Train 2", 3, 3)],
        energy=energy,
        travel_time=time,
        wait_time=wait,
        r0=0.40,
        swap_hours=2.0,
        name="illustrative",
        meta={"source": "bundled worked example"},
    )
