"""Replica and ensemble runners."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import graph as sw
from .dynamics import (EXPOSED, INFECTIOUS, NONE, DurationDistribution, Population,
                       seed_patient_zero, transmission_step)
from .metrics import R0Series, active_components, daily_r0, empirical_r0
from .policy import PolicySchedule, edge_rates, select_checked_edges

log = logging.getLogger(__name__)

# sub-stream ids under (master_seed, replica)
GRAPH_STREAM = 0
DYNAMICS_STREAM = 1
REPORTING_STREAM = 2
CHECK_STREAM = 3

RECORD_FIELDS = (
    "S", "E", "I", "R",
    "new_exposed", "new_infectious", "new_confirmed", "cumulative_confirmed",
    "expected_new_confirmed", "expected_cumulative_confirmed",
    "cumulative_infected", "active_components",
)


@dataclass(frozen=True)
class SimConfig:
    n: int = 10_000
    k: int = 20
    p: float = 0.1
    horizon: int = 200
    detection_fraction: float = 0.1
    diagnosis_delay: int = 10
    replicas: int = 200
    master_seed: int = 0
    incubation: DurationDistribution = DurationDistribution(5.0, 3.0)
    infection: DurationDistribution = DurationDistribution(6.5, 3.0)
    n_regions: int = 100
    track_components: bool = True

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError(f"horizon must be >= 0, got {self.horizon}")
        if not 0.0 <= self.detection_fraction <= 1.0:
            raise ValueError(f"detection_fraction must lie in [0, 1], got {self.detection_fraction}")
        if self.diagnosis_delay < 0:
            raise ValueError(f"diagnosis_delay must be >= 0, got {self.diagnosis_delay}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if self.n_regions < 1 or self.n % self.n_regions:
            raise ValueError(f"n_regions={self.n_regions} does not divide n={self.n}")


def substream(master_seed: int, replica: int, stream: int, *extra: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(replica, stream, *extra))
    return np.random.default_rng(seq)


def replica_graph(config: SimConfig, replica: int) -> sw.Graph:
    seq = np.random.SeedSequence(config.master_seed, spawn_key=(replica, GRAPH_STREAM))
    return sw.generate(config.n, config.k, config.p, seed=seq)


@dataclass
class ReplicaResult:
    """Daily observables of one replica; every array has ``horizon + 1`` rows."""

    replica: int
    records: dict[str, np.ndarray]
    region_cumulative: np.ndarray
    r0: R0Series
    patient_zero: int

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.records["S"].size)

    def rows(self):
        """DailyRecord-style dicts, one per day."""
        for d in self.days:
            row = {"day": int(d)}
            row.update({f: self.records[f][d].item() for f in RECORD_FIELDS})
            row["per_region_cumulative_infections"] = self.region_cumulative[d].tolist()
            yield row


def confirmed_series(new_infectious, detection_fraction: float, diagnosis_delay: int,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Daily confirmed cases from daily infectious onsets.

    Each onset is confirmed ``diagnosis_delay`` days later with probability
    ``detection_fraction``. Without ``rng`` the expectation is returned;
    with one, each day is thinned binomially.
    """
    x = np.asarray(new_infectious)
    if np.any(x < 0):
        raise ValueError("counts must be nonnegative")
    shifted = np.zeros(x.size, dtype=x.dtype if rng is not None else float)
    if diagnosis_delay < x.size:
        shifted[diagnosis_delay:] = x[:x.size - diagnosis_delay]
    if rng is None:
        return detection_fraction * shifted.astype(float)
    return rng.binomial(shifted.astype(np.int64), detection_fraction)


def run_replica(config: SimConfig, schedule: PolicySchedule, graph: sw.Graph | None = None,
                replica_index: int = 0) -> ReplicaResult:
    """Simulate one epidemic from a single patient zero for ``config.horizon`` days.

    Day 0 is the seeding day; each later day applies the phase active on
    that day. The result depends only on ``(config.master_seed, replica_index)``.
    """
    if graph is None:
        graph = replica_graph(config, replica_index)
    elif (graph.n, graph.k) != (config.n, config.k):
        raise ValueError("graph does not match config n, k")

    rng = substream(config.master_seed, replica_index, DYNAMICS_STREAM)
    days = config.horizon + 1
    states = Population(graph.n)
    zero = seed_patient_zero(states, rng, config.incubation)

    counts = np.zeros((days, 4), dtype=np.int64)
    new_exposed = np.zeros(days, dtype=np.int64)
    components = np.zeros(days, dtype=np.int64)
    counts[0] = states.counts()
    new_exposed[0] = 1
    if config.track_components:
        components[0] = 1

    phase_idx = -1
    rates = None
    for day in range(1, days):
        idx = schedule.index_at(day)
        if idx != phase_idx:
            phase_idx = idx
            phase = schedule.phases[idx]
            checked = select_checked_edges(
                graph, phase.check_fraction, phase.check_target,
                substream(config.master_seed, replica_index, CHECK_STREAM, idx))
            rates = edge_rates(phase, graph, checked)
        exposed, _ = transmission_step(graph, states, day, rates, rng,
                                       config.incubation, config.infection)
        new_exposed[day] = exposed.size
        counts[day] = states.counts()
        if counts[day, EXPOSED] + counts[day, INFECTIOUS] == 0:
            counts[day + 1:] = counts[day]
            break
        if config.track_components:
            components[day] = active_components(graph, states)

    onset = states.day_infectious
    new_infectious = np.bincount(onset[onset != NONE], minlength=days)[:days]
    report_rng = substream(config.master_seed, replica_index, REPORTING_STREAM)
    new_confirmed = confirmed_series(new_infectious, config.detection_fraction,
                                     config.diagnosis_delay, report_rng)
    expected = confirmed_series(new_infectious, config.detection_fraction,
                                config.diagnosis_delay)

    exposed_day = states.day_exposed
    ever = exposed_day != NONE
    labels = sw.partition(graph.n, config.n_regions).labels()
    region_new = np.zeros((days, config.n_regions), dtype=np.int32)
    np.add.at(region_new, (exposed_day[ever], labels[ever]), 1)

    records = {
        "S": counts[:, 0], "E": counts[:, 1], "I": counts[:, 2], "R": counts[:, 3],
        "new_exposed": new_exposed,
        "new_infectious": new_infectious,
        "new_confirmed": new_confirmed,
        "cumulative_confirmed": np.cumsum(new_confirmed),
        "expected_new_confirmed": expected,
        "expected_cumulative_confirmed": np.cumsum(expected),
        "cumulative_infected": np.cumsum(new_exposed),
        "active_components": components,
    }
    return ReplicaResult(
        replica=replica_index,
        records=records,
        region_cumulative=np.cumsum(region_new, axis=0, dtype=np.int32),
        r0=empirical_r0(onset, states.infector, n_days=days),
        patient_zero=zero,
    )


@dataclass
class EnsembleStats:
    """Per-day cross-replica statistics.

    ``mean``, ``sd`` map a record field to a ``(horizon + 1,)`` array;
    ``bands[level][field]`` holds the ``(lower, upper)`` empirical quantiles
    of the central ``level`` band (0.98 -> 1st and 99th percentiles).
    """

    replicas: int
    mean: dict[str, np.ndarray]
    sd: dict[str, np.ndarray]
    bands: dict[float, dict[str, tuple[np.ndarray, np.ndarray]]]
    r0: R0Series
    region_cumulative: np.ndarray = field(repr=False)
    results: list[ReplicaResult] | None = field(default=None, repr=False)

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.mean["S"].size)

    def rank_profile_mean(self, day: int) -> np.ndarray:
        """Per-replica region counts at ``day``, sorted descending, averaged rank-wise."""
        ranked = -np.sort(-self.region_cumulative[:, day, :], axis=1)
        return ranked.mean(axis=0)

    def daily_r0(self, mean_infectious_days: float) -> np.ndarray:
        """Pooled per-day R0 (see :func:`metrics.daily_r0`)."""
        return daily_r0(self.mean["new_exposed"], self.mean["I"], mean_infectious_days)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"day": self.days}
        for f in RECORD_FIELDS:
            cols[f"{f}_mean"] = self.mean[f]
            cols[f"{f}_sd"] = self.sd[f]
            for level, per_field in sorted(self.bands.items()):
                lo, hi = per_field[f]
                tag = f"{level * 100:g}"
                cols[f"{f}_lo{tag}"] = lo
                cols[f"{f}_hi{tag}"] = hi
        return cols


def aggregate(results: list[ReplicaResult], levels=(0.98,), keep_results: bool = False) -> EnsembleStats:
    """Combine replica results; the outcome does not depend on their order."""
    results = sorted(results, key=lambda res: res.replica)
    mean, sd, bands = {}, {}, {float(lv): {} for lv in levels}
    for f in RECORD_FIELDS:
        stack = np.stack([res.records[f] for res in results]).astype(float)
        mean[f] = stack.mean(axis=0)
        sd[f] = stack.std(axis=0)
        for lv in bands:
            tail = (1.0 - lv) / 2
            lo, hi = np.quantile(stack, [tail, 1.0 - tail], axis=0)
            bands[lv][f] = (lo, hi)
    r0 = results[0].r0
    for res in results[1:]:
        r0 = r0 + res.r0
    return EnsembleStats(
        replicas=len(results), mean=mean, sd=sd, bands=bands, r0=r0,
        region_cumulative=np.stack([res.region_cumulative for res in results]),
        results=results if keep_results else None,
    )


def _run_one(args):
    config, schedule, index = args
    return run_replica(config, schedule, None, index)


def run_replicas(config: SimConfig, schedule: PolicySchedule, workers: int | None = None,
                 order=None) -> list[ReplicaResult]:
    indices = list(range(config.replicas)) if order is None else list(order)
    workers = workers or 1
    if workers <= 1:
        return [run_replica(config, schedule, None, i) for i in indices]
    jobs = [(config, schedule, i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def run_ensemble(config: SimConfig, schedule: PolicySchedule, levels=(0.98,),
                 workers: int | None = None, order=None, keep_results: bool = False) -> EnsembleStats:
    """Run ``config.replicas`` replicas, each on its own graph, and aggregate."""
    log.info("running %d replicas (horizon %d, %d phases)", config.replicas,
             config.horizon, len(schedule.phases))
    results = run_replicas(config, schedule, workers, order)
    return aggregate(results, levels, keep_results)
