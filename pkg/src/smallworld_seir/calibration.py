"""Fitting per-phase transmission probabilities to confirmed-case data."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import CalibrationOptions, ScenarioConfig
from .engine import run_ensemble

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass
class CaseSeries:
    """Gap-free daily confirmed cases; ``filled`` marks days absent from the source."""

    label: str
    start: dt.date
    new_cases: np.ndarray
    filled: np.ndarray

    @property
    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(self.new_cases.size)]

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=self.new_cases.size - 1)

    @classmethod
    def from_counts(cls, start: dt.date, counts, label: str = "series") -> "CaseSeries":
        counts = np.asarray(counts, dtype=float)
        if np.any(counts < 0):
            raise DataError("case counts must be nonnegative")
        return cls(label, start, counts, np.zeros(counts.size, dtype=bool))


def load_case_series(path, label: str | None = None) -> CaseSeries:
    """Read a ``date,new_cases`` CSV (ISO dates, strictly increasing).

    Missing days are filled with zero and flagged in ``filled``.
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot read data file: {exc.strerror}") from exc
    rows = []
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["date", "new_cases"]:
            raise DataError(f"{path}: row 1: expected header 'date,new_cases'")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise DataError(f"{path}: row {lineno}: expected 2 columns")
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}: row {lineno}: malformed date {row[0]!r}") from None
            try:
                value = float(row[1])
            except ValueError:
                raise DataError(f"{path}: row {lineno}: malformed count {row[1]!r}") from None
            if value < 0:
                raise DataError(f"{path}: row {lineno}: negative count")
            if rows and day <= rows[-1][0]:
                raise DataError(f"{path}: row {lineno}: dates must be strictly increasing")
            rows.append((day, value))
    if not rows:
        raise DataError(f"{path}: no data rows")
    start = rows[0][0]
    size = (rows[-1][0] - start).days + 1
    counts = np.zeros(size)
    filled = np.ones(size, dtype=bool)
    for day, value in rows:
        i = (day - start).days
        counts[i] = value
        filled[i] = False
    return CaseSeries(label or path.stem, start, counts, filled)


def loss(simulated, observed, log1p: bool = False) -> float:
    """Root-mean-square error between two aligned cumulative series."""
    sim = np.asarray(simulated, dtype=float)
    obs = np.asarray(observed, dtype=float)
    if sim.shape != obs.shape:
        raise ValueError(f"length mismatch: {sim.shape} vs {obs.shape}")
    if sim.size == 0:
        raise ValueError("empty series")
    if log1p:
        sim, obs = np.log1p(sim), np.log1p(obs)
    return float(np.sqrt(np.mean((sim - obs) ** 2)))


@dataclass
class CalibrationResult:
    phase_index: int
    r: float
    rates: list[tuple[float, float]]
    loss: float
    replicas: int
    search_replicas: int
    trace: list[tuple[float, float]] = field(default_factory=list)
    bounds: tuple[float, float] = (0.0, 1.0)
    day_range: tuple[int, int] = (0, 0)

    def to_json(self) -> str:
        return json.dumps({
            "phase_index": self.phase_index,
            "fitted_r": self.r,
            "rates": [{"r_short": a, "r_long": b} for a, b in self.rates],
            "loss": self.loss,
            "replicas": self.replicas,
            "search_replicas": self.search_replicas,
            "bounds": list(self.bounds),
            "day_range": list(self.day_range),
            "trace": [{"r": r, "loss": v} for r, v in self.trace],
        }, indent=2)


class _Objective:
    """Loss of one candidate r for a fixed phase window."""

    def __init__(self, observed: CaseSeries, scenario: ScenarioConfig, phase_index: int,
                 options: CalibrationOptions, workers: int | None):
        if scenario.start_date is None:
            raise ValueError("calibration needs a scenario start_date")
        self.scenario = scenario
        self.phase_index = phase_index
        self.options = options
        self.workers = workers

        phases = scenario.schedule.phases
        first = phases[phase_index].start_day
        nxt = phases[phase_index + 1].start_day if phase_index + 1 < len(phases) else None
        offset = (observed.start - scenario.start_date).days
        obs_first, obs_last = offset, offset + observed.new_cases.size - 1
        lo = max(first, obs_first, 0)
        hi = min(nxt - 1 if nxt is not None else obs_last, obs_last)
        if hi < lo:
            raise ValueError(
                f"observed data ({observed.start} to {observed.end}) does not overlap phase "
                f"{phase_index} (days {first} to {'end' if nxt is None else nxt - 1})")
        self.day_range = (lo, hi)
        self.horizon = hi

        keep = np.ones(hi + 1, dtype=bool)
        for day in options.exclude_dates:
            d = (day - scenario.start_date).days
            if 0 <= d <= hi:
                keep[d] = False
        self.keep = keep

        daily = np.zeros(hi + 1)
        if offset >= 0:
            n_copy = min(observed.new_cases.size, hi + 1 - offset)
            daily[offset:offset + n_copy] = observed.new_cases[:n_copy]
            base = 0.0
        else:
            # cases reported before the seeding day enter as a constant base
            base = float(observed.new_cases[:-offset].sum())
            n_copy = min(observed.new_cases.size + offset, hi + 1)
            daily[:n_copy] = observed.new_cases[-offset:-offset + n_copy]
        self.observed_cum = base + np.cumsum(np.where(keep, daily, 0.0))
        window = np.arange(hi + 1)
        self.mask = (window >= lo) & keep

    def simulate(self, r: float, replicas: int) -> np.ndarray:
        schedule = self.scenario.schedule.with_phase(self.phase_index, r_short=r, r_long=r)
        sim = replace(self.scenario.sim, horizon=self.horizon, replicas=replicas,
                      track_components=False)
        stats = run_ensemble(sim, schedule, workers=self.workers)
        daily = stats.mean["expected_new_confirmed"]
        return np.cumsum(np.where(self.keep, daily, 0.0))

    def __call__(self, r: float, replicas: int) -> float:
        sim_cum = self.simulate(r, replicas)
        return loss(sim_cum[self.mask], self.observed_cum[self.mask], self.options.log_loss)


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    if lo > 0:
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def fit_phase_r(observed: CaseSeries, scenario: ScenarioConfig, phase_index: int,
                bounds: tuple[float, float], options: CalibrationOptions | None = None,
                workers: int | None = None) -> CalibrationResult:
    """Grid-search the transmission probability of one phase.

    Earlier phases keep the values in ``scenario.schedule``. The search
    compares ensemble-mean expected cumulative confirmed cases with the
    observed cumulative series over the part of the phase covered by data.
    A log-spaced coarse grid is followed by one finer grid between the
    neighbours of the best coarse point. Every candidate uses the scenario's
    master seed, so candidates share random streams.
    """
    lo, hi = bounds
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"bounds must satisfy 0 <= lo < hi <= 1, got {bounds}")
    if not 0 <= phase_index < len(scenario.schedule.phases):
        raise ValueError(f"phase index {phase_index} out of range")
    options = options or scenario.calibration
    objective = _Objective(observed, scenario, phase_index, options, workers)

    trace: dict[float, float] = {}

    def evaluate(values):
        for r in values:
            r = float(r)
            if r not in trace:
                trace[r] = objective(r, options.search_replicas)
                log.info("phase %d r=%.6g loss=%.6g", phase_index, r, trace[r])

    coarse = _grid(lo, hi, options.grid_points)
    evaluate(coarse)
    best = int(np.argmin([trace[float(r)] for r in coarse]))
    a = coarse[max(best - 1, 0)]
    b = coarse[min(best + 1, coarse.size - 1)]
    evaluate(_grid(a, b, options.refine_points))

    r_best = min(trace, key=lambda r: (trace[r], r))
    final = objective(r_best, options.final_replicas)
    schedule = scenario.schedule.with_phase(phase_index, r_short=r_best, r_long=r_best)
    return CalibrationResult(
        phase_index=phase_index,
        r=r_best,
        rates=[(ph.r_short, ph.r_long) for ph in schedule.phases],
        loss=final,
        replicas=options.final_replicas,
        search_replicas=options.search_replicas,
        trace=sorted(trace.items()),
        bounds=(lo, hi),
        day_range=objective.day_range,
    )
