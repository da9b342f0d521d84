"""Piecewise-constant transmission policies and edge checking."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class CheckTarget(str, Enum):
    NONE = "none"
    RANDOM = "random"
    LONG = "long"


@dataclass(frozen=True)
class Phase:
    """Transmission regime from ``start_day`` until the next phase begins.

    ``check_fraction`` is a share of *all* edges, whichever pool the checked
    edges are drawn from.
    """

    start_day: int
    r_short: float
    r_long: float
    check_fraction: float = 0.0
    check_target: CheckTarget = CheckTarget.NONE

    def __post_init__(self):
        object.__setattr__(self, "check_target", CheckTarget(self.check_target))
        if self.start_day < 0:
            raise ValueError(f"start_day must be >= 0, got {self.start_day}")
        for name in ("r_short", "r_long", "check_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @classmethod
    def uniform(cls, start_day: int, r: float, **kwargs) -> "Phase":
        return cls(start_day, r, r, **kwargs)


@dataclass(frozen=True)
class PolicySchedule:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        phases = tuple(self.phases)
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise ValueError("a schedule needs at least one phase")
        if phases[0].start_day != 0:
            raise ValueError("the first phase must start at day 0")
        starts = [ph.start_day for ph in phases]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"phase start days must be strictly increasing, got {starts}")

    @classmethod
    def constant(cls, r: float) -> "PolicySchedule":
        return cls((Phase.uniform(0, r),))

    @property
    def starts(self) -> list[int]:
        return [ph.start_day for ph in self.phases]

    def index_at(self, day: int) -> int:
        if day < 0:
            raise ValueError(f"day must be >= 0, got {day}")
        return bisect.bisect_right(self.starts, day) - 1

    def phase_at(self, day: int) -> Phase:
        return self.phases[self.index_at(day)]

    def with_phase(self, index: int, **changes) -> "PolicySchedule":
        phases = list(self.phases)
        phases[index] = replace(phases[index], **changes)
        return PolicySchedule(tuple(phases))

    def scaled(self, factor: float) -> "PolicySchedule":
        """Multiply every transmission probability by ``factor``."""
        return PolicySchedule(tuple(
            replace(ph, r_short=ph.r_short * factor, r_long=ph.r_long * factor)
            for ph in self.phases))


def phase_at(schedule: PolicySchedule, day: int) -> Phase:
    return schedule.phase_at(day)


def select_checked_edges(graph, fraction: float, target, rng: np.random.Generator) -> np.ndarray:
    """Pick the edge ids that are checked during a phase.

    ``round(fraction * n_edges)`` edges are sampled without replacement,
    either from all edges or only from long ones (capped at the number of
    long edges). Returns sorted edge ids.
    """
    target = CheckTarget(target)
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    count = int(round(fraction * graph.n_edges))
    if target is CheckTarget.NONE or count == 0:
        return np.empty(0, dtype=np.int64)
    pool = np.arange(graph.n_edges) if target is CheckTarget.RANDOM else np.flatnonzero(graph.long)
    count = min(count, pool.size)
    return np.sort(rng.choice(pool, size=count, replace=False))


def edge_rate(phase: Phase, kind_is_long: bool, checked: bool) -> float:
    if checked:
        return 0.0
    return phase.r_long if kind_is_long else phase.r_short


def edge_rates(phase: Phase, graph, checked: np.ndarray | None = None) -> np.ndarray:
    """Vectorised :func:`edge_rate` over every edge of ``graph``."""
    rates = np.where(graph.long, phase.r_long, phase.r_short)
    if checked is not None and len(checked):
        rates[checked] = 0.0
    return rates
