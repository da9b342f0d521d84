"""SEIR node states, stage durations and the daily transmission rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUSCEPTIBLE = 0
EXPOSED = 1
INFECTIOUS = 2
RECOVERED = 3
COMPARTMENTS = ("S", "E", "I", "R")
NONE = -1


def lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    """Log-scale ``(mu, sigma)`` of the lognormal with the given mean and sd."""
    if mean <= 0 or sd <= 0:
        raise ValueError(f"mean and sd must be positive, got mean={mean}, sd={sd}")
    sigma2 = math.log1p((sd / mean) ** 2)
    return math.log(mean) - sigma2 / 2, math.sqrt(sigma2)


@dataclass(frozen=True)
class DurationDistribution:
    """Lognormal stage duration, moment-matched to ``mean`` and ``sd`` (days)."""

    mean: float
    sd: float

    def __post_init__(self):
        lognormal_params(self.mean, self.sd)

    @property
    def mu(self) -> float:
        return lognormal_params(self.mean, self.sd)[0]

    @property
    def sigma(self) -> float:
        return lognormal_params(self.mean, self.sd)[1]

    def sample_continuous(self, rng: np.random.Generator, size=None):
        mu, sigma = lognormal_params(self.mean, self.sd)
        return rng.lognormal(mu, sigma, size)

    def sample(self, rng: np.random.Generator, size=None):
        """Whole-day durations: continuous draw rounded up, at least 1."""
        return sample_duration(self, rng, size)


def sample_duration(dist: DurationDistribution, rng: np.random.Generator, size=None):
    # tolerance keeps point masses at whole days from being bumped up by rounding noise
    x = np.maximum(np.ceil(dist.sample_continuous(rng, size) - 1e-9), 1)
    if size is None:
        return int(x)
    return x.astype(np.int32)


class Population:
    """Per-node SEIR state for one replica.

    ``days_remaining`` counts down the current E or I stage. Day stamps are
    ``-1`` until the event happens; ``infector`` is ``-1`` for patient zero
    and for nodes never infected.
    """

    def __init__(self, n: int):
        self.n = n
        self.compartment = np.zeros(n, dtype=np.int8)
        self.days_remaining = np.zeros(n, dtype=np.int32)
        self.day_exposed = np.full(n, NONE, dtype=np.int32)
        self.day_infectious = np.full(n, NONE, dtype=np.int32)
        self.day_recovered = np.full(n, NONE, dtype=np.int32)
        self.infector = np.full(n, NONE, dtype=np.int32)

    def counts(self) -> np.ndarray:
        return np.bincount(self.compartment, minlength=4)

    def active(self) -> np.ndarray:
        """Boolean mask of Exposed or Infectious nodes."""
        return (self.compartment == EXPOSED) | (self.compartment == INFECTIOUS)


def seed_patient_zero(states: Population, rng: np.random.Generator,
                      incubation: DurationDistribution, day: int = 0) -> int:
    """Expose one uniformly chosen node; returns its id."""
    if np.any(states.compartment != SUSCEPTIBLE):
        raise ValueError("patient zero can only be seeded into a fully susceptible population")
    node = int(rng.integers(states.n))
    states.compartment[node] = EXPOSED
    states.days_remaining[node] = sample_duration(incubation, rng)
    states.day_exposed[node] = day
    return node


def _gather(indptr: np.ndarray, nodes: np.ndarray):
    """Flat CSR positions of all adjacency entries of ``nodes``, in order."""
    starts = indptr[nodes]
    lens = indptr[nodes + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), lens
    offsets = np.repeat(starts - np.cumsum(lens) + lens, lens)
    return offsets + np.arange(total), lens


def transmission_step(graph, states: Population, day: int, edge_rate: np.ndarray,
                      rng: np.random.Generator, incubation: DurationDistribution,
                      infection: DurationDistribution):
    """Advance ``states`` by one day.

    Infection attempts run first on start-of-day compartments: every
    Infectious-Susceptible edge transmits with probability ``edge_rate[e]``.
    A node hit by several infectors records the lowest-id one. Timers then
    tick down (I before E, so a node entering I today is not also aged), and
    nodes reaching zero move E->I or I->R.

    Returns:
        ``(exposed, infectors)`` arrays for the exposures made today.
    """
    comp = states.compartment
    infectious = np.flatnonzero(comp == INFECTIOUS)

    exposed = np.empty(0, dtype=np.int64)
    infectors = np.empty(0, dtype=np.int64)
    if infectious.size:
        pos, lens = _gather(graph.indptr, infectious)
        targets = graph.nbr[pos]
        open_ = comp[targets] == SUSCEPTIBLE
        pos, targets = pos[open_], targets[open_]
        sources = np.repeat(infectious, lens)[open_]
        hit = rng.random(targets.size) < edge_rate[graph.eid[pos]]
        if hit.any():
            exposed, first = np.unique(targets[hit], return_index=True)
            infectors = sources[hit][first]

    # timers: I first so that nodes promoted from E keep their fresh duration
    ending = np.flatnonzero(comp == INFECTIOUS)
    states.days_remaining[ending] -= 1
    done = ending[states.days_remaining[ending] <= 0]
    comp[done] = RECOVERED
    states.day_recovered[done] = day

    if exposed.size:
        comp[exposed] = EXPOSED
        states.days_remaining[exposed] = sample_duration(incubation, rng, exposed.size)
        states.day_exposed[exposed] = day
        states.infector[exposed] = infectors

    latent = np.flatnonzero(comp == EXPOSED)
    states.days_remaining[latent] -= 1
    onset = latent[states.days_remaining[latent] <= 0]
    if onset.size:
        comp[onset] = INFECTIOUS
        states.days_remaining[onset] = sample_duration(infection, rng, onset.size)
        states.day_infectious[onset] = day

    return exposed, infectors
