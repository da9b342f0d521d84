import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from smallworld_seir import graph as sw
from smallworld_seir.dynamics import (EXPOSED, INFECTIOUS, RECOVERED, SUSCEPTIBLE,
                                      DurationDistribution, Population, lognormal_params,
                                      sample_duration, seed_patient_zero, transmission_step)

from conftest import star

INCUBATION = DurationDistribution(5.0, 3.0)
INFECTION = DurationDistribution(6.5, 3.0)


def ceiled_mean_oracle(dist):
    """E[ceil X] = sum_j P(X > j), from the scipy lognormal survival function."""
    law = stats.lognorm(dist.sigma, scale=math.exp(dist.mu))
    return sum(law.sf(j) for j in range(0, 5000))


@pytest.mark.parametrize("mean,sd,sigma,mu", [
    (5.0, 3.0, 0.554513, 1.455696),
    (6.5, 3.0, 0.439444, 1.775247),
])
def test_lognormal_params(mean, sd, sigma, mu):
    m, s = lognormal_params(mean, sd)
    assert s == pytest.approx(sigma, abs=1e-6)
    assert m == pytest.approx(mu, abs=1e-6)
    # moment-match identities
    assert math.exp(m + s * s / 2) == pytest.approx(mean)
    assert (math.exp(s * s) - 1) * math.exp(2 * m + s * s) == pytest.approx(sd * sd)


@pytest.mark.parametrize("mean,sd", [(5.0, 3.0), (6.5, 3.0)])
def test_lognormal_sample_moments(mean, sd, rng):
    x = DurationDistribution(mean, sd).sample_continuous(rng, 1_000_000)
    assert abs(x.mean() - mean) < 0.02
    assert abs(x.std() - sd) < 0.02


def test_lognormal_degenerate_limit():
    mu, sigma = lognormal_params(1.0, 1e-9)
    assert abs(mu) < 1e-12 and sigma < 1e-8


@pytest.mark.parametrize("mean,sd", [(0, 1), (1, 0), (-1, 1)])
def test_lognormal_rejects(mean, sd):
    with pytest.raises(ValueError):
        lognormal_params(mean, sd)


def test_sample_point_mass(rng):
    dist = DurationDistribution(5.0, 1e-12)
    assert np.all(sample_duration(dist, rng, 10_000) == 5)
    assert sample_duration(dist, rng) == 5


def test_sample_ceiled_mean(rng):
    draws = sample_duration(INCUBATION, rng, 100_000)
    assert 4.9 <= draws.mean() <= 5.6
    oracle = ceiled_mean_oracle(INCUBATION)
    assert oracle == pytest.approx(5.50014, abs=1e-4)
    assert abs(draws.mean() - oracle) < 4 * 3.01 / math.sqrt(100_000)
    assert draws.min() >= 1
    assert draws.dtype.kind == "i"


def test_seed_patient_zero(rng):
    pop = Population(1)
    assert seed_patient_zero(pop, rng, INCUBATION) == 0
    pop = Population(50)
    seed_patient_zero(pop, rng, INCUBATION)
    assert pop.counts().tolist() == [49, 1, 0, 0]
    assert pop.days_remaining[pop.compartment == EXPOSED][0] >= 1
    with pytest.raises(ValueError):
        seed_patient_zero(pop, rng, INCUBATION)


def test_seed_patient_zero_uniform(rng):
    n = 10_000
    hits = np.zeros(n)
    for _ in range(10_000):
        pop = Population(n)
        hits[seed_patient_zero(pop, rng, INCUBATION)] += 1
    assert stats.chisquare(hits).pvalue > 0.001
    # coarser check with healthy cell counts
    assert stats.chisquare(hits.reshape(100, -1).sum(axis=1)).pvalue > 0.001


def infect(pop, node, days=5, day=0):
    pop.compartment[node] = INFECTIOUS
    pop.days_remaining[node] = days
    pop.day_infectious[node] = day


def test_no_infectious_no_exposures(rng):
    g = sw.generate(100, 4, 0.1, seed=1)
    pop = Population(100)
    pop.compartment[3] = EXPOSED
    pop.days_remaining[3] = 4
    exposed, _ = transmission_step(g, pop, 1, np.ones(g.n_edges), rng, INCUBATION, INFECTION)
    assert exposed.size == 0
    assert pop.counts().tolist() == [99, 1, 0, 0]
    assert pop.days_remaining[3] == 3


def test_zero_rate_never_transmits(rng):
    g = sw.generate(100, 4, 0.1, seed=1)
    pop = Population(100)
    infect(pop, 0, days=50)
    for day in range(1, 40):
        exposed, _ = transmission_step(g, pop, day, np.zeros(g.n_edges), rng, INCUBATION, INFECTION)
        assert exposed.size == 0


def test_star_binomial(rng):
    g = star(20)
    rates = np.full(g.n_edges, 0.055)
    totals = []
    for _ in range(10_000):
        pop = Population(g.n)
        infect(pop, 0)
        exposed, infectors = transmission_step(g, pop, 1, rates, rng, INCUBATION, INFECTION)
        assert np.all(infectors == 0)
        totals.append(exposed.size)
    assert 1.04 <= np.mean(totals) <= 1.16


def test_exposed_today_not_infectious_today(rng):
    g = star(5)
    pop = Population(g.n)
    infect(pop, 0, days=10)
    exposed, _ = transmission_step(g, pop, 1, np.ones(g.n_edges), rng,
                                   DurationDistribution(1.0, 1e-12), INFECTION)
    assert sorted(exposed.tolist()) == [1, 2, 3, 4, 5]
    # one-day incubation: infectious in today's record, transmitting from tomorrow
    assert np.all(pop.day_exposed[exposed] == 1)
    assert np.all(pop.compartment[exposed] == INFECTIOUS)
    assert np.all(pop.day_infectious[exposed] == 1)


def test_lowest_id_infector_wins(rng):
    # path 0 - 1 - 2 with both ends infectious
    g = sw.from_edges(3, 2, 0.0, [0, 1], [1, 2], [False, False])
    pop = Population(3)
    infect(pop, 0)
    infect(pop, 2)
    exposed, infectors = transmission_step(g, pop, 1, np.ones(2), rng, INCUBATION, INFECTION)
    assert exposed.tolist() == [1] and infectors.tolist() == [0]
    assert pop.infector[1] == 0


def test_stage_timers(rng):
    g = sw.from_edges(2, 2, 0.0, [0], [1], [False])
    pop = Population(2)
    pop.compartment[0] = EXPOSED
    pop.days_remaining[0] = 2
    zero = np.zeros(1)
    infection = DurationDistribution(3.0, 1e-12)
    history = []
    for day in range(1, 7):
        transmission_step(g, pop, day, zero, rng, INCUBATION, infection)
        history.append(int(pop.compartment[0]))
    assert history == [EXPOSED, INFECTIOUS, INFECTIOUS, INFECTIOUS, RECOVERED, RECOVERED]
    assert pop.day_infectious[0] == 2 and pop.day_recovered[0] == 5


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), r=st.floats(0.0, 0.3))
def test_history_invariants(seed, r):
    rng = np.random.default_rng(seed)
    g = sw.generate(300, 6, 0.2, seed=seed)
    pop = Population(g.n)
    seed_patient_zero(pop, rng, INCUBATION)
    rates = np.full(g.n_edges, r)
    ever_prev = 1
    prev = pop.compartment.copy()
    for day in range(1, 80):
        transmission_step(g, pop, day, rates, rng, INCUBATION, INFECTION)
        counts = pop.counts()
        assert counts.sum() == g.n
        ever = g.n - counts[SUSCEPTIBLE]
        assert ever >= ever_prev
        ever_prev = ever
        # only forward moves, at most one stage per day except E->I on exposure day
        assert np.all(pop.compartment >= prev)
        prev = pop.compartment.copy()
    infected = np.flatnonzero(pop.infector >= 0)
    for node in infected:
        src = pop.infector[node]
        t = pop.day_exposed[node]
        assert 0 <= pop.day_infectious[src] < t
        assert pop.day_recovered[src] == -1 or pop.day_recovered[src] >= t
        assert node in g.neighbors(src)
