"""Desk-scale acceptance checks (n=10000, k=20, p=0.1, 200 replicas).

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Expect several minutes of runtime on one core.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate, stats as sps

from smallworld_seir import cli
from smallworld_seir.calibration import CaseSeries, fit_phase_r
from smallworld_seir.config import CalibrationOptions, bundled, scenario_path
from smallworld_seir.dynamics import DurationDistribution, sample_duration
from smallworld_seir.engine import RECORD_FIELDS, run_ensemble
from smallworld_seir.metrics import SMOOTHING_WINDOW, phase_means, theoretical_r0, wave_peaks

pytestmark = pytest.mark.slow

REPLICAS = 200
R0_TOL = 0.15
_cache = {}


def ensemble(name, track_components=False, **phase_changes):
    """Ensemble statistics for a bundled scenario, optionally editing its last phase."""
    key = (name, track_components, tuple(sorted(phase_changes.items())))
    if key not in _cache:
        cfg = bundled(name)
        sim = replace(cfg.sim, replicas=REPLICAS, track_components=track_components)
        schedule = cfg.schedule
        if phase_changes:
            schedule = schedule.with_phase(len(schedule.phases) - 1, **phase_changes)
        _cache[key] = (replace(cfg, sim=sim, schedule=schedule),
                       run_ensemble(sim, schedule, levels=cfg.quantiles))
    return _cache[key]


def phase_r0(name):
    cfg, stats = ensemble(name)
    daily = stats.daily_r0(cfg.sim.infection.mean)
    return phase_means(daily, cfg.schedule.starts), stats.r0.phase_averages(cfg.schedule.starts)


def check_r0(criterion, number, name, targets):
    daily, cohort = phase_r0(name)
    ok = all(abs(v - t) <= R0_TOL * t for v, t in zip(daily, targets))
    detail = ", ".join(f"{v:.3f} (target {t}, +/-15%)" for v, t in zip(daily, targets))
    detail += " | cohort estimator: " + ", ".join(f"{v:.3f}" for v in cohort)
    criterion(number, f"{name} phase R0", ok, detail)


def peaks(name, **changes):
    cfg, stats = ensemble(name, **changes)
    return wave_peaks(stats.mean["new_infectious"], cfg.lift_day, window=SMOOTHING_WINDOW)


def fmt(wp):
    return f"first {wp.first:.1f}@{wp.first_day}, second {wp.second:.1f}@{wp.second_day}"


def test_c01_theoretical_r0(criterion):
    value = theoretical_r0(0.055, 20, 6.5)
    criterion(1, "theoretical R0", value == 7.15, f"{value!r} == 7.15")


def test_c02_wuhan(criterion):
    check_r0(criterion, 2, "wuhan", (3.9, 0.54, 0.12))


def test_c03_italy(criterion):
    check_r0(criterion, 3, "italy", (4.0, 0.84))


def test_c04_austria(criterion):
    check_r0(criterion, 4, "austria", (4.2, 0.55))


def test_c05_fig8_edge_checking(criterion):
    long_ = peaks("fig8b")
    random_ = peaks("fig8a")
    ok = long_.second < long_.first and random_.second > random_.first
    criterion(5, "7.5% checking: long edges below first peak, random edges above", ok,
              f"long: {fmt(long_)}; random: {fmt(random_)}")


def test_c05_supplement_check_fraction_sweep(criterion):
    fractions = (0.0, 0.025, 0.05, 0.075, 0.1)
    second = [peaks("fig8b", check_fraction=f).second for f in fractions]
    ok = all(b <= a for a, b in zip(second, second[1:]))
    criterion("5s", "second peak nonincreasing in long-edge check fraction", ok,
              ", ".join(f"{f}: {s:.1f}" for f, s in zip(fractions, second)))


def test_c06_fig9_strategies(criterion):
    a = peaks("fig9a")
    b = {rl: peaks("fig9b", r_long=rl) for rl in (0.0, 0.005, 0.01, 0.02)}
    c = peaks("fig9c")
    ok_a = a.second > a.first
    ok_b = b[0.0].second < b[0.0].first and all(b[rl].second > b[rl].first for rl in b if rl > 0)
    ok_c = c.second < c.first
    detail = (f"(a) {fmt(a)}; (b) " + "; ".join(f"r_long={rl}: {fmt(wp)}" for rl, wp in b.items())
              + f"; (c) {fmt(c)}")
    criterion(6, "reopening strategies", ok_a and ok_b and ok_c, detail)


def test_c07_fig10_components(criterion):
    results = {}
    for name in ("fig10-top", "fig10-bottom"):
        cfg, stats = ensemble(name, track_components=True)
        results[name] = stats.mean["active_components"][cfg.lift_day:].mean()
    small = {}
    for name in ("fig10-small-top", "fig10-small-bottom"):
        cfg, stats = ensemble(name, track_components=True)
        comps = stats.mean["active_components"][1:]
        infected = stats.mean["cumulative_infected"][[25, 50, 75, 100]]
        small[name] = (comps.mean(), infected)
    ok_desk = results["fig10-bottom"] < results["fig10-top"]
    ok_small = (small["fig10-small-bottom"][0] < small["fig10-small-top"][0]
                and np.all(small["fig10-small-bottom"][1][:2] < small["fig10-small-top"][1][:2]))
    detail = (f"post-lift mean components r_long=0.055: {results['fig10-top']:.2f}, "
              f"r_long=0: {results['fig10-bottom']:.2f}; n=150 mean components "
              f"{small['fig10-small-top'][0]:.2f} vs {small['fig10-small-bottom'][0]:.2f}, "
              f"infected at days 25/50/75/100 {np.round(small['fig10-small-top'][1], 1).tolist()} vs "
              f"{np.round(small['fig10-small-bottom'][1], 1).tolist()}")
    criterion(7, "long-range shutdown keeps outbreaks in fewer components", ok_desk and ok_small, detail)


def test_c08_rank_profile(criterion):
    cfg, stats = ensemble("fig6-regions")
    day = cfg.snapshot_day
    mean_profile = stats.rank_profile_mean(day)
    prof = mean_profile / mean_profile[0]
    top = prof[:50]
    log_top = np.log(top)
    monotone = bool(np.all(np.diff(prof) <= 0))
    second_diff = np.diff(log_top, 2)
    convex = bool(second_diff.min() >= -0.02)
    slope, intercept = np.polyfit(np.arange(50), log_top, 1)
    fitted = slope * np.arange(50) + intercept
    r2 = 1 - np.sum((log_top - fitted) ** 2) / np.sum((log_top - log_top.mean()) ** 2)
    ok = monotone and convex and slope < 0 and r2 >= 0.9
    criterion(8, "rank profile at day 60", ok,
              f"monotone={monotone}, min second difference of log profile {second_diff.min():.4f} "
              f"(>= -0.02), log-linear fit slope {slope:.4f}, R^2 {r2:.3f} (>= 0.9)")


def _quadrature_ceiled_mean(dist):
    law = sps.lognorm(dist.sigma, scale=math.exp(dist.mu))
    total = 0.0
    for j in range(1, 200):
        total += j * integrate.quad(law.pdf, j - 1, j)[0]
    return total


def test_c09_sampler_moments(criterion):
    rng = np.random.default_rng(2024)
    parts, ok = [], True
    for dist in (DurationDistribution(5.0, 3.0), DurationDistribution(6.5, 3.0)):
        cont = dist.sample_continuous(rng, 1_000_000)
        mean_err = abs(cont.mean() - dist.mean) / dist.mean
        sd_err = abs(cont.std() - dist.sd) / dist.sd
        ceiled = sample_duration(dist, rng, 1_000_000).mean()
        oracle = _quadrature_ceiled_mean(dist)
        ok &= mean_err <= 0.01 and sd_err <= 0.01 and abs(ceiled - oracle) <= 0.01
        ok &= 0 < oracle - dist.mean < 1
        parts.append(f"({dist.mean},{dist.sd}): mean err {mean_err:.4%}, sd err {sd_err:.4%}, "
                     f"ceiled {ceiled:.4f} vs quadrature {oracle:.4f}")
    criterion(9, "lognormal samplers", ok, "; ".join(parts))


def test_c10_determinism(criterion, tmp_path):
    args = ["simulate", "--config", str(scenario_path("austria")), "--replicas", str(REPLICAS)]
    for name in ("a", "b"):
        assert cli.main(args + ["--out", str(tmp_path / name)]) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    identical = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    cfg = bundled("austria")
    sim = replace(cfg.sim, replicas=REPLICAS)
    forward = run_ensemble(sim, cfg.schedule)
    backward = run_ensemble(sim, cfg.schedule, order=np.random.default_rng(0).permutation(REPLICAS))
    same = all(np.array_equal(forward.mean[f], backward.mean[f]) and
               np.array_equal(forward.sd[f], backward.sd[f]) for f in RECORD_FIELDS)
    criterion(10, "determinism", identical and same,
              f"{len(files)} output files byte-identical={identical}; permuted replica order identical={same}")


def test_c11_calibration_self_consistency(criterion):
    cfg = bundled("italy")
    r_star = 0.01
    truth = replace(cfg, sim=replace(cfg.sim, master_seed=cfg.sim.master_seed + 1000,
                                     track_components=False),
                    schedule=cfg.schedule.with_phase(1, r_short=r_star, r_long=r_star))
    stats = run_ensemble(replace(truth.sim, replicas=REPLICAS), truth.schedule)
    observed = CaseSeries.from_counts(cfg.start_date, stats.mean["expected_new_confirmed"], "synthetic")
    options = CalibrationOptions(search_replicas=50, final_replicas=REPLICAS)
    result = fit_phase_r(observed, cfg, 1, (0.001, 0.1), options)
    ok = abs(result.r - r_star) <= 0.2 * r_star
    criterion(11, "calibration recovers r*=0.01", ok,
              f"fitted r={result.r:.5f} (+/-20%), loss {result.loss:.2f}, {len(result.trace)} candidates")
