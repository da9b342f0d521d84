"""CSV and JSON writers for simulation results."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .engine import RECORD_FIELDS, EnsembleStats, ReplicaResult
from .metrics import SMOOTHING_WINDOW, phase_means, ranked_units, theoretical_r0, wave_peaks


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows, cfg: ScenarioConfig) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# smallworld-seir {__version__} scenario={cfg.name} master_seed={cfg.sim.master_seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def snapshot_day(cfg: ScenarioConfig) -> int:
    day = cfg.snapshot_day if cfg.snapshot_day is not None else cfg.sim.horizon
    return min(day, cfg.sim.horizon)


def summary(cfg: ScenarioConfig, stats: EnsembleStats) -> dict:
    starts = cfg.schedule.starts
    daily = stats.daily_r0(cfg.sim.infection.mean)
    out = {
        "scenario": cfg.name,
        "master_seed": cfg.sim.master_seed,
        "replicas": stats.replicas,
        "horizon": cfg.sim.horizon,
        "phases": [],
    }
    means = phase_means(daily, starts)
    cohorts = stats.r0.phase_averages(starts)
    for ph, r_daily, r_cohort in zip(cfg.schedule.phases, means, cohorts):
        out["phases"].append({
            "start_day": ph.start_day, "r_short": ph.r_short, "r_long": ph.r_long,
            "check_fraction": ph.check_fraction, "check_target": ph.check_target.value,
            "theoretical_r0": theoretical_r0(ph.r_short, cfg.sim.k, cfg.sim.infection.mean),
            "r0_daily_mean": r_daily, "r0_cohort_mean": r_cohort,
        })
    split = cfg.split_day
    if split is not None and 0 < split < stats.days.size:
        wp = wave_peaks(stats.mean["new_infectious"], split, window=SMOOTHING_WINDOW)
        out["wave_peaks"] = {"split_day": split, "first": wp.first, "first_day": wp.first_day,
                             "second": wp.second, "second_day": wp.second_day}
        out["post_split_components_mean"] = float(stats.mean["active_components"][split:].mean())
    out["final_cumulative_infected_mean"] = float(stats.mean["cumulative_infected"][-1])
    out["final_cumulative_confirmed_mean"] = float(stats.mean["expected_cumulative_confirmed"][-1])
    return out


def write_results(out_dir, cfg: ScenarioConfig, stats: EnsembleStats, per_replica: bool = False) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    days = stats.days

    cols = stats.columns()
    cols["daily_r0"] = stats.daily_r0(cfg.sim.infection.mean)
    header = list(cols)
    write_csv(out_dir / "aggregate.csv", header,
              zip(*(cols[h] for h in header)), cfg)

    phase_of = [cfg.schedule.index_at(int(d)) for d in days]
    daily = cols["daily_r0"]
    r0 = stats.r0
    write_csv(out_dir / "r0.csv",
              ["day", "phase", "cohort_infectors", "cohort_secondary", "cohort_r0", "daily_r0"],
              ((int(d), phase_of[d], int(r0.infectors[d]), float(r0.secondary[d]),
                r0.cohort(int(d)), daily[d]) for d in days), cfg)

    comp_header = ["day", "mean", "sd"]
    comp_cols = [stats.mean["active_components"], stats.sd["active_components"]]
    for level, per_field in sorted(stats.bands.items()):
        lo, hi = per_field["active_components"]
        comp_header += [f"lo{level * 100:g}", f"hi{level * 100:g}"]
        comp_cols += [lo, hi]
    write_csv(out_dir / "components.csv", comp_header,
              ((int(d), *(c[d] for c in comp_cols)) for d in days), cfg)

    snap = snapshot_day(cfg)
    profile = stats.rank_profile_mean(snap)
    top = profile[0] if profile.size and profile[0] > 0 else 1.0
    write_csv(out_dir / "regions.csv", ["rank", "day", "mean_cumulative", "normalized"],
              ((i + 1, snap, float(v), float(v / top)) for i, v in enumerate(profile) if v > 0), cfg)

    if per_replica and stats.results:
        rep_dir = out_dir / "replicas"
        rep_dir.mkdir(exist_ok=True)
        for res in stats.results:
            write_replica(rep_dir, cfg, res, snap)

    info = summary(cfg, stats)
    (out_dir / "summary.json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return info


def write_replica(rep_dir, cfg: ScenarioConfig, res: ReplicaResult, snap: int) -> None:
    rep_dir = Path(rep_dir)
    header = ["day", *RECORD_FIELDS]
    write_csv(rep_dir / f"replica_{res.replica:04d}.csv", header,
              ((int(d), *(res.records[f][d] for f in RECORD_FIELDS)) for d in res.days), cfg)
    counts = res.region_cumulative[snap]
    rows = ranked_units(counts) if counts.max() > 0 else []
    write_csv(rep_dir / f"regions_{res.replica:04d}.csv",
              ["rank", "region", "cumulative", "normalized"],
              ((rank, unit, int(counts[unit]), value) for rank, unit, value in rows), cfg)
