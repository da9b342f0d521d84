"""Command-line interface: simulate, calibrate, sweep, graph-dump."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import graph as sw
from .calibration import DataError, fit_phase_r, load_case_series
from .config import ConfigError, ScenarioConfig, dumps, load, scenario_path, with_overrides
from .engine import default_workers, replica_graph, run_ensemble
from .output import write_results

log = logging.getLogger("smallworld_seir")

SWEEP_FIELDS = ("r", "r_short", "r_long", "check_fraction", "check_target", "start")


class UsageError(ValueError):
    pass


def _quantiles(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None
    if not values or any(not 0 < v < 1 for v in values):
        raise argparse.ArgumentTypeError("quantile band levels must lie in (0, 1)")
    return values


def _bounds(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bounds must look like 'lo,hi', got {text!r}") from None
    return lo, hi


def _scenario(args) -> ScenarioConfig:
    path = Path(args.config)
    if not path.exists() and path.suffix != ".ini":
        path = scenario_path(args.config)
    cfg = load(path)
    return with_overrides(cfg, seed=args.seed, replicas=args.replicas, quantiles=args.quantiles)


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    stats = run_ensemble(cfg.sim, cfg.schedule, levels=cfg.quantiles, workers=args.workers,
                         keep_results=args.per_replica)
    info = write_results(args.out, cfg, stats, per_replica=args.per_replica)
    (Path(args.out) / "scenario.ini").write_text(dumps(cfg))
    log.info("wrote results for %s to %s", cfg.name, args.out)
    if "wave_peaks" in info:
        wp = info["wave_peaks"]
        print(f"{cfg.name}: first peak {wp['first']:.2f} (day {wp['first_day']}), "
              f"second peak {wp['second']:.2f} (day {wp['second_day']})")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _scenario(args)
    observed = load_case_series(args.data)
    result = fit_phase_r(observed, cfg, args.phase, args.bounds, workers=args.workers)
    text = result.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "calibration.json").write_text(text + "\n")
    print(text)
    return 0


def parse_sweep_spec(spec: str, cfg: ScenarioConfig) -> tuple[int, str, list[str]]:
    """``[phase.N.]field=v1,v2,...`` -> (phase index, field, raw values)."""
    if "=" not in spec:
        raise UsageError(f"sweep spec must look like 'field=v1,v2', got {spec!r}")
    target, raw = spec.split("=", 1)
    parts = target.strip().split(".")
    if len(parts) == 3 and parts[0] == "phase":
        try:
            index = int(parts[1])
        except ValueError:
            raise UsageError(f"bad phase index in {target!r}") from None
        name = parts[2]
    elif len(parts) == 1:
        index, name = len(cfg.schedule.phases) - 1, parts[0]
    else:
        raise UsageError(f"unknown sweep field {target!r}")
    if name not in SWEEP_FIELDS:
        raise UsageError(f"unknown sweep field {name!r}; choose from {', '.join(SWEEP_FIELDS)}")
    if not 0 <= index < len(cfg.schedule.phases):
        raise UsageError(f"phase index {index} out of range")
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise UsageError("sweep needs at least one value")
    return index, name, values


def apply_sweep_value(cfg: ScenarioConfig, index: int, name: str, raw: str) -> ScenarioConfig:
    if name == "r":
        changes = {"r_short": float(raw), "r_long": float(raw)}
    elif name == "check_target":
        changes = {"check_target": raw}
    elif name == "start":
        changes = {"start_day": int(raw)}
    else:
        changes = {name: float(raw)}
    return replace(cfg, schedule=cfg.schedule.with_phase(index, **changes))


def cmd_sweep(args) -> int:
    base = _scenario(args)
    index, name, values = parse_sweep_spec(args.param, base)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for raw in values:
        try:
            cfg = apply_sweep_value(base, index, name, raw)
        except ValueError as exc:
            raise UsageError(f"bad value {raw!r} for {name}: {exc}") from None
        cfg = replace(cfg, name=f"{base.name}-{name}={raw}")
        stats = run_ensemble(cfg.sim, cfg.schedule, levels=cfg.quantiles, workers=args.workers)
        info = write_results(out / f"{name}={raw}", cfg, stats)
        wp = info.get("wave_peaks", {})
        rows.append([raw, wp.get("first"), wp.get("first_day"), wp.get("second"),
                     wp.get("second_day"), info.get("post_split_components_mean"),
                     info["final_cumulative_infected_mean"]])
        log.info("%s=%s done", name, raw)
    with (out / "summary.csv").open("w", newline="") as fh:
        fh.write(f"# smallworld-seir {__version__} scenario={base.name} "
                 f"master_seed={base.sim.master_seed} sweep=phase.{index}.{name}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name, "first_peak", "first_day", "second_peak", "second_day",
                         "post_components_mean", "final_cumulative_infected"])
        writer.writerows([["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row]
                          for row in rows])
    for row in rows:
        print(f"{name}={row[0]}: first {row[1]:.2f} second {row[3]:.2f}"
              if row[1] is not None else f"{name}={row[0]}: no split")
    return 0


def cmd_graph_dump(args) -> int:
    if args.config:
        cfg = _scenario(args)
        graph = replica_graph(cfg.sim, args.replica)
        graph = replace(graph, seed=cfg.sim.master_seed)
    else:
        seed = args.seed if args.seed is not None else 0
        graph = sw.generate(args.n, args.k, args.p, seed=seed)
    sw.dump(graph, args.out)
    print(f"{graph.n_edges} edges ({graph.n_long} long) -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smallworld-seir",
                                     description="SEIR epidemics on small-world networks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario .ini file or bundled scenario name")
        p.add_argument("--seed", type=int, help="override run.master_seed")
        p.add_argument("--replicas", type=int, help="override run.replicas")
        p.add_argument("--workers", type=int, default=default_workers())
        p.add_argument("--quantiles", type=_quantiles, help="band levels, e.g. 0.68,0.98")

    p = sub.add_parser("simulate", help="run an ensemble and write CSV outputs")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--per-replica", action="store_true", help="also write one file per replica")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit one phase's r to observed cases")
    common(p)
    p.add_argument("--data", required=True, help="CSV with columns date,new_cases")
    p.add_argument("--phase", type=int, required=True)
    p.add_argument("--bounds", type=_bounds, default=(0.0005, 0.1))
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="vary one schedule field")
    common(p)
    p.add_argument("--param", required=True, help="[phase.N.]field=v1,v2,...")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("graph-dump", help="write a generated graph as an edge list")
    common(p, config_required=False)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_graph_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"error: value: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
