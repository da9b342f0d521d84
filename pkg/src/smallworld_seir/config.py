"""Scenario files: INI-style key/value blocks.

A scenario looks like::

    [scenario]
    name = italy
    start_date = 2020-01-31

    [graph]
    n = 10000
    k = 20
    p = 0.1

    [phase.0]
    start = 0
    r_short = 0.055
    r_long = 0.055

    [phase.1]
    start = 2020-03-09
    r_short = 0.01
    r_long = 0.01

Phase starts may be day offsets or ISO dates (when ``start_date`` is set).
Omitted keys take the defaults below. Validation errors name the file line.
"""

from __future__ import annotations

import configparser
import datetime as dt
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dynamics import DurationDistribution
from .engine import SimConfig
from .policy import CheckTarget, Phase, PolicySchedule

SECTIONS = ("scenario", "graph", "dynamics", "reporting", "run", "regions", "analysis", "calibration")
_PHASE = re.compile(r"^phase\.(\d+)$")
_FIELD_SECTION = {"horizon": "run", "replicas": "run", "detection_fraction": "reporting",
                  "diagnosis_delay": "reporting", "n_regions": "regions"}


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class CalibrationOptions:
    grid_points: int = 9
    refine_points: int = 9
    search_replicas: int = 50
    final_replicas: int = 200
    log_loss: bool = False
    exclude_dates: tuple[dt.date, ...] = ()


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one scenario."""

    name: str = "scenario"
    start_date: dt.date | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    schedule: PolicySchedule = field(default_factory=lambda: PolicySchedule.constant(0.055))
    quantiles: tuple[float, ...] = (0.98,)
    snapshot_day: int | None = None
    split_day: int | None = None
    calibration: CalibrationOptions = field(default_factory=CalibrationOptions)

    @property
    def lift_day(self) -> int:
        """Day used to separate first and second waves."""
        if self.split_day is not None:
            return self.split_day
        return self.schedule.phases[-1].start_day

    def date_of(self, day: int) -> dt.date:
        if self.start_date is None:
            raise ValueError("scenario has no start_date")
        return self.start_date + dt.timedelta(days=day)

    def day_of(self, date: dt.date) -> int:
        if self.start_date is None:
            raise ValueError("scenario has no start_date")
        return (date - self.start_date).days


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, None)] = no
        elif section is not None:
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            index[(section, key)] = no
    return index


class _Reader:
    def __init__(self, parser, lines, path):
        self.parser = parser
        self.lines = lines
        self.path = path

    def fail(self, section, key, message):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        raise ConfigError(message, self.path, line)

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def get(self, section, key, conv, default):
        if not self.parser.has_section(section) or not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.fail(section, key, f"[{section}] {key} = {raw!r}: {exc}")


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _dates(raw: str) -> tuple[dt.date, ...]:
    return tuple(dt.date.fromisoformat(x) for x in raw.replace(",", " ").split())


def parse(text: str, path=None) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path or "<string>"))
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from exc
    lines = _line_index(text)
    rd = _Reader(parser, lines, path)

    for section in parser.sections():
        if section not in SECTIONS and not _PHASE.match(section):
            rd.fail(section, None, f"unknown section [{section}]")

    base = SimConfig()
    name = rd.get("scenario", "name", str, "scenario")
    start_date = rd.get("scenario", "start_date", dt.date.fromisoformat, None)

    fields_ = dict(
        n=rd.get("graph", "n", int, base.n),
        k=rd.get("graph", "k", int, base.k),
        p=rd.get("graph", "p", float, base.p),
        horizon=rd.get("run", "horizon", int, base.horizon),
        replicas=rd.get("run", "replicas", int, base.replicas),
        master_seed=rd.get("run", "master_seed", int, base.master_seed),
        track_components=rd.get("run", "track_components", _bool, base.track_components),
        detection_fraction=rd.get("reporting", "detection_fraction", float, base.detection_fraction),
        diagnosis_delay=rd.get("reporting", "diagnosis_delay", int, base.diagnosis_delay),
        n_regions=rd.get("regions", "n_regions", int, base.n_regions),
    )
    dyn = {}
    for stage, default in (("incubation", base.incubation), ("infection", base.infection)):
        mean = rd.get("dynamics", f"{stage}_mean", float, default.mean)
        sd = rd.get("dynamics", f"{stage}_sd", float, default.sd)
        try:
            dyn[stage] = DurationDistribution(mean, sd)
        except ValueError as exc:
            rd.fail("dynamics", f"{stage}_mean", str(exc))

    graph_checks = (
        ("graph", "k", fields_["k"] % 2 == 0, "k must be even"),
        ("graph", "k", 0 < fields_["k"] and fields_["k"] + 2 <= fields_["n"], "need 0 < k <= n - 2"),
        ("graph", "p", 0.0 <= fields_["p"] <= 1.0, "p must lie in [0, 1]"),
    )
    for section, key, ok, message in graph_checks:
        if not ok:
            rd.fail(section, key, message)
    try:
        sim = SimConfig(**fields_, **dyn)
    except ValueError as exc:
        key = re.match(r"\w+", str(exc)).group(0)
        rd.fail(_FIELD_SECTION.get(key, "run"), key, str(exc))

    def start_conv(raw):
        if re.fullmatch(r"\d{4}-\d{2}-\d{2}", raw):
            if start_date is None:
                raise ValueError("date-valued start needs [scenario] start_date")
            return (dt.date.fromisoformat(raw) - start_date).days
        return int(raw)

    phase_sections = sorted((int(_PHASE.match(s).group(1)), s) for s in parser.sections() if _PHASE.match(s))
    phases = []
    for _, section in phase_sections:
        if not rd.has(section, "start"):
            rd.fail(section, None, f"[{section}] needs a start")
        if not (rd.has(section, "r") or rd.has(section, "r_short")):
            rd.fail(section, None, f"[{section}] needs r or r_short/r_long")
        r = rd.get(section, "r", float, None)
        r_short = rd.get(section, "r_short", float, r)
        r_long = rd.get(section, "r_long", float, r_short)
        start = rd.get(section, "start", start_conv, None)
        target = rd.get(section, "check_target", CheckTarget, CheckTarget.NONE)
        fraction = rd.get(section, "check_fraction", float, 0.0)
        try:
            phases.append(Phase(start, r_short, r_long, fraction, target))
        except ValueError as exc:
            key = str(exc).split()[0]
            if not rd.has(section, key) and key in ("r_short", "r_long"):
                key = "r_short" if rd.has(section, "r_short") else "r"
            rd.fail(section, key if rd.has(section, key) else None, f"[{section}] {exc}")
    if not phases:
        schedule = PolicySchedule.constant(0.055)
    else:
        try:
            schedule = PolicySchedule(tuple(phases))
        except ValueError as exc:
            rd.fail(phase_sections[0][1], "start", str(exc))

    quantiles = rd.get("run", "quantiles", _floats, (0.98,))
    for q in quantiles:
        if not 0.0 < q < 1.0:
            rd.fail("run", "quantiles", f"quantile band levels must lie in (0, 1), got {q}")

    cal = CalibrationOptions(
        grid_points=rd.get("calibration", "grid_points", int, 9),
        refine_points=rd.get("calibration", "refine_points", int, 9),
        search_replicas=rd.get("calibration", "search_replicas", int, 50),
        final_replicas=rd.get("calibration", "final_replicas", int, 200),
        log_loss=rd.get("calibration", "log_loss", _bool, False),
        exclude_dates=rd.get("calibration", "exclude_dates", _dates, ()),
    )
    if cal.grid_points < 3:
        rd.fail("calibration", "grid_points", "grid_points must be >= 3")

    return ScenarioConfig(
        name=name, start_date=start_date, sim=sim, schedule=schedule,
        quantiles=tuple(quantiles),
        snapshot_day=rd.get("regions", "snapshot_day", int, None),
        split_day=rd.get("analysis", "split_day", int, None),
        calibration=cal,
    )


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from exc
    return parse(text, path)


def dumps(cfg: ScenarioConfig) -> str:
    """Serialise ``cfg``; :func:`parse` of the result gives back an equal config."""
    sim = cfg.sim
    out = configparser.ConfigParser()
    out["scenario"] = {"name": cfg.name}
    if cfg.start_date is not None:
        out["scenario"]["start_date"] = cfg.start_date.isoformat()
    out["graph"] = {"n": str(sim.n), "k": str(sim.k), "p": repr(sim.p)}
    out["dynamics"] = {
        "incubation_mean": repr(sim.incubation.mean), "incubation_sd": repr(sim.incubation.sd),
        "infection_mean": repr(sim.infection.mean), "infection_sd": repr(sim.infection.sd),
    }
    out["reporting"] = {"detection_fraction": repr(sim.detection_fraction),
                        "diagnosis_delay": str(sim.diagnosis_delay)}
    out["run"] = {"horizon": str(sim.horizon), "replicas": str(sim.replicas),
                  "master_seed": str(sim.master_seed),
                  "quantiles": ", ".join(repr(q) for q in cfg.quantiles),
                  "track_components": str(sim.track_components).lower()}
    out["regions"] = {"n_regions": str(sim.n_regions)}
    if cfg.snapshot_day is not None:
        out["regions"]["snapshot_day"] = str(cfg.snapshot_day)
    if cfg.split_day is not None:
        out["analysis"] = {"split_day": str(cfg.split_day)}
    cal = cfg.calibration
    out["calibration"] = {
        "grid_points": str(cal.grid_points), "refine_points": str(cal.refine_points),
        "search_replicas": str(cal.search_replicas), "final_replicas": str(cal.final_replicas),
        "log_loss": str(cal.log_loss).lower(),
    }
    if cal.exclude_dates:
        out["calibration"]["exclude_dates"] = ", ".join(d.isoformat() for d in cal.exclude_dates)
    for i, ph in enumerate(cfg.schedule.phases):
        out[f"phase.{i}"] = {
            "start": str(ph.start_day), "r_short": repr(ph.r_short), "r_long": repr(ph.r_long),
            "check_fraction": repr(ph.check_fraction), "check_target": ph.check_target.value,
        }
    buf = io.StringIO()
    out.write(buf)
    return buf.getvalue()


def with_overrides(cfg: ScenarioConfig, seed: int | None = None, replicas: int | None = None,
                   quantiles=None) -> ScenarioConfig:
    sim = cfg.sim
    if seed is not None:
        sim = replace(sim, master_seed=seed)
    if replicas is not None:
        sim = replace(sim, replicas=replicas)
    cfg = replace(cfg, sim=sim)
    if quantiles is not None:
        cfg = replace(cfg, quantiles=tuple(quantiles))
    return cfg


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def scenario_path(name: str) -> Path:
    """Path of a bundled scenario file, e.g. ``scenario_path("fig8b")``."""
    path = SCENARIO_DIR / f"{name}.ini"
    if not path.exists():
        known = ", ".join(sorted(p.stem for p in SCENARIO_DIR.glob("*.ini")))
        raise ConfigError(f"unknown scenario {name!r}; bundled: {known}")
    return path


def bundled(name: str) -> ScenarioConfig:
    return load(scenario_path(name))
