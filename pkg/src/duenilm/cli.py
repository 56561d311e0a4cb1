"""Command-line benchmark harness.

Verbs
-----
``run``
    Train CO on the training window, run DUE and CO on the testing window and
    write ``metrics.csv``, ``series_<algo>.csv``, ``energy_shares.csv`` and
    ``summary.json``; ``timings.csv`` only when ``timings = yes``.
``simulate``
    Write a labelled synthetic dataset (one 60 s channel per category, the
    aggregate, ``channels.csv``, ``household.ini`` and the activity model).
``inspect-model``
    Print per-stratum statistics of an activity model.

Every verb takes ``--config PATH`` (INI).  Exit codes: 0 success, 2 configuration
error, 3 data error, 4 invariant violation.  Failures print a single line
``duenilm: <kind>: <cause>`` on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .co import CODisaggregator
from .core import CATEGORIES, ConfigError, DataError, DueError, HouseholdProfile, InvariantError
from .engine import DUEDisaggregator, EngineConfig
from .household import bundled_profile, dump_household, load_household
from .ingest import ChannelEntry, ChannelMap, load_channel_map, load_channels, split_train_test, write_channel
from .metrics import MetricReport, evaluate, format_value, reports_to_csv
from .simulate import simulate_household
from .synthdiary import SyntheticDiaryConfig, generate_diary_events
from .tou import ActivityModel, parse_diary

log = logging.getLogger("duenilm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4
ALGORITHMS = ("due", "co")
_MODEL_KEYS = {"household", "bundled_household", "activity_model", "diaries", "synthetic",
               "synthetic_persons", "synthetic_days", "synthetic_seed"}
KNOWN_KEYS = {
    "model": _MODEL_KEYS,
    "simulate": _MODEL_KEYS | {"start", "days", "seed", "out"},
    "run": _MODEL_KEYS | {"dataset", "channel_map", "engine", "algorithms", "train_days", "test_days",
                          "seed", "exclude_degraded", "co_levels", "timings", "out"},
}


class Config:
    """One section of an INI file with paths resolved against the file's directory."""

    def __init__(self, path: Path, section: str):
        self.path = Path(path)
        self.base = self.path.parent
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            text = self.path.read_text(encoding="utf-8")
            parser.read_string(text)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if not parser.has_section(section):
            raise ConfigError(f"config {path} has no [{section}] section")
        self.text = text
        self.section = section
        self.values = dict(parser[section])
        unknown = sorted(set(self.values) - KNOWN_KEYS.get(section, set(self.values)))
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}] of {path}: {', '.join(unknown)}")

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self.values.get(key)
        return value.strip() if value is not None and value.strip() != "" else default

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ConfigError(f"[{self.section}] {key} is required")
        return value

    def path_of(self, key: str, default: Optional[str] = None) -> Optional[Path]:
        value = self.get(key, default)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self.get(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"[{self.section}] {key} must be an integer, got {value!r}") from None

    def bool(self, key: str, default: bool) -> bool:
        value = self.get(key)
        if value is None:
            return default
        if value.lower() in ("1", "yes", "true", "on"):
            return True
        if value.lower() in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"[{self.section}] {key} must be yes/no, got {value!r}")


def resolve_household(cfg: Config, default: Optional[Path] = None) -> HouseholdProfile:
    bundled = cfg.get("bundled_household")
    if bundled:
        return bundled_profile(bundled)
    path = cfg.path_of("household")
    if path is None:
        if default is None:
            raise ConfigError(f"[{cfg.section}] household or bundled_household is required")
        path = default
    return load_household(path)


def resolve_model(cfg: Config, household: Optional[HouseholdProfile] = None,
                  seed: Optional[int] = None) -> ActivityModel:
    """Activity model from ``activity_model`` (JSON), ``diaries`` (CSV) or ``synthetic = yes``.

    ``seed`` overrides ``synthetic_seed``.
    """
    sources = [k for k in ("activity_model", "diaries") if cfg.get(k)]
    synthetic = cfg.bool("synthetic", False)
    if len(sources) + synthetic != 1:
        raise ConfigError(f"[{cfg.section}] needs exactly one of activity_model, diaries, synthetic")
    if synthetic:
        if household is None:
            raise ConfigError("a synthetic activity model needs a household")
        per_stratum = cfg.int("synthetic_persons", 40)
        strata = {(p.employment, p.age_group): per_stratum for p in household.persons}
        config = SyntheticDiaryConfig(strata, days=cfg.int("synthetic_days", 14),
                                      seed=seed if seed is not None else cfg.int("synthetic_seed", 7))
        return ActivityModel.from_events(generate_diary_events(config))
    if sources[0] == "activity_model":
        return ActivityModel.load(cfg.path_of("activity_model"))
    path = cfg.path_of("diaries")
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            events = parse_diary(fh)
    except OSError as exc:
        raise DataError(f"cannot read diaries {path}: {exc}") from exc
    return ActivityModel.from_events(events)


def engine_config(cfg: Config, seed: Optional[int]) -> EngineConfig:
    path = cfg.path_of("engine")
    engine = EngineConfig.load(path) if path is not None else EngineConfig.parse(cfg.text)
    if seed is not None:
        fields = {k: getattr(engine, k) for k in engine.__dataclass_fields__}
        fields["seed"] = seed
        engine = EngineConfig(**fields)
    return engine


def _series_csv(estimates: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cats = [c for c in CATEGORIES if c in estimates]
    writer.writerow(["timestamp"] + [str(c) for c in cats])
    first = estimates[cats[0]]
    for i, t in enumerate(first.times()):
        writer.writerow([t.isoformat()] + [format_value(float(estimates[c].values[i])) for c in cats])
    return buf.getvalue()


def _shares_csv(reports: Sequence[MetricReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("algorithm", "category", "share_est", "share_true", "ese"))
    for rep in reports:
        for cat, m in rep.categories.items():
            writer.writerow([rep.algorithm, str(cat)] + [format_value(v) for v in (m.share_est, m.share_true, m.ese)])
    return buf.getvalue()


def _timings_csv(timings: Sequence[tuple[str, str, int, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("algorithm", "phase", "days", "seconds"))
    for algo, phase, days, seconds in timings:
        writer.writerow((algo, phase, days, f"{seconds:.3f}"))
    return buf.getvalue()


def cmd_run(config_path: Path, seed: Optional[int] = None, out: Optional[Path] = None) -> dict:
    cfg = Config(config_path, "run")
    dataset_dir = cfg.path_of("dataset")
    if dataset_dir is None:
        raise ConfigError("[run] dataset is required")
    channel_map = load_channel_map(cfg.path_of("channel_map") or dataset_dir / "channels.csv")
    household = resolve_household(cfg, dataset_dir / "household.ini")
    algorithms = _algorithms(cfg)
    model = resolve_model(cfg, household) if "due" in algorithms else None
    run_seed = seed if seed is not None else cfg.int("seed")
    engine = engine_config(cfg, run_seed)
    out = out or cfg.path_of("out", "reports")

    data = load_channels(dataset_dir, channel_map)
    train, test = split_train_test(data, cfg.int("train_days"), cfg.int("test_days"))
    mask = test.valid_mask() if cfg.bool("exclude_degraded", True) else None
    if mask is not None and not mask.any():
        raise DataError("every test day is degraded; nothing to score")

    reports, timings, series, diagnostics = [], [], {}, {}
    for algo in algorithms:
        if algo == "due":
            est = DUEDisaggregator(household, model, tolerance=engine.tolerance,
                                   max_iterations=engine.max_iterations, peak_delta=engine.peak_delta,
                                   seed=engine.seed, residual_to_standby=engine.residual_to_standby,
                                   optimization=engine.optimization)
            t0 = time.perf_counter()
            est.fit(test.aggregate)
            est.predict(test.aggregate)
            timings += [(algo, "train", 0, 0.0), (algo, "test", test.n_days, time.perf_counter() - t0)]
            estimates = est.result_.per_category
            res = est.result_
            diagnostics["due"] = {
                "mean_iterations": float(np.mean(list(res.iterations.values()))),
                "occupied_days": int(sum(res.occupancy.values())),
                "residual_to_standby_wh": float(sum(res.residual_energy.values())),
                "fridge_learned": est.fridge_ is not None,
            }
        else:
            est = CODisaggregator(n_levels=cfg.int("co_levels", 3))
            t0 = time.perf_counter()
            est.fit(train.aggregate, train.per_category)
            t1 = time.perf_counter()
            est.predict(test.aggregate)
            timings += [(algo, "train", train.n_days, t1 - t0), (algo, "test", test.n_days, time.perf_counter() - t1)]
            estimates = est.estimates_
            diagnostics["co"] = {"basis": {str(c): [float(v) for v in lv] for c, lv in est.basis_.levels.items()}}
        series[algo] = estimates
        reports.append(evaluate(estimates, test.per_category, algo, mask=mask))

    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(reports_to_csv(reports), encoding="utf-8")
    (out / "energy_shares.csv").write_text(_shares_csv(reports), encoding="utf-8")
    for algo, phase, days, seconds in timings:
        log.info("%s %s: %d days in %.3f s", algo, phase, days, seconds)
    # Wall-clock timings differ between runs, so they are only written on request.
    if cfg.bool("timings", False):
        (out / "timings.csv").write_text(_timings_csv(timings), encoding="utf-8")
    for algo, est in series.items():
        (out / f"series_{algo}.csv").write_text(_series_csv(est), encoding="utf-8")
    summary = {
        "household": household.name,
        "seed": engine.seed,
        "train": {"start": str(train.aggregate.start.date()), "days": train.n_days},
        "test": {"start": str(test.aggregate.start.date()), "days": test.n_days},
        "degraded_test_days": [str(d) for d in test.degraded_days],
        "engine": {k: getattr(engine, k) for k in engine.__dataclass_fields__},
        "results": {r.algorithm: r.to_dict() for r in reports},
        "diagnostics": diagnostics,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary


def _algorithms(cfg: Config) -> list[str]:
    algos = [a.strip().lower() for a in cfg.get("algorithms", "due,co").split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad or not algos:
        raise ConfigError(f"[run] algorithms must be a subset of {ALGORITHMS}, got {algos}")
    return list(dict.fromkeys(algos))


def cmd_simulate(config_path: Path, seed: Optional[int] = None, out: Optional[Path] = None) -> Path:
    cfg = Config(config_path, "simulate")
    household = resolve_household(cfg)
    model = resolve_model(cfg, household)
    try:
        start = dt.date.fromisoformat(cfg.get("start", "2015-04-01"))
    except ValueError as exc:
        raise ConfigError(f"[simulate] start: {exc}") from None
    days = cfg.int("days", 30)
    if days < 1:
        raise ConfigError("[simulate] days must be >= 1")
    sim_seed = seed if seed is not None else cfg.int("seed", 0)
    out = out or cfg.path_of("out", "dataset")

    sim = simulate_household(household, model, start, days, sim_seed)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for cat, s in sim.per_category.items():
        name = cat.value.lower()
        write_channel(out / f"{name}.csv", s)
        entries.append(ChannelEntry(name, name, cat))
    write_channel(out / "aggregate.csv", sim.aggregate)
    entries.append(ChannelEntry("aggregate", "mains", None))
    (out / "channels.csv").write_text(ChannelMap(tuple(entries)).to_csv(), encoding="utf-8")
    (out / "household.ini").write_text(dump_household(household), encoding="utf-8")
    model.save(out / "activity_model.json")
    return out


def cmd_inspect_model(config_path: Path, out: Optional[Path] = None, seed: Optional[int] = None) -> list[dict]:
    if config_path.suffix.lower() == ".json":
        model = ActivityModel.load(config_path)
    else:
        cfg = Config(config_path, "model")
        household = resolve_household(cfg) if (cfg.get("household") or cfg.get("bundled_household")) else None
        model = resolve_model(cfg, household, seed)
    rows = model.summary()
    buf = io.StringIO()
    fields = list(rows[0]) if rows else ["stratum"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "NA" if v is None else v for k, v in row.items()})
    text = buf.getvalue()
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "model_summary.csv").write_text(text, encoding="utf-8")
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duenilm", description="Activity-based household load disaggregation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "benchmark DUE and CO on a dataset"),
                           ("simulate", "write a labelled synthetic dataset"),
                           ("inspect-model", "print activity model statistics")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, type=Path, help="INI configuration file")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return parser


def _fail(kind: str, code: int, exc: BaseException) -> int:
    cause = " ".join(str(exc).split()) or type(exc).__name__
    print(f"duenilm: {kind}: {cause}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cmd_run(args.config, args.seed, args.out)
        elif args.command == "simulate":
            cmd_simulate(args.config, args.seed, args.out)
        else:
            cmd_inspect_model(args.config, args.out, args.seed)
    except ConfigError as exc:
        return _fail("config-error", EXIT_CONFIG, exc)
    except DataError as exc:
        return _fail("data-error", EXIT_DATA, exc)
    except InvariantError as exc:
        return _fail("invariant-violation", EXIT_INVARIANT, exc)
    except DueError as exc:
        return _fail("error", EXIT_INVARIANT, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
