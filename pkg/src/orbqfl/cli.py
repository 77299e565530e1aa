"""``orbqfl`` command line: orbits, linkbudget, train, compare, bound.

Configuration is a flat JSON object (or a previously written manifest).
Any key can be overridden with a flag of the same name; precedence is
flags > file > built-in defaults. Exit codes: 0 ok, 2 usage, 3 data,
4 config validation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__, dataio, linkbudget, orbital, protocol
from .cobyla import OptimizerConfig
from .orbital import ConstellationConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "mode": "orb",
    "n_sats": 5,
    "rounds": 3,
    "altitude_km": 500.0,
    "inclination_deg": 60.0,
    "spacing_mode": "in_plane_spaced",
    "gs_lat": 0.0,
    "gs_lon": 0.0,
    "gs_alt_km": 0.02,
    "server": "ground",
    "qubits": 4,
    "fm_reps": 1,
    "ansatz_reps": 2,
    "encoding": "angle",
    "entangle": "ring",
    "max_fun": 100,
    "rho_begin": 1.0,
    "rho_end": 1e-4,
    "dataset": "synthetic",
    "statlog_train": "sat.trn",
    "statlog_test": "sat.tst",
    "n_per_class": 50,
    "n_classes": 2,
    "separation": 0.5,
    "spread": 0.05,
    "train_fraction": 0.9,
    "enforce_los": False,
    "local_train_walltime": 0.0,
    "los_retry_interval": 60.0,
    "duration_s": 0.0,
    "step_s": 60.0,
}

METRICS_HEADER = ("mode", "round", "device", "train_acc", "test_acc", "objective", "evals", "sim_time_s", "bits_cum")
EVENTS_HEADER = ("mode", "time_s", "src", "dst", "bits", "dist_km", "delay_s", "margin_db", "blocked")
REPORT_HEADER = ("link_name", "distance_km", "fspl_db", "eirp_dbw", "cn0_dbhz", "ebn0_db", "margin_db")


class ConfigError(ValueError):
    pass


class UsageError(ConfigError):
    """A flag value that makes the command itself meaningless (exit 2)."""


# ---------------------------------------------------------------- config


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            if isinstance(value, int):
                return value
            try:
                return int(str(value).strip())
            except ValueError:
                f = float(value)
                if f != int(f):
                    raise
                return int(f)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot interpret {value!r}") from None


def load_config_file(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    if isinstance(raw, dict) and "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]  # a run manifest
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return raw


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    cfg.update(load_config_file(getattr(args, "config", None)))
    for key in DEFAULTS:
        if hasattr(args, key):
            cfg[key] = getattr(args, key)
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    cfg["seed"] &= (1 << 64) - 1
    _validate(cfg)
    return cfg


def _validate(cfg: dict[str, Any]) -> None:
    checks = [
        (cfg["mode"] in ("orb", "server"), "mode must be orb or server"),
        (cfg["n_sats"] >= 2, "n_sats must be >= 2"),
        (cfg["rounds"] >= 1, "rounds must be >= 1"),
        (cfg["spacing_mode"] in orbital.SPACING_MODES, f"spacing_mode must be one of {orbital.SPACING_MODES}"),
        (cfg["server"] in ("ground", "geo"), "server must be ground or geo"),
        (1 <= cfg["qubits"] <= 12, "qubits must be in [1, 12]"),
        (cfg["dataset"] in ("synthetic", "statlog"), "dataset must be synthetic or statlog"),
        (cfg["max_fun"] >= 0, "max_fun must be >= 0"),
        (0 < cfg["rho_end"] <= cfg["rho_begin"], "need 0 < rho_end <= rho_begin"),
        (0 < cfg["train_fraction"] < 1, "train_fraction must lie in (0, 1)"),
        (cfg["altitude_km"] > 0, "altitude_km must be > 0"),
        (abs(cfg["gs_lat"]) <= 90, "gs_lat must lie in [-90, 90]"),
        (cfg["local_train_walltime"] >= 0, "local_train_walltime must be >= 0"),
        (cfg["los_retry_interval"] > 0, "los_retry_interval must be > 0"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    if cfg["step_s"] <= 0 or cfg["duration_s"] < 0:
        raise UsageError("need step_s > 0 and duration_s >= 0")


def constellation_from(cfg: dict[str, Any]) -> ConstellationConfig:
    return ConstellationConfig(
        n_sats=cfg["n_sats"],
        altitude=cfg["altitude_km"],
        inclination=cfg["inclination_deg"],
        spacing_mode=cfg["spacing_mode"],
        ground_station=(cfg["gs_lat"], cfg["gs_lon"], cfg["gs_alt_km"]),
        geo_server_altitude=orbital.GEO_ALTITUDE if cfg["server"] == "geo" else None,
    )


def sim_config_from(cfg: dict[str, Any], mode: str, n_classes: int) -> protocol.SimConfig:
    return protocol.SimConfig(
        mode=mode,
        rounds=cfg["rounds"],
        constellation=constellation_from(cfg),
        seed=cfg["seed"],
        qubits=cfg["qubits"],
        n_classes=n_classes,
        fm_reps=cfg["fm_reps"],
        ansatz_reps=cfg["ansatz_reps"],
        encoding=cfg["encoding"],
        entangle=cfg["entangle"],
        optimizer=OptimizerConfig(cfg["rho_begin"], cfg["rho_end"], cfg["max_fun"]),
        enforce_line_of_sight=cfg["enforce_los"],
        local_train_walltime=cfg["local_train_walltime"],
        los_retry_interval=cfg["los_retry_interval"],
    )


# ---------------------------------------------------------------- csv


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def metric_rows(result: protocol.RunResult):
    for m in result.metrics:
        yield (
            result.mode, m.round, m.device, m.train_accuracy, m.test_accuracy,
            m.final_objective, m.evals_used, m.cumulative_sim_time, m.cumulative_bits,
        )


def event_rows(result: protocol.RunResult):
    for e in result.events:
        yield (result.mode, e.sim_time, e.src, e.dst, e.payload, e.distance, e.delay, e.margin, e.blocked)


def write_manifest(out: Path, command: str, cfg: dict[str, Any], artifacts: list[str], extra=None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "orbqfl",
        "version": __version__,
        "command": command,
        "seed": cfg["seed"],
        "config": cfg,
        "artifacts": artifacts,
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------- commands


def cmd_orbits(args, cfg) -> int:
    out = Path(args.out)
    orbits = orbital.build_constellation(constellation_from(cfg))
    times = orbital.sample_times(cfg["duration_s"], cfg["step_s"])
    write_manifest(out, "orbits", cfg, ["ephemeris.csv", "distances.csv"])
    write_csv(out / "ephemeris.csv", ("time_s", "sat_id", "x_km", "y_km", "z_km"), orbital.ephemeris_rows(orbits, times))
    write_csv(out / "distances.csv", ("time_s", "sat_i", "sat_j", "dist_km"), orbital.pairwise_distance_rows(orbits, times))
    return EXIT_OK


def _axis(text: str) -> list[float]:
    """``start:stop:count`` (inclusive linspace) or a comma list."""
    if ":" in text:
        start, stop, count = text.split(":")
        return np.linspace(float(start), float(stop), int(count)).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_linkbudget(args, cfg) -> int:
    spec = linkbudget.PRESETS[args.preset]
    overrides = {
        k: getattr(args, k)
        for k in ("frequency", "bandwidth", "bitrate", "required_ebn0", "tx_power", "tx_obo", "tx_gain", "rx_g_over_t", "misc_losses")
        if getattr(args, k) is not None
    }
    spec = replace(spec, **overrides)
    out = Path(args.out)
    if args.distance is not None:
        r = linkbudget.link_budget(spec, args.distance)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        w.writerow([args.preset] + [_fmt(v) for v in (float(args.distance), r.fspl, r.eirp, r.cn0, r.ebn0, r.margin)])
        sys.stdout.write(buf.getvalue())
        return EXIT_OK
    if args.grid:
        powers, distances = _axis(args.powers), _axis(args.distances)
        grid = linkbudget.margin_grid(spec, powers, distances)
        rows = ((p, d, grid[i, j]) for i, p in enumerate(powers) for j, d in enumerate(distances))
        write_csv(out / "grid.csv", ("power_dbw", "distance_km", "margin_db"), rows)
        return EXIT_OK
    sweep = linkbudget.margin_vs_bitrate(spec, args.sweep_distance, _axis(args.sweep))
    write_csv(out / "sweep.csv", ("bitrate_bps", "margin_db"), sweep)
    return EXIT_OK


def load_data(cfg: dict[str, Any]) -> dataio.Dataset:
    if cfg["dataset"] == "statlog":
        return dataio.load_statlog(cfg["statlog_train"], cfg["statlog_test"])
    return dataio.synthetic_blobs(
        cfg["n_per_class"], cfg["n_classes"], cfg["qubits"], cfg["separation"], cfg["seed"], cfg["spread"]
    )


def prepare_shards(cfg: dict[str, Any]):
    data = load_data(cfg)
    train, test, _ = dataio.prepare(data, cfg["qubits"], cfg["train_fraction"], cfg["seed"])
    plan = dataio.partition(train, cfg["n_sats"], cfg["seed"])
    shards = [train.subset(s) for s in plan.shards]
    return data, shards, test, plan


def cmd_train(args, cfg) -> int:
    out = Path(args.out)
    data, shards, test, plan = prepare_shards(cfg)
    sim = sim_config_from(cfg, cfg["mode"], data.n_classes)
    write_manifest(out, "train", cfg, ["metrics.csv", "events.csv"], {"shard_digest": plan.digest()})
    result = protocol.run(sim, shards, test)
    write_csv(out / "metrics.csv", METRICS_HEADER, metric_rows(result))
    write_csv(out / "events.csv", EVENTS_HEADER, event_rows(result))
    return EXIT_OK


def cmd_compare(args, cfg) -> int:
    out = Path(args.out)
    data, shards, test, plan = prepare_shards(cfg)
    digest = plan.digest()
    write_manifest(out, "compare", cfg, ["compare_metrics.csv", "compare_events.csv"], {"shard_digest": digest})
    results = []
    for mode in ("orb", "server"):
        print(f"{mode}: shard digest {digest}", file=sys.stderr)
        results.append(protocol.run(sim_config_from(cfg, mode, data.n_classes), shards, test))
    write_csv(out / "compare_metrics.csv", METRICS_HEADER, (row for r in results for row in metric_rows(r)))
    write_csv(out / "compare_events.csv", EVENTS_HEADER, (row for r in results for row in event_rows(r)))
    return EXIT_OK


def load_bound_constants(path: str) -> protocol.BoundConstants:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"constants file {path} not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"constants file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("constants file must hold a JSON object")
    for key in protocol.BOUND_KEYS:
        if key not in raw:
            raise ConfigError(f"missing bound constant {key!r}")
    unknown = sorted(set(raw) - set(protocol.BOUND_KEYS))
    if unknown:
        raise ConfigError(f"unknown bound constant(s): {', '.join(unknown)}")
    values = dict(raw)
    sched = values["delta_schedule"]
    values["delta_schedule"] = tuple(sched) if isinstance(sched, list) else (sched,)
    try:
        return protocol.BoundConstants(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_bound(args, cfg) -> int:
    constants = load_bound_constants(args.constants)
    write_csv(Path(args.out) / "bound.csv", ("round", "bound_value"), protocol.bound_curve(constants))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("config overrides")
    for key, default in DEFAULTS.items():
        if key == "seed":
            continue
        g.add_argument(f"--{key}", default=argparse.SUPPRESS, metavar=type(default).__name__.upper())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat JSON config or a run manifest")
    common.add_argument("--seed", default=argparse.SUPPRESS, help="64-bit run seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")

    parser = argparse.ArgumentParser(prog="orbqfl", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"orbqfl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("orbits", parents=[common], help="ephemeris and pairwise distance CSVs")
    _add_config_flags(p)
    p.set_defaults(func=cmd_orbits)

    p = sub.add_parser("linkbudget", parents=[common], help="link report, power/distance grid or bitrate sweep")
    p.add_argument("--preset", choices=sorted(linkbudget.PRESETS), default="L3")
    for name in ("frequency", "bandwidth", "bitrate", "required_ebn0", "tx_power", "tx_obo", "tx_gain", "rx_g_over_t", "misc_losses"):
        p.add_argument(f"--{name}", type=float, default=None)
    modes = p.add_mutually_exclusive_group(required=True)
    modes.add_argument("--distance", type=float, help="report mode: single distance in km")
    modes.add_argument("--grid", action="store_true", help="grid mode (see --powers/--distances)")
    modes.add_argument("--sweep", help="bitrate sweep mode: comma list or start:stop:count in bit/s")
    p.add_argument("--powers", default="10:20:10", help="grid power axis, dBW")
    p.add_argument("--distances", default="1000:10000:10", help="grid distance axis, km")
    p.add_argument("--sweep-distance", type=float, default=8086.0, help="distance for the bitrate sweep, km")
    p.set_defaults(func=cmd_linkbudget)

    p = sub.add_parser("train", parents=[common], help="run one protocol and write metrics/events CSVs")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", parents=[common], help="run orb and server modes on identical shards")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bound", parents=[common], help="evaluate the convergence bound per round")
    p.add_argument("--constants", required=True, help="JSON file with every bound constant")
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "out"):
        args.out = "out"
    try:
        cfg = resolve_config(args) if args.command != "bound" else {}
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"orbqfl: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"orbqfl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (dataio.DatasetError, FileNotFoundError) as exc:
        print(f"orbqfl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, protocol.ProtocolError, orbital.GeometryError) as exc:
        print(f"orbqfl: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
