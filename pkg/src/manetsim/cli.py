"""Command-line front end: assemble a scenario from defaults, an optional
scenario file, and flags (flags win over the file, the file wins over the
defaults), run it, and write the trace bundle.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
invariant violations.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .engine import (
    ConfigError,
    Scenario,
    SimulationError,
    TrafficFlow,
    run_scenario,
)
from .quantify import MeasurementMode
from .radio import ChannelMode, DEFAULT_RADIO_PARAMS

_CHANNELS = {"friis": ChannelMode.FRIIS, "tworay": ChannelMode.TWO_RAY_CROSSOVER}
_MODES = {"exact": MeasurementMode.EXACT, "rssi": MeasurementMode.RSSI,
          "gpsfree": MeasurementMode.GPS_FREE}

_RADIO_KEYS = ("tx_power", "tx_gain", "rx_gain", "wavelength", "system_loss",
               "tx_antenna_height", "rx_antenna_height")


def _parse_area(text: str) -> tuple[float, float]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ConfigError("area", f"expected WxH, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError("area", f"expected numeric WxH, got {text!r}") from None


def _parse_traffic_item(text: str) -> TrafficFlow:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError("traffic",
                          f"expected src:dst:start:interval, got {text!r}")
    try:
        return TrafficFlow(source=int(parts[0]), dest=int(parts[1]),
                           start_time=float(parts[2]),
                           packet_interval=float(parts[3]))
    except ValueError:
        raise ConfigError("traffic", f"malformed flow {text!r}") from None


def _parse_bool(key: str, text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _typed(key: str, text: str, kind) -> object:
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"expected {kind.__name__}, got {text!r}") from None


def _parse_choice(key: str, text: str, table: dict) -> object:
    value = table.get(text.strip().lower())
    if value is None:
        raise ConfigError(key, f"expected one of {sorted(table)}, got {text!r}")
    return value


def parse_scenario_file(path) -> dict:
    """Read a flat ``key = value`` scenario file into override kwargs.

    Blank lines and lines starting with ``#`` are skipped. Unknown keys are
    configuration errors. Radio parameters are given by their own field
    names (tx_power, wavelength, ...) and collect into the radio override.
    """
    overrides: dict = {}
    radio: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("scenario_file",
                              f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "node_count":
            overrides["node_count"] = _typed(key, value, int)
        elif key == "seed":
            overrides["seed"] = _typed(key, value, int)
        elif key == "noise_seed":
            overrides["noise_seed"] = _typed(key, value, int)
        elif key in ("duration", "speed_min", "speed_max", "radio_range",
                     "per_hop_latency", "jitter", "rssi_noise_sigma",
                     "mobility_sample_interval"):
            overrides[key] = _typed(key, value, float)
        elif key == "area":
            overrides["area"] = _parse_area(value)
        elif key == "channel":
            overrides["channel"] = _parse_choice(key, value, _CHANNELS)
        elif key == "mode":
            overrides["mode"] = _parse_choice(key, value, _MODES)
        elif key == "intermediate_reply":
            overrides["intermediate_reply"] = _parse_bool(key, value)
        elif key == "traffic":
            items = [item for chunk in value.split(",")
                     for item in [chunk.strip()] if item]
            overrides["traffic"] = tuple(_parse_traffic_item(i) for i in items)
        elif key in _RADIO_KEYS:
            radio[key] = _typed(key, value, float)
        else:
            raise ConfigError(key, f"unknown scenario key (line {lineno})")
    if radio:
        overrides["_radio"] = radio
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manetsim",
        description="Deterministic ad hoc network simulation with "
                    "neighbor-distance quantification.")
    parser.add_argument("--nodes", type=int, default=None,
                        help="number of nodes (default 20)")
    parser.add_argument("--area", default=None, metavar="WxH",
                        help="area in meters, e.g. 1000x1000")
    parser.add_argument("--duration", type=float, default=None,
                        help="simulated seconds (default 60)")
    parser.add_argument("--speed-min", type=float, default=None)
    parser.add_argument("--speed-max", type=float, default=None)
    parser.add_argument("--range", type=float, default=None, dest="range_",
                        metavar="METERS", help="radio range (default 250)")
    parser.add_argument("--channel", choices=sorted(_CHANNELS), default=None)
    parser.add_argument("--mode", choices=sorted(_MODES), default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--traffic", action="append", default=None,
                        metavar="SRC:DST:START:INTERVAL",
                        help="constant-rate flow; repeatable")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="directory for the CSV/log bundle")
    parser.add_argument("--scenario", default=None, metavar="FILE",
                        help="flat key = value scenario file")
    parser.add_argument("--agitation-threshold", type=float, default=None,
                        help="label mobility samples against this average "
                             "distance (adds a column to mobility.csv)")
    return parser


def _build_scenario(args: argparse.Namespace) -> Scenario:
    overrides: dict = {}
    radio_overrides: dict = {}
    if args.scenario is not None:
        path = Path(args.scenario)
        if not path.exists():
            raise ConfigError("scenario_file", f"no such file: {path}")
        overrides = parse_scenario_file(path)
        radio_overrides = overrides.pop("_radio", {})
    if args.nodes is not None:
        overrides["node_count"] = args.nodes
    if args.area is not None:
        overrides["area"] = _parse_area(args.area)
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.speed_min is not None:
        overrides["speed_min"] = args.speed_min
    if args.speed_max is not None:
        overrides["speed_max"] = args.speed_max
    if args.range_ is not None:
        overrides["radio_range"] = args.range_
    if args.channel is not None:
        overrides["channel"] = _CHANNELS[args.channel]
    if args.mode is not None:
        overrides["mode"] = _MODES[args.mode]
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.traffic is not None:
        overrides["traffic"] = tuple(_parse_traffic_item(t) for t in args.traffic)
    if radio_overrides:
        try:
            overrides["radio"] = replace(DEFAULT_RADIO_PARAMS, **radio_overrides)
        except ValueError as exc:
            raise ConfigError("radio", str(exc)) from None
    scenario = Scenario(**overrides)
    scenario.validate()
    return scenario


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = _build_scenario(args)
        bundle = run_scenario(scenario)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    if args.out is not None:
        for path in bundle.write(args.out, args.agitation_threshold):
            print(f"wrote {path}")
    else:
        sys.stdout.write(bundle.summary_text())
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
