"""Run configuration: defaults, file loading, overrides and validation."""

import copy
import csv
import json
from pathlib import Path

import yaml

from .channel import ChannelParams
from .coding import CodeConfig
from .qbd_model import TrafficParams
from .qbd_solver import BOUNDARY_METHODS, DEFAULT_MAX_ITER, DEFAULT_TOL
from .simulator import Fidelity, SimConfig

SCHEMA_VERSION = "1.0"

SWEEP_KINDS = ("code-rate", "throughput", "decay-surface", "memory")

DEFAULTS = {
    "channel": {"alpha": 0.02, "beta": 0.005, "eps_b": 0.49, "eps_g": 0.0025},
    "code": {"blocklength": 114, "info_bits": 83},
    "traffic": {"gamma": 0.25, "rho": 1 / 195},
    "solver": {"tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER, "boundary": "auto"},
    "analysis": {"tau_list": [5, 10, 15, 20, 25], "q_max": 30, "slot_seconds": 4.615e-3},
    "sweep": {
        "kind": "code-rate",
        "k_min": 60,
        "k_max": 110,
        "arrival_bits": [47.5, 50.0, 52.5, 55.0, 57.5, 60.0],
        "memories": [0.0, 0.5, 0.9, 0.95, 0.975, 0.99, 0.995, 0.999],
    },
    "simulation": {
        "blocks": 1_000_000,
        "warmup": 10_000,
        "seed": 0,
        "fidelity": "analytical_failure",
        "batches": 50,
        "materialize_packets": False,
    },
}


class ConfigError(ValueError):
    pass


def _merge(base, update, path=""):
    for key, value in update.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value


def _read_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".csv":
        # CSV outputs embed the resolved config in a '# config: {...}' line
        for line in text.splitlines():
            if line.startswith("# config:"):
                return json.loads(line[len("# config:") :])
        raise ConfigError(f"{path} has no embedded config line")
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    # a previous report: rerun from its embedded config
    if "schema_version" in data and "config" in data:
        return data["config"]
    return data


def load_config(path=None, overrides=None):
    """Defaults, then the config file, then ``overrides`` (a nested dict)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        _merge(cfg, _read_file(path))
    if overrides:
        _merge(cfg, overrides)
    validate(cfg)
    return cfg


def channel_of(cfg):
    return ChannelParams(**cfg["channel"])


def code_of(cfg):
    return CodeConfig(**cfg["code"])


def traffic_of(cfg):
    return TrafficParams(**cfg["traffic"])


def sim_config_of(cfg):
    s = cfg["simulation"]
    return SimConfig(
        channel=channel_of(cfg),
        code=code_of(cfg),
        traffic=traffic_of(cfg),
        blocks_to_simulate=s["blocks"],
        warmup_blocks=s["warmup"],
        seed=s["seed"],
        fidelity=s["fidelity"],
        batches=s["batches"],
        materialize_packets=bool(s["materialize_packets"]),
    )


def validate(cfg):
    try:
        channel_of(cfg)
        code = code_of(cfg)
        traffic_of(cfg)
        solver = cfg["solver"]
        if not float(solver["tol"]) > 0:
            raise ConfigError("solver.tol must be positive")
        if int(solver["max_iter"]) < 1:
            raise ConfigError("solver.max_iter must be >= 1")
        if solver["boundary"] not in BOUNDARY_METHODS:
            raise ConfigError(f"solver.boundary must be one of {BOUNDARY_METHODS}")
        analysis = cfg["analysis"]
        if any(int(t) != t or t < 0 for t in analysis["tau_list"]):
            raise ConfigError("analysis.tau_list must hold nonnegative integers")
        if int(analysis["q_max"]) < 0:
            raise ConfigError("analysis.q_max must be >= 0")
        if not float(analysis["slot_seconds"]) > 0:
            raise ConfigError("analysis.slot_seconds must be positive")
        sweep = cfg["sweep"]
        if sweep["kind"] not in SWEEP_KINDS:
            raise ConfigError(f"sweep.kind must be one of {SWEEP_KINDS}")
        if not 1 <= sweep["k_min"] <= sweep["k_max"] <= code.blocklength:
            raise ConfigError("sweep K range must satisfy 1 <= k_min <= k_max <= blocklength")
        Fidelity(cfg["simulation"]["fidelity"])
        sim_config_of(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def model_identity(cfg):
    """The parts of a config that define the physical system."""
    return {k: cfg[k] for k in ("channel", "code", "traffic")}


def write_csv(handle, rows, columns, cfg, command):
    """CSV with a commented header carrying schema version and resolved config."""
    handle.write(f"# schema_version: {SCHEMA_VERSION}\n")
    handle.write(f"# command: {command}\n")
    handle.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".17g")
    return value
