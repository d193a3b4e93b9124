"""Command line interface: ``gequeue {analyze,sweep,simulate,compare}``."""

import argparse
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .channel import channel_memory, channel_stationary, erasure_joint
from .coding import avg_failure_probability
from .exceptions import ConvergenceError, SingularMatrixError, UnstableSystemError
from .qbd_model import build_blocks, segment_completion_prob, stability_margin
from .qbd_solver import (
    balance_residuals,
    decay_rate,
    level_distribution,
    log_tail_probability,
    mean_queue_length,
)
from .simulator import simulate
from .sweep import (
    SweepSpec,
    decay_surface,
    memory_sweep,
    rate_conversions,
    solve_system,
    surface_optimum,
    sweep_code_rate,
    throughput_sweep,
)

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_SINGULAR = 4
EXIT_NONCONVERGENCE = 5
EXIT_IO = 6

Z_LIMIT = 3.0


class CliError(Exception):
    def __init__(self, code, record):
        self.code = code
        self.record = record
        super().__init__(record.get("message", ""))


def _clean(obj):
    """Make a result JSON-safe: numpy scalars to python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _envelope(command, cfg, result):
    return {
        "schema_version": cfgmod.SCHEMA_VERSION,
        "command": command,
        "config": cfg,
        "result": result,
    }


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
        return
    try:
        with open(path, "w", newline="") as fh:
            yield fh
    except OSError as exc:
        raise CliError(EXIT_IO, {"type": "io_error", "path": str(path), "message": str(exc)}) from exc


def _emit_json(doc, path, stream=None):
    if stream is not None:
        json.dump(_clean(doc), stream, indent=2)
        stream.write("\n")
        return
    with _output(path) as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=False)
        fh.write("\n")


def _solver_errors(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except UnstableSystemError as exc:
        raise CliError(
            EXIT_UNSTABLE, {"type": "unstable", "stability_margin": exc.margin, "message": str(exc)}
        ) from exc
    except SingularMatrixError as exc:
        raise CliError(
            EXIT_SINGULAR,
            {
                "type": "singular_matrix",
                "matrix": exc.matrix_name,
                "parameter": exc.parameter,
                "message": str(exc),
            },
        ) from exc
    except ConvergenceError as exc:
        raise CliError(
            EXIT_NONCONVERGENCE,
            {
                "type": "non_convergence",
                "iterations": exc.iterations,
                "residual": exc.residual,
                "message": str(exc),
            },
        ) from exc


def _solve(cfg, joint=None):
    s = cfg["solver"]
    return _solver_errors(
        solve_system,
        cfgmod.channel_of(cfg),
        cfgmod.code_of(cfg),
        cfgmod.traffic_of(cfg),
        joint,
        float(s["tol"]),
        int(s["max_iter"]),
        s["boundary"],
    )


def analysis_report(cfg):
    channel, code, traffic = cfgmod.channel_of(cfg), cfgmod.code_of(cfg), cfgmod.traffic_of(cfg)
    joint = erasure_joint(channel, code.blocklength)
    blocks = build_blocks(channel, code, traffic, joint)
    margin = stability_margin(blocks, channel)
    base = {
        "stability_margin": margin,
        "segment_completion_prob": segment_completion_prob(traffic, code),
        "avg_failure_probability": avg_failure_probability(code, joint, channel_stationary(channel)),
        "channel_memory": channel_memory(channel),
        "rates": rate_conversions(channel, code, traffic, float(cfg["analysis"]["slot_seconds"])),
    }
    try:
        sol = _solve(cfg, joint)
    except CliError as exc:
        exc.record.update(base)
        raise
    taus = [int(t) for t in cfg["analysis"]["tau_list"]]
    levels = [
        {"q": q, "pi_b": p[0], "pi_g": p[1]}
        for q in range(int(cfg["analysis"]["q_max"]) + 1)
        for p in [level_distribution(sol, q)]
    ]
    dr = decay_rate(sol)
    return {
        **base,
        "empty_queue_certain": bool(sol.pi1.sum() == 0.0),
        "levels": levels,
        "tail": [{"tau": t, "probability": math.exp(log_tail_probability(sol, t))} for t in taus],
        "decay_rate": dr,
        "decay_rate_log10": dr / math.log(10.0),
        "spectral_radius": sol.spectral_radius_R,
        "mean_queue": mean_queue_length(sol),
        "diagnostics": {
            "iterations": sol.iterations_used,
            "residual": sol.residual,
            "boundary_method": sol.boundary_method,
            "ill_conditioned": sol.ill_conditioned,
            "balance_residuals": balance_residuals(sol),
            "rate_matrix": sol.rate_matrix,
        },
    }


def cmd_analyze(cfg, out):
    _emit_json(_envelope("analyze", cfg, analysis_report(cfg)), out)
    return EXIT_OK


def _sweep_spec(cfg):
    sw, s = cfg["sweep"], cfg["solver"]
    return SweepSpec(
        cfgmod.channel_of(cfg),
        cfgmod.code_of(cfg),
        cfgmod.traffic_of(cfg),
        k_values=tuple(range(int(sw["k_min"]), int(sw["k_max"]) + 1)),
        taus=tuple(int(t) for t in cfg["analysis"]["tau_list"]),
        tol=float(s["tol"]),
        max_iter=int(s["max_iter"]),
        boundary=s["boundary"],
    )


def _flatten_tail(rows, taus):
    for r in rows:
        for t in taus:
            r[f"tail_{t}"] = r.get("tail", {}).get(t, "")
    return rows


def sweep_tables(cfg):
    """Return ``(rows, columns, summary)`` for the configured sweep kind."""
    kind = cfg["sweep"]["kind"]
    spec = _sweep_spec(cfg)
    inputs = ["K", "rate", "gamma", "rho", "stable", "stability_margin"]
    if kind == "code-rate":
        res = sweep_code_rate(spec)
        rows = _flatten_tail(res.rows, spec.taus)
        cols = inputs + [f"tail_{t}" for t in spec.taus] + [
            "decay_rate", "spectral_radius", "mean_queue", "throughput", "iterations", "error",
        ]
        summary = {
            "argmin_tail": res.argmin_tail,
            "argmax_decay": res.argmax_decay,
            "argmax_throughput": res.argmax_throughput,
            "degenerate": res.degenerate,
        }
    elif kind == "throughput":
        res = throughput_sweep(spec.channel, spec.code.blocklength, spec.k_values)
        rows = [{"K": k, "throughput": v} for k, v in res["throughput"].items()]
        cols = ["K", "throughput"]
        summary = {k: res[k] for k in ("argmax", "ties", "shannon_reference")}
    elif kind == "decay-surface":
        rows = decay_surface(spec, cfg["sweep"]["arrival_bits"])
        cols = ["arrival_bits"] + inputs + ["decay_rate", "neg_decay_rate", "spectral_radius", "error"]
        summary = {"best_K_by_arrival": surface_optimum(rows)}
    else:
        tau = int(cfg["analysis"]["tau_list"][0])
        rows = memory_sweep(spec, cfg["sweep"]["memories"], tau)
        cols = ["memory", "alpha", "beta", "tau", "best_K_tail", "best_K_throughput"]
        summary = {"rows": len(rows)}
    return rows, cols, summary


def cmd_sweep(cfg, out):
    rows, cols, summary = sweep_tables(cfg)
    with _output(out) as fh:
        cfgmod.write_csv(fh, rows, cols, cfg, f"sweep {cfg['sweep']['kind']}")
    if out is not None:
        _emit_json(_envelope("sweep", cfg, summary), None)
    return EXIT_OK


def cmd_simulate(cfg, out):
    sim = cfgmod.sim_config_of(cfg)
    res = simulate(sim)
    _emit_json(_envelope("simulate", cfg, res.to_record(cfg["analysis"]["tau_list"])), out)
    return EXIT_OK


def _load_sim_report(path, cfg):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_IO, {"type": "io_error", "path": str(path), "message": str(exc)}) from exc
    if doc.get("command") != "simulate" or "config" not in doc:
        raise CliError(EXIT_CONFIG, {"type": "config_error", "message": f"{path} is not a simulate report"})
    theirs = cfgmod.model_identity(doc["config"])
    ours = cfgmod.model_identity(cfg)
    if theirs != ours:
        diff = {
            section: {"report": theirs[section], "config": ours[section]}
            for section in ours
            if theirs.get(section) != ours[section]
        }
        raise CliError(
            EXIT_CONFIG,
            {"type": "config_mismatch", "message": "simulation report was produced for a different system", "differences": diff},
        )
    return {t["tau"]: (t["probability"], t["standard_error"]) for t in doc["result"]["tail"]}


def cmd_compare(cfg, out, sim_report=None):
    report = analysis_report(cfg)
    analytic = {t["tau"]: t["probability"] for t in report["tail"]}
    if sim_report is not None:
        empirical = _load_sim_report(sim_report, cfg)
        seed = None
    else:
        res = simulate(cfgmod.sim_config_of(cfg))
        empirical = {int(t): res.tail(int(t)) for t in analytic}
        seed = res.seed
    rows = []
    for tau, a in analytic.items():
        if tau not in empirical:
            raise CliError(EXIT_CONFIG, {"type": "config_mismatch", "message": f"simulation lacks tau={tau}"})
        e, se = empirical[tau]
        if se > 0:
            z = (e - a) / se
        else:
            z = 0.0 if e == a else math.inf
        rows.append({"tau": tau, "analytical": a, "empirical": e, "standard_error": se, "z": z})
    agree = all(abs(r["z"]) <= Z_LIMIT for r in rows)
    result = {"seed": seed, "z_limit": Z_LIMIT, "agree": agree, "comparison": rows}
    _emit_json(_envelope("compare", cfg, result), out)
    return EXIT_OK if agree else EXIT_DISAGREE


def _tau_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad tau list {text!r}") from exc
    return vals


_OVERRIDES = {
    "alpha": ("channel", "alpha", float),
    "beta": ("channel", "beta", float),
    "eps_b": ("channel", "eps_b", float),
    "eps_g": ("channel", "eps_g", float),
    "blocklength": ("code", "blocklength", int),
    "info_bits": ("code", "info_bits", int),
    "gamma": ("traffic", "gamma", float),
    "rho": ("traffic", "rho", float),
    "tau_list": ("analysis", "tau_list", _tau_list),
    "q_max": ("analysis", "q_max", int),
    "slot_seconds": ("analysis", "slot_seconds", float),
    "seed": ("simulation", "seed", int),
    "blocks": ("simulation", "blocks", int),
    "warmup": ("simulation", "warmup", int),
    "fidelity": ("simulation", "fidelity", str),
    "batches": ("simulation", "batches", int),
    "tol": ("solver", "tol", float),
    "max_iter": ("solver", "max_iter", int),
    "boundary": ("solver", "boundary", str),
    "kind": ("sweep", "kind", str),
    "k_min": ("sweep", "k_min", int),
    "k_max": ("sweep", "k_max", int),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gequeue",
        description="Queueing analysis of random linear codes over a Gilbert-Elliot erasure channel.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON/YAML config, or a previous output to rerun")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    for name, (_, _, typ) in _OVERRIDES.items():
        common.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="stationary queue analysis (JSON)")
    sub.add_parser("sweep", parents=[common], help="parameter sweep (CSV)")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo simulation (JSON)")
    cmp_ = sub.add_parser("compare", parents=[common], help="analysis vs simulation z-scores (JSON)")
    cmp_.add_argument("--sim-report", metavar="PATH", help="reuse a simulate report instead of simulating")
    return parser


def _overrides(args):
    nested = {}
    for name, (section, key, _) in _OVERRIDES.items():
        value = getattr(args, name)
        if value is not None:
            nested.setdefault(section, {})[key] = value
    return nested


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, _overrides(args))
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        return cmd_compare(cfg, args.out, args.sim_report)
    except cfgmod.ConfigError as exc:
        err = CliError(EXIT_CONFIG, {"type": "config_error", "message": str(exc)})
    except CliError as exc:
        err = exc
    _emit_json({"schema_version": cfgmod.SCHEMA_VERSION, "error": err.record}, None, sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
