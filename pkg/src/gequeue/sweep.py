"""Code-rate optimisation and parameter sweeps over the QBD model."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelParams, average_erasure_probability, channel_stationary, erasure_joint
from .coding import CodeConfig, failure_probabilities
from .exceptions import QueueModelError
from .qbd_model import TrafficParams, build_blocks, segment_completion_prob, stability_margin
from .qbd_solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    decay_rate,
    log_tail_probability,
    mean_queue_length,
    solve,
)

TIE_TOL = 1e-12
DEFAULT_TAUS = (5, 10, 15, 20, 25)
ALL_METRICS = ("tail", "decay_rate", "mean_queue", "throughput")


def degenerate_parameter(channel, code, traffic):
    """Name the input responsible for a singular A2, if one is obvious."""
    if traffic.gamma == 1.0:
        return "gamma=1 (queue never idles, so A2 vanishes)"
    if segment_completion_prob(traffic, code) == 0.0:
        return "rho (segment completion probability underflows to 0)"
    if channel.eps_g == 1.0:
        return "eps_b=eps_g=1 (every bit erased, decoding always fails)"
    if channel.alpha + channel.beta == 1.0:
        return "alpha+beta=1 (memoryless channel makes A2 rank one)"
    return None


def solve_system(
    channel, code, traffic, joint=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, boundary="auto"
):
    """Build the blocks for one operating point and solve for the stationary law."""
    blocks = build_blocks(channel, code, traffic, joint)
    return solve(
        blocks,
        tol=tol,
        max_iter=max_iter,
        phase_law=channel_stationary(channel),
        parameter_hint=degenerate_parameter(channel, code, traffic),
        boundary=boundary,
    )


def infinite_backlog_throughput(channel, code, joint=None):
    """Expected information bits delivered per block when data is always queued."""
    if joint is None:
        joint = erasure_joint(channel, code.blocklength)
    pf = failure_probabilities(code.parity_bits, code.blocklength)
    pmf = joint.erasure_pmf(channel_stationary(channel))
    return float(code.info_bits * (pmf @ (1.0 - pf)))


def _ties(values, best):
    return [k for k, v in values.items() if abs(v - best) <= TIE_TOL]


def throughput_sweep(channel, blocklength, k_values=None):
    """Infinite-backlog throughput for each K, with the maximiser and any ties."""
    if k_values is None:
        k_values = range(1, blocklength + 1)
    joint = erasure_joint(channel, blocklength)
    values = {
        int(k): infinite_backlog_throughput(channel, CodeConfig(blocklength, int(k)), joint)
        for k in k_values
    }
    best_k = max(values, key=values.get)
    return {
        "throughput": values,
        "argmax": best_k,
        "ties": _ties(values, values[best_k]),
        "shannon_reference": (1.0 - average_erasure_probability(channel)) * blocklength,
    }


@dataclass(frozen=True)
class SweepSpec:
    channel: ChannelParams
    code: CodeConfig
    traffic: TrafficParams
    k_values: tuple = ()
    taus: tuple = DEFAULT_TAUS
    metrics: tuple = ALL_METRICS
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    boundary: str = "auto"

    def __post_init__(self):
        ks = tuple(int(k) for k in (self.k_values or range(1, self.code.blocklength + 1)))
        if not ks:
            raise ValueError("K range is empty")
        bad = [k for k in ks if not 1 <= k <= self.code.blocklength]
        if bad:
            raise ValueError(f"K values outside [1, {self.code.blocklength}]: {bad}")
        object.__setattr__(self, "k_values", ks)
        if not self.taus and "tail" in self.metrics:
            raise ValueError("tail metric requested without thresholds")
        object.__setattr__(self, "taus", tuple(int(t) for t in self.taus))
        unknown = set(self.metrics) - set(ALL_METRICS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")


@dataclass
class CodeRateSweep:
    rows: list
    argmin_tail: dict = field(default_factory=dict)
    argmax_decay: object = None
    argmax_throughput: object = None
    degenerate: bool = False


def _point(spec, traffic, k, joint):
    """Metrics for one K; solver failures are recorded, not raised."""
    code = CodeConfig(spec.code.blocklength, k)
    blocks = build_blocks(spec.channel, code, traffic, joint)
    row = {
        "K": k,
        "rate": code.rate,
        "gamma": traffic.gamma,
        "rho": traffic.rho,
        "stability_margin": stability_margin(blocks, spec.channel),
        "stable": False,
        "error": "",
    }
    if "throughput" in spec.metrics:
        row["throughput"] = infinite_backlog_throughput(spec.channel, code, joint)
    if row["stability_margin"] <= 0.0:
        row["error"] = "unstable"
        return row
    try:
        sol = solve_system(spec.channel, code, traffic, joint, spec.tol, spec.max_iter, spec.boundary)
    except QueueModelError as exc:
        row["error"] = str(exc)
        return row
    row["stable"] = True
    row["spectral_radius"] = sol.spectral_radius_R
    row["iterations"] = sol.iterations_used
    if "tail" in spec.metrics:
        row["tail"] = {t: math.exp(log_tail_probability(sol, t)) for t in spec.taus}
    if "decay_rate" in spec.metrics:
        row["decay_rate"] = decay_rate(sol)
    if "mean_queue" in spec.metrics:
        row["mean_queue"] = mean_queue_length(sol)
    return row


def sweep_code_rate(spec):
    """Evaluate every K in ``spec.k_values`` and report the optimisers.

    ``argmin_tail[tau]`` is the K minimising ``Pr(Q > tau)`` among stable
    points; ``degenerate`` is set when every stable tail is identically zero
    so that no minimiser is meaningful.
    """
    joint = erasure_joint(spec.channel, spec.code.blocklength)
    rows = [_point(spec, spec.traffic, k, joint) for k in spec.k_values]
    stable = [r for r in rows if r["stable"]]
    result = CodeRateSweep(rows=rows)
    if "tail" in spec.metrics and stable:
        result.degenerate = all(v == 0.0 for r in stable for v in r["tail"].values())
        for t in spec.taus:
            result.argmin_tail[t] = min(stable, key=lambda r: r["tail"][t])["K"]
    if "decay_rate" in spec.metrics and stable:
        result.argmax_decay = min(stable, key=lambda r: r["decay_rate"])["K"]
    if "throughput" in spec.metrics:
        result.argmax_throughput = max(rows, key=lambda r: r["throughput"])["K"]
    return result


def decay_surface(spec, arrival_bits):
    """Tail decay rate over a (K, arrival bits per block) grid.

    The arrival axis is the expected number of arriving bits per block,
    ``gamma / rho``; it is swept by changing ``rho`` with ``gamma`` held at
    its base value. Each row carries the raw ``gamma`` and ``rho``.
    """
    joint = erasure_joint(spec.channel, spec.code.blocklength)
    gamma = spec.traffic.gamma
    local = replace(spec, metrics=("decay_rate",))
    rows = []
    for bits in arrival_bits:
        bits = float(bits)
        rho = gamma / bits
        if not 0.0 < rho < 1.0:
            raise ValueError(f"arrival of {bits} bits/block needs rho = {rho} outside (0, 1)")
        traffic = TrafficParams(gamma, rho)
        for k in spec.k_values:
            row = _point(local, traffic, k, joint)
            row["arrival_bits"] = bits
            row["neg_decay_rate"] = -row["decay_rate"] if row["stable"] else float("nan")
            rows.append(row)
    return rows


def surface_optimum(rows):
    """Per arrival level, the K with the fastest tail decay (stable rows only)."""
    best = {}
    for r in rows:
        if not r["stable"]:
            continue
        cur = best.get(r["arrival_bits"])
        if cur is None or r["neg_decay_rate"] > cur["neg_decay_rate"]:
            best[r["arrival_bits"]] = r
    return {a: r["K"] for a, r in best.items()}


def memory_sweep(spec, memories, tau=DEFAULT_TAUS[0]):
    """Re-optimise K as channel memory ``1 - alpha - beta`` varies.

    The stationary state law, and hence the average erasure probability, is
    held at its base value.
    """
    bad_share = channel_stationary(spec.channel)[0]
    rows = []
    for m in memories:
        m = float(m)
        total = 1.0 - m
        ch = replace(spec.channel, alpha=(1.0 - bad_share) * total, beta=bad_share * total)
        sub = replace(spec, channel=ch, taus=(tau,), metrics=("tail", "throughput"))
        res = sweep_code_rate(sub)
        rows.append({
            "memory": m,
            "alpha": ch.alpha,
            "beta": ch.beta,
            "tau": tau,
            "best_K_tail": res.argmin_tail.get(tau),
            "best_K_throughput": res.argmax_throughput,
        })
    return rows


def rate_conversions(channel, code, traffic, slot_seconds):
    """Express arrival load and ergodic capacity in bits per second."""
    if not slot_seconds > 0:
        raise ValueError(f"slot_seconds must be positive, got {slot_seconds}")
    avg_eps = average_erasure_probability(channel)
    return {
        "slot_seconds": slot_seconds,
        "arrival_bits_per_block": traffic.arrival_bits_per_block,
        "arrival_bits_per_sec": traffic.arrival_bits_per_block / slot_seconds,
        "average_erasure_probability": avg_eps,
        "ergodic_capacity_bits_per_block": (1.0 - avg_eps) * code.blocklength,
        "ergodic_capacity_bits_per_sec": (1.0 - avg_eps) * code.blocklength / slot_seconds,
    }
