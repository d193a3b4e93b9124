"""Monte Carlo simulation of the coded queue over a Gilbert-Elliot channel.

The simulator samples every channel use and every bit erasure individually
and shares no code with the analytical erasure tables, so it can serve as an
independent check of the matrix-geometric results.
"""

import enum
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from ._validation import check_count
from .channel import BAD, GOOD, ChannelParams, channel_stationary
from .coding import CodeConfig, failure_probabilities, gf2_rank
from .qbd_model import TrafficParams, build_blocks, segment_completion_prob, stability_margin

MATRIX_SAMPLING_CAP = 64
DEFAULT_BATCHES = 50
_CHUNK_BLOCKS = 20_000


class Fidelity(str, enum.Enum):
    ANALYTICAL_FAILURE = "analytical_failure"
    MATRIX_SAMPLING = "matrix_sampling"


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelParams
    code: CodeConfig
    traffic: TrafficParams
    blocks_to_simulate: int
    warmup_blocks: int = 0
    seed: int = 0
    fidelity: Fidelity = Fidelity.ANALYTICAL_FAILURE
    batches: int = DEFAULT_BATCHES
    materialize_packets: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fidelity", Fidelity(self.fidelity))
        total = check_count(self.blocks_to_simulate, "blocks_to_simulate", minimum=1)
        warm = check_count(self.warmup_blocks, "warmup_blocks")
        if total <= warm:
            raise ValueError("blocks_to_simulate must exceed warmup_blocks")
        batches = check_count(self.batches, "batches", minimum=2)
        if total - warm < batches:
            raise ValueError("need at least one recorded block per batch")
        check_count(self.seed, "seed")
        if self.fidelity is Fidelity.MATRIX_SAMPLING:
            if self.code.blocklength > MATRIX_SAMPLING_CAP or self.code.parity_bits > MATRIX_SAMPLING_CAP:
                raise ValueError(
                    f"matrix_sampling fidelity requires N <= {MATRIX_SAMPLING_CAP} and "
                    f"N - K <= {MATRIX_SAMPLING_CAP}; use analytical_failure for "
                    f"N={self.code.blocklength}"
                )


@dataclass
class SimResult:
    """Empirical queue statistics gathered at block boundaries.

    ``batch_counts[b, q, c]`` counts recorded blocks of batch ``b`` that
    started with ``q`` packets queued and channel state ``c``. All reported
    frequencies and batch-means standard errors derive from it.
    """

    batch_counts: np.ndarray
    decode_attempts: int
    decode_failures: int
    seed: int
    stability_margin: float
    extra: dict = field(default_factory=dict)

    @property
    def unstable(self):
        return not self.stability_margin > 0.0

    @property
    def blocks_recorded(self):
        return int(self.batch_counts.sum())

    @property
    def empirical_level_masses(self):
        counts = self.batch_counts.sum(axis=0)
        return counts / counts.sum()

    def _batch_fractions(self, selector):
        per_batch = self.batch_counts.sum(axis=(1, 2))
        hits = selector(self.batch_counts)
        return hits / per_batch, per_batch

    def _estimate(self, selector):
        frac, size = self._batch_fractions(selector)
        mean = float((frac * size).sum() / size.sum())
        se = float(frac.std(ddof=1) / np.sqrt(frac.size))
        return mean, se

    def tail(self, tau):
        """Estimated ``Pr(Q > tau)`` and its batch-means standard error."""
        return self._estimate(lambda c: c[:, tau + 1 :, :].sum(axis=(1, 2)))

    def empirical_tail(self, taus):
        return {int(t): self.tail(int(t))[0] for t in taus}

    def tail_standard_errors(self, taus):
        return {int(t): self.tail(int(t))[1] for t in taus}

    @property
    def mean_queue(self):
        return self.mean_queue_estimate()[0]

    def mean_queue_estimate(self):
        levels = np.arange(self.batch_counts.shape[1])
        return self._estimate(lambda c: (c.sum(axis=2) * levels).sum(axis=1))

    def bad_state_fraction(self):
        return self._estimate(lambda c: c[:, :, BAD].sum(axis=1))

    @property
    def standard_errors(self):
        return {
            "mean_queue": self.mean_queue_estimate()[1],
            "bad_state_fraction": self.bad_state_fraction()[1],
        }

    def to_record(self, taus=()):
        """Plain-python summary suitable for JSON output."""
        mean, mean_se = self.mean_queue_estimate()
        bad, bad_se = self.bad_state_fraction()
        return {
            "seed": self.seed,
            "blocks_recorded": self.blocks_recorded,
            "batches": int(self.batch_counts.shape[0]),
            "unstable": self.unstable,
            "stability_margin": self.stability_margin,
            "decode_attempts": self.decode_attempts,
            "decode_failures": self.decode_failures,
            "mean_queue": mean,
            "mean_queue_se": mean_se,
            "bad_state_fraction": bad,
            "bad_state_fraction_se": bad_se,
            "tail": [
                {"tau": int(t), "probability": p, "standard_error": s}
                for t in taus
                for p, s in [self.tail(int(t))]
            ],
            "level_masses": self.empirical_level_masses.tolist(),
            **self.extra,
        }


def merge_results(results):
    """Combine independent replications by pooling their batches."""
    results = list(results)
    if not results:
        raise ValueError("nothing to merge")
    depth = max(r.batch_counts.shape[1] for r in results)
    padded = [
        np.pad(r.batch_counts, ((0, 0), (0, depth - r.batch_counts.shape[1]), (0, 0)))
        for r in results
    ]
    return SimResult(
        batch_counts=np.concatenate(padded, axis=0),
        decode_attempts=sum(r.decode_attempts for r in results),
        decode_failures=sum(r.decode_failures for r in results),
        seed=results[0].seed,
        stability_margin=results[0].stability_margin,
    )


@numba.njit(cache=True)
def _channel_blocks(state, n, u_trans, u_erase, eps_b, eps_g, alpha, beta, start, end, erasures):
    """Run the channel bit by bit over ``start.size`` consecutive blocks."""
    idx = 0
    for blk in range(start.shape[0]):
        start[blk] = state
        e = 0
        for _ in range(n):
            if state == 0:
                if u_erase[idx] < eps_b:
                    e += 1
                if u_trans[idx] < alpha:
                    state = 1
            else:
                if u_erase[idx] < eps_g:
                    e += 1
                if u_trans[idx] < beta:
                    state = 0
            idx += 1
        erasures[blk] = e
        end[blk] = state
    return state


@numba.njit(cache=True)
def _queue_blocks(
    q, head_left, erasures, u_decode, u_depart, u_arrive, u_length, words,
    use_matrix, parity, pf, gamma, rr, materialize, log1m_rho, info_bits, queue_out,
):
    attempts = 0
    failures = 0
    for blk in range(erasures.shape[0]):
        queue_out[blk] = q
        departed = 0
        if q > 0:
            attempts += 1
            e = erasures[blk]
            if use_matrix:
                if e == 0:
                    ok = True
                elif e > parity:
                    ok = False
                else:
                    mask = (np.uint64(1) << np.uint64(e)) - np.uint64(1)
                    rows = words[blk, :parity] & mask
                    ok = gf2_rank(rows) == e
            else:
                ok = u_decode[blk] >= pf[e]
            if ok:
                if materialize:
                    if head_left == 0:
                        bits = np.ceil(np.log(1.0 - u_length[blk]) / log1m_rho)
                        head_left = max(1, int(np.ceil(bits / info_bits)))
                    head_left -= 1
                    if head_left == 0:
                        departed = 1
                elif u_depart[blk] < rr:
                    departed = 1
            else:
                failures += 1
        if u_arrive[blk] < gamma:
            q += 1
        q -= departed
    return q, head_left, attempts, failures


class _Run:
    """Mutable state of one simulation replication."""

    def __init__(self, config, rng):
        self.config = config
        self.rng = rng
        ch = config.channel
        self.state = BAD if rng.random() < channel_stationary(ch)[BAD] else GOOD
        self.queue = 0
        self.head_left = 0
        code = config.code
        self.pf = failure_probabilities(code.parity_bits, code.blocklength)
        self.rr = segment_completion_prob(config.traffic, code)
        self.use_matrix = config.fidelity is Fidelity.MATRIX_SAMPLING

    def advance(self, nblocks, record):
        cfg = self.config
        ch, code, n = cfg.channel, cfg.code, cfg.code.blocklength
        rng = self.rng
        start = np.empty(nblocks, dtype=np.int8)
        end = np.empty(nblocks, dtype=np.int8)
        erasures = np.empty(nblocks, dtype=np.int64)
        u_trans = rng.random(nblocks * n)
        u_erase = rng.random(nblocks * n)
        self.state = _channel_blocks(
            self.state, n, u_trans, u_erase, ch.eps_b, ch.eps_g, ch.alpha, ch.beta,
            start, end, erasures,
        )
        u_decode = rng.random(nblocks)
        u_depart = rng.random(nblocks)
        u_arrive = rng.random(nblocks)
        u_length = rng.random(nblocks) if cfg.materialize_packets else u_arrive
        parity = code.parity_bits
        if self.use_matrix:
            words = rng.integers(
                0, np.iinfo(np.uint64).max, size=(nblocks, max(parity, 1)),
                dtype=np.uint64, endpoint=True,
            )
        else:
            words = np.zeros((1, 1), dtype=np.uint64)
        queue = np.empty(nblocks, dtype=np.int64)
        self.queue, self.head_left, attempts, failures = _queue_blocks(
            self.queue, self.head_left, erasures, u_decode, u_depart, u_arrive, u_length,
            words, self.use_matrix, parity, self.pf, cfg.traffic.gamma, self.rr,
            cfg.materialize_packets, np.log1p(-cfg.traffic.rho), code.info_bits, queue,
        )
        if not record:
            return None
        return queue, start, attempts, failures


def _stream(seed, replication):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def simulate(config, replication=0):
    """Simulate the queue for ``config.blocks_to_simulate`` blocks.

    Per block the channel is advanced ``N`` uses (even when the queue is
    empty); a nonempty queue attempts one decode, and on success the head
    packet departs with the segment-completion probability; then a packet
    arrives with probability ``gamma``. The queue length is recorded at the
    start of each block after the warm-up. Any recorded horizon not divisible
    by ``config.batches`` is absorbed into the warm-up so batches have equal
    size.

    ``replication`` selects an independent random stream for the same seed.
    """
    margin = stability_margin(build_blocks(config.channel, config.code, config.traffic), config.channel)
    run = _Run(config, _stream(config.seed, replication))

    recorded = config.blocks_to_simulate - config.warmup_blocks
    batch_size = recorded // config.batches
    warmup = config.blocks_to_simulate - batch_size * config.batches

    left = warmup
    while left:
        step = min(left, _CHUNK_BLOCKS)
        run.advance(step, record=False)
        left -= step

    batch_rows = []
    attempts = failures = 0
    for _ in range(config.batches):
        counts = np.zeros((1, 2), dtype=np.int64)
        left = batch_size
        while left:
            step = min(left, _CHUNK_BLOCKS)
            queue, start, a, f = run.advance(step, record=True)
            attempts += a
            failures += f
            flat = np.bincount(queue * 2 + start, minlength=2)
            levels = flat.size // 2 + flat.size % 2
            flat = np.pad(flat, (0, 2 * levels - flat.size)).reshape(levels, 2)
            if levels > counts.shape[0]:
                counts = np.pad(counts, ((0, levels - counts.shape[0]), (0, 0)))
            counts[:levels] += flat
            left -= step
        batch_rows.append(counts)

    depth = max(c.shape[0] for c in batch_rows)
    batch_counts = np.stack([np.pad(c, ((0, depth - c.shape[0]), (0, 0))) for c in batch_rows])
    return SimResult(
        batch_counts=batch_counts,
        decode_attempts=int(attempts),
        decode_failures=int(failures),
        seed=config.seed,
        stability_margin=margin,
    )


def simulate_erasure_histogram(channel, blocklength, blocks, seed):
    """Counts of (start state, end state, erasures) over consecutive blocks.

    The chain starts from its stationary law, so every block's start state
    is stationary-distributed. Divide by ``blocks`` for frequencies.
    """
    n = check_count(blocklength, "blocklength", minimum=1)
    total = check_count(blocks, "blocks", minimum=1)
    rng = _stream(seed, 0)
    state = BAD if rng.random() < channel_stationary(channel)[BAD] else GOOD
    hist = np.zeros((2, 2, n + 1), dtype=np.int64)
    left = total
    while left:
        step = min(left, _CHUNK_BLOCKS)
        start = np.empty(step, dtype=np.int8)
        end = np.empty(step, dtype=np.int8)
        erasures = np.empty(step, dtype=np.int64)
        state = _channel_blocks(
            state, n, rng.random(step * n), rng.random(step * n),
            channel.eps_b, channel.eps_g, channel.alpha, channel.beta, start, end, erasures,
        )
        np.add.at(hist, (start, end, erasures), 1)
        left -= step
    return hist


def config_record(config):
    rec = asdict(config)
    rec["fidelity"] = config.fidelity.value
    return rec
