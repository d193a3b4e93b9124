"""Decoding failure of random binary parity-check codes on erasure channels."""

import math
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_count, check_distribution

MAX_SAMPLED_ERASURES = 64


@dataclass(frozen=True)
class CodeConfig:
    """Blocklength ``N`` and information bits ``K`` of a random linear code."""

    blocklength: int
    info_bits: int

    def __post_init__(self):
        n = check_count(self.blocklength, "blocklength", minimum=1)
        k = check_count(self.info_bits, "info_bits", minimum=1, maximum=n)
        object.__setattr__(self, "blocklength", n)
        object.__setattr__(self, "info_bits", k)

    @property
    def parity_bits(self):
        return self.blocklength - self.info_bits

    @property
    def rate(self):
        return self.info_bits / self.blocklength


def failure_probability(parity_bits, erasures):
    """Probability that ``erasures`` erased columns of a random parity-check
    matrix with ``parity_bits`` rows are linearly dependent over GF(2).

    ``1 - prod_{i<e} (1 - 2**(i - p))``, evaluated as ``-expm1(sum log1p(...))``
    so that tiny failure probabilities keep their relative precision.
    """
    p = check_count(parity_bits, "parity_bits")
    e = check_count(erasures, "erasures")
    if e == 0:
        return 0.0
    if e > p:
        return 1.0
    log_success = math.fsum(math.log1p(-(2.0 ** (i - p))) for i in range(e))
    return min(1.0, max(0.0, -math.expm1(log_success)))


def failure_probabilities(parity_bits, max_erasures):
    """Vector of ``failure_probability(parity_bits, e)`` for ``e = 0..max_erasures``."""
    p = check_count(parity_bits, "parity_bits")
    m = check_count(max_erasures, "max_erasures")
    out = np.ones(m + 1)
    upto = min(m, p)
    i = np.arange(upto)
    log_terms = np.log1p(-np.exp2(i - p))
    log_success = np.concatenate(([0.0], np.cumsum(log_terms)))
    out[: upto + 1] = -np.expm1(log_success)
    # e = p + 1 onward includes the zero factor at i = p
    out[0] = 0.0
    return np.clip(out, 0.0, 1.0)


def avg_failure_probability(code, joint, initial_state_dist):
    """Failure probability averaged over the erasure count of one block."""
    if joint.blocklength != code.blocklength:
        raise ValueError(
            f"blocklength mismatch: code has N={code.blocklength}, "
            f"erasure table has N={joint.blocklength}"
        )
    dist = check_distribution(initial_state_dist, "initial_state_dist", 2)
    pf = failure_probabilities(code.parity_bits, code.blocklength)
    return float(joint.erasure_pmf(dist) @ pf)


@numba.njit(cache=True)
def gf2_rank(rows):
    """Rank over GF(2) of a matrix whose rows are packed into uint64 words."""
    work = rows.copy()
    n = work.shape[0]
    rank = 0
    for bit in range(64):
        mask = np.uint64(1) << np.uint64(bit)
        pivot = -1
        for r in range(rank, n):
            if work[r] & mask:
                pivot = r
                break
        if pivot < 0:
            continue
        tmp = work[rank]
        work[rank] = work[pivot]
        work[pivot] = tmp
        for r in range(n):
            if r != rank and (work[r] & mask):
                work[r] ^= work[rank]
        rank += 1
        if rank == n:
            break
    return rank


@numba.njit(cache=True)
def _count_rank_deficient(words, erasures):
    # words: (draws, parity_bits) rows of the transposed e x p submatrix
    failures = 0
    for t in range(words.shape[0]):
        if gf2_rank(words[t]) < erasures:
            failures += 1
    return failures


def _random_words(rng, shape, nbits):
    words = rng.integers(0, np.iinfo(np.uint64).max, size=shape, dtype=np.uint64, endpoint=True)
    if nbits < 64:
        words &= np.uint64((1 << nbits) - 1)
    return words


def _check_sampling_args(parity_bits, erasures):
    p = check_count(parity_bits, "parity_bits")
    e = check_count(erasures, "erasures")
    # e > p is rank deficient for certain and needs no sampling
    if p >= e > MAX_SAMPLED_ERASURES:
        raise ValueError(
            f"matrix sampling supports at most {MAX_SAMPLED_ERASURES} erasures "
            f"(got {e}); use failure_probability for the exact value"
        )
    return p, e


def rank_failure_sample(parity_bits, erasures, rng):
    """Draw one uniformly random ``e x p`` binary matrix; True if its rank is < e.

    The matrix is stored transposed, one ``e``-bit word per parity row, which
    has the same rank.
    """
    p, e = _check_sampling_args(parity_bits, erasures)
    if e == 0:
        return False
    if e > p:
        return True
    return bool(gf2_rank(_random_words(rng, p, e)) < e)


def rank_failure_count(parity_bits, erasures, draws, rng):
    """Number of rank-deficient matrices among ``draws`` independent samples."""
    p, e = _check_sampling_args(parity_bits, erasures)
    draws = check_count(draws, "draws")
    if e == 0:
        return 0
    if e > p:
        return draws
    return int(_count_rank_deficient(_random_words(rng, (draws, p), e), e))
