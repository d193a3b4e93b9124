"""Two-state Gilbert-Elliot erasure channel.

States are ordered ``(b, g)``: index 0 is the bad state, index 1 the good
state. Every matrix and vector in the package follows this ordering.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_probability

BAD, GOOD = 0, 1
STATE_NAMES = ("b", "g")

MAX_BLOCKLENGTH = 10_000


@dataclass(frozen=True)
class ChannelParams:
    """Gilbert-Elliot parameters.

    Parameters
    ----------
    alpha : float
        Per-use probability of moving from the bad to the good state.
    beta : float
        Per-use probability of moving from the good to the bad state.
    eps_b, eps_g : float
        Bit erasure probability while in the bad / good state.
    """

    alpha: float
    beta: float
    eps_b: float
    eps_g: float

    def __post_init__(self):
        for name in ("alpha", "beta", "eps_b", "eps_g"):
            object.__setattr__(self, name, check_probability(getattr(self, name), name))
        if self.eps_b < self.eps_g:
            raise ValueError(
                f"eps_b must be >= eps_g (bad state is the noisier one), "
                f"got eps_b={self.eps_b}, eps_g={self.eps_g}"
            )
        if self.alpha + self.beta == 0.0:
            raise ValueError("alpha + beta must be positive for an ergodic channel")

    @property
    def erasure_probs(self):
        return np.array([self.eps_b, self.eps_g])


@dataclass(frozen=True)
class ErasureJoint:
    """Joint law of erasure count and final state over one codeword.

    ``table[c, d, e]`` is the probability of ``e`` erasures in ``blocklength``
    channel uses that end in state ``d``, given the block started in ``c``.
    """

    blocklength: int
    table: np.ndarray

    def __post_init__(self):
        expected = (2, 2, self.blocklength + 1)
        if self.table.shape != expected:
            raise ValueError(f"table must have shape {expected}, got {self.table.shape}")
        self.table.setflags(write=False)

    def state_transition(self):
        """Block-level transition matrix, i.e. P**N recovered by marginalising e."""
        return self.table.sum(axis=2)

    def erasure_pmf(self, initial_state_dist):
        """Marginal pmf of the erasure count under a given initial-state law."""
        dist = np.asarray(initial_state_dist, dtype=float)
        return np.einsum("c,cde->e", dist, self.table)


def channel_transition_matrix(params):
    a, b = params.alpha, params.beta
    return np.array([[1.0 - a, a], [b, 1.0 - b]])


def channel_stationary(params):
    """Stationary law ``[beta, alpha] / (alpha + beta)`` of the state chain."""
    total = params.alpha + params.beta
    return np.array([params.beta / total, params.alpha / total])


def channel_memory(params):
    """Second eigenvalue of the transition matrix, ``1 - alpha - beta``."""
    return 1.0 - params.alpha - params.beta


def average_erasure_probability(params):
    return float(channel_stationary(params) @ params.erasure_probs)


def erasure_joint(params, blocklength):
    """Exact joint distribution of (erasures, final state) given the start state.

    Extracts the coefficients of the polynomial matrix power ``P_x ** N`` by
    dynamic programming over (channel use, current state, erasures so far).
    Row ``c`` of ``P_x`` carries the factor ``1 - eps_c + eps_c x``: the bit
    sent during a transition out of state ``c`` is erased with probability
    ``eps_c``.
    """
    n = check_count(blocklength, "blocklength", minimum=1, maximum=MAX_BLOCKLENGTH)
    P = channel_transition_matrix(params)
    eps = params.erasure_probs

    # cur[c, s, e]: started in c, currently in s, e erasures so far
    cur = np.zeros((2, 2, n + 1))
    cur[BAD, BAD, 0] = 1.0
    cur[GOOD, GOOD, 0] = 1.0
    for step in range(n):
        split = cur * (1.0 - eps)[None, :, None]
        split[:, :, 1 : step + 2] += cur[:, :, : step + 1] * eps[None, :, None]
        cur = np.einsum("cse,sd->cde", split, P)
    np.clip(cur, 0.0, 1.0, out=cur)
    return ErasureJoint(blocklength=n, table=cur)
