"""Traffic model and the transition blocks of the queue/channel QBD.

Levels are queue lengths (in packets), phases are channel states at the
start of a block. The transition matrix has the repeating form::

    C1 C0
    A2 A1 A0
       A2 A1 A0
          ...
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_probability
from .channel import channel_stationary, erasure_joint
from .coding import failure_probabilities


@dataclass(frozen=True)
class TrafficParams:
    """Bernoulli packet arrivals with geometric packet lengths.

    ``gamma`` is the per-block arrival probability, ``rho`` the geometric
    parameter of the packet length in bits (mean ``1 / rho``).
    """

    gamma: float
    rho: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", check_probability(self.gamma, "gamma"))
        object.__setattr__(
            self, "rho", check_probability(self.rho, "rho", open_low=True, open_high=True)
        )

    @property
    def mean_packet_bits(self):
        return 1.0 / self.rho

    @property
    def arrival_bits_per_block(self):
        return self.gamma / self.rho


@dataclass(frozen=True)
class QbdBlocks:
    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    c0: np.ndarray
    c1: np.ndarray

    def __post_init__(self):
        shape = self.a0.shape
        for name in ("a0", "a1", "a2", "c0", "c1"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape != shape or shape[0] != shape[1]:
                raise ValueError(f"block {name} must be square with shape {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def phases(self):
        return self.a0.shape[0]

    def phase_transition(self):
        """A0 + A1 + A2, the block-level channel transition matrix."""
        return self.a0 + self.a1 + self.a2


def segment_completion_prob(traffic, code):
    """Probability that a decoded segment is the last one of its packet.

    The segment count of a geometric(rho) packet cut into K-bit pieces is
    geometric with parameter ``1 - (1 - rho)**K``.
    """
    return float(-np.expm1(code.info_bits * np.log1p(-traffic.rho)))


def build_blocks(channel, code, traffic, joint=None):
    """Assemble the five QBD blocks.

    ``joint`` may be passed to reuse a precomputed erasure table across
    several codes with the same blocklength.
    """
    if joint is None:
        joint = erasure_joint(channel, code.blocklength)
    elif joint.blocklength != code.blocklength:
        raise ValueError("erasure table blocklength does not match the code")

    pf = failure_probabilities(code.parity_bits, code.blocklength)
    rr = segment_completion_prob(traffic, code)
    g = traffic.gamma
    ok = 1.0 - pf
    # per-erasure-count probability that the head packet stays / leaves
    stay = pf + ok * (1.0 - rr)
    leave = ok * rr

    table = joint.table
    block_p = joint.state_transition()
    a0 = g * (table @ stay)
    a2 = (1.0 - g) * (table @ leave)
    a1 = table @ (g * leave + (1.0 - g) * stay)
    return QbdBlocks(
        a0=a0,
        a1=a1,
        a2=a2,
        c0=g * block_p,
        c1=(1.0 - g) * block_p,
    )


def phase_stationary(blocks):
    """Stationary vector of A0 + A1 + A2 (2 phases, closed form)."""
    s = blocks.phase_transition()
    if s.shape == (1, 1):
        return np.ones(1)
    if s.shape != (2, 2):
        raise ValueError("closed-form phase stationary law needs 2 phases")
    up, down = s[0, 1], s[1, 0]
    if up + down <= 0.0:
        raise ValueError("phase process is reducible")
    return np.array([down, up]) / (up + down)


def drift_margin(blocks, phase_law):
    return float(phase_law @ blocks.a2.sum(axis=1) - phase_law @ blocks.a0.sum(axis=1))


def stability_margin(blocks, channel):
    """Mean downward minus mean upward drift under the stationary channel law.

    Positive iff the queue is positive recurrent.
    """
    return drift_margin(blocks, channel_stationary(channel))
