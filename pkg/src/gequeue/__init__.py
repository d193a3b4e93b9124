"""Queueing behaviour of random linear codes over a Gilbert-Elliot erasure channel."""

from .channel import (
    ChannelParams,
    ErasureJoint,
    average_erasure_probability,
    channel_memory,
    channel_stationary,
    channel_transition_matrix,
    erasure_joint,
)
from .coding import (
    CodeConfig,
    avg_failure_probability,
    failure_probability,
    rank_failure_count,
    rank_failure_sample,
)
from .estimators import CodeRateSelector, QueueTailEstimator
from .exceptions import ConvergenceError, QueueModelError, SingularMatrixError, UnstableSystemError
from .qbd_model import (
    QbdBlocks,
    TrafficParams,
    build_blocks,
    segment_completion_prob,
    stability_margin,
)
from .qbd_solver import (
    StationarySolution,
    decay_rate,
    level_distribution,
    mean_queue_length,
    solve,
    solve_boundary,
    solve_rate_matrix,
    tail_probability,
)
from .simulator import SimConfig, SimResult, simulate, simulate_erasure_histogram
from .sweep import (
    SweepSpec,
    decay_surface,
    infinite_backlog_throughput,
    rate_conversions,
    solve_system,
    sweep_code_rate,
    throughput_sweep,
)

__version__ = "0.1.0"
