"""scikit-learn style front ends for the queue model.

The estimators take every model parameter as a constructor hyperparameter,
so ``get_params`` / ``set_params`` / ``clone`` work as usual. ``fit`` solves
the model (there is no training data; ``X`` and ``y`` are accepted and
ignored for pipeline compatibility) and ``predict`` maps queue thresholds to
tail probabilities.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_thresholds
from .channel import ChannelParams, average_erasure_probability, channel_stationary, erasure_joint
from .coding import CodeConfig, avg_failure_probability
from .qbd_model import TrafficParams, build_blocks, segment_completion_prob, stability_margin
from .qbd_solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    decay_rate,
    level_distribution,
    log_tail_probability,
    mean_queue_length,
)
from .sweep import DEFAULT_TAUS, SweepSpec, solve_system, sweep_code_rate


class QueueTailEstimator(BaseEstimator):
    """Stationary queue-length law of a coded link over a Gilbert-Elliot channel.

    Parameters
    ----------
    alpha, beta, eps_b, eps_g : float
        Channel transition and erasure probabilities.
    blocklength, info_bits : int
        Codeword length ``N`` and information bits ``K``.
    gamma, rho : float
        Per-block packet arrival probability and geometric packet-length
        parameter.
    tol, max_iter : float, int
        Stopping rule of the rate-matrix iteration.
    boundary : {"auto", "closed_form", "balance"}
        How the empty-queue boundary is solved.

    Attributes
    ----------
    solution_ : StationarySolution
    stability_margin_ : float
    decay_rate_ : float
        ``log`` of the spectral radius of the rate matrix.
    mean_queue_length_ : float
    avg_failure_probability_ : float
    """

    def __init__(
        self,
        alpha=0.02,
        beta=0.005,
        eps_b=0.49,
        eps_g=0.0025,
        blocklength=114,
        info_bits=83,
        gamma=0.25,
        rho=1 / 195,
        tol=DEFAULT_TOL,
        max_iter=DEFAULT_MAX_ITER,
        boundary="auto",
    ):
        self.alpha = alpha
        self.beta = beta
        self.eps_b = eps_b
        self.eps_g = eps_g
        self.blocklength = blocklength
        self.info_bits = info_bits
        self.gamma = gamma
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter
        self.boundary = boundary

    def _components(self):
        channel = ChannelParams(self.alpha, self.beta, self.eps_b, self.eps_g)
        code = CodeConfig(self.blocklength, self.info_bits)
        traffic = TrafficParams(self.gamma, self.rho)
        return channel, code, traffic

    def fit(self, X=None, y=None):
        channel, code, traffic = self._components()
        joint = erasure_joint(channel, code.blocklength)
        self.channel_, self.code_, self.traffic_ = channel, code, traffic
        self.blocks_ = build_blocks(channel, code, traffic, joint)
        self.stability_margin_ = stability_margin(self.blocks_, channel)
        self.segment_completion_prob_ = segment_completion_prob(traffic, code)
        self.avg_failure_probability_ = avg_failure_probability(
            code, joint, channel_stationary(channel)
        )
        self.solution_ = solve_system(
            channel, code, traffic, joint, self.tol, self.max_iter, self.boundary
        )
        self.decay_rate_ = decay_rate(self.solution_)
        self.mean_queue_length_ = mean_queue_length(self.solution_)
        return self

    def predict(self, X):
        """``Pr(Q > tau)`` for each threshold ``tau`` in ``X``."""
        return np.exp(self.predict_log(X))

    def predict_log(self, X):
        check_is_fitted(self, "solution_")
        taus = check_thresholds(X)
        return np.array([log_tail_probability(self.solution_, int(t)) for t in taus])

    def level_probabilities(self, q_max):
        """Array of shape ``(q_max + 1, 2)`` with the mass of each (level, state)."""
        check_is_fitted(self, "solution_")
        return np.array([level_distribution(self.solution_, q) for q in range(q_max + 1)])

    def score(self, X, y=None):
        """Negative mean log tail probability over the thresholds in ``X``.

        Larger is better (lighter tails), matching scikit-learn's convention.
        """
        return float(-np.mean(self.predict_log(X)))

    @property
    def average_erasure_probability_(self):
        check_is_fitted(self, "channel_")
        return average_erasure_probability(self.channel_)


class CodeRateSelector(BaseEstimator):
    """Grid search over the number of information bits per codeword.

    ``criterion`` is one of ``"tail"`` (minimise ``Pr(Q > tau)``),
    ``"decay_rate"`` (fastest tail decay), ``"mean_queue"`` or
    ``"throughput"`` (infinite-backlog goodput). After ``fit``,
    ``best_info_bits_`` holds the winner and ``best_estimator_`` a fitted
    :class:`QueueTailEstimator` at that K when the point is stable.
    """

    _criteria = ("tail", "decay_rate", "mean_queue", "throughput")

    def __init__(
        self,
        alpha=0.02,
        beta=0.005,
        eps_b=0.49,
        eps_g=0.0025,
        blocklength=114,
        gamma=0.25,
        rho=1 / 195,
        k_values=None,
        criterion="tail",
        tau=5,
        tol=DEFAULT_TOL,
        max_iter=DEFAULT_MAX_ITER,
    ):
        self.alpha = alpha
        self.beta = beta
        self.eps_b = eps_b
        self.eps_g = eps_g
        self.blocklength = blocklength
        self.gamma = gamma
        self.rho = rho
        self.k_values = k_values
        self.criterion = criterion
        self.tau = tau
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        if self.criterion not in self._criteria:
            raise ValueError(f"criterion must be one of {self._criteria}, got {self.criterion!r}")
        channel = ChannelParams(self.alpha, self.beta, self.eps_b, self.eps_g)
        ks = tuple(self.k_values) if self.k_values is not None else ()
        taus = tuple(sorted(set(DEFAULT_TAUS) | {int(self.tau)}))
        spec = SweepSpec(
            channel,
            CodeConfig(self.blocklength, ks[0] if ks else self.blocklength),
            TrafficParams(self.gamma, self.rho),
            k_values=ks,
            taus=taus,
            tol=self.tol,
            max_iter=self.max_iter,
        )
        self.sweep_ = sweep_code_rate(spec)
        self.table_ = self.sweep_.rows
        stable = [r for r in self.table_ if r["stable"]]
        if self.criterion == "throughput":
            best = self.sweep_.argmax_throughput
        elif not stable:
            raise ValueError("no stable K in the search range")
        elif self.criterion == "tail":
            best = self.sweep_.argmin_tail[int(self.tau)]
        elif self.criterion == "decay_rate":
            best = self.sweep_.argmax_decay
        else:
            best = min(stable, key=lambda r: r["mean_queue"])["K"]
        self.best_info_bits_ = int(best)
        params = {k: v for k, v in self.get_params().items() if k in _SHARED}
        row = next(r for r in self.table_ if r["K"] == best)
        self.best_estimator_ = (
            QueueTailEstimator(info_bits=self.best_info_bits_, **params).fit()
            if row["stable"]
            else None
        )
        return self

    def predict(self, X):
        """Tail probabilities of the selected code rate."""
        check_is_fitted(self, "best_info_bits_")
        if self.best_estimator_ is None:
            raise ValueError("selected K is unstable; no stationary tail to report")
        return self.best_estimator_.predict(X)


_SHARED = ("alpha", "beta", "eps_b", "eps_g", "blocklength", "gamma", "rho", "tol", "max_iter")
