"""Matrix-geometric stationary solution of the queue/channel QBD.

Level ``q`` of the stationary law satisfies ``pi_1 = pi_0 Z`` and
``pi_{q+1} = pi_q R`` for ``q >= 1``, with ``R`` the minimal nonnegative
solution of ``R = A0 + R A1 + R**2 A2``.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._validation import check_count, check_square
from .exceptions import ConvergenceError, SingularMatrixError, UnstableSystemError
from .qbd_model import drift_margin, phase_stationary

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10**6
ILL_CONDITIONED_MARGIN = 1e-6
_SINGULAR_RCOND = 1e-13


@dataclass(frozen=True)
class StationarySolution:
    rate_matrix: np.ndarray
    boundary_matrix: object
    pi0: np.ndarray
    pi1: np.ndarray
    spectral_radius_R: float
    iterations_used: int
    residual: float
    blocks: object = field(repr=False)
    phase_law: np.ndarray = field(repr=False)
    stability_margin: float = float("nan")
    ill_conditioned: bool = False
    boundary_method: str = "closed_form"

    @property
    def phases(self):
        return self.pi0.shape[0]


def spectral_radius(matrix):
    """Spectral radius, in closed form for 1x1 and 2x2 matrices."""
    m = check_square(matrix, "matrix")
    if m.shape == (1, 1):
        return abs(float(m[0, 0]))
    if m.shape == (2, 2):
        a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
        half_trace = 0.5 * (a + d)
        disc = 0.25 * (a - d) ** 2 + b * c
        if disc >= 0.0:
            root = math.sqrt(disc)
            return float(max(abs(half_trace + root), abs(half_trace - root)))
        # complex conjugate pair: |lambda|^2 = det
        return float(math.sqrt(a * d - b * c))
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def _inverse(matrix, name, parameter=None):
    m = np.asarray(matrix, dtype=float)
    if np.linalg.cond(m) * _SINGULAR_RCOND > 1.0 or not np.all(np.isfinite(m)):
        raise SingularMatrixError(name, parameter)
    return np.linalg.inv(m)


@numba.njit(cache=True)
def _iterate_rate_matrix(a0, a2, inv_i_minus_a1, tol, max_iter):
    n = a0.shape[0]
    r = np.zeros((n, n))
    diff = np.inf
    it = 0
    while it < max_iter:
        it += 1
        new = (a0 + r @ r @ a2) @ inv_i_minus_a1
        diff = np.max(np.abs(new - r))
        r = new
        if diff <= tol:
            break
    return r, it, diff


def rate_residual(R, blocks):
    """Max-abs residual of the fixed-point equation for R."""
    n = blocks.phases
    rhs = (blocks.a0 + R @ R @ blocks.a2) @ np.linalg.inv(np.eye(n) - blocks.a1)
    return float(np.max(np.abs(R - rhs)))


def solve_rate_matrix(blocks, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, phase_law=None):
    """Iterate ``R_{j+1} = (A0 + R_j**2 A2)(I - A1)^{-1}`` from ``R_0 = 0``.

    Returns ``(R, iterations, residual)`` where ``residual`` is the max-abs
    fixed-point residual of the returned matrix.

    Raises
    ------
    UnstableSystemError
        If the mean drift is not toward level zero.
    ConvergenceError
        If successive iterates still differ by more than ``tol`` after
        ``max_iter`` steps.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    max_iter = check_count(max_iter, "max_iter", minimum=1)
    if phase_law is None:
        phase_law = phase_stationary(blocks)
    margin = drift_margin(blocks, phase_law)
    if margin <= 0.0:
        raise UnstableSystemError(margin)

    n = blocks.phases
    inv = _inverse(np.eye(n) - blocks.a1, "I - A1")
    R, iterations, diff = _iterate_rate_matrix(
        np.ascontiguousarray(blocks.a0), np.ascontiguousarray(blocks.a2), inv, float(tol), max_iter
    )
    if diff > tol:
        raise ConvergenceError(iterations, diff)
    return R, int(iterations), rate_residual(R, blocks)


def solve_boundary(blocks, R, phase_law, parameter_hint=None):
    """Boundary matrix ``Z`` and empty-queue vector ``pi_0``.

    ``Z = (I - C1) A2^{-1}`` comes from balance at level 0; ``pi_0`` is fixed
    by requiring the phase marginal of the whole distribution to equal
    ``phase_law``.
    """
    n = blocks.phases
    eye = np.eye(n)
    Z = (eye - blocks.c1) @ _inverse(blocks.a2, "A2", parameter_hint)
    tail_sum = _inverse(eye - R, "I - R")
    normaliser = _inverse(eye + Z @ tail_sum, "I + Z (I - R)^-1")
    pi0 = np.asarray(phase_law, dtype=float) @ normaliser
    return Z, np.clip(pi0, 0.0, None)


def solve_boundary_balance(blocks, R):
    """``(pi_0, pi_1)`` from the level-0/level-1 balance equations and normalisation.

    Works when A2 is singular (e.g. a memoryless channel makes it rank one),
    where the closed-form boundary matrix does not exist.
    """
    n = blocks.phases
    eye = np.eye(n)
    tail_sum = _inverse(eye - R, "I - R").sum(axis=1)
    # x = [pi0, pi1];  x @ M = [0, ..., 0, 1]
    M = np.zeros((2 * n, 2 * n + 1))
    M[:n, :n] = blocks.c1 - eye
    M[n:, :n] = blocks.a2
    M[:n, n : 2 * n] = blocks.c0
    M[n:, n : 2 * n] = blocks.a1 + R @ blocks.a2 - eye
    M[:n, -1] = 1.0
    M[n:, -1] = tail_sum
    rhs = np.zeros(2 * n + 1)
    rhs[-1] = 1.0
    x, _, rank, _ = np.linalg.lstsq(M.T, rhs, rcond=None)
    if rank < 2 * n:
        raise SingularMatrixError("boundary balance system")
    x = np.clip(x, 0.0, None)
    return x[:n], x[n:]


BOUNDARY_METHODS = ("closed_form", "balance", "auto")


def solve(
    blocks,
    tol=DEFAULT_TOL,
    max_iter=DEFAULT_MAX_ITER,
    phase_law=None,
    parameter_hint=None,
    boundary="closed_form",
):
    """Full stationary solution of the QBD described by ``blocks``.

    ``boundary`` selects how the level-0/1 vectors are found: ``"closed_form"``
    uses ``Z = (I - C1) A2^{-1}`` and the phase-marginal normalisation,
    ``"balance"`` solves the boundary balance equations directly, and
    ``"auto"`` computes both and keeps the one with the smaller balance
    residuals. The closed form loses accuracy when A2 is badly conditioned,
    which happens whenever the block transition ``P**N`` is close to rank one.
    """
    if boundary not in BOUNDARY_METHODS:
        raise ValueError(f"boundary must be one of {BOUNDARY_METHODS}, got {boundary!r}")
    if phase_law is None:
        phase_law = phase_stationary(blocks)
    phase_law = np.asarray(phase_law, dtype=float)
    margin = drift_margin(blocks, phase_law)
    R, iterations, residual = solve_rate_matrix(blocks, tol, max_iter, phase_law)

    def build(Z, pi0, pi1, method):
        return StationarySolution(
            rate_matrix=R,
            boundary_matrix=Z,
            pi0=pi0,
            pi1=pi1,
            spectral_radius_R=spectral_radius(R),
            iterations_used=iterations,
            residual=residual,
            blocks=blocks,
            phase_law=phase_law,
            stability_margin=margin,
            ill_conditioned=margin < ILL_CONDITIONED_MARGIN,
            boundary_method=method,
        )

    candidates = []
    if boundary in ("closed_form", "auto"):
        try:
            Z, pi0 = solve_boundary(blocks, R, phase_law, parameter_hint)
            candidates.append(build(Z, pi0, np.clip(pi0 @ Z, 0.0, None), "closed_form"))
        except SingularMatrixError:
            if boundary == "closed_form":
                raise
    if boundary in ("balance", "auto"):
        try:
            candidates.append(build(None, *solve_boundary_balance(blocks, R), "balance"))
        except SingularMatrixError:
            if not candidates:
                raise
    return min(candidates, key=lambda sol: max(balance_residuals(sol).values()))


def level_distribution(sol, q):
    """Stationary mass of level ``q`` split by phase."""
    q = check_count(q, "q")
    if q == 0:
        return sol.pi0.copy()
    return sol.pi1 @ np.linalg.matrix_power(sol.rate_matrix, q - 1)


def _log_apply_power(vector, matrix, power):
    """Return ``(w, log_scale)`` with ``vector @ matrix**power == w * exp(log_scale)``.

    Keeps both operands normalised during binary powering so large powers of
    a contraction do not underflow.
    """
    w = np.array(vector, dtype=float)
    w_log = 0.0
    base = np.array(matrix, dtype=float)
    base_log = 0.0
    n = power
    while n:
        if n & 1:
            w = w @ base
            w_log += base_log
            s = np.abs(w).sum()
            if s == 0.0:
                return w, -math.inf
            w /= s
            w_log += math.log(s)
        n >>= 1
        if n:
            base = base @ base
            base_log *= 2.0
            m = np.abs(base).max()
            if m == 0.0:
                return np.zeros_like(w), -math.inf
            base /= m
            base_log += math.log(m)
    return w, w_log


def log_tail_probability(sol, tau):
    """Natural log of ``Pr(Q > tau)``; ``-inf`` when the tail is empty."""
    tau = check_count(tau, "tau")
    n = sol.phases
    tail_sum = np.linalg.inv(np.eye(n) - sol.rate_matrix).sum(axis=1)
    w, w_log = _log_apply_power(sol.pi1, sol.rate_matrix, tau)
    val = float(w @ tail_sum)
    if val <= 0.0 or w_log == -math.inf:
        return -math.inf
    return math.log(val) + w_log


def tail_probability(sol, tau):
    """``Pr(Q > tau) = pi_1 R**tau (I - R)^{-1} 1``."""
    return math.exp(log_tail_probability(sol, tau))


def decay_rate(sol):
    """Asymptotic exponent ``log rho(R)`` of the queue tail (``-inf`` if R = 0)."""
    rho = sol.spectral_radius_R
    return math.log(rho) if rho > 0.0 else -math.inf


def mean_queue_length(sol):
    n = sol.phases
    inv = np.linalg.inv(np.eye(n) - sol.rate_matrix)
    return float(sol.pi1 @ inv @ inv @ np.ones(n))


def balance_residuals(sol):
    """Max-abs residuals of the identities the stationary law must satisfy."""
    b = sol.blocks
    n = sol.phases
    eye = np.eye(n)
    R = sol.rate_matrix
    pi0, pi1 = sol.pi0, sol.pi1
    pi2 = pi1 @ R
    marginal = pi0 + pi1 @ np.linalg.inv(eye - R)
    return {
        "rate_equation": rate_residual(R, b),
        "level0_balance": float(np.max(np.abs(pi0 @ b.c1 + pi1 @ b.a2 - pi0))),
        "level1_balance": float(np.max(np.abs(pi0 @ b.c0 + pi1 @ b.a1 + pi2 @ b.a2 - pi1))),
        "normalization": float(abs(marginal.sum() - 1.0)),
        "phase_marginal": float(np.max(np.abs(marginal - sol.phase_law))),
    }
