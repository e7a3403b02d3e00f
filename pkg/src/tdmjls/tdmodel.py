"""Builders that turn learning problems into jump linear systems.

TD(0) with linear features over a finite Markov reward process becomes a
jump system on the pair chain ``z = (s', s)``; arbitrary linear stochastic
approximation schemes are accepted as raw ``{A_i, b_i}``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .chain import MarkovChain, stationary_distribution
from .errors import ModelWarning, NonErgodicError, NumericalError, ValidationError
from .mjls import JumpLinearSystem

CENTER_TOL = 1e-10


@dataclass(frozen=True)
class PolicyEvalProblem:
    """Markov reward process under a fixed policy with a linear feature map.

    ``P_s[s, s']`` is the state transition matrix, ``r[s]`` the reward and
    row ``s`` of ``Phi`` the feature vector of state ``s``.
    """

    P_s: np.ndarray
    r: np.ndarray
    gamma: float
    Phi: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P_s, dtype=float))
        r = np.asarray(self.r, dtype=float).reshape(-1)
        Phi = np.asarray(self.Phi, dtype=float)
        if Phi.ndim == 1:
            Phi = Phi[:, None]
        n_s = P.shape[0]
        # reuses the chain's stochasticity checks
        MarkovChain(P, np.full(n_s, 1.0 / n_s))
        if r.shape[0] != n_s:
            raise ValidationError(f"r has length {r.shape[0]}, expected {n_s}")
        if Phi.shape[0] != n_s:
            raise ValidationError(f"Phi has {Phi.shape[0]} rows, expected {n_s}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError(f"gamma must lie in [0, 1), got {self.gamma}")
        sv = np.linalg.svd(Phi, compute_uv=False)
        if Phi.shape[1] > n_s or sv.min() <= 1e-10 * sv.max():
            raise ValidationError("Phi must have full column rank")
        object.__setattr__(self, "P_s", P)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_s(self) -> int:
        return self.P_s.shape[0]

    @property
    def d(self) -> int:
        return self.Phi.shape[1]


@dataclass(frozen=True)
class TDJumpModel:
    """TD(0) error dynamics ``theta - theta*`` as a jump system.

    ``pair_index[i] = (s_next, s)`` names mode ``i``.
    """

    sys: JumpLinearSystem
    theta_star: np.ndarray
    pair_index: tuple
    state_distribution: np.ndarray


def td_fixed_point(problem: PolicyEvalProblem, d_s=None) -> np.ndarray:
    """Solve ``Phi' D (Phi - gamma P Phi) theta = Phi' D r``."""
    if d_s is None:
        d_s = stationary_distribution(MarkovChain(problem.P_s, np.full(problem.n_s, 1.0 / problem.n_s))).p_inf
    Phi, D = problem.Phi, np.diag(d_s)
    M = Phi.T @ D @ (Phi - problem.gamma * problem.P_s @ Phi)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.min() <= 1e-12 * max(sv.max(), 1e-300):
        raise NumericalError("projected Bellman system is singular")
    return np.linalg.solve(M, Phi.T @ D @ problem.r)


def build_td0(problem: PolicyEvalProblem, alpha: float, *, prune: bool = True,
              state_p0=None) -> TDJumpModel:
    """TD(0) as a jump system on the pair chain ``z_k = (s_{k+1}, s_k)``.

    A_(s',s) = phi(s) (gamma phi(s') - phi(s))'
    b_(s',s) = phi(s) (r(s) - (phi(s) - gamma phi(s'))' theta*)

    Pair ``(s', s)`` moves to ``(s'', s')`` with probability ``P_s[s', s'']``.
    Pairs with ``P_s[s, s'] == 0`` are unreachable and dropped unless
    ``prune`` is False. ``state_p0`` is the law of ``s_0`` (stationary by
    default).
    """
    n_s, Phi, gamma = problem.n_s, problem.Phi, problem.gamma
    try:
        d_s = stationary_distribution(MarkovChain(problem.P_s, np.full(n_s, 1.0 / n_s))).p_inf
    except NonErgodicError as exc:
        raise NonErgodicError(f"state chain is not ergodic: {exc}") from exc
    theta = td_fixed_point(problem, d_s)

    pairs = [(sn, s) for s in range(n_s) for sn in range(n_s)
             if not prune or problem.P_s[s, sn] > 0.0]
    index = {pair: i for i, pair in enumerate(pairs)}
    n = len(pairs)
    P = np.zeros((n, n))
    for i, (sn, s) in enumerate(pairs):
        for snn in range(n_s):
            j = index.get((snn, sn))
            if j is not None:
                P[i, j] = problem.P_s[sn, snn]

    s0 = d_s if state_p0 is None else np.asarray(state_p0, dtype=float)
    if s0.shape != (n_s,):
        raise ValidationError(f"state_p0 must have length {n_s}")
    p0 = np.array([s0[s] * problem.P_s[s, sn] for sn, s in pairs])

    A = np.empty((n, problem.d, problem.d))
    b = np.empty((n, problem.d))
    for i, (sn, s) in enumerate(pairs):
        phi, phin = Phi[s], Phi[sn]
        A[i] = np.outer(phi, gamma * phin - phi)
        b[i] = phi * (problem.r[s] - (phi - gamma * phin) @ theta)

    sys = JumpLinearSystem(MarkovChain(P, p0), A, b, alpha)
    p_inf = np.array([d_s[s] * problem.P_s[s, sn] for sn, s in pairs])
    drift = p_inf @ b
    if np.linalg.norm(drift) > CENTER_TOL * max(1.0, np.abs(b).max()):
        raise NumericalError(f"TD offsets not centered: |sum p b| = {np.linalg.norm(drift):.3e}")
    return TDJumpModel(sys=sys, theta_star=theta, pair_index=tuple(pairs),
                       state_distribution=d_s)


def build_generic(A, b, chain: MarkovChain, alpha: float) -> JumpLinearSystem:
    """Wrap user-supplied mode matrices, warning on atypical systems.

    Offsets that do not average to zero under the stationary law, or an
    averaged matrix that is not Hurwitz, only produce a :class:`ModelWarning`.
    """
    sys = JumpLinearSystem(chain, A, b, alpha)
    try:
        p_inf = stationary_distribution(chain).p_inf
    except NonErgodicError:
        warnings.warn("chain is not ergodic; centering and Hurwitz checks skipped",
                      ModelWarning, stacklevel=2)
        return sys
    b_bar = p_inf @ sys.b
    if np.linalg.norm(b_bar) > CENTER_TOL * max(1.0, np.abs(sys.b).max()):
        warnings.warn(f"offsets not centered: |sum p_inf b| = {np.linalg.norm(b_bar):.3e}; "
                      "see center_offsets", ModelWarning, stacklevel=2)
    A_bar = np.einsum("i,ijk->jk", p_inf, sys.A)
    if np.max(np.linalg.eigvals(A_bar).real) >= 0:
        warnings.warn("averaged matrix A_bar is not Hurwitz", ModelWarning, stacklevel=2)
    return sys


def center_offsets(sys: JumpLinearSystem):
    """Shift coordinates so the offsets average to zero.

    Returns ``(centered, shift)`` where ``shift = -A_bar^-1 b_bar`` and the
    centered system has offsets ``A_i shift + b_i``. Paths satisfy
    ``xi = xi_centered + shift``.
    """
    p_inf = stationary_distribution(sys.chain).p_inf
    A_bar = np.einsum("i,ijk->jk", p_inf, sys.A)
    b_bar = p_inf @ sys.b
    sv = np.linalg.svd(A_bar, compute_uv=False)
    if sv.min() <= 1e-12 * max(sv.max(), 1e-300):
        raise NumericalError("averaged matrix A_bar is singular; cannot center")
    shift = -np.linalg.solve(A_bar, b_bar)
    b_new = np.einsum("ijk,k->ij", sys.A, shift) + sys.b
    return JumpLinearSystem(sys.chain, sys.A, b_new, sys.alpha), shift
