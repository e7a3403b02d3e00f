"""Markov jump linear systems ``xi' = (I + alpha A_z) xi + alpha b_z``.

The per-mode indicator moments

    q_i = E[xi 1{z = i}],    Q_i = E[xi xi' 1{z = i}]

evolve linearly. They can be propagated either by the direct recursion
(:func:`moment_recursion_step`) or by the block-triangular augmented LTI
system built from Kronecker products (:func:`build_augmented_lti`).

Stacking convention: ``q`` is mode-major (``q_1`` then ``q_2`` ...), and
``vec(Q)`` stacks the column-major vectorizations of ``Q_1, Q_2, ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .chain import MarkovChain
from .errors import SizeError, ValidationError

DEFAULT_SIZE_CAP = 4096


def _vec(M):
    return M.reshape(-1, order="F")


def _unvec(v, d):
    return v.reshape(d, d, order="F")


@dataclass(frozen=True)
class JumpLinearSystem:
    """Mode matrices ``A`` (n, d, d), offsets ``b`` (n, d) and step size ``alpha``."""

    chain: MarkovChain
    A: np.ndarray
    b: np.ndarray
    alpha: float

    def __post_init__(self):
        n = self.chain.n
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim == 2 and n == 1:
            A = A[None]
        if A.ndim != 3 or A.shape[0] != n or A.shape[1] != A.shape[2]:
            raise ValidationError(
                f"A must have shape ({n}, d, d), got {A.shape}"
            )
        d = A.shape[1]
        if b.ndim == 1 and n == 1:
            b = b[None]
        if b.shape != (n, d):
            raise ValidationError(f"b must have shape ({n}, {d}), got {b.shape}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValidationError(f"alpha must be nonnegative, got {self.alpha}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def H(self) -> np.ndarray:
        """Per-mode state maps ``I + alpha A_i``."""
        return np.eye(self.d)[None] + self.alpha * self.A

    @property
    def G(self) -> np.ndarray:
        """Per-mode offsets ``alpha b_i``."""
        return self.alpha * self.b

    def with_alpha(self, alpha: float) -> "JumpLinearSystem":
        return replace(self, alpha=alpha)

    def with_chain(self, chain: MarkovChain) -> "JumpLinearSystem":
        return replace(self, chain=chain)


@dataclass(frozen=True)
class MomentState:
    """Indicator moments at step ``k`` plus the mode distribution ``p``."""

    q: np.ndarray
    Q: np.ndarray
    p: np.ndarray
    k: int = 0

    @property
    def mean(self) -> np.ndarray:
        return self.q.sum(axis=0)

    @property
    def second_moment(self) -> np.ndarray:
        return self.Q.sum(axis=0)

    @property
    def covariance(self) -> np.ndarray:
        mu = self.mean
        return self.second_moment - np.outer(mu, mu)

    def stacked(self):
        """``(q, vec(Q))`` in the augmented-state ordering."""
        return self.q.reshape(-1), np.concatenate([_vec(Qi) for Qi in self.Q])

    @classmethod
    def from_stacked(cls, q, vecQ, p, k, n, d) -> "MomentState":
        q = np.asarray(q, dtype=float).reshape(n, d)
        Q = np.stack([_unvec(vecQ[i * d * d:(i + 1) * d * d], d) for i in range(n)])
        Q = 0.5 * (Q + Q.transpose(0, 2, 1))
        return cls(q=q, Q=Q, p=np.asarray(p, dtype=float), k=int(k))


def sample_step(sys: JumpLinearSystem, xi, z: int, rng: np.random.Generator):
    """One draw of the jump recursion; returns ``(xi', z')``.

    ``z'`` is drawn from row ``z`` of the transition matrix using ``rng``.
    """
    if not 0 <= z < sys.n:
        raise ValidationError(f"mode index {z} outside [0, {sys.n})")
    xi = np.asarray(xi, dtype=float)
    xi_next = xi + sys.alpha * (sys.A[z] @ xi + sys.b[z])
    z_next = int(rng.choice(sys.n, p=sys.chain.P[z]))
    return xi_next, z_next


def initial_moments(sys: JumpLinearSystem, xi0) -> MomentState:
    """Moments of a deterministic ``xi0`` with ``z0 ~ p0`` drawn independently."""
    xi0 = np.asarray(xi0, dtype=float).reshape(-1)
    if xi0.shape[0] != sys.d:
        raise ValidationError(f"xi0 has length {xi0.shape[0]}, expected {sys.d}")
    p0 = sys.chain.p0
    q = p0[:, None] * xi0[None, :]
    Q = p0[:, None, None] * np.outer(xi0, xi0)[None]
    return MomentState(q=q, Q=Q, p=p0.copy(), k=0)


def moment_recursion_step(sys: JumpLinearSystem, m: MomentState) -> MomentState:
    """Advance the indicator moments one step by the direct recursion.

    q_j'  = sum_i p_ij (H_i q_i + p_i G_i)
    Q_j'  = sum_i p_ij (H_i Q_i H_i' + H_i q_i G_i' + G_i q_i' H_i' + p_i G_i G_i')
    """
    n, d = sys.n, sys.d
    if m.q.shape != (n, d) or m.Q.shape != (n, d, d):
        raise ValidationError("moment state does not match system dimensions")
    H, G, P, p = sys.H, sys.G, sys.chain.P, m.p
    Hq = np.einsum("nij,nj->ni", H, m.q)
    inner_q = Hq + p[:, None] * G
    cross = np.einsum("ni,nj->nij", Hq, G)
    inner_Q = (
        np.einsum("nij,njk,nlk->nil", H, m.Q, H)
        + cross
        + cross.transpose(0, 2, 1)
        + p[:, None, None] * np.einsum("ni,nj->nij", G, G)
    )
    q_next = np.einsum("ij,ik->jk", P, inner_q)
    Q_next = np.einsum("ij,ikl->jkl", P, inner_Q)
    Q_next = 0.5 * (Q_next + Q_next.transpose(0, 2, 1))
    return MomentState(q=q_next, Q=Q_next, p=P.T @ p, k=m.k + 1)


def moment_recursion(sys: JumpLinearSystem, m0: MomentState, k: int):
    """List of moment states ``m0 .. m_k`` from the direct recursion."""
    out = [m0]
    for _ in range(k):
        out.append(moment_recursion_step(sys, out[-1]))
    return out


@dataclass(frozen=True)
class AugmentedLTI:
    """Block-triangular LTI system driving ``(q, vec(Q))``.

    ``inputs(p)`` returns ``(u_q, u_Q)`` for the current mode distribution.
    """

    H11: np.ndarray
    H21: np.ndarray
    H22: np.ndarray
    P: np.ndarray
    b: np.ndarray
    B_hat: np.ndarray
    alpha: float
    n: int
    d: int

    @property
    def N(self) -> int:
        return self.n * self.d * self.d

    @property
    def H_full(self) -> np.ndarray:
        nd, N = self.n * self.d, self.N
        H = np.zeros((nd + N, nd + N))
        H[:nd, :nd] = self.H11
        H[nd:, :nd] = self.H21
        H[nd:, nd:] = self.H22
        return H

    def inputs(self, p):
        """Inputs ``alpha ((P' diag p) kron I) b`` and ``alpha^2 ((P' diag p) kron I) B_hat``."""
        W = self.P.T * np.asarray(p, dtype=float)[None, :]
        u_q = self.alpha * np.kron(W, np.eye(self.d)) @ self.b
        u_Q = self.alpha**2 * np.kron(W, np.eye(self.d * self.d)) @ self.B_hat
        return u_q, u_Q

    def step(self, q, vecQ, p):
        u_q, u_Q = self.inputs(p)
        return self.H11 @ q + u_q, self.H21 @ q + self.H22 @ vecQ + u_Q


def _block_diag(blocks):
    n, r, c = blocks.shape
    out = np.zeros((n * r, n * c))
    for i in range(n):
        out[i * r:(i + 1) * r, i * c:(i + 1) * c] = blocks[i]
    return out


def build_augmented_lti(sys: JumpLinearSystem, size_cap: int = DEFAULT_SIZE_CAP) -> AugmentedLTI:
    """Kronecker assembly of the augmented moment dynamics.

    H11 = (P' kron I_d) diag(H_i)
    H22 = (P' kron I_d2) diag(H_i kron H_i)
    H21 block (j, i) = alpha p_ij (b_i kron H_i + H_i kron b_i)
    """
    n, d = sys.n, sys.d
    N = n * d * d
    if N > size_cap:
        raise SizeError(f"n*d^2 = {N} exceeds the size cap {size_cap}")
    P, H, alpha = sys.chain.P, sys.H, sys.alpha
    H11 = np.kron(P.T, np.eye(d)) @ _block_diag(H)
    HH = np.stack([np.kron(Hi, Hi) for Hi in H])
    H22 = np.kron(P.T, np.eye(d * d)) @ _block_diag(HH)
    S = np.stack([
        np.kron(sys.b[i][:, None], H[i]) + np.kron(H[i], sys.b[i][:, None])
        for i in range(n)
    ])
    H21 = alpha * np.kron(P.T, np.ones((d * d, d))) * np.tile(
        np.concatenate(list(S), axis=1), (n, 1)
    )
    B_hat = np.concatenate([np.kron(bi, bi) for bi in sys.b])
    return AugmentedLTI(
        H11=H11, H21=H21, H22=H22, P=P.copy(), b=sys.b.reshape(-1).copy(),
        B_hat=B_hat, alpha=alpha, n=n, d=d,
    )


def augmented_trajectory(aug: AugmentedLTI, m0: MomentState, chain: MarkovChain, k: int):
    """Moment states ``m0 .. m_k`` from the augmented LTI recursion.

    The time-varying input is rebuilt from ``p^t`` at every step, starting
    from ``m0.p``.
    """
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    n, d = aug.n, aug.d
    if chain.n != n:
        raise ValidationError("chain does not match the augmented system")
    q, vecQ = m0.stacked()
    p = np.asarray(m0.p, dtype=float)
    out = [m0]
    for t in range(k):
        q, vecQ = aug.step(q, vecQ, p)
        p = chain.P.T @ p
        out.append(MomentState.from_stacked(q, vecQ, p, m0.k + t + 1, n, d))
    return out


def augmented_closed_form(aug: AugmentedLTI, m0: MomentState, chain: MarkovChain, k: int):
    """Stacked ``(q^k, vec(Q^k))`` from the explicit matrix-power sums.

    Quadratic in ``k``; intended for cross-checking on small instances.
    """
    q0, vQ0 = m0.stacked()
    ps = [np.asarray(m0.p, dtype=float)]
    for _ in range(k):
        ps.append(chain.P.T @ ps[-1])
    qs = []
    for t in range(k + 1):
        acc = np.linalg.matrix_power(aug.H11, t) @ q0
        for s in range(t):
            acc = acc + np.linalg.matrix_power(aug.H11, t - 1 - s) @ aug.inputs(ps[s])[0]
        qs.append(acc)
    vQ = np.linalg.matrix_power(aug.H22, k) @ vQ0
    for s in range(k):
        vQ = vQ + np.linalg.matrix_power(aug.H22, k - 1 - s) @ (
            aug.H21 @ qs[s] + aug.inputs(ps[s])[1]
        )
    return qs[k], vQ


def mean_square_norm(m: MomentState) -> float:
    """``E|xi|^2 = trace(sum_i Q_i)``."""
    return float(np.trace(m.Q.sum(axis=0)))


def mean_square_norm_vectorized(m: MomentState) -> float:
    """Same quantity as ``(1_n kron vec(I_d))' vec(Q)``."""
    n, d = m.Q.shape[0], m.Q.shape[1]
    selector = np.kron(np.ones(n), _vec(np.eye(d)))
    return float(selector @ m.stacked()[1])
