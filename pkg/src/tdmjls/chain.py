"""Finite Markov chains: distribution evolution, stationary law, mixing rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonErgodicError, ValidationError

STOCHASTIC_TOL = 1e-12
_UNIT_TOL = 1e-10


@dataclass(frozen=True)
class MarkovChain:
    """Row-stochastic transition matrix ``P`` and initial law ``p0``.

    ``P[i, j]`` is the probability of jumping from mode ``i`` to mode ``j``.
    Modes are 0-based.
    """

    P: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        p0 = np.asarray(self.p0, dtype=float).reshape(-1)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValidationError(f"P must be square, got shape {P.shape}")
        if np.any(P < 0) or np.any(P > 1):
            raise ValidationError("P entries must lie in [0, 1]")
        bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise ValidationError(
                f"row {int(bad[0])} of P sums to {P[bad[0]].sum():.17g}, not 1"
            )
        if p0.shape[0] != P.shape[0]:
            raise ValidationError(
                f"p0 has length {p0.shape[0]}, expected {P.shape[0]}"
            )
        if np.any(p0 < 0) or abs(p0.sum() - 1.0) > STOCHASTIC_TOL:
            raise ValidationError("p0 must be a probability vector")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "p0", p0)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @classmethod
    def iid(cls, p) -> "MarkovChain":
        """Chain whose every row is ``p``: modes drawn independently from ``p``."""
        p = np.asarray(p, dtype=float).reshape(-1)
        return cls(np.tile(p, (p.shape[0], 1)), p)

    def with_initial(self, p0) -> "MarkovChain":
        return MarkovChain(self.P, p0)


@dataclass(frozen=True)
class ChainAnalysis:
    p_inf: np.ndarray
    mixing_rate: float
    ergodic: bool


def evolve_distribution(chain: MarkovChain, k: int) -> np.ndarray:
    """Mode distribution after ``k`` steps, ``(P')^k p0``."""
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    p = chain.p0.copy()
    for _ in range(k):
        p = chain.P.T @ p
    return p


def distribution_path(chain: MarkovChain, k: int) -> np.ndarray:
    """Distributions ``p^0 .. p^k`` stacked as a ``(k+1, n)`` array."""
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    out = np.empty((k + 1, chain.n))
    out[0] = chain.p0
    for t in range(k):
        out[t + 1] = chain.P.T @ out[t]
    return out


def stationary_distribution(chain: MarkovChain) -> ChainAnalysis:
    """Stationary distribution and second-largest eigenvalue modulus.

    Raises :class:`NonErgodicError` unless 1 is the only eigenvalue of ``P``
    on the unit circle and it is simple (irreducible and aperiodic chain).
    """
    P = chain.P
    w, vl = np.linalg.eig(P.T)
    on_circle = np.abs(np.abs(w) - 1.0) <= _UNIT_TOL
    if np.count_nonzero(on_circle) != 1:
        raise NonErgodicError(
            "transition matrix has "
            f"{int(np.count_nonzero(on_circle))} eigenvalues of modulus 1; "
            "chain is reducible or periodic"
        )
    idx = int(np.argmax(on_circle))
    v = np.real(vl[:, idx])
    v = v / v.sum()
    # refine against the linear system p'(P - I) = 0, sum p = 1
    n = chain.n
    M = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    v = v + np.linalg.lstsq(M, rhs - M @ v, rcond=None)[0]
    if np.any(v < -1e-10):
        raise NonErgodicError("stationary vector has negative entries")
    v = np.clip(v, 0.0, None)
    v = v / v.sum()
    rest = np.abs(np.delete(w, idx))
    slem = float(rest.max()) if rest.size else 0.0
    return ChainAnalysis(p_inf=v, mixing_rate=slem, ergodic=True)


def is_ergodic(chain: MarkovChain) -> bool:
    try:
        stationary_distribution(chain)
    except NonErgodicError:
        return False
    return True
