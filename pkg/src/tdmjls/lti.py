"""Discrete-time LTI systems ``x[k+1] = H x[k] + G u[k]``.

Trajectories, steady states, spectral-radius rate reports and quadratic
Lyapunov certificates. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InstabilityError, NumericalError, ValidationError

RATE_EPSILON = 1e-6
SEMISIMPLE_RTOL = 1e-8
# eigenvalues of a numerically defective block scatter by roughly eps**(1/size)
_CLUSTER_RTOL = 1e-6
_MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class LTISystem:
    """State map ``H`` (m x m) and input map ``G`` (m x p, p may be 0)."""

    H: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValidationError(f"H must be square, got shape {H.shape}")
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 1 and G.size == 0:
            G = np.zeros((H.shape[0], 0))
        G = G.reshape(H.shape[0], -1) if G.ndim < 2 else G
        if G.ndim != 2 or G.shape[0] != H.shape[0]:
            raise ValidationError(
                f"G must have {H.shape[0]} rows to match H, got shape {G.shape}"
            )
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G", G)

    @property
    def state_dim(self) -> int:
        return self.H.shape[0]

    @property
    def input_dim(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class RateReport:
    """Spectral radius together with the linear rate it certifies.

    ``reported_rate`` equals the spectral radius when every dominant
    eigenvalue is semisimple, otherwise the radius plus ``epsilon``.
    """

    spectral_radius: float
    epsilon: float
    dominant_semisimple: bool
    reported_rate: float


@dataclass(frozen=True)
class LyapunovCertificate:
    """``V`` with ``x'Vx' <= rho^2 xVx + kappa |u|^2`` along trajectories."""

    V: np.ndarray
    rho: float
    kappa: float

    def check(self, sys: LTISystem, tol: float = 1e-9) -> bool:
        """True if ``V`` is positive definite and ``H'VH - rho^2 V`` is negative definite."""
        V = self.V
        if np.min(np.linalg.eigvalsh(V)) <= 0:
            return False
        D = sys.H.T @ V @ sys.H - self.rho**2 * V
        D = 0.5 * (D + D.T)
        return bool(np.max(np.linalg.eigvalsh(D)) < tol * max(1.0, np.abs(V).max()))


def _as_vector(x, dim, name):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ValidationError(f"{name} has length {x.shape[0]}, expected {dim}")
    return x


def spectral_radius(M, epsilon: float = RATE_EPSILON) -> RateReport:
    """Spectral radius of ``M`` and the rate convention attached to it.

    The dominant eigenvalues are grouped into clusters; a cluster is
    semisimple when ``dim ker(M - lam I)`` (singular values below
    ``1e-8 * ||M||``) matches the number of eigenvalues in the cluster.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {M.shape}")
    if M.size == 0:
        return RateReport(0.0, 0.0, True, 0.0)
    try:
        w = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigensolver returned non-finite eigenvalues")
    mods = np.abs(w)
    sigma = float(mods.max())
    norm = float(np.linalg.norm(M, 2))
    ctol = _CLUSTER_RTOL * max(norm, 1e-300)

    dominant = w[mods >= sigma - ctol]
    semisimple = True
    seen = np.zeros(dominant.shape[0], dtype=bool)
    m = M.shape[0]
    for i, lam in enumerate(dominant):
        if seen[i]:
            continue
        group = np.abs(dominant - lam) <= ctol
        seen |= group
        center = dominant[group].mean()
        algebraic = int(np.count_nonzero(np.abs(w - center) <= ctol))
        shifted = M - center * np.eye(m)
        sv = np.linalg.svd(shifted, compute_uv=False)
        geometric = int(np.count_nonzero(sv <= SEMISIMPLE_RTOL * norm))
        if geometric < algebraic:
            semisimple = False
            break

    eps = 0.0 if semisimple else float(epsilon)
    return RateReport(sigma, eps, semisimple, sigma + eps)


def _require_stable(H, what="H"):
    rep = spectral_radius(H)
    if rep.spectral_radius >= 1.0 - _MARGINAL_TOL:
        raise InstabilityError(
            f"sigma({what}) = {rep.spectral_radius:.12g} >= 1; no steady state",
            sigma=rep.spectral_radius,
        )
    return rep


def lti_trajectory(sys: LTISystem, x0, inputs, k: int) -> np.ndarray:
    """Iterate the state equation ``k`` times.

    ``inputs`` is either a ``(>=k, p)`` array of per-step inputs or a single
    length-``p`` vector applied at every step. Returns the ``(k+1, m)`` array
    of states ``x[0] .. x[k]``.
    """
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    m, p = sys.state_dim, sys.input_dim
    x = _as_vector(x0, m, "x0")
    U = np.asarray(inputs, dtype=float)
    if U.ndim <= 1:
        u = _as_vector(U, p, "input")
        U = np.broadcast_to(u, (k, p))
    elif U.shape[1] != p or U.shape[0] < k:
        raise ValidationError(
            f"inputs must have shape (>={k}, {p}), got {U.shape}"
        )
    out = np.empty((k + 1, m))
    out[0] = x
    for t in range(k):
        x = sys.H @ x + sys.G @ U[t]
        out[t + 1] = x
    return out


def lti_steady_state(sys: LTISystem, u_inf) -> np.ndarray:
    """Fixed point ``(I - H)^-1 G u_inf`` of a Schur-stable system."""
    _require_stable(sys.H)
    u = _as_vector(u_inf, sys.input_dim, "u_inf")
    m = sys.state_dim
    x = np.linalg.solve(np.eye(m) - sys.H, sys.G @ u)
    resid = np.linalg.norm((np.eye(m) - sys.H) @ x - sys.G @ u)
    scale = max(1.0, np.linalg.norm(sys.G @ u))
    if resid > 1e-9 * scale:
        raise NumericalError(f"steady-state residual {resid:.3e} too large")
    return x


def lti_constant_input_closed_form(sys: LTISystem, x0, u, k: int) -> np.ndarray:
    """State at step ``k`` as ``x_inf + H^k (x0 - x_inf)`` for constant input."""
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    x_inf = lti_steady_state(sys, u)
    x0 = _as_vector(x0, sys.state_dim, "x0")
    return x_inf + np.linalg.matrix_power(sys.H, k) @ (x0 - x_inf)


def lyapunov_certificate(sys: LTISystem, rho: float) -> LyapunovCertificate:
    """Quadratic certificate that ``x`` contracts at rate ``rho``.

    ``V`` solves ``(H/rho)' V (H/rho) - V = -I``; ``kappa`` is the smallest
    input gain making the block matrix
    ``[[H'VH - rho^2 V, H'VG], [G'VH, G'VG - kappa I]]`` negative semidefinite.
    """
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")
    sigma = spectral_radius(sys.H).spectral_radius
    if sigma >= rho:
        raise InstabilityError(
            f"sigma(H) = {sigma:.12g} >= rho = {rho}; no certificate exists",
            sigma=sigma,
        )
    Hs = sys.H / rho
    V = scipy.linalg.solve_discrete_lyapunov(Hs.T, np.eye(sys.state_dim))
    V = 0.5 * (V + V.T)
    # H'VH - rho^2 V = -rho^2 I, so the Schur complement is G'VG + G'VH H'VG / rho^2
    if sys.input_dim == 0:
        kappa = 1.0
    else:
        VG = V @ sys.G
        S = sys.G.T @ VG + (VG.T @ sys.H) @ (sys.H.T @ VG) / rho**2
        lam = float(np.max(np.linalg.eigvalsh(0.5 * (S + S.T))))
        kappa = lam * (1.0 + 1e-8) if lam > 0 else 1.0
    return LyapunovCertificate(V=V, rho=float(rho), kappa=float(kappa))


def fit_decay_constant(errors, rate: float, floor: float = 0.0) -> float:
    """Smallest ``C0`` with ``errors[k] <= C0 * rate**k`` for every ``k``.

    Entries at or below ``floor`` are treated as converged (rounding noise)
    and do not constrain the fit. Computed in log space so tiny rates do not
    underflow.
    """
    e = np.abs(np.asarray(errors, dtype=float))
    ks = np.arange(e.shape[0])
    mask = e > floor
    if not mask.any():
        return 0.0
    if rate <= 0.0:
        if mask[1:].any():
            return float("inf")
        return float(e[0])
    logc = np.log(e[mask]) - ks[mask] * np.log(rate)
    return float(np.exp(logc.max()))
