"""Moment dynamics, steady states and stability of TD-type jump systems.

Two settings are covered. Under IID sampling (every mode drawn from a fixed
``p``) the mean ``mu = E xi`` and second moment ``E xi xi'`` obey a small LTI
system of size ``d + d^2``. Under Markov sampling the indicator moments from
:mod:`tdmjls.mjls` obey an LTI system of size ``n d + n d^2``. In both cases
the second-moment block ``H22`` decides mean-square stability.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lti
from .chain import stationary_distribution
from .errors import (AnalysisError, InstabilityError, ModelWarning,
                     NonErgodicError, NumericalError, ValidationError)
from .mjls import (JumpLinearSystem, MomentState, augmented_trajectory,
                   build_augmented_lti, initial_moments, mean_square_norm)

MARGINAL_TOL = 1e-10
CENTER_TOL = 1e-10
MODES = ("iid", "markov")


def _vec(M):
    return M.reshape(-1, order="F")


def _unvec(v, d):
    return v.reshape(d, d, order="F")


def _check_mode(mode):
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")


def averaged_matrix(sys: JumpLinearSystem, p=None) -> np.ndarray:
    """``A_bar = sum_i p_i A_i``; ``p`` defaults to the stationary law."""
    if p is None:
        p = stationary_distribution(sys.chain).p_inf
    return np.einsum("i,ijk->jk", np.asarray(p, dtype=float), sys.A)


def lambda_max_real(M) -> complex:
    """Eigenvalue with the largest real part.

    Ties go to the larger modulus, then to the nonnegative imaginary part.
    """
    w = np.linalg.eigvals(np.atleast_2d(M))
    re = w.real
    tol = 1e-12 * max(1.0, np.abs(w).max())
    cand = w[re >= re.max() - tol]
    cand = sorted(cand, key=lambda z: (-abs(z), z.imag < 0))
    return complex(cand[0])


# --------------------------------------------------------------------- IID

@dataclass(frozen=True)
class IIDMomentModel:
    """LTI system for ``(mu, vec(E xi xi'))`` under IID mode sampling.

    H11 = I + alpha A_bar
    H21 = alpha^2 sum p_i (A_i kron b_i + b_i kron A_i)
    H22 = I + alpha (I kron A_bar + A_bar kron I) + alpha^2 sum p_i A_i kron A_i
    input_Q = alpha^2 sum p_i b_i kron b_i
    """

    H11: np.ndarray
    H21: np.ndarray
    H22: np.ndarray
    input_Q: np.ndarray
    A_bar: np.ndarray
    p: np.ndarray
    alpha: float

    @property
    def d(self) -> int:
        return self.H11.shape[0]

    @property
    def H_full(self) -> np.ndarray:
        d = self.d
        H = np.zeros((d + d * d, d + d * d))
        H[:d, :d] = self.H11
        H[d:, :d] = self.H21
        H[d:, d:] = self.H22
        return H

    def step(self, mu, Q):
        mu = np.asarray(mu, dtype=float)
        vQ = self.H21 @ mu + self.H22 @ _vec(np.asarray(Q, dtype=float)) + self.input_Q
        Qn = _unvec(vQ, self.d)
        return self.H11 @ mu, 0.5 * (Qn + Qn.T)


def _iid_blocks(sys: JumpLinearSystem, p):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != sys.n:
        raise ValidationError(f"p has length {p.shape[0]}, expected {sys.n}")
    d, a = sys.d, sys.alpha
    I = np.eye(d)
    A_bar = averaged_matrix(sys, p)
    AA = sum(pi * np.kron(Ai, Ai) for pi, Ai in zip(p, sys.A))
    H11 = I + a * A_bar
    H22 = np.eye(d * d) + a * (np.kron(I, A_bar) + np.kron(A_bar, I)) + a * a * AA
    H21 = a * a * sum(
        pi * (np.kron(Ai, bi[:, None]) + np.kron(bi[:, None], Ai))
        for pi, Ai, bi in zip(p, sys.A, sys.b)
    )
    inp = a * a * sum(pi * np.kron(bi, bi) for pi, bi in zip(p, sys.b))
    return IIDMomentModel(H11=H11, H21=H21, H22=H22, input_Q=inp,
                          A_bar=A_bar, p=p, alpha=a)


def build_iid_model(sys: JumpLinearSystem, p=None) -> IIDMomentModel:
    """IID moment model for modes drawn from ``p`` (default: stationary law).

    The offsets must average to zero under ``p``; otherwise the mean
    recursion has an input and the caller should use
    :func:`tdmjls.tdmodel.center_offsets` first.
    """
    if p is None:
        p = stationary_distribution(sys.chain).p_inf
    p = np.asarray(p, dtype=float)
    b_bar = p @ sys.b
    if np.linalg.norm(b_bar) > CENTER_TOL * max(1.0, np.abs(sys.b).max()):
        raise ValidationError(
            f"offsets not centered (|sum p b| = {np.linalg.norm(b_bar):.3e}); "
            "apply tdmodel.center_offsets first"
        )
    return _iid_blocks(sys, p)


def iid_moment_step(sys: JumpLinearSystem, p, mu, Q):
    """Direct IID recursion, written without Kronecker products.

    mu' = sum p_i (H_i mu + G_i)
    Q'  = sum p_i (H_i Q H_i' + H_i mu G_i' + G_i mu' H_i' + G_i G_i')
    """
    H, G = sys.H, sys.G
    mu_n = np.zeros(sys.d)
    Q_n = np.zeros((sys.d, sys.d))
    for pi, Hi, Gi in zip(p, H, G):
        Hm = Hi @ mu
        mu_n += pi * (Hm + Gi)
        Q_n += pi * (Hi @ Q @ Hi.T + np.outer(Hm, Gi) + np.outer(Gi, Hm) + np.outer(Gi, Gi))
    return mu_n, 0.5 * (Q_n + Q_n.T)


def iid_forward(model: IIDMomentModel, mu0, Q0, k: int):
    """Iterate the IID LTI system; returns arrays ``mu (k+1, d)`` and ``Q (k+1, d, d)``."""
    d = model.d
    mus = np.empty((k + 1, d))
    Qs = np.empty((k + 1, d, d))
    mu, Q = np.asarray(mu0, dtype=float), np.asarray(Q0, dtype=float)
    mus[0], Qs[0] = mu, Q
    for t in range(k):
        mu, Q = model.step(mu, Q)
        mus[t + 1], Qs[t + 1] = mu, Q
    return mus, Qs


def _require_h22_stable(H22, label="H22"):
    rep = lti.spectral_radius(H22)
    if rep.spectral_radius >= 1.0 - MARGINAL_TOL:
        raise InstabilityError(
            f"sigma({label}) = {rep.spectral_radius:.12g} >= 1: "
            "mean-square unstable (or marginal)",
            sigma=rep.spectral_radius,
        )
    return rep


@dataclass(frozen=True)
class SteadyState:
    """Limits of the moment recursion.

    IID: ``q_inf`` is the (zero) mean limit of shape (d,) and ``Q_inf`` the
    (d, d) second-moment limit. Markov: per-mode stacks of shapes (n, d) and
    (n, d, d).
    """

    q_inf: np.ndarray
    Q_inf: np.ndarray
    delta_inf: float
    kind: str

    @property
    def mean(self) -> np.ndarray:
        return self.q_inf if self.kind == "iid" else self.q_inf.sum(axis=0)

    @property
    def second_moment(self) -> np.ndarray:
        return self.Q_inf if self.kind == "iid" else self.Q_inf.sum(axis=0)


def iid_steady_state(model: IIDMomentModel) -> SteadyState:
    """``vec(Q_inf) = -alpha (I kron A_bar + A_bar kron I + alpha sum p_i A_i kron A_i)^-1 sum p_i b_i kron b_i``."""
    _require_h22_stable(model.H22)
    d, a = model.d, model.alpha
    I = np.eye(d)
    if a == 0.0:
        raise InstabilityError("alpha = 0 is marginally stable", sigma=1.0)
    bb = model.input_Q / (a * a)
    AA = (model.H22 - np.eye(d * d) - a * (np.kron(I, model.A_bar) + np.kron(model.A_bar, I))) / (a * a)
    M = np.kron(I, model.A_bar) + np.kron(model.A_bar, I) + a * AA
    vQ = -a * np.linalg.solve(M, bb)
    # same limit as the fixed point of the LTI map
    vQ_fp = np.linalg.solve(np.eye(d * d) - model.H22, model.input_Q)
    scale = max(np.abs(vQ).max(), 1e-300)
    if np.abs(vQ - vQ_fp).max() > 1e-8 * scale:
        raise NumericalError("steady-state formulas disagree")
    Q = _unvec(vQ, d)
    Q = 0.5 * (Q + Q.T)
    return SteadyState(q_inf=np.zeros(d), Q_inf=Q, delta_inf=float(np.trace(Q)), kind="iid")


def iid_closed_form(model: IIDMomentModel, mu0, Q0, k: int):
    """``(mu_k, Q_k)`` from ``x_k = H^k (x_0 - x_inf) + x_inf``."""
    if k < 0:
        raise ValidationError("step count must be nonnegative")
    ss = iid_steady_state(model)
    d = model.d
    x0 = np.concatenate([np.asarray(mu0, dtype=float), _vec(np.asarray(Q0, dtype=float))])
    xinf = np.concatenate([ss.q_inf, _vec(ss.Q_inf)])
    xk = np.linalg.matrix_power(model.H_full, k) @ (x0 - xinf) + xinf
    Q = _unvec(xk[d:], d)
    return xk[:d], 0.5 * (Q + Q.T)


# ------------------------------------------------------------------ Markov

def build_markov_steady_state(sys: JumpLinearSystem, size_cap: Optional[int] = None) -> SteadyState:
    """Limits ``q_inf``, ``Q_inf`` and ``delta_inf`` for the Markov setting.

    q_inf      = (I - H11)^-1 u_q(p_inf)
    vec(Q_inf) = (I - H22)^-1 (H21 q_inf + u_Q(p_inf))
    """
    aug = build_augmented_lti(sys) if size_cap is None else build_augmented_lti(sys, size_cap)
    _require_h22_stable(aug.H22)
    p_inf = stationary_distribution(sys.chain).p_inf
    b_bar = p_inf @ sys.b
    if np.linalg.norm(b_bar) > CENTER_TOL * max(1.0, np.abs(sys.b).max()):
        warnings.warn("offsets not centered: delta_inf is the limit of E|xi|^2, "
                      "not an error around the fixed point", ModelWarning, stacklevel=2)
    n, d = sys.n, sys.d
    u_q, u_Q = aug.inputs(p_inf)
    I11 = np.eye(n * d) - aug.H11
    if np.linalg.svd(I11, compute_uv=False).min() <= 1e-14:
        raise NumericalError("I - H11 is singular")
    q = np.linalg.solve(I11, u_q)
    vQ = np.linalg.solve(np.eye(aug.N) - aug.H22, aug.H21 @ q + u_Q)
    rq = np.abs(aug.H11 @ q + u_q - q).max()
    rQ = np.abs(aug.H21 @ q + aug.H22 @ vQ + u_Q - vQ).max()
    if rq > 1e-9 * max(1.0, np.abs(q).max()) or rQ > 1e-9 * max(1.0, np.abs(vQ).max()):
        raise NumericalError("steady-state fixed-point residual too large")
    m = MomentState.from_stacked(q, vQ, p_inf, 0, n, d)
    return SteadyState(q_inf=m.q, Q_inf=m.Q, delta_inf=mean_square_norm(m), kind="markov")


@dataclass(frozen=True)
class BoundsReport:
    """Envelope ``delta_inf -/+ C0 rate^k`` around the exact MSE trajectory.

    ``floor`` is the rounding-noise level below which deviations are not
    fitted; containment is checked up to it. ``boundary_case`` marks runs
    where the LTI rate and the mixing rate coincide, so the true decay
    carries an extra factor ``k``.
    """

    delta_inf: float
    rate: float
    C0: float
    lower: np.ndarray
    upper: np.ndarray
    floor: float
    sigma_H: lti.RateReport
    mixing_rate: float
    boundary_case: bool = False

    def contains(self, mse) -> bool:
        mse = np.asarray(mse, dtype=float)
        return bool(np.all(mse >= self.lower - self.floor) and np.all(mse <= self.upper + self.floor))


def _bounds(mse, delta_inf, sigma_H: lti.RateReport, mixing_rate: float) -> BoundsReport:
    mse = np.asarray(mse, dtype=float)
    rate = max(sigma_H.reported_rate, mixing_rate)
    floor = 1e-12 * max(np.abs(mse).max(), abs(delta_inf), 1e-300)
    C0 = lti.fit_decay_constant(mse - delta_inf, rate, floor)
    ks = np.arange(mse.shape[0])
    with np.errstate(under="ignore"):
        width = C0 * np.power(rate, ks) if rate > 0 else np.where(ks == 0, C0, 0.0)
    boundary = abs(sigma_H.reported_rate - mixing_rate) <= 1e-9
    return BoundsReport(delta_inf=delta_inf, rate=rate, C0=C0,
                        lower=delta_inf - width, upper=delta_inf + width,
                        floor=floor, sigma_H=sigma_H, mixing_rate=mixing_rate,
                        boundary_case=boundary)


def markov_trajectory_with_limits(sys: JumpLinearSystem, m0: Optional[MomentState] = None,
                                  k: int = 100, xi0=None):
    """Exact moment trajectory, its limit and a fitted convergence envelope.

    ``m0`` defaults to :func:`initial_moments` of ``xi0`` (zero if omitted).
    Returns ``(trajectory, steady_state, bounds)`` where ``trajectory`` is a
    list of ``k + 1`` :class:`MomentState`.
    """
    steady = build_markov_steady_state(sys)
    if m0 is None:
        m0 = initial_moments(sys, np.zeros(sys.d) if xi0 is None else xi0)
    aug = build_augmented_lti(sys)
    traj = augmented_trajectory(aug, m0, sys.chain, k)
    mse = np.array([mean_square_norm(m) for m in traj])
    sigma_H = lti.spectral_radius(aug.H_full)
    rho_mix = stationary_distribution(sys.chain).mixing_rate
    return traj, steady, _bounds(mse, steady.delta_inf, sigma_H, rho_mix)


def iid_trajectory_with_limits(model: IIDMomentModel, mu0, Q0, k: int = 100):
    """IID analogue: returns ``(mus, Qs, steady_state, bounds)`` with rate ``sigma(H) (+eps)``."""
    steady = iid_steady_state(model)
    mus, Qs = iid_forward(model, mu0, Q0, k)
    mse = np.trace(Qs, axis1=1, axis2=2)
    sigma_H = lti.spectral_radius(model.H_full)
    return mus, Qs, steady, _bounds(mse, steady.delta_inf, sigma_H, 0.0)


def fitted_log_slope(values, ks) -> float:
    """Least-squares slope of ``log|values|`` against ``ks``."""
    v = np.abs(np.asarray(values, dtype=float))
    return float(np.polyfit(np.asarray(ks, dtype=float), np.log(v), 1)[0])


# --------------------------------------------------------------- stability

@dataclass(frozen=True)
class StabilityReport:
    sigma_H11: lti.RateReport
    sigma_H22: lti.RateReport
    sigma_H: lti.RateReport
    stable: bool
    marginal: bool
    lambda_maxRe_Abar: Optional[complex]
    perturbation_sigma_H11: Optional[float]
    perturbation_sigma_H22: Optional[float]
    perturbation_supported: bool
    mode: str = "markov"
    notes: tuple = field(default_factory=tuple)

    @property
    def perturbation_sigma_H(self) -> Optional[float]:
        return self.perturbation_sigma_H11


def _blocks(sys: JumpLinearSystem, mode: str, p=None):
    if mode == "iid":
        if p is None:
            p = stationary_distribution(sys.chain).p_inf
        m = _iid_blocks(sys, p)
        return m.H11, m.H22, m.H_full
    aug = build_augmented_lti(sys)
    return aug.H11, aug.H22, aug.H_full


def perturbation_estimate(sys: JumpLinearSystem, mode: str = "markov"):
    """First-order predictions ``(1 + Re(lam) alpha, 1 + 2 Re(lam) alpha)``.

    ``lam`` is the eigenvalue of ``A_bar = sum p_inf_i A_i`` with the largest
    real part. The two numbers estimate ``sigma(H11)`` and ``sigma(H22)``.
    Requires an ergodic chain.
    """
    _check_mode(mode)
    lam = lambda_max_real(averaged_matrix(sys))
    return 1.0 + lam.real * sys.alpha, 1.0 + 2.0 * lam.real * sys.alpha


def stability_report(sys: JumpLinearSystem, mode: str = "markov") -> StabilityReport:
    """Spectral radii of the moment blocks, the mean-square verdict and
    first-order predictions for the dominant eigenvalues."""
    _check_mode(mode)
    notes = []
    try:
        p_inf = stationary_distribution(sys.chain).p_inf
    except NonErgodicError:
        p_inf = None
        if mode == "iid":
            raise
        notes.append("chain not ergodic: perturbation estimates unavailable")
    H11, H22, H = _blocks(sys, mode, p_inf)
    r11 = lti.spectral_radius(H11)
    r22 = lti.spectral_radius(H22)
    rH = lti.spectral_radius(H)
    s22 = r22.spectral_radius
    marginal = abs(s22 - 1.0) <= MARGINAL_TOL
    stable = s22 < 1.0 - MARGINAL_TOL

    lam = pred11 = pred22 = None
    supported = False
    if p_inf is not None:
        A_bar = averaged_matrix(sys, p_inf)
        lam = lambda_max_real(A_bar)
        pred11, pred22 = 1.0 + lam.real * sys.alpha, 1.0 + 2.0 * lam.real * sys.alpha
        d = sys.d
        if mode == "iid":
            lin = np.eye(d * d) + sys.alpha * (np.kron(np.eye(d), A_bar) + np.kron(A_bar, np.eye(d)))
            supported = lti.spectral_radius(lin).dominant_semisimple
            if not supported:
                notes.append("dominant eigenvalue of the linearized H22 is not semisimple")
        else:
            supported = True
    if rH.spectral_radius > max(r11.spectral_radius, s22) + 1e-8:
        notes.append("sigma(H) exceeds both diagonal blocks")
    return StabilityReport(
        sigma_H11=r11, sigma_H22=r22, sigma_H=rH, stable=stable, marginal=marginal,
        lambda_maxRe_Abar=lam, perturbation_sigma_H11=pred11,
        perturbation_sigma_H22=pred22, perturbation_supported=supported,
        mode=mode, notes=tuple(notes),
    )


def sigma_h22(sys: JumpLinearSystem, mode: str = "markov") -> float:
    _check_mode(mode)
    return lti.spectral_radius(_blocks(sys, mode)[1]).spectral_radius


def general_eigen_perturbation(A, y, x, B, m: int) -> np.ndarray:
    """First-order coefficients for eigenvalues of ``A kron I_m + alpha B``.

    ``lam`` must be a simple eigenvalue of ``A`` with left/right eigenvectors
    ``y``/``x``. The eigenvalues branching from ``lam`` behave as
    ``lam + c alpha + O(alpha^2)`` where ``c`` ranges over the eigenvalues of
    ``(y' kron I_m) B (x kron I_m)`` (with ``y'x = 1``).
    """
    A = np.atleast_2d(np.asarray(A))
    y = np.asarray(y).reshape(-1)
    x = np.asarray(x).reshape(-1)
    B = np.atleast_2d(np.asarray(B))
    r = A.shape[0]
    if B.shape != (r * m, r * m):
        raise ValidationError(f"B must have shape {(r * m, r * m)}, got {B.shape}")
    yx = y @ x
    if abs(yx) < 1e-12 * np.linalg.norm(y) * np.linalg.norm(x):
        raise ValidationError("left and right eigenvectors are orthogonal")
    y = y / yx
    lam = y @ A @ x
    scale = max(1.0, np.abs(A).max())
    if (np.linalg.norm(A @ x - lam * x) > 1e-8 * scale * np.linalg.norm(x)
            or np.linalg.norm(y @ A - lam * y) > 1e-8 * scale * np.linalg.norm(y)):
        raise ValidationError("x and y are not eigenvectors for a common eigenvalue")
    w = np.linalg.eigvals(A)
    if np.count_nonzero(np.abs(w - lam) <= 1e-8 * scale) != 1:
        raise ValidationError(f"eigenvalue {lam} is not simple")
    Im = np.eye(m)
    C = np.kron(y[None, :], Im) @ B @ np.kron(x[:, None], Im)
    return np.linalg.eigvals(C)


# ------------------------------------------------------- alpha dependence

def critical_alpha(sys: JumpLinearSystem, mode: str = "markov", bracket=None,
                   tol: float = 1e-8, max_iter: int = 200) -> float:
    """Step size where ``sigma(H22)`` crosses 1, by bisection.

    ``bracket = (lo, hi)`` must have ``sigma(H22(lo)) < 1 <= sigma(H22(hi))``.
    Without one, ``lo`` is found by halving from 1 and ``hi`` by doubling.
    """
    _check_mode(mode)

    def f(a):
        return sigma_h22(sys.with_alpha(a), mode) - 1.0

    if bracket is None:
        lo = 1.0
        for _ in range(60):
            if f(lo) < 0:
                break
            lo *= 0.5
        else:
            raise AnalysisError("no stable alpha found; is A_bar Hurwitz?")
        hi = lo
        for _ in range(60):
            hi *= 2.0
            if f(hi) >= 0:
                break
        else:
            raise AnalysisError("sigma(H22) stays below 1; widen the bracket")
    else:
        lo, hi = map(float, bracket)
        if not (f(lo) < 0 <= f(hi)):
            raise AnalysisError(
                f"no sign change of sigma(H22) - 1 on [{lo}, {hi}]; try a wider bracket"
            )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= 0.1 * tol or hi - lo <= 4 * np.finfo(float).eps * hi:
            lo = hi = mid
            break
        if fm < 0:
            lo = mid
        else:
            hi = mid
    a_star = 0.5 * (lo + hi)
    if abs(f(a_star)) > tol:
        raise NumericalError(f"bisection stalled at alpha = {a_star!r}")
    return a_star


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    sigma_H11: float
    sigma_H22: float
    sigma_pred_H22: float
    delta_inf: float
    stable: bool


def _sweep_row(sys: JumpLinearSystem, alpha: float, mode: str) -> SweepRow:
    s = sys.with_alpha(alpha)
    rep = stability_report(s, mode)
    delta = math.nan
    if rep.stable:
        if mode == "iid":
            delta = iid_steady_state(build_iid_model(s)).delta_inf
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                delta = build_markov_steady_state(s).delta_inf
    pred = rep.perturbation_sigma_H22 if rep.perturbation_sigma_H22 is not None else math.nan
    return SweepRow(alpha=float(alpha), sigma_H11=rep.sigma_H11.spectral_radius,
                    sigma_H22=rep.sigma_H22.spectral_radius, sigma_pred_H22=pred,
                    delta_inf=delta, stable=rep.stable)


def alpha_sweep(sys: JumpLinearSystem, alphas, mode: str = "markov",
                workers: Optional[int] = None):
    """One :class:`SweepRow` per step size, in input order.

    Unstable step sizes are reported with ``stable=False`` and a NaN
    ``delta_inf`` instead of raising.
    """
    _check_mode(mode)
    alphas = [float(a) for a in alphas]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda a: _sweep_row(sys, a, mode), alphas))
    return [_sweep_row(sys, a, mode) for a in alphas]


def loglog_slope(alphas, deltas) -> float:
    """Slope of the least-squares line through ``(log alpha, log delta)``."""
    return float(np.polyfit(np.log(alphas), np.log(deltas), 1)[0])


def perturbation_order_fit(sys: JumpLinearSystem, alphas, mode: str = "markov"):
    """Fit ``|sigma(H22)(alpha) - prediction| = c alpha^2``.

    Returns ``(c, rel_residual, gaps)`` where ``c`` is the geometric mean of
    ``gap / alpha^2`` and ``rel_residual`` is ``max |gap / (c alpha^2) - 1|``.
    """
    alphas = np.asarray(alphas, dtype=float)
    gaps = np.empty_like(alphas)
    for i, a in enumerate(alphas):
        s = sys.with_alpha(a)
        gaps[i] = abs(sigma_h22(s, mode) - perturbation_estimate(s, mode)[1])
    ratio = gaps / alphas**2
    c = float(np.exp(np.mean(np.log(ratio))))
    return c, float(np.max(np.abs(ratio / c - 1.0))), gaps
