"""Seeded Monte Carlo estimates of the moments of a jump linear system.

Trajectory ``t`` draws its randomness from a SplitMix64 stream keyed by
``(base_seed, t)``, so every path is fixed by the seed regardless of how
trajectories are split across workers. Paths are simulated in fixed-size
chunks and statistics are merged in chunk order, which makes estimates
bit-reproducible for any worker count and for either kernel backend.

The compiled kernel (``_mc_kernel``) is used when it was built; otherwise the
numpy fallback runs. Set ``TDMJLS_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _mc_fallback
from .errors import ValidationError
from .mjls import JumpLinearSystem

log = logging.getLogger(__name__)

try:
    from ._mc_kernel import simulate_chunk as _compiled_kernel
except ImportError:  # extension not built
    _compiled_kernel = None

CHUNK = 8192


def available_backends():
    return ("cython", "python") if _compiled_kernel is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get("TDMJLS_BACKEND", "").lower()
    if forced in ("python", "cython"):
        return forced
    return "cython" if _compiled_kernel is not None else "python"


def _kernel(backend):
    if backend == "auto":
        backend = default_backend()
    if backend == "cython":
        if _compiled_kernel is None:
            raise ValidationError("compiled kernel not available; build the extension")
        return _compiled_kernel
    if backend == "python":
        return _mc_fallback.simulate_chunk
    raise ValidationError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class MCConfig:
    trajectories: int
    horizon: int
    base_seed: int = 0
    record_steps: Optional[tuple] = None
    workers: int = 1
    backend: str = "auto"

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValidationError("trajectories must be >= 1")
        if self.horizon < 0:
            raise ValidationError("horizon must be >= 0")
        if not 0 <= self.base_seed < 2**64:
            raise ValidationError("base_seed must be a 64-bit unsigned integer")
        steps = range(self.horizon + 1) if self.record_steps is None else self.record_steps
        steps = tuple(sorted({int(s) for s in steps}))
        if steps and (steps[0] < 0 or steps[-1] > self.horizon):
            raise ValidationError(f"record_steps must lie in [0, {self.horizon}]")
        object.__setattr__(self, "record_steps", steps)


@dataclass(frozen=True)
class MCEstimate:
    """Empirical moments at each recorded step (leading axis).

    ``*_se`` arrays hold standard errors (sample std / sqrt(T)); they are
    ``None`` when ``trajectories == 1``.
    """

    steps: np.ndarray
    trajectories: int
    q: np.ndarray
    Q: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    msn: np.ndarray
    mode_freq: np.ndarray
    q_se: Optional[np.ndarray] = None
    Q_se: Optional[np.ndarray] = None
    mean_se: Optional[np.ndarray] = None
    second_moment_se: Optional[np.ndarray] = None
    msn_se: Optional[np.ndarray] = None
    mode_freq_se: Optional[np.ndarray] = None
    overflow_step: int = -1
    extra: dict = field(default_factory=dict)

    def index(self, k: int) -> int:
        hit = np.flatnonzero(self.steps == k)
        if not hit.size:
            raise KeyError(f"step {k} was not recorded")
        return int(hit[0])


def _cumulative(P):
    cum = np.cumsum(P, axis=1)
    for r in range(P.shape[0]):
        last = np.flatnonzero(P[r] > 0)[-1]
        cum[r, last:] = np.inf
    return np.ascontiguousarray(cum)


def simulate_paths(sys: JumpLinearSystem, xi0, cfg: MCConfig, t_start: int = 0,
                   count: Optional[int] = None):
    """Raw recorded states ``(count, R, d)``, modes ``(count, R)`` and overflow steps."""
    xi0 = np.ascontiguousarray(np.asarray(xi0, dtype=float).reshape(-1))
    if xi0.shape[0] != sys.d:
        raise ValidationError(f"xi0 has length {xi0.shape[0]}, expected {sys.d}")
    count = cfg.trajectories if count is None else count
    steps = np.asarray(cfg.record_steps, dtype=np.int64)
    slot = np.full(cfg.horizon + 1, -1, dtype=np.int64)
    slot[steps] = np.arange(steps.shape[0])
    states = np.empty((count, steps.shape[0], sys.d))
    modes = np.empty((count, steps.shape[0]), dtype=np.int64)
    overflow = np.empty(count, dtype=np.int64)
    _kernel(cfg.backend)(
        np.ascontiguousarray(sys.H), np.ascontiguousarray(sys.G),
        _cumulative(sys.chain.P), _cumulative(sys.chain.p0[None, :])[0],
        xi0, np.uint64(cfg.base_seed), int(t_start), int(count),
        int(cfg.horizon), slot, states, modes, overflow,
    )
    return states, modes, overflow


def _chunk_stats(sys, states, modes):
    """Per recorded step: (count, mean, M2) over the chunk for every scalar statistic."""
    c, R, d = states.shape
    n = sys.n
    means, m2s = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for r in range(R):
            xi = states[:, r, :]
            ind = np.zeros((c, n))
            ind[np.arange(c), modes[:, r]] = 1.0
            outer = xi[:, :, None] * xi[:, None, :]
            cols = [
                ind,
                (ind[:, :, None] * xi[:, None, :]).reshape(c, -1),
                (ind[:, :, None, None] * outer[:, None]).reshape(c, -1),
                xi,
                outer.reshape(c, -1),
                np.einsum("ti,ti->t", xi, xi)[:, None],
            ]
            X = np.concatenate(cols, axis=1)
            mu = X.mean(axis=0)
            means.append(mu)
            m2s.append(((X - mu) ** 2).sum(axis=0))
    return c, np.array(means), np.array(m2s)


def _merge(acc, part):
    # Chan et al. pairwise update; applied in chunk order
    if acc is None:
        return part
    na, ma, Ma = acc
    nb, mb, Mb = part
    n = na + nb
    delta = mb - ma
    with np.errstate(over="ignore", invalid="ignore"):
        return n, ma + delta * (nb / n), Ma + Mb + delta**2 * (na * nb / n)


def simulate_moments(sys: JumpLinearSystem, xi0, cfg: MCConfig) -> MCEstimate:
    """Empirical indicator moments, mean, second moment and mean-square norm."""
    T = cfg.trajectories
    starts = list(range(0, T, CHUNK))

    def run(start):
        cnt = min(CHUNK, T - start)
        states, modes, overflow = simulate_paths(sys, xi0, cfg, start, cnt)
        ov = overflow[overflow >= 0]
        return _chunk_stats(sys, states, modes), (int(ov.min()) if ov.size else -1)

    if cfg.workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(s) for s in starts]

    acc = None
    overflow_step = -1
    for stats, ov in parts:
        acc = _merge(acc, stats)
        if ov >= 0:
            overflow_step = ov if overflow_step < 0 else min(overflow_step, ov)
    _, mean, M2 = acc
    se = np.sqrt(M2 / (T - 1) / T) if T > 1 else None

    n, d = sys.n, sys.d
    R = len(cfg.record_steps)
    bounds = np.cumsum([0, n, n * d, n * d * d, d, d * d, 1])

    def split(v):
        if v is None:
            return [None] * 6
        parts = [v[:, bounds[i]:bounds[i + 1]] for i in range(6)]
        shapes = [(R, n), (R, n, d), (R, n, d, d), (R, d), (R, d, d), (R,)]
        return [p.reshape(s) for p, s in zip(parts, shapes)]

    freq, q, Q, mu, sec, msn = split(mean)
    freq_se, q_se, Q_se, mu_se, sec_se, msn_se = split(se)
    if overflow_step >= 0:
        log.warning("non-finite states from step %d", overflow_step)
    return MCEstimate(
        steps=np.asarray(cfg.record_steps), trajectories=T, q=q, Q=Q, mean=mu,
        second_moment=sec, msn=msn, mode_freq=freq, q_se=q_se, Q_se=Q_se,
        mean_se=mu_se, second_moment_se=sec_se, msn_se=msn_se, mode_freq_se=freq_se,
        overflow_step=overflow_step,
    )


def within_se(exact, estimate, se, n_se: float = 3.0, atol: float = 1e-12,
              rtol: float = 1e-12):
    """Elementwise ``|exact - estimate| <= n_se * se``.

    The tolerance never drops below ``atol + rtol |exact|``: when every path
    takes the same value the sample spread is pure rounding noise.
    """
    exact = np.asarray(exact, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    se = np.asarray(se, dtype=float)
    return np.abs(exact - estimate) <= np.maximum(n_se * se, atol + rtol * np.abs(exact))


@dataclass(frozen=True)
class ProbeResult:
    verdict: str
    slope: float
    overflow_step: int = -1


def divergence_probe(sys: JumpLinearSystem, xi0, cfg: MCConfig,
                     grow_tol: float = 1e-2, settle_tol: float = 1e-3) -> ProbeResult:
    """Classify the empirical mean-square norm as growing, settling or inconclusive.

    Fits ``log E|xi_k|^2`` against ``k`` over the second half of the
    recorded steps. Overflow counts as growth.
    """
    est = simulate_moments(sys, xi0, cfg)
    if est.overflow_step >= 0:
        return ProbeResult("growing", float("inf"), est.overflow_step)
    steps = est.steps
    tail = steps >= max(1, steps[-1] // 2)
    if tail.sum() < 2:
        raise ValidationError("need at least two recorded steps in the tail")
    msn = est.msn[tail]
    if np.all(msn == 0.0):
        return ProbeResult("settling", 0.0)
    msn = np.maximum(msn, np.finfo(float).tiny)
    slope = float(np.polyfit(steps[tail].astype(float), np.log(msn), 1)[0])
    if slope > grow_tol:
        return ProbeResult("growing", slope)
    if slope <= settle_tol:
        return ProbeResult("settling", slope)
    return ProbeResult("inconclusive", slope)
