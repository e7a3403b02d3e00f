"""Pure-numpy trajectory kernel, vectorized across trajectories.

Performs exactly the same floating-point operations, in the same order, as
the compiled kernel in ``_mc_kernel.pyx``; both produce bit-identical paths.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_TWO_M53 = 2.0 ** -53


def mix64(x):
    """SplitMix64 output function applied to state ``x + GOLDEN`` (uint64 arrays)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
        return z ^ (z >> np.uint64(31))


def trajectory_keys(seed, t_start, count):
    t = np.arange(t_start, t_start + count, dtype=np.uint64)
    return mix64(np.uint64(seed) ^ mix64(t))


def uniforms(keys, j):
    """``j``-th uniform in [0, 1) of every stream in ``keys``."""
    with np.errstate(over="ignore"):
        z = mix64(keys + np.uint64(j) * GOLDEN)
    return (z >> _S11).astype(np.float64) * _TWO_M53


def _draw(cum_rows, u):
    # first column whose cumulative probability exceeds u
    return np.argmax(u[:, None] < cum_rows, axis=1)


def simulate_chunk(H, G, cum, cum0, xi0, seed, t_start, count, horizon, slot,
                   states, modes, overflow):
    """Simulate ``count`` trajectories starting at global index ``t_start``.

    ``slot[k]`` is the output row for step ``k`` or -1. Results are written
    into ``states`` (count, R, d), ``modes`` (count, R) and ``overflow``
    (count,), the first step with a non-finite state or -1.
    """
    d = xi0.shape[0]
    keys = trajectory_keys(seed, t_start, count)
    xi = np.repeat(xi0[None, :], count, axis=0)
    z = _draw(np.broadcast_to(cum0, (count, cum0.shape[0])), uniforms(keys, 0))
    overflow[:] = -1
    if slot[0] >= 0:
        states[:, slot[0], :] = xi
        modes[:, slot[0]] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(horizon):
            new = np.empty_like(xi)
            for i in range(d):
                acc = np.zeros(count)
                for j in range(d):
                    acc = acc + H[z, i, j] * xi[:, j]
                new[:, i] = acc + G[z, i]
            xi = new
            z = _draw(cum[z], uniforms(keys, k + 1))
            bad = (overflow < 0) & ~np.all(np.isfinite(xi), axis=1)
            overflow[bad] = k + 1
            s = slot[k + 1]
            if s >= 0:
                states[:, s, :] = xi
                modes[:, s] = z
