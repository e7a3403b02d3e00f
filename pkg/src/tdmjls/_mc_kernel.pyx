# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernel; mirrors ``_mc_fallback.simulate_chunk`` bit for bit."""

from libc.stdint cimport uint64_t, int64_t
from libc.math cimport isfinite
from libc.stdlib cimport malloc, free

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t j) noexcept nogil:
    return <double>(_mix(key + j * GOLDEN) >> 11) * (1.0 / 9007199254740992.0)


cdef inline Py_ssize_t _draw(const double[::1] row, double u) noexcept nogil:
    cdef Py_ssize_t j = 0
    cdef Py_ssize_t n = row.shape[0]
    while j < n - 1 and not (u < row[j]):
        j += 1
    return j


def simulate_chunk(const double[:, :, ::1] H, const double[:, ::1] G,
                   const double[:, ::1] cum, const double[::1] cum0,
                   const double[::1] xi0, uint64_t seed, int64_t t_start,
                   int64_t count, int64_t horizon, const int64_t[::1] slot,
                   double[:, :, ::1] states, int64_t[:, ::1] modes,
                   int64_t[::1] overflow):
    cdef Py_ssize_t d = xi0.shape[0]
    cdef Py_ssize_t t, k, i, j, z, s
    cdef uint64_t key
    cdef double acc
    cdef bint finite
    cdef double* xi = <double*> malloc(2 * d * sizeof(double))
    cdef double* nxt = xi + d
    if xi == NULL:
        raise MemoryError()
    try:
        with nogil:
            for t in range(count):
                key = _mix(seed ^ _mix(<uint64_t>(t_start + t)))
                for i in range(d):
                    xi[i] = xi0[i]
                z = _draw(cum0, _uniform(key, 0))
                overflow[t] = -1
                s = slot[0]
                if s >= 0:
                    for i in range(d):
                        states[t, s, i] = xi[i]
                    modes[t, s] = z
                for k in range(horizon):
                    finite = True
                    for i in range(d):
                        acc = 0.0
                        for j in range(d):
                            acc = acc + H[z, i, j] * xi[j]
                        nxt[i] = acc + G[z, i]
                    for i in range(d):
                        xi[i] = nxt[i]
                        if not isfinite(xi[i]):
                            finite = False
                    z = _draw(cum[z], _uniform(key, <uint64_t>(k + 1)))
                    if not finite and overflow[t] < 0:
                        overflow[t] = k + 1
                    s = slot[k + 1]
                    if s >= 0:
                        for i in range(d):
                            states[t, s, i] = xi[i]
                        modes[t, s] = z
    finally:
        free(xi)
