# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernels.

Every routine here has a line-for-line twin in ``_pykernels`` and draws
from the supplied ``numpy.random.Generator`` in exactly the same order, so
both backends produce the same trajectory for the same stream (up to
floating-point summation order).

Random draws per layer ``k`` (layers numbered from 1):

quantum
    ``8 * nbonds`` standard normals (Haar gates only), then the
    measurement scan: one uniform per geometric skip and, for stochastic
    schemes, one uniform per selected site drawn right after its skip.
classical
    ``nbonds`` uniforms (random ``s`` only), one uniform for the particle
    if it sits on an active bond, then the measurement scan (skips only).
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs, floor, log1p, sqrt
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal, random_standard_uniform

cdef enum:
    PROJECTIVE = 0
    GENERALIZED = 1
    NOCLICK = 2

cdef double DRIFT_TOL = 1e-12


cdef inline bitgen_t* _bitgen(object rng) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef inline Py_ssize_t _nbonds(Py_ssize_t L, long k, bint pbc) noexcept nogil:
    if k % 2 == 1:
        return L // 2
    return L // 2 if pbc else L // 2 - 1


cdef inline Py_ssize_t _left(Py_ssize_t b, long k) noexcept nogil:
    # left site of the b-th active bond, 0-based
    return 2 * b if k % 2 == 1 else 2 * b + 1


cdef inline Py_ssize_t _bond_of(Py_ssize_t m, long k, Py_ssize_t L, bint pbc) noexcept nogil:
    # index of the active bond containing site m, or -1
    cdef Py_ssize_t left
    if k % 2 == 1:
        return m // 2
    left = m if m % 2 == 1 else m - 1
    if left < 0:
        if not pbc:
            return -1
        left = L - 1
    if left == L - 1 and not pbc:
        return -1
    return (left - 1) // 2


cdef inline double _abs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline Py_ssize_t _next_site(bitgen_t* bg, Py_ssize_t i, double p, double logq,
                                  Py_ssize_t L) noexcept nogil:
    cdef double gap
    if p >= 1.0:
        return i + 1
    gap = floor(log1p(-random_standard_uniform(bg)) / logq)
    if <double> i + 1.0 + gap >= <double> L:
        return L
    return i + 1 + <Py_ssize_t> gap


cdef void _normalize(double complex[::1] psi) noexcept nogil:
    cdef Py_ssize_t i, L = psi.shape[0]
    cdef double s = 0.0
    for i in range(L):
        s += _abs2(psi[i])
    s = 1.0 / sqrt(s)
    for i in range(L):
        psi[i] = psi[i] * s


def quantum_steps(double complex[::1] psi, long t0, long nsteps, bint pbc,
                  object gate, int scheme, double e, double p, object rng):
    """Advance ``psi`` in place through layers ``t0 + 1 .. t0 + nsteps``.

    ``gate`` is a fixed 2x2 matrix or ``None`` for fresh Haar gates.
    """
    cdef Py_ssize_t L = psi.shape[0]
    cdef Py_ssize_t nb, b, j, jr, i
    cdef long k
    cdef bint haar = gate is None
    cdef double complex u00 = 0, u01 = 0, u10 = 0, u11 = 0
    cdef double complex a0, a1, c0, c1, x, y, proj
    cdef double na, nc, g[8]
    cdef double logq = log1p(-p) if p < 1.0 else 0.0
    cdef double p1, u, s, keep, other
    cdef bitgen_t* bg = _bitgen(rng)
    cdef bint failed = False

    if not haar:
        u00 = gate[0, 0]; u01 = gate[0, 1]; u10 = gate[1, 0]; u11 = gate[1, 1]

    with rng.bit_generator.lock:
        with nogil:
            for k in range(t0 + 1, t0 + nsteps + 1):
                nb = _nbonds(L, k, pbc)
                for b in range(nb):
                    j = _left(b, k)
                    jr = j + 1 if j + 1 < L else 0
                    if haar:
                        for i in range(8):
                            g[i] = random_standard_normal(bg)
                        # Gram-Schmidt on the Ginibre columns == QR with positive diag(R)
                        a0 = g[0] + 1j * g[1]
                        a1 = g[4] + 1j * g[5]
                        c0 = g[2] + 1j * g[3]
                        c1 = g[6] + 1j * g[7]
                        na = sqrt(_abs2(a0) + _abs2(a1))
                        a0 = a0 / na
                        a1 = a1 / na
                        proj = a0.conjugate() * c0 + a1.conjugate() * c1
                        c0 = c0 - proj * a0
                        c1 = c1 - proj * a1
                        nc = sqrt(_abs2(c0) + _abs2(c1))
                        u00 = a0; u10 = a1
                        u01 = c0 / nc; u11 = c1 / nc
                    x = psi[j]
                    y = psi[jr]
                    psi[j] = u00 * x + u01 * y
                    psi[jr] = u10 * x + u11 * y

                if p > 0.0:
                    i = _next_site(bg, -1, p, logq, L)
                    while i < L:
                        if scheme == NOCLICK:
                            psi[i] = 0
                            s = 0.0
                            for j in range(L):
                                s += _abs2(psi[j])
                            if s == 0.0:
                                failed = True
                                break
                        else:
                            p1 = _abs2(psi[i])
                            if scheme == GENERALIZED:
                                p1 = 0.5 * e + (1.0 - e) * p1
                            u = random_standard_uniform(bg)
                            if scheme == PROJECTIVE:
                                if u < p1:
                                    # collapse to the basis state; a global phase is unobservable
                                    for j in range(L):
                                        psi[j] = 0
                                    psi[i] = 1.0
                                else:
                                    psi[i] = 0
                            else:
                                if u < p1:
                                    keep = sqrt(1.0 - 0.5 * e); other = sqrt(0.5 * e)
                                else:
                                    keep = sqrt(0.5 * e); other = sqrt(1.0 - 0.5 * e)
                                x = psi[i] * keep
                                for j in range(L):
                                    psi[j] = psi[j] * other
                                psi[i] = x
                            _normalize(psi)
                        i = _next_site(bg, i, p, logq, L)
                    if failed:
                        break
                _normalize(psi)
    if failed:
        raise ValueError("postselection impossible")


cdef inline void _renormalize_drift(double[::1] dist) noexcept nogil:
    # transfers conserve mass to rounding; rescale only once drift shows
    cdef Py_ssize_t i, L = dist.shape[0]
    cdef double s = 0.0
    for i in range(L):
        s += dist[i]
    if fabs(s - 1.0) > DRIFT_TOL:
        s = 1.0 / s
        for i in range(L):
            dist[i] = dist[i] * s


def classical_steps(double[::1] dist, long m, long t0, long nsteps, bint pbc,
                    double s_fixed, double p, object rng):
    """Co-evolve the true site ``m`` and the estimate ``dist`` in place.

    ``s_fixed`` < 0 requests fresh uniform ``s`` per bond and layer.
    Returns the final true site.
    """
    cdef Py_ssize_t L = dist.shape[0]
    cdef Py_ssize_t nb, b, j, jr, i
    cdef long k
    cdef bint random_s = s_fixed < 0.0
    cdef double s = s_fixed, x, y, rest
    cdef double logq = log1p(-p) if p < 1.0 else 0.0
    cdef double[::1] svals = np.empty(L // 2 + 1)
    cdef bitgen_t* bg = _bitgen(rng)
    cdef int err = 0

    with rng.bit_generator.lock:
        with nogil:
            for k in range(t0 + 1, t0 + nsteps + 1):
                nb = _nbonds(L, k, pbc)
                if random_s:
                    for b in range(nb):
                        svals[b] = random_standard_uniform(bg)
                for b in range(nb):
                    if random_s:
                        s = svals[b]
                    j = _left(b, k)
                    jr = j + 1 if j + 1 < L else 0
                    x = dist[j]
                    y = dist[jr]
                    # transfer form keeps equal neighbours bit-exact
                    x = (1.0 - s) * (y - x)
                    dist[j] += x
                    dist[jr] -= x
                b = _bond_of(m, k, L, pbc)
                if b >= 0:
                    if random_s:
                        s = svals[b]
                    if random_standard_uniform(bg) >= s:
                        j = _left(b, k)
                        if m == j:
                            m = j + 1 if j + 1 < L else 0
                        else:
                            m = j
                _renormalize_drift(dist)

                if p > 0.0:
                    i = _next_site(bg, -1, p, logq, L)
                    while i < L:
                        if i == m:
                            if dist[i] <= 0.0:
                                err = 1
                                break
                            for j in range(L):
                                dist[j] = 0.0
                            dist[i] = 1.0
                        elif dist[i] > 0.0:
                            dist[i] = 0.0
                            rest = 0.0
                            for j in range(L):
                                rest += dist[j]
                            if rest <= 0.0:
                                err = 2
                                break
                            rest = 1.0 / rest
                            for j in range(L):
                                dist[j] = dist[j] * rest
                        i = _next_site(bg, i, p, logq, L)
                    if err:
                        break
                if dist[m] <= 0.0:
                    err = 3
                    break
    if err == 1:
        raise ValueError("inconsistent detection")
    if err == 2:
        raise ValueError("inconsistent miss")
    if err == 3:
        raise ValueError("filter inconsistency: true site has zero estimated mass")
    return m


def transition_steps(double[::1] dist, long t0, long nsteps, bint pbc, double s):
    """Deterministic brick-wall transition layers with a common ``s``."""
    cdef Py_ssize_t L = dist.shape[0]
    cdef Py_ssize_t nb, b, j, jr
    cdef long k
    cdef double x, y
    with nogil:
        for k in range(t0 + 1, t0 + nsteps + 1):
            nb = _nbonds(L, k, pbc)
            for b in range(nb):
                j = _left(b, k)
                jr = j + 1 if j + 1 < L else 0
                x = dist[j]
                y = dist[jr]
                x = (1.0 - s) * (y - x)
                dist[j] += x
                dist[jr] -= x
            _renormalize_drift(dist)
