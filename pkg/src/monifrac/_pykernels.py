"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Same signatures, same in-place semantics and the same order of random
draws; layers are vectorized over bonds, the sparse measurement scan is a
scalar loop.
"""
import math

import numpy as np

PROJECTIVE, GENERALIZED, NOCLICK = 0, 1, 2
DRIFT_TOL = 1e-12


def layer_bonds(L, k, pbc):
    """Left sites (0-based) of the active bonds in layer ``k``."""
    if k % 2 == 1:
        return np.arange(0, L, 2)
    stop = L if pbc else L - 1
    return np.arange(1, stop, 2)


def bond_of(m, k, L, pbc):
    """Index of the active bond holding site ``m`` in layer ``k``, or -1."""
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


def next_site(rng, i, p, logq, L):
    """Next selected site after ``i`` in a Bernoulli(p) scan, via a geometric skip."""
    if p >= 1.0:
        return i + 1
    gap = math.floor(math.log1p(-rng.random()) / logq)
    if i + 1.0 + gap >= L:
        return L
    return i + 1 + int(gap)


def haar_from_normals(g):
    """Haar unitaries from Ginibre entries, one per row of ``g`` (shape ``(n, 8)``).

    Column-wise Gram-Schmidt, i.e. the QR factor with positive ``diag(R)``.
    Returns arrays ``(u00, u01, u10, u11)``.
    """
    a0 = g[:, 0] + 1j * g[:, 1]
    a1 = g[:, 4] + 1j * g[:, 5]
    c0 = g[:, 2] + 1j * g[:, 3]
    c1 = g[:, 6] + 1j * g[:, 7]
    na = np.sqrt(a0.real**2 + a0.imag**2 + a1.real**2 + a1.imag**2)
    a0 = a0 / na
    a1 = a1 / na
    proj = a0.conjugate() * c0 + a1.conjugate() * c1
    c0 = c0 - proj * a0
    c1 = c1 - proj * a1
    nc = np.sqrt(c0.real**2 + c0.imag**2 + c1.real**2 + c1.imag**2)
    return a0, c0 / nc, a1, c1 / nc


def _normalize(v):
    v *= 1.0 / math.sqrt(np.sum(v.real**2 + v.imag**2))


def _renormalize_drift(dist):
    total = dist.sum()
    if abs(total - 1.0) > DRIFT_TOL:
        dist *= 1.0 / total


def quantum_steps(psi, t0, nsteps, pbc, gate, scheme, e, p, rng):
    L = psi.shape[0]
    logq = math.log1p(-p) if p < 1.0 else 0.0
    if gate is not None:
        u00, u01, u10, u11 = gate[0, 0], gate[0, 1], gate[1, 0], gate[1, 1]
    for k in range(t0 + 1, t0 + nsteps + 1):
        left = layer_bonds(L, k, pbc)
        right = (left + 1) % L
        if gate is None:
            u00, u01, u10, u11 = haar_from_normals(
                rng.standard_normal(8 * left.size).reshape(-1, 8))
        x = psi[left]
        y = psi[right]
        psi[left] = u00 * x + u01 * y
        psi[right] = u10 * x + u11 * y

        if p > 0.0:
            i = next_site(rng, -1, p, logq, L)
            while i < L:
                if scheme == NOCLICK:
                    psi[i] = 0
                    if not np.any(psi):
                        raise ValueError("postselection impossible")
                else:
                    c = psi[i]
                    p1 = c.real**2 + c.imag**2
                    if scheme == GENERALIZED:
                        p1 = 0.5 * e + (1.0 - e) * p1
                    u = rng.random()
                    if scheme == PROJECTIVE:
                        if u < p1:
                            psi[:] = 0
                            psi[i] = 1.0
                        else:
                            psi[i] = 0
                    else:
                        if u < p1:
                            keep, other = math.sqrt(1.0 - 0.5 * e), math.sqrt(0.5 * e)
                        else:
                            keep, other = math.sqrt(0.5 * e), math.sqrt(1.0 - 0.5 * e)
                        psi *= other
                        psi[i] = c * keep
                    _normalize(psi)
                i = next_site(rng, i, p, logq, L)
        _normalize(psi)


def classical_steps(dist, m, t0, nsteps, pbc, s_fixed, p, rng):
    L = dist.shape[0]
    logq = math.log1p(-p) if p < 1.0 else 0.0
    random_s = s_fixed < 0.0
    for k in range(t0 + 1, t0 + nsteps + 1):
        left = layer_bonds(L, k, pbc)
        right = (left + 1) % L
        s = rng.random(left.size) if random_s else s_fixed
        x = dist[left]
        y = dist[right]
        flux = (1.0 - s) * (y - x)
        dist[left] = x + flux
        dist[right] = y - flux
        b = bond_of(m, k, L, pbc)
        if b >= 0:
            sb = s[b] if random_s else s
            if rng.random() >= sb:
                j = int(left[b])
                m = (j + 1) % L if m == j else j
        _renormalize_drift(dist)

        if p > 0.0:
            i = next_site(rng, -1, p, logq, L)
            while i < L:
                if i == m:
                    if dist[i] <= 0.0:
                        raise ValueError("inconsistent detection")
                    dist[:] = 0.0
                    dist[i] = 1.0
                elif dist[i] > 0.0:
                    dist[i] = 0.0
                    rest = dist.sum()
                    if rest <= 0.0:
                        raise ValueError("inconsistent miss")
                    dist *= 1.0 / rest
                i = next_site(rng, i, p, logq, L)
        if dist[m] <= 0.0:
            raise ValueError("filter inconsistency: true site has zero estimated mass")
    return m


def transition_steps(dist, t0, nsteps, pbc, s):
    L = dist.shape[0]
    for k in range(t0 + 1, t0 + nsteps + 1):
        left = layer_bonds(L, k, pbc)
        right = (left + 1) % L
        x = dist[left]
        y = dist[right]
        flux = (1.0 - s) * (y - x)
        dist[left] = x + flux
        dist[right] = y - flux
        _renormalize_drift(dist)
