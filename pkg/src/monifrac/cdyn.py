"""Classical single-particle circuits with a Bayesian position estimate.

A true walker ``m`` hops through brick-wall transition layers while an
estimate ``dist`` of its position is propagated with the same realized
``s`` values and corrected by sparse, error-free occupation checks.
Sites are 0-based; bonds and layer parity follow :mod:`monifrac.qdyn`.
"""
import math

import numpy as np

from . import _backend
from ._pykernels import DRIFT_TOL, next_site
from .qdyn import CircuitSchedule

MASS_TOL = 1e-10


def check_dist(dist):
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.shape[0] < 1:
        raise ValueError("distribution must be a non-empty 1-D vector")
    if np.any(dist < 0):
        raise ValueError("distribution has negative entries")
    if abs(dist.sum() - 1.0) > MASS_TOL:
        raise ValueError(f"distribution does not sum to 1 (sum = {dist.sum()!r})")
    return dist


def transition_matrix(s):
    return np.array([[s, 1.0 - s], [1.0 - s, s]])


def apply_transition_layer(dist, s_values, t, schedule):
    """Apply ``T(s_values[(j, k)])`` to ``(p_j, p_k)`` for each active bond of layer ``t``."""
    dist = check_dist(dist)
    if dist.shape[0] != schedule.L:
        raise ValueError(f"length {dist.shape[0]} does not match schedule L = {schedule.L}")
    active = schedule.bonds(t)
    if set(s_values) != set(active):
        raise ValueError(f"s_values bonds {sorted(s_values)} do not match layer {t} bonds {active}")
    out = dist.copy()
    for j, k in active:
        # T(s) @ (p_j, p_k) written as a transfer, exact when p_j == p_k
        flux = (1.0 - s_values[(j, k)]) * (dist[k] - dist[j])
        out[j] += flux
        out[k] -= flux
    total = out.sum()
    return out / total if abs(total - 1.0) > DRIFT_TOL else out


def step_particle(m, s_values, t, schedule, rng):
    """Move the walker across its active bond with probability ``1 - s``."""
    for j, k in schedule.bonds(t):
        if m in (j, k):
            if rng.random() >= s_values[(j, k)]:
                return k if m == j else j
            return m
    return m


def bayes_detect(dist, j):
    if dist[j] <= 0.0:
        raise ValueError(f"inconsistent detection at site {j}: estimated mass is zero")
    out = np.zeros_like(np.asarray(dist, dtype=float))
    out[j] = 1.0
    return out


def bayes_miss(dist, j):
    dist = np.asarray(dist, dtype=float)
    rest = dist.sum() - dist[j]
    if rest <= 0.0:
        raise ValueError(f"inconsistent miss at site {j}: all mass sits there")
    out = dist.copy()
    out[j] = 0.0
    return out / out.sum()


def classical_measurement_layer(dist, m, p, rng):
    """Scan sites in ascending order, each checked with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    dist = np.asarray(dist, dtype=float)
    L = dist.shape[0]
    if p == 0.0:
        return dist.copy()
    logq = math.log1p(-p) if p < 1.0 else 0.0
    i = next_site(rng, -1, p, logq, L)
    while i < L:
        if i == m:
            dist = bayes_detect(dist, i)
        elif dist[i] > 0.0:
            dist = bayes_miss(dist, i)
        i = next_site(rng, i, p, logq, L)
    return dist


def evolve(dist, m, t0, nsteps, schedule, p, s=None, rng=None, backend=None):
    """Advance ``(m, dist)`` in place through layers ``t0 + 1 .. t0 + nsteps``.

    ``s=None`` draws a fresh uniform ``s`` for every bond and layer.
    Raises ValueError if the estimate ever assigns zero mass to ``m``.
    Returns the final true site.
    """
    kern = _backend.get(backend)
    return kern.classical_steps(dist, int(m), int(t0), int(nsteps), schedule.pbc,
                                -1.0 if s is None else float(s), float(p), rng)


def evolve_classical_trajectory(spec, L, rng, backend=None):
    """Final estimate of one classical trajectory; ``spec.dynamics`` picks random or fixed ``s``."""
    schedule = CircuitSchedule(L, spec.boundary)
    start = L // 2 - 1
    dist = np.zeros(L)
    dist[start] = 1.0
    s = None if spec.dynamics == "classical_random" else 0.5
    evolve(dist, start, 0, spec.total_time(L), schedule, spec.rate(L), s, rng, backend)
    return dist
