"""Closed-form reference models.

Single-shot measurement on a uniform state
    One (or ``r``) projective occupation checks on ``p_i = 1/L``.
Poissonian resetting
    A brick-wall random walk (``s = 1/2``) whose distribution collapses back
    to the centre at exponentially distributed epochs, plus the continuum
    forms obtained by averaging a Gaussian packet over the resetting clock.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import _backend

EULER_GAMMA = 0.5772156649015329


class DivergentIntegralError(ValueError):
    """Raised for resetting mean IPR at ``q >= 3``, where the time integral diverges."""


def _check_single_shot(L, q, r):
    if L < 2 or L % 2:
        raise ValueError("L must be a positive even integer")
    if q <= 0:
        raise ValueError("q must be positive")
    if not 1 <= r < L:
        raise ValueError("need 1 <= r < L")


def single_shot_mean_ipr(L, q, r=1):
    _check_single_shot(L, q, r)
    return (r + (L - r) ** (2.0 - q)) / L


def single_shot_typical_ln_ipr(L, q, r=1):
    """Ensemble average of ``ln IPR(q)``; the detected branch contributes ``ln 1 = 0``."""
    _check_single_shot(L, q, r)
    return (L - r) / L * (1.0 - q) * math.log(L - r)


def single_shot_exponents(q):
    """``(tau_q, tau*_q)`` of the single-shot model in the large-L limit."""
    if q <= 0:
        raise ValueError("q must be positive")
    return (q - 1.0 if q < 2 else 1.0), q - 1.0


def generalized_single_shot_ipr(L, q, e):
    """IPR after a generalized 'click' on the uniform state with error rate ``e``."""
    if not 0.0 < e <= 1.0:
        raise ValueError("error rate must lie in (0, 1]; e = 0 is the projective case (IPR = 1)")
    if q <= 0:
        raise ValueError("q must be positive")
    return ((2.0 - e) ** q + (L - 1) * e ** q) / ((L - 1) * e + 2.0 - e) ** q


# --- Poissonian resetting -------------------------------------------------

def waiting_time_from_uniform(eta, lam):
    """``round(-ln(eta) / lam)`` with halves rounded up, clamped to at least one step."""
    if not 0.0 < lam <= 1.0:
        raise ValueError("resetting rate must lie in (0, 1]")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    return max(1, int(math.floor(-math.log(eta) / lam + 0.5)))


def reset_waiting_time(lam, rng):
    return waiting_time_from_uniform(1.0 - rng.random(), lam)


@dataclass(frozen=True)
class ResetParams:
    L: int
    lam: float = None
    T: int = None

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError("L must be a positive even integer")
        if self.lam is None:
            object.__setattr__(self, "lam", 1.0 / self.L)
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("resetting rate must lie in (0, 1]")
        if self.T is None:
            # P(no reset by T) = exp(-32)
            object.__setattr__(self, "T", int(math.ceil(32.0 / self.lam)))
        if self.T < 0:
            raise ValueError("T must be non-negative")


def last_reset_epoch(params, rng):
    """Largest resetting epoch ``<= T`` (0 if the clock never fires)."""
    t = last = 0
    while True:
        t += reset_waiting_time(params.lam, rng)
        if t > params.T:
            return last
        last = t


def simulate_reset_walk(params, rng, backend=None):
    """Distribution at step ``T`` of the resetting brick-wall walk (OBC, ``s = 1/2``).

    Every reset replaces the distribution by a point mass at the centre, so
    only the layers after the last epoch are evolved.
    """
    kern = _backend.get(backend)
    L = params.L
    last = last_reset_epoch(params, rng)
    dist = np.zeros(L)
    dist[L // 2 - 1] = 1.0
    kern.transition_steps(dist, last, params.T - last, False, 0.5)
    return dist


def resetting_stationary_dist(x, L):
    """Continuum stationary density ``exp(-sqrt(2/L)|x|) / sqrt(2L)``."""
    return np.exp(-math.sqrt(2.0 / L) * np.abs(x)) / math.sqrt(2.0 * L)


def gaussian_ipr(q, t):
    """``int p(x, t)^q dx`` for a centred Gaussian of variance ``t``."""
    return math.sqrt((2.0 * math.pi * t) ** (1.0 - q) / q)


def resetting_mean_ipr(L, q):
    if q <= 0:
        raise ValueError("q must be positive")
    if q >= 3:
        raise DivergentIntegralError("divergent time integral")
    # Gaussian IPR averaged over exponential waiting times with rate 1/L
    return math.sqrt((2.0 * math.pi * L) ** (1.0 - q) / q) * math.gamma((3.0 - q) / 2.0)


def resetting_typical_ipr(L, q):
    if q <= 0:
        raise ValueError("q must be positive")
    return math.exp(EULER_GAMMA * (q - 1.0) / 2.0) / math.sqrt(q * (2.0 * math.pi * L) ** (q - 1.0))


def resetting_exponents(q):
    """``(tau_q, tau*_q)``; ``tau_q`` is NaN where the mean IPR diverges."""
    tau = (q - 1.0) / 2.0
    return (tau if q < 3 else math.nan), tau


@dataclass(frozen=True)
class ResettingForms:
    L: float
    q: float

    def stationary_dist(self, x):
        return resetting_stationary_dist(x, self.L)

    @property
    def mean_ipr(self):
        return resetting_mean_ipr(self.L, self.q)

    @property
    def typical_ipr(self):
        return resetting_typical_ipr(self.L, self.q)

    @property
    def tau_q(self):
        return resetting_exponents(self.q)[0]

    @property
    def tau_star_q(self):
        return resetting_exponents(self.q)[1]

    @property
    def variance(self):
        return float(self.L)


def resetting_closed_forms(L, q):
    if q <= 0:
        raise ValueError("q must be positive")
    return ResettingForms(L, q)
