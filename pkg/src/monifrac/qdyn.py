"""Single-particle quantum circuits: brick-wall unitary layers and site measurements.

States are complex numpy vectors of length ``L`` (even) indexed by 0-based
site; bond ``(j, (j + 1) % L)`` couples neighbouring sites. Layers are
numbered from 1: odd layers act on bonds with even left site, even layers
on bonds with odd left site (plus the wrap bond ``(L - 1, 0)`` under PBC).
"""
from dataclasses import dataclass
import math

import numpy as np

from . import _backend
from ._pykernels import GENERALIZED, NOCLICK, PROJECTIVE, haar_from_normals, next_site

NORM_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementScheme:
    """Which Kraus pair is applied at a selected site.

    ``kind`` is ``"projective"``, ``"generalized"`` or ``"noclick"``;
    ``error_rate`` only matters for ``"generalized"``.
    """

    kind: str = "projective"
    error_rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("projective", "generalized", "noclick"):
            raise ValueError(f"unknown measurement scheme {self.kind!r}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must lie in [0, 1]")

    @classmethod
    def projective(cls):
        return cls("projective")

    @classmethod
    def generalized(cls, e):
        return cls("generalized", float(e))

    @classmethod
    def noclick(cls):
        return cls("noclick")

    @property
    def code(self):
        # e = 0 is the projective pair; sharing its code keeps the click collapse exact
        if self.kind == "generalized" and self.error_rate == 0.0:
            return PROJECTIVE
        return {"projective": PROJECTIVE, "generalized": GENERALIZED, "noclick": NOCLICK}[self.kind]

    def label(self):
        if self.kind == "generalized":
            return f"generalized:{self.error_rate:g}"
        return self.kind

    @classmethod
    def from_label(cls, label):
        kind, _, e = label.partition(":")
        return cls(kind, float(e) if e else 0.0)


@dataclass(frozen=True)
class CircuitSchedule:
    """Brick-wall bond sets for a lattice of ``L`` sites."""

    L: int
    boundary: str = "OBC"

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be a positive even integer, got {self.L}")
        if self.boundary not in ("OBC", "PBC"):
            raise ValueError("boundary must be 'OBC' or 'PBC'")

    @property
    def pbc(self):
        return self.boundary == "PBC"

    def bonds(self, t):
        """Active bonds ``(j, j + 1 mod L)`` of layer ``t``, pairwise disjoint."""
        if t % 2 == 1:
            lefts = range(0, self.L, 2)
        else:
            lefts = range(1, self.L if self.pbc else self.L - 1, 2)
        return [(j, (j + 1) % self.L) for j in lefts]


def check_state(state):
    """Validate a normalized 1-D amplitude vector.

    Site-local measurements accept any length; even ``L`` is enforced by
    :class:`CircuitSchedule` where the brick-wall layers need it.
    """
    state = np.asarray(state)
    if state.ndim != 1 or state.shape[0] < 1:
        raise ValueError("state must be a non-empty 1-D vector")
    norm = np.sum(np.abs(state) ** 2)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
    return state


def localized_state(L, site=None):
    """Basis state on ``site`` (default: the centre site ``L/2`` in 1-based labels)."""
    psi = np.zeros(L, dtype=complex)
    psi[L // 2 - 1 if site is None else site] = 1.0
    return psi


def sample_haar_unitary(rng):
    """A Haar-random element of U(2).

    Draws a complex Ginibre matrix (eight standard normals, real and
    imaginary parts of ``G00, G01, G10, G11``), takes its QR decomposition
    and rotates the phases of ``Q`` so that ``diag(R)`` is positive.
    """
    g = rng.standard_normal(8)
    G = (g[0::2] + 1j * g[1::2]).reshape(2, 2)
    Q, R = np.linalg.qr(G)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def fixed_gate():
    return np.array([[1.0, 1.0], [-1.0, 1.0]], dtype=complex) / math.sqrt(2.0)


def apply_unitary_layer(state, gates, t, schedule):
    """Apply ``gates[(j, k)]`` to the amplitude pair ``(c_j, c_k)`` for each active bond."""
    state = check_state(state)
    if state.shape[0] != schedule.L:
        raise ValueError(f"length {state.shape[0]} does not match schedule L = {schedule.L}")
    active = schedule.bonds(t)
    if set(gates) != set(active):
        raise ValueError(f"gate bonds {sorted(gates)} do not match layer {t} bonds {active}")
    out = state.astype(complex, copy=True)
    for j, k in active:
        out[j], out[k] = gates[(j, k)] @ state[[j, k]]
    return out / np.linalg.norm(out)


def kraus(L, site, outcome, scheme):
    """Diagonal of the Kraus operator ``M_{site, outcome}`` (all are diagonal)."""
    e = scheme.error_rate if scheme.kind == "generalized" else 0.0
    on, off = (math.sqrt(1 - e / 2), math.sqrt(e / 2)) if outcome else (math.sqrt(e / 2), math.sqrt(1 - e / 2))
    diag = np.full(L, off)
    diag[site] = on
    return diag


def outcome_probabilities(state, site, scheme):
    """Born probabilities ``(P0, P1)`` for measuring the occupation of ``site``."""
    if scheme.kind == "noclick":
        raise ValueError("no-click measurements have no stochastic outcome")
    state = check_state(state)
    w = abs(state[site]) ** 2
    p1 = w if scheme.kind == "projective" else scheme.error_rate / 2 + (1 - scheme.error_rate) * w
    return 1.0 - p1, p1


def apply_measurement(state, site, outcome, scheme):
    """Post-measurement state ``M psi / |M psi|``.

    A projective detection returns the exact basis state on ``site``; the
    dropped global phase is unobservable and this keeps ``IPR = 1`` exact.
    """
    state = check_state(state)
    if scheme.code != GENERALIZED and outcome == 1:
        if state[site] == 0:
            raise ValueError("impossible outcome")
        out = np.zeros(state.shape[0], dtype=complex)
        out[site] = 1.0
        return out
    new = kraus(state.shape[0], site, outcome, scheme) * state
    norm = np.linalg.norm(new)
    if norm == 0.0:
        raise ValueError("impossible outcome")
    return new / norm


def measurement_layer(state, p, scheme, rng):
    """Measure each site independently with probability ``p``, in ascending order.

    Returns ``(state, outcomes)`` with ``outcomes`` a list of ``(site, outcome)``.
    Site selection uses geometric skips, which is the same Bernoulli scan.
    For ``noclick`` the no-detection operator is applied at every selected site.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    state = check_state(state).astype(complex, copy=True)
    L = state.shape[0]
    outcomes = []
    if p == 0.0:
        return state, outcomes
    logq = math.log1p(-p) if p < 1.0 else 0.0
    i = next_site(rng, -1, p, logq, L)
    while i < L:
        if scheme.kind == "noclick":
            state = state * kraus(L, i, 0, scheme)
            norm = np.linalg.norm(state)
            if norm == 0.0:
                raise ValueError("postselection impossible")
            state /= norm
            outcomes.append((i, 0))
        else:
            _, p1 = outcome_probabilities(state, i, scheme)
            outcome = int(rng.random() < p1)
            state = apply_measurement(state, i, outcome, scheme)
            outcomes.append((i, outcome))
        i = next_site(rng, i, p, logq, L)
    return state, outcomes


def evolve(state, t0, nsteps, schedule, p, scheme, gate=None, rng=None, backend=None):
    """Advance ``state`` in place through layers ``t0 + 1 .. t0 + nsteps``.

    Each layer is a unitary brick-wall layer (fresh Haar gates when ``gate``
    is None) followed by a measurement layer at rate ``p``.
    """
    kern = _backend.get(backend)
    if gate is not None:
        gate = np.ascontiguousarray(gate, dtype=complex)
    kern.quantum_steps(state, int(t0), int(nsteps), schedule.pbc, gate, scheme.code,
                       float(scheme.error_rate), float(p), rng)
    return state


def evolve_quantum_trajectory(spec, L, rng, backend=None):
    """Final amplitudes of one trajectory of a quantum protocol described by ``spec``."""
    schedule = CircuitSchedule(L, spec.boundary)
    gate = fixed_gate() if spec.dynamics == "quantum_fixed" else None
    psi = localized_state(L)
    return evolve(psi, 0, spec.total_time(L), schedule, spec.rate(L), spec.scheme, gate, rng, backend)


__all__ = [
    "MeasurementScheme", "CircuitSchedule", "sample_haar_unitary", "fixed_gate",
    "apply_unitary_layer", "outcome_probabilities", "apply_measurement",
    "measurement_layer", "evolve", "evolve_quantum_trajectory", "haar_from_normals",
    "localized_state", "kraus",
]
