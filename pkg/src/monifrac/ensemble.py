"""Protocol definitions and trajectory-ensemble execution.

Every trajectory gets its own generator derived from
``(master_seed, L, trajectory_index)``. Trajectories are processed in
fixed-size chunks whose partial statistics are merged in chunk order, so
results are bit-for-bit identical for any worker count.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import logging
import math
import os
import time

import numpy as np

from . import analytic, cdyn, qdyn
from .observables import EnsembleStats, recenter

log = logging.getLogger(__name__)

DYNAMICS = ("quantum_haar", "quantum_fixed", "classical_random", "classical_fixed",
            "reset_walk", "single_shot")
DEFAULT_Q_GRID = (0.01,) + tuple(round(0.1 * k, 10) for k in range(1, 41))
DEFAULT_L_BOXES = (1, 2, 4, 8, 16)
CHUNK = 64


class TrajectoryError(RuntimeError):
    def __init__(self, L, index, cause):
        super().__init__(f"trajectory {index} at L={L} failed: {cause}")
        self.L = L
        self.index = index


def default_T(dynamics, p, L, scheme=None):
    """Steady-state evaluation time.

    ``L**2`` for free diffusive runs and for generalized/no-click schemes,
    ``64 L`` for free fixed-gate runs, ``8 L`` otherwise. The resetting walk
    runs for ``32 / lambda`` steps (``p`` is read as the rate ``lambda``);
    the single-shot model has no time evolution.
    """
    if dynamics == "single_shot":
        return 0
    if dynamics == "reset_walk":
        return int(math.ceil(32.0 / p))
    if dynamics.startswith("quantum") and scheme is not None and scheme.kind != "projective":
        return L * L
    if p == 0:
        return 64 * L if dynamics == "quantum_fixed" else L * L
    return 8 * L


@dataclass(frozen=True)
class ExperimentSpec:
    """Full description of an ensemble run.

    The measurement (or resetting) rate is ``c / L`` unless an absolute
    ``p`` is given. ``T=None`` selects :func:`default_T` per size. ``r`` is
    the number of measured sites in the single-shot model.
    """

    dynamics: str
    L_list: tuple
    n_traj: int
    master_seed: int = 0
    scheme: qdyn.MeasurementScheme = field(default_factory=qdyn.MeasurementScheme)
    c: float = 1.0
    p: float = None
    q_grid: tuple = DEFAULT_Q_GRID
    l_box_list: tuple = None
    T: int = None
    boundary: str = "OBC"
    r: int = 1

    def __post_init__(self):
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"unknown dynamics {self.dynamics!r}; choose from {DYNAMICS}")
        if isinstance(self.scheme, dict):
            object.__setattr__(self, "scheme", qdyn.MeasurementScheme(**self.scheme))
        object.__setattr__(self, "L_list", tuple(int(L) for L in self.L_list))
        object.__setattr__(self, "q_grid", tuple(float(q) for q in self.q_grid))
        if not self.L_list or any(L < 2 or L % 2 for L in self.L_list):
            raise ValueError("L_list must hold positive even integers")
        if len(set(self.L_list)) != len(self.L_list):
            raise ValueError("L_list has duplicates")
        if not self.q_grid or any(q <= 0 for q in self.q_grid):
            raise ValueError("q_grid must hold positive values")
        if self.l_box_list is None:
            boxes = tuple(b for b in DEFAULT_L_BOXES if all(L % b == 0 for L in self.L_list))
        else:
            boxes = tuple(int(b) for b in self.l_box_list)
            bad = [(b, L) for b in boxes for L in self.L_list if b < 1 or L % b]
            if bad:
                raise ValueError(f"box sizes must divide every L; offending (l_box, L): {bad}")
        object.__setattr__(self, "l_box_list", boxes)
        if self.n_traj < 1:
            raise ValueError("n_traj must be at least 1")
        if self.boundary not in ("OBC", "PBC"):
            raise ValueError("boundary must be 'OBC' or 'PBC'")
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.p is None and self.c < 0:
            raise ValueError("c must be non-negative")
        if self.T is not None and self.T < 0:
            raise ValueError("T must be non-negative")
        if self.dynamics == "reset_walk" and self.boundary != "OBC":
            raise ValueError("the resetting walk is defined with open boundaries")
        if self.dynamics == "reset_walk" and not all(0 < self.rate(L) <= 1 for L in self.L_list):
            raise ValueError("resetting rate must lie in (0, 1]")
        if self.dynamics == "single_shot" and not all(1 <= self.r < L for L in self.L_list):
            raise ValueError("single-shot model needs 1 <= r < L")

    def rate(self, L):
        return float(self.p) if self.p is not None else min(1.0, self.c / L)

    def total_time(self, L):
        if self.T is not None:
            return int(self.T)
        return default_T(self.dynamics, self.rate(L), L, self.scheme)

    def to_dict(self):
        d = asdict(self)
        d["L_list"] = list(self.L_list)
        d["q_grid"] = list(self.q_grid)
        d["l_box_list"] = list(self.l_box_list)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def derive_stream(master_seed, L, trajectory_index):
    """Independent PCG64 generator keyed by ``(master_seed, L, trajectory_index)``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(L), int(trajectory_index)))
    return np.random.Generator(np.random.PCG64(seq))


def single_shot_sample(L, r, rng):
    """Distribution after projective checks of ``r`` random distinct sites of the uniform state."""
    psi = np.full(L, 1.0 / math.sqrt(L), dtype=complex)
    scheme = qdyn.MeasurementScheme.projective()
    for site in np.sort(rng.choice(L, size=r, replace=False)):
        _, p1 = qdyn.outcome_probabilities(psi, site, scheme)
        psi = qdyn.apply_measurement(psi, site, int(rng.random() < p1), scheme)
    return np.abs(psi) ** 2


class _Trajectory:
    """Stepper yielding the distribution at each requested time."""

    def __init__(self, spec, L, rng, backend):
        self.spec, self.L, self.rng, self.backend = spec, L, rng, backend
        self.t = 0
        d = spec.dynamics
        if d.startswith("quantum"):
            self.schedule = qdyn.CircuitSchedule(L, spec.boundary)
            self.state = qdyn.localized_state(L)
            self.gate = qdyn.fixed_gate() if d == "quantum_fixed" else None
        elif d.startswith("classical"):
            self.schedule = qdyn.CircuitSchedule(L, spec.boundary)
            self.state = np.zeros(L)
            self.m = L // 2 - 1
            self.state[self.m] = 1.0

    def advance(self, t):
        spec, L = self.spec, self.L
        d = spec.dynamics
        if d.startswith("quantum"):
            qdyn.evolve(self.state, self.t, t - self.t, self.schedule, spec.rate(L), spec.scheme,
                        self.gate, self.rng, self.backend)
            self.t = t
            return self.state.real ** 2 + self.state.imag ** 2
        if d.startswith("classical"):
            s = None if d == "classical_random" else 0.5
            self.m = cdyn.evolve(self.state, self.m, self.t, t - self.t, self.schedule,
                                 spec.rate(L), s, self.rng, self.backend)
            self.t = t
            return self.state.copy()
        if d == "reset_walk":
            params = analytic.ResetParams(L, spec.rate(L), t)
            return analytic.simulate_reset_walk(params, self.rng, self.backend)
        return single_shot_sample(L, spec.r, self.rng)


def _run_chunk(spec, L, start, stop, record_times, want_recentered, backend):
    T = spec.total_time(L)
    stats = EnsembleStats(spec.q_grid, spec.l_box_list)
    rec = np.zeros(L) if want_recentered else None
    series = [EnsembleStats(spec.q_grid, (1,)) for _ in record_times]
    timed = spec.dynamics.startswith(("quantum", "classical"))
    for idx in range(start, stop):
        rng = derive_stream(spec.master_seed, L, idx)
        traj = _Trajectory(spec, L, rng, backend)
        try:
            if timed:
                for k, t in enumerate(record_times):
                    series[k].add(traj.advance(t))
            dist = traj.advance(T)
        except ValueError as exc:
            raise TrajectoryError(L, idx, exc) from exc
        stats.add(dist)
        if rec is not None:
            rec += recenter(dist)
    return stats, rec, series


@dataclass
class RunResult:
    spec: ExperimentSpec
    stats: dict
    recentered: dict = None
    time_series: dict = None
    metadata: dict = field(default_factory=dict)

    def cells(self):
        """One record per ``(L, q, l_box)``, as consumed by :func:`scaling.exponent_table`."""
        out = []
        for L, st in self.stats.items():
            for i, q in enumerate(st.q_grid):
                for j, b in enumerate(st.l_box_list):
                    out.append({
                        "dynamics": self.spec.dynamics,
                        "scheme": self.spec.scheme.label(),
                        "L": L,
                        "p": self.spec.rate(L),
                        "q": q,
                        "l_box": b,
                        "mean_ipr": float(st.mean_ipr[i, j]),
                        "mean_ipr_stderr": float(st.mean_ipr_stderr[i, j]),
                        "typical_ipr": float(st.typical_ipr[i, j]),
                        "typical_ipr_stderr": float(st.typical_ipr_stderr[i, j]),
                        "mean_var": float(st.mean_var),
                        "mean_var_stderr": float(st.mean_var_stderr),
                        "n_traj": st.count,
                    })
        return out


def log_times(T, n=32):
    """About ``n`` distinct integer times, log-spaced in ``[1, T]``."""
    if T < 1:
        return ()
    return tuple(int(t) for t in np.unique(np.round(np.geomspace(1, T, n)).astype(int)))


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get("MONIFRAC_WORKERS", "1"))
    return max(1, int(workers))


def run(spec, workers=None, backend=None, recentered=False, time_series=False, n_times=32):
    """Run ``spec.n_traj`` trajectories per size and collect statistics.

    ``time_series=True`` also records ensemble statistics (``l_box = 1``)
    at log-spaced times up to the evaluation time.
    """
    t_start = time.time()
    workers = _workers(workers)
    stats, rec, series = {}, {}, {}
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for L in spec.L_list:
            times = log_times(spec.total_time(L), n_times) if time_series else ()
            if spec.dynamics in ("reset_walk", "single_shot"):
                times = ()
            chunks = [(s, min(s + CHUNK, spec.n_traj)) for s in range(0, spec.n_traj, CHUNK)]
            args = [(spec, L, a, b, times, recentered, backend) for a, b in chunks]
            if pool is None:
                parts = [_run_chunk(*a) for a in args]
            else:
                parts = list(pool.map(_run_chunk, *zip(*args)))
            acc = parts[0][0]
            racc = parts[0][1]
            sacc = parts[0][2]
            for st, r, ser in parts[1:]:
                acc = acc.merge(st)
                if racc is not None:
                    racc = racc + r
                sacc = [a.merge(b) for a, b in zip(sacc, ser)]
            stats[L] = acc
            if recentered:
                rec[L] = racc / spec.n_traj
            if times:
                series[L] = list(zip(times, sacc))
            log.info("L=%d done (%d trajectories)", L, spec.n_traj)
    finally:
        if pool is not None:
            pool.shutdown()
    from . import __version__
    meta = {"master_seed": spec.master_seed, "version": __version__,
            "wall_time_s": time.time() - t_start, "workers": workers}
    return RunResult(spec, stats, rec if recentered else None, series if time_series else None, meta)
