"""Power-law exponents from ensemble statistics.

IPR exponents are minus the log-log slope against ``L``; the variance
exponent is half its slope, since ``<Var> ~ L**(2 tau_Var)``.
"""
from dataclasses import dataclass, field
import math

import numpy as np


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_stderr: float
    points_used: tuple
    min_L: float


def fit_power_law(points, min_L=128, min_points=3, sigmas=None):
    """Least-squares fit of ``ln(value)`` against ``ln(L)`` for points with ``L >= min_L``.

    Parameters
    ----------
    points : iterable of (L, value)
    min_L : float
        Smallest abscissa kept in the fit.
    min_points : int
        Fewer qualifying points raise ValueError. Two-point fits have an
        undefined (NaN) slope error.
    sigmas : iterable of float, optional
        Standard errors of the values; if given the fit is weighted by
        ``(value / sigma)**2``, the variance of ``ln(value)`` to first order.
    """
    pts = [(float(x), float(y)) for x, y in points]
    keep = [i for i, (x, _) in enumerate(pts) if x >= min_L]
    if sigmas is not None:
        sigmas = [float(s) for s in sigmas]
        if len(sigmas) != len(pts):
            raise ValueError("sigmas and points differ in length")
        sig = np.array([sigmas[i] for i in keep])
    used = tuple(pts[i] for i in keep)
    if len(used) < max(min_points, 2):
        raise ValueError(f"need at least {max(min_points, 2)} points with L >= {min_L}, have {len(used)}")
    x = np.log([p[0] for p in used])
    y = np.array([p[1] for p in used])
    if np.any(~(y > 0)):
        raise ValueError("power-law fit needs positive values")
    y = np.log(y)
    w = np.ones_like(x) if sigmas is None else (np.exp(y) / sig) ** 2
    sw = w.sum()
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    sxx = np.dot(w, (x - xm) ** 2)
    slope = np.dot(w, (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    n = len(used)
    if n > 2:
        resid = y - (intercept + slope * x)
        stderr = math.sqrt(np.dot(w, resid ** 2) / (n - 2) / sxx)
    else:
        stderr = math.nan
    return ScalingFit(float(slope), float(intercept), stderr, used, min_L)


@dataclass(frozen=True)
class ExponentRow:
    q: float
    l_box: int
    tau_q: float
    tau_q_stderr: float
    tau_star_q: float
    tau_star_q_stderr: float
    D_q: float
    Delta_q: float
    D0: float
    tau_var: float
    tau_var_stderr: float


@dataclass
class ExponentTable:
    rows: list
    q0: float
    fits: dict = field(default_factory=dict, repr=False)

    def get(self, q, l_box=1):
        for row in self.rows:
            if math.isclose(row.q, q, rel_tol=1e-12, abs_tol=1e-15) and row.l_box == l_box:
                return row
        raise KeyError((q, l_box))


def _cells(rows):
    """Group stats rows by ``(q, l_box)`` into sorted lists."""
    groups = {}
    for r in rows:
        groups.setdefault((float(r["q"]), int(r["l_box"])), []).append(r)
    for g in groups.values():
        g.sort(key=lambda r: r["L"])
    return dict(sorted(groups.items()))


def exponent_table(rows, min_L=128, q0_for_D0=0.01, weighted=False, min_points=3):
    """Fit ``tau_q``, ``tau*_q``, ``D_q``, ``Delta_q``, ``D_0`` and ``tau_Var``.

    ``rows`` are mappings with keys ``L, q, l_box, mean_ipr, typical_ipr,
    mean_var`` (and the matching ``*_stderr`` keys when ``weighted``).
    ``D_0 = tau_q0 / (q0 - 1)`` uses ``q0_for_D0`` if it is on the grid,
    otherwise the smallest ``q`` present. ``D_q`` is NaN within 0.05 of
    ``q = 1``.
    """
    groups = _cells(rows)
    if not groups:
        raise ValueError("no statistics to fit")
    qs = sorted({q for q, _ in groups})
    q0 = min(qs, key=lambda q: abs(q - q0_for_D0))
    if not math.isclose(q0, q0_for_D0, rel_tol=1e-9):
        q0 = qs[0]

    def fit(cells, key):
        pts = [(c["L"], c[key]) for c in cells]
        sig = [c[key + "_stderr"] for c in cells] if weighted else None
        return fit_power_law(pts, min_L, min_points, sig)

    fits = {}
    tau = {}
    for (q, b), cells in groups.items():
        f_mean = fit(cells, "mean_ipr")
        f_typ = fit(cells, "typical_ipr")
        fits[(q, b)] = (f_mean, f_typ)
        tau[(q, b)] = (-f_mean.slope, f_mean.slope_stderr, -f_typ.slope, f_typ.slope_stderr)

    # variance does not depend on q or l_box; any one group carries it
    first = next(iter(groups.values()))
    f_var = fit(first, "mean_var")
    fits["var"] = f_var
    tau_var, tau_var_err = f_var.slope / 2.0, f_var.slope_stderr / 2.0

    out = []
    for (q, b) in groups:
        t, te, ts, tse = tau[(q, b)]
        D0 = tau[(q0, b)][0] / (q0 - 1.0) if (q0, b) in tau else math.nan
        Dq = t / (q - 1.0) if abs(q - 1.0) > 0.05 else math.nan
        out.append(ExponentRow(q, b, t, te, ts, tse, Dq, t - D0 * (q - 1.0), D0, tau_var, tau_var_err))
    return ExponentTable(out, q0, fits)
