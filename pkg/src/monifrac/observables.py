"""IPR moments, position variance, box coarse-graining and ensemble statistics."""
from dataclasses import dataclass, field

import numpy as np


def ipr(dist, q):
    """Sum of ``p_i ** q`` with ``0 ** q = 0``; only ``q > 0`` is accepted.

    ``q = 1`` returns exactly 1, the total mass of a normalized distribution.
    """
    if q <= 0:
        raise ValueError(f"IPR needs q > 0, got {q}")
    dist = np.asarray(dist, dtype=float)
    if q == 1:
        return 1.0
    return float(np.sum(dist ** q))


def coarse_grain(dist, l_box):
    """Box masses ``mu_k = sum(p[k*l_box:(k+1)*l_box])``."""
    dist = np.asarray(dist, dtype=float)
    if l_box < 1 or dist.shape[0] % l_box:
        raise ValueError(f"box size {l_box} does not divide L = {dist.shape[0]}")
    return dist.reshape(-1, l_box).sum(axis=1)


def position_variance(dist):
    dist = np.asarray(dist, dtype=float)
    x = np.arange(1, dist.shape[0] + 1, dtype=float)
    mean = np.dot(x, dist)
    # shifted second moment keeps the cancellation benign
    return float(np.dot((x - mean) ** 2, dist))


def recenter(dist):
    """Cyclic shift putting the (first) maximum at array position ``L/2 - 1``.

    Position ``k`` of the result is the offset ``k - (L/2 - 1)`` from the
    localization centre, i.e. offsets run ``-L/2 + 1 .. L/2``.
    """
    dist = np.asarray(dist)
    L = dist.shape[0]
    return np.roll(dist, (L // 2 - 1) - int(np.argmax(dist)))


def recentered_offsets(L):
    return np.arange(-L // 2 + 1, L // 2 + 1)


def ipr_table(dist, q_grid, l_box_list):
    """IPR values, shape ``(len(q_grid), len(l_box_list))``."""
    q = np.asarray(q_grid, dtype=float)
    if np.any(q <= 0):
        raise ValueError("IPR needs q > 0")
    out = np.empty((q.size, len(l_box_list)))
    for b, l_box in enumerate(l_box_list):
        mu = coarse_grain(dist, l_box)
        mu = mu[mu > 0]
        out[:, b] = np.sum(mu[None, :] ** q[:, None], axis=1)
    out[q == 1, :] = 1.0
    return out


@dataclass
class EnsembleStats:
    """Running means and spreads of IPR, log-IPR and variance for one lattice size.

    Cells are indexed ``[q, l_box]``. Accumulation is Welford-style;
    :meth:`merge` combines two partial accumulators exactly as if their
    samples had been streamed into one.
    """

    q_grid: tuple
    l_box_list: tuple
    count: int = 0
    ipr_mean: np.ndarray = field(default=None, repr=False)
    ipr_m2: np.ndarray = field(default=None, repr=False)
    log_mean: np.ndarray = field(default=None, repr=False)
    log_m2: np.ndarray = field(default=None, repr=False)
    var_mean: float = 0.0
    var_m2: float = 0.0

    def __post_init__(self):
        self.q_grid = tuple(float(q) for q in self.q_grid)
        self.l_box_list = tuple(int(b) for b in self.l_box_list)
        shape = (len(self.q_grid), len(self.l_box_list))
        for name in ("ipr_mean", "ipr_m2", "log_mean", "log_m2"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(shape))

    def add(self, dist):
        values = ipr_table(dist, self.q_grid, self.l_box_list)
        self.add_values(values, np.log(values), position_variance(dist))
        return self

    def add_values(self, values, log_values, variance):
        self.count += 1
        n = self.count
        d = values - self.ipr_mean
        self.ipr_mean += d / n
        self.ipr_m2 += d * (values - self.ipr_mean)
        d = log_values - self.log_mean
        self.log_mean += d / n
        self.log_m2 += d * (log_values - self.log_mean)
        d = variance - self.var_mean
        self.var_mean += d / n
        self.var_m2 += d * (variance - self.var_mean)

    def merge(self, other):
        """Pooled statistics of ``self`` and ``other`` (Chan et al. update); returns a new object."""
        if (self.q_grid, self.l_box_list) != (other.q_grid, other.l_box_list):
            raise ValueError("cannot merge statistics over different grids")
        na, nb = self.count, other.count
        out = EnsembleStats(self.q_grid, self.l_box_list)
        if na == 0 or nb == 0:
            src = other if na == 0 else self
            out.count = src.count
            out.ipr_mean, out.ipr_m2 = src.ipr_mean.copy(), src.ipr_m2.copy()
            out.log_mean, out.log_m2 = src.log_mean.copy(), src.log_m2.copy()
            out.var_mean, out.var_m2 = src.var_mean, src.var_m2
            return out
        n = na + nb
        out.count = n
        for mean, m2 in (("ipr_mean", "ipr_m2"), ("log_mean", "log_m2"), ("var_mean", "var_m2")):
            ma, mb = getattr(self, mean), getattr(other, mean)
            d = mb - ma
            setattr(out, mean, ma + d * (nb / n))
            setattr(out, m2, getattr(self, m2) + getattr(other, m2) + d * d * (na * nb / n))
        return out

    def _stderr(self, m2):
        if self.count < 2:
            return np.full_like(np.asarray(m2, dtype=float), np.nan)
        return np.sqrt(np.asarray(m2) / (self.count - 1) / self.count)

    @property
    def mean_ipr(self):
        return self.ipr_mean

    @property
    def mean_ipr_stderr(self):
        return self._stderr(self.ipr_m2)

    @property
    def mean_log_ipr(self):
        return self.log_mean

    @property
    def typical_ipr(self):
        return np.exp(self.log_mean)

    @property
    def typical_ipr_stderr(self):
        # delta method on exp(<ln IPR>)
        return self.typical_ipr * self._stderr(self.log_m2)

    @property
    def mean_var(self):
        return self.var_mean

    @property
    def mean_var_stderr(self):
        return float(self._stderr(self.var_m2))

