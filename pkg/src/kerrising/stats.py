"""Ensemble statistics of the homodyne records.

The quantities the two-cavity comparison is judged on, each a function of
time across an ensemble of M trajectories:

* mean difference squared: average of (<X_1>_c - <X_2>_c)^2, the square of
  a conditional average, not the average of a square;
* the normalized cross-correlation R between the two cavities' records;
* Pr(error): the fraction of trajectories whose two pseudo-spins
  (signs of the denoised quadrature means) violate the target relation.

By default all three use the denoised conditional means rather than the
raw currents (homodyne current minus its shot noise); the raw-current
variants stay available for sensitivity checks.  Classical records enter
through the matched convention x_i = sqrt(2) Re alpha_i.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .classical import ClassicalTrajectory
from .dynamics import TrajectoryRecord
from .errors import ShapeError
from .model import SpinConfig

CORR_CLIP_TOL = 1e-9


def thermal_occupation(temperature: float, omega: float) -> float:
    """Bose-Einstein occupation 1/(exp(omega/T) - 1) in hbar = k_B = 1 units."""
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0.0:
        return 0.0
    return 1.0 / math.expm1(omega / temperature)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Aligned records of M trajectories: quadrature means and currents."""

    times: np.ndarray
    x_means: np.ndarray        # (M, T, n_modes), denoised sqrt(2) Re <a>
    currents: np.ndarray       # (M, T, n_modes), raw records
    kind: str                  # "quantum" | "classical"

    def __post_init__(self):
        if self.x_means.shape != self.currents.shape:
            raise ShapeError("x_means and currents shapes differ")
        if self.x_means.shape[1] != self.times.shape[0]:
            raise ShapeError("time axis mismatch")

    @property
    def m_samples(self) -> int:
        return self.x_means.shape[0]

    @property
    def n_modes(self) -> int:
        return self.x_means.shape[2]

    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 + 1e-6 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not on the stored grid")
        return idx

    @classmethod
    def from_quantum(cls, records: list[TrajectoryRecord]) -> "TrajectoryEnsemble":
        times = records[0].times
        for r in records:
            if r.times.shape != times.shape or not np.allclose(r.times, times):
                raise ShapeError("trajectory time grids differ")
        return cls(
            times=times,
            x_means=np.stack([r.cond_means_x for r in records]),
            currents=np.stack([r.currents for r in records]),
            kind="quantum",
        )

    @classmethod
    def from_classical(cls, trajectories: list[ClassicalTrajectory]) -> "TrajectoryEnsemble":
        times = trajectories[0].times
        for r in trajectories:
            if r.times.shape != times.shape or not np.allclose(r.times, times):
                raise ShapeError("trajectory time grids differ")
        # matched quadrature convention: x = sqrt(2) Re alpha = j / sqrt(2)
        return cls(
            times=times,
            x_means=np.stack([math.sqrt(2.0) * r.alphas.real for r in trajectories]),
            currents=np.stack([r.currents for r in trajectories]),
            kind="classical",
        )


@dataclass(frozen=True)
class EnsembleStats:
    """Time-resolved ensemble observables with standard-error bands."""

    times: np.ndarray
    mean_diff_sq: np.ndarray
    mean_diff_sq_se: np.ndarray
    cross_corr: np.ndarray
    cross_corr_se: np.ndarray
    pr_error: np.ndarray
    pr_error_se: np.ndarray
    m_samples: int

    def __post_init__(self):
        if np.any(self.cross_corr < -1.0 - CORR_CLIP_TOL) or np.any(
            self.cross_corr > 1.0 + CORR_CLIP_TOL
        ):
            raise ValueError("cross correlation outside [-1, 1]")
        if np.any((self.pr_error < 0) | (self.pr_error > 1)):
            raise ValueError("error probability outside [0, 1]")


def _require_two_modes(ens: TrajectoryEnsemble):
    if ens.n_modes != 2:
        raise ShapeError(f"statistic defined for 2 modes, got {ens.n_modes}")


def mean_diff_squared(ens: TrajectoryEnsemble, t: float) -> tuple[float, float]:
    """Ensemble mean of (x_1 - x_2)^2 at time t, with its standard error."""
    _require_two_modes(ens)
    if ens.m_samples < 2:
        raise ValueError("need at least 2 trajectories")
    ti = ens.time_index(t)
    vals = (ens.x_means[:, ti, 0] - ens.x_means[:, ti, 1]) ** 2
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    va = np.mean(da**2)
    vb = np.mean(db**2)
    if va <= 0.0 or vb <= 0.0:
        return math.nan
    return float(np.mean(da * db) / math.sqrt(va * vb))


def _jackknife_corr_se(a: np.ndarray, b: np.ndarray) -> float:
    m = len(a)
    sa, sb = a.sum(), b.sum()
    saa, sbb, sab = (a * a).sum(), (b * b).sum(), (a * b).sum()
    mm = m - 1
    ra = np.empty(m)
    for i in range(m):
        ma = (sa - a[i]) / mm
        mb = (sb - b[i]) / mm
        va = (saa - a[i] * a[i]) / mm - ma * ma
        vb = (sbb - b[i] * b[i]) / mm - mb * mb
        if va <= 0 or vb <= 0:
            ra[i] = 0.0
            continue
        ra[i] = ((sab - a[i] * b[i]) / mm - ma * mb) / math.sqrt(va * vb)
    return float(math.sqrt((m - 1) / m * np.sum((ra - ra.mean()) ** 2)))


def cross_correlation(ens: TrajectoryEnsemble, t: float,
                      use_raw_currents: bool = False) -> tuple[float, float]:
    """Normalized cross-correlation of the two records across the ensemble.

    Defined as 0 (with a warning) when either channel has zero variance,
    e.g. the stalled zero-temperature classical ensemble.  The standard
    error is a leave-one-out jackknife estimate.
    """
    _require_two_modes(ens)
    if ens.m_samples < 2:
        raise ValueError("need at least 2 trajectories")
    ti = ens.time_index(t)
    src = ens.currents if use_raw_currents else ens.x_means
    a = src[:, ti, 0].astype(float)
    b = src[:, ti, 1].astype(float)
    r = _pearson(a, b)
    if math.isnan(r):
        warnings.warn(f"zero variance at t={t:g}; correlation defined as 0", stacklevel=2)
        return 0.0, 0.0
    if abs(r) > 1.0 + CORR_CLIP_TOL:
        warnings.warn(f"correlation {r} clipped to unit interval", stacklevel=2)
    r = min(1.0, max(-1.0, r))
    return r, _jackknife_corr_se(a, b)


def error_probability(ens: TrajectoryEnsemble, t: float,
                      target: SpinConfig) -> tuple[float, float]:
    """Fraction of trajectories whose sign pattern misses the target.

    The pseudo-spin of a cavity is the sign of its denoised quadrature
    mean; a trajectory succeeds when the pattern matches the target
    configuration or its global flip.  An exactly zero mean is an
    undecided spin and contributes error weight 1/2 (the symmetric initial
    state has no preferred sign).  The standard error is binomial.
    """
    _require_two_modes(ens)
    if len(target) != 2:
        raise ShapeError("target configuration must have 2 spins")
    ti = ens.time_index(t)
    x = ens.x_means[:, ti, :]
    signs = np.sign(x)
    tgt = target.as_array()
    undecided = np.any(signs == 0.0, axis=1)
    match = np.all(signs == tgt, axis=1) | np.all(signs == -tgt, axis=1)
    weights = np.where(undecided, 0.5, np.where(match, 0.0, 1.0))
    p = float(weights.mean())
    se = math.sqrt(max(p * (1.0 - p), 0.0) / ens.m_samples)
    return p, se


def ensemble_stats(ens: TrajectoryEnsemble, target: SpinConfig,
                   use_raw_currents: bool = False) -> EnsembleStats:
    """All three statistics on the full stored time grid."""
    n_t = ens.times.shape[0]
    mds = np.empty(n_t)
    mds_se = np.empty(n_t)
    cc = np.empty(n_t)
    cc_se = np.empty(n_t)
    pe = np.empty(n_t)
    pe_se = np.empty(n_t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, t in enumerate(ens.times):
            mds[k], mds_se[k] = mean_diff_squared(ens, t)
            cc[k], cc_se[k] = cross_correlation(ens, t, use_raw_currents)
            pe[k], pe_se[k] = error_probability(ens, t, target)
    return EnsembleStats(
        times=ens.times.copy(),
        mean_diff_sq=mds,
        mean_diff_sq_se=mds_se,
        cross_corr=cc,
        cross_corr_se=cc_se,
        pr_error=pe,
        pr_error_se=pe_se,
        m_samples=ens.m_samples,
    )
