"""FAST-MCD robust location/scatter and chi-square outlier flagging.

The minimum covariance determinant (MCD) estimate is the mean and
covariance of the ``h``-subset of observations whose covariance matrix has
the smallest determinant. :func:`mcd_fit` searches for it with random
elemental starts refined by concentration steps (C-steps); each C-step
recomputes mean/covariance on the current support and keeps the ``h``
observations closest in Mahalanobis distance, which can never increase the
determinant. :func:`mcd_exhaustive` enumerates every subset and serves as
the exact reference for small problems.

Conventions
-----------
* ``raw_det`` is the determinant of the *unscaled* maximum-likelihood
  covariance (divisor ``h``) of the support, i.e. the quantity minimised.
* ``raw_scatter`` is that covariance times the consistency factor
  ``median(d_i^2) / chi2_quantile(d, 0.5)``, where ``d_i`` are distances of
  all ``n`` points to the support estimate.
* Reweighting keeps points whose raw robust squared distance is at most
  ``chi2_quantile(d, 0.975)``; their mean and consistency-corrected
  covariance are the final ``location`` and ``scatter``.

References
----------
Rousseeuw, P.J. and Van Driessen, K. (1999). A fast algorithm for the
minimum covariance determinant estimator. Technometrics 41, 212-223.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

__all__ = [
    "McdFit",
    "McdError",
    "DegenerateDataError",
    "OutlierSummary",
    "default_support_size",
    "support_size_from_fraction",
    "chi2_quantile",
    "mcd_fit",
    "mcd_exhaustive",
    "flag_outliers",
    "format_percent",
    "REWEIGHT_P",
    "DEFAULT_CUTOFF_P",
]

REWEIGHT_P = 0.975
DEFAULT_CUTOFF_P = 0.975
N_BEST = 10
MAX_CSTEPS = 200
REL_TOL = 1e-12
EXHAUSTIVE_LIMIT = 100_000


class McdError(ValueError):
    """Invalid MCD configuration (support size, too few points, ...)."""


class DegenerateDataError(McdError):
    """The data has a singular ``h``-subset scatter that extension cannot fix."""


def chi2_quantile(d: int, p: float) -> float:
    """Quantile of the chi-square distribution with ``d`` degrees of freedom.

    For ``d == 2`` the closed form ``-2 ln(1 - p)`` is used; other ``d``
    defer to :func:`scipy.stats.chi2.ppf`.
    """
    if d < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {d}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if d == 2:
        return -2.0 * math.log1p(-p)
    return float(stats.chi2.ppf(p, d))


def default_support_size(n: int, d: int) -> int:
    return (n + d + 1) // 2


def support_size_from_fraction(n: int, d: int, fraction: Optional[float]) -> int:
    """Support size for a fraction of ``n``; ``None`` gives the default."""
    if fraction is None:
        return default_support_size(n, d)
    if not 0.0 < fraction <= 1.0:
        raise McdError(f"support fraction must lie in (0, 1], got {fraction}")
    h = int(math.ceil(fraction * n))
    return min(max(h, n // 2 + 1), n)


@dataclass(frozen=True, eq=False)
class McdFit:
    n: int
    d: int
    h: int
    raw_location: np.ndarray
    raw_scatter: np.ndarray
    raw_det: float
    support: tuple
    location: np.ndarray
    scatter: np.ndarray
    distances: np.ndarray
    outlier: np.ndarray
    cutoff: float
    consistency: float = 1.0
    reweighted: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("raw_location", "raw_scatter", "location", "scatter", "distances",
                     "outlier", "reweighted"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr)
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def n_outliers(self) -> int:
        return int(np.count_nonzero(self.outlier))

    def same_as(self, other: "McdFit") -> bool:
        """Exact (bitwise) equality of every field."""
        if (self.n, self.d, self.h, self.support, self.raw_det, self.cutoff, self.consistency) != (
            other.n, other.d, other.h, other.support, other.raw_det, other.cutoff, other.consistency
        ):
            return False
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("raw_location", "raw_scatter", "location", "scatter", "distances", "outlier")
        )


# --- numerical kernels -------------------------------------------------------

def _mean_cov(X: np.ndarray):
    loc = X.mean(axis=0)
    diff = X - loc
    return loc, diff.T @ diff / len(X)


def _support_det(X, support) -> float:
    """Determinant of the ML covariance of ``X[support]``; the MCD objective."""
    _, cov = _mean_cov(X[np.asarray(support)])
    return float(np.linalg.det(cov))


def _is_singular(cov: np.ndarray) -> bool:
    eig = np.linalg.eigvalsh(cov)
    return not eig[0] > 1e-12 * max(eig[-1], np.finfo(float).tiny)


def _sq_dist(X, loc, cov):
    diff = X - loc
    sol = np.linalg.solve(cov, diff.T)
    return np.einsum("ij,ji->i", diff, sol)


def _closest(d2, h):
    """Indices of the ``h`` smallest values; ties go to the lower index."""
    if h >= len(d2):
        return tuple(range(len(d2)))
    thr = np.partition(d2, h - 1)[h - 1]
    below = np.flatnonzero(d2 < thr)
    ties = np.flatnonzero(d2 == thr)[: h - len(below)]
    return tuple(np.sort(np.concatenate([below, ties])).tolist())


def _c_step(X, support, h):
    """One concentration step: the ``h`` points closest to the support fit."""
    loc, cov = _mean_cov(X[np.asarray(support)])
    if _is_singular(cov):
        return support
    return _closest(_sq_dist(X, loc, cov), h)


def _concentrate(X, support, h, max_steps, on_det=None):
    """Iterate C-steps from ``support``; returns ``(det, support, converged)``."""
    det = _support_det(X, support)
    if on_det is not None:
        on_det(det)
    for _ in range(max_steps):
        nxt = _c_step(X, support, h)
        if nxt == support:
            return det, support, True
        new_det = _support_det(X, nxt)
        if on_det is not None:
            on_det(new_det)
        done = abs(det - new_det) <= REL_TOL * abs(det)
        det, support = new_det, nxt
        if done or det <= 0.0:
            return det, support, True
    return det, support, False


def _elemental_start(X, h, rng):
    """Random (d+1)-subset, extended until its covariance is nonsingular."""
    n, d = X.shape
    subset = rng.choice(n, d + 1, replace=False)
    loc, cov = _mean_cov(X[subset])
    if _is_singular(cov):
        rest = np.setdiff1d(np.arange(n), subset)
        order = np.concatenate([subset, rng.permutation(rest)])
        for k in range(d + 2, n + 1):
            loc, cov = _mean_cov(X[order[:k]])
            if not _is_singular(cov):
                break
        else:
            raise DegenerateDataError("all observations lie in a lower-dimensional subspace")
    return _closest(_sq_dist(X, loc, cov), h)


# --- public API --------------------------------------------------------------

def _check(points, h):
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise McdError("points must be an (n, d) array")
    n, d = X.shape
    if not np.all(np.isfinite(X)):
        raise McdError("points must be finite")
    if n < d + 2:
        raise McdError(f"insufficient observations: need n >= d + 2 = {d + 2}, got {n}")
    if h is None:
        h = default_support_size(n, d)
    h = int(h)
    if not (2 * h > n and h <= n):
        raise McdError(f"support size must satisfy n/2 < h <= n, got h={h}, n={n}")
    if h <= d:
        raise McdError(f"support size h={h} must exceed the dimension d={d}")
    if np.all(X == X[0]):
        raise DegenerateDataError("all observations coincide")
    return X, n, d, h


def _finalize(X, support, h, cutoff_p) -> McdFit:
    n, d = X.shape
    raw_loc, raw_cov = _mean_cov(X[np.asarray(support)])
    raw_det = _support_det(X, support)
    if _is_singular(raw_cov):
        raise DegenerateDataError(
            f"{h} observations lie on a lower-dimensional subspace; MCD scatter is singular"
        )

    d2 = _sq_dist(X, raw_loc, raw_cov)
    consistency = float(np.median(d2)) / chi2_quantile(d, 0.5)
    raw_scatter = raw_cov * consistency
    d2 = d2 / consistency

    keep = d2 <= chi2_quantile(d, REWEIGHT_P)
    loc, cov = raw_loc, raw_scatter
    if np.count_nonzero(keep) > d:
        rw_loc, rw_cov = _mean_cov(X[keep])
        if not _is_singular(rw_cov):
            rd2 = _sq_dist(X, rw_loc, rw_cov)
            loc = rw_loc
            cov = rw_cov * (float(np.median(rd2)) / chi2_quantile(d, 0.5))

    dist = np.sqrt(np.maximum(_sq_dist(X, loc, cov), 0.0))
    cutoff = math.sqrt(chi2_quantile(d, cutoff_p))
    return McdFit(
        n=n, d=d, h=h,
        raw_location=raw_loc, raw_scatter=raw_scatter, raw_det=raw_det,
        support=tuple(support),
        location=loc, scatter=cov,
        distances=dist, outlier=dist > cutoff, cutoff=cutoff,
        consistency=consistency, reweighted=keep,
    )


def mcd_fit(
    points,
    h: Optional[int] = None,
    seed: int = 0,
    n_starts: int = 500,
    cutoff_p: float = DEFAULT_CUTOFF_P,
    trace: Optional[Callable[[int, float], None]] = None,
) -> McdFit:
    """FAST-MCD estimate of robust location and scatter.

    Parameters
    ----------
    points : array_like, shape (n, d)
    h : int, optional
        Support size, ``n/2 < h <= n``. Defaults to ``(n + d + 1) // 2``.
    seed : int
        Seed for the elemental-start generator; equal inputs and seed give
        bitwise-equal fits.
    n_starts : int
        Number of random elemental starts.
    cutoff_p : float
        Chi-square probability of the outlier cutoff on robust distances.
    trace : callable, optional
        Called as ``trace(chain, det)`` with the support determinant after
        every C-step; ``chain`` identifies the start the support came from.

    Returns
    -------
    McdFit

    Raises
    ------
    McdError
        For invalid ``h`` or fewer than ``d + 2`` observations.
    DegenerateDataError
        When the optimal support has a singular covariance.
    """
    X, n, d, h = _check(points, h)
    if n_starts < 1:
        raise McdError("n_starts must be >= 1")

    if h == n:
        return _finalize(X, tuple(range(n)), h, cutoff_p)

    rng = np.random.default_rng(seed)
    candidates = {}
    for chain in range(n_starts):
        support = _elemental_start(X, h, rng)
        on_det = (lambda v, c=chain: trace(c, v)) if trace is not None else None
        det, support, _ = _concentrate(X, support, h, max_steps=2, on_det=on_det)
        # identical supports from different starts collapse to the first chain
        candidates.setdefault(support, (det, chain))

    best = sorted(((det, s, c) for s, (det, c) in candidates.items()))[:N_BEST]
    results = []
    for det, support, chain in best:
        on_det = None
        if trace is not None:
            on_det = (lambda v, c=chain: trace(c, v))
        det, support, _ = _concentrate(X, support, h, MAX_CSTEPS, on_det=on_det)
        results.append((det, support))
    det, support = min(results)
    return _finalize(X, support, h, cutoff_p)


def mcd_exhaustive(points, h: Optional[int] = None, cutoff_p: float = DEFAULT_CUTOFF_P,
                   limit: int = EXHAUSTIVE_LIMIT) -> McdFit:
    """Exact MCD by enumerating all ``C(n, h)`` supports.

    Ties on the determinant go to the lexicographically smallest index set.
    Raises :class:`McdError` when ``C(n, h)`` exceeds ``limit``.
    """
    X, n, d, h = _check(points, h)
    total = math.comb(n, h)
    if total > limit:
        raise McdError(f"C({n}, {h}) = {total} supports exceeds the enumeration limit {limit}")

    combos = np.array(list(itertools.combinations(range(n), h)), dtype=np.intp)
    sub = X[combos]
    diff = sub - sub.mean(axis=1, keepdims=True)
    covs = np.einsum("kij,kil->kjl", diff, diff) / h
    dets = np.linalg.det(covs)
    # re-score near-ties with the scalar kernel so the choice is exact
    lo = dets.min()
    near = np.flatnonzero(dets <= lo + 1e-9 * max(abs(lo), 1e-300))
    scored = [(_support_det(X, combos[i]), tuple(combos[i].tolist())) for i in near]
    det, support = min(scored)
    return _finalize(X, support, h, cutoff_p)


@dataclass(frozen=True)
class OutlierSummary:
    flags: tuple
    counts: dict
    sizes: dict

    @property
    def total(self) -> int:
        return sum(self.flags)

    def percent(self, label) -> str:
        return format_percent(self.counts[label], self.sizes[label])


def flag_outliers(fit: McdFit, points, labels=None, cutoff_p: Optional[float] = None) -> OutlierSummary:
    """Flag points whose robust distance exceeds the chi-square cutoff.

    Counts and class sizes are aggregated per entry of ``labels`` (one label
    per point); without labels everything counts under ``"all"``.
    """
    X = np.asarray(points, dtype=np.float64)
    if len(X) != fit.n:
        raise ValueError(f"fit was computed on {fit.n} points, got {len(X)}")
    if cutoff_p is None:
        flags = fit.outlier
    else:
        flags = fit.distances > math.sqrt(chi2_quantile(fit.d, cutoff_p))
    flags = tuple(bool(f) for f in flags)
    if labels is None:
        labels = ["all"] * len(flags)
    if len(labels) != len(flags):
        raise ValueError("one label per point is required")
    counts, sizes = {}, {}
    for lab, flag in zip(labels, flags):
        sizes[lab] = sizes.get(lab, 0) + 1
        counts[lab] = counts.get(lab, 0) + int(flag)
    return OutlierSummary(flags, counts, sizes)


def format_percent(count: int, total: int) -> str:
    """``count / total`` as a percentage rounded half-up to one decimal, e.g. ``"5.8%"``."""
    if total <= 0:
        raise ValueError("total must be positive")
    if count < 0:
        raise ValueError("count must be non-negative")
    tenths = (2000 * count + total) // (2 * total)
    return f"{tenths // 10}.{tenths % 10}%"
