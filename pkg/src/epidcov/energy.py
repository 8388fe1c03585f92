"""Distance covariance for pairs of ternary variables.

All quantities here are the *un-rooted* distance covariance, i.e. the
integral of the product of doubly-centred distances. Because genotypes only
take three values, a 3x3 table of counts (or probabilities) is a sufficient
statistic and the fast path is O(1) once the table is built.

Three routes compute the same number and are used to check one another:

* :func:`dcov_from_table` -- closed form on the 3x3 table (fast path)
* :func:`dcov_naive` -- O(n^2) double centring of the n x n distance matrices
* :func:`kernel_h_oracle` -- the degree-6 V-statistic, O(n^6), tiny n only
"""
from __future__ import annotations

import math

import numpy as np

from .errors import EmptyTable, InvalidJoint, SampleTooLarge
from .metric3 import Metric3, distance_table

JOINT_SUM_TOL = 1e-9
JOINT_NEG_TOL = 1e-12
DCOR_UNDEFINED_TOL = 1e-15
ORACLE_MAX_N = 10


def as_joint(joint) -> np.ndarray:
    """Validate a 3x3 probability table and return it as a float array."""
    p = np.asarray(joint, dtype=float)
    if p.shape != (3, 3):
        raise InvalidJoint(f"expected a 3x3 table, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or p.min() < -JOINT_NEG_TOL:
        raise InvalidJoint("joint has negative or non-finite entries")
    if abs(p.sum() - 1.0) > JOINT_SUM_TOL:
        raise InvalidJoint(f"joint sums to {p.sum()!r}, not 1")
    return p


def as_table(table) -> np.ndarray:
    """Validate a 3x3 table of nonnegative integer counts."""
    t = np.asarray(table)
    if t.shape != (3, 3):
        raise ValueError(f"expected a 3x3 table, got shape {t.shape}")
    if np.any(t < 0) or np.any(t != np.round(t)):
        raise ValueError("counts must be nonnegative integers")
    t = t.astype(np.int64)
    if t.sum() < 1:
        raise EmptyTable("contingency table is empty")
    return t


def count_table(x, y) -> np.ndarray:
    """3x3 count table of a paired sample of genotypes."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired sample vectors must be 1-d and of equal length")
    if x.size and (x.min() < 0 or x.max() > 2 or y.min() < 0 or y.max() > 2):
        raise ValueError("genotypes must be in {0, 1, 2}")
    return np.bincount(3 * x + y, minlength=9).reshape(3, 3)


def expand_table(table) -> tuple[np.ndarray, np.ndarray]:
    """Turn a count table back into a paired sample (row-major cell order)."""
    t = as_table(table).ravel()
    cells = np.repeat(np.arange(9), t)
    return cells // 3, cells % 3


def centred_distances(dist: np.ndarray, marginal: np.ndarray) -> np.ndarray:
    """Doubly-centred distance matrix d(x,x') - a(x) - a(x') + D.

    ``marginal`` may carry leading batch dimensions, shape (..., 3).
    """
    a = marginal @ dist
    big_d = np.sum(a * marginal, axis=-1)
    return dist - a[..., :, None] - a[..., None, :] + big_d[..., None, None]


def _dcov_prob(p: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    # sum_{x,x',y,y'} p[x,y] p[x',y'] cx[x,x'] cy[y,y']
    cx = centred_distances(dx, p.sum(axis=-1))
    cy = centred_distances(dy, p.sum(axis=-2))
    inner = p @ cy @ np.swapaxes(p, -1, -2)
    return np.sum(cx * inner, axis=(-2, -1))


def population_dcov(joint, mx: Metric3, my: Metric3) -> float:
    """Distance covariance of a distribution on {0,1,2}^2."""
    p = as_joint(joint)
    return float(_dcov_prob(p, distance_table(mx), distance_table(my)))


def dcov_from_table(table, mx: Metric3, my: Metric3) -> float:
    """Empirical distance covariance computed from a count table."""
    t = as_table(table)
    return float(_dcov_prob(t / t.sum(), distance_table(mx), distance_table(my)))


def dcov_from_tables(tables, mx: Metric3, my: Metric3) -> np.ndarray:
    """Vectorised :func:`dcov_from_table` over a stack of shape (k, 3, 3)."""
    t = np.asarray(tables, dtype=float)
    n = t.sum(axis=(-2, -1), keepdims=True)
    if np.any(n < 1):
        raise EmptyTable("contingency table is empty")
    return _dcov_prob(t / n, distance_table(mx), distance_table(my))


def dcov_naive(x, y, mx: Metric3, my: Metric3) -> float:
    """Double-centring estimator (1/n^2) sum_ij A_ij B_ij, O(n^2)."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("paired sample vectors must be non-empty and of equal length")
    a = distance_table(mx)[np.ix_(x, x)]
    b = distance_table(my)[np.ix_(y, y)]
    big_a = a - a.mean(axis=0, keepdims=True) - a.mean(axis=1, keepdims=True) + a.mean()
    big_b = b - b.mean(axis=0, keepdims=True) - b.mean(axis=1, keepdims=True) + b.mean()
    return float(np.mean(big_a * big_b))


def kernel_h_oracle(x, y, mx: Metric3, my: Metric3) -> float:
    """Degree-6 V-statistic, averaging the kernel

        h = {dX(x1,x2) + dX(x3,x4) - dX(x1,x3) - dX(x2,x4)}
          * {dY(y1,y2) + dY(y5,y6) - dY(y1,y5) - dY(y2,y6)}

    over all n^6 index tuples. Only meant as a reference for small n.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n = x.size
    if n > ORACLE_MAX_N:
        raise SampleTooLarge(f"n={n} exceeds {ORACLE_MAX_N} (cost is n^6)")
    if n == 0 or y.shape != x.shape:
        raise ValueError("paired sample vectors must be non-empty and of equal length")
    dx = distance_table(mx)[np.ix_(x, x)]
    dy = distance_table(my)[np.ix_(y, y)]
    # axes: i1 i2 i3 i4 i5 i6
    hx = (
        dx[:, :, None, None, None, None]
        + dx[None, None, :, :, None, None]
        - dx[:, None, :, None, None, None]
        - dx[None, :, None, :, None, None]
    )
    hy = (
        dy[:, :, None, None, None, None]
        + dy[None, None, None, None, :, :]
        - dy[:, None, None, None, :, None]
        - dy[None, :, None, None, None, :]
    )
    return float(np.sum(hx * hy) / n**6)


def dcor_from_table(table, mx: Metric3, my: Metric3) -> float | None:
    """Distance correlation, or ``None`` when a self-covariance vanishes."""
    t = as_table(table)
    vxy = dcov_from_table(t, mx, my)
    vxx = dcov_from_table(np.diag(t.sum(axis=1)), mx, mx)
    vyy = dcov_from_table(np.diag(t.sum(axis=0)), my, my)
    if vxx <= DCOR_UNDEFINED_TOL or vyy <= DCOR_UNDEFINED_TOL:
        return None
    return vxy / math.sqrt(vxx * vyy)
