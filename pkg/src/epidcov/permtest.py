"""Permutation test of independence for one pair of ternary variables.

Permuting one margin of a paired sample against the other only changes the
3x3 count table, and the induced table has a multivariate hypergeometric
law with both margins fixed. We therefore sample the tables directly
instead of shuffling index vectors, which makes each resample O(1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import as_table, centred_distances
from .errors import DegenerateMargin, MarginMismatch
from .metric3 import Metric3, distance_table

# relative slack when comparing permuted statistics to the observed one, so
# that tables with mathematically equal statistics count as ties
TIE_RTOL = 1e-9
TIE_ATOL = 1e-15


@dataclass(frozen=True)
class PermutationPlan:
    B: int
    seed: int

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    pvalue: float
    B: int
    n: int

    __test__ = False  # not a pytest class


def default_B(n: int) -> int:
    """Number of resamples as a function of sample size: 200 + floor(5000/n)."""
    if n < 1:
        raise ValueError("n must be positive")
    return 200 + 5000 // n


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_null_table(row_counts, col_counts, rng: np.random.Generator, size=None):
    """Draw the count table of a uniformly random pairing of two margins.

    Cells are filled row by row; within a row each cell is a hypergeometric
    draw conditional on the column totals still unassigned.

    Parameters
    ----------
    row_counts, col_counts : sequence of 3 ints with equal totals
    rng : numpy Generator
    size : int, optional
        Number of independent tables. ``None`` returns a single (3, 3) table,
        otherwise an array of shape (size, 3, 3).
    """
    rows = np.asarray(row_counts, dtype=np.int64)
    cols = np.asarray(col_counts, dtype=np.int64)
    if rows.shape != (3,) or cols.shape != (3,) or rows.min() < 0 or cols.min() < 0:
        raise ValueError("margins must be three nonnegative counts")
    if rows.sum() != cols.sum():
        raise MarginMismatch(f"row total {rows.sum()} != column total {cols.sum()}")
    k = 1 if size is None else int(size)
    out = np.empty((k, 3, 3), dtype=np.int64)
    rem = [np.full(k, c, dtype=np.int64) for c in cols]
    for i in range(2):
        r = np.full(k, rows[i], dtype=np.int64)
        c0 = rng.hypergeometric(rem[0], rem[1] + rem[2], r)
        c1 = rng.hypergeometric(rem[1], rem[2], r - c0)
        c2 = r - c0 - c1
        out[:, i, 0], out[:, i, 1], out[:, i, 2] = c0, c1, c2
        rem = [rem[0] - c0, rem[1] - c1, rem[2] - c2]
    out[:, 2, 0], out[:, 2, 1], out[:, 2, 2] = rem
    return out[0] if size is None else out


def _fixed_margin_form(rows: np.ndarray, cols: np.ndarray, dx, dy) -> np.ndarray:
    """9x9 matrix K with dcov(table) = vec(P)' K vec(P) for every table
    sharing these margins (the centred distances depend on margins only)."""
    n = rows.sum()
    cx = centred_distances(dx, rows / n)
    cy = centred_distances(dy, cols / n)
    return np.kron(cx, cy) / float(n * n)


def permutation_pvalue(table: np.ndarray, dx: np.ndarray, dy: np.ndarray,
                       B: int, rng: np.random.Generator) -> tuple[float, float]:
    """Observed statistic and add-one p-value; no validation (hot path)."""
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    form = _fixed_margin_form(rows, cols, dx, dy)
    v = table.reshape(9).astype(float)
    stat = float(v @ form @ v)
    null = sample_null_table(rows, cols, rng, size=B).reshape(B, 9).astype(float)
    null_stats = np.einsum("bi,bi->b", null @ form, null)
    cutoff = stat - TIE_RTOL * abs(stat) - TIE_ATOL
    exceed = int(np.count_nonzero(null_stats >= cutoff))
    return stat, (1 + exceed) / (B + 1)


def check_testable(table: np.ndarray) -> None:
    n = table.sum()
    if n < 2:
        raise DegenerateMargin(f"need at least 2 observations, got {n}")
    if table.sum(axis=1).max() == n or table.sum(axis=0).max() == n:
        raise DegenerateMargin("a margin is concentrated on a single genotype")


def perm_test(table, mx: Metric3, my: Metric3, plan: PermutationPlan) -> TestResult:
    """Permutation test of independence on a 3x3 count table.

    The p-value is (1 + #{b : T*_b >= T}) / (B + 1).
    """
    t = as_table(table)
    check_testable(t)
    stat, p = permutation_pvalue(
        t, distance_table(mx), distance_table(my), plan.B, make_rng(plan.seed)
    )
    return TestResult(statistic=stat, pvalue=p, B=plan.B, n=int(t.sum()))
