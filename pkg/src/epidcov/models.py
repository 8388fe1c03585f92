"""Population models for a SNP pair and synthetic data drawn from them.

Both marginals are in Hardy-Weinberg equilibrium. With ``p, q`` the
probabilities of genotypes 0 and 1 for the first SNP and ``r, s`` the same
for the second, the four models are 3x3 joint tables whose margins are
exactly ``(p, q, 1-p-q)`` and ``(r, s, 1-r-s)``:

indep
    product of the margins
qexp:E
    cell (1,1) becomes ``q**E * s``; the difference is moved to cells (0,0),
    (0,1) and (1,0)
rexp:E
    cell (2,2) becomes ``(1-p-q)**E * (1-r-s)``; compensation in cells
    (1,1), (1,2) and (2,1)
qmult:G
    cell (1,1) becomes ``G * q * s``; compensation as for qexp

E = 1 and G = 1 give back the independence model.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MafOutOfRange, NegativeCell

MAF_LOW, MAF_HIGH = 0.05, 0.2
CELL_TOL = 1e-12
KINDS = ("indep", "qexp", "rexp", "qmult")


@dataclass(frozen=True)
class HweMarginal:
    maf: float
    p0: float
    p1: float
    p2: float

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.p0, self.p1, self.p2])


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("qexp", "rexp") and not self.param >= 1:
            raise ValueError(f"{self.kind} exponent must be >= 1, got {self.param}")
        if self.kind == "qmult" and not 0 <= self.param <= 1:
            raise ValueError(f"qmult factor must be in [0, 1], got {self.param}")

    def __str__(self):
        return self.kind if self.kind == "indep" else f"{self.kind}:{self.param:g}"


def parse_model(text: str) -> ModelSpec:
    """Parse ``indep``, ``qexp:E``, ``rexp:E`` or ``qmult:G``."""
    kind, _, value = text.partition(":")
    if kind == "indep":
        if value:
            raise ValueError("indep takes no parameter")
        return ModelSpec("indep")
    if not value:
        raise ValueError(f"model {kind!r} needs a parameter, e.g. {kind}:2")
    try:
        param = float(value)
    except ValueError:
        raise ValueError(f"bad model parameter in {text!r}") from None
    return ModelSpec(kind, param)


def hwe_marginal(maf: float) -> HweMarginal:
    if not 0 < maf <= 0.5:
        raise MafOutOfRange(f"minor allele frequency must be in (0, 0.5], got {maf}")
    return HweMarginal(maf, (1 - maf) ** 2, 2 * maf * (1 - maf), maf**2)


def sample_maf(rng: np.random.Generator) -> float:
    return float(rng.uniform(MAF_LOW, MAF_HIGH))


def build_joint(spec: ModelSpec, mi: HweMarginal, mj: HweMarginal) -> np.ndarray:
    """Joint genotype distribution of a SNP pair under ``spec``."""
    p, q = mi.p0, mi.p1
    r, s = mj.p0, mj.p1
    t, u = 1 - p - q, 1 - r - s
    joint = np.array(
        [
            [p * r, p * s, p * u],
            [q * r, q * s, q * u],
            [t * r, t * s, t * u],
        ]
    )
    if spec.kind == "qexp":
        shift = q * s - q**spec.param * s
        joint[0, 0] -= shift
        joint[0, 1] += shift
        joint[1, 0] += shift
        joint[1, 1] = q**spec.param * s
    elif spec.kind == "rexp":
        k = (t - t**spec.param) * u
        joint[1, 1] -= k
        joint[1, 2] += k
        joint[2, 1] += k
        joint[2, 2] = t**spec.param * u
    elif spec.kind == "qmult":
        shift = (1 - spec.param) * q * s
        joint[0, 0] -= shift
        joint[0, 1] += shift
        joint[1, 0] += shift
        joint[1, 1] = spec.param * q * s
    if joint.min() < -CELL_TOL:
        raise NegativeCell(
            f"{spec} with mafs ({mi.maf:g}, {mj.maf:g}) gives a negative cell "
            f"({joint.min():.3g})"
        )
    return np.clip(joint, 0.0, None)


def draw_sample(joint, n: int, rng: np.random.Generator):
    """Draw ``n`` genotype pairs from a 3x3 joint distribution.

    Inverse-CDF sampling over the nine cells in row-major order.

    Returns
    -------
    x, y : int8 arrays of length n
    table : (3, 3) int64 count table
    """
    if n < 1:
        raise ValueError("n must be positive")
    cdf = np.cumsum(np.asarray(joint, dtype=float).ravel())
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(n), side="right")
    np.minimum(cells, 8, out=cells)
    x = (cells // 3).astype(np.int8)
    y = (cells % 3).astype(np.int8)
    table = np.bincount(cells, minlength=9).reshape(3, 3)
    return x, y, table
