"""Pseudometrics on the genotype alphabet {0, 1, 2}.

A three-point space is fully described by its three pairwise distances.
Degenerate spaces (two genotypes at distance zero) are allowed since they
encode recessive/dominant/heterozygous allelic models.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FullyDegenerate, NegativeDistance, TriangleViolation

NAMED_METRICS = {
    "equilateral": (1.0, 1.0, 1.0),
    "recessive": (0.0, 1.0, 1.0),
    "heterozygous": (1.0, 0.0, 1.0),
    "dominant": (1.0, 1.0, 0.0),
    "euclidean": (1.0, 2.0, 1.0),
}


@dataclass(frozen=True)
class Metric3:
    """Distances between genotypes (0,1), (0,2) and (1,2).

    Use :func:`make_metric` to build a validated instance.
    """

    d01: float
    d02: float
    d12: float

    def __iter__(self):
        return iter((self.d01, self.d02, self.d12))

    def scaled(self, c: float) -> "Metric3":
        return make_metric(c * self.d01, c * self.d02, c * self.d12)


def make_metric(d01: float, d02: float, d12: float) -> Metric3:
    d01, d02, d12 = float(d01), float(d02), float(d12)
    for name, v in (("d01", d01), ("d02", d02), ("d12", d12)):
        if not v >= 0 or not math.isfinite(v):
            raise NegativeDistance(f"{name}={v} is not a finite nonnegative distance")
    if d01 == d02 == d12 == 0:
        raise FullyDegenerate("all three distances are zero")
    if d01 > d02 + d12 or d02 > d01 + d12 or d12 > d01 + d02:
        raise TriangleViolation(f"({d01}, {d02}, {d12}) violates the triangle inequality")
    return Metric3(d01, d02, d12)


def named_metric(kind: str) -> Metric3:
    try:
        return make_metric(*NAMED_METRICS[kind])
    except KeyError:
        raise ValueError(
            f"unknown metric {kind!r}; expected one of {sorted(NAMED_METRICS)}"
        ) from None


def parse_metric(text: str) -> Metric3:
    """Parse ``equilateral`` (or another name) or ``custom:D01,D02,D12``."""
    if text.startswith("custom:"):
        parts = text[len("custom:"):].split(",")
        if len(parts) != 3:
            raise ValueError(f"custom metric needs three distances, got {text!r}")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ValueError(f"bad number in metric {text!r}") from None
        return make_metric(*values)
    return named_metric(text)


def distance_table(m: Metric3) -> np.ndarray:
    """Symmetric 3x3 matrix of distances with zero diagonal."""
    return np.array(
        [
            [0.0, m.d01, m.d02],
            [m.d01, 0.0, m.d12],
            [m.d02, m.d12, 0.0],
        ]
    )


def embed_sqrt(m: Metric3) -> np.ndarray:
    """Place the three genotypes in the plane so that Euclidean distances
    equal the square roots of the metric distances.

    Genotype 0 sits at the origin, genotype 1 on the nonnegative x-axis and
    genotype 2 in the closed upper half-plane.

    Returns
    -------
    ndarray of shape (3, 2)
    """
    s01 = math.sqrt(m.d01)
    if s01 == 0.0:
        # genotypes 0 and 1 coincide
        return np.array([[0.0, 0.0], [0.0, 0.0], [math.sqrt(m.d02), 0.0]])
    x = (m.d02 - m.d12 + m.d01) / (2.0 * s01)
    y = math.sqrt(max(m.d02 - x * x, 0.0))
    return np.array([[0.0, 0.0], [s01, 0.0], [x, y]])
