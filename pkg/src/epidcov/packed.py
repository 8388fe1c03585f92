"""Two-bit genotype storage with a missingness mask.

Each SNP column is kept as three bit planes packed into 64-bit words:
``lo`` (genotype 1), ``hi`` (genotype 2) and ``miss``. Genotype 0 is
``~lo & ~hi & ~miss`` restricted to valid bit positions. A pairwise
complete 3x3 table is then nine popcounts of ANDed indicator words.
"""
from __future__ import annotations

import numpy as np


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean (n, L) array column-wise to uint64 words, shape (L, W)."""
    n, L = bits.shape
    packed = np.packbits(bits.T, axis=1, bitorder="little")
    nbytes = -(-n // 64) * 8
    out = np.zeros((L, nbytes), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view("<u8").astype(np.uint64)


class PackedGenotypes:
    """Read-only packed view of an (individuals x SNPs) genotype array."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values)
        self.n, self.L = values.shape
        self.lo = _pack(values == 1)
        self.hi = _pack(values == 2)
        self.miss = _pack(values < 0)
        valid = _pack(np.ones((self.n, 1), dtype=bool))[0]
        zero = valid & ~self.lo & ~self.hi & ~self.miss
        # (L, 3, W) indicator planes for genotypes 0, 1, 2
        self._ind = np.stack([zero, self.lo, self.hi], axis=1)

    def genotype(self, k: int) -> np.ndarray:
        """Unpack one SNP column back to int8 with -1 for missing."""
        def bits(plane):
            return np.unpackbits(plane.view(np.uint8), bitorder="little")[: self.n].astype(bool)

        out = bits(self.lo[k]).astype(np.int8) + 2 * bits(self.hi[k]).astype(np.int8)
        out[bits(self.miss[k])] = -1
        return out

    def pair_table(self, i: int, j: int) -> np.ndarray:
        """Pairwise-complete 3x3 count table of SNPs i (rows) and j (columns)."""
        both = self._ind[i][:, None, :] & self._ind[j][None, :, :]
        return np.bitwise_count(both).sum(axis=-1, dtype=np.int64)
