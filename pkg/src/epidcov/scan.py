"""Two-stage epistasis scan over all SNP pairs.

Stage one tests independence of every pair separately in cases and in
controls (L(L-1) permutation tests). Stage two flags a pair as epistatic when
exactly one of its two tests rejects at the Bonferroni threshold
``alpha / (L(L-1))``.

Every (pair, group) test draws from its own generator seeded by
:func:`pair_seed`, and pairs are dealt to workers in fixed row-major chunks,
so the output does not depend on the number of workers.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMargin, EmptyMatrix
from .gwasio import GenotypeMatrix, check_same_snps
from .metric3 import Metric3, distance_table, named_metric
from .packed import PackedGenotypes
from .permtest import check_testable, default_B, make_rng, permutation_pvalue

log = logging.getLogger(__name__)

GROUPS = ("cases", "controls")
FLAGS = ("epistasis", "none", "untestable")
CHUNK_SIZE = 64
PAIRS_HEADER = ("snp_i", "snp_j", "stat_cases", "p_cases", "n_cases",
                "stat_controls", "p_controls", "n_controls", "flag")

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class ResolutionWarning(UserWarning):
    """The smallest attainable permutation p-value exceeds the threshold."""


@dataclass(frozen=True)
class ScanConfig:
    alpha: float = 0.05
    metric_x: Metric3 = named_metric("equilateral")
    metric_y: Metric3 | None = None  # defaults to metric_x
    B_override: int | None = None
    master_seed: int = 0
    min_complete: int = 30
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.B_override is not None and self.B_override < 1:
            raise ValueError("number of permutations must be positive")
        if self.min_complete < 1 or self.threads < 1:
            raise ValueError("min_complete and threads must be positive")
        if not 0 <= self.master_seed <= _M64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def metric_pair(self) -> tuple[Metric3, Metric3]:
        return self.metric_x, self.metric_y or self.metric_x


@dataclass(frozen=True)
class PairDecision:
    snp_i: str
    snp_j: str
    stat_cases: float
    stat_controls: float
    p_cases: float
    p_controls: float
    n_cases: int
    n_controls: int
    flag: str
    i: int = -1
    j: int = -1


@dataclass
class ScanResult:
    decisions: list[PairDecision]
    p_cases: np.ndarray  # (L, L), symmetric, NaN on diagonal / untestable
    p_controls: np.ndarray
    threshold: float


def adjusted_threshold(alpha: float, L: int) -> float:
    """Bonferroni threshold over all L(L-1) tests (both groups)."""
    if L < 2:
        raise ValueError("need at least two SNPs")
    return alpha / (L * (L - 1))


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def pair_seed(master_seed: int, i: int, j: int, group: str) -> int:
    """64-bit seed for one (pair, group) test, independent of scheduling."""
    g = GROUPS.index(group)
    h = _mix64((master_seed + _GOLDEN) & _M64)
    for word in (i, j, g):
        h = _mix64(((h ^ word) + _GOLDEN) & _M64)
    return h


def decide(p_cases: float, p_controls: float, threshold: float) -> str:
    if math.isnan(p_cases) or math.isnan(p_controls):
        return "untestable"
    return "epistasis" if (p_cases <= threshold) != (p_controls <= threshold) else "none"


# worker state, set once per process
_STATE: dict = {}


def _init_worker(packed, snp_ids, config, threshold):
    _STATE.update(packed=packed, snp_ids=snp_ids, config=config, threshold=threshold,
                  dists=tuple(distance_table(m) for m in config.metric_pair))


def _test_group(packed: PackedGenotypes, i, j, group, config, dists):
    table = packed.pair_table(i, j)
    n = int(table.sum())
    if n < config.min_complete:
        return math.nan, math.nan, n
    try:
        check_testable(table)
    except DegenerateMargin:
        return math.nan, math.nan, n
    B = config.B_override or default_B(n)
    rng = make_rng(pair_seed(config.master_seed, i, j, group))
    stat, p = permutation_pvalue(table, dists[0], dists[1], B, rng)
    return stat, p, n


def _run_chunk(pairs):
    packed_cases, packed_controls = _STATE["packed"]
    config, ids, dists = _STATE["config"], _STATE["snp_ids"], _STATE["dists"]
    out = []
    for i, j in pairs:
        sc, pc, nc = _test_group(packed_cases, i, j, "cases", config, dists)
        sk, pk, nk = _test_group(packed_controls, i, j, "controls", config, dists)
        out.append(PairDecision(ids[i], ids[j], sc, sk, pc, pk, nc, nk,
                                decide(pc, pk, _STATE["threshold"]), i, j))
    return out


def scan_pairs(cases: GenotypeMatrix, controls: GenotypeMatrix, config: ScanConfig) -> ScanResult:
    """Run the two-stage test on every unordered SNP pair."""
    check_same_snps(cases, controls)
    L = cases.n_snps
    if L < 2 or cases.n_individuals == 0 or controls.n_individuals == 0:
        raise EmptyMatrix("need at least two SNPs and individuals in both groups")
    threshold = adjusted_threshold(config.alpha, L)
    for label, n in (("cases", cases.n_individuals), ("controls", controls.n_individuals)):
        B = config.B_override or default_B(n)
        if 1 / (B + 1) > threshold:
            warnings.warn(
                f"{label}: smallest attainable p-value 1/{B + 1} = {1 / (B + 1):.3g} "
                f"exceeds the Bonferroni threshold {threshold:.3g}; no pair can be flagged",
                ResolutionWarning, stacklevel=2,
            )

    ii, jj = np.triu_indices(L, k=1)
    pairs = list(zip(ii.tolist(), jj.tolist()))
    chunks = [pairs[k:k + CHUNK_SIZE] for k in range(0, len(pairs), CHUNK_SIZE)]
    init_args = ((PackedGenotypes(cases.values), PackedGenotypes(controls.values)),
                 list(cases.snp_ids), config, threshold)
    log.info("scanning %d pairs in %d chunks on %d worker(s)", len(pairs), len(chunks),
             config.threads)
    if config.threads == 1:
        _init_worker(*init_args)
        try:
            results = [_run_chunk(c) for c in chunks]
        finally:
            _STATE.clear()
    else:
        with ProcessPoolExecutor(config.threads, initializer=_init_worker,
                                 initargs=init_args) as pool:
            results = list(pool.map(_run_chunk, chunks))
    decisions = [d for chunk in results for d in chunk]

    p_cases = np.full((L, L), np.nan)
    p_controls = np.full((L, L), np.nan)
    for d in decisions:
        p_cases[d.i, d.j] = p_cases[d.j, d.i] = d.p_cases
        p_controls[d.i, d.j] = p_controls[d.j, d.i] = d.p_controls
    return ScanResult(decisions, p_cases, p_controls, threshold)


def adjacency_matrix(decisions, L: int) -> np.ndarray:
    adj = np.zeros((L, L), dtype=np.int8)
    for d in decisions:
        if d.flag == "epistasis":
            adj[d.i, d.j] = adj[d.j, d.i] = 1
    return adj


def _fmt(x: float, spec: str) -> str:
    return "NA" if math.isnan(x) else format(x, spec)


def write_pairs_tsv(decisions, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(PAIRS_HEADER) + "\n")
        for d in decisions:
            fh.write("\t".join([
                d.snp_i, d.snp_j,
                _fmt(d.stat_cases, ".8g"), _fmt(d.p_cases, ".6g"), str(d.n_cases),
                _fmt(d.stat_controls, ".8g"), _fmt(d.p_controls, ".6g"), str(d.n_controls),
                d.flag,
            ]) + "\n")


def read_pairs_tsv(path) -> list[PairDecision]:
    """Parse a pairs.tsv; SNP indices follow order of first appearance."""
    def num(s):
        return math.nan if s == "NA" else float(s)

    index: dict[str, int] = {}
    out = []
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != PAIRS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for lineno, line in enumerate(fh, start=2):
            f = line.rstrip("\n").split("\t")
            if len(f) != len(PAIRS_HEADER) or f[8] not in FLAGS:
                raise ValueError(f"{path}: line {lineno}: malformed record")
            i = index.setdefault(f[0], len(index))
            j = index.setdefault(f[1], len(index))
            out.append(PairDecision(f[0], f[1], num(f[2]), num(f[5]), num(f[3]), num(f[6]),
                                    int(f[4]), int(f[7]), f[8], i, j))
    return out


def write_adjacency_tsv(adj: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        for row in adj:
            fh.write("\t".join(str(int(v)) for v in row) + "\n")
