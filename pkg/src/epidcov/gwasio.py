"""Genotype tables on disk, quality control and module enrichment.

Genotype TSV layout::

    iid     rs1     rs2     ...
    ind1    0       2       ...
    ind2    NA      1       ...

Values are 0/1/2 copies of the minor allele, ``NA`` when missing. In memory
missing entries are stored as -1.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    DuplicateSnpId,
    EmptyMatrix,
    InconsistentRowLength,
    KTooLarge,
    NoFlaggedPairs,
    ParseError,
    SnpListMismatch,
)

log = logging.getLogger(__name__)

MISSING = -1
NA = "NA"
_TOKENS = {"0": 0, "1": 1, "2": 2, NA: MISSING}


@dataclass
class GenotypeMatrix:
    snp_ids: list[str]
    individual_ids: list[str]
    values: np.ndarray  # (n_individuals, n_snps) int8, -1 = missing

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int8)
        if self.values.shape != (len(self.individual_ids), len(self.snp_ids)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.individual_ids)} individuals x {len(self.snp_ids)} SNPs"
            )
        if len(set(self.snp_ids)) != len(self.snp_ids):
            raise DuplicateSnpId(f"duplicated SNP id: {_first_duplicate(self.snp_ids)}")

    @property
    def n_individuals(self) -> int:
        return len(self.individual_ids)

    @property
    def n_snps(self) -> int:
        return len(self.snp_ids)

    def select_snps(self, idx) -> "GenotypeMatrix":
        idx = list(idx)
        return GenotypeMatrix(
            [self.snp_ids[k] for k in idx], list(self.individual_ids), self.values[:, idx]
        )


def _first_duplicate(ids):
    seen = set()
    for s in ids:
        if s in seen:
            return s
        seen.add(s)
    return None


def load_genotypes(path) -> GenotypeMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if not header or header[0] != "iid":
            raise ParseError("header must start with 'iid'", line=1)
        snp_ids = header[1:]
        if len(set(snp_ids)) != len(snp_ids):
            raise DuplicateSnpId(f"duplicated SNP id: {_first_duplicate(snp_ids)}")
        iids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InconsistentRowLength(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            try:
                rows.append([_TOKENS[v] for v in row[1:]])
            except KeyError as exc:
                raise ParseError(f"invalid genotype {exc.args[0]!r}", line=lineno) from None
            iids.append(row[0])
    values = np.array(rows, dtype=np.int8).reshape(len(iids), len(snp_ids))
    log.info("loaded %s: %d individuals x %d SNPs", path, len(iids), len(snp_ids))
    return GenotypeMatrix(snp_ids, iids, values)


def save_genotypes(matrix: GenotypeMatrix, path) -> None:
    tokens = np.array(["0", "1", "2", NA])
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(["iid", *matrix.snp_ids]) + "\n")
        for iid, row in zip(matrix.individual_ids, matrix.values):
            fh.write("\t".join([iid, *tokens[row]]) + "\n")


def check_same_snps(cases: GenotypeMatrix, controls: GenotypeMatrix) -> None:
    if cases.snp_ids == controls.snp_ids:
        return
    for k, (a, b) in enumerate(zip(cases.snp_ids, controls.snp_ids)):
        if a != b:
            raise SnpListMismatch(f"SNP column {k + 1} differs: {a!r} (cases) vs {b!r} (controls)")
    raise SnpListMismatch(
        f"cases have {cases.n_snps} SNPs but controls have {controls.n_snps}"
    )


def genotype_counts(values: np.ndarray) -> np.ndarray:
    """Per-SNP counts of genotypes 0, 1, 2 (missing excluded), shape (L, 3)."""
    return np.stack([(values == g).sum(axis=0) for g in range(3)], axis=1)


# --- quality control --------------------------------------------------------

@dataclass(frozen=True)
class QcThresholds:
    min_maf: float = 0.01
    hwe_alpha: float = 0.05
    min_call_rate: float = 0.95
    diff_call_alpha: float = 0.05
    scan_min_maf: float = 0.10

    def __post_init__(self):
        for name, v in vars(self).items():
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0, 1), got {v}")


@dataclass(frozen=True)
class QcRecord:
    snp_id: str
    status: str  # kept | removed
    rule: str  # pass | maf | hwe | call_rate | diff_call | scan_maf
    maf: float
    hwe_p: float
    call_rate_cases: float
    call_rate_controls: float


QC_RULES = ("maf", "hwe", "call_rate", "diff_call", "scan_maf")
QC_HEADER = ("snp_id", "status", "rule", "maf", "hwe_p", "call_rate_cases", "call_rate_controls")


def hwe_exact_pvalue(counts) -> float:
    """Hardy-Weinberg goodness of fit p-value for genotype counts (n0, n1, n2).

    Pearson chi-square with one degree of freedom against the expected counts
    at the estimated allele frequency. Monomorphic or empty SNPs give 1.
    """
    obs = np.asarray(counts, dtype=float)
    n = obs.sum()
    if n <= 0:
        return 1.0
    p = (2 * obs[0] + obs[1]) / (2 * n)
    if p <= 0 or p >= 1:
        return 1.0
    expected = n * np.array([p * p, 2 * p * (1 - p), (1 - p) ** 2])
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    return float(stats.chi2.sf(chi2, df=1))


def _diff_call_pvalue(called_a, n_a, called_b, n_b) -> float:
    table = np.array([[called_a, n_a - called_a], [called_b, n_b - called_b]])
    if np.any(table.sum(axis=0) == 0) or np.any(table.sum(axis=1) == 0):
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def qc_filter(cases: GenotypeMatrix, controls: GenotypeMatrix,
              t: QcThresholds = QcThresholds()):
    """Drop SNPs failing the quality-control rules.

    Rules are checked in a fixed order and a SNP is reported under the first
    one it fails: pooled MAF below ``min_maf``; HWE p-value in controls below
    ``hwe_alpha``; call rate below ``min_call_rate`` in either group;
    call rates differing between groups at level ``diff_call_alpha``;
    pooled MAF not above ``scan_min_maf``.

    Returns
    -------
    cases, controls : filtered GenotypeMatrix objects
    report : list of QcRecord, one per input SNP
    """
    check_same_snps(cases, controls)
    counts_case = genotype_counts(cases.values)
    counts_ctrl = genotype_counts(controls.values)
    pooled = counts_case + counts_ctrl
    called = pooled.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = (pooled[:, 1] + 2 * pooled[:, 2]) / (2 * called)
    maf = np.where(called > 0, np.minimum(freq, 1 - freq), 0.0)
    cr_case = counts_case.sum(axis=1) / max(cases.n_individuals, 1)
    cr_ctrl = counts_ctrl.sum(axis=1) / max(controls.n_individuals, 1)

    report, keep = [], []
    for k, snp in enumerate(cases.snp_ids):
        hwe_p = hwe_exact_pvalue(counts_ctrl[k])
        if maf[k] < t.min_maf:
            rule = "maf"
        elif hwe_p < t.hwe_alpha:
            rule = "hwe"
        elif cr_case[k] < t.min_call_rate or cr_ctrl[k] < t.min_call_rate:
            rule = "call_rate"
        elif _diff_call_pvalue(counts_case[k].sum(), cases.n_individuals,
                               counts_ctrl[k].sum(), controls.n_individuals) < t.diff_call_alpha:
            rule = "diff_call"
        elif maf[k] <= t.scan_min_maf:
            rule = "scan_maf"
        else:
            rule = "pass"
            keep.append(k)
        report.append(QcRecord(snp, "kept" if rule == "pass" else "removed", rule,
                               float(maf[k]), hwe_p, float(cr_case[k]), float(cr_ctrl[k])))
    log.info("QC kept %d of %d SNPs", len(keep), cases.n_snps)
    return cases.select_snps(keep), controls.select_snps(keep), report


def write_qc_report(report, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(QC_HEADER) + "\n")
        for r in report:
            fh.write(f"{r.snp_id}\t{r.status}\t{r.rule}\t{r.maf:.6g}\t{r.hwe_p:.6g}\t"
                     f"{r.call_rate_cases:.6g}\t{r.call_rate_controls:.6g}\n")


def random_subset(cases: GenotypeMatrix, controls: GenotypeMatrix, k: int, seed: int):
    """Keep ``k`` SNPs chosen uniformly without replacement; order is preserved."""
    check_same_snps(cases, controls)
    L = cases.n_snps
    if not 1 <= k <= L:
        raise KTooLarge(f"subset size must be in [1, {L}], got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = np.sort(rng.choice(L, size=k, replace=False))
    return cases.select_snps(idx), controls.select_snps(idx)


# --- co-expression module enrichment ----------------------------------------

def load_module_map(path) -> dict[str, frozenset]:
    """Read ``snp_id<TAB>module_id`` rows; a leading header row is skipped."""
    members: dict[str, set] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), start=1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
            if lineno == 1 and row == ["snp_id", "module_id"]:
                continue
            members.setdefault(row[0], set()).add(row[1])
    return {k: frozenset(v) for k, v in members.items()}


@dataclass(frozen=True)
class EnrichmentResult:
    observed_prop: float
    expected_prop: float
    pvalue: float
    n_flagged: int
    n_flagged_shared: int = field(default=0)
    n_testable: int = field(default=0)


ENRICH_HEADER = ("observed_prop", "expected_prop", "pvalue", "n_flagged",
                 "n_flagged_shared", "n_testable")


def _share_module(modules, a, b) -> bool:
    return bool(modules.get(a, frozenset()) & modules.get(b, frozenset()))


def enrichment_test(decisions, modules) -> EnrichmentResult:
    """Are epistatic pairs more often within one co-expression module than
    testable pairs in general?

    One-sided binomial tail P(X >= observed) with X ~ Bin(n_flagged, expected).
    """
    testable = [d for d in decisions if d.flag != "untestable"]
    flagged = [d for d in testable if d.flag == "epistasis"]
    if not flagged:
        raise NoFlaggedPairs("no pair is flagged as epistatic")
    shared_all = sum(_share_module(modules, d.snp_i, d.snp_j) for d in testable)
    shared = sum(_share_module(modules, d.snp_i, d.snp_j) for d in flagged)
    expected = shared_all / len(testable)
    pvalue = float(stats.binom.sf(shared - 1, len(flagged), expected))
    return EnrichmentResult(shared / len(flagged), expected, pvalue,
                            len(flagged), shared, len(testable))


def write_enrichment(result: EnrichmentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(ENRICH_HEADER) + "\n")
        fh.write(f"{result.observed_prop:.6g}\t{result.expected_prop:.6g}\t"
                 f"{result.pvalue:.6g}\t{result.n_flagged}\t{result.n_flagged_shared}\t"
                 f"{result.n_testable}\n")


def require_nonempty(matrix: GenotypeMatrix, label: str) -> None:
    if matrix.n_individuals == 0 or matrix.n_snps == 0:
        raise EmptyMatrix(f"{label} genotype matrix is empty")
