"""Monte Carlo drivers: synthetic datasets, size calibration and power.

A replicate simulates one SNP pair: both minor allele frequencies are drawn
uniformly on [0.05, 0.2], cases come from one model and controls from
another (same margins), each group is tested with :func:`perm_test` and the
pair is declared epistatic when exactly one group rejects at the Bonferroni
threshold for a single pair, ``alpha / 2``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMargin
from .gwasio import GenotypeMatrix
from .metric3 import Metric3, named_metric
from .models import ModelSpec, build_joint, draw_sample, hwe_marginal, sample_maf
from .permtest import PermutationPlan, default_B, perm_test
from .scan import adjusted_threshold

ALPHAS = (0.01, 0.02, 0.05, 0.10)
N_CASES, N_CONTROLS = 585, 573
INDEP = ModelSpec("indep")

CALIBRATION_PROTOCOL = (
    "protocol: per replicate draw mafs ~ U[0.05,0.2] for both SNPs; cases and controls "
    "from the same model; one permutation test per group; epistasis when exactly one "
    "group has p <= alpha/2 (Bonferroni over the 2 tests of a single pair)"
)
POWER_PROTOCOL = (
    "protocol: per replicate draw mafs ~ U[0.05,0.2] for both SNPs; cases from the "
    "alternative model, controls from indep; one permutation test per group; epistasis "
    "when exactly one group has p <= alpha/2"
)


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class ReplicateJob:
    case_model: ModelSpec
    control_model: ModelSpec
    n_cases: int
    n_controls: int
    metric: Metric3
    B: int | None
    seed: int
    key: int  # grid point index


def _group_pvalue(joint, n, metric, B, rng) -> float:
    _, _, table = draw_sample(joint, n, rng)
    plan = PermutationPlan(B or default_B(n), int(rng.integers(0, 2**64, dtype=np.uint64)))
    try:
        return perm_test(table, metric, metric, plan).pvalue
    except DegenerateMargin:
        return 1.0


def two_group_pvalues(job: ReplicateJob, rep: int) -> tuple[float, float]:
    """Case and control p-values of one simulated SNP pair."""
    rng = replicate_rng(job.seed, job.key, rep)
    mi, mj = hwe_marginal(sample_maf(rng)), hwe_marginal(sample_maf(rng))
    p_cases = _group_pvalue(build_joint(job.case_model, mi, mj), job.n_cases, job.metric,
                            job.B, rng)
    p_controls = _group_pvalue(build_joint(job.control_model, mi, mj), job.n_controls,
                               job.metric, job.B, rng)
    return p_cases, p_controls


def _run_reps(args):
    job, reps = args
    return [two_group_pvalues(job, r) for r in reps]


def run_replicates(job: ReplicateJob, R: int, threads: int = 1) -> np.ndarray:
    """(R, 2) array of case/control p-values, identical for any ``threads``."""
    reps = list(range(R))
    if threads == 1:
        return np.array(_run_reps((job, reps))).reshape(R, 2)
    size = max(1, -(-R // (4 * threads)))
    chunks = [(job, reps[k:k + size]) for k in range(0, R, size)]
    with ProcessPoolExecutor(threads) as pool:
        out = [pv for part in pool.map(_run_reps, chunks) for pv in part]
    return np.array(out).reshape(R, 2)


def epistasis_rate(pvalues: np.ndarray, alpha: float) -> float:
    thr = adjusted_threshold(alpha, 2)
    reject = pvalues <= thr
    return float(np.mean(reject[:, 0] != reject[:, 1]))


def calibrate(model: ModelSpec, R: int = 1000, n_cases: int = N_CASES,
              n_controls: int = N_CONTROLS, metric: Metric3 | None = None,
              B: int | None = None, seed: int = 0, threads: int = 1,
              alphas=ALPHAS) -> list[dict]:
    """Empirical rate of epistasis calls when both groups follow ``model``."""
    job = ReplicateJob(model, model, n_cases, n_controls,
                       metric or named_metric("equilateral"), B, seed, 0)
    pv = run_replicates(job, R, threads)
    return [{"model": str(model), "alpha": a, "alpha_hat": epistasis_rate(pv, a),
             "replicates": R} for a in alphas]


def power_curve(kind: str, grid, R: int = 1000, alpha: float = 0.05,
                n_cases: int = N_CASES, n_controls: int = N_CONTROLS,
                metric: Metric3 | None = None, B: int | None = None, seed: int = 0,
                threads: int = 1) -> list[dict]:
    """Empirical power with cases from ``kind:param`` and controls from indep."""
    rows = []
    for k, param in enumerate(grid):
        job = ReplicateJob(ModelSpec(kind, float(param)), INDEP, n_cases, n_controls,
                           metric or named_metric("equilateral"), B, seed, k)
        pv = run_replicates(job, R, threads)
        rows.append({"model": kind, "param": float(param), "alpha": alpha,
                     "power": epistasis_rate(pv, alpha), "replicates": R})
    return rows


def simulate_dataset(L: int, case_model: ModelSpec, control_model: ModelSpec = INDEP,
                     n_cases: int = N_CASES, n_controls: int = N_CONTROLS,
                     seed: int = 0, missing: float = 0.0):
    """Synthetic case/control genotype matrices with one planted SNP pair.

    SNPs 1 and 2 are drawn jointly from ``case_model`` in cases and from
    ``control_model`` in controls. All other SNPs are independent HWE draws.
    Each SNP gets its own maf ~ U[0.05, 0.2], shared by both groups.
    """
    if L < 2:
        raise ValueError("need at least two SNPs")
    if not 0 <= missing < 1:
        raise ValueError("missing rate must be in [0, 1)")
    rng = replicate_rng(seed)
    margins = [hwe_marginal(sample_maf(rng)) for _ in range(L)]
    width = len(str(L))
    snp_ids = [f"snp{k + 1:0{width}d}" for k in range(L)]

    def group(model, n, prefix):
        values = np.empty((n, L), dtype=np.int8)
        x, y, _ = draw_sample(build_joint(model, margins[0], margins[1]), n, rng)
        values[:, 0], values[:, 1] = x, y
        for k in range(2, L):
            values[:, k] = rng.choice(3, size=n, p=margins[k].probs)
        if missing > 0:
            values[rng.random((n, L)) < missing] = -1
        return GenotypeMatrix(snp_ids, [f"{prefix}{i + 1}" for i in range(n)], values)

    return group(case_model, n_cases, "case"), group(control_model, n_controls, "ctrl")
