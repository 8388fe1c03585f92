"""Command-line interface.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EpidcovError
from .experiments import (
    CALIBRATION_PROTOCOL,
    N_CASES,
    N_CONTROLS,
    POWER_PROTOCOL,
    calibrate,
    power_curve,
    simulate_dataset,
)
from .gwasio import (
    QcThresholds,
    check_same_snps,
    enrichment_test,
    load_genotypes,
    load_module_map,
    qc_filter,
    random_subset,
    require_nonempty,
    save_genotypes,
    write_enrichment,
    write_qc_report,
)
from .metric3 import embed_sqrt, parse_metric
from .models import parse_model
from .scan import (
    ScanConfig,
    adjacency_matrix,
    read_pairs_tsv,
    scan_pairs,
    write_adjacency_tsv,
    write_pairs_tsv,
)

log = logging.getLogger("epidcov")


class InputError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _unit_interval(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1): {v}")
    return v


def _unit_closed(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError(f"must be in [0, 1): {v}")
    return v


def _typed(parse):
    def convert(text):
        try:
            return parse(text)
        except (ValueError, EpidcovError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    convert.__name__ = parse.__name__
    return convert


def _grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _add_common(p, *, seed=True, threads=True, out=True, metric=True, perms=True):
    if metric:
        p.add_argument("--metric", type=_typed(parse_metric), default="equilateral",
                       help="equilateral|recessive|heterozygous|dominant|euclidean or "
                            "custom:D01,D02,D12 (default: equilateral)")
    if perms:
        p.add_argument("--perms", type=_positive_int, default=None, metavar="B",
                       help="permutations per test (default: 200 + floor(5000/n))")
    if seed:
        p.add_argument("--seed", type=_seed, default=0, metavar="S",
                       help="master random seed (default: 0)")
    if threads:
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                       metavar="T", help="worker processes (default: available CPUs)")
    if out:
        p.add_argument("--out", type=Path, default=Path("."), metavar="DIR",
                       help="output directory (default: current directory)")


def _add_groups(p, required=True):
    p.add_argument("--cases", type=Path, required=required, metavar="FILE",
                   help="case genotype TSV")
    p.add_argument("--controls", type=Path, required=required, metavar="FILE",
                   help="control genotype TSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epidcov",
        description="Distance-covariance epistasis scans for case/control SNP data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("qc", help="quality-control report for a case/control dataset")
    _add_groups(p)
    _add_common(p, seed=False, threads=False, metric=False, perms=False)

    p = sub.add_parser("scan", help="two-stage epistasis scan over all SNP pairs")
    _add_groups(p)
    p.add_argument("--alpha", type=_unit_interval, default=0.05,
                   help="family-wise error rate (default: 0.05)")
    p.add_argument("--subset", type=_positive_int, default=None, metavar="K",
                   help="scan a random subset of K SNPs (after QC)")
    p.add_argument("--min-complete", type=_positive_int, default=30, metavar="N",
                   help="minimum pairwise-complete observations per group (default: 30)")
    p.add_argument("--no-qc", action="store_true", help="skip quality control")
    p.add_argument("--no-plot", action="store_true", help="do not render adjacency.png")
    _add_common(p)

    p = sub.add_parser("simulate", help="write a synthetic dataset with one planted pair")
    p.add_argument("--model", type=_typed(parse_model), default="qexp:10",
                   help="case model of the planted pair (default: qexp:10)")
    p.add_argument("--control-model", type=_typed(parse_model), default="indep",
                   help="control model of the planted pair (default: indep)")
    p.add_argument("--snps", type=_positive_int, default=50, metavar="L",
                   help="number of SNPs, the first two form the planted pair (default: 50)")
    p.add_argument("--n-cases", type=_positive_int, default=N_CASES, metavar="N",
                   help=f"individuals per case sample (default: {N_CASES})")
    p.add_argument("--n-controls", type=_positive_int, default=N_CONTROLS, metavar="N",
                   help=f"individuals per control sample (default: {N_CONTROLS})")
    p.add_argument("--missing", type=_unit_closed, default=0.0,
                   help="probability that a genotype call is missing (default: 0)")
    _add_common(p, threads=False, metric=False, perms=False)

    p = sub.add_parser("calibrate", help="empirical level of the two-group decision")
    p.add_argument("--model", type=_typed(parse_model), action="append",
                   help="model for both groups, repeatable (default: indep)")
    p.add_argument("--replicates", type=_positive_int, default=1000, metavar="R",
                   help="Monte Carlo replicates per setting (default: 1000)")
    p.add_argument("--n-cases", type=_positive_int, default=N_CASES, metavar="N",
                   help=f"individuals per case sample (default: {N_CASES})")
    p.add_argument("--n-controls", type=_positive_int, default=N_CONTROLS, metavar="N",
                   help=f"individuals per control sample (default: {N_CONTROLS})")
    p.add_argument("--no-plot", action="store_true", help="do not render calibration.png")
    _add_common(p)

    p = sub.add_parser("power", help="empirical power against indep controls")
    p.add_argument("--model", choices=("qexp", "rexp", "qmult"), default="qexp",
                   help="alternative model for the cases (default: qexp)")
    p.add_argument("--grid", type=_grid, default=None,
                   help="comma-separated parameter values (default: 1,2,5,10 for "
                        "exponents, 1,0.5,0.2,0 for qmult)")
    p.add_argument("--alpha", type=_unit_interval, default=0.05,
                   help="two-group level, alpha/2 per group (default: 0.05)")
    p.add_argument("--replicates", type=_positive_int, default=1000, metavar="R",
                   help="Monte Carlo replicates per setting (default: 1000)")
    p.add_argument("--n-cases", type=_positive_int, default=N_CASES, metavar="N",
                   help=f"individuals per case sample (default: {N_CASES})")
    p.add_argument("--n-controls", type=_positive_int, default=N_CONTROLS, metavar="N",
                   help=f"individuals per control sample (default: {N_CONTROLS})")
    p.add_argument("--no-plot", action="store_true", help="do not render power.png")
    _add_common(p)

    p = sub.add_parser("enrich", help="co-expression module enrichment of flagged pairs")
    p.add_argument("--pairs", type=Path, required=True, metavar="FILE",
                   help="pairs.tsv written by 'scan'")
    p.add_argument("--modules", type=Path, required=True, metavar="FILE",
                   help="snp_id<TAB>module_id membership table")
    _add_common(p, seed=False, threads=False, metric=False, perms=False)

    p = sub.add_parser("embed", help="print the square-root embedding of a metric")
    _add_common(p, seed=False, threads=False, out=False, perms=False)
    return parser


def _load_pair(args):
    cases = load_genotypes(args.cases)
    controls = load_genotypes(args.controls)
    require_nonempty(cases, "case")
    require_nonempty(controls, "control")
    check_same_snps(cases, controls)
    return cases, controls


def cmd_qc(args):
    cases, controls = _load_pair(args)
    _, _, report = qc_filter(cases, controls, QcThresholds())
    path = args.out / "qc_report.tsv"
    write_qc_report(report, path)
    log.info("wrote %s (%d kept)", path, sum(r.status == "kept" for r in report))


def cmd_scan(args):
    cases, controls = _load_pair(args)
    if not args.no_qc:
        cases, controls, report = qc_filter(cases, controls, QcThresholds())
        write_qc_report(report, args.out / "qc_report.tsv")
    if args.subset is not None:
        cases, controls = random_subset(cases, controls, args.subset, args.seed)
    if cases.n_snps < 2:
        raise InputError(f"only {cases.n_snps} SNP(s) left to scan")
    config = ScanConfig(alpha=args.alpha, metric_x=args.metric, B_override=args.perms,
                        master_seed=args.seed, min_complete=args.min_complete,
                        threads=args.threads)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = scan_pairs(cases, controls, config)
    for w in caught:
        log.warning("%s", w.message)
    write_pairs_tsv(result.decisions, args.out / "pairs.tsv")
    adj = adjacency_matrix(result.decisions, cases.n_snps)
    write_adjacency_tsv(adj, args.out / "adjacency.tsv")
    if not args.no_plot:
        from .plotting import plot_adjacency
        plot_adjacency(adj, args.out / "adjacency.png")
    n_flag = sum(d.flag == "epistasis" for d in result.decisions)
    log.info("%d pairs tested, %d flagged (threshold %.3g)", len(result.decisions), n_flag,
             result.threshold)


def cmd_simulate(args):
    cases, controls = simulate_dataset(args.snps, args.model, args.control_model,
                                       args.n_cases, args.n_controls, args.seed,
                                       args.missing)
    save_genotypes(cases, args.out / "cases.tsv")
    save_genotypes(controls, args.out / "controls.tsv")
    log.info("wrote cases.tsv and controls.tsv; planted pair %s-%s (%s vs %s)",
             cases.snp_ids[0], cases.snp_ids[1], args.model, args.control_model)


def _write_rows(path, comments, header, rows):
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(format(r[h], "g") if isinstance(r[h], float) else str(r[h])
                               for h in header) + "\n")


def cmd_calibrate(args):
    models = args.model or [parse_model("indep")]
    rows = []
    for m in models:
        rows += calibrate(m, args.replicates, args.n_cases, args.n_controls, args.metric,
                          args.perms, args.seed, args.threads)
    comments = [CALIBRATION_PROTOCOL,
                f"n_cases={args.n_cases} n_controls={args.n_controls} seed={args.seed}"]
    _write_rows(args.out / "calibration.tsv", comments,
                ("model", "alpha", "alpha_hat", "replicates"), rows)
    if not args.no_plot:
        from .plotting import plot_calibration
        plot_calibration(rows, args.out / "calibration.png")


def cmd_power(args):
    grid = args.grid or ([1, 0.5, 0.2, 0] if args.model == "qmult" else [1, 2, 5, 10])
    rows = power_curve(args.model, grid, args.replicates, args.alpha, args.n_cases,
                       args.n_controls, args.metric, args.perms, args.seed, args.threads)
    comments = [POWER_PROTOCOL,
                f"n_cases={args.n_cases} n_controls={args.n_controls} seed={args.seed}"]
    _write_rows(args.out / "power.tsv", comments,
                ("model", "param", "alpha", "power", "replicates"), rows)
    if not args.no_plot:
        from .plotting import plot_power
        plot_power(rows, args.out / "power.png")


def cmd_enrich(args):
    decisions = read_pairs_tsv(args.pairs)
    modules = load_module_map(args.modules)
    result = enrichment_test(decisions, modules)
    write_enrichment(result, args.out / "enrichment.tsv")
    log.info("observed %.4g vs expected %.4g, p = %.3g", result.observed_prop,
             result.expected_prop, result.pvalue)


def cmd_embed(args):
    points = embed_sqrt(args.metric)
    sys.stdout.write("genotype\tx\ty\n")
    for g, (x, y) in enumerate(points):
        sys.stdout.write(f"{g}\t{x:.6f}\t{y:.6f}\n")


COMMANDS = {
    "qc": cmd_qc,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "power": cmd_power,
    "enrich": cmd_enrich,
    "embed": cmd_embed,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    np.seterr(all="ignore")
    try:
        if getattr(args, "out", None) is not None:
            args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args)
    except (EpidcovError, InputError, ValueError, OSError) as exc:
        print(f"epidcov {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover
        log.exception("internal error: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
