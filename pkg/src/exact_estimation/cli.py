"""Command-line experiment runner.

    python -m exact_estimation run --model ar-bernoulli --estimator z --fn f1 \\
        --trunc geom:0.5 --steps 1e6
    python -m exact_estimation table 3
    python -m exact_estimation ecdf --model mm1 --samples 100000 --out cdf.csv
    python -m exact_estimation optimal-n --model ar-bernoulli --fn f1
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import contractive, ecdf, estimator, harris, models, truncation
from .exceptions import ExactEstimationError, ParseError

ESTIMATORS = ("z", "zstar", "harris-independent", "harris-improved")
CONTRACTIVE = {"z": contractive.ForwardCoupling, "zstar": contractive.BackwardCoupling}
REGENERATIVE = {"harris-independent": harris.IndependentCoupling, "harris-improved": harris.ImprovedCoupling}

TABLE_SEED = 0
TABLE_STEPS = 1e6
TABLE3_LADDER = (1e5, 2e5, 5e5, 1e6, 2e6, 5e6, 1e7, 2e7, 5e7, 1e8, 2e8, 5e8)


def parse_truncation(spec: str) -> truncation.TruncationLaw:
    """Parse ``geom:R``, ``invk``, ``poly:ALPHA:C``, ``inf`` or ``seq:v0,v1,...``."""
    head, _, rest = spec.strip().partition(":")
    try:
        if head == "geom":
            r = float(rest)
            if not 0.0 < r < 1.0:
                raise ParseError(f"geometric ratio must lie in (0, 1): {rest!r}", rest)
            return truncation.geometric(r)
        if head == "invk" and not rest:
            return truncation.inverse_k()
        if head == "inf" and not rest:
            return truncation.infinite()
        if head == "poly":
            alpha, _, c = rest.partition(":")
            return truncation.polynomial(float(alpha), float(c) if c else 1.0)
        if head == "seq":
            return truncation.explicit([float(v) for v in rest.split(",")])
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"bad truncation spec {spec!r}: {exc}", rest) from exc
    raise ParseError(f"unknown truncation spec {spec!r}", head)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    estimator: str
    fn: Optional[str] = None
    trunc: str = "geom:0.5"
    steps: Optional[float] = None
    samples: Optional[int] = None
    level: float = estimator.DEFAULT_LEVEL
    seed: int = 0
    workers: int = 1
    fmt: str = "csv"
    ecdf_out: Optional[str] = None


def _model(name: str):
    """``(kind, model, functionals, default functional)`` for a model name."""
    if name == "ar-bernoulli":
        return "contractive", models.ar_bernoulli(), models.AR_FUNCTIONALS, "f1"
    if name == "mm1":
        return "harris", models.mm1(), models.MM1_FUNCTIONALS, "above1"
    if name.startswith("finite:"):
        chain = models.load_matrix_csv(name.partition(":")[2])
        return "harris", chain.scheme(), models.finite_functionals(chain.size), "identity"
    raise ValueError(f"unknown model {name!r}")


def build_source(model: str, estimator_name: str, fn: Optional[str] = None):
    kind, obj, functionals, default = _model(model)
    fn = fn or default
    if fn not in functionals:
        raise ValueError(f"unknown functional {fn!r} for {model}; choose from {sorted(functionals)}")
    f = functionals[fn]
    if estimator_name in CONTRACTIVE:
        if kind != "contractive":
            raise ValueError(f"estimator {estimator_name} needs an iterated-function model")
        return CONTRACTIVE[estimator_name](obj, f)
    if estimator_name in REGENERATIVE:
        if kind != "harris":
            raise ValueError(f"estimator {estimator_name} needs a minorization scheme")
        return REGENERATIVE[estimator_name](obj, f)
    raise ValueError(f"unknown estimator {estimator_name!r}")


def run(config: ExperimentConfig):
    """Execute one configured experiment; returns ``(report, ecdf or None)``."""
    if (config.steps is None) == (config.samples is None):
        raise ValueError("give exactly one of --steps or --samples")
    source = build_source(config.model, config.estimator, config.fn)
    law = parse_truncation(config.trunc)
    common = dict(seed=config.seed, level=config.level, workers=config.workers)
    if config.steps is not None:
        report = estimator.run_budgeted(source, config.steps, law, **common)
    else:
        report = estimator.run_fixed_replicates(source, config.samples, law, **common)
    cdf = None
    if config.ecdf_out:
        if config.estimator not in REGENERATIVE:
            raise ValueError("the signed empirical CDF needs a regenerative estimator")
        cdf = ecdf.build_ecdf(source, report.replicate_count, law, seed=config.seed)
        write_step_table(cdf, config.ecdf_out)
    return report, cdf


def format_report(report: estimator.EstimateReport, fmt: str) -> str:
    if fmt == "json":
        return report.to_json() + "\n"
    return ",".join(estimator.CSV_COLUMNS) + "\n" + report.csv_row() + "\n"


def write_step_table(cdf: ecdf.SignedEcdf, path: str):
    rows = cdf.step_table()
    with open(path, "w") as fh:
        fh.write("x,F_left,F\n")
        for x, left, right in rows:
            fh.write(f"{x:.6g},{left:.6g},{right:.6g}\n")


def table(table_id: int, seed: int = TABLE_SEED, workers: int = 1, max_steps: Optional[float] = None) -> str:
    """CSV reproduction of one of the three experiment tables."""
    out = io.StringIO()
    if table_id in (1, 2):
        law = truncation.geometric(0.5 if table_id == 1 else 0.95)
        out.write("fn,estimator,mean,half_width_90,n_samples\n")
        for fn in ("f1", "f2", "f3"):
            for est in ("z", "zstar"):
                source = build_source("ar-bernoulli", est, fn)
                r = estimator.run_budgeted(source, TABLE_STEPS, law, seed=seed, workers=workers)
                out.write(f"{fn},{est},{r.mean:.6g},{r.half_width:.6g},{r.replicate_count}\n")
    elif table_id == 3:
        ladder = [c for c in TABLE3_LADDER if max_steps is None or c <= max_steps]
        source = build_source("mm1", "harris-improved", "above1")
        reports = estimator.run_budget_ladder(source, ladder, truncation.inverse_k(), seed=seed, workers=workers)
        out.write("steps,estimator,mean,half_width_90,n_samples\n")
        for c, r in zip(ladder, reports):
            out.write(f"{c:.6g},harris-improved,{r.mean:.6g},{r.half_width:.6g},{r.replicate_count}\n")
    else:
        raise ValueError("table must be 1, 2 or 3")
    return out.getvalue()


def optimal_n(model: str, estimator_name: str, fn: Optional[str], pilot_n: int, horizon: int, seed: int = 0) -> str:
    """Pilot-estimate the tail covariances and print the square-root optimal law."""
    source = build_source(model, estimator_name, fn)
    v = estimator.estimate_tail_covariances(source, pilot_n, horizon, seed=seed)
    weights = None
    if estimator_name in REGENERATIVE:
        weights = harris.coupling_time_survival(source, pilot_n, horizon, seed=seed)
        keep = int(np.count_nonzero(weights > 0))
        v, weights = v[:keep], weights[:keep]
    law = truncation.optimal_truncation(v, weights)
    out = io.StringIO()
    out.write("k,v_k,survival\n")
    for k, vk in enumerate(v):
        out.write(f"{k},{vk:.6g},{law.survival(k):.6g}\n")
    return out.getvalue()


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parser():
    p = argparse.ArgumentParser(prog="exact_estimation", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", default="ar-bernoulli")
        sp.add_argument("--estimator", default="z", choices=ESTIMATORS)
        sp.add_argument("--fn", default=None)
        sp.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="run one estimator")
    common(r)
    r.add_argument("--trunc", default="geom:0.5")
    r.add_argument("--steps", type=float)
    r.add_argument("--samples", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--level", type=float, default=estimator.DEFAULT_LEVEL)
    r.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    r.add_argument("--out")
    r.add_argument("--ecdf", dest="ecdf_out", help="also write the signed CDF step table here")

    t = sub.add_parser("table", help="reproduce an experiment table")
    t.add_argument("table_id", type=int, choices=(1, 2, 3))
    t.add_argument("--seed", type=int, default=TABLE_SEED)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--max-steps", type=float)
    t.add_argument("--out")

    e = sub.add_parser("ecdf", help="signed empirical CDF of a regenerative run")
    e.add_argument("--model", default="mm1")
    e.add_argument("--estimator", default="harris-improved", choices=tuple(REGENERATIVE))
    e.add_argument("--fn", default="identity")
    e.add_argument("--trunc", default="invk")
    e.add_argument("--samples", type=int, default=100000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")

    o = sub.add_parser("optimal-n", help="pilot-estimate v_k and print the optimal law")
    common(o)
    o.add_argument("--samples", type=int, default=100000)
    o.add_argument("--horizon", type=int, default=20)
    o.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            config = ExperimentConfig(
                model=args.model, estimator=args.estimator, fn=args.fn, trunc=args.trunc,
                steps=args.steps, samples=args.samples, level=args.level, seed=args.seed,
                workers=args.workers, fmt=args.fmt, ecdf_out=args.ecdf_out,
            )
            report, _ = run(config)
            _emit(format_report(report, args.fmt), args.out)
        elif args.command == "table":
            _emit(table(args.table_id, args.seed, args.workers, args.max_steps), args.out)
        elif args.command == "ecdf":
            source = build_source(args.model, args.estimator, args.fn)
            law = parse_truncation(args.trunc)
            cdf = ecdf.build_ecdf(source, args.samples, law, seed=args.seed)
            if args.out:
                write_step_table(cdf, args.out)
            summary = {"n_samples": args.samples, "atoms": int(len(cdf.atoms[0])), "total_mass": cdf.total_mass}
            if args.model == "mm1" and args.fn == "identity":
                summary["sup_distance"] = cdf.sup_distance(models.mm1_reference_cdf)
            sys.stdout.write(json.dumps(summary) + "\n")
        elif args.command == "optimal-n":
            _emit(optimal_n(args.model, args.estimator, args.fn, args.samples, args.horizon, args.seed), args.out)
    except (ExactEstimationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2 if isinstance(exc, (ParseError,)) or not isinstance(exc, ExactEstimationError) else 1
    return 0


def main_exit():
    sys.exit(main())
