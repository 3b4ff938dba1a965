"""Command-line surface: fit, detect, eval, bench, simulate.

Exit codes: 0 = success (or no shift for detect), 2 = shift detected,
1 = any error. All output files are written atomically (temp file +
rename) and every command that touches randomness takes --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import detector as detector_mod
from .baselines import (
    SingleInstanceEstimator,
    VectorKind,
    VectorSample,
    detect_ks,
    detect_mmd,
    detect_single_instance,
    load_vectors,
)
from .detector import ModelFormatError, detect, fit, load_model, save_model
from .eval import (
    CoverageDetectorMethod,
    KsMethod,
    MmdMethod,
    SingleInstanceMethod,
    TrialPlan,
    UniformDist,
    gen_scores,
    gen_vectors,
    parse_score_dist,
    parse_vector_dist,
    run_trials,
)
from .scores import ConfidenceFunction, ScoreSample, load_scores

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_SHIFT = 2

BENCH_CSV_HEADER = "method,m,k,fit_seconds,detect_seconds"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; 2 is reserved for
    # shift verdicts here, so route usage failures through exit code 1.
    def error(self, message: str):
        raise _UsageError(message)


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _load_score_file(path: str, fmt: str, kappa: str, header: bool) -> ScoreSample:
    if fmt == "raw":
        return load_scores(path, "raw_scores", cf=ConfidenceFunction.from_name(kappa))
    if fmt == "softmax":
        return load_scores(
            path, "softmax_csv", cf=ConfidenceFunction.from_name(kappa), header=header
        )
    raise ValueError(f"format {fmt!r} does not yield scores")


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    if not 0.0 < args.delta < 1.0:
        raise ValueError(f"--delta must lie in (0, 1), got {args.delta}")
    sample = _load_score_file(args.scores, args.format, args.kappa, args.header)
    if len(sample) < 2:
        raise ValueError(f"m must be >= 2 to fit, got m={len(sample)}")
    model = fit(sample, delta=args.delta, c_target_count=args.coverages)
    save_model(model, args.out)
    print(f"fitted {model.c_target_count} coverage bounds on m={model.m} scores "
          f"(kappa={model.kappa_name}, delta={model.delta})")
    print(f"{'c_target':>10} {'b_star':>12} {'theta':>18}")
    for pair in model.pairs:
        print(f"{pair.c_target:>10.4f} {pair.b_star:>12.8f} {pair.theta:>18.10g}")
    print(f"model written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

def cmd_detect(args) -> int:
    if not 0.0 <= args.alpha < 1.0:
        raise ValueError(f"--alpha must lie in [0, 1), got {args.alpha}")
    model = load_model(args.model)
    if args.format == "raw":
        # Raw files hold already-computed kappa values; the flag asserts
        # they match the model's confidence function.
        window = load_scores(
            args.window, "raw_scores", cf=ConfidenceFunction(model.kappa_name)
        )
    else:
        window = load_scores(
            args.window,
            "softmax_csv",
            cf=ConfidenceFunction(model.kappa_name),
            header=args.header,
        )
    report = detect(model, window, args.alpha)
    print(f"window size k = {report.window_size}")
    print(f"V statistic   = {report.v_statistic:.8f}")
    print(f"p-value       = {report.p_value:.8g}")
    print(f"{'c_target':>10} {'b_star':>12} {'empirical':>12} {'violated':>9}")
    for check in report.per_coverage:
        flag = "yes" if check.violated else "no"
        print(f"{check.c_target:>10.4f} {check.b_star:>12.8f} "
              f"{check.empirical_coverage:>12.6f} {flag:>9}")
    verdict = "SHIFT DETECTED" if report.shift_detected else "no shift"
    print(f"verdict: {verdict} (alpha={args.alpha})")
    if args.report:
        payload = {
            "v_statistic": report.v_statistic,
            "p_value": report.p_value,
            "shift_detected": report.shift_detected,
            "alpha": args.alpha,
            "window_size": report.window_size,
            "per_coverage": [
                {
                    "c_target": c.c_target,
                    "b_star": c.b_star,
                    "empirical_coverage": c.empirical_coverage,
                    "violated": c.violated,
                }
                for c in report.per_coverage
            ],
        }
        write_atomic(args.report, json.dumps(payload, indent=2) + "\n")
    return EXIT_SHIFT if report.shift_detected else EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _load_score_pools(args):
    if args.format == "embedding":
        raise ValueError(f"method {args.method!r} requires score input "
                         "(--format raw or softmax with --kappa)")
    kappa = args.kappa
    if args.format == "softmax" and kappa == "raw":
        raise ValueError("softmax pools need --kappa sr or --kappa entropy")
    loader = lambda path: _load_score_file(path, args.format, kappa, args.header)
    return loader(args.train), loader(args.id), loader(args.shifted)


def _load_vector_pools(args):
    # Raw score files act as 1-D embedding vectors so the two-sample
    # baselines run directly on score-space pools.
    if args.format == "raw":
        def loader(path: str) -> VectorSample:
            sample = load_scores(path, "raw_scores")
            return VectorSample(sample.scores[:, None], kind=VectorKind.EMBEDDING)
    else:
        kind = VectorKind(args.format)
        loader = lambda path: load_vectors(path, kind, header=args.header)
    return loader(args.train), loader(args.id), loader(args.shifted)


def cmd_eval(args) -> int:
    if args.method == "ours":
        train, id_pool, shifted_pool = _load_score_pools(args)
        model = fit(train, delta=args.delta, c_target_count=args.coverages)
        method = CoverageDetectorMethod(model)
    elif args.method == "ks":
        train, id_pool, shifted_pool = _load_vector_pools(args)
        method = KsMethod(train, alpha=args.alpha)
    elif args.method == "mmd":
        train, id_pool, shifted_pool = _load_vector_pools(args)
        method = MmdMethod(train, alpha=args.alpha, n_permutations=args.permutations)
    else:
        train, id_pool, shifted_pool = _load_score_pools(args)
        estimator = (
            SingleInstanceEstimator.SR
            if args.method == "single-sr"
            else SingleInstanceEstimator.ENTROPY
        )
        method = SingleInstanceMethod(train, estimator, alpha=args.alpha)
    plan = TrialPlan(
        window_sizes=tuple(args.window_sizes),
        n_trials=args.trials,
        alpha=args.alpha,
        seed=args.seed,
    )
    outcome = run_trials(id_pool, shifted_pool, method, plan)
    write_atomic(args.out, outcome.to_csv())
    print(f"wrote {len(outcome.rows)} metric rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _median_of_timed(fn, warmup: int = 1, reps: int = 5) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _bench_method(method: str, m: int, k: int, seed: int) -> tuple[float, float]:
    ref_scores = gen_scores(UniformDist(), m, seed)
    window_scores = gen_scores(UniformDist(), k, seed + 1)
    if method == "ours":
        start = time.perf_counter()
        model = fit(ref_scores, delta=0.01, c_target_count=10)
        fit_seconds = time.perf_counter() - start
        window = ScoreSample(window_scores.scores, kappa_name=model.kappa_name)
        detect_seconds = _median_of_timed(lambda: detect(model, window, 0.05))
        return fit_seconds, detect_seconds
    if method in ("ks", "mmd"):
        ref = VectorSample(ref_scores.scores[:, None], kind=VectorKind.EMBEDDING)
        window = VectorSample(window_scores.scores[:, None], kind=VectorKind.EMBEDDING)
        if method == "ks":
            fn = lambda: detect_ks(ref, window, 0.05)
        else:
            fn = lambda: detect_mmd(ref, window, 0.05, n_permutations=100, seed=seed)
        return 0.0, _median_of_timed(fn)
    if method in ("single-sr", "single-ent"):
        estimator = (
            SingleInstanceEstimator.SR if method == "single-sr" else SingleInstanceEstimator.ENTROPY
        )
        fn = lambda: detect_single_instance(ref_scores, window_scores, 0.05, estimator)
        return 0.0, _median_of_timed(fn)
    raise ValueError(f"unknown bench method {method!r}")


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes]
    if sizes != sorted(sizes):
        raise ValueError(f"--sizes must be ascending, got {sizes}")
    methods = args.methods
    lines = [BENCH_CSV_HEADER]
    for method in methods:
        for m in sizes:
            fit_s, detect_s = _bench_method(method, m, args.window_size, args.seed)
            lines.append(f"{method},{m},{args.window_size},{fit_s:.9f},{detect_s:.9f}")
            print(lines[-1])
    write_atomic(args.out, "\n".join(lines) + "\n")
    print(f"bench results written to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.n < 1:
        raise ValueError(f"--n must be >= 1, got {args.n}")
    if args.dist.startswith(("dirichlet:", "gaussian:")):
        vdist = parse_vector_dist(args.dist)
        vectors = gen_vectors(vdist, args.n, args.seed)
        text = "\n".join(
            ",".join(repr(v) for v in row) for row in vectors.vectors.tolist()
        ) + "\n"
    else:
        dist = parse_score_dist(args.dist)
        sample = gen_scores(dist, args.n, args.seed)
        text = "\n".join(repr(v) for v in sample.scores.tolist()) + "\n"
    write_atomic(args.out, text)
    print(f"wrote {args.n} draws from {args.dist} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covshift", description="Coverage-bound distribution shift detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a coverage-bound detector model")
    p_fit.add_argument("--scores", required=True, help="detection-training score file")
    p_fit.add_argument("--format", choices=["raw", "softmax"], default="raw")
    p_fit.add_argument("--header", action="store_true", help="skip the first CSV line")
    p_fit.add_argument("--kappa", choices=["sr", "entropy"], default="entropy")
    p_fit.add_argument("--delta", type=float, default=detector_mod.DEFAULT_DELTA)
    p_fit.add_argument("--coverages", type=int, default=detector_mod.DEFAULT_C_TARGET_COUNT)
    p_fit.add_argument("--out", required=True, help="model output path")
    p_fit.set_defaults(func=cmd_fit)

    p_detect = sub.add_parser("detect", help="test a window against a fitted model")
    p_detect.add_argument("--model", required=True)
    p_detect.add_argument("--window", required=True)
    p_detect.add_argument("--format", choices=["raw", "softmax"], default="raw")
    p_detect.add_argument("--header", action="store_true")
    p_detect.add_argument("--alpha", type=float, default=0.05)
    p_detect.add_argument("--report", help="optional JSON report path")
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="run the trial harness on labeled pools")
    p_eval.add_argument(
        "--method", required=True, choices=["ours", "ks", "mmd", "single-sr", "single-ent"]
    )
    p_eval.add_argument("--train", required=True, help="detection-training / reference pool")
    p_eval.add_argument("--id", required=True, help="in-distribution window pool")
    p_eval.add_argument("--shifted", required=True, help="shifted window pool")
    p_eval.add_argument("--format", choices=["raw", "softmax", "embedding"], default="raw")
    p_eval.add_argument("--header", action="store_true")
    p_eval.add_argument("--kappa", choices=["sr", "entropy", "raw"], default="raw")
    p_eval.add_argument("--window-sizes", type=_int_list, default=[10, 20, 50, 100, 200, 500, 1000])
    p_eval.add_argument("--trials", type=int, default=15)
    p_eval.add_argument("--alpha", type=float, default=0.05)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--delta", type=float, default=detector_mod.DEFAULT_DELTA)
    p_eval.add_argument("--coverages", type=int, default=detector_mod.DEFAULT_C_TARGET_COUNT)
    p_eval.add_argument("--permutations", type=int, default=100)
    p_eval.add_argument("--out", required=True, help="metrics CSV path")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="wall-clock scaling benchmark")
    p_bench.add_argument("--sizes", type=_int_list, default=[10_000, 100_000, 1_000_000])
    p_bench.add_argument("--window-size", type=int, default=10)
    p_bench.add_argument(
        "--methods",
        type=lambda s: s.split(","),
        default=["ours", "ks"],
        help="comma-separated subset of ours,ks,mmd,single-sr,single-ent",
    )
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", required=True)
    p_bench.set_defaults(func=cmd_bench)

    p_sim = sub.add_parser("simulate", help="write a synthetic score or vector pool")
    p_sim.add_argument("--dist", required=True,
                       help="e.g. uniform | beta:5,1 | mixture:0.5*beta(5,1)+0.5*uniform "
                            "| dirichlet:1,1,1 | gaussian:0,1,5")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (ValueError, OSError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entry() -> None:
    raise SystemExit(main())
