"""Command-line interface.

Subcommands: simulate, run-ms, count-inversions, entropy-check, theory,
experiment.  Exit codes: 0 success, 1 usage error, 2 resource-cap refusal.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .counting import count_at_most_k_inversions, entropy_bounds
from .errors import ResourceCapError
from .estimators import CALIBRATED_THRESHOLD_SCALE, MsConfig, ms_sort
from .experiments import (
    ExperimentSpec,
    emit_regions,
    lambda_results_to_csv,
    rows_to_csv,
    run_experiment,
    run_lambda_accuracy,
    run_ms_pipeline,
    summarize,
    summary_to_csv,
)
from .model import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    read_dataset,
    sample_with_replacement,
    sample_without_replacement,
    star_matrix,
    write_dataset,
)
from .perms import Permutation
from .theory import (
    RATE_KINDS,
    bernoulli_kl,
    binomial_tail_bounds,
    kl_per_discordant_pair,
    model_kl,
    rate_curve,
)

_SAMPLING_TOKENS = {"with": WITH_REPLACEMENT, "without": WITHOUT_REPLACEMENT}


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):  # noqa: D102
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_pi_star(path: str | None, n: int) -> Permutation:
    if path is None:
        return Permutation.identity(n)
    pi = Permutation.from_line(Path(path).read_text().strip())
    if pi.n != n:
        raise ValueError(f"pi-star file has n={pi.n}, expected {n}")
    return pi


def _cmd_simulate(args) -> int:
    matrix = star_matrix(args.n, args.lam)
    pi_star = _load_pi_star(args.pi_star, args.n)
    kind = _SAMPLING_TOKENS[args.model]
    if kind == WITH_REPLACEMENT:
        dataset = sample_with_replacement(pi_star, matrix, int(args.budget), args.seed)
    else:
        dataset = sample_without_replacement(pi_star, matrix, float(args.budget), args.seed)
    write_dataset(dataset, args.out)
    print(f"wrote {dataset.total_comparisons()} comparisons over "
          f"{dataset.num_pairs} pairs to {args.out}")
    return 0


def _cmd_run_ms(args) -> int:
    config = MsConfig(
        stages=args.stages, c0=args.c0, c1=args.c1,
        threshold_scale=args.threshold_scale,
    )
    if args.infiles:
        samples = [read_dataset(f) for f in args.infiles]
        if len(samples) != args.stages:
            raise ValueError(f"{len(samples)} input files for {args.stages} stages")
        if args.lambda_hat is None:
            raise ValueError("--lambda-hat is required when stages come from files")
        pi_hat, states = ms_sort(samples, args.lambda_hat, config)
    else:
        if args.n is None or args.budget is None:
            raise ValueError("either --in files or --generate parameters are required")
        matrix = star_matrix(args.n, args.lam)
        pi_star = _load_pi_star(args.pi_star, args.n)
        kind = _SAMPLING_TOKENS[args.model]
        run = run_ms_pipeline(
            pi_star, matrix, kind,
            total=int(args.budget) if kind == WITH_REPLACEMENT
            else round(float(args.budget) * args.n * (args.n - 1) / 2),
            stages=args.stages, config=config, seed=args.seed,
            p=float(args.budget) if kind == WITHOUT_REPLACEMENT else None,
            lambda_hat=args.lambda_hat,
        )
        pi_hat, states = run.permutation, run.states
    Path(args.out).write_text(pi_hat.to_line() + "\n")
    if args.regions_dir:
        emit_regions(states, args.regions_dir)
    print(f"wrote permutation to {args.out}")
    return 0


def _cmd_count_inversions(args) -> int:
    print(count_at_most_k_inversions(args.n, args.k))
    return 0


def _cmd_entropy_check(args) -> int:
    report = entropy_bounds(args.n, args.r, args.eps)
    print("n,r,eps,prop_lower,prop_upper,log_greedy_size,within_bounds")
    size = "" if report.log_greedy_size is None else repr(report.log_greedy_size)
    within = "" if report.within_bounds is None else str(report.within_bounds).lower()
    print(f"{report.n},{report.r},{report.epsilon},{report.prop_lower!r},"
          f"{report.prop_upper!r},{size},{within}")
    return 0


def _cmd_theory(args) -> int:
    if args.op == "kl":
        if args.p is not None and args.q is not None:
            print("op,p,q,kl")
            print(f"kl,{args.p!r},{args.q!r},{bernoulli_kl(args.p, args.q)!r}")
            return 0
        if args.n is None or args.budget is None or args.lam is None:
            raise ValueError("model KL needs --n, --budget, --lambda")
        kind = _SAMPLING_TOKENS[args.model]
        if args.pi and args.sigma:
            pi = Permutation.from_line(Path(args.pi).read_text().strip())
            sigma = Permutation.from_line(Path(args.sigma).read_text().strip())
            value = model_kl(pi, sigma, kind, args.n, args.budget, args.lam)
        elif args.d_kt is not None:
            pairs = args.n * (args.n - 1) / 2
            rate = args.budget if kind == WITHOUT_REPLACEMENT else args.budget / pairs
            value = kl_per_discordant_pair(rate, args.lam) * args.d_kt
        else:
            raise ValueError("model KL needs --pi/--sigma files or --d-kt")
        print("op,model,n,budget,lam,kl")
        print(f"kl,{args.model},{args.n},{args.budget!r},{args.lam!r},{value!r}")
        return 0
    if args.op == "tail":
        lower, upper = binomial_tail_bounds(args.n_draws, args.p, args.r, args.s)
        print("op,n_draws,p,r,s,lower_tail_bound,upper_tail_bound")
        print(f"tail,{args.n_draws},{args.p!r},{args.r!r},{args.s!r},{lower!r},{upper!r}")
        return 0
    # rate
    value = rate_curve(args.kind, args.n, args.budget, args.lam)
    print("op,kind,n,budget,lam,value")
    print(f"rate,{args.kind},{args.n},{args.budget!r},{args.lam!r},{value!r}")
    return 0


_EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "scaling-n": dict(
        kind="scaling_n", n_values=(500, 1000, 2000, 4000), alphas=(0.1,),
        lam=0.25, lambda_hat=0.25, stages=None, replicates=10,
        estimators=("ms", "borda", "random"),
        sampling=(WITH_REPLACEMENT, WITHOUT_REPLACEMENT),
    ),
    "scaling-budget": dict(
        kind="scaling_budget", n_values=(2000,), alphas=(0.01, 0.02, 0.05, 0.1),
        lam=0.25, lambda_hat=0.25, stages=None, replicates=10,
        estimators=("ms", "borda", "random"),
        sampling=(WITH_REPLACEMENT, WITHOUT_REPLACEMENT),
    ),
    "regions": dict(
        kind="region_snapshot", n_values=(2000,), alphas=(1.0,),
        lam=0.25, lambda_hat=0.25, stages=3, replicates=1,
        estimators=("ms",), sampling=(WITH_REPLACEMENT,),
    ),
    "lambda": dict(
        kind="lambda_accuracy", n_values=(500,), budgets=(1_000_000,),
        lam=0.25, replicates=10,
    ),
    "mle-small": dict(
        kind="mle_small_n", n_values=(6,), alphas=(1.0,), lam=0.25,
        lambda_hat=0.25, stages=1, replicates=20,
        estimators=("mle", "sieve", "borda", "random"),
        sampling=(WITHOUT_REPLACEMENT,),
    ),
}

_PAPER_SCALE_GRID = (1000, 2000, 4000, 7000, 10000)

_LIST_KEYS = {"n_values": int, "alphas": float, "budgets": int,
              "estimators": str, "sampling": str}
_SCALAR_KEYS = {"kind": str, "lam": float, "lambda_hat": float, "stages": int,
                "replicates": int, "master_seed": int, "c0": float, "c1": float,
                "threshold_scale": float, "workers": int, "max_n": int,
                "max_budget": int, "pi_star": str, "regions_dir": str,
                "out": str, "summary_out": str, "timings_out": str}


def _parse_config_file(path: str) -> dict:
    """Flat key = value text; '#' comments; comma-separated lists."""
    values: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (want key = value): {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _LIST_KEYS:
            conv = _LIST_KEYS[key]
            values[key] = tuple(conv(tok.strip()) for tok in val.split(",") if tok.strip())
        elif key in _SCALAR_KEYS:
            values[key] = None if val.lower() == "none" else _SCALAR_KEYS[key](val)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "sampling" in values:
        values["sampling"] = tuple(_SAMPLING_TOKENS.get(s, s) for s in values["sampling"])
    return values


def _cmd_experiment(args) -> int:
    settings = dict(_EXPERIMENT_DEFAULTS[args.which])
    if args.config:
        file_values = _parse_config_file(args.config)
        if "alphas" in file_values:
            settings.pop("budgets", None)
        if "budgets" in file_values:
            settings.pop("alphas", None)
        settings.update(file_values)
    overrides = {
        "n_values": tuple(args.n_values) if args.n_values else None,
        "alphas": tuple(args.alphas) if args.alphas else None,
        "budgets": tuple(args.budgets) if args.budgets else None,
        "lam": args.lam,
        "stages": args.stages,
        "replicates": args.replicates,
        "master_seed": args.master_seed,
        "estimators": tuple(args.estimators) if args.estimators else None,
        "c0": args.c0, "c1": args.c1, "threshold_scale": args.threshold_scale,
        "workers": args.workers, "max_n": args.max_n, "max_budget": args.max_budget,
        "pi_star": args.pi_star, "regions_dir": args.regions_dir,
    }
    if args.sampling:
        overrides["sampling"] = tuple(_SAMPLING_TOKENS[s] for s in args.sampling)
    if args.lambda_hat is not None:
        overrides["lambda_hat"] = None if args.lambda_hat == "none" else float(args.lambda_hat)
    for key, value in overrides.items():
        if value is not None:
            settings[key] = value
    if args.paper_scale:
        settings["n_values"] = _PAPER_SCALE_GRID
    if args.alphas:
        settings.pop("budgets", None)
    if args.budgets:
        settings.pop("alphas", None)

    out = args.out if args.out is not None else settings.pop("out", None) or "results.csv"
    settings.pop("out", None)
    summary_out = args.summary_out if args.summary_out is not None else settings.pop("summary_out", None)
    settings.pop("summary_out", None)
    timings_out = args.timings_out if args.timings_out is not None else settings.pop("timings_out", None)
    settings.pop("timings_out", None)
    if settings.get("kind") == "region_snapshot" and not settings.get("regions_dir"):
        settings["regions_dir"] = "regions"
    spec = ExperimentSpec(**settings)

    if spec.kind == "lambda_accuracy":
        results = run_lambda_accuracy(spec)
        lambda_results_to_csv(results, out)
        print(f"wrote {len(results)} margin-estimation rows to {out}")
        return 0
    rows = run_experiment(spec)
    rows_to_csv(rows, out, timings_path=timings_out)
    if summary_out:
        summary_to_csv(summarize(rows), summary_out)
    print(f"wrote {len(rows)} result rows to {out}")
    if spec.kind == "region_snapshot":
        print(f"wrote region bitmaps to {spec.regions_dir}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="noisysort", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", parents=[], help="generate a comparison dataset")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--lambda", dest="lam", type=float, required=True)
    p_sim.add_argument("--model", choices=("with", "without"), required=True)
    p_sim.add_argument("--budget", required=True,
                       help="N for --model with, per-pair probability for without")
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--pi-star", dest="pi_star", default=None,
                       help="file with the latent permutation (default identity)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_ms = sub.add_parser("run-ms", help="run the multistage sorter")
    p_ms.add_argument("--in", dest="infiles", nargs="+", default=None,
                      help="stage dataset files (one per stage)")
    p_ms.add_argument("--generate", action="store_true",
                      help="generate data instead of reading files")
    p_ms.add_argument("--n", type=int, default=None)
    p_ms.add_argument("--lambda", dest="lam", type=float, default=0.25)
    p_ms.add_argument("--model", choices=("with", "without"), default="with")
    p_ms.add_argument("--budget", default=None)
    p_ms.add_argument("--seed", type=int, default=0)
    p_ms.add_argument("--T", dest="stages", type=int, required=True)
    p_ms.add_argument("--c0", type=float, default=1.0)
    p_ms.add_argument("--c1", type=float, default=8.0)
    p_ms.add_argument("--threshold-scale", type=float, default=CALIBRATED_THRESHOLD_SCALE)
    p_ms.add_argument("--lambda-hat", dest="lambda_hat", type=float, default=None)
    p_ms.add_argument("--out", required=True)
    p_ms.add_argument("--regions-dir", dest="regions_dir", default=None)
    p_ms.add_argument("--pi-star", dest="pi_star", default=None)
    p_ms.set_defaults(func=_cmd_run_ms)

    p_ct = sub.add_parser("count-inversions",
                          help="count permutations within k inversions of identity")
    p_ct.add_argument("--n", type=int, required=True)
    p_ct.add_argument("--k", type=int, required=True)
    p_ct.set_defaults(func=_cmd_count_inversions)

    p_en = sub.add_parser("entropy-check", help="ball metric-entropy bounds")
    p_en.add_argument("--n", type=int, required=True)
    p_en.add_argument("--r", type=int, required=True)
    p_en.add_argument("--eps", type=int, required=True)
    p_en.set_defaults(func=_cmd_entropy_check)

    p_th = sub.add_parser("theory", help="closed-form reference quantities")
    p_th.add_argument("--op", choices=("kl", "tail", "rate"), required=True)
    p_th.add_argument("--p", type=float, default=None)
    p_th.add_argument("--q", type=float, default=None)
    p_th.add_argument("--r", type=float, default=None)
    p_th.add_argument("--s", type=float, default=None)
    p_th.add_argument("--n-draws", dest="n_draws", type=int, default=None)
    p_th.add_argument("--model", choices=("with", "without"), default="with")
    p_th.add_argument("--n", type=int, default=None)
    p_th.add_argument("--budget", type=float, default=None)
    p_th.add_argument("--lambda", dest="lam", type=float, default=None)
    p_th.add_argument("--pi", default=None)
    p_th.add_argument("--sigma", default=None)
    p_th.add_argument("--d-kt", dest="d_kt", type=int, default=None)
    p_th.add_argument("--kind", choices=RATE_KINDS, default="minimax_o2")
    p_th.set_defaults(func=_cmd_theory)

    p_ex = sub.add_parser("experiment", help="run a seeded experiment grid")
    p_ex.add_argument("which", choices=tuple(_EXPERIMENT_DEFAULTS))
    p_ex.add_argument("--config", default=None, help="flat key = value file")
    p_ex.add_argument("--n-values", dest="n_values", type=int, nargs="+", default=None)
    p_ex.add_argument("--alphas", type=float, nargs="+", default=None)
    p_ex.add_argument("--budgets", type=int, nargs="+", default=None)
    p_ex.add_argument("--lambda", dest="lam", type=float, default=None)
    p_ex.add_argument("--lambda-hat", dest="lambda_hat", default=None,
                      help="margin override, or 'none' to estimate it")
    p_ex.add_argument("--stages", type=int, default=None)
    p_ex.add_argument("--replicates", type=int, default=None)
    p_ex.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p_ex.add_argument("--estimators", nargs="+", default=None)
    p_ex.add_argument("--sampling", nargs="+", choices=("with", "without"), default=None)
    p_ex.add_argument("--c0", type=float, default=None)
    p_ex.add_argument("--c1", type=float, default=None)
    p_ex.add_argument("--threshold-scale", dest="threshold_scale", type=float, default=None)
    p_ex.add_argument("--workers", type=int, default=None)
    p_ex.add_argument("--max-n", dest="max_n", type=int, default=None)
    p_ex.add_argument("--max-budget", dest="max_budget", type=int, default=None)
    p_ex.add_argument("--pi-star", dest="pi_star", choices=("identity", "random"), default=None)
    p_ex.add_argument("--paper-scale", action="store_true",
                      help="use the full-size n grid instead of the desk-scale default")
    p_ex.add_argument("--out", default=None, help="results CSV (default results.csv)")
    p_ex.add_argument("--summary-out", dest="summary_out", default=None)
    p_ex.add_argument("--timings-out", dest="timings_out", default=None)
    p_ex.add_argument("--regions-dir", dest="regions_dir", default=None)
    p_ex.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse exits; normalize the code
        code = exc.code if isinstance(exc.code, int) else 1
        return code
    except ResourceCapError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
