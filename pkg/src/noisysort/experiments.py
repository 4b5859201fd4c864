"""Experiment orchestration: seeded grids of simulated instances, estimator
runs, CSV emission, and uncertainty-region bitmaps.

Every (grid cell, replicate) pair gets its own seed derived from the master
seed, so replicates can run on any number of workers and still produce
byte-identical output: rows are sorted into a canonical order before they
are written.  Wall-clock timings are kept out of the canonical CSV (they are
not reproducible) and can be written to a sidecar file instead.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counting import greedy_maximal_packing, max_inversions
from .errors import ResourceCapError
from .estimators import (
    CALIBRATED_THRESHOLD_SCALE,
    MsConfig,
    MsState,
    borda_sort,
    brute_force_mle,
    estimate_lambda,
    ms_sort,
    region_bitmap,
    sieve_mle,
    theoretical_phi,
)
from .model import (
    WITH_REPLACEMENT,
    WITHOUT_REPLACEMENT,
    ProbabilityMatrix,
    derive_seed,
    merge_datasets,
    sample_without_replacement,
    split_with_replacement,
    split_without_replacement,
    stage_budgets,
    star_matrix,
)
from .perms import (
    Permutation,
    kendall_tau,
    l1_distance,
    linf_distance,
    random_permutation,
)

EXPERIMENT_KINDS = (
    "scaling_n", "scaling_budget", "region_snapshot", "lambda_accuracy", "mle_small_n",
)
ESTIMATOR_IDS = ("ms", "borda", "random", "mle", "sieve")
RESULT_COLUMNS = ("kind", "n", "sampling", "budget", "lam", "seed", "estimator",
                  "d_kt", "l1", "linf")
WORKERS_ENV_VAR = "NOISYSORT_WORKERS"


def default_stage_count(n: int) -> int:
    """floor(log2 log2 n), at least 1; 3 for n in the thousands."""
    if n < 5:
        return 1
    return max(1, int(math.floor(math.log2(math.log2(n)))))


@dataclass(frozen=True)
class ExperimentSpec:
    """A seeded experiment grid.

    Budgets come either as fractions ``alphas`` of the number of pairs or as
    absolute comparison counts ``budgets`` (exactly one must be given).  For
    without-replacement sampling the per-pair probability is the fraction
    (or budget / C(n,2)).  ``lambda_hat`` fixes the margin handed to the
    multistage sorter; None estimates it from an extra sample of equal size
    (with-replacement sampling only).  ``stages`` of None picks
    default_stage_count(n) per cell.
    """

    kind: str
    n_values: tuple[int, ...]
    alphas: tuple[float, ...] | None = None
    budgets: tuple[int, ...] | None = None
    lam: float = 0.25
    lambda_hat: float | None = 0.25
    stages: int | None = None
    replicates: int = 10
    master_seed: int = 0
    estimators: tuple[str, ...] = ("ms", "borda", "random")
    sampling: tuple[str, ...] = (WITH_REPLACEMENT,)
    c0: float = 1.0
    c1: float = 8.0
    threshold_scale: float = CALIBRATED_THRESHOLD_SCALE
    workers: int | None = None
    max_n: int = 10_000
    max_budget: int = 200_000_000
    pi_star: str = "identity"
    regions_dir: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if not self.n_values:
            raise ValueError("empty n grid")
        if (self.alphas is None) == (self.budgets is None):
            raise ValueError("give exactly one of alphas / budgets")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        bad = [e for e in self.estimators if e not in ESTIMATOR_IDS]
        if bad:
            raise ValueError(f"unknown estimators {bad}; know {ESTIMATOR_IDS}")
        for s in self.sampling:
            if s not in (WITH_REPLACEMENT, WITHOUT_REPLACEMENT):
                raise ValueError(f"unknown sampling model {s!r}")
        if self.pi_star not in ("identity", "random"):
            raise ValueError("pi_star must be 'identity' or 'random'")

    def budget_params(self) -> tuple[tuple[str, float], ...]:
        if self.alphas is not None:
            return tuple(("alpha", a) for a in self.alphas)
        return tuple(("absolute", float(b)) for b in self.budgets or ())

    def effective_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get(WORKERS_ENV_VAR)
        return max(1, int(env)) if env else 1


@dataclass(frozen=True)
class ResultRow:
    """One estimator run on one simulated instance."""

    kind: str
    n: int
    sampling: str
    budget: float
    lam: float
    seed: int
    estimator: str
    d_kt: int
    l1: int
    linf: int
    runtime_ms: float

    def __post_init__(self) -> None:
        if not self.d_kt <= self.l1 <= 2 * self.d_kt:
            raise ValueError(
                f"distance sandwich violated: d_kt={self.d_kt} l1={self.l1}"
            )


@dataclass(frozen=True)
class LambdaResult:
    """One margin-estimation run."""

    n: int
    budget: int
    lam: float
    seed: int
    lambda_hat: float
    abs_error: float


def _check_caps(spec: ExperimentSpec) -> None:
    for n in spec.n_values:
        if n > spec.max_n:
            raise ResourceCapError(
                f"n={n} exceeds the configured cap max_n={spec.max_n}"
            )
        for kind, value in spec.budget_params():
            total = value * math.comb(n, 2) if kind == "alpha" else value
            if spec.lambda_hat is None:
                total *= 2  # margin estimation doubles the sample
            if total > spec.max_budget:
                raise ResourceCapError(
                    f"budget {int(total)} at n={n} exceeds the configured cap "
                    f"max_budget={spec.max_budget}"
                )


def _resolve_budget(kind: str, value: float, n: int, sampling: str) -> tuple[float, int]:
    """(budget column value, absolute comparison count N) for one cell."""
    pairs = math.comb(n, 2)
    if sampling == WITHOUT_REPLACEMENT:
        p = value if kind == "alpha" else value / pairs
        if not 0 < p <= 1:
            raise ValueError(f"per-pair probability {p} outside (0, 1]")
        return p, round(p * pairs)
    total = round(value * pairs) if kind == "alpha" else int(value)
    return float(total), total


@dataclass(frozen=True)
class MsRun:
    """Output of one full multistage pipeline run."""

    permutation: Permutation
    states: list[MsState]
    lambda_hat: float


def run_ms_pipeline(
    pi_star: Permutation,
    matrix: ProbabilityMatrix,
    sampling: str,
    total: int,
    stages: int,
    config: MsConfig,
    seed: int,
    p: float | None = None,
    lambda_hat: float | None = None,
) -> MsRun:
    """Generate data and run the multistage sorter end to end.

    With-replacement: ``total`` comparisons split evenly across stages; if no
    margin is supplied, an extra ``total`` comparisons are generated and used
    to estimate it (two half samples).  Without-replacement: one dataset with
    per-pair probability ``p``, comparisons scattered uniformly across
    stages; a margin must be supplied since the estimator's contract covers
    with-replacement samples only.
    """
    lam_hat = config.lambda_hat_override if config.lambda_hat_override is not None else lambda_hat
    if sampling == WITH_REPLACEMENT:
        if lam_hat is None:
            half = total - total // 2
            parts = split_with_replacement(
                pi_star, matrix, [half, total // 2] + stage_budgets(total, stages),
                derive_seed(seed, 0),
            )
            lam_hat = estimate_lambda(parts[0], parts[1])
            stage_samples = parts[2:]
        else:
            stage_samples = split_with_replacement(
                pi_star, matrix, stage_budgets(total, stages), derive_seed(seed, 0)
            )
    elif sampling == WITHOUT_REPLACEMENT:
        if lam_hat is None:
            raise ValueError(
                "without-replacement runs need an explicit margin (lambda_hat)"
            )
        if p is None:
            raise ValueError("without-replacement runs need p")
        full = sample_without_replacement(pi_star, matrix, p, derive_seed(seed, 0))
        stage_samples = split_without_replacement(full, stages, derive_seed(seed, 1))
    else:
        raise ValueError(f"unknown sampling model {sampling!r}")
    pi_hat, states = ms_sort(stage_samples, lam_hat, config)
    return MsRun(permutation=pi_hat, states=states, lambda_hat=lam_hat)


def _distances(pi_hat: Permutation, pi_star: Permutation) -> tuple[int, int, int]:
    return (
        kendall_tau(pi_hat, pi_star),
        l1_distance(pi_hat, pi_star),
        linf_distance(pi_hat, pi_star),
    )


def _run_cell_replicate(
    spec: ExperimentSpec,
    n: int,
    budget_kind: str,
    budget_value: float,
    sampling: str,
    seed: int,
    capture_states: bool = False,
) -> tuple[list[ResultRow], list[MsState] | None]:
    budget_col, total = _resolve_budget(budget_kind, budget_value, n, sampling)
    rng_misc = np.random.default_rng(derive_seed(seed, 9))
    pi_star = (
        Permutation.identity(n)
        if spec.pi_star == "identity"
        else random_permutation(n, np.random.default_rng(derive_seed(seed, 8)))
    )
    matrix = star_matrix(n, spec.lam)
    stages = spec.stages if spec.stages is not None else default_stage_count(n)
    config = MsConfig(
        stages=stages, c0=spec.c0, c1=spec.c1, threshold_scale=spec.threshold_scale
    )
    estimators = list(spec.estimators)
    if "random" not in estimators:
        estimators.append("random")  # sanity-floor control always present

    rows: list[ResultRow] = []
    states: list[MsState] | None = None
    merged = None

    def merged_dataset():
        nonlocal merged
        if merged is None:
            if sampling == WITH_REPLACEMENT:
                parts = split_with_replacement(
                    pi_star, matrix, stage_budgets(total, stages), derive_seed(seed, 0)
                )
                merged = merge_datasets(parts)
            else:
                merged = sample_without_replacement(
                    pi_star, matrix, budget_col, derive_seed(seed, 0)
                )
        return merged

    for estimator in estimators:
        start = time.perf_counter()
        if estimator == "ms":
            run = run_ms_pipeline(
                pi_star, matrix, sampling, total, stages, config, seed,
                p=budget_col if sampling == WITHOUT_REPLACEMENT else None,
                lambda_hat=spec.lambda_hat,
            )
            pi_hat = run.permutation
            if capture_states:
                states = run.states
        elif estimator == "borda":
            pi_hat = borda_sort(merged_dataset())
        elif estimator == "random":
            pi_hat = random_permutation(n, rng_misc)
        elif estimator == "mle":
            pi_hat = brute_force_mle(merged_dataset())
        elif estimator == "sieve":
            phi = theoretical_phi(sampling, n, total if sampling == WITH_REPLACEMENT
                                  else budget_col, spec.lam)
            radius = int(min(max(phi, 1), max_inversions(n)))
            net = greedy_maximal_packing(n, radius)
            pi_hat = sieve_mle(merged_dataset(), net)
        else:  # pragma: no cover - spec validation rejects unknown ids
            raise ValueError(f"unknown estimator {estimator!r}")
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        d_kt, l1, linf = _distances(pi_hat, pi_star)
        rows.append(ResultRow(
            kind=spec.kind, n=n, sampling=sampling, budget=budget_col,
            lam=spec.lam, seed=seed, estimator=estimator,
            d_kt=d_kt, l1=l1, linf=linf, runtime_ms=elapsed_ms,
        ))
    return rows, states


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run a distance-measured experiment grid; rows in canonical order.

    For region snapshots, per-stage bitmaps land in ``spec.regions_dir``
    (which must be set) together with a region_sizes.csv.
    """
    if spec.kind == "lambda_accuracy":
        raise ValueError("use run_lambda_accuracy for the lambda_accuracy kind")
    _check_caps(spec)
    if spec.kind == "region_snapshot":
        return _run_region_snapshot(spec)

    jobs = []
    for i_n, n in enumerate(spec.n_values):
        for i_b, (bkind, bval) in enumerate(spec.budget_params()):
            for i_s, sampling in enumerate(spec.sampling):
                for rep in range(spec.replicates):
                    seed = derive_seed(spec.master_seed, i_n, i_b, i_s, rep)
                    jobs.append((n, bkind, bval, sampling, seed))

    def run_job(job):
        n, bkind, bval, sampling, seed = job
        rows, _ = _run_cell_replicate(spec, n, bkind, bval, sampling, seed)
        return rows

    workers = spec.effective_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_job, jobs))
    else:
        chunks = [run_job(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.kind, r.n, r.sampling, r.budget, r.lam, r.seed, r.estimator))
    return rows


def _run_region_snapshot(spec: ExperimentSpec) -> list[ResultRow]:
    if spec.regions_dir is None:
        raise ValueError("region snapshots need regions_dir")
    if len(spec.n_values) != 1 or len(spec.budget_params()) != 1:
        raise ValueError("region snapshots take a single grid cell")
    if spec.pi_star != "identity":
        raise ValueError("region snapshots order items by the identity")
    n = spec.n_values[0]
    bkind, bval = spec.budget_params()[0]
    sampling = spec.sampling[0]
    all_rows: list[ResultRow] = []
    out_dir = Path(spec.regions_dir)
    for rep in range(spec.replicates):
        seed = derive_seed(spec.master_seed, 0, 0, 0, rep)
        rows, states = _run_cell_replicate(
            spec, n, bkind, bval, sampling, seed, capture_states=True
        )
        all_rows.extend(rows)
        if rep == 0 and states is not None:
            emit_regions(states, out_dir)
            sizes = [(st.stage, st.region_size()) for st in states]
            lines = ["stage,region_size"] + [f"{t},{c}" for t, c in sizes]
            (out_dir / "region_sizes.csv").write_text("\n".join(lines) + "\n")
    all_rows.sort(key=lambda r: (r.kind, r.n, r.sampling, r.budget, r.lam, r.seed, r.estimator))
    return all_rows


def run_lambda_accuracy(spec: ExperimentSpec) -> list[LambdaResult]:
    """Margin-estimation accuracy runs (with-replacement sampling)."""
    if spec.kind != "lambda_accuracy":
        raise ValueError("spec.kind must be lambda_accuracy")
    _check_caps(spec)
    results: list[LambdaResult] = []
    for i_n, n in enumerate(spec.n_values):
        matrix = star_matrix(n, spec.lam)
        for i_b, (bkind, bval) in enumerate(spec.budget_params()):
            _, total = _resolve_budget(bkind, bval, n, WITH_REPLACEMENT)
            for rep in range(spec.replicates):
                seed = derive_seed(spec.master_seed, i_n, i_b, 0, rep)
                pi_star = (
                    Permutation.identity(n)
                    if spec.pi_star == "identity"
                    else random_permutation(n, np.random.default_rng(derive_seed(seed, 8)))
                )
                half = total - total // 2
                s1, s2 = split_with_replacement(
                    pi_star, matrix, [half, total // 2], derive_seed(seed, 0)
                )
                lam_hat = estimate_lambda(s1, s2)
                results.append(LambdaResult(
                    n=n, budget=total, lam=spec.lam, seed=seed,
                    lambda_hat=lam_hat, abs_error=abs(lam_hat - spec.lam),
                ))
    return results


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate of one (cell, estimator) group."""

    kind: str
    n: int
    sampling: str
    budget: float
    lam: float
    estimator: str
    count: int
    d_kt_mean: float
    d_kt_std: float
    d_kt_min: int
    d_kt_max: int
    l1_mean: float
    linf_mean: float


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Mean/std/min/max of the distances per (cell, estimator)."""
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault(
            (row.kind, row.n, row.sampling, row.budget, row.lam, row.estimator), []
        ).append(row)
    out = []
    for key in sorted(groups):
        members = groups[key]
        d = np.array([r.d_kt for r in members], dtype=float)
        out.append(SummaryRow(
            kind=key[0], n=key[1], sampling=key[2], budget=key[3], lam=key[4],
            estimator=key[5], count=len(members),
            d_kt_mean=float(d.mean()), d_kt_std=float(d.std()),
            d_kt_min=int(d.min()), d_kt_max=int(d.max()),
            l1_mean=float(np.mean([r.l1 for r in members])),
            linf_mean=float(np.mean([r.linf for r in members])),
        ))
    return out


def loglog_slope(xs: list[float], ys: list[float]) -> float:
    """Least-squares slope of log y against log x."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need at least two points")
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    lx -= lx.mean()
    return float((lx * (ly - ly.mean())).sum() / (lx * lx).sum())


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[ResultRow], path: str | Path,
                timings_path: str | Path | None = None) -> None:
    """Write rows in the documented column order (timings separate).

    The canonical file is a pure function of the experiment spec and master
    seed; wall-clock timings are not, so they only ever go to the sidecar.
    """
    lines = [",".join(RESULT_COLUMNS)]
    for r in rows:
        lines.append(",".join(_format_value(getattr(r, c)) for c in RESULT_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")
    if timings_path is not None:
        tlines = [",".join(RESULT_COLUMNS[:7]) + ",runtime_ms"]
        for r in rows:
            tlines.append(
                ",".join(_format_value(getattr(r, c)) for c in RESULT_COLUMNS[:7])
                + f",{r.runtime_ms:.3f}"
            )
        Path(timings_path).write_text("\n".join(tlines) + "\n")


def summary_to_csv(rows: list[SummaryRow], path: str | Path) -> None:
    cols = ("kind", "n", "sampling", "budget", "lam", "estimator", "count",
            "d_kt_mean", "d_kt_std", "d_kt_min", "d_kt_max", "l1_mean", "linf_mean")
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_format_value(getattr(r, c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def lambda_results_to_csv(results: list[LambdaResult], path: str | Path) -> None:
    cols = ("n", "budget", "lam", "seed", "lambda_hat", "abs_error")
    lines = [",".join(cols)]
    for r in results:
        lines.append(",".join(_format_value(getattr(r, c)) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pbm(mask: np.ndarray, path: str | Path) -> None:
    """Plain PBM (P1): one text row per matrix row, 1 = black = uncertain."""
    n_rows, n_cols = mask.shape
    buf = np.full((n_rows, 2 * n_cols), ord(" "), dtype=np.uint8)
    buf[:, 0::2] = ord("0") + mask.astype(np.uint8)
    buf[:, -1] = ord("\n")
    with open(path, "wb") as fh:
        fh.write(f"P1\n{n_cols} {n_rows}\n".encode())
        fh.write(buf.tobytes())


def emit_regions(states: list[MsState], out_dir: str | Path) -> list[Path]:
    """One bitmap per stage: pixel (i, j) black iff j is uncertain for i."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for state in states:
        path = out / f"stage_{state.stage}.pbm"
        write_pbm(region_bitmap(state), path)
        paths.append(path)
    return paths
