"""Splitting-statistics experiment: generate, clean, solve, perturb, aggregate.

Each trial draws M-1 random clauses at ratio alpha, cleans the instance,
enumerates its solutions, then draws one extra clause.  The added clause
splits the solution set: the surviving solution with the lowest fourth-order
correction under the modified instance becomes x1, the removed solution with
the lowest correction under the original instance becomes x2, and the trial
reports the order-4/order-6 splitting corrections between them for the
original instance.  Trials that cannot produce such a pair are rejected and
counted by reason.

Trials are pure functions of (master_seed, n_bits, trial_index), so results
are byte-identical for a fixed config regardless of the worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool

import numpy as np

from . import __version__
from .core import Instance, clean, draw_clauses
from .dpll import solve_all
from .errors import (
    DegenerateInstanceError,
    DegenerateNeighborError,
    DegeneratePathError,
    InvalidParameterError,
)
from .perturbation import (
    CorrectionSeries,
    correction_series,
    crossing_lambda,
    lambda_c,
    lambda_r,
    order4_solutions_batch,
    order_q_generic,
    splitting,
    threshold_n,
)
from .rng import GENERATOR_NAME, SplitMix64, mix_seed

REJECT_UNSAT = "unsat"
REJECT_SURVIVE = "all-solutions-survive"
REJECT_DEGENERATE = "degenerate"
REJECT_CAP = "cap"
REJECT_UNMAPPABLE = "unmappable"

STATS_COLUMNS = (
    "n,samples,rejects_unsat,rejects_survive,rejects_degenerate,"
    "mean_sq4,p25_sq4,med_sq4,p75_sq4,mean_sq6,p25_sq6,med_sq6,p75_sq6"
)
RECORD_COLUMNS = (
    "n_bits,trial_index,instance_seed,accepted,rejection_reason,"
    "x1,x2,hamming_n,e12_4,e12_6,crossing_lambda"
)


@dataclass(frozen=True)
class ExperimentConfig:
    n_values: tuple[int, ...]
    alpha: float = 0.62
    samples_per_n: int = 5000
    master_seed: int = 0
    solution_cap: int = 10**6
    numeric_mode: str = "float"
    worker_count: int | None = None

    def resolved_workers(self) -> int:
        env = os.environ.get("AQO_WORKERS")
        if env is not None:
            return max(1, int(env))
        if self.worker_count is not None:
            return max(1, self.worker_count)
        return os.cpu_count() or 1

    def digest(self) -> str:
        payload = json.dumps(
            {k: v for k, v in asdict(self).items() if k != "worker_count"},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ExperimentRecord:
    n_bits: int
    trial_index: int
    instance_seed: int
    accepted: bool
    rejection_reason: str | None = None
    x1: str | None = None
    x2: str | None = None
    hamming_n: int | None = None
    e12_4: float | None = None
    e12_6: float | None = None
    crossing_lam: float | None = None


@dataclass(frozen=True)
class NStats:
    n: int
    samples: int
    attempts: int
    rejects_unsat: int
    rejects_survive: int
    rejects_degenerate: int
    rejects_cap: int
    rejects_unmappable: int
    mean_sq4: float
    p25_sq4: float
    med_sq4: float
    p75_sq4: float
    mean_sq6: float
    p25_sq6: float
    med_sq6: float
    p75_sq6: float


@dataclass(frozen=True)
class FitResult:
    slope: float
    stderr: float
    intercept: float = 0.0


@dataclass(frozen=True)
class SplittingStats:
    """Linear-growth fits of the squared splittings.

    The headline slopes come from ordinary least squares: the per-N means
    carry a finite-size offset (about 2 for the order-4 square at this
    clause ratio), and forcing the line through the origin folds that offset
    into the slope.  The through-origin alternative is kept for comparison.
    """

    per_n: tuple[NStats, ...]
    c4: float
    c4_stderr: float
    c4_intercept: float
    c6: float
    c6_stderr: float
    c6_intercept: float
    lambda_r: float
    lambda_c_by_percentile: dict[str, float]
    c4_by_percentile: dict[str, float]
    threshold_n16: float
    threshold_n1: float
    through_origin: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class TrialOutcome:
    record: ExperimentRecord
    original: Instance | None = None
    modified: Instance | None = None
    series1: CorrectionSeries | None = None
    series2: CorrectionSeries | None = None


def _reject(n_bits: int, trial_index: int, seed: int, reason: str) -> TrialOutcome:
    return TrialOutcome(
        record=ExperimentRecord(
            n_bits=n_bits,
            trial_index=trial_index,
            instance_seed=seed,
            accepted=False,
            rejection_reason=reason,
        )
    )


def run_trial_full(
    config: ExperimentConfig,
    n_bits: int,
    trial_index: int,
    with_series: bool = False,
) -> TrialOutcome:
    """One trial; optionally keep the modified-instance level curves."""
    seed = mix_seed(config.master_seed, n_bits, trial_index)
    rng = SplitMix64(seed)
    m = math.floor(config.alpha * n_bits)
    if m < 1:
        return _reject(n_bits, trial_index, seed, REJECT_UNSAT)
    raw = Instance(
        n_bits=n_bits,
        clauses=draw_clauses(rng, n_bits, m - 1),
        metadata={"seed": seed, "gen": GENERATOR_NAME},
    )
    cleaned = clean(raw)
    original = cleaned.instance
    if original.n_bits == 0:
        return _reject(n_bits, trial_index, seed, REJECT_UNMAPPABLE)
    sols = solve_all(original, cap=config.solution_cap)
    if sols.truncated:
        return _reject(n_bits, trial_index, seed, REJECT_CAP)
    if not sols.solutions:
        return _reject(n_bits, trial_index, seed, REJECT_UNSAT)

    extra = draw_clauses(rng, n_bits, 1)[0]
    mapped = tuple(sorted(cleaned.old_to_new.get(a, 0) for a in extra))
    if mapped[0] == 0:
        return _reject(n_bits, trial_index, seed, REJECT_UNMAPPABLE)
    modified = Instance(
        n_bits=original.n_bits,
        clauses=original.clauses + (mapped,),
        metadata={"seed": seed, "gen": GENERATOR_NAME},
    )

    def satisfies_extra(bits: str) -> bool:
        total = sum(int(bits[a - 1]) for a in mapped)
        return total == 1

    survivors = [s for s in sols.solutions if satisfies_extra(s.bits)]
    removed = [s for s in sols.solutions if not satisfies_extra(s.bits)]
    if not removed:
        return _reject(n_bits, trial_index, seed, REJECT_SURVIVE)
    if not survivors:
        return _reject(n_bits, trial_index, seed, REJECT_UNSAT)

    mode = config.numeric_mode
    try:
        x1 = _argmin_order4(modified, survivors, mode)
        x2 = _argmin_order4(original, removed, mode)
        split = splitting(original, x1, x2, mode=mode)
    except (DegenerateNeighborError, DegeneratePathError, DegenerateInstanceError):
        return _reject(n_bits, trial_index, seed, REJECT_DEGENERATE)

    record = ExperimentRecord(
        n_bits=n_bits,
        trial_index=trial_index,
        instance_seed=seed,
        accepted=True,
        x1=x1,
        x2=x2,
        hamming_n=split.hamming_n,
        e12_4=float(split.e12_4),
        e12_6=float(split.e12_6),
    )
    if not with_series:
        return TrialOutcome(record=record, original=original, modified=modified)
    try:
        series1 = correction_series(modified, x1, through=4, mode=mode)
        series2 = correction_series(modified, x2, through=4, mode=mode)
    except (DegenerateNeighborError, DegeneratePathError, DegenerateInstanceError):
        series1 = series2 = None
    return TrialOutcome(
        record=record,
        original=original,
        modified=modified,
        series1=series1,
        series2=series2,
    )


def run_trial(config: ExperimentConfig, n_bits: int, trial_index: int) -> ExperimentRecord:
    return run_trial_full(config, n_bits, trial_index).record


def _argmin_order4(instance: Instance, solutions, mode: str) -> str:
    """Lowest fourth-order correction; ties go to the lexicographically first."""
    if mode == "float" and len(solutions) > 16:
        vals = order4_solutions_batch(instance, solutions)
        return solutions[int(np.argmin(vals))].bits
    best_bits = None
    best_val = None
    for sol in solutions:  # solve_all returns lexicographic order
        val = order_q_generic(instance, sol.bits, 4, mode=mode)
        if best_val is None or val < best_val:
            best_val = val
            best_bits = sol.bits
    return best_bits


def _trial_record(args) -> ExperimentRecord:
    config, n_bits, trial_index = args
    return run_trial_full(config, n_bits, trial_index).record


def _iter_records(config: ExperimentConfig, n_bits: int, workers: int, pool):
    """Yield records for trial_index = 0, 1, ... in order."""
    if workers <= 1 or pool is None:
        idx = 0
        while True:
            yield run_trial_full(config, n_bits, idx).record
            idx += 1
    else:
        chunk = workers * 8

        def batches():
            start = 0
            while True:
                yield [(config, n_bits, i) for i in range(start, start + chunk)]
                start += chunk

        for batch in batches():
            yield from pool.map(_trial_record, batch)


@dataclass(frozen=True)
class ExperimentResult:
    stats: SplittingStats
    records: tuple[ExperimentRecord, ...]


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentResult:
    """Accepted-sample collection per N, then percentile and slope fits."""
    if not config.n_values:
        raise InvalidParameterError("config.n_values must not be empty")
    if config.samples_per_n < 1:
        raise InvalidParameterError("samples_per_n must be >= 1")
    workers = config.resolved_workers()
    pool = Pool(workers) if workers > 1 else None
    all_records: list[ExperimentRecord] = []
    per_n: list[NStats] = []
    attempts_cap = max(1000, config.samples_per_n * 500)
    try:
        for n in config.n_values:
            accepted = 0
            n_records: list[ExperimentRecord] = []
            for record in _iter_records(config, n, workers, pool):
                n_records.append(record)
                if record.accepted:
                    accepted += 1
                    if progress and accepted % 50 == 0:
                        progress(n, accepted, len(n_records))
                    if accepted >= config.samples_per_n:
                        break
                if len(n_records) >= attempts_cap:
                    raise RuntimeError(
                        f"rejection rate too high at n={n}: "
                        f"{accepted}/{len(n_records)} accepted"
                    )
            per_n.append(_aggregate(n, n_records))
            all_records.extend(n_records)
            if progress:
                progress(n, accepted, len(n_records))
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    stats = _fit_stats(tuple(per_n))
    return ExperimentResult(stats=stats, records=tuple(all_records))


def _aggregate(n: int, records: list[ExperimentRecord]) -> NStats:
    reasons = {
        REJECT_UNSAT: 0,
        REJECT_SURVIVE: 0,
        REJECT_DEGENERATE: 0,
        REJECT_CAP: 0,
        REJECT_UNMAPPABLE: 0,
    }
    sq4 = []
    sq6 = []
    for r in records:
        if r.accepted:
            sq4.append(r.e12_4**2)
            sq6.append(r.e12_6**2)
        else:
            reasons[r.rejection_reason] += 1
    sq4_arr = np.array(sq4) if sq4 else np.zeros(1)
    sq6_arr = np.array(sq6) if sq6 else np.zeros(1)
    return NStats(
        n=n,
        samples=len(sq4),
        attempts=len(records),
        rejects_unsat=reasons[REJECT_UNSAT],
        rejects_survive=reasons[REJECT_SURVIVE],
        rejects_degenerate=reasons[REJECT_DEGENERATE],
        rejects_cap=reasons[REJECT_CAP],
        rejects_unmappable=reasons[REJECT_UNMAPPABLE],
        mean_sq4=float(sq4_arr.mean()),
        p25_sq4=float(np.percentile(sq4_arr, 25)),
        med_sq4=float(np.percentile(sq4_arr, 50)),
        p75_sq4=float(np.percentile(sq4_arr, 75)),
        mean_sq6=float(sq6_arr.mean()),
        p25_sq6=float(np.percentile(sq6_arr, 25)),
        med_sq6=float(np.percentile(sq6_arr, 50)),
        p75_sq6=float(np.percentile(sq6_arr, 75)),
    )


def fit_through_origin(xs, ys) -> FitResult:
    """Least squares y = c x; slope stderr from the residual variance."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    sxx = float((x * x).sum())
    if sxx == 0.0:
        raise InvalidParameterError("need nonzero x values")
    slope = float((x * y).sum() / sxx)
    dof = max(len(x) - 1, 1)
    resid = y - slope * x
    stderr = float(np.sqrt((resid * resid).sum() / dof / sxx))
    return FitResult(slope=slope, stderr=stderr)


def fit_line(xs, ys) -> FitResult:
    """Ordinary least squares y = c x + b with the slope's standard error."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2:
        return FitResult(slope=float("nan"), stderr=float("nan"), intercept=float("nan"))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    sxx = float(((x - x.mean()) ** 2).sum())
    stderr = float(np.sqrt((resid * resid).sum() / dof / sxx)) if sxx else float("nan")
    return FitResult(slope=float(slope), stderr=stderr, intercept=float(intercept))


def _fit_stats(per_n: tuple[NStats, ...]) -> SplittingStats:
    ns = [s.n for s in per_n]
    single = len(ns) < 2
    fit4 = (
        fit_through_origin(ns, [s.mean_sq4 for s in per_n])
        if single
        else fit_line(ns, [s.mean_sq4 for s in per_n])
    )
    fit6 = (
        fit_through_origin(ns, [s.mean_sq6 for s in per_n])
        if single
        else fit_line(ns, [s.mean_sq6 for s in per_n])
    )
    lam_r = lambda_r(fit4.slope, fit6.slope) if fit4.slope > 0 and fit6.slope > 0 else float("nan")
    n_ref = max(ns)
    series = {
        "mean": [s.mean_sq4 for s in per_n],
        "p25": [s.p25_sq4 for s in per_n],
        "p50": [s.med_sq4 for s in per_n],
        "p75": [s.p75_sq4 for s in per_n],
    }
    c4_by_pct = {}
    lam_c_by_pct = {}
    for name, ys in series.items():
        slope = (fit_through_origin(ns, ys) if single else fit_line(ns, ys)).slope
        c4_by_pct[name] = slope
        lam_c_by_pct[name] = lambda_c(slope, n_ref) if slope > 0 else float("nan")
    if fit4.slope > 0 and not math.isnan(lam_r):
        thresh = threshold_n(fit4.slope, lam_r)
        t16, t1 = thresh.n_full_shift, thresh.n_unit_shift
    else:
        t16 = t1 = float("nan")
    origin4 = fit_through_origin(ns, [s.mean_sq4 for s in per_n])
    origin6 = fit_through_origin(ns, [s.mean_sq6 for s in per_n])
    origin_lam_r = (
        lambda_r(origin4.slope, origin6.slope)
        if origin4.slope > 0 and origin6.slope > 0
        else float("nan")
    )
    return SplittingStats(
        per_n=per_n,
        c4=fit4.slope,
        c4_stderr=fit4.stderr,
        c4_intercept=fit4.intercept,
        c6=fit6.slope,
        c6_stderr=fit6.stderr,
        c6_intercept=fit6.intercept,
        lambda_r=lam_r,
        lambda_c_by_percentile=lam_c_by_pct,
        c4_by_percentile=c4_by_pct,
        threshold_n16=t16,
        threshold_n1=t1,
        through_origin={
            "c4": origin4.slope,
            "c4_stderr": origin4.stderr,
            "c6": origin6.slope,
            "c6_stderr": origin6.stderr,
            "lambda_r": origin_lam_r,
        },
    )


# ---------------------------------------------------------------------------
# Crossing search


@dataclass(frozen=True)
class CrossingHit:
    trial_index: int
    lam_star: float
    hamming_n: int
    curve: tuple[tuple[float, float, float, float], ...]  # (lam, e1, e2, diff)


@dataclass(frozen=True)
class CrossingSearchResult:
    records: tuple[ExperimentRecord, ...]
    hits: tuple[CrossingHit, ...]
    accepted: int


def crossing_search(
    config: ExperimentConfig,
    n_bits: int,
    max_accepted: int,
    lambda_max: float = 1.0,
    stop_after: int | None = None,
    curve_points: int = 200,
    progress=None,
) -> CrossingSearchResult:
    """Scan accepted trials for order-4 level crossings of the modified instance."""
    records: list[ExperimentRecord] = []
    hits: list[CrossingHit] = []
    accepted = 0
    idx = 0
    attempts_cap = max(1000, max_accepted * 500)
    while accepted < max_accepted and idx < attempts_cap:
        outcome = run_trial_full(config, n_bits, idx, with_series=True)
        record = outcome.record
        if record.accepted:
            accepted += 1
            lam_star = None
            if outcome.series1 is not None and outcome.series2 is not None:
                lam_star = crossing_lambda(outcome.series1, outcome.series2, lambda_max)
            if lam_star is not None:
                record = ExperimentRecord(
                    **{**asdict(record), "crossing_lam": lam_star}
                )
                lams = np.linspace(0.0, lambda_max, curve_points)
                curve = tuple(
                    (
                        float(lam),
                        outcome.series1.evaluate(float(lam)),
                        outcome.series2.evaluate(float(lam)),
                        outcome.series1.evaluate(float(lam))
                        - outcome.series2.evaluate(float(lam)),
                    )
                    for lam in lams
                )
                hits.append(
                    CrossingHit(
                        trial_index=idx,
                        lam_star=lam_star,
                        hamming_n=record.hamming_n,
                        curve=curve,
                    )
                )
            if progress:
                progress(n_bits, accepted, idx + 1, len(hits))
        records.append(record)
        idx += 1
        if stop_after is not None and len(hits) >= stop_after:
            break
    return CrossingSearchResult(
        records=tuple(records), hits=tuple(hits), accepted=accepted
    )


# ---------------------------------------------------------------------------
# Output files


def _meta_lines(config: ExperimentConfig) -> list[str]:
    return [
        f"# ec3lab {__version__}",
        f"# seed={config.master_seed} alpha={config.alpha} "
        f"samples={config.samples_per_n} mode={config.numeric_mode} "
        f"config={config.digest()}",
    ]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_stats_csv(path, stats: SplittingStats, config: ExperimentConfig) -> None:
    lines = _meta_lines(config)
    lines.append(STATS_COLUMNS)
    for s in stats.per_n:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    s.n,
                    s.samples,
                    s.rejects_unsat,
                    s.rejects_survive,
                    s.rejects_degenerate,
                    s.mean_sq4,
                    s.p25_sq4,
                    s.med_sq4,
                    s.p75_sq4,
                    s.mean_sq6,
                    s.p25_sq6,
                    s.med_sq6,
                    s.p75_sq6,
                )
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_records_csv(path, records, config: ExperimentConfig) -> None:
    lines = _meta_lines(config)
    lines.append(RECORD_COLUMNS)
    for r in records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.n_bits,
                    r.trial_index,
                    r.instance_seed,
                    r.accepted,
                    r.rejection_reason,
                    r.x1,
                    r.x2,
                    r.hamming_n,
                    r.e12_4,
                    r.e12_6,
                    r.crossing_lam,
                )
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_fit_json(path, stats: SplittingStats, config: ExperimentConfig) -> None:
    payload = {
        "meta": {
            "version": __version__,
            "seed": config.master_seed,
            "alpha": config.alpha,
            "samples_per_n": config.samples_per_n,
            "numeric_mode": config.numeric_mode,
            "config_digest": config.digest(),
            "lambda_c_reference_n": max(s.n for s in stats.per_n),
        },
        "c4": stats.c4,
        "c4_stderr": stats.c4_stderr,
        "c4_intercept": stats.c4_intercept,
        "c6": stats.c6,
        "c6_stderr": stats.c6_stderr,
        "c6_intercept": stats.c6_intercept,
        "lambda_r": stats.lambda_r,
        "lambda_c_by_percentile": stats.lambda_c_by_percentile,
        "c4_by_percentile": stats.c4_by_percentile,
        "threshold_n16": stats.threshold_n16,
        "threshold_n1": stats.threshold_n1,
        "through_origin": stats.through_origin,
        "diagnostics": {
            "attempts_by_n": {str(s.n): s.attempts for s in stats.per_n},
            "rejects_cap_by_n": {str(s.n): s.rejects_cap for s in stats.per_n},
            "rejects_unmappable_by_n": {
                str(s.n): s.rejects_unmappable for s in stats.per_n
            },
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_curve_csv(path, hit: CrossingHit, config: ExperimentConfig) -> None:
    lines = _meta_lines(config)
    lines.append(f"# trial={hit.trial_index} lambda_star={hit.lam_star:.10g} n={hit.hamming_n}")
    lines.append("lambda,e1,e2,diff")
    for lam, e1, e2, diff in hit.curve:
        lines.append(f"{lam:.12g},{e1:.12g},{e2:.12g},{diff:.12g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
