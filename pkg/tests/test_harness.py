"""Trial pipeline semantics, determinism, aggregation and output files."""

import json
import math

import numpy as np
import pytest

from ec3lab.core import Instance, clean, draw_clauses
from ec3lab.dpll import hamming, solve_all
from ec3lab.harness import (
    RECORD_COLUMNS,
    STATS_COLUMNS,
    ExperimentConfig,
    crossing_search,
    fit_through_origin,
    run_experiment,
    run_trial,
    write_fit_json,
    write_records_csv,
    write_stats_csv,
)
from ec3lab.perturbation import order_q_generic, splitting
from ec3lab.rng import GENERATOR_NAME, SplitMix64, mix_seed


CONFIG = ExperimentConfig(
    n_values=(15,), alpha=0.62, samples_per_n=5, master_seed=3, worker_count=1
)


def retrace_trial(config, n_bits, trial_index):
    """Independent re-derivation of one trial, following the documented recipe."""
    seed = mix_seed(config.master_seed, n_bits, trial_index)
    rng = SplitMix64(seed)
    m = math.floor(config.alpha * n_bits)
    raw = Instance(
        n_bits=n_bits,
        clauses=draw_clauses(rng, n_bits, m - 1),
        metadata={"seed": seed, "gen": GENERATOR_NAME},
    )
    cleaned = clean(raw)
    original = cleaned.instance
    if original.n_bits == 0:
        return ("unmappable", None)
    sols = solve_all(original, cap=config.solution_cap)
    if sols.truncated:
        return ("cap", None)
    if not sols.solutions:
        return ("unsat", None)
    extra = draw_clauses(rng, n_bits, 1)[0]
    if any(a not in cleaned.old_to_new for a in extra):
        return ("unmappable", None)
    mapped = tuple(sorted(cleaned.old_to_new[a] for a in extra))
    modified = Instance(
        n_bits=original.n_bits, clauses=original.clauses + (mapped,), metadata={}
    )
    surv = [
        s for s in sols.solutions if sum(int(s.bits[a - 1]) for a in mapped) == 1
    ]
    kill = [
        s for s in sols.solutions if sum(int(s.bits[a - 1]) for a in mapped) != 1
    ]
    if not kill:
        return ("all-solutions-survive", None)
    if not surv:
        return ("unsat", None)
    try:
        x1 = min(
            surv, key=lambda s: (order_q_generic(modified, s.bits, 4, mode="float"), s.bits)
        ).bits
        x2 = min(
            kill, key=lambda s: (order_q_generic(original, s.bits, 4, mode="float"), s.bits)
        ).bits
        split = splitting(original, x1, x2, mode="float")
    except Exception:
        return ("degenerate", None)
    return (None, (x1, x2, split))


def test_trials_match_independent_retrace():
    accepted_seen = 0
    for idx in range(300):
        record = run_trial(CONFIG, 15, idx)
        reason, payload = retrace_trial(CONFIG, 15, idx)
        if reason is None:
            assert record.accepted, idx
            x1, x2, split = payload
            assert record.x1 == x1
            assert record.x2 == x2
            assert record.hamming_n == hamming(x1, x2)
            assert record.e12_4 == pytest.approx(float(split.e12_4), rel=1e-12)
            assert record.e12_6 == pytest.approx(float(split.e12_6), rel=1e-12)
            accepted_seen += 1
        else:
            assert not record.accepted
            assert record.rejection_reason == reason, idx
        if accepted_seen >= 8:
            break
    assert accepted_seen >= 5


def test_rejection_reasons_all_observed():
    reasons = set()
    for idx in range(400):
        record = run_trial(CONFIG, 15, idx)
        if not record.accepted:
            reasons.add(record.rejection_reason)
    assert {"unsat", "all-solutions-survive", "unmappable"} <= reasons


def test_trial_deterministic():
    a = run_trial(CONFIG, 15, 7)
    b = run_trial(CONFIG, 15, 7)
    assert a == b


def test_experiment_deterministic_across_workers(tmp_path):
    base = dict(n_values=(15, 20), alpha=0.62, samples_per_n=25, master_seed=5)
    res1 = run_experiment(ExperimentConfig(**base, worker_count=1))
    res2 = run_experiment(ExperimentConfig(**base, worker_count=2))
    assert res1.records == res2.records
    for name, writer, payload in (
        ("records.csv", write_records_csv, lambda r: r.records),
        ("stats.csv", write_stats_csv, lambda r: r.stats),
        ("fit.json", write_fit_json, lambda r: r.stats),
    ):
        p1, p2 = tmp_path / f"w1_{name}", tmp_path / f"w2_{name}"
        writer(p1, payload(res1), ExperimentConfig(**base, worker_count=1))
        writer(p2, payload(res2), ExperimentConfig(**base, worker_count=2))
        assert p1.read_bytes() == p2.read_bytes(), name


def test_experiment_aggregation_and_percentile_order():
    config = ExperimentConfig(
        n_values=(15, 25), alpha=0.62, samples_per_n=40, master_seed=9, worker_count=1
    )
    result = run_experiment(config)
    for s in result.stats.per_n:
        assert s.samples == 40
        assert s.p25_sq4 <= s.med_sq4 <= s.p75_sq4
        assert s.p25_sq6 <= s.med_sq6 <= s.p75_sq6
        assert s.attempts > s.samples
        total_rejects = (
            s.rejects_unsat
            + s.rejects_survive
            + s.rejects_degenerate
            + s.rejects_cap
            + s.rejects_unmappable
        )
        assert s.attempts == s.samples + total_rejects
        # rejection rate bounded away from 1
        assert s.samples / s.attempts > 0.01
    accepted = [r for r in result.records if r.accepted]
    assert all(r.hamming_n >= 1 for r in accepted)
    assert all(np.isfinite(r.e12_4) and np.isfinite(r.e12_6) for r in accepted)


def test_fit_through_origin_recovers_slope():
    xs = np.array([10.0, 20.0, 30.0, 40.0])
    fit = fit_through_origin(xs, 0.25 * xs)
    assert fit.slope == pytest.approx(0.25)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    noisy = fit_through_origin(xs, 0.25 * xs + np.array([0.1, -0.1, 0.05, -0.05]))
    assert noisy.slope == pytest.approx(0.25, abs=0.01)
    assert noisy.stderr > 0


def test_output_files(tmp_path):
    config = ExperimentConfig(
        n_values=(15,), alpha=0.62, samples_per_n=10, master_seed=4, worker_count=1
    )
    result = run_experiment(config)
    write_stats_csv(tmp_path / "stats.csv", result.stats, config)
    write_records_csv(tmp_path / "records.csv", result.records, config)
    write_fit_json(tmp_path / "fit.json", result.stats, config)

    stats_lines = (tmp_path / "stats.csv").read_text().splitlines()
    header_idx = next(i for i, l in enumerate(stats_lines) if not l.startswith("#"))
    assert stats_lines[header_idx] == STATS_COLUMNS
    assert stats_lines[0].startswith("# ec3lab")
    assert any("seed=4" in l for l in stats_lines if l.startswith("#"))

    rec_lines = (tmp_path / "records.csv").read_text().splitlines()
    header_idx = next(i for i, l in enumerate(rec_lines) if not l.startswith("#"))
    assert rec_lines[header_idx] == RECORD_COLUMNS

    fit = json.loads((tmp_path / "fit.json").read_text())
    for key in (
        "c4",
        "c4_stderr",
        "c6",
        "c6_stderr",
        "lambda_r",
        "lambda_c_by_percentile",
        "threshold_n16",
        "threshold_n1",
    ):
        assert key in fit
    assert set(fit["lambda_c_by_percentile"]) == {"mean", "p25", "p50", "p75"}
    assert "through_origin" in fit


def test_crossing_search_small():
    config = ExperimentConfig(
        n_values=(40,), alpha=0.62, samples_per_n=1, master_seed=21, worker_count=1
    )
    result = crossing_search(config, 40, max_accepted=30, lambda_max=1.0)
    assert result.accepted == 30
    for hit in result.hits:
        assert 0 < hit.lam_star <= 1.0
        diffs = [row[3] for row in hit.curve]
        before = [d for row, d in zip(hit.curve, diffs) if row[0] < hit.lam_star - 1e-6]
        after = [d for row, d in zip(hit.curve, diffs) if row[0] > hit.lam_star + 1e-6]
        assert before and after
        assert np.sign(before[0]) != np.sign(after[-1])
    # every hit corresponds to an accepted record with the crossing recorded
    by_index = {r.trial_index: r for r in result.records}
    for hit in result.hits:
        assert by_index[hit.trial_index].crossing_lam == pytest.approx(hit.lam_star)


def test_worker_env_override(monkeypatch):
    config = ExperimentConfig(n_values=(15,), samples_per_n=1, worker_count=7)
    monkeypatch.setenv("AQO_WORKERS", "2")
    assert config.resolved_workers() == 2
    monkeypatch.delenv("AQO_WORKERS")
    assert config.resolved_workers() == 7
