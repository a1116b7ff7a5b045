"""Acceptance gate: one test per criterion, each recorded in the terminal summary."""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from review_insight.cli import STAGES, run_stage
from review_insight.config import PipelineConfig, config_from_dict
from review_insight.mglda import MgldaParams, top_words, train
from review_insight.segment import UNASSIGNED, assign_sentence_topic
from review_insight.sentiment import ReviewTopicSentiment
from review_insight.svr import SvrModel, train_svr
from review_insight.synthetic import (
    generate_mglda_corpus,
    generate_restaurant_slice,
    greedy_topic_overlap,
    write_yelp_dump,
)
from review_insight.usermodel import build_correlation_matrix, build_user_vectors, sweep_thresholds, threshold_grid


def kkt_violations(model: SvrModel, tol: float = 1e-6) -> list[str]:
    problems = []
    if abs(float(model.dual_coefs.sum())) > tol:
        problems.append(f"sum of coefficients {model.dual_coefs.sum():.3g}")
    if (np.abs(model.dual_coefs) > model.C + tol).any():
        problems.append("coefficient outside [-C, C]")
    return problems


# --- 1 ------------------------------------------------------------------------

def test_sampler_conservation_every_sweep(criterion):
    rng = np.random.default_rng(11)
    V = 200
    docs = [
        [list(rng.integers(0, V, size=int(rng.integers(3, 12)))) for _ in range(int(rng.integers(2, 8)))]
        for _ in range(50)
    ]
    n_tokens = sum(len(s) for d in docs for s in d)
    checked = []

    def check(it, state):
        state.check_invariants()
        assert state.n_z_glo.sum() + state.n_z_loc.sum() == n_tokens
        checked.append(it)

    t0 = time.perf_counter()
    train(docs, MgldaParams(iterations=1000, seed=3), V=V, callback=check)
    elapsed = time.perf_counter() - t0
    ok = criterion(1)(len(checked) == 1000 and elapsed < 60.0,
                      f"{len(checked)} sweeps checked, {n_tokens} tokens, {elapsed:.1f}s (< 60s)")
    assert ok


# --- 2 ------------------------------------------------------------------------

def test_planted_topic_recovery(criterion):
    results = []
    for seed in range(5):
        corpus = generate_mglda_corpus(k_glo=2, k_loc=3, seed=seed)
        model = train(corpus.docs, MgldaParams(k_glo=2, k_loc=3, iterations=300, n_chains=8, seed=seed), V=corpus.V)
        overlap = greedy_topic_overlap(top_words(model, "loc", 10), corpus.local_support)
        results.append(min(overlap) >= 0.6)
    wins = sum(results)
    ok = criterion(2)(wins >= 4, f"all local topics overlap >= 0.6 for {wins}/5 seeds (need 4)")
    assert ok


# --- 3 ------------------------------------------------------------------------

def brute_force_topic(tokens, phi):
    if not tokens:
        return UNASSIGNED
    K, V = phi.shape
    best, best_score = None, None
    for k in range(K):
        score = 0.0
        for w in range(V):
            c = tokens.count(w)
            if c:
                score += phi[k, w] * c
        if best_score is None or score > best_score:
            best, best_score = k, score
    return best


def test_segmentation_oracle(criterion):
    rng = np.random.default_rng(5)
    agree = 0
    for i in range(1000):
        K = int(rng.integers(1, 6))
        V = int(rng.integers(1, 21))
        if i % 10 == 0:
            phi = np.full((K, V), 1.0 / V)  # all ties
        else:
            phi = rng.dirichlet(np.ones(V), size=K)
        tokens = [int(t) for t in rng.integers(0, V, size=int(rng.integers(0, 15)))]
        agree += assign_sentence_topic(tokens, phi) == brute_force_topic(tokens, phi)
    ok = criterion(3)(agree == 1000, f"{agree}/1000 instances match exhaustive enumeration")
    assert ok


# --- 4 ------------------------------------------------------------------------

def correlation_fixture(seed=2):
    """50 users with assorted review counts, topic coverage and constant vectors."""
    rng = np.random.default_rng(seed)
    rows = []
    for u in range(50):
        n = int(rng.integers(1, 12))
        kind = u % 5
        bids = sorted(rng.choice(40, size=n, replace=False))
        for b in bids:
            stars = 4.0 if kind == 1 else float(rng.integers(1, 6))
            ts = {}
            for k in range(4):
                if rng.random() < 0.75:
                    ts[k] = 0.25 if (kind == 2 and k == 0) else float(rng.uniform(-1, 1))
            rows.append(ReviewTopicSentiment(f"r{u}-{b}", f"u{u:02d}", f"b{b:02d}", stars, ts))
    return rows


def oracle_correlations(rows, min_reviews):
    users = sorted({r.user_id for r in rows})
    out = {}
    for u in users:
        mine = [r for r in rows if r.user_id == u]
        for k in range(4):
            xs, ys = [], []
            for r in sorted(mine, key=lambda r: r.business_id):
                if k in r.topic_sentiment:
                    xs.append(r.stars)
                    ys.append(r.topic_sentiment[k])
            if len(xs) < min_reviews:
                continue
            n = len(xs)
            mx = sum(xs) / n
            my = sum(ys) / n
            sxy = sxx = syy = 0.0
            for a, b in zip(xs, ys):
                sxy += (a - mx) * (b - my)
                sxx += (a - mx) ** 2
                syy += (b - my) ** 2
            if len(set(xs)) == 1 or len(set(ys)) == 1:
                continue
            out[(u, k)] = sxy / math.sqrt(sxx * syy)
    return out


def exclusion_counts(rows, min_reviews=5):
    short = constant = 0
    for uv in build_user_vectors(rows).values():
        for k in range(4):
            x, y = uv.aligned(k)
            if len(x) < min_reviews:
                short += 1
            elif len(set(x)) == 1 or len(set(y)) == 1:
                constant += 1
    return short, constant


def test_correlation_oracle(criterion):
    rows = correlation_fixture()
    short, constant = exclusion_counts(rows)
    assert short > 0 and constant > 0, "fixture must exercise both exclusions"
    expected = oracle_correlations(rows, 5)
    got = build_correlation_matrix(build_user_vectors(rows), min_reviews=5)
    same_keys = set(got.entries) == set(expected)
    max_err = max((abs(got.entries[k] - expected[k]) for k in expected if k in got.entries), default=0.0)
    n_users = len({r.user_id for r in rows})
    ok = criterion(4)(
        same_keys and max_err <= 1e-10 and n_users == 50,
        f"{len(expected)} entries over {n_users} users ({short} short, {constant} constant excluded), "
        f"identical exclusions={same_keys}, max |diff|={max_err:.1e}",
    )
    assert ok


# --- 5 ------------------------------------------------------------------------

def test_svr_sine(criterion):
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(0, 1, 50))
    model = train_svr(x[:, None], np.sin(2 * np.pi * x), gamma=10.0)
    grid = np.linspace(0, 1, 201)
    pred = model.decision_function(grid[:, None])
    err = float(np.sqrt(np.mean((pred - np.sin(2 * np.pi * grid)) ** 2)))
    problems = kkt_violations(model)
    ok = criterion(5)(err <= 0.15 and not problems and model.converged,
                      f"held-out RMSE {err:.4f} (<= 0.15), KKT {'ok' if not problems else problems}")
    assert ok


# --- 6 ------------------------------------------------------------------------

PLANTED_CONFIG = {
    "textprep": {"min_count": 2},
    "mglda": {"k_glo": 2, "k_loc": 4, "iterations": 300, "n_chains": 4},
    "usermodel": {"min_reviews": 5, "threshold": 0.4},
}


def planted_config(tmp: Path, seed: int) -> PipelineConfig:
    planted = generate_restaurant_slice(n_restaurants=30, n_users=80, seed=seed)
    write_yelp_dump(planted.corpus, tmp / "reviews.jsonl", tmp / "businesses.jsonl")
    return config_from_dict({
        **PLANTED_CONFIG,
        "seed": seed,
        "paths": {"reviews": str(tmp / "reviews.jsonl"), "businesses": str(tmp / "businesses.jsonl"),
                  "workdir": str(tmp / "work")},
    })


def test_planted_pipeline_beats_baselines(tmp_path, criterion):
    wins, lines, kkt = 0, [], []
    for seed in range(5):
        d = tmp_path / f"s{seed}"
        d.mkdir()
        cfg = planted_config(d, seed)
        run_stage("pipeline", cfg)
        rep = json.loads((d / "work" / "eval_report.json").read_text())
        kkt += kkt_violations(SvrModel.read_json(d / "work" / "svr_model.json"))
        m, b1, b2 = rep["rmse_model"], rep["rmse_baseline1"], rep["rmse_baseline2"]
        wins += m < b1 and m < b2
        lines.append(f"{m:.3f}/{b1:.3f}/{b2:.3f}")
    ok = criterion(6)(wins >= 4 and not kkt,
                      f"model beats both baselines for {wins}/5 seeds (model/b1/b2: {', '.join(lines)})")
    assert ok


# --- 7 ------------------------------------------------------------------------

def test_sweep_monotone(tmp_path, criterion):
    cfg = planted_config(tmp_path, 0)
    for stage in ("ingest", "prep", "train-topics", "segment", "sentiment", "correlate", "sweep"):
        run_stage(stage, cfg)
    rows = json.loads((tmp_path / "work" / "sweep.json").read_text())
    by_topic = {}
    for r in rows:
        by_topic.setdefault(r["topic"], []).append((r["threshold"], r["count"]))
    pipeline_ok = all(
        all(a[1] >= b[1] for a, b in zip(sorted(v), sorted(v)[1:])) for v in by_topic.values()
    )
    # and on the correlation oracle fixture over a fine grid
    C = build_correlation_matrix(build_user_vectors(correlation_fixture()), 5)
    grid = threshold_grid(-0.95, 1.0, 0.05)
    fine = {}
    for k, T, n in sweep_thresholds(C, grid):
        fine.setdefault(k, []).append(n)
    fixture_ok = all(all(a >= b for a, b in zip(v, v[1:])) for v in fine.values())
    ok = criterion(7)(pipeline_ok and fixture_ok,
                      f"non-increasing counts for {len(by_topic)} pipeline topics and {len(fine)} fixture topics")
    assert ok


# --- 8 ------------------------------------------------------------------------

def test_pipeline_determinism(tmp_path, criterion):
    cfg_a = planted_config(tmp_path, 1)
    cfg_b = config_from_dict({**cfg_a.to_dict(), "paths": {**cfg_a.to_dict()["paths"], "workdir": str(tmp_path / "other")}})
    run_stage("pipeline", cfg_a)
    run_stage("pipeline", cfg_b)
    names = [f for st in STAGES.values() for f in st.outputs]
    differ = [
        f for f in names
        if (tmp_path / "work" / f).read_bytes() != (tmp_path / "other" / f).read_bytes()
    ]
    for st in STAGES:
        a = json.loads((tmp_path / "work" / f"{st}.manifest.json").read_text())
        b = json.loads((tmp_path / "other" / f"{st}.manifest.json").read_text())
        a.pop("duration_seconds")
        b.pop("duration_seconds")
        if a != b:
            differ.append(f"{st}.manifest.json")
    ok = criterion(8)(not differ, f"{len(names)} artifacts and {len(STAGES)} manifests compared, differing: {differ or 'none'}")
    assert ok


# --- 9 ------------------------------------------------------------------------

GOLDEN = {
    "mglda": {"k_glo": 40, "k_loc": 15, "window": 2, "alpha_glo": 0.1, "alpha_loc": 0.1,
              "alpha_mix_glo": 0.1, "alpha_mix_loc": 0.1, "beta_glo": 0.1, "beta_loc": 0.1,
              "gamma": 0.1, "iterations": 1000},
    "usermodel": {"threshold": 0.4, "min_reviews": 5},
}


def test_default_config_golden(criterion):
    cfg = PipelineConfig().to_dict()
    mismatches = [
        f"{sec}.{k}" for sec, vals in GOLDEN.items() for k, v in vals.items() if cfg[sec][k] != v
    ]
    params = PipelineConfig().mglda_params()
    if params != MgldaParams():
        mismatches.append("mglda_params()")
    ok = criterion(9)(not mismatches, f"mismatched keys: {mismatches or 'none'}")
    assert ok
