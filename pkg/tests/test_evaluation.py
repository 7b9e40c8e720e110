import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hgsyntax.core import ALL_PATTERNS, VIOLATIONS, WORD_ORDERS, InputPattern, WordOrder, powers_of_two_weights, ranking_from_weights
from hgsyntax.corpus import from_pairs, generate_corpus, resample_corpus, table2_counts, upper_bound_predictor
from hgsyntax.evaluation import (
    accuracy,
    empirical_distributions,
    evaluate,
    ganging_analysis,
    kl_divergence,
    per_pattern_accuracy,
    render_hg_tableau,
    render_ot_tableau,
    scan_ganging,
    smoothed,
    tableau_render,
    uniform_weighted_kl,
    weighted_kl,
    ObservedDistribution,
)
from hgsyntax.inference import PatternDistribution, PredictionRegime as R
from hgsyntax.learners import LearnedModel, ModelKind, perceptron_train

TABLE2 = generate_corpus(table2_counts(), 0)
probs = st.lists(st.integers(0, 50), min_size=6, max_size=6).filter(lambda c: sum(c) > 0).map(
    lambda c: PatternDistribution.from_counts(c))


def test_reference_accuracies():
    assert accuracy(upper_bound_predictor(TABLE2), TABLE2) == Fraction(2013, 2955)
    svo = {p: WordOrder.SVO for p in ALL_PATTERNS}
    assert accuracy(svo, TABLE2) == Fraction(1477, 2955)
    det = from_pairs([(p, WordOrder(p.index % 6)) for p in ALL_PATTERNS])
    assert accuracy(upper_bound_predictor(det), det) == 1
    with pytest.raises(ValueError):
        accuracy(svo, from_pairs([]))


def test_stochastic_accuracy_is_seeded(run1_weights):
    m = LearnedModel(ModelKind.HG, weights=run1_weights)
    a = accuracy(m, TABLE2, R.NOISY_HG_SAMPLE, 3, noise_variance=4.0)
    assert a == accuracy(m, TABLE2, R.NOISY_HG_SAMPLE, 3, noise_variance=4.0)
    assert accuracy(m, TABLE2, R.NOISY_HG_SAMPLE, 3, noise_variance=0.0) == accuracy(m, TABLE2, R.HG_ML)


def test_per_pattern_accuracy_weights_back_to_total():
    pred = upper_bound_predictor(TABLE2)
    per = per_pattern_accuracy(pred, TABLE2)
    counts = TABLE2.counts()
    total = sum(acc * int(counts.row(p).sum()) for p, acc in per.items())
    assert total / len(TABLE2) == accuracy(pred, TABLE2)


def test_kl_basics():
    u = PatternDistribution.uniform()
    point = PatternDistribution(np.eye(6)[0], "analytic")
    assert kl_divergence(u, u) == 0.0
    assert math.isclose(kl_divergence(point, u), math.log2(6))
    sampled = PatternDistribution.from_counts([10, 0, 0, 0, 0, 0])
    assert kl_divergence(sampled, sampled) == 0.0
    assert math.isfinite(kl_divergence(u, sampled))
    assert math.isclose(smoothed(sampled).sum(), 1.0)
    assert smoothed(sampled)[1] == pytest.approx(1 / 20 / (1 + 6 / 20))


@given(probs, probs)
def test_kl_non_negative(p, q):
    d = kl_divergence(p, q)
    assert d >= 0
    if d == 0:
        assert np.array_equal(p.probabilities, q.probabilities) or \
            np.allclose(p.probabilities, smoothed(q))


def test_weighted_kl_ignores_zero_count_patterns():
    test = resample_corpus(table2_counts(), 500, 1)
    observed = empirical_distributions(test)
    u = {p: PatternDistribution.uniform() for p in ALL_PATTERNS}
    padded = dict(observed)
    missing = next(p for p in ALL_PATTERNS if p not in observed)
    padded[missing] = ObservedDistribution(PatternDistribution.uniform(), 0)
    assert weighted_kl(observed, u) == weighted_kl(padded, u)
    with pytest.raises(ValueError):
        weighted_kl({}, u)


def test_uniform_kl_on_full_table():
    assert abs(uniform_weighted_kl(table2_counts()) - 1.53) < 0.10


def test_ganging_run1(run1_weights, tft):
    r = ganging_analysis(run1_weights, tft, WordOrder.SOV, WordOrder.SVO)
    assert [d.name for d in r.discriminating_constraints] == ["F-R", "T-R", "O-R", "V-R"]
    assert [d.weight for d in r.discriminating_constraints] == [10.39, 9.36, 8.63, 3.40]
    assert r.ot_winner is WordOrder.SOV and r.hg_winner is WordOrder.SVO
    assert r.differing_sum == pytest.approx(4.20, abs=0.01)
    assert r.restricted_harmony[WordOrder.SOV] == pytest.approx(-4.20, abs=0.01)
    top, gang = r.gang()
    assert top.name == "F-R" and [d.name for d in gang] == ["T-R", "O-R"]
    assert "ganging-up" in r.verdict()


def test_identical_candidates(run1_weights, tft):
    r = ganging_analysis(run1_weights, tft, WordOrder.SVO, WordOrder.SVO)
    assert r.discriminating_constraints == [] and r.differing_sum == 0 and not r.ganging_event
    assert "no ganging-up event" in r.verdict()


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(12))))
def test_powers_of_two_never_gang(r):
    w = powers_of_two_weights(r)
    assert scan_ganging(w) == []
    for p in ALL_PATTERNS[::4]:
        for a in WORD_ORDERS:
            for b in WORD_ORDERS:
                assert not ganging_analysis(w, p, a, b).ganging_event


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=12, max_size=12).map(np.array))
def test_ganging_events_are_consistent(w):
    for p in ALL_PATTERNS:
        for a in WORD_ORDERS:
            for b in WORD_ORDERS:
                if a >= b:
                    continue
                r = ganging_analysis(w, p, a, b)
                h = {o: float(np.dot(w, VIOLATIONS[p.index, o])) for o in (a, b)}
                assert r.differing_sum == pytest.approx((h[r.hg_winner] - h[a if r.hg_winner is b else b]) / 2)
                if r.ganging_event:
                    top, gang = r.gang()
                    ot_side = r.candidates.index(r.ot_winner)
                    assert top.favours() == ot_side
                    assert sum(d.weight for d in gang) >= top.weight


def test_ot_tableau(gla_ranking, tft):
    text = render_ot_tableau(gla_ranking, tft)
    lines = text.splitlines()
    header = lines[1].split("|")
    col = [h.strip() for h in header].index("F-R")
    rows = [ln.split("|") for ln in lines[3:]]
    assert sum(r[col].strip() == "x!" for r in rows) == 4
    winner = [r[0] for r in rows if r[0].startswith("->")]
    assert winner == ["-> SOV "]
    assert text == render_ot_tableau(gla_ranking, tft)
    assert tableau_render(gla_ranking, tft) == text


def test_single_candidate_tableau(gla_ranking, tft):
    assert "-> OVS" in render_ot_tableau(gla_ranking, tft, [WordOrder.OVS])
    assert "-> OVS" in render_hg_tableau(np.ones(12), tft, [WordOrder.OVS])


def test_hg_tableau_pair(run1_weights, tft):
    text = tableau_render(run1_weights, tft, [WordOrder.SOV, WordOrder.SVO], mode="hg")
    assert "-> SVO" in text and "SVO over SOV: +4.20" in text
    with pytest.raises(ValueError):
        tableau_render(run1_weights, tft, mode="lp")


def test_report_formats():
    model = perceptron_train(TABLE2)
    test = resample_corpus(table2_counts(), 300, 2)
    rep = evaluate(model, test, distributions=True, samples=100, rng_seed=1, baselines_from=TABLE2)
    assert 0 <= rep.accuracy <= 1 and rep.kl_weighted >= 0
    assert set(rep.baselines) == {"always-SVO", "upper-bound"}
    rows = [json.loads(ln) for ln in rep.to_json_lines().splitlines()]
    assert rows[0]["record"] == "summary" and rows[0]["metadata"]["samples"] == 100
    assert "smoothing" in rows[0]["metadata"]
    csv = rep.to_csv().splitlines()
    assert csv[0] == "pattern,n,accuracy,kl_bits"
    assert sum(int(r.split(",")[1]) for r in csv[1:] if r.split(",")[0] not in ("ALL", "always-SVO", "upper-bound")) == 300
    assert "weighted KL" in rep.to_text()
    again = evaluate(model, test, distributions=True, samples=100, rng_seed=1, baselines_from=TABLE2)
    assert again.to_csv() == rep.to_csv()
