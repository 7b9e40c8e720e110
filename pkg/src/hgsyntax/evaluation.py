"""Scoring: accuracy, KL divergence in bits, ganging-up analysis and tableaux.

Also hosts the seeded reproduction protocol shared by the ``repro`` command
and the acceptance tests: train on the regenerated count table, test on a
multinomial resample of it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import (
    ALL_PATTERNS,
    CONSTRAINT_NAMES,
    N_CONSTRAINTS,
    VIOLATIONS,
    WORD_ORDERS,
    InputPattern,
    WordOrder,
    candidates,
    hg_winner,
    ot_winner,
    ranking_from_weights,
)
from .corpus import (
    Corpus,
    PatternCounts,
    baseline_accuracy,
    generate_corpus,
    resample_corpus,
    table2_counts,
    upper_bound_accuracy,
    upper_bound_predictor,
)
from .inference import (
    DEFAULT_NOISE_VARIANCE,
    DEFAULT_SAMPLES,
    PatternDistribution,
    PredictionRegime,
    _noise_scale,
    _rank_embedding,
    check_compatible,
    default_regime,
    model_spreading,
    predict,
    predict_all_distributions,
    sampling_regime,
)
from .learners import (
    GlaConfig,
    LearnedModel,
    MaxEntConfig,
    ModelKind,
    PerceptronConfig,
    PredictionMode,
    gla_train,
    log_softmax_scores,
    maxent_train,
    perceptron_train,
)

Predictor = Mapping[InputPattern, WordOrder]


# -- accuracy -----------------------------------------------------------------

def _sentence_predictions(model: LearnedModel, corpus: Corpus, regime: PredictionRegime,
                          rng_seed: int, noise_variance: float, spreading: float | None) -> np.ndarray:
    pats = corpus.pattern_indices()
    if regime.stochastic:
        # one fresh noise draw per test sentence
        scale = _noise_scale(model, regime, noise_variance, spreading)
        rng = np.random.default_rng(rng_seed)
        noisy = model.weights[None, :] + scale * rng.standard_normal((len(corpus), N_CONSTRAINTS))
        if regime is PredictionRegime.SOT_SAMPLE:
            noisy = _rank_embedding(noisy)
        scores = np.einsum("noj,nj->no", VIOLATIONS[pats].astype(float), noisy)
        return np.argmax(scores, axis=1)
    if regime is PredictionRegime.MAXENT_DISTRIBUTION:
        probs = np.exp(log_softmax_scores(model.weights))[pats]
        u = np.random.default_rng(rng_seed).random(len(corpus))
        cum = np.cumsum(probs, axis=1)
        return np.minimum((u[:, None] > cum).sum(axis=1), len(WORD_ORDERS) - 1)
    table = np.array([int(predict(model, p, regime)) for p in ALL_PATTERNS])
    return table[pats]


def _hits(model: LearnedModel | Predictor, corpus: Corpus, regime: PredictionRegime | None,
          rng_seed: int, noise_variance: float, spreading: float | None) -> np.ndarray:
    if not len(corpus):
        raise ValueError("accuracy of an empty corpus is undefined")
    if isinstance(model, LearnedModel):
        regime = regime or default_regime(model)
        check_compatible(model, regime)
        pred = _sentence_predictions(model, corpus, regime, rng_seed, noise_variance, spreading)
    else:
        table = np.array([int(model[p]) for p in ALL_PATTERNS])
        pred = table[corpus.pattern_indices()]
    return pred == corpus.order_indices()


def accuracy(model: LearnedModel | Predictor, corpus: Corpus, regime: PredictionRegime | None = None,
             rng_seed: int = 0, *, noise_variance: float = DEFAULT_NOISE_VARIANCE,
             spreading: float | None = None) -> Fraction:
    """Fraction of ``corpus`` whose observed order is predicted.

    ``model`` is either a learned model (scored under ``regime``) or a plain
    pattern-to-order mapping such as the upper-bound predictor.
    """
    hits = _hits(model, corpus, regime, rng_seed, noise_variance, spreading)
    return Fraction(int(hits.sum()), len(corpus))


def per_pattern_accuracy(model: LearnedModel | Predictor, corpus: Corpus,
                         regime: PredictionRegime | None = None, rng_seed: int = 0,
                         **kwargs) -> dict[InputPattern, Fraction]:
    hits = _hits(model, corpus, regime, rng_seed, kwargs.get("noise_variance", DEFAULT_NOISE_VARIANCE),
                 kwargs.get("spreading"))
    pats = corpus.pattern_indices()
    out = {}
    for p in ALL_PATTERNS:
        mask = pats == p.index
        if mask.any():
            out[p] = Fraction(int(hits[mask].sum()), int(mask.sum()))
    return out


# -- KL divergence ------------------------------------------------------------

def smoothed(dist: PatternDistribution, default_samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Add-epsilon smoothing of a non-analytic distribution, epsilon = 1/(2n).

    ``n`` is the distribution's sample count, or ``default_samples`` for
    deterministic point predictions. Analytic distributions pass through.
    """
    q = dist.probabilities
    if dist.support_note == "analytic":
        return q
    n = dist.samples or default_samples
    q = q + 1.0 / (2 * n)
    return q / q.sum()


def kl_divergence(true_dist: PatternDistribution, predicted: PatternDistribution) -> float:
    """D(true || predicted) in bits, after smoothing the prediction."""
    p = true_dist.probabilities
    if np.array_equal(p, predicted.probabilities):
        return 0.0
    q = smoothed(predicted)
    support = p > 0
    if (q[support] == 0).any():
        return math.inf
    return max(0.0, float(np.sum(p[support] * np.log2(p[support] / q[support]))))


@dataclass(frozen=True)
class ObservedDistribution:
    distribution: PatternDistribution
    count: int


def empirical_distributions(corpus: Corpus | PatternCounts) -> dict[InputPattern, ObservedDistribution]:
    """Per-pattern observed order frequencies, for patterns that occur."""
    counts = corpus if isinstance(corpus, PatternCounts) else corpus.counts()
    out = {}
    for p in ALL_PATTERNS:
        row = counts.row(p)
        if row.sum() > 0:
            out[p] = ObservedDistribution(PatternDistribution.from_counts(row), int(row.sum()))
    return out


def per_pattern_kl(true: Mapping[InputPattern, ObservedDistribution],
                   predicted: Mapping[InputPattern, PatternDistribution]) -> dict[InputPattern, float]:
    return {p: kl_divergence(obs.distribution, predicted[p]) for p, obs in true.items() if obs.count > 0}


def weighted_kl(true: Mapping[InputPattern, ObservedDistribution],
                predicted: Mapping[InputPattern, PatternDistribution]) -> float:
    """Count-weighted mean of the per-pattern divergences."""
    total = sum(obs.count for obs in true.values())
    if total == 0:
        raise ValueError("no observed sentences to weight by")
    per = per_pattern_kl(true, predicted)
    return sum(true[p].count * kl for p, kl in per.items()) / total


def uniform_weighted_kl(test: Corpus | PatternCounts) -> float:
    uniform = PatternDistribution.uniform()
    return weighted_kl(empirical_distributions(test), {p: uniform for p in ALL_PATTERNS})


# -- ganging-up analysis ------------------------------------------------------

@dataclass(frozen=True)
class DiscriminatingConstraint:
    name: str
    weight: float
    values: tuple[int, int]  # attribute value for candidate a, candidate b

    def favours(self) -> int:
        """0 if the constraint prefers candidate a, 1 if b."""
        return 0 if self.values[0] > self.values[1] else 1


@dataclass
class GangingReport:
    input: InputPattern
    candidates: tuple[WordOrder, WordOrder]
    ot_winner: WordOrder
    hg_winner: WordOrder
    discriminating_constraints: list[DiscriminatingConstraint]
    restricted_harmony: dict[WordOrder, float]
    differing_sum: float

    @property
    def ganging_event(self) -> bool:
        return self.ot_winner is not self.hg_winner

    def gang(self) -> tuple[DiscriminatingConstraint | None, list[DiscriminatingConstraint]]:
        """The top-weighted discriminating constraint and the constraints
        that outvote it, when this is a ganging-up event."""
        if not self.ganging_event:
            return None, []
        top = max(self.discriminating_constraints, key=lambda d: d.weight)
        hg_side = self.candidates.index(self.hg_winner)
        return top, [d for d in self.discriminating_constraints if d.favours() == hg_side]

    def verdict(self) -> str:
        a, b = (o.name for o in self.candidates)
        if not self.ganging_event:
            return f"no ganging-up event between {a} and {b}: OT and HG both choose {self.hg_winner.name}"
        top, gang = self.gang()
        names = ", ".join(d.name for d in gang)
        return (f"ganging-up: {{{names}}} outweigh {top.name} ({top.weight:.2f}); "
                f"OT winner {self.ot_winner.name}, HG winner {self.hg_winner.name}, "
                f"differing sum {self.differing_sum:+.2f}")


def ganging_analysis(weights: np.ndarray, pattern: InputPattern, candidate_a: WordOrder,
                     candidate_b: WordOrder) -> GangingReport:
    """Compare two candidates constraint by constraint.

    ``restricted_harmony`` is each candidate's weighted attribute sum over
    the discriminating constraints; ``differing_sum`` is that sum for the
    pairwise HG winner, i.e. its margin counted once per constraint.
    """
    w = np.asarray(weights, dtype=float)
    table = candidates(pattern)
    fa, fb = table[candidate_a], table[candidate_b]
    ranking = ranking_from_weights(w)
    disc = [
        DiscriminatingConstraint(CONSTRAINT_NAMES[j], float(w[j]), (int(fa[j]), int(fb[j])))
        for j in ranking
        if fa[j] != fb[j]
    ]
    restricted = {
        candidate_a: float(sum(d.weight * d.values[0] for d in disc)),
        candidate_b: float(sum(d.weight * d.values[1] for d in disc)),
    }
    pair = sorted({candidate_a, candidate_b})
    ot = ot_winner(ranking, pattern, pair)
    # shared cells cancel; scoring only the differing ones avoids float absorption
    hg = max(pair, key=lambda o: (restricted[o], -int(o)))
    return GangingReport(
        input=pattern,
        candidates=(candidate_a, candidate_b),
        ot_winner=ot,
        hg_winner=hg,
        discriminating_constraints=disc,
        restricted_harmony=restricted,
        differing_sum=restricted[hg] if disc else 0.0,
    )


def scan_ganging(weights: np.ndarray) -> list[GangingReport]:
    """Reports for every pattern whose full-candidate OT and HG winners differ."""
    w = np.asarray(weights, dtype=float)
    ranking = ranking_from_weights(w)
    out = []
    for p in ALL_PATTERNS:
        ot, hg = ot_winner(ranking, p), hg_winner(w, p)
        if ot is not hg:
            out.append(ganging_analysis(w, p, ot, hg))
    return out


# -- tableaux -----------------------------------------------------------------

def _grid(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(widths[i]) if i == 0 else c.center(widths[i]) for i, c in enumerate(r))
    rule = "-+-".join("-" * n for n in widths)
    return "\n".join([fmt(header), rule, *(fmt(r) for r in rows)]) + "\n"


def render_ot_tableau(ranking: Sequence[int], pattern: InputPattern,
                      orders: Sequence[WordOrder] = WORD_ORDERS) -> str:
    """Violations marked ``x``; ``x!`` is the fatal one; ``->`` marks the winner.

    Vacuous constraints show ``.``.
    """
    table = candidates(pattern)
    orders = sorted(orders)
    winner = ot_winner(ranking, pattern, orders)
    fatal: dict[WordOrder, int] = {}
    alive = list(orders)
    for j in ranking:
        best = max(table[o, j] for o in alive)
        for o in alive:
            if table[o, j] < best:
                fatal[o] = j
        alive = [o for o in alive if table[o, j] == best]
    rows = []
    for o in orders:
        cells = []
        for j in ranking:
            v = table[o, j]
            cell = "." if v == 0 else ("x" if v < 0 else "")
            if fatal.get(o) == j:
                cell += "!"
            cells.append(cell)
        rows.append([("-> " if o is winner else "   ") + o.name, *cells])
    title = f"OT tableau for {pattern.label}\n"
    return title + _grid(["", *(CONSTRAINT_NAMES[j] for j in ranking)], rows)


def render_hg_tableau(weights: np.ndarray, pattern: InputPattern,
                      orders: Sequence[WordOrder] = WORD_ORDERS) -> str:
    """Attribute signs per constraint (columns by descending weight) and harmony."""
    w = np.asarray(weights, dtype=float)
    table = candidates(pattern)
    orders = sorted(orders)
    cols = ranking_from_weights(w)
    harm = {o: float(table[o] @ w) for o in orders}
    winner = max(orders, key=lambda o: (harm[o], -int(o)))
    rows = [
        [("-> " if o is winner else "   ") + o.name, *("+-0"[[1, -1, 0].index(int(table[o, j]))] for j in cols),
         f"{harm[o]:.2f}"]
        for o in orders
    ]
    weight_row = ["   weight", *(f"{w[j]:.2f}" for j in cols), ""]
    body = _grid(["", *(CONSTRAINT_NAMES[j] for j in cols), "H"], [weight_row, *rows])
    out = f"HG tableau for {pattern.label}\n" + body
    if len(orders) == 2:
        a, b = orders
        loser = b if winner is a else a
        # each discriminating constraint differs by 2, so halve the gap
        out += f"sum of differing elements, {winner.name} over {loser.name}: {(harm[winner] - harm[loser]) / 2:+.2f}\n"
    return out


def tableau_render(grammar: np.ndarray | Sequence[int], pattern: InputPattern,
                   orders: Sequence[WordOrder] = WORD_ORDERS, mode: str = "ot") -> str:
    """``mode='ot'``: ``grammar`` is a ranking or weights (ranked by value).
    ``mode='hg'``: ``grammar`` is a weight vector."""
    if mode == "hg":
        return render_hg_tableau(np.asarray(grammar, dtype=float), pattern, orders)
    if mode != "ot":
        raise ValueError(f"unknown tableau mode {mode!r}")
    g = list(grammar)
    is_ranking = sorted(g) == list(range(N_CONSTRAINTS)) and all(float(x).is_integer() for x in g) \
        and not isinstance(grammar, np.ndarray)
    ranking = [int(x) for x in g] if is_ranking else ranking_from_weights(np.asarray(g, dtype=float))
    return render_ot_tableau(ranking, pattern, orders)


# -- reports ------------------------------------------------------------------

@dataclass
class EvaluationReport:
    accuracy: Fraction
    per_pattern_accuracy: dict[InputPattern, Fraction]
    kl_weighted: float | None = None
    per_pattern_kl: dict[InputPattern, float] = field(default_factory=dict)
    run_metadata: dict[str, Any] = field(default_factory=dict)
    baselines: dict[str, Fraction] = field(default_factory=dict)
    pattern_counts: dict[InputPattern, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 <= self.accuracy <= 1:
            raise ValueError("accuracy must lie in [0, 1]")
        if self.kl_weighted is not None and self.kl_weighted < 0:
            raise ValueError("KL must be non-negative")

    def to_text(self) -> str:
        lines = [f"{'model':<24}{'accuracy':>10}"]
        lines.append(f"{str(self.run_metadata.get('model', 'model')):<24}{float(self.accuracy) * 100:>9.1f}%")
        for name, acc in self.baselines.items():
            lines.append(f"{name:<24}{float(acc) * 100:>9.1f}%")
        if self.kl_weighted is not None:
            lines.append(f"weighted KL (bits): {self.kl_weighted:.4f}")
            lines.append(f"smoothing: {self.run_metadata.get('smoothing', '')}")
        for key in sorted(self.run_metadata):
            lines.append(f"# {key}={self.run_metadata[key]}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pattern", "n", "accuracy", "kl_bits"])
        for p, acc in self.per_pattern_accuracy.items():
            kl = self.per_pattern_kl.get(p)
            writer.writerow([str(p).replace(" ", ""), self.pattern_counts.get(p, ""), f"{float(acc):.6f}",
                             "" if kl is None else f"{kl:.6f}"])
        writer.writerow(["ALL", self.run_metadata.get("test_size", ""), f"{float(self.accuracy):.6f}",
                         "" if self.kl_weighted is None else f"{self.kl_weighted:.6f}"])
        for name, acc in self.baselines.items():
            writer.writerow([name, "", f"{float(acc):.6f}", ""])
        return buf.getvalue()

    def to_json_lines(self) -> str:
        rows = [{"record": "summary", "accuracy": float(self.accuracy), "kl_weighted": self.kl_weighted,
                 "metadata": self.run_metadata, "baselines": {k: float(v) for k, v in self.baselines.items()}}]
        for p, acc in self.per_pattern_accuracy.items():
            rows.append({"record": "pattern", "pattern": str(p).replace(" ", ""), "accuracy": float(acc),
                         "kl_bits": self.per_pattern_kl.get(p)})
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


SMOOTHING_NOTE = "add-eps on sampled or point predictions, eps=1/(2*samples)"


def evaluate(model: LearnedModel, test: Corpus, regime: PredictionRegime | None = None, *,
             distributions: bool = False, samples: int = DEFAULT_SAMPLES, rng_seed: int = 0,
             noise_variance: float = DEFAULT_NOISE_VARIANCE, spreading: float | None = None,
             baselines_from: Corpus | None = None) -> EvaluationReport:
    regime = regime or default_regime(model)
    kw = dict(noise_variance=noise_variance, spreading=spreading)
    acc = accuracy(model, test, regime, rng_seed, **kw)
    per = per_pattern_accuracy(model, test, regime, rng_seed, **kw)
    counts = test.counts()
    meta: dict[str, Any] = {
        "model": model.metadata.get("learner", model.kind.value),
        "regime": regime.value,
        "seed": rng_seed,
        "test_size": len(test),
    }
    if regime is PredictionRegime.NOISY_HG_SAMPLE:
        meta["noise_variance"] = noise_variance
    elif regime is PredictionRegime.SOT_SAMPLE:
        meta["spreading"] = model_spreading(model, spreading)
    report = EvaluationReport(acc, per, run_metadata=meta,
                              pattern_counts={p: int(counts.row(p).sum()) for p in per})
    if distributions:
        dregime = sampling_regime(model)
        preds = predict_all_distributions(model, dregime, samples, rng_seed, **kw)
        observed = empirical_distributions(test)
        report.per_pattern_kl = per_pattern_kl(observed, preds)
        report.kl_weighted = weighted_kl(observed, preds)
        meta.update({"distribution_regime": dregime.value, "samples": samples, "smoothing": SMOOTHING_NOTE})
        if dregime is PredictionRegime.NOISY_HG_SAMPLE:
            meta["noise_variance"] = noise_variance
    if baselines_from is not None:
        report.baselines = {
            "always-SVO": baseline_accuracy(test),
            "upper-bound": upper_bound_accuracy(upper_bound_predictor(baselines_from), test),
        }
    return report


# -- reproduction protocol ----------------------------------------------------

@dataclass
class ProtocolConfig:
    test_size: int = 1000
    test_seed_offset: int = 1000
    samples: int = DEFAULT_SAMPLES
    noise_variance: float = DEFAULT_NOISE_VARIANCE
    perceptron_epochs: int = 10
    variation_epochs: int = 50
    gla_epochs: int = 50
    perceptron: PerceptronConfig = field(default_factory=PerceptronConfig)
    gla: GlaConfig = field(default_factory=GlaConfig)
    maxent: MaxEntConfig = field(default_factory=MaxEntConfig)


@dataclass
class ProtocolResult:
    seed: int
    metrics: dict[str, float]
    distributions: dict[str, dict[InputPattern, PatternDistribution]]
    models: dict[str, LearnedModel]


def run_protocol(seed: int, config: ProtocolConfig = ProtocolConfig(),
                 counts: PatternCounts | None = None) -> ProtocolResult:
    """One seed set of the reproduction protocol.

    Training corpus: the count table shuffled with ``seed``. Test corpus: a
    ``test_size`` multinomial resample with seed ``seed + test_seed_offset``.
    Learner initialisation and all sampling use ``seed`` as well.
    """
    counts = counts if counts is not None else table2_counts()
    train = generate_corpus(counts, seed)
    test = resample_corpus(counts, config.test_size, seed + config.test_seed_offset)
    observed = empirical_distributions(test)
    m: dict[str, float] = {}

    perc = perceptron_train(train, replace(config.perceptron, epochs=config.perceptron_epochs, init_seed=seed))
    perc_var = perceptron_train(train, replace(config.perceptron, epochs=config.variation_epochs, init_seed=seed))
    gla_sot = gla_train(train, replace(config.gla, epochs=config.gla_epochs, init_seed=seed,
                                     train_prediction=PredictionMode.SOT))
    gla_ml = gla_train(train, replace(config.gla, epochs=config.gla_epochs, init_seed=seed,
                                    train_prediction=PredictionMode.ML))
    maxent = maxent_train(train, config.maxent)

    m["baseline"] = float(baseline_accuracy(test))
    m["upper_bound"] = float(upper_bound_accuracy(upper_bound_predictor(train), test))
    m["perceptron"] = float(accuracy(perc, test, PredictionRegime.HG_ML))
    m["maxent"] = float(accuracy(maxent, test, PredictionRegime.MAXENT_ARGMAX))
    for tag, model in (("sot", gla_sot), ("ml", gla_ml)):
        m[f"gla_{tag}_train_ml_test"] = float(accuracy(model, test, PredictionRegime.OT_ML))
        m[f"gla_{tag}_train_sot_test"] = float(accuracy(model, test, PredictionRegime.SOT_SAMPLE, seed))
    m["gla"] = m["gla_sot_train_ml_test"]

    dists = {
        "perceptron": predict_all_distributions(perc_var, PredictionRegime.NOISY_HG_SAMPLE, config.samples, seed,
                                                noise_variance=config.noise_variance),
        "gla": predict_all_distributions(gla_sot, PredictionRegime.SOT_SAMPLE, config.samples, seed),
        "maxent": predict_all_distributions(maxent, PredictionRegime.MAXENT_DISTRIBUTION),
    }
    for name, d in dists.items():
        m[f"kl_{name}"] = weighted_kl(observed, d)
    m["kl_uniform"] = uniform_weighted_kl(test)
    models = {"perceptron": perc, "perceptron_variation": perc_var, "gla": gla_sot, "gla_ml": gla_ml,
              "maxent": maxent}
    return ProtocolResult(seed, m, dists, models)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), std


def run_protocol_many(seeds: Sequence[int], config: ProtocolConfig = ProtocolConfig(),
                      progress: Callable[[int], None] | None = None) -> list[ProtocolResult]:
    out = []
    for s in seeds:
        out.append(run_protocol(s, config))
        if progress:
            progress(s)
    return out
