"""Prediction regimes over learned models.

Deterministic regimes pick one order per input; the sampling regimes perturb
the weights with Gaussian noise before each prediction and are turned into
distributions by repeated sampling.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (
    ALL_PATTERNS,
    N_CONSTRAINTS,
    VIOLATIONS,
    WORD_ORDERS,
    InputPattern,
    WordOrder,
    hg_winner,
    ot_winner,
    ranking_from_weights,
)
from .learners import LearnedModel, ModelKind, log_softmax_scores, strata_predict

DEFAULT_NOISE_VARIANCE = 0.001
DEFAULT_SAMPLES = 1000


class PredictionRegime(enum.Enum):
    HG_ML = "hg-ml"
    OT_ML = "ot-ml"
    SOT_SAMPLE = "sot-sample"
    NOISY_HG_SAMPLE = "noisyhg-sample"
    MAXENT_ARGMAX = "maxent-argmax"
    MAXENT_DISTRIBUTION = "maxent-distribution"

    @property
    def stochastic(self) -> bool:
        return self in (PredictionRegime.SOT_SAMPLE, PredictionRegime.NOISY_HG_SAMPLE)


class IncompatibleRegimeError(ValueError):
    pass


_WEIGHTED = {ModelKind.HG, ModelKind.SOT, ModelKind.MAXENT}


def check_compatible(model: LearnedModel, regime: PredictionRegime) -> None:
    if regime is PredictionRegime.OT_ML:
        return
    if model.kind not in _WEIGHTED:
        raise IncompatibleRegimeError(f"regime {regime.value} needs a weighted model, got {model.kind.value}")
    if regime in (PredictionRegime.MAXENT_ARGMAX, PredictionRegime.MAXENT_DISTRIBUTION) and model.kind is not ModelKind.MAXENT:
        raise IncompatibleRegimeError(f"regime {regime.value} needs a MaxEnt model, got {model.kind.value}")


def default_regime(model: LearnedModel) -> PredictionRegime:
    return {
        ModelKind.HG: PredictionRegime.HG_ML,
        ModelKind.SOT: PredictionRegime.OT_ML,
        ModelKind.OT_STRATA: PredictionRegime.OT_ML,
        ModelKind.MAXENT: PredictionRegime.MAXENT_ARGMAX,
    }[model.kind]


def sampling_regime(model: LearnedModel) -> PredictionRegime:
    """The distribution-producing regime natural to each model kind."""
    return {
        ModelKind.HG: PredictionRegime.NOISY_HG_SAMPLE,
        ModelKind.SOT: PredictionRegime.SOT_SAMPLE,
        ModelKind.MAXENT: PredictionRegime.MAXENT_DISTRIBUTION,
    }[model.kind]


def model_spreading(model: LearnedModel, spreading: float | None = None) -> float:
    if spreading is not None:
        return spreading
    return float(model.metadata.get("spreading", 2.0))


def _noise_scale(model: LearnedModel, regime: PredictionRegime,
                 noise_variance: float, spreading: float | None) -> float:
    if regime is PredictionRegime.SOT_SAMPLE:
        return model_spreading(model, spreading)
    if noise_variance < 0:
        raise ValueError("noise variance must be non-negative")
    return float(np.sqrt(noise_variance))


def _rank_embedding(values: np.ndarray) -> np.ndarray:
    """Rows of ranking values -> powers-of-two weights with the same ranking.

    HG argmax under these weights equals the OT winner, which lets sampled
    rankings be evaluated in one matrix product.
    """
    n = values.shape[-1]
    # stable sort on -values gives the descending order with index tie-break
    order = np.argsort(-values, axis=-1, kind="stable")
    pos = np.empty_like(order)
    np.put_along_axis(pos, order, np.arange(n)[None, :].repeat(values.shape[0], axis=0), axis=-1)
    return np.ldexp(1.0, (n - 1) - pos)


def predict(model: LearnedModel, pattern: InputPattern, regime: PredictionRegime | None = None,
            rng_seed: int | None = None, *, noise_variance: float = DEFAULT_NOISE_VARIANCE,
            spreading: float | None = None) -> WordOrder:
    regime = regime or default_regime(model)
    check_compatible(model, regime)
    if regime is PredictionRegime.OT_ML:
        if model.kind is ModelKind.OT_STRATA:
            return WordOrder(strata_predict(model.strata, VIOLATIONS[pattern.index]))
        return ot_winner(ranking_from_weights(model.weights), pattern)
    if regime in (PredictionRegime.HG_ML, PredictionRegime.MAXENT_ARGMAX, PredictionRegime.MAXENT_DISTRIBUTION):
        if regime is PredictionRegime.MAXENT_DISTRIBUTION:
            probs = np.exp(log_softmax_scores(model.weights, VIOLATIONS[pattern.index]))
            rng = np.random.default_rng(rng_seed)
            return WordOrder(int(rng.choice(len(WORD_ORDERS), p=probs / probs.sum())))
        return hg_winner(model.weights, pattern)
    if rng_seed is None:
        raise ValueError(f"regime {regime.value} needs an rng seed")
    scale = _noise_scale(model, regime, noise_variance, spreading)
    noisy = model.weights + scale * np.random.default_rng(rng_seed).standard_normal(N_CONSTRAINTS)
    if regime is PredictionRegime.SOT_SAMPLE:
        return ot_winner(ranking_from_weights(noisy), pattern)
    return hg_winner(noisy, pattern)


def predict_all(model: LearnedModel, regime: PredictionRegime | None = None) -> dict[InputPattern, WordOrder]:
    """Deterministic predictions for all 27 patterns."""
    regime = regime or default_regime(model)
    if regime.stochastic or regime is PredictionRegime.MAXENT_DISTRIBUTION:
        raise ValueError("predict_all is for deterministic regimes")
    return {p: predict(model, p, regime) for p in ALL_PATTERNS}


@dataclass
class PatternDistribution:
    probabilities: np.ndarray
    support_note: str = "analytic"

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(WORD_ORDERS),):
            raise ValueError(f"distribution needs {len(WORD_ORDERS)} entries")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a probability distribution: {p}")
        self.probabilities = p

    def __getitem__(self, order: WordOrder) -> float:
        return float(self.probabilities[order])

    @property
    def mode(self) -> WordOrder:
        return WordOrder(int(np.argmax(self.probabilities)))

    @property
    def samples(self) -> int | None:
        return int(self.support_note) if self.support_note.isdigit() else None

    @classmethod
    def from_counts(cls, counts, note: str | None = None) -> "PatternDistribution":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise ValueError("cannot normalise an all-zero count vector")
        return cls(counts / total, note if note is not None else str(int(total)))

    @classmethod
    def uniform(cls) -> "PatternDistribution":
        return cls(np.full(len(WORD_ORDERS), 1.0 / len(WORD_ORDERS)), "analytic")


def sample_counts(model: LearnedModel, pattern: InputPattern, regime: PredictionRegime,
                  samples: int, rng_seed: int, *, noise_variance: float = DEFAULT_NOISE_VARIANCE,
                  spreading: float | None = None) -> np.ndarray:
    """Integer counts of sampled winners for one pattern.

    The noise stream is keyed on (seed, pattern), so results do not depend on
    which other patterns are sampled or in what order.
    """
    check_compatible(model, regime)
    if not regime.stochastic:
        raise ValueError(f"regime {regime.value} is not a sampling regime")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    scale = _noise_scale(model, regime, noise_variance, spreading)
    rng = np.random.default_rng([rng_seed, pattern.index])
    noisy = model.weights[None, :] + scale * rng.standard_normal((samples, N_CONSTRAINTS))
    if regime is PredictionRegime.SOT_SAMPLE:
        noisy = _rank_embedding(noisy)
    winners = np.argmax(noisy @ VIOLATIONS[pattern.index].T.astype(float), axis=1)
    return np.bincount(winners, minlength=len(WORD_ORDERS))


def predict_distribution(model: LearnedModel, pattern: InputPattern, regime: PredictionRegime | None = None,
                         samples: int = DEFAULT_SAMPLES, rng_seed: int = 0, *,
                         noise_variance: float = DEFAULT_NOISE_VARIANCE,
                         spreading: float | None = None) -> PatternDistribution:
    regime = regime or sampling_regime(model)
    check_compatible(model, regime)
    if regime is PredictionRegime.MAXENT_DISTRIBUTION:
        probs = np.exp(log_softmax_scores(model.weights, VIOLATIONS[pattern.index]))
        return PatternDistribution(probs / probs.sum(), "analytic")
    if not regime.stochastic:
        point = np.zeros(len(WORD_ORDERS))
        point[predict(model, pattern, regime)] = 1.0
        return PatternDistribution(point, "deterministic")
    counts = sample_counts(model, pattern, regime, samples, rng_seed,
                           noise_variance=noise_variance, spreading=spreading)
    return PatternDistribution.from_counts(counts, str(samples))


def predict_all_distributions(model: LearnedModel, regime: PredictionRegime | None = None,
                              samples: int = DEFAULT_SAMPLES, rng_seed: int = 0, **kwargs) -> dict[InputPattern, PatternDistribution]:
    return {p: predict_distribution(model, p, regime, samples, rng_seed, **kwargs) for p in ALL_PATTERNS}


def distributions_csv(dists: Mapping[InputPattern, PatternDistribution]) -> str:
    buf = io.StringIO()
    buf.write("pattern," + ",".join(o.name for o in WORD_ORDERS) + ",samples\n")
    for p in sorted(dists):
        d = dists[p]
        row = ",".join(f"{x:.6f}" for x in d.probabilities)
        buf.write(f"{str(p).replace(' ', '')},{row},{d.support_note}\n")
    return buf.getvalue()
