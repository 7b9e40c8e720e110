"""Error-driven and batch learners for constraint weights.

All four learners consume a :class:`~hgsyntax.corpus.Corpus` and return a
:class:`LearnedModel`:

* ``perceptron_train``  Harmonic Grammar weights (online, mistake driven)
* ``gla_train``         Stochastic OT ranking values (Gradual Learning Algorithm)
* ``cd_train``          stratified OT hierarchy (Constraint Demotion)
* ``maxent_train``      log-linear weights fitted by batch optimisation
"""

from __future__ import annotations

import enum
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from .core import (
    CONSTRAINT_NAMES,
    constraint_index,
    N_CONSTRAINTS,
    VIOLATIONS,
    WordOrder,
    ranking_from_weights,
)
from .corpus import Corpus

log = logging.getLogger(__name__)


class ModelKind(enum.Enum):
    HG = "HG"
    SOT = "SOT"
    OT_STRATA = "OT-strata"
    MAXENT = "MaxEnt"


@dataclass
class LearnedModel:
    kind: ModelKind
    weights: np.ndarray | None = None
    strata: list[list[int]] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind is ModelKind.OT_STRATA:
            if self.strata is None:
                raise ValueError("OT-strata model needs strata")
            flat = sorted(j for s in self.strata for j in s)
            if flat != list(range(N_CONSTRAINTS)):
                raise ValueError("strata must partition the constraint set")
        else:
            if self.weights is None:
                raise ValueError(f"{self.kind.value} model needs weights")
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (N_CONSTRAINTS,):
                raise ValueError(f"expected {N_CONSTRAINTS} weights, got shape {self.weights.shape}")


def _require_nonempty(corpus: Corpus) -> None:
    if not len(corpus):
        raise ValueError("training corpus is empty")


def _epoch_order(n: int, epoch: int, reshuffle_seed: int | None) -> np.ndarray:
    if reshuffle_seed is None:
        return np.arange(n)
    return np.random.default_rng([reshuffle_seed, epoch]).permutation(n)


def update_direction(f_true: np.ndarray, f_pred: np.ndarray) -> np.ndarray:
    """Per-constraint step direction in {-1, 0, +1}.

    Within a single input, vacuous constraints are 0 for every candidate, so
    attribute differences are always -2, 0 or +2; the step is their sign.
    """
    return np.sign(f_true.astype(np.int16) - f_pred.astype(np.int16)).astype(float)


# -- perceptron ---------------------------------------------------------------

@dataclass
class PerceptronConfig:
    epochs: int = 10
    # Tuned on held-out resamples. The step has to be large next to the
    # initial weights and the bonus, or the lambda-trick freezes examples
    # before the weights have organised.
    learning_rate: float = 25.0
    lambda_trick_rate: float = 0.5
    init_seed: int = 0
    init_range: tuple[float, float] = (0.0, 0.75)
    use_normalization: bool = True
    reshuffle_seed: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lambda_trick_rate < 0:
            raise ValueError("lambda_trick_rate must be non-negative")


def compute_normalization(train: Corpus) -> np.ndarray:
    """Number of sentences on which each constraint is not vacuous.

    Evaluated once per sentence at its observed order.
    """
    _require_nonempty(train)
    f = VIOLATIONS[train.pattern_indices(), train.order_indices()]
    return (f != 0).sum(axis=0).astype(float)


def perceptron_step(weights: np.ndarray, f_true: np.ndarray, f_pred: np.ndarray,
                    learning_rate: float, factors: np.ndarray | None = None) -> np.ndarray:
    """One mistake-driven update; returns new weights.

    Constraints with a zero normalisation factor are never updated.
    """
    step = learning_rate * update_direction(f_true, f_pred)
    if factors is not None:
        safe = np.where(factors > 0, factors, 1.0)
        step = np.where(factors > 0, step / safe, 0.0)
    return weights + step


def perceptron_train(train: Corpus, config: PerceptronConfig = PerceptronConfig(),
                     initial_weights: np.ndarray | None = None) -> LearnedModel:
    _require_nonempty(train)
    if initial_weights is None:
        lo, hi = config.init_range
        w = np.random.default_rng(config.init_seed).uniform(lo, hi, N_CONSTRAINTS)
    else:
        w = np.array(initial_weights, dtype=float)
    factors = compute_normalization(train) if config.use_normalization else None
    pats = train.pattern_indices()
    gold = train.order_indices()
    mistakes = np.zeros(len(train), dtype=np.int64)
    curve = []
    for epoch in range(config.epochs):
        n_wrong = 0
        for i in _epoch_order(len(train), epoch, config.reshuffle_seed):
            table = VIOLATIONS[pats[i]]
            scores = table @ w
            scores[gold[i]] += config.lambda_trick_rate * mistakes[i]
            pred = int(np.argmax(scores))
            if pred != gold[i]:
                n_wrong += 1
                mistakes[i] += 1
                w = perceptron_step(w, table[gold[i]], table[pred], config.learning_rate, factors)
        curve.append(1.0 - n_wrong / len(train))
        log.debug("perceptron epoch %d: training-time accuracy %.4f", epoch + 1, curve[-1])
    meta = {
        "learner": "perceptron",
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "lambda_trick_rate": config.lambda_trick_rate,
        "init_seed": config.init_seed,
        "init_range": f"{config.init_range[0]},{config.init_range[1]}",
        "use_normalization": config.use_normalization,
        "reshuffle_seed": config.reshuffle_seed,
        "train_size": len(train),
        "epoch_accuracy": curve,
    }
    return LearnedModel(ModelKind.HG, weights=w, metadata=meta)


# -- Gradual Learning Algorithm -----------------------------------------------

class PredictionMode(enum.Enum):
    ML = "ML"
    SOT = "SOT"


@dataclass
class GlaConfig:
    plasticity: float = 0.01
    spreading: float = 2.0
    epochs: int = 10
    train_prediction: PredictionMode = PredictionMode.SOT
    init_seed: int = 0
    initial_value: float = 100.0
    reshuffle_seed: int | None = None

    def __post_init__(self) -> None:
        if self.plasticity <= 0:
            raise ValueError("plasticity must be positive")
        if self.spreading < 0:
            raise ValueError("spreading must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        self.train_prediction = PredictionMode(self.train_prediction)


def _ot_argmax(table: np.ndarray, values: np.ndarray) -> int:
    """OT winner among the rows of ``table`` under the ranking implied by ``values``."""
    alive = np.arange(table.shape[0])
    for j in ranking_from_weights(values):
        col = table[alive, j]
        alive = alive[col == col.max()]
        if alive.size == 1:
            break
    return int(alive[0])


def gla_step(values: np.ndarray, f_true: np.ndarray, f_pred: np.ndarray, plasticity: float) -> np.ndarray:
    return values + plasticity * update_direction(f_true, f_pred)


def gla_train(train: Corpus, config: GlaConfig = GlaConfig()) -> LearnedModel:
    _require_nonempty(train)
    rng = np.random.default_rng(config.init_seed)
    w = np.full(N_CONSTRAINTS, config.initial_value, dtype=float)
    pats = train.pattern_indices()
    gold = train.order_indices()
    stochastic = config.train_prediction is PredictionMode.SOT
    tables = VIOLATIONS.astype(float)
    powers = np.ldexp(1.0, np.arange(N_CONSTRAINTS - 1, -1, -1))
    curve = []
    for epoch in range(config.epochs):
        n_wrong = 0
        noise = config.spreading * rng.standard_normal((len(train), N_CONSTRAINTS)) if stochastic else None
        for k, i in enumerate(_epoch_order(len(train), epoch, config.reshuffle_seed)):
            table = VIOLATIONS[pats[i]]
            eval_w = w + noise[k] if stochastic else w
            # OT evaluation through the powers-of-two embedding of the ranking
            embedded = np.empty(N_CONSTRAINTS)
            embedded[np.argsort(-eval_w, kind="stable")] = powers
            pred = int(np.argmax(tables[pats[i]] @ embedded))
            if pred != gold[i]:
                n_wrong += 1
                w = gla_step(w, table[gold[i]], table[pred], config.plasticity)
        curve.append(1.0 - n_wrong / len(train))
    meta = {
        "learner": "gla",
        "plasticity": config.plasticity,
        "spreading": config.spreading,
        "epochs": config.epochs,
        "train_prediction": config.train_prediction.value,
        "init_seed": config.init_seed,
        "initial_value": config.initial_value,
        "reshuffle_seed": config.reshuffle_seed,
        "train_size": len(train),
        "epoch_accuracy": curve,
    }
    return LearnedModel(ModelKind.SOT, weights=w, metadata=meta)


def normalized_ranking_values(values: np.ndarray, spreading: float) -> tuple[np.ndarray, np.ndarray]:
    """Ranking values rescaled to sum to 100, and the same divided by the
    correspondingly rescaled spreading (so spreading becomes 1)."""
    values = np.asarray(values, dtype=float)
    scale = 100.0 / values.sum()
    summed = values * scale
    if spreading <= 0:
        return summed, np.full_like(summed, np.inf)
    return summed, summed / (spreading * scale)


# -- Constraint Demotion ------------------------------------------------------

@dataclass
class CdReport:
    """Per-epoch diagnostics. ``rank_swaps`` counts constraint pairs whose
    relative order changed, summed over every demotion in the epoch."""

    epoch_mistakes: list[int]
    converged: bool
    demotions: list[int]
    rank_swaps: list[int]

    @property
    def oscillating(self) -> bool:
        return not self.converged and self.demotions[-1] > 0

    def summary(self) -> str:
        if self.converged:
            return f"converged after {len(self.epoch_mistakes)} epoch(s)"
        return (
            f"did not converge in {len(self.epoch_mistakes)} epochs; "
            f"last-epoch mistakes={self.epoch_mistakes[-1]}, demotions={self.demotions[-1]}, "
            f"pairwise rank changes={self.rank_swaps[-1]}"
            + ("; the hierarchy keeps swapping ranks" if self.oscillating else "")
        )


def strata_levels(strata: list[list[int]]) -> np.ndarray:
    level = np.empty(N_CONSTRAINTS, dtype=np.int64)
    for k, stratum in enumerate(strata):
        level[list(stratum)] = k
    return level


def strata_predict(strata: list[list[int]], table: np.ndarray) -> int:
    """Lexicographic evaluation by stratum, summing attribute values within a stratum."""
    alive = np.arange(table.shape[0])
    for stratum in strata:
        score = table[np.ix_(alive, list(stratum))].sum(axis=1)
        alive = alive[score == score.max()]
        if alive.size == 1:
            break
    return int(alive[0])


def cd_step(strata: list[list[int]], f_winner: np.ndarray, f_loser: np.ndarray) -> list[list[int]]:
    """Demote winner-violated constraints not ranked below the loser's top violation."""
    level = strata_levels(strata)
    loser_marks = np.flatnonzero(f_loser < f_winner)   # favour the winner
    winner_marks = np.flatnonzero(f_winner < f_loser)  # favour the loser
    if loser_marks.size == 0 or winner_marks.size == 0:
        return strata
    pivot = int(level[loser_marks].min())
    demote = [int(j) for j in winner_marks if level[j] <= pivot]
    if not demote:
        return strata
    new = [[j for j in s if j not in demote] for s in strata]
    if pivot + 1 < len(new):
        new[pivot + 1] = sorted(new[pivot + 1] + demote)
    else:
        new.append(sorted(demote))
    return [s for s in new if s]


def _changed_pairs(before: np.ndarray, after: np.ndarray) -> int:
    b = np.sign(before[:, None] - before[None, :])
    a = np.sign(after[:, None] - after[None, :])
    return int((b != a).sum() // 2)


def cd_train(train: Corpus, max_epochs: int = 200) -> tuple[LearnedModel, CdReport]:
    _require_nonempty(train)
    if max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    # Same algorithm as strata_predict/cd_step, on a level-per-constraint
    # array. Stratum sums lie in [-12, 12], so digits in base 26 keep the
    # lexicographic order and one integer dot product scores a candidate.
    level = np.zeros(N_CONSTRAINTS, dtype=np.int64)
    tables = VIOLATIONS.astype(np.int64)
    pats = train.pattern_indices()
    gold = train.order_indices()
    epoch_mistakes, demotions, swaps = [], [], []
    converged = False
    for _ in range(max_epochs):
        n_wrong = n_demoted = n_swapped = 0
        for p, y in zip(pats, gold):
            table = tables[p]
            pred = int(np.argmax(table @ (26 ** (N_CONSTRAINTS - 1 - level))))
            if pred != y:
                n_wrong += 1
                diff = table[y] - table[pred]
                pivot = level[diff > 0].min()
                demote = (diff < 0) & (level <= pivot)
                if demote.any():
                    new = level.copy()
                    new[demote] = pivot + 1
                    new = np.unique(new, return_inverse=True)[1].reshape(-1)
                    n_demoted += 1
                    n_swapped += _changed_pairs(level, new)
                    level = new
        epoch_mistakes.append(n_wrong)
        demotions.append(n_demoted)
        swaps.append(n_swapped)
        if n_wrong == 0:
            converged = True
            break
    strata = [sorted(int(j) for j in np.flatnonzero(level == k)) for k in range(int(level.max()) + 1)]
    report = CdReport(epoch_mistakes, converged, demotions, swaps)
    if not converged:
        log.warning("constraint demotion: %s", report.summary())
    meta = {
        "learner": "cd",
        "max_epochs": max_epochs,
        "epochs_run": len(epoch_mistakes),
        "converged": converged,
        "train_size": len(train),
        "epoch_mistakes": epoch_mistakes,
    }
    return LearnedModel(ModelKind.OT_STRATA, strata=strata, metadata=meta), report


# -- Maximum Entropy ----------------------------------------------------------

@dataclass
class MaxEntConfig:
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6
    l2_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


class MaxEntConvergenceWarning(UserWarning):
    pass


def log_softmax_scores(weights: np.ndarray, tables: np.ndarray = VIOLATIONS) -> np.ndarray:
    """log P(order | pattern) for every pattern, shape (27, 6)."""
    scores = tables @ np.asarray(weights, dtype=float)
    m = scores.max(axis=-1, keepdims=True)
    return scores - m - np.log(np.exp(scores - m).sum(axis=-1, keepdims=True))


def maxent_objective(weights: np.ndarray, counts: np.ndarray, l2_penalty: float = 0.0) -> tuple[float, np.ndarray]:
    """Penalised log-likelihood and its gradient.

    ``counts`` is the 27 x 6 pattern/order count matrix of the corpus, so the
    sum over sentences collapses to a sum over cells.
    """
    w = np.asarray(weights, dtype=float)
    logp = log_softmax_scores(w)
    ll = float((counts * logp).sum()) - l2_penalty * float(w @ w)
    p = np.exp(logp)
    n_pat = counts.sum(axis=1)
    observed = np.einsum("po,poj->j", counts, VIOLATIONS)
    expected = np.einsum("p,po,poj->j", n_pat, p, VIOLATIONS)
    grad = observed - expected - 2.0 * l2_penalty * w
    return ll, grad


def maxent_train(train: Corpus, config: MaxEntConfig = MaxEntConfig()) -> LearnedModel:
    _require_nonempty(train)
    counts = train.counts().matrix.astype(float)

    def neg(w):
        ll, g = maxent_objective(w, counts, config.l2_penalty)
        return -ll, -g

    res = optimize.minimize(
        neg,
        np.zeros(N_CONSTRAINTS),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iterations, "gtol": config.gradient_tolerance * 0.1, "ftol": 0.0},
    )
    ll, grad = maxent_objective(res.x, counts, config.l2_penalty)
    grad_norm = float(np.abs(grad).max())
    converged = grad_norm <= config.gradient_tolerance
    if not converged:
        warnings.warn(
            f"MaxEnt did not reach gradient tolerance {config.gradient_tolerance:g} "
            f"(max |grad| = {grad_norm:.3g} after {res.nit} iterations)",
            MaxEntConvergenceWarning,
            stacklevel=2,
        )
    meta = {
        "learner": "maxent",
        "max_iterations": config.max_iterations,
        "gradient_tolerance": config.gradient_tolerance,
        "l2_penalty": config.l2_penalty,
        "iterations": int(res.nit),
        "log_likelihood": ll,
        "gradient_max_norm": grad_norm,
        "converged": converged,
        "train_size": len(train),
    }
    return LearnedModel(ModelKind.MAXENT, weights=res.x, metadata=meta)


def weight_table(weights: np.ndarray) -> list[tuple[str, float]]:
    """(constraint, weight) pairs, highest weight first."""
    return [(CONSTRAINT_NAMES[j], float(weights[j])) for j in ranking_from_weights(weights)]


# -- model file format -------------------------------------------------------

class ModelFormatError(ValueError):
    pass


def dumps_model(model: LearnedModel) -> str:
    """Line-oriented text form; floats carry 17 significant digits so
    ``loads_model(dumps_model(m))`` restores the weights bit for bit."""
    lines = [f"kind={model.kind.value}"]
    if model.kind is ModelKind.OT_STRATA:
        for k, stratum in enumerate(model.strata):
            lines.append(f"stratum {k}: " + " ".join(CONSTRAINT_NAMES[j] for j in stratum))
    else:
        for name, w in zip(CONSTRAINT_NAMES, model.weights):
            lines.append(f"weight {name} {float(w):.17g}")
    for key in sorted(model.metadata):
        lines.append(f"meta {key}={json.dumps(model.metadata[key], sort_keys=True)}")
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> LearnedModel:
    lines = [ln.rstrip("\r") for ln in text.splitlines()]
    if not lines or not lines[0].startswith("kind="):
        raise ModelFormatError("line 1: expected 'kind=<HG|SOT|OT-strata|MaxEnt>'")
    try:
        kind = ModelKind(lines[0][len("kind="):].strip())
    except ValueError:
        raise ModelFormatError(f"line 1: unknown model kind {lines[0]!r}") from None
    weights: dict[int, float] = {}
    strata: list[list[int]] = []
    meta: dict[str, Any] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "weight":
                name, value = rest.split()
                weights[constraint_index(name)] = float(value)
            elif head == "stratum":
                label, _, names = rest.partition(":")
                if int(label) != len(strata):
                    raise ValueError(f"strata out of order at {label!r}")
                strata.append([constraint_index(n) for n in names.split()])
            elif head == "meta":
                key, _, value = rest.partition("=")
                meta[key] = json.loads(value)
            else:
                raise ValueError(f"unknown record {head!r}")
        except ValueError as exc:
            raise ModelFormatError(f"line {lineno}: {exc}") from None
    try:
        if kind is ModelKind.OT_STRATA:
            return LearnedModel(kind, strata=strata, metadata=meta)
        if sorted(weights) != list(range(N_CONSTRAINTS)):
            raise ValueError(f"expected one weight line per constraint, got {len(weights)}")
        return LearnedModel(kind, weights=np.array([weights[j] for j in range(N_CONSTRAINTS)]), metadata=meta)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


__all__ = [
    "CdReport",
    "GlaConfig",
    "LearnedModel",
    "MaxEntConfig",
    "MaxEntConvergenceWarning",
    "ModelFormatError",
    "ModelKind",
    "PerceptronConfig",
    "PredictionMode",
    "WordOrder",
    "cd_step",
    "cd_train",
    "dumps_model",
    "compute_normalization",
    "gla_step",
    "gla_train",
    "loads_model",
    "log_softmax_scores",
    "maxent_objective",
    "maxent_train",
    "normalized_ranking_values",
    "perceptron_step",
    "perceptron_train",
    "strata_predict",
    "update_direction",
    "weight_table",
]
