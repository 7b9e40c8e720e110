"""Harmonic Grammar, Stochastic OT and MaxEnt learners for discourse-driven word order."""

from .core import (
    ALL_PATTERNS,
    CONSTRAINT_NAMES,
    CONSTRAINTS,
    VIOLATIONS,
    WORD_ORDERS,
    DiscourseMark,
    InputPattern,
    WordOrder,
    evaluate_constraints,
    harmony,
    hg_winner,
    ot_compare,
    ot_winner,
    powers_of_two_weights,
    ranking_from_weights,
)
from .corpus import Corpus, PatternCounts, Sentence, generate_corpus, resample_corpus, table2_counts
from .learners import (
    GlaConfig,
    LearnedModel,
    MaxEntConfig,
    ModelKind,
    PerceptronConfig,
    cd_train,
    gla_train,
    maxent_train,
    perceptron_train,
)
from .inference import PatternDistribution, PredictionRegime, predict, predict_distribution
from .evaluation import accuracy, ganging_analysis, kl_divergence, weighted_kl

__version__ = "0.1.0"
