"""Training data: the published count table, sentence files and splits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .core import ALL_PATTERNS, WORD_ORDERS, InputPattern, WordOrder

# Rows follow ALL_PATTERNS (S, V, O each in t < c < f order);
# columns are SVO OVS VSO SOV VOS OSV.
_TABLE2 = np.array(
    [
        [23, 4, 4, 3, 3, 3],      # t t t
        [0, 1, 0, 0, 0, 2],       # t t c
        [22, 0, 11, 0, 1, 0],     # t t f
        [0, 0, 0, 0, 0, 0],       # t c t
        [0, 0, 0, 0, 0, 0],       # t c c
        [0, 0, 0, 0, 0, 0],       # t c f
        [97, 26, 28, 12, 80, 32],  # t f t
        [2, 43, 0, 0, 1, 20],     # t f c
        [519, 7, 145, 17, 28, 4],  # t f f
        [7, 0, 0, 0, 3, 0],       # c t t
        [0, 0, 0, 0, 1, 0],       # c t c
        [26, 0, 1, 0, 3, 0],      # c t f
        [0, 0, 0, 0, 0, 0],       # c c t
        [0, 0, 0, 0, 0, 0],       # c c c
        [0, 0, 0, 0, 0, 0],       # c c f
        [111, 0, 2, 0, 76, 4],    # c f t
        [0, 0, 0, 0, 9, 2],       # c f c
        [610, 0, 3, 0, 34, 2],    # c f f
        [1, 17, 1, 14, 0, 0],     # f t t
        [0, 9, 0, 0, 0, 0],       # f t c
        [4, 3, 5, 2, 0, 0],       # f t f
        [0, 0, 0, 0, 0, 0],       # f c t
        [0, 0, 0, 0, 1, 0],       # f c c
        [0, 0, 0, 0, 0, 0],       # f c f
        [7, 222, 16, 153, 4, 2],  # f f t
        [0, 184, 0, 1, 0, 4],     # f f c
        [48, 24, 105, 95, 1, 0],  # f f f
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class Sentence:
    input: InputPattern
    observed: WordOrder


@dataclass
class Corpus:
    sentences: list[Sentence]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def pattern_indices(self) -> np.ndarray:
        return np.fromiter((s.input.index for s in self.sentences), dtype=np.int64, count=len(self))

    def order_indices(self) -> np.ndarray:
        return np.fromiter((int(s.observed) for s in self.sentences), dtype=np.int64, count=len(self))

    def counts(self) -> "PatternCounts":
        m = np.zeros((len(ALL_PATTERNS), len(WORD_ORDERS)), dtype=np.int64)
        np.add.at(m, (self.pattern_indices(), self.order_indices()), 1)
        return PatternCounts(m)


@dataclass
class PatternCounts:
    """27 x 6 count matrix indexed by (pattern.index, order)."""

    matrix: np.ndarray = field(default_factory=lambda: np.zeros((27, 6), dtype=np.int64))

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.int64)
        if self.matrix.shape != (len(ALL_PATTERNS), len(WORD_ORDERS)):
            raise ValueError(f"count matrix must be 27x6, got {self.matrix.shape}")
        if (self.matrix < 0).any():
            raise ValueError("counts must be non-negative")

    def __getitem__(self, key: tuple[InputPattern, WordOrder]) -> int:
        pattern, order = key
        return int(self.matrix[pattern.index, order])

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def row(self, pattern: InputPattern) -> np.ndarray:
        return self.matrix[pattern.index]

    def to_mapping(self) -> dict[tuple[InputPattern, WordOrder], int]:
        return {(p, o): int(self.matrix[p.index, o]) for p in ALL_PATTERNS for o in WORD_ORDERS}

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[InputPattern, WordOrder], int]) -> "PatternCounts":
        m = np.zeros((len(ALL_PATTERNS), len(WORD_ORDERS)), dtype=np.int64)
        for (p, o), n in mapping.items():
            m[p.index, o] = n
        return cls(m)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["S", "V", "O", *(o.name for o in WORD_ORDERS)])
        for p in ALL_PATTERNS:
            writer.writerow([m.letter.upper() for m in p.marks] + [int(n) for n in self.matrix[p.index]])
        return buf.getvalue()


def table2_counts() -> PatternCounts:
    """The 2955-sentence training distribution as published."""
    return PatternCounts(_TABLE2.copy())


def generate_corpus(counts: PatternCounts, shuffle_seed: int) -> Corpus:
    """Expand counts into sentences and shuffle them with ``shuffle_seed``."""
    sentences = [
        Sentence(p, o)
        for p in ALL_PATTERNS
        for o in WORD_ORDERS
        for _ in range(int(counts.matrix[p.index, o]))
    ]
    perm = np.random.default_rng(shuffle_seed).permutation(len(sentences))
    return Corpus([sentences[i] for i in perm], provenance=f"table-regen seed={shuffle_seed}")


def resample_corpus(counts: PatternCounts, n: int, seed: int) -> Corpus:
    """Draw ``n`` sentences i.i.d. from the joint distribution in ``counts``.

    Stands in for a held-out set: patterns and orders are drawn with the
    empirical joint frequencies, so per-pattern conditionals match the table.
    """
    if counts.total == 0:
        raise ValueError("cannot resample from empty counts")
    probs = counts.matrix.ravel() / counts.total
    rng = np.random.default_rng(seed)
    cells = rng.choice(probs.size, size=n, p=probs)
    n_orders = len(WORD_ORDERS)
    sentences = [Sentence(ALL_PATTERNS[c // n_orders], WordOrder(c % n_orders)) for c in cells]
    return Corpus(sentences, provenance=f"resample n={n} seed={seed}")


def split(corpus: Corpus, fractions: tuple[float, float, float], seed: int) -> tuple[Corpus, Corpus, Corpus]:
    """Seeded train/dev/test partition.

    Dev and test sizes are ``floor(fraction * n)``; the remainder goes to train.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(corpus)
    n_dev = math.floor(fractions[1] * n + 1e-9)
    n_test = math.floor(fractions[2] * n + 1e-9)
    n_train = n - n_dev - n_test
    perm = np.random.default_rng(seed).permutation(n)
    parts = np.split(perm, [n_train, n_train + n_dev])
    names = ("train", "dev", "test")
    return tuple(  # type: ignore[return-value]
        Corpus([corpus.sentences[i] for i in sorted(idx)], provenance=f"{corpus.provenance} {name} split seed={seed}")
        for idx, name in zip(parts, names)
    )


def baseline_accuracy(corpus: Corpus) -> Fraction:
    """Accuracy of always predicting SVO."""
    if not len(corpus):
        raise ValueError("baseline accuracy of an empty corpus is undefined")
    hits = sum(1 for s in corpus if s.observed is WordOrder.SVO)
    return Fraction(hits, len(corpus))


def upper_bound_predictor(train: Corpus) -> dict[InputPattern, WordOrder]:
    """Modal order per pattern; unseen patterns fall back to SVO."""
    if not len(train):
        raise ValueError("cannot build a predictor from an empty corpus")
    counts = train.counts().matrix
    out = {}
    for p in ALL_PATTERNS:
        row = counts[p.index]
        out[p] = WordOrder(int(np.argmax(row))) if row.any() else WordOrder.SVO
    return out


def upper_bound_accuracy(predictor: Mapping[InputPattern, WordOrder], eval_corpus: Corpus) -> Fraction:
    if not len(eval_corpus):
        raise ValueError("accuracy of an empty corpus is undefined")
    hits = sum(1 for s in eval_corpus if predictor[s.input] is s.observed)
    return Fraction(hits, len(eval_corpus))


# -- sentence file format ---------------------------------------------------

class CorpusFormatError(ValueError):
    pass


def format_sentence(s: Sentence) -> str:
    return f"{s.input}\t{s.observed.name}"


def dumps(corpus: Corpus, header: bool = True) -> str:
    """Serialise ``corpus``; with ``header`` the provenance goes in a comment line."""
    lines = []
    if header and corpus.provenance:
        lines.append(f"# {corpus.provenance}")
    lines.extend(format_sentence(s) for s in corpus)
    return "\n".join(lines) + "\n"


def loads(text: str, provenance: str = "") -> Corpus:
    sentences = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise CorpusFormatError(f"line {lineno}: expected 2 tab-separated fields, got {len(fields)}")
        marks = fields[0].split(" ")
        if len(marks) != 3 or any(m not in ("t", "c", "f") for m in marks):
            raise CorpusFormatError(f"line {lineno}: malformed pattern {fields[0]!r}")
        if fields[1] not in WordOrder.__members__:
            raise CorpusFormatError(f"line {lineno}: unknown word order {fields[1]!r}")
        sentences.append(Sentence(InputPattern.parse(fields[0]), WordOrder[fields[1]]))
    return Corpus(sentences, provenance=provenance)


def read_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), provenance=str(path))


def write_corpus(corpus: Corpus, path: str | Path, header: bool = True) -> None:
    Path(path).write_text(dumps(corpus, header), encoding="utf-8")


def from_pairs(pairs: Iterable[tuple[InputPattern | str, WordOrder | str]], provenance: str = "") -> Corpus:
    """Convenience constructor, mainly for tests."""
    out = []
    for p, o in pairs:
        p = InputPattern.parse(p) if isinstance(p, str) else p
        o = WordOrder.parse(o) if isinstance(o, str) else o
        out.append(Sentence(p, o))
    return Corpus(out, provenance=provenance)
