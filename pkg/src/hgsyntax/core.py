"""Domain types and the alignment-constraint evaluation engine.

Every grammar in the package scores the same fixed candidate set: the six
orderings of subject, verb and object. Candidates are described by a
12-entry attribute vector with values in {-1, 0, +1} (violated, vacuously
satisfied, complied with). Constraint index order is fixed as::

    S-L S-R V-L V-R O-L O-R T-L T-R C-L C-R F-L F-R
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

N_CONSTRAINTS = 12


class DiscourseMark(enum.IntEnum):
    """Information-structure annotation; definition order gives T < C < F."""

    TOPIC = 0
    CONTRASTIVE_TOPIC = 1
    FOCUS = 2

    @property
    def letter(self) -> str:
        return "tcf"[self.value]

    @classmethod
    def from_letter(cls, letter: str) -> "DiscourseMark":
        try:
            return cls("tcf".index(letter.strip().lower()))
        except ValueError:
            raise ValueError(f"unknown discourse mark {letter!r}") from None


class WordOrder(enum.IntEnum):
    SVO = 0
    OVS = 1
    VSO = 2
    SOV = 3
    VOS = 4
    OSV = 5

    @classmethod
    def parse(cls, text: str) -> "WordOrder":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown word order {text!r}") from None


WORD_ORDERS: tuple[WordOrder, ...] = tuple(WordOrder)


@dataclass(frozen=True, order=True)
class InputPattern:
    subject: DiscourseMark
    verb: DiscourseMark
    object: DiscourseMark

    @property
    def marks(self) -> tuple[DiscourseMark, DiscourseMark, DiscourseMark]:
        return (self.subject, self.verb, self.object)

    @property
    def index(self) -> int:
        """Position in :data:`ALL_PATTERNS` (base-3 number S V O)."""
        return 9 * self.subject + 3 * self.verb + self.object

    def __str__(self) -> str:
        return " ".join(m.letter for m in self.marks)

    @property
    def label(self) -> str:
        """Compact label such as ``S-T V-F O-T``."""
        return " ".join(
            f"{role}-{m.letter.upper()}" for role, m in zip("SVO", self.marks)
        )

    @classmethod
    def parse(cls, text: str) -> "InputPattern":
        """Parse ``"t f t"``, ``"t,f,t"`` or ``"tft"``."""
        letters = [c for c in text if not c.isspace() and c != ","]
        if len(letters) != 3:
            raise ValueError(f"malformed pattern {text!r}: expected three marks")
        return cls(*(DiscourseMark.from_letter(c) for c in letters))


ALL_PATTERNS: tuple[InputPattern, ...] = tuple(
    InputPattern(*marks) for marks in itertools.product(DiscourseMark, repeat=3)
)


class Role(enum.Enum):
    SUBJECT = "S"
    VERB = "V"
    OBJECT = "O"


class Edge(enum.Enum):
    LEFT = "L"
    RIGHT = "R"


@dataclass(frozen=True)
class Constraint:
    """Alignment of a grammatical role or a discourse mark to a sentence edge."""

    target: Role | DiscourseMark
    edge: Edge

    @property
    def short_name(self) -> str:
        if isinstance(self.target, Role):
            head = self.target.value
        else:
            head = self.target.letter.upper()
        return f"{head}-{self.edge.value}"

    @property
    def long_name(self) -> str:
        if isinstance(self.target, Role):
            head = self.target.name.title()
        else:
            head = {
                DiscourseMark.TOPIC: "Topic",
                DiscourseMark.CONTRASTIVE_TOPIC: "C-Topic",
                DiscourseMark.FOCUS: "Focus",
            }[self.target]
        edge = "Left" if self.edge is Edge.LEFT else "Right"
        return f"{head} {edge}"


CONSTRAINTS: tuple[Constraint, ...] = tuple(
    Constraint(target, edge)
    for target in (
        Role.SUBJECT,
        Role.VERB,
        Role.OBJECT,
        DiscourseMark.TOPIC,
        DiscourseMark.CONTRASTIVE_TOPIC,
        DiscourseMark.FOCUS,
    )
    for edge in (Edge.LEFT, Edge.RIGHT)
)
CONSTRAINT_NAMES: tuple[str, ...] = tuple(c.short_name for c in CONSTRAINTS)
GRAMMATICAL = slice(0, 6)


def constraint_index(name: str) -> int:
    """Look up a constraint by short (``T-R``) or long (``Topic Right``) name."""
    key = name.strip().lower().replace("_", " ")
    for i, c in enumerate(CONSTRAINTS):
        if key in (c.short_name.lower(), c.long_name.lower(), c.long_name.lower().replace(" ", "-")):
            return i
    raise ValueError(f"unknown constraint {name!r}")


def evaluate_constraints(pattern: InputPattern, order: WordOrder) -> np.ndarray:
    """Attribute vector f(pattern, order) as an int8 array of length 12.

    Grammatical constraints are +1 when the role sits on the edge and -1
    otherwise. A discourse-mark constraint is 0 when no element carries the
    mark, +1 when some element carrying it is on the edge, -1 otherwise.
    """
    roles = order.name  # e.g. "SOV"
    mark_of = dict(zip("SVO", pattern.marks))
    edge_roles = {Edge.LEFT: roles[0], Edge.RIGHT: roles[-1]}
    out = np.empty(N_CONSTRAINTS, dtype=np.int8)
    for i, c in enumerate(CONSTRAINTS):
        at_edge = edge_roles[c.edge]
        if isinstance(c.target, Role):
            out[i] = 1 if at_edge == c.target.value else -1
        elif c.target not in pattern.marks:
            out[i] = 0
        else:
            out[i] = 1 if mark_of[at_edge] is c.target else -1
    return out


def _build_table() -> np.ndarray:
    table = np.empty((len(ALL_PATTERNS), len(WORD_ORDERS), N_CONSTRAINTS), dtype=np.int8)
    for p in ALL_PATTERNS:
        for o in WORD_ORDERS:
            table[p.index, o] = evaluate_constraints(p, o)
    table.setflags(write=False)
    return table


#: VIOLATIONS[pattern.index, order] is the attribute vector of that candidate.
VIOLATIONS: np.ndarray = _build_table()


def candidates(pattern: InputPattern) -> np.ndarray:
    """6 x 12 attribute matrix for all candidate orders of ``pattern``."""
    return VIOLATIONS[pattern.index]


def harmony(weights: Sequence[float] | np.ndarray, violations: Sequence[int] | np.ndarray) -> float:
    return float(np.dot(np.asarray(weights, dtype=float), np.asarray(violations, dtype=float)))


def hg_winner(weights: np.ndarray, pattern: InputPattern) -> WordOrder:
    """Highest-harmony order; ties go to the lower canonical order index."""
    scores = candidates(pattern) @ np.asarray(weights, dtype=float)
    return WordOrder(int(np.argmax(scores)))


class Comparison(enum.Enum):
    A_WINS = "a-wins"
    B_WINS = "b-wins"
    TIE = "tie"


def ot_compare(ranking: Sequence[int], a: np.ndarray, b: np.ndarray) -> Comparison:
    """Strict-domination comparison of two attribute vectors."""
    for j in ranking:
        if a[j] != b[j]:
            return Comparison.A_WINS if a[j] > b[j] else Comparison.B_WINS
    return Comparison.TIE


def ot_winner(ranking: Sequence[int], pattern: InputPattern,
              orders: Iterable[WordOrder] = WORD_ORDERS) -> WordOrder:
    """OT-optimal order among ``orders`` by successive filtering.

    Surviving ties after the last constraint go to the lowest canonical index.
    """
    table = candidates(pattern)
    alive = sorted(orders)
    for j in ranking:
        best = max(table[o, j] for o in alive)
        alive = [o for o in alive if table[o, j] == best]
        if len(alive) == 1:
            break
    return WordOrder(alive[0])


def ranking_from_weights(weights: Sequence[float] | np.ndarray) -> list[int]:
    """Constraint indices by descending weight; ties by lower index first."""
    w = np.asarray(weights, dtype=float)
    return sorted(range(len(w)), key=lambda j: (-w[j], j))


def powers_of_two_weights(ranking: Sequence[int]) -> np.ndarray:
    """Weights 2**11, 2**10, ... 1 assigned down the ranking."""
    n = len(ranking)
    if sorted(ranking) != list(range(n)):
        raise ValueError("ranking must be a permutation of constraint indices")
    w = np.empty(n, dtype=float)
    for pos, j in enumerate(ranking):
        w[j] = 2.0 ** (n - 1 - pos)
    return w


def weights_from_mapping(mapping: dict[str, float]) -> np.ndarray:
    """Build a weight vector from a {constraint name: weight} mapping."""
    w = np.full(N_CONSTRAINTS, np.nan)
    for name, value in mapping.items():
        w[constraint_index(name)] = value
    if np.isnan(w).any():
        missing = [CONSTRAINT_NAMES[j] for j in np.flatnonzero(np.isnan(w))]
        raise ValueError(f"missing weights for {missing}")
    return w
