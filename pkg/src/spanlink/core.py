"""Shared domain types: span annotations, documents, tokens, and the entity vocabulary.

Character offsets everywhere count Unicode code points (Python string
indices), never bytes, so they line up with the offsets exchanged over the
annotation wire format.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyVocabularyError, InputError, UnknownEntityError

# Reserved non-entity marker.
O_LABEL = "O"

# Default stop list used to flag function words (determiners, conjunctions,
# prepositions, auxiliaries). Spans covering exactly one of these words are
# rejected in post-processing. Override with load_function_words().
DEFAULT_FUNCTION_WORDS = frozenset(
    """
    a an the this that these those each every either neither some any no such
    and or but nor so yet for
    of in on at by to with from into onto over under between among through
    during before after above below up down out off about against around
    as per via than
    is are was were be been being am
    do does did done
    has have had having
    will would shall should can could may might must
    not
    """.split()
)


def is_punctuation_char(ch: str) -> bool:
    """True for single characters in a Unicode punctuation category."""
    return len(ch) == 1 and unicodedata.category(ch).startswith("P")


def load_function_words(path: str | Path) -> frozenset[str]:
    """Load a stop list, one word per line; blank lines and # comments ignored."""
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line.lower())
    return frozenset(words)


@dataclass(frozen=True)
class SpanAnnotation:
    """A (span start, span end, entity identifier) triple over raw text.

    ``start`` is inclusive, ``end`` exclusive. ``score`` is informational
    and excluded from equality so that predicted and gold spans compare on
    the triple alone.
    """

    start: int
    end: int
    entity: str
    score: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InputError(f"invalid span range [{self.start}, {self.end})")
        if not self.entity:
            raise InputError("empty entity identifier")

    def to_dict(self) -> dict:
        d = {"start": self.start, "end": self.end, "entity": self.entity}
        if self.score is not None:
            d["score"] = self.score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpanAnnotation":
        return cls(int(d["start"]), int(d["end"]), d["entity"], d.get("score"))


@dataclass(frozen=True)
class SubwordToken:
    """One tokenizer piece: ``surface == text[start:end]``.

    ``word_index`` is the index of the whitespace-delimited word that
    contains the token; pieces of the same word are contiguous.
    """

    surface: str
    start: int
    end: int
    word_index: int
    is_punctuation: bool = False
    is_function_word: bool = False

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "start": self.start,
            "end": self.end,
            "word_index": self.word_index,
        }


@dataclass
class AnnotatedDocument:
    """Raw passage plus tokenization and gold/predicted span annotations."""

    id: str
    text: str
    tokens: list[SubwordToken] = field(default_factory=list)
    gold: list[SpanAnnotation] = field(default_factory=list)
    predicted: list[SpanAnnotation] = field(default_factory=list)

    def validate(self) -> None:
        """Check the structural invariants; raise InputError on violation."""
        n = len(self.text)
        prev_end = 0
        prev_word = -1
        for tok in self.tokens:
            if tok.start < prev_end or tok.end > n:
                raise InputError(f"{self.id}: token ranges overlap or exceed text")
            if self.text[tok.start : tok.end] != tok.surface:
                raise InputError(f"{self.id}: token surface mismatch at {tok.start}")
            if tok.word_index < prev_word:
                raise InputError(f"{self.id}: word indices not ascending")
            prev_end = tok.end
            prev_word = tok.word_index
        for name, spans in (("gold", self.gold), ("predicted", self.predicted)):
            last = 0
            for span in sorted(spans, key=lambda s: (s.start, s.end)):
                if span.end > n:
                    raise InputError(f"{self.id}: {name} span exceeds text length")
                if span.start < last:
                    raise InputError(f"{self.id}: {name} spans overlap")
                last = span.end


def gold_token_labels(doc: AnnotatedDocument) -> list[str]:
    """Per-token gold label: the entity of the covering gold span, else O.

    A span covers a token when it contains the token's full character range.
    """
    labels = [O_LABEL] * len(doc.tokens)
    for span in doc.gold:
        for i, tok in enumerate(doc.tokens):
            if span.start <= tok.start and tok.end <= span.end:
                labels[i] = span.entity
    return labels


class EntityVocabulary:
    """Ordered fixed candidate set; position = classification head column."""

    def __init__(self, entries: list[str] | tuple[str, ...], o_index: int | None = None):
        entries = tuple(entries)
        if not entries:
            raise EmptyVocabularyError("vocabulary has no entries")
        index = {}
        for i, e in enumerate(entries):
            if not e:
                raise InputError(f"empty entity identifier at index {i}")
            if e in index:
                raise InputError(f"duplicate vocabulary entry {e!r}")
            index[e] = i
        if o_index is None and O_LABEL in index:
            o_index = index[O_LABEL]
        if o_index is not None and not (0 <= o_index < len(entries)):
            raise InputError(f"O index {o_index} out of range")
        self.entries = entries
        self.o_index = o_index
        self._index = index

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    def __contains__(self, entity: str) -> bool:
        return entity in self._index

    def index_of(self, entity: str) -> int:
        try:
            return self._index[entity]
        except KeyError:
            raise UnknownEntityError(f"unknown entity {entity!r}") from None

    def id_of(self, index: int) -> str:
        return self.entries[index]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EntityVocabulary)
            and self.entries == other.entries
            and self.o_index == other.o_index
        )

    def save(self, path: str | Path) -> None:
        """Write one identifier per line; `#O=<index>` header when O is reserved."""
        lines = []
        if self.o_index is not None:
            lines.append(f"#O={self.o_index}")
        lines.extend(self.entries)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EntityVocabulary":
        raw = Path(path).read_text(encoding="utf-8").splitlines()
        o_index = None
        if raw and raw[0].startswith("#O="):
            try:
                o_index = int(raw[0][3:])
            except ValueError:
                raise InputError(f"{path}: bad O header {raw[0]!r}") from None
            raw = raw[1:]
        entries = [line for line in raw if line]
        if not entries:
            raise EmptyVocabularyError(f"{path}: vocabulary file has no entries")
        return cls(entries, o_index)


def build_vocabulary(entity_ids: list[str], include_o: bool = False) -> EntityVocabulary:
    """Build a vocabulary from identifiers in input order, duplicates dropped.

    With ``include_o`` the reserved O marker is appended at the end unless
    it is already present.
    """
    seen = dict.fromkeys(entity_ids)
    entries = list(seen)
    if include_o and O_LABEL not in seen:
        entries.append(O_LABEL)
    if not entries:
        raise EmptyVocabularyError("cannot build a vocabulary from zero identifiers")
    return EntityVocabulary(entries)
