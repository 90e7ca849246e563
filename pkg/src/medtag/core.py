"""Domain types: tag schemas, spans, tagged sentences and tokenizers.

Token id layout shared by every tokenizer and schema::

    0                PAD
    1                EOS
    2 .. 1023        marker ids (open/close pair per label)
    1024 ..          ordinary tokens
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    DuplicateLabel,
    EmptyLabelSet,
    IllegalLabelCharacter,
    LabelNotInSchema,
    SchemaError,
)

PAD_ID = 0
EOS_ID = 1
FIRST_MARKER_ID = 2
FIRST_ORDINARY_ID = 1024
MAX_LABELS = (FIRST_ORDINARY_ID - FIRST_MARKER_ID) // 2

LABEL_RE = re.compile(r"^[A-Za-z0-9_-]+$")


@dataclass(frozen=True)
class TagSchema:
    """The label inventory of one dataset and its marker tokens.

    Label ``i`` owns the open marker ``<L>`` (id ``2 + 2i``) and the close
    marker ``</L>`` (id ``3 + 2i``).  Use :func:`make_schema` to build one
    with validation.
    """

    name: str
    labels: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)
    _by_id: Dict[int, Tuple[str, bool]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        _check_labels(self.labels)
        index = {label: i for i, label in enumerate(self.labels)}
        by_id = {}
        for label, i in index.items():
            by_id[FIRST_MARKER_ID + 2 * i] = (label, True)
            by_id[FIRST_MARKER_ID + 2 * i + 1] = (label, False)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_by_id", by_id)

    def __contains__(self, label):
        return label in self._index

    def label_index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LabelNotInSchema(f"label {label!r} not in schema {self.name!r}") from None

    def open_marker(self, label: str) -> str:
        self.label_index(label)
        return f"<{label}>"

    def close_marker(self, label: str) -> str:
        self.label_index(label)
        return f"</{label}>"

    def open_id(self, label: str) -> int:
        return FIRST_MARKER_ID + 2 * self.label_index(label)

    def close_id(self, label: str) -> int:
        return FIRST_MARKER_ID + 2 * self.label_index(label) + 1

    def marker_ids(self) -> List[int]:
        return sorted(self._by_id)

    def marker_for_id(self, token_id: int) -> Optional[Tuple[str, bool]]:
        """Return ``(label, is_open)`` for a marker id, else None."""
        return self._by_id.get(token_id)

    def marker_string(self, token_id: int) -> str:
        label, is_open = self._by_id[token_id]
        return f"<{label}>" if is_open else f"</{label}>"

    def parse_marker(self, text: str) -> Optional[Tuple[str, bool]]:
        """Map a marker string like ``</Claim>`` to ``(label, is_open)``."""
        m = MARKER_RE.fullmatch(text)
        if m is None or m.group(2) not in self._index:
            return None
        return m.group(2), not m.group(1)

    def to_json(self) -> dict:
        return {"name": self.name, "labels": list(self.labels)}


MARKER_RE = re.compile(r"<(/?)([A-Za-z0-9_-]+)>")


def _check_labels(labels: Sequence[str]):
    if not labels:
        raise EmptyLabelSet("a schema needs at least one label")
    seen = set()
    for label in labels:
        if not isinstance(label, str) or not LABEL_RE.match(label):
            raise IllegalLabelCharacter(f"illegal label {label!r}")
        if label in seen:
            raise DuplicateLabel(f"duplicate label {label!r}")
        seen.add(label)
    if len(labels) > MAX_LABELS:
        raise SchemaError(f"at most {MAX_LABELS} labels are supported")


def make_schema(name: str, labels: Iterable[str]) -> TagSchema:
    return TagSchema(name, tuple(labels))


_BUILTIN = {
    "ncbi-disease": ("Disease",),
    "bc5cdr-disease": ("Disease",),
    "bc5cdr-chem": ("Chemical",),
    "diann": ("Disability",),
    "e3c": ("ClinicalEntity",),
    "pharmaconer": ("Pharmacological",),
    "abstrct": ("Claim", "Premise"),
}


def builtin_schemas() -> Dict[str, TagSchema]:
    """Schemas of the sequence labelling benchmarks, keyed by dataset name."""
    return {name: TagSchema(name, labels) for name, labels in _BUILTIN.items()}


def load_schema(path) -> TagSchema:
    """Read a ``{"name": ..., "labels": [...]}`` JSON schema file."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict) or "labels" not in data:
        raise SchemaError(f"{path}: expected an object with a 'labels' list")
    return make_schema(data.get("name", str(path)), data["labels"])


def resolve_schema(name_or_path: str) -> TagSchema:
    schema = builtin_schemas().get(name_or_path)
    if schema is not None:
        return schema
    return load_schema(name_or_path)


@dataclass(frozen=True, order=True)
class Span:
    start: int
    end: int
    label: str


@dataclass(frozen=True)
class TaggedSentence:
    """Words plus flat, sorted, non-overlapping labelled spans."""

    words: Tuple[str, ...]
    spans: Tuple[Span, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "spans", tuple(self.spans))
        for w in self.words:
            if not w or any(c.isspace() for c in w):
                raise ValueError(f"invalid word {w!r}")
        prev_end = 0
        for span in self.spans:
            if not 0 <= span.start < span.end <= len(self.words):
                raise ValueError(f"span {span} out of range for {len(self.words)} words")
            if span.start < prev_end:
                raise ValueError(f"span {span} overlaps or is out of order")
            prev_end = span.end

    def check_schema(self, schema: TagSchema):
        for span in self.spans:
            if span.label not in schema:
                raise LabelNotInSchema(f"label {span.label!r} not in schema {schema.name!r}")

    @property
    def text(self) -> str:
        return " ".join(self.words)


class Tokenizer:
    """Maps single words to ordinary token ids and back.

    Subclasses implement :meth:`encode`, :meth:`decode` and
    :meth:`starts_word`.  ``starts_word`` marks the first subtoken of every
    word so that a flat stream of ids can be split back into words.
    """

    name = "base"

    def encode(self, word: str) -> Tuple[int, ...]:
        raise NotImplementedError

    def decode(self, ids: Sequence[int]) -> str:
        raise NotImplementedError

    def starts_word(self, token_id: int) -> bool:
        raise NotImplementedError

    def is_ordinary(self, token_id: int) -> bool:
        return token_id >= FIRST_ORDINARY_ID

    def detokenize(self, ids: Sequence[int]) -> List[str]:
        words, current = [], []
        for i in ids:
            if self.starts_word(i) and current:
                words.append(self.decode(current))
                current = []
            current.append(i)
        if current:
            words.append(self.decode(current))
        return words


class WordTokenizer(Tokenizer):
    """One token per word.

    Without a vocabulary the id is an injective function of the word's
    UTF-8 bytes, so any word is encodable without state.  With ``vocab``,
    ids are ``FIRST_ORDINARY_ID + index`` and unknown words raise KeyError.
    """

    name = "word"

    def __init__(self, vocab: Optional[Sequence[str]] = None):
        self.vocab = None if vocab is None else tuple(vocab)
        self._ids = None if vocab is None else {w: FIRST_ORDINARY_ID + i for i, w in enumerate(self.vocab)}

    def encode(self, word):
        if not word:
            raise ValueError("cannot encode an empty word")
        if self._ids is not None:
            return (self._ids[word],)
        return (FIRST_ORDINARY_ID + int.from_bytes(b"\x01" + word.encode("utf-8"), "big"),)

    def decode(self, ids):
        if len(ids) != 1:
            raise ValueError("word tokenizer decodes exactly one id per word")
        offset = ids[0] - FIRST_ORDINARY_ID
        if self.vocab is not None:
            return self.vocab[offset]
        raw = offset.to_bytes((offset.bit_length() + 7) // 8, "big")
        return raw[1:].decode("utf-8")

    def starts_word(self, token_id):
        return token_id >= FIRST_ORDINARY_ID


class CharTokenizer(Tokenizer):
    """One token per character; first characters of a word get distinct ids."""

    name = "char"

    def encode(self, word):
        if not word:
            raise ValueError("cannot encode an empty word")
        return tuple(FIRST_ORDINARY_ID + 2 * ord(c) + (0 if i == 0 else 1) for i, c in enumerate(word))

    def decode(self, ids):
        return "".join(chr((i - FIRST_ORDINARY_ID) // 2) for i in ids)

    def starts_word(self, token_id):
        return token_id >= FIRST_ORDINARY_ID and (token_id - FIRST_ORDINARY_ID) % 2 == 0


def get_tokenizer(name: str) -> Tokenizer:
    if name == "word":
        return WordTokenizer()
    if name == "char":
        return CharTokenizer()
    raise ValueError(f"unknown tokenizer {name!r} (expected 'word' or 'char')")
