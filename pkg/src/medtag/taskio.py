"""Dataset readers/writers and text-to-text task formatting."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .annotation import from_bio, parse, serialize, to_bio
from .core import TaggedSentence, TagSchema
from .errors import AnnotationError, MalformedJson, MissingField, ParseError


def add_label_prefix(words: Sequence[str], schema: TagSchema) -> str:
    """Prepend the open markers of every label, as done for multi-task inputs.

    ``["Patient", "with", "dilated", "cardiomyopathy"]`` under a Disease
    schema becomes ``"<Disease> Patient with dilated cardiomyopathy"``.
    """
    return " ".join([schema.open_marker(label) for label in schema.labels] + list(words))


def split_label_prefix(text: str, schema: TagSchema) -> Tuple[List[str], List[str]]:
    """Split leading open markers off ``text``; returns ``(labels, words)``."""
    tokens = text.split()
    labels = []
    for tok in tokens:
        marker = schema.parse_marker(tok)
        if marker is None or not marker[1]:
            break
        labels.append(marker[0])
    return labels, tokens[len(labels):]


@dataclass(frozen=True)
class QAItem:
    question: str
    snippets: Tuple[str, ...]
    ideal_answers: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "snippets", tuple(self.snippets))
        object.__setattr__(self, "ideal_answers", tuple(self.ideal_answers))
        if not self.question.strip():
            raise ValueError("question must be non-empty")
        if not self.snippets:
            raise ValueError("at least one snippet is required")


def _squash(text: str) -> str:
    return " ".join(text.split())


def build_qa_prompt(item: QAItem) -> str:
    """``question: {q} context: {s1} {s2} ...`` with whitespace normalized."""
    context = " ".join(_squash(s) for s in item.snippets)
    return f"question: {_squash(item.question)} context: {context}"


def read_conll(path, schema: TagSchema) -> List[TaggedSentence]:
    """Read a two-column (token, BIO tag) file; blank lines end sentences."""
    sentences = []
    words, tags, lines = [], [], []

    def flush():
        if words:
            sentences.append(from_bio(words, tags, schema, line_numbers=lines))
            words.clear(), tags.clear(), lines.clear()

    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            cols = raw.split()
            if not cols:
                flush()
                continue
            if len(cols) != 2:
                raise ParseError(f"expected 2 columns, got {len(cols)}", line=lineno)
            words.append(cols[0])
            tags.append(cols[1])
            lines.append(lineno)
    flush()
    return sentences


def write_conll(path, sentences: Iterable[TaggedSentence]):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_conll(sentences))


def format_conll(sentences: Iterable[TaggedSentence]) -> str:
    blocks = []
    for ts in sentences:
        blocks.append("".join(f"{w}\t{t}\n" for w, t in zip(ts.words, to_bio(ts))))
    return "\n".join(blocks)


def read_tagged(path, schema: TagSchema) -> List[TaggedSentence]:
    """One tagged sentence per line; empty lines are empty sentences."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            try:
                out.append(parse(line, schema))
            except AnnotationError as e:
                raise type(e)(str(e), line=lineno) from None
    return out


def write_tagged(path, sentences: Iterable[TaggedSentence], schema: TagSchema):
    with open(path, "w", encoding="utf-8") as f:
        for ts in sentences:
            f.write(serialize(ts, schema) + "\n")


def read_qa_jsonl(path) -> List[QAItem]:
    items = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedJson(str(e), line=lineno) from None
            if not isinstance(record, dict):
                raise MalformedJson("expected a JSON object", line=lineno)
            for key in ("question", "snippets", "ideal_answers"):
                if key not in record:
                    raise MissingField(f"missing field {key!r}", line=lineno)
            try:
                items.append(QAItem(record["question"], record["snippets"], record["ideal_answers"]))
            except (ValueError, TypeError, AttributeError) as e:
                raise MalformedJson(str(e), line=lineno) from None
    return items


def write_qa_jsonl(path, items: Iterable[QAItem]):
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            f.write(json.dumps({"question": item.question, "snippets": list(item.snippets),
                                "ideal_answers": list(item.ideal_answers)}, ensure_ascii=False) + "\n")


def read_lines(path) -> List[List[str]]:
    """Plain input sentences, whitespace-tokenized, one per line."""
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f]
