"""Conversions between tagged sentences, HTML-style tagged text and BIO labels."""
from __future__ import annotations

from typing import List, Optional, Sequence

from .core import MARKER_RE, Span, TaggedSentence, TagSchema
from .errors import (
    DanglingInside,
    EmptySpan,
    LengthMismatch,
    NestedTag,
    UnbalancedTag,
    UnknownLabel,
    UnknownTag,
    WordMismatch,
)


def serialize(ts: TaggedSentence, schema: TagSchema) -> str:
    """Render ``ts`` as canonical tagged text, e.g.
    ``Patient with <Disease> dilated cardiomyopathy </Disease>``."""
    ts.check_schema(schema)
    starts = {s.start: s for s in ts.spans}
    ends = {s.end - 1: s for s in ts.spans}
    out = []
    for i, word in enumerate(ts.words):
        if i in starts:
            out.append(schema.open_marker(starts[i].label))
        out.append(word)
        if i in ends:
            out.append(schema.close_marker(ends[i].label))
    return " ".join(out)


def _pieces(text: str) -> List[str]:
    # markers glued to words ("<Disease>dilated") are split off
    pieces = []
    for chunk in text.split():
        pos = 0
        for m in MARKER_RE.finditer(chunk):
            if m.start() > pos:
                pieces.append(chunk[pos:m.start()])
            pieces.append(m.group(0))
            pos = m.end()
        if pos < len(chunk):
            pieces.append(chunk[pos:])
    return pieces


def parse(text: str, schema: TagSchema, source_words: Optional[Sequence[str]] = None) -> TaggedSentence:
    """Parse tagged text back into a :class:`TaggedSentence`.

    Raises UnknownTag, UnbalancedTag, NestedTag, EmptySpan, or WordMismatch
    when ``source_words`` is given and the output words differ from it.
    """
    words = []
    spans = []
    open_label = None
    open_start = 0
    for piece in _pieces(text):
        if MARKER_RE.fullmatch(piece) is None:
            words.append(piece)
            continue
        marker = schema.parse_marker(piece)
        if marker is None:
            raise UnknownTag(f"unknown tag {piece!r}")
        label, is_open = marker
        if is_open:
            if open_label is not None:
                raise NestedTag(f"{piece} opened inside <{open_label}>")
            open_label, open_start = label, len(words)
        else:
            if open_label is None:
                raise UnbalancedTag(f"{piece} closes nothing")
            if label != open_label:
                raise UnbalancedTag(f"{piece} closes <{open_label}>")
            if len(words) == open_start:
                raise EmptySpan(f"empty <{label}> span at word {open_start}")
            spans.append(Span(open_start, len(words), label))
            open_label = None
    if open_label is not None:
        raise UnbalancedTag(f"<{open_label}> never closed")
    if source_words is not None and tuple(words) != tuple(source_words):
        raise WordMismatch(f"output words {words!r} differ from input {list(source_words)!r}")
    return TaggedSentence(tuple(words), tuple(spans))


def to_bio(ts: TaggedSentence) -> List[str]:
    labels = ["O"] * len(ts.words)
    for span in ts.spans:
        labels[span.start] = f"B-{span.label}"
        for i in range(span.start + 1, span.end):
            labels[i] = f"I-{span.label}"
    return labels


def from_bio(words: Sequence[str], bio_labels: Sequence[str], schema: TagSchema,
             line_numbers: Optional[Sequence[int]] = None) -> TaggedSentence:
    """Inverse of :func:`to_bio`.  ``I-X`` must continue a ``B-X``/``I-X``.

    ``line_numbers`` (one per word) are attached to raised errors.
    """
    if len(words) != len(bio_labels):
        raise LengthMismatch(f"{len(words)} words but {len(bio_labels)} labels")
    spans = []
    current = None  # [start, label]
    for i, tag in enumerate(bio_labels):
        line = line_numbers[i] if line_numbers is not None else None
        if tag == "O":
            prefix, label = "O", None
        elif len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
            prefix, label = tag[0], tag[2:]
            if label not in schema:
                raise UnknownLabel(f"label {label!r} not in schema {schema.name!r}", line=line)
        else:
            raise UnknownLabel(f"malformed BIO tag {tag!r}", line=line)
        if prefix == "I":
            if current is None or current[1] != label:
                raise DanglingInside(f"{tag} at word {i} does not continue a {label} span", line=line)
            continue
        if current is not None:
            spans.append(Span(current[0], i, current[1]))
            current = None
        if prefix == "B":
            current = [i, label]
    if current is not None:
        spans.append(Span(current[0], len(bio_labels), current[1]))
    return TaggedSentence(tuple(words), tuple(spans))
