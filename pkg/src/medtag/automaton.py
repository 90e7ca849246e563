"""Constraint automaton for tag-insertion decoding.

The automaton accepts exactly the token sequences that copy the input words
verbatim, interleaved with well-formed, flat, non-empty tag pairs, followed
by EOS.  Tags may only appear at word boundaries.
"""
from __future__ import annotations

from enum import IntEnum
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

from .core import EOS_ID, Span, TaggedSentence, Tokenizer, TagSchema
from .errors import FinishedState, IllegalAction, TooManyPaths


class ActionKind(IntEnum):
    # the numeric value is the tie-break order
    SUBTOKEN = 0
    OPEN = 1
    CLOSE = 2
    EOS = 3


class Action(NamedTuple):
    kind: ActionKind
    label: Optional[str] = None

    def __repr__(self):
        if self.kind is ActionKind.OPEN:
            return f"OpenTag({self.label})"
        return {ActionKind.SUBTOKEN: "EmitSubtoken", ActionKind.CLOSE: "CloseTag",
                ActionKind.EOS: "EmitEos"}[self.kind]


EMIT_SUBTOKEN = Action(ActionKind.SUBTOKEN)
CLOSE_TAG = Action(ActionKind.CLOSE)
EMIT_EOS = Action(ActionKind.EOS)


def open_tag(label: str) -> Action:
    return Action(ActionKind.OPEN, label)


class DecodeState(NamedTuple):
    word_pos: int = 0
    sub_off: int = 0
    open: Optional[Tuple[str, int]] = None  # (label, start word)
    finished: bool = False


INITIAL_STATE = DecodeState()


class TagAutomaton:
    """The constraint automaton bound to one input sentence.

    Args:
        words: the input words the output must reproduce.
        schema: labels that may be inserted.
        tokenizer: splits each word into subtokens.
    """

    def __init__(self, words: Sequence[str], schema: TagSchema, tokenizer: Tokenizer):
        self.words = tuple(words)
        self.schema = schema
        self.tokenizer = tokenizer
        self.pieces = [tokenizer.encode(w) for w in self.words]
        self._open = [(open_tag(label), schema.open_id(label)) for label in schema.labels]

    @property
    def n(self):
        return len(self.words)

    def initial(self) -> DecodeState:
        return INITIAL_STATE

    def action_key(self, action: Action) -> Tuple[int, int]:
        if action.kind is ActionKind.OPEN:
            return (int(action.kind), self.schema.label_index(action.label))
        return (int(action.kind), 0)

    def allowed(self, state: DecodeState) -> List[Tuple[Action, int]]:
        """Legal ``(action, token_id)`` pairs from ``state`` in tie-break order."""
        if state.finished:
            raise FinishedState("no actions are allowed after EOS")
        pos, off, open_ = state.word_pos, state.sub_off, state.open
        out = []
        if pos < self.n:
            out.append((EMIT_SUBTOKEN, self.pieces[pos][off]))
        if off == 0:
            if open_ is None and pos < self.n:
                out.extend(self._open)
            if open_ is not None and pos > open_[1]:
                out.append((CLOSE_TAG, self.schema.close_id(open_[0])))
        if pos == self.n and open_ is None:
            out.append((EMIT_EOS, EOS_ID))
        return out

    def step(self, state: DecodeState, action: Action) -> DecodeState:
        if state.finished:
            raise IllegalAction("state is already finished")
        if all(a != action for a, _ in self.allowed(state)):
            raise IllegalAction(f"{action!r} not allowed in {state}")
        return self._advance(state, action)

    def _advance(self, state, action):
        kind = action.kind
        if kind is ActionKind.SUBTOKEN:
            off = state.sub_off + 1
            if off == len(self.pieces[state.word_pos]):
                return state._replace(word_pos=state.word_pos + 1, sub_off=0)
            return state._replace(sub_off=off)
        if kind is ActionKind.OPEN:
            return state._replace(open=(action.label, state.word_pos))
        if kind is ActionKind.CLOSE:
            return state._replace(open=None)
        return state._replace(finished=True)

    def accepting_paths(self) -> Iterator[List[Tuple[Action, int]]]:
        """Depth-first enumeration of every accepting path, in action order."""
        stack = [(INITIAL_STATE, [])]
        while stack:
            state, path = stack.pop()
            if state.finished:
                yield path
                continue
            for action, tok in reversed(self.allowed(state)):
                stack.append((self._advance(state, action), path + [(action, tok)]))


def allowed_actions(state, input_words, schema, tokenizer):
    return TagAutomaton(input_words, schema, tokenizer).allowed(state)


def step(state, action, input_words, tokenizer, schema=None):
    """Apply ``action``.  Without ``schema`` any label is accepted for tags."""
    if state.finished:
        raise IllegalAction("state is already finished")
    if schema is None:
        labels = {action.label, state.open[0] if state.open else None} - {None}
        schema = TagSchema("_", tuple(sorted(labels)) or ("_",))
    return TagAutomaton(input_words, schema, tokenizer).step(state, action)


def detokenize(token_ids: Sequence[int], schema: TagSchema, tokenizer: Tokenizer) -> str:
    """Turn an emitted token stream back into tagged text.  EOS must be last."""
    out = []
    word = []
    for pos, tok in enumerate(token_ids):
        is_word_start = tokenizer.is_ordinary(tok) and tokenizer.starts_word(tok)
        if word and (not tokenizer.is_ordinary(tok) or is_word_start):
            out.append(tokenizer.decode(word))
            word = []
        if tok == EOS_ID:
            if pos != len(token_ids) - 1:
                raise ValueError("EOS before the end of the token stream")
            break
        if tokenizer.is_ordinary(tok):
            word.append(tok)
        elif schema.marker_for_id(tok) is not None:
            out.append(schema.marker_string(tok))
        else:
            raise ValueError(f"token id {tok} is neither ordinary nor a marker")
    if word:
        out.append(tokenizer.decode(word))
    return " ".join(out)


def path_for(ts: TaggedSentence, schema: TagSchema, tokenizer: Tokenizer) -> List[Tuple[Action, int]]:
    """The unique accepting path that produces ``ts``."""
    ts.check_schema(schema)
    starts = {s.start: s.label for s in ts.spans}
    ends = {s.end - 1: s.label for s in ts.spans}
    path = []
    for i, word in enumerate(ts.words):
        if i in starts:
            path.append((open_tag(starts[i]), schema.open_id(starts[i])))
        path.extend((EMIT_SUBTOKEN, tok) for tok in tokenizer.encode(word))
        if i in ends:
            path.append((CLOSE_TAG, schema.close_id(ends[i])))
    path.append((EMIT_EOS, EOS_ID))
    return path


def count_paths(n: int, num_labels: int) -> int:
    """Number of valid annotations of ``n`` words with ``num_labels`` labels.

    ``f(0) = 1`` and ``f(n) = f(n-1) + num_labels * sum(f(n-l) for l in 1..n)``:
    the first word is either bare or starts a span of length ``l``.
    Exact (arbitrary precision).
    """
    if n < 0 or num_labels < 1:
        raise ValueError("need n >= 0 and num_labels >= 1")
    f = [1]
    total = 1  # running sum f(0) + ... + f(k-1)
    for k in range(1, n + 1):
        f.append(f[k - 1] + num_labels * total)
        total += f[k]
    return f[n]


def enumerate_annotations(input_words: Sequence[str], schema: TagSchema, limit: int = 100_000) -> List[TaggedSentence]:
    """Every valid annotation of ``input_words``, built combinatorially.

    Does not consult the automaton, so it can serve as an oracle for it.
    """
    words = tuple(input_words)
    n = len(words)
    total = count_paths(n, len(schema.labels))
    if total > limit:
        raise TooManyPaths(f"{total} annotations exceed limit {limit}")

    def rec(i):
        if i == n:
            yield ()
            return
        for rest in rec(i + 1):
            yield rest
        for length in range(1, n - i + 1):
            for label in schema.labels:
                span = Span(i, i + length, label)
                for rest in rec(i + length):
                    yield (span,) + rest

    return [TaggedSentence(words, spans) for spans in rec(0)]
