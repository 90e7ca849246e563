"""Constrained beam search and its exhaustive oracle."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

from .annotation import serialize
from .automaton import Action, ActionKind, DecodeState, TagAutomaton, enumerate_annotations, path_for
from .core import Span, TaggedSentence, Tokenizer, TagSchema
from .errors import IllegalAction, MedtagError
from .scorers import Scorer

DEFAULT_BEAM_WIDTH = 4


class Hypothesis(NamedTuple):
    state: DecodeState
    actions: Tuple[Action, ...]
    tokens: Tuple[int, ...]
    keys: Tuple[Tuple[int, int], ...]
    logprob: float

    def rank(self):
        return (-self.logprob, self.keys)


@dataclass(frozen=True)
class DecodeResult:
    tagged: TaggedSentence
    logprob: float
    steps: int
    tokens: Tuple[int, ...] = ()
    text: str = ""


@dataclass(frozen=True)
class DecodeFailure:
    index: int
    words: Tuple[str, ...]
    error: Exception


def _result(automaton: TagAutomaton, hyp: Hypothesis) -> DecodeResult:
    spans = []
    open_ = None
    state = automaton.initial()
    for action in hyp.actions:
        if action.kind is ActionKind.OPEN:
            open_ = (action.label, state.word_pos)
        elif action.kind is ActionKind.CLOSE:
            spans.append(Span(open_[1], state.word_pos, open_[0]))
            open_ = None
        state = automaton._advance(state, action)
    tagged = TaggedSentence(automaton.words, tuple(spans))
    return DecodeResult(tagged, hyp.logprob, len(hyp.tokens), hyp.tokens, serialize(tagged, automaton.schema))


def decode(input_words: Sequence[str], schema: TagSchema, scorer: Scorer, tokenizer: Tokenizer,
           beam_width: int = DEFAULT_BEAM_WIDTH, conditioning: Optional[str] = None) -> DecodeResult:
    """Constrained beam search for the best annotation of ``input_words``.

    Every hypothesis is expanded with all automaton-allowed tokens and the
    pool is cut to ``beam_width`` by ``(score, action order)``.  Hypotheses
    ending in EOS move to a finished pool.  When the scorer is non-positive
    the search stops as soon as no live hypothesis can still beat the best
    finished one.

    Args:
        conditioning: text passed to the scorer; defaults to the words
            joined by spaces.  Use :func:`medtag.taskio.add_label_prefix`
            for multi-task inputs.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    automaton = TagAutomaton(input_words, schema, tokenizer)
    cond = " ".join(automaton.words) if conditioning is None else conditioning
    live = [Hypothesis(automaton.initial(), (), (), (), 0.0)]
    finished: List[Hypothesis] = []
    early_stop = scorer.nonpositive
    while live:
        pool = []
        for hyp in live:
            allowed = automaton.allowed(hyp.state)
            logprobs = scorer.score(cond, hyp.tokens, [tok for _, tok in allowed])
            for action, tok in allowed:
                pool.append(Hypothesis(
                    automaton._advance(hyp.state, action),
                    hyp.actions + (action,),
                    hyp.tokens + (tok,),
                    hyp.keys + (automaton.action_key(action),),
                    hyp.logprob + logprobs[tok],
                ))
        pool.sort(key=Hypothesis.rank)
        live = []
        for hyp in pool[:beam_width]:
            (finished if hyp.state.finished else live).append(hyp)
        if early_stop and finished and live:
            best = min(finished, key=Hypothesis.rank)
            if all(best.rank() < hyp.rank() for hyp in live):
                break
    return _result(automaton, min(finished, key=Hypothesis.rank))


def exhaustive_argmax(input_words: Sequence[str], schema: TagSchema, scorer: Scorer, tokenizer: Tokenizer,
                      limit: int = 100_000, conditioning: Optional[str] = None) -> DecodeResult:
    """Score every valid annotation along its unique path and return the best.

    Ties are broken by action order, as in :func:`decode`.
    """
    automaton = TagAutomaton(input_words, schema, tokenizer)
    cond = " ".join(automaton.words) if conditioning is None else conditioning
    best = None
    for ts in enumerate_annotations(automaton.words, schema, limit):
        state = automaton.initial()
        tokens = []
        logprob = 0.0
        path = path_for(ts, schema, tokenizer)
        for action, tok in path:
            allowed = automaton.allowed(state)
            if (action, tok) not in allowed:
                raise IllegalAction(f"{action!r} not allowed in {state}")
            logprob += scorer.score(cond, tokens, [t for _, t in allowed])[tok]
            tokens.append(tok)
            state = automaton._advance(state, action)
        hyp = Hypothesis(state, tuple(a for a, _ in path), tuple(tokens),
                         tuple(automaton.action_key(a) for a, _ in path), logprob)
        if best is None or hyp.rank() < best.rank():
            best = hyp
    return _result(automaton, best)


def decode_batch(sentences: Sequence[Sequence[str]], schema: TagSchema, scorer: Scorer, tokenizer: Tokenizer,
                 beam_width: int = DEFAULT_BEAM_WIDTH, parallelism: int = 1,
                 conditionings: Optional[Sequence[str]] = None) -> List[Union[DecodeResult, DecodeFailure]]:
    """Decode many sentences; output order follows input order.

    A sentence that fails yields a :class:`DecodeFailure` in its slot and the
    rest of the batch still runs.  Runs sequentially when the scorer is not
    thread safe.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(i):
        words = tuple(sentences[i])
        cond = conditionings[i] if conditionings is not None else None
        try:
            return decode(words, schema, scorer, tokenizer, beam_width, conditioning=cond)
        except (MedtagError, ValueError, OSError) as e:
            return DecodeFailure(i, words, e)

    indices = range(len(sentences))
    if parallelism == 1 or not scorer.thread_safe or len(sentences) < 2:
        return [one(i) for i in indices]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, indices))
