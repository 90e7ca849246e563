"""Next-token log-probability backends for constrained decoding.

A scorer is only ever asked about the candidates the automaton allows, so
every backend here scores a small candidate set rather than a vocabulary.
"""
from __future__ import annotations

import hashlib
import json
import math
import threading
import time
import urllib.error
import urllib.request
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple
from urllib.parse import urlparse

from .automaton import path_for
from .core import EOS_ID, TaggedSentence, Tokenizer, TagSchema, WordTokenizer
from .errors import EmptyCorpus, HTTPStatusError, MalformedResponse, ScorerFailure, ScorerTimeout
from .taskio import split_label_prefix


@dataclass(frozen=True)
class ScoreRequest:
    conditioning: str
    prefix: Tuple[int, ...]
    candidates: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValueError("a score request needs at least one candidate")
        if len(set(self.candidates)) != len(self.candidates):
            raise ValueError("candidates must be distinct")

    def to_json(self) -> dict:
        return {"conditioning": self.conditioning, "prefix": list(self.prefix),
                "candidates": list(self.candidates)}


def check_response(request: ScoreRequest, logprobs: Mapping[int, float], normalized: bool) -> Dict[int, float]:
    """Validate a backend's answer; raises MalformedResponse."""
    keys = set(logprobs)
    wanted = set(request.candidates)
    if keys != wanted:
        missing = sorted(wanted - keys)
        extra = sorted(keys - wanted)
        raise MalformedResponse(f"response keys differ from candidates (missing {missing}, extra {extra})")
    out = {}
    for tok in request.candidates:
        value = logprobs[tok]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise MalformedResponse(f"non-finite or non-numeric logprob {value!r} for token {tok}")
        if normalized and value > 0:
            raise MalformedResponse(f"positive logprob {value} from a normalized scorer")
        out[tok] = float(value)
    return out


class Scorer:
    """Base class for scoring backends.

    Attributes:
        normalized: log-probabilities sum to one over the candidate set.
        nonpositive: every returned value is <= 0, which makes early
            stopping of beam search admissible.
        thread_safe: concurrent ``score`` calls are allowed.
    """

    normalized = False
    nonpositive = True
    thread_safe = True

    def logprobs(self, request: ScoreRequest) -> Mapping[int, float]:
        raise NotImplementedError

    def score(self, conditioning: str, prefix: Sequence[int], candidates: Sequence[int]) -> Dict[int, float]:
        request = ScoreRequest(conditioning, tuple(prefix), tuple(candidates))
        return check_response(request, self.logprobs(request), self.normalized)


class UniformScorer(Scorer):
    normalized = True

    def logprobs(self, request):
        lp = -math.log(len(request.candidates))
        return {tok: lp for tok in request.candidates}


def uniform_scorer() -> UniformScorer:
    return UniformScorer()


class TableScorer(Scorer):
    """Looks up ``(prefix, token)`` in a table, falling back to ``default``."""

    def __init__(self, entries: Optional[Mapping[Tuple[Tuple[int, ...], int], float]] = None, default: float = -1.0):
        if not math.isfinite(default):
            raise ValueError("default logprob must be finite")
        self.entries = {(tuple(p), t): float(v) for (p, t), v in (entries or {}).items()}
        self.default = float(default)
        self.nonpositive = self.default <= 0 and all(v <= 0 for v in self.entries.values())

    def logprobs(self, request):
        return {tok: self.entries.get((request.prefix, tok), self.default) for tok in request.candidates}

    @classmethod
    def from_json(cls, data: dict) -> "TableScorer":
        entries = {(tuple(e["prefix"]), int(e["token"])): float(e["logprob"]) for e in data.get("entries", [])}
        return cls(entries, float(data.get("default", -1.0)))

    @classmethod
    def load(cls, path) -> "TableScorer":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))

    def to_json(self) -> dict:
        return {"default": self.default,
                "entries": [{"prefix": list(p), "token": t, "logprob": v} for (p, t), v in sorted(self.entries.items())]}


def table_scorer(entries=None, default: float = -1.0) -> TableScorer:
    return TableScorer(entries, default)


_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class RandomTableScorer(Scorer):
    """A seeded random table over every ``(conditioning, prefix, token)``.

    Entries are derived from a hash instead of being stored, so the table is
    unbounded but reproducible: the same seed gives the same table.  Logits
    are drawn uniformly from ``[0, scale)`` and log-softmaxed over the
    candidate set.
    """

    normalized = True

    def __init__(self, seed: int = 0, scale: float = 4.0):
        self.seed = seed
        self.scale = scale

    def _logit(self, base: int, tok: int) -> float:
        folded = 0
        while True:
            folded ^= tok & _MASK64
            tok >>= 64
            if not tok:
                break
            folded = _mix64(folded)
        return self.scale * (_mix64(base ^ folded) >> 11) / float(1 << 53)

    def logprobs(self, request):
        digest = hashlib.blake2b(f"{self.seed}|{request.conditioning}|{request.prefix}".encode(), digest_size=8)
        base = int.from_bytes(digest.digest(), "little")
        logits = [self._logit(base, tok) for tok in request.candidates]
        top = max(logits)
        log_z = top + math.log(sum(math.exp(x - top) for x in logits))
        return {tok: min(0.0, x - log_z) for tok, x in zip(request.candidates, logits)}


def random_table_scorer(seed: int = 0, scale: float = 4.0) -> RandomTableScorer:
    return RandomTableScorer(seed, scale)


class GoldScorer(Scorer):
    """Gives logprob 0 to the gold path token and ``-margin`` to all others.

    With several gold sentences the one whose words match the conditioning
    text (label prefix stripped) is used.  A prefix that has left the gold
    path gets ``-margin`` for every candidate.
    """

    def __init__(self, golds: Iterable[TaggedSentence], schema: TagSchema, tokenizer: Tokenizer, margin: float = 10.0):
        if margin < 0 or not math.isfinite(margin):
            raise ValueError("margin must be finite and non-negative")
        self.schema = schema
        self.margin = float(margin)
        self.paths = {}
        for gold in golds:
            self.paths[gold.words] = tuple(tok for _, tok in path_for(gold, schema, tokenizer))
        self._single = next(iter(self.paths.values())) if len(self.paths) == 1 else None

    def gold_path(self, conditioning: str) -> Optional[Tuple[int, ...]]:
        if self._single is not None:
            return self._single
        _, words = split_label_prefix(conditioning, self.schema)
        return self.paths.get(tuple(words))

    def logprobs(self, request):
        path = self.gold_path(request.conditioning)
        k = len(request.prefix)
        target = None
        if path is not None and k < len(path) and path[:k] == request.prefix:
            target = path[k]
        return {tok: (0.0 if tok == target else -self.margin) for tok in request.candidates}


def gold_scorer(gold, schema: TagSchema, tokenizer: Tokenizer, margin: float = 10.0) -> GoldScorer:
    golds = [gold] if isinstance(gold, TaggedSentence) else list(gold)
    return GoldScorer(golds, schema, tokenizer, margin)


# n-gram action model

BOS = "<s>"
EMIT = "EMIT"
CLOSE = "CLOSE"
STOP = "EOS"


def action_events(ts: TaggedSentence, schema: TagSchema):
    """Yield ``(history_symbol, upcoming_word, outcome)`` per word-level action.

    ``history_symbol`` is what the action contributes to the history;
    ``upcoming_word`` is the next input word (None past the end).
    """
    starts = {s.start: s.label for s in ts.spans}
    ends = {s.end - 1: s.label for s in ts.spans}
    n = len(ts.words)
    for i, word in enumerate(ts.words):
        if i in starts:
            marker = schema.open_marker(starts[i])
            yield marker, word, marker
        yield "w:" + word, word, EMIT
        if i in ends:
            upcoming = ts.words[i + 1] if i + 1 < n else None
            yield schema.close_marker(ends[i]), upcoming, CLOSE
    yield STOP, None, STOP


class NgramScorer(Scorer):
    """Add-alpha smoothed model of the next tagging action.

    The context is the last ``order - 1`` action symbols (emitted words as
    ``w:word``, markers verbatim) together with the next input word.  The
    probability is normalized over the candidate set at query time.
    """

    normalized = True

    def __init__(self, schema: TagSchema, tokenizer: Tokenizer, order: int, alpha: float,
                 counts: Mapping[tuple, Counter]):
        self.schema = schema
        self.tokenizer = tokenizer
        self.order = order
        self.alpha = alpha
        self.counts = {ctx: Counter(c) for ctx, c in counts.items()}

    def _history(self, history):
        if self.order == 1:
            return ()
        padded = (BOS,) * (self.order - 1) + tuple(history)
        return padded[-(self.order - 1):]

    def _replay(self, words, prefix):
        history = []
        word_pos = 0
        for tok in prefix:
            if self.tokenizer.is_ordinary(tok):
                if self.tokenizer.starts_word(tok):
                    history.append("w:" + words[word_pos] if word_pos < len(words) else "w:")
                    word_pos += 1
            elif tok != EOS_ID and self.schema.marker_for_id(tok) is not None:
                history.append(self.schema.marker_string(tok))
        return history, word_pos

    def _outcome(self, tok):
        if tok == EOS_ID:
            return STOP
        marker = self.schema.marker_for_id(tok)
        if marker is None:
            return EMIT
        return self.schema.open_marker(marker[0]) if marker[1] else CLOSE

    def logprobs(self, request):
        if len(request.candidates) == 1:
            return {request.candidates[0]: 0.0}
        _, words = split_label_prefix(request.conditioning, self.schema)
        history, word_pos = self._replay(words, request.prefix)
        upcoming = words[word_pos] if word_pos < len(words) else None
        counts = self.counts.get((self._history(history), upcoming), Counter())
        outcomes = [self._outcome(tok) for tok in request.candidates]
        denom = sum(counts[o] for o in outcomes) + self.alpha * len(outcomes)
        return {tok: min(0.0, math.log((counts[o] + self.alpha) / denom))
                for tok, o in zip(request.candidates, outcomes)}


def ngram_scorer_train(corpus: Iterable[TaggedSentence], schema: TagSchema, order: int = 3,
                       alpha: float = 0.1, tokenizer: Optional[Tokenizer] = None) -> NgramScorer:
    """Count action n-grams over ``corpus``.

    ``tokenizer`` must be the one used at decode time (default: word level);
    it is only used to find word boundaries in the prefix.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    counts = defaultdict(Counter)
    seen = 0
    model = NgramScorer(schema, tokenizer or WordTokenizer(), order, alpha, {})
    for ts in corpus:
        ts.check_schema(schema)
        seen += 1
        history = []
        for symbol, upcoming, outcome in action_events(ts, schema):
            counts[(model._history(history), upcoming)][outcome] += 1
            history.append(symbol)
    if not seen:
        raise EmptyCorpus("cannot train an n-gram scorer on an empty corpus")
    model.counts = dict(counts)
    return model


class RemoteScorer(Scorer):
    """Client for the ``POST /v1/score`` inference protocol.

    Retries timeouts, connection errors and 5xx responses up to ``retries``
    extra attempts.  At most ``max_in_flight`` requests are outstanding.
    """

    def __init__(self, endpoint: str, timeout_ms: int = 10_000, retries: int = 0,
                 normalized: bool = True, max_in_flight: int = 8, backoff_s: float = 0.05):
        parsed = urlparse(endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"malformed endpoint URL {endpoint!r}")
        if not endpoint.rstrip("/").endswith("/v1/score"):
            endpoint = endpoint.rstrip("/") + "/v1/score"
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.retries = retries
        self.normalized = normalized
        self.nonpositive = normalized
        self.backoff_s = backoff_s
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _post(self, body: bytes) -> bytes:
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with self._slots, urllib.request.urlopen(req, timeout=self.timeout_ms / 1000) as resp:
                if resp.status != 200:
                    raise HTTPStatusError(resp.status)
                return resp.read()
        except urllib.error.HTTPError as e:
            raise HTTPStatusError(e.code, str(e.reason)) from None
        except TimeoutError as e:
            raise ScorerTimeout(f"no answer from {self.endpoint} within {self.timeout_ms} ms") from e
        except urllib.error.URLError as e:
            if isinstance(e.reason, TimeoutError):
                raise ScorerTimeout(f"no answer from {self.endpoint} within {self.timeout_ms} ms") from e
            raise ScorerFailure(f"cannot reach {self.endpoint}: {e.reason}") from e

    def logprobs(self, request):
        body = json.dumps(request.to_json()).encode()
        for attempt in range(self.retries + 1):
            try:
                raw = self._post(body)
                break
            except HTTPStatusError as e:
                if e.status < 500 or attempt == self.retries:
                    raise
            except ScorerFailure:
                if attempt == self.retries:
                    raise
            time.sleep(self.backoff_s * (2 ** attempt))
        try:
            data = json.loads(raw)
            logprobs = {int(k): v for k, v in data["logprobs"].items()}
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            raise MalformedResponse(f"bad response body: {e}") from None
        return logprobs


def remote_scorer(endpoint: str, timeout_ms: int = 10_000, retries: int = 0, **kwargs) -> RemoteScorer:
    return RemoteScorer(endpoint, timeout_ms, retries, **kwargs)
