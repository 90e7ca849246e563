"""Span-corruption examples, multilingual mixture sampling and sequence packing."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInput, EmptyShard, IndivisibleBudget, PipelineError, SentinelMismatch

# Words per source of the medical pretraining corpus, by language.
CORPUS_SOURCES: Dict[str, Dict[str, int]] = {
    "en": {"ClinicalTrials": 127_400_000, "EMEA": 12_000_000, "PubMed": 968_400_000},
    "es": {"EMEA": 13_600_000, "PubMed": 8_400_000, "Medical Crawler": 918_000_000, "SPACC": 350_000,
           "UFAL": 10_500_000, "WikiMed": 5_200_000},
    "fr": {"PubMed": 1_400_000, "Science Direct": 15_200_000, "Wikipedia - Médecine": 5_000_000,
           "EDP": 48_000, "Google Patents": 654_000_000},
    "it": {"Medical Commoncrawl - IT": 67_000_000, "Drug instructions": 30_500_000,
           "Wikipedia - Medicina": 13_300_000, "E3C Corpus - IT": 11_600_000,
           "Medicine descriptions": 6_300_000, "Medical theses": 5_800_000, "Medical websites": 4_000_000,
           "PubMed": 2_300_000, "Supplement description": 1_300_000, "Medical notes": 975_000,
           "Pathologies": 157_000, "Medical test simulations": 26_000, "Clinical cases": 20_000},
}

DEFAULT_MIXTURE = {"en": 1.0, "es": 1.0, "fr": 1.0, "it": 2.0}


@dataclass(frozen=True)
class PretrainConfig:
    """Continued-pretraining settings.

    Optimizer, learning rate and scheduler are recorded for reference only.
    """

    sequence_length: int = 1024
    tokens_per_step: int = 65536
    epochs: int = 1
    noise_density: float = 0.15
    mean_span_length: float = 3.0
    mixture_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_MIXTURE))
    optimizer: str = "Adafactor"
    learning_rate: float = 0.001
    scheduler: str = "constant"

    def __post_init__(self):
        if not 0 < self.noise_density < 1:
            raise ValueError("noise_density must be in (0, 1)")
        if self.mean_span_length <= 0:
            raise ValueError("mean_span_length must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if any(w <= 0 for w in self.mixture_weights.values()):
            raise ValueError("mixture weights must be positive")
        if self.tokens_per_step % self.sequence_length:
            raise IndivisibleBudget(f"{self.tokens_per_step} tokens/step is not a multiple of {self.sequence_length}")

    @property
    def sequences_per_step(self) -> int:
        return self.tokens_per_step // self.sequence_length


LARGE_CONFIG = PretrainConfig(sequence_length=1024, tokens_per_step=65536)
XL_CONFIG = PretrainConfig(sequence_length=480, tokens_per_step=30720)


class IntSentinels:
    """Sentinel ``i`` is the negative id ``-(i + 1)``; real token ids are >= 0."""

    def make(self, i: int) -> int:
        return -(i + 1)

    def index(self, tok) -> Optional[int]:
        return -tok - 1 if isinstance(tok, (int, np.integer)) and tok < 0 else None


class TextSentinels:
    """Sentinel ``i`` is the string ``<extra_id_i>``."""

    prefix, suffix = "<extra_id_", ">"

    def make(self, i: int) -> str:
        return f"{self.prefix}{i}{self.suffix}"

    def index(self, tok) -> Optional[int]:
        if isinstance(tok, str) and tok.startswith(self.prefix) and tok.endswith(self.suffix):
            body = tok[len(self.prefix):-len(self.suffix)]
            if body.isdigit():
                return int(body)
        return None


INT_SENTINELS = IntSentinels()
TEXT_SENTINELS = TextSentinels()


def _default_sentinels(tokens):
    return TEXT_SENTINELS if tokens and isinstance(tokens[0], str) else INT_SENTINELS


@dataclass(frozen=True)
class CorruptionExample:
    source: Tuple
    target: Tuple
    num_masked: int
    num_spans: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _composition(rng, total: int, parts: int) -> np.ndarray:
    """Uniformly random split of ``total`` into ``parts`` positive integers."""
    if parts == 1:
        return np.array([total])
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    return np.diff(np.concatenate(([0], cuts, [total])))


def corrupt_span(tokens: Sequence, noise_density: float = 0.15, mean_span_length: float = 3.0,
                 rng_seed=0, sentinels=None) -> CorruptionExample:
    """Replace random contiguous spans with sentinels.

    ``round(len * noise_density)`` tokens are masked (half rounds up, capped
    at ``len - 1`` so at least one token survives).  They are split into
    ``max(1, round(masked / mean_span_length))`` spans that are separated
    by at least one kept token.  The target lists each sentinel followed
    by the tokens it hides and ends with one extra terminal sentinel.
    """
    tokens = list(tokens)
    n = len(tokens)
    if n == 0:
        raise DegenerateInput("cannot corrupt an empty sequence")
    if not 0 <= noise_density < 1:
        raise ValueError("noise_density must be in [0, 1)")
    if mean_span_length <= 0:
        raise ValueError("mean_span_length must be positive")
    sentinels = sentinels or _default_sentinels(tokens)
    if any(sentinels.index(t) is not None for t in tokens):
        raise DegenerateInput("input already contains sentinel tokens")

    num_masked = min(_round_half_up(n * noise_density), n - 1)
    if num_masked == 0:
        return CorruptionExample(tuple(tokens), (sentinels.make(0),), 0, 0)

    rng = np.random.default_rng(rng_seed)
    num_kept = n - num_masked
    num_spans = max(1, _round_half_up(num_masked / mean_span_length))
    num_spans = min(num_spans, num_masked, num_kept + 1)
    span_lengths = _composition(rng, num_masked, num_spans)
    # kept runs: before, between (>= 1 each) and after the spans
    free = num_kept - (num_spans - 1)
    bars = np.sort(rng.choice(free + num_spans, size=num_spans, replace=False))
    gaps = np.diff(np.concatenate(([-1], bars, [free + num_spans]))) - 1
    gaps[1:-1] += 1

    source, target = [], []
    pos = 0
    for i in range(num_spans):
        source.extend(tokens[pos:pos + gaps[i]])
        pos += gaps[i]
        sentinel = sentinels.make(i)
        source.append(sentinel)
        target.append(sentinel)
        target.extend(tokens[pos:pos + span_lengths[i]])
        pos += span_lengths[i]
    source.extend(tokens[pos:])
    target.append(sentinels.make(num_spans))
    return CorruptionExample(tuple(source), tuple(target), num_masked, num_spans)


def reconstruct(source: Sequence, target: Sequence, sentinels=None) -> List:
    """Undo :func:`corrupt_span`.  Raises SentinelMismatch on inconsistent input."""
    source, target = list(source), list(target)
    sentinels = sentinels or _default_sentinels(source or target)
    if not target:
        # nothing was masked and no terminal sentinel was kept
        if any(sentinels.index(t) is not None for t in source):
            raise SentinelMismatch("source has sentinels but the target is empty")
        return source
    spans = {}
    order = []
    current = None
    for tok in target:
        idx = sentinels.index(tok)
        if idx is not None:
            if idx != len(order):
                raise SentinelMismatch(f"target sentinel {idx} out of order (expected {len(order)})")
            order.append(idx)
            current = spans.setdefault(idx, [])
        elif current is None:
            raise SentinelMismatch("target must start with a sentinel")
        else:
            current.append(tok)
    terminal = order[-1]
    if spans[terminal]:
        raise SentinelMismatch("target does not end with a terminal sentinel")
    out = []
    expected = 0
    for tok in source:
        idx = sentinels.index(tok)
        if idx is None:
            out.append(tok)
            continue
        if idx != expected or idx == terminal:
            raise SentinelMismatch(f"source sentinel {idx} out of order (expected {expected})")
        out.extend(spans[idx])
        expected += 1
    if expected != terminal:
        raise SentinelMismatch(f"source has {expected} sentinels, target has {terminal}")
    return out


@dataclass(frozen=True)
class CorpusShard:
    language: str
    documents: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))

    @property
    def word_count(self) -> int:
        return sum(len(doc.split()) for doc in self.documents)


def load_shard(manifest) -> CorpusShard:
    """Load a shard from a ``{"language", "path"}`` manifest dict or JSON file.

    Relative paths resolve against the manifest file's directory.
    """
    base = Path(".")
    if not isinstance(manifest, Mapping):
        base = Path(manifest).parent
        with open(manifest, encoding="utf-8") as f:
            manifest = json.load(f)
    path = Path(manifest["path"])
    if not path.is_absolute():
        path = base / path
    with open(path, encoding="utf-8") as f:
        docs = [line.rstrip("\n") for line in f if line.strip()]
    return CorpusShard(manifest["language"], docs)


def load_manifest(path) -> List[CorpusShard]:
    """A manifest file holds one shard object or a list of them."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    base = Path(path).parent
    entries = data if isinstance(data, list) else [data]
    shards = []
    for entry in entries:
        entry = dict(entry)
        if not Path(entry["path"]).is_absolute():
            entry["path"] = str(base / entry["path"])
        shards.append(load_shard(entry))
    return shards


def corpus_stats(shards: Iterable[CorpusShard]) -> Dict[str, int]:
    stats: Dict[str, int] = {}
    for shard in shards:
        stats[shard.language] = stats.get(shard.language, 0) + shard.word_count
    return stats


def mixture_probabilities(shards: Sequence[CorpusShard], weights: Mapping[str, float]) -> np.ndarray:
    """Per-shard draw probability, proportional to language weight times word count."""
    if not shards:
        raise PipelineError("no shards to sample from")
    mass = []
    for shard in shards:
        if not shard.documents or shard.word_count == 0:
            raise EmptyShard(f"shard for {shard.language!r} has no words")
        w = weights.get(shard.language, 1.0)
        if not w > 0:
            raise ValueError(f"weight for {shard.language!r} must be positive")
        mass.append(w * shard.word_count)
    mass = np.asarray(mass, dtype=float)
    return mass / mass.sum()


def sample_mixture(shards: Sequence[CorpusShard], weights: Mapping[str, float], rng_seed=0,
                   count: int = 1) -> Iterator[Tuple[str, str]]:
    """Draw ``count`` ``(language, document)`` pairs with replacement.

    A shard is picked with probability proportional to weight times word
    count, then a document uniformly within it.  Oversampling a language
    is just a larger weight.
    """
    probs = mixture_probabilities(shards, weights)
    rng = np.random.default_rng(rng_seed)
    shard_idx = rng.choice(len(shards), size=count, p=probs)
    for i in shard_idx:
        shard = shards[i]
        yield shard.language, shard.documents[rng.integers(len(shard.documents))]


@dataclass(frozen=True)
class PackResult:
    steps: List[np.ndarray]
    sequences_per_step: int
    pad_count: int

    @property
    def num_sequences(self) -> int:
        return sum(len(s) for s in self.steps)


def pack(tokens: Sequence[int], sequence_length: int, tokens_per_step: int, pad_id: int = 0) -> PackResult:
    """Cut a token stream into fixed-length sequences grouped into steps.

    Every step but the last holds ``tokens_per_step // sequence_length``
    sequences.  The last sequence is right-padded with ``pad_id``.
    """
    if sequence_length < 1 or tokens_per_step < 1:
        raise ValueError("sequence_length and tokens_per_step must be positive")
    if tokens_per_step % sequence_length:
        raise IndivisibleBudget(f"{tokens_per_step} tokens/step is not a multiple of {sequence_length}")
    per_step = tokens_per_step // sequence_length
    stream = np.asarray(tokens, dtype=np.int64)
    num_seqs = max(1, -(-len(stream) // sequence_length))
    pad = num_seqs * sequence_length - len(stream)
    flat = np.concatenate([stream, np.full(pad, pad_id, dtype=np.int64)])
    seqs = flat.reshape(num_seqs, sequence_length)
    steps = [seqs[i:i + per_step] for i in range(0, num_seqs, per_step)]
    return PackResult(steps, per_step, pad)
