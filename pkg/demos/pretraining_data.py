"""
Pretraining data at desk scale
==============================

Span corruption, a language mixture with Italian oversampled, and
packing a token stream into fixed-size steps.
"""
import numpy as np

from medtag.pretrain import (
    CORPUS_SOURCES,
    DEFAULT_MIXTURE,
    LARGE_CONFIG,
    XL_CONFIG,
    CorpusShard,
    corpus_stats,
    corrupt_span,
    mixture_probabilities,
    pack,
    reconstruct,
    sample_mixture,
)

###############################################################################
# Span corruption
# ---------------
words = "the patient was admitted with dilated cardiomyopathy and reduced ejection fraction".split()
ex = corrupt_span(words, noise_density=0.3, mean_span_length=2, rng_seed=0)
print(" ".join(ex.source))
print(" ".join(ex.target))
assert reconstruct(ex.source, ex.target) == words

# Integer ids get negative sentinels, so they never collide with real ids.
ids = list(range(100, 140))
ex = corrupt_span(ids, rng_seed=1)
print(ex.num_masked, ex.num_spans, ex.source[:12], ex.target)

###############################################################################
# Corpus size and mixture
# -----------------------
totals = {lang: sum(s.values()) for lang, s in CORPUS_SOURCES.items()}
for lang, n in totals.items():
    print(f"{lang}: {n / 1e6:8.1f}M words")

# Toy shards with word counts proportional to the real ones.
shards = [CorpusShard(lang, [" ".join(["w"] * 10)] * (n // 1_000_000)) for lang, n in totals.items()]
print(corpus_stats(shards))
print("no oversampling:", mixture_probabilities(shards, {}).round(4))
print("Italian x2    :", mixture_probabilities(shards, DEFAULT_MIXTURE).round(4))

draws = [lang for lang, _ in sample_mixture(shards, DEFAULT_MIXTURE, rng_seed=0, count=50_000)]
print({lang: round(draws.count(lang) / len(draws), 4) for lang in totals})

###############################################################################
# Packing
# -------
for name, config in (("large", LARGE_CONFIG), ("xl", XL_CONFIG)):
    res = pack(np.arange(200_000), config.sequence_length, config.tokens_per_step)
    print(name, config.sequences_per_step, "seq/step,", len(res.steps), "steps,", res.pad_count, "pad")
