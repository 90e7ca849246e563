"""
Tagging by constrained generation
=================================

A sentence is labeled by re-generating it with tag markers inserted.
The decoder only ever proposes tokens that keep the output a valid
annotated copy of the input, so whatever the scorer prefers, the result
parses.
"""
import random

from medtag.annotation import parse, serialize
from medtag.automaton import TagAutomaton, count_paths
from medtag.core import CharTokenizer, Span, TaggedSentence, WordTokenizer, builtin_schemas
from medtag.decoder import decode, exhaustive_argmax
from medtag.metrics import span_f1
from medtag.scorers import gold_scorer, ngram_scorer_train, random_table_scorer, uniform_scorer

schema = builtin_schemas()["ncbi-disease"]
words = ("Patient", "with", "dilated", "cardiomyopathy")
print("labels:", schema.labels, "marker ids:", schema.open_id("Disease"), schema.close_id("Disease"))

###############################################################################
# What the automaton allows
# -------------------------
# At the start of a word we can copy it, or open a tag. Inside a tag we can
# also close it, but never right after opening it (no empty spans).
automaton = TagAutomaton(words, schema, WordTokenizer())
state = automaton.initial()
print([a.kind.name for a, _ in automaton.allowed(state)])
state = automaton.step(state, automaton.allowed(state)[1][0])  # open <Disease>
print([a.kind.name for a, _ in automaton.allowed(state)])

# The number of distinct annotations of n words grows fast.
for n in range(7):
    print(n, count_paths(n, 1), count_paths(n, 2))

###############################################################################
# Scorers
# -------
# Under a uniform scorer a path costs the log of its branching at every
# step, and many annotations tie with the bare one. Greedy search and the
# exact search break the tie toward copying; a beam of 4 can prune the bare
# prefix early and return another tied annotation.
for width in (1, 4):
    r = decode(words, schema, uniform_scorer(), WordTokenizer(), beam_width=width)
    print(f"beam {width}: {r.logprob:.4f}  {r.text}")
print("exact :", exhaustive_argmax(words, schema, uniform_scorer(), WordTokenizer()).text)

# A gold scorer puts all its mass on one reference annotation.
gold = TaggedSentence(words, (Span(2, 4, "Disease"),))
for tok in (WordTokenizer(), CharTokenizer()):
    result = decode(words, schema, gold_scorer(gold, schema, tok), tok)
    print(type(tok).__name__, result.text, result.logprob, result.steps)

# With a random table the beam can miss the best annotation; a beam as wide
# as the number of annotations cannot.
scorer = random_table_scorer(seed=3)
exact = exhaustive_argmax(words, schema, scorer, WordTokenizer())
for width in (1, 4, count_paths(len(words), 1)):
    r = decode(words, schema, scorer, WordTokenizer(), beam_width=width)
    print(f"beam {width:3d}: {r.logprob:8.4f}  {r.text}")
print(f"exact   : {exact.logprob:8.4f}  {exact.text}")

###############################################################################
# A tiny learned scorer
# ---------------------
# Sentences mixing a few disease mentions into filler words.
rng = random.Random(0)
diseases = ["<Disease> fever </Disease>", "<Disease> cough </Disease>", "<Disease> heart failure </Disease>"]
filler = ["patient", "reports", "no", "and", "today", "history", "of", "the"]


def sentence():
    parts = [rng.choice(diseases) if rng.random() < 0.35 else rng.choice(filler) for _ in range(rng.randint(2, 6))]
    return parse(" ".join(parts), schema)


train = [sentence() for _ in range(200)]
test = [sentence() for _ in range(20)]
ngram = ngram_scorer_train(train, schema, order=3)
pred = [decode(ts.words, schema, ngram, WordTokenizer()).tagged for ts in test]
bare = [decode(ts.words, schema, uniform_scorer(), WordTokenizer()).tagged for ts in test]
print(serialize(pred[0], schema))
print("held-out F1, n-gram:", span_f1(test, pred).f1, " uniform:", round(span_f1(test, bare).f1, 4))
