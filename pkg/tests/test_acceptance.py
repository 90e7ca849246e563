"""Headline acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL`` line that pytest prints in an
"acceptance criteria" section at the end of the run.
"""
import random
import time

import numpy as np
import pytest

from medtag.annotation import parse, serialize
from medtag.automaton import TagAutomaton, count_paths, detokenize, enumerate_annotations
from medtag.core import CharTokenizer, Span, TaggedSentence, WordTokenizer, make_schema
from medtag.decoder import decode, exhaustive_argmax
from medtag.errors import AnnotationError
from medtag.metrics import kappa_from_confusion, rouge_l, span_f1, spearman_rank
from medtag.pretrain import (
    CORPUS_SOURCES,
    DEFAULT_MIXTURE,
    LARGE_CONFIG,
    XL_CONFIG,
    CorpusShard,
    corrupt_span,
    mixture_probabilities,
    pack,
    reconstruct,
    sample_mixture,
)
from medtag.scorers import gold_scorer, ngram_scorer_train, random_table_scorer, uniform_scorer
from medtag.taskio import add_label_prefix

from .conftest import ACCEPTANCE_LINES, CARDIO, random_schema, random_tagged, random_words

pytestmark = pytest.mark.acceptance


def record(name, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


SCHEMAS = {1: make_schema("one", ["Disease"]), 2: make_schema("two", ["Claim", "Premise"])}


def test_automaton_soundness_completeness():
    t0 = time.perf_counter()
    problems = []
    for num_labels, schema in SCHEMAS.items():
        for n in range(7):
            words = tuple(f"w{i}" for i in range(n))
            anns = enumerate_annotations(words, schema)
            expected = count_paths(n, num_labels)
            if len(anns) != expected or len(set(anns)) != expected:
                problems.append(f"n={n} L={num_labels}: {len(anns)} != {expected}")
            texts = set()
            for ts in anns:
                text = serialize(ts, schema)
                if parse(text, schema, source_words=words) != ts:
                    problems.append(f"n={n} L={num_labels}: {text!r} does not round-trip")
                texts.add(text)
            # the automaton itself accepts exactly these strings
            paths = {detokenize([t for _, t in p], schema, WordTokenizer())
                     for p in TagAutomaton(words, schema, WordTokenizer()).accepting_paths()}
            if paths != texts:
                problems.append(f"n={n} L={num_labels}: automaton language differs")
    goldens = count_paths(3, 1) == 13 and all(count_paths(0, k) == 1 for k in (1, 2, 5))
    elapsed = time.perf_counter() - t0
    ok = not problems and goldens and elapsed < 10
    record("automaton soundness/completeness", ok,
           f"n<=6, L<=2, f(3,1)={count_paths(3, 1)}, {len(problems)} problems, {elapsed:.2f}s (limit 10s)")


def test_oracle_equivalence():
    t0 = time.perf_counter()
    checked = mismatches = 0
    tok = WordTokenizer()
    for seed in range(50):
        scorer = random_table_scorer(seed)
        for num_labels, schema in SCHEMAS.items():
            for n in range(6):
                words = tuple(f"t{seed % 7}{i}" for i in range(n))
                beam = decode(words, schema, scorer, tok, beam_width=count_paths(n, num_labels))
                oracle = exhaustive_argmax(words, schema, scorer, tok)
                checked += 1
                if beam.tagged != oracle.tagged or beam.logprob != oracle.logprob:
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    record("oracle equivalence", mismatches == 0 and elapsed < 60,
           f"{checked} (scorer, input) pairs, {mismatches} mismatches, exact score equality, "
           f"{elapsed:.2f}s (limit 60s)")


def test_decode_validity_fuzz():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    unparseable = word_mismatch = 0
    tokenizers = [WordTokenizer(), CharTokenizer()]
    for i in range(10_000):
        schema = random_schema(rng)
        tok = tokenizers[i % 2]
        words = random_words(rng, rng.randint(0, 8), alphabet="abcdéz", max_len=3)
        result = decode(words, schema, random_table_scorer(i), tok, beam_width=4)
        try:
            parsed = parse(detokenize(result.tokens, schema, tok), schema)
        except AnnotationError:
            unparseable += 1
            continue
        if parsed.words != tuple(words) or parsed != result.tagged:
            word_mismatch += 1
    elapsed = time.perf_counter() - t0
    ok = unparseable == 0 and word_mismatch == 0 and elapsed < 60
    record("decode validity fuzz", ok,
           f"10000 decodes at beam 4, {unparseable} unparseable, {word_mismatch} WordMismatch, "
           f"{elapsed:.2f}s (limit 60s)")


def test_gold_round_trip():
    rng = random.Random(7)
    schema = SCHEMAS[2]
    golds, preds = [], []
    for i in range(500):
        tok = CharTokenizer() if i % 2 else WordTokenizer()
        gold = random_tagged(rng, random_words(rng, rng.randint(0, 12)), list(schema.labels))
        golds.append(gold)
        preds.append(decode(gold.words, schema, gold_scorer(gold, schema, tok), tok).tagged)
    report = span_f1(golds, preds)
    record("gold round-trip", report.f1 == 1.0 and report.tp > 0,
           f"500 sentences, {report.tp} gold spans, micro F1 = {report.f1}")


def test_metric_goldens():
    w = ("a", "b", "c", "d", "e")
    gold = TaggedSentence(w, (Span(0, 2, "Disease"),))
    pred = TaggedSentence(w, (Span(0, 2, "Disease"), Span(3, 4, "Disease")))
    f = span_f1([gold], [pred])
    checks = {
        "span P/R/F1": (f.precision, f.recall) == (0.5, 1.0) and abs(f.f1 - 0.6667) <= 1e-4,
        "rouge_l F1": rouge_l("the cat", "the cat sat")[2] == 0.8,
        "kappa": abs(kappa_from_confusion([[20, 5], [10, 15]]) - 0.40) <= 1e-9,
        "rho": spearman_rank([1, 2, 3], [1, 3, 2]) == 0.5,
        "rho reversal": spearman_rank([1, 2, 3], [3, 2, 1]) == -1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    record("metric goldens", not failed,
           f"F1={f.f1:.4f}, ROUGE-L={rouge_l('the cat', 'the cat sat')[2]}, "
           f"kappa={kappa_from_confusion([[20, 5], [10, 15]]):.10f}, rho=0.5/-1.0; failed: {failed or 'none'}")


def test_corruption():
    rng = np.random.default_rng(0)
    densities = []
    failures = 0
    for i in range(10_000):
        tokens = rng.integers(0, 32000, size=200).tolist()
        ex = corrupt_span(tokens, 0.15, 3, rng_seed=i)
        densities.append(ex.num_masked / len(tokens))
        lengths = rng.integers(1, 120)
        other = rng.integers(0, 500, size=lengths).tolist()
        ex2 = corrupt_span(other, float(rng.uniform(0, 0.9)), float(rng.uniform(1, 5)), rng_seed=i)
        if reconstruct(ex2.source, ex2.target) != other or reconstruct(ex.source, ex.target) != tokens:
            failures += 1
    mean = float(np.mean(densities))
    ok = abs(mean - 0.15) <= 0.01 and failures == 0
    record("span corruption", ok,
           f"mean realized density {mean:.4f} (target 0.15 +/- 0.01), {failures}/10000 reconstruct failures")


def _fixture_shards(scale=100_000):
    """One shard per language, word counts are the corpus tables divided by ``scale``."""
    rng = random.Random(0)
    shards = []
    for lang, sources in CORPUS_SOURCES.items():
        words = round(sum(sources.values()) / scale)
        docs = []
        while words > 0:
            k = min(words, rng.randint(5, 40))
            docs.append(" ".join(f"{lang}{j}" for j in range(k)))
            words -= k
        shards.append(CorpusShard(lang, docs))
    return shards


def test_mixture_italian_share():
    shards = _fixture_shards()
    probs = mixture_probabilities(shards, DEFAULT_MIXTURE)
    expected = float(probs[[s.language for s in shards].index("it")])
    table = {lang: sum(v.values()) for lang, v in CORPUS_SOURCES.items()}
    table_share = 2 * table["it"] / sum(DEFAULT_MIXTURE[l] * c for l, c in table.items())
    draws = [lang for lang, _ in sample_mixture(shards, DEFAULT_MIXTURE, rng_seed=0, count=100_000)]
    share = draws.count("it") / len(draws)
    unweighted = table["it"] / sum(table.values())
    ok = abs(share - expected) <= 0.01 and abs(expected - table_share) < 1e-3
    record("mixture oversampling", ok,
           f"Italian share {share:.4f} vs weighted {expected:.4f} (tables: {table_share:.4f}, "
           f"unweighted {unweighted:.4f}) over 100000 draws")


def test_packing():
    per_step = (LARGE_CONFIG.sequences_per_step, XL_CONFIG.sequences_per_step)
    conserved = True
    for config, n in ((LARGE_CONFIG, 300_001), (XL_CONFIG, 123_457)):
        stream = np.arange(1, n + 1)
        res = pack(stream, config.sequence_length, config.tokens_per_step)
        flat = np.concatenate([s.reshape(-1) for s in res.steps])
        conserved &= bool((flat[:n] == stream).all()) and len(flat) - res.pad_count == n
        conserved &= all(len(s) == 64 for s in res.steps[:-1])
    record("packing budgets", per_step == (64, 64) and conserved,
           f"65536/1024 -> {per_step[0]}, 30720/480 -> {per_step[1]} sequences/step, "
           f"token conservation {'exact' if conserved else 'broken'}")


def test_multitask_prefix():
    got = add_label_prefix(CARDIO, make_schema("ncbi-disease", ["Disease"]))
    record("multi-task prefix", got == "<Disease> Patient with dilated cardiomyopathy", repr(got))


DISEASES = [("fever",), ("cough",), ("heart", "failure"), ("dilated", "cardiomyopathy"), ("rash",)]
FILLER = ["patient", "with", "and", "reports", "no", "severe", "the", "today", "history", "of"]


def synthetic_corpus(rng, size):
    corpus = []
    for _ in range(size):
        words, spans = [], []
        for _ in range(rng.randint(2, 5)):
            if rng.random() < 0.4:
                d = rng.choice(DISEASES)
                spans.append(Span(len(words), len(words) + len(d), "Disease"))
                words.extend(d)
            else:
                words.append(rng.choice(FILLER))
        corpus.append(TaggedSentence(words, spans))
    return corpus


def test_ngram_beats_uniform():
    schema = make_schema("ncbi-disease", ["Disease"])
    corpus = synthetic_corpus(random.Random(11), 50)
    tok = WordTokenizer()
    ngram = ngram_scorer_train(corpus, schema)
    f_ngram = span_f1(corpus, [decode(ts.words, schema, ngram, tok).tagged for ts in corpus]).f1
    f_uniform = span_f1(corpus, [decode(ts.words, schema, uniform_scorer(), tok).tagged for ts in corpus]).f1
    record("n-gram beats uniform", f_ngram > f_uniform,
           f"training-set F1 n-gram {f_ngram:.4f} vs uniform {f_uniform:.4f} (50 sentences)")
