import random

import pytest

from medtag.annotation import parse
from medtag.automaton import count_paths, detokenize
from medtag.core import CharTokenizer, Span, TaggedSentence, WordTokenizer, make_schema
from medtag.decoder import DecodeFailure, DecodeResult, decode, decode_batch, exhaustive_argmax
from medtag.errors import ScorerFailure
from medtag.metrics import span_f1
from medtag.scorers import Scorer, gold_scorer, random_table_scorer, uniform_scorer

from .conftest import CARDIO, random_schema, random_words


def test_gold_example(cardio, disease, tokenizer):
    result = decode(CARDIO, disease, gold_scorer(cardio, disease, tokenizer), tokenizer)
    assert result.tagged == cardio
    assert result.text == "Patient with <Disease> dilated cardiomyopathy </Disease>"
    assert result.logprob == 0.0
    n_sub = sum(len(tokenizer.encode(w)) for w in CARDIO)
    assert result.steps == n_sub + 2 * 1 + 1
    assert span_f1([cardio], [result.tagged]).f1 == 1.0


def test_uniform_beam_one_is_bare(abstrct, tokenizer):
    result = decode(("a", "bc", "d"), abstrct, uniform_scorer(), tokenizer, beam_width=1)
    assert result.tagged == TaggedSentence(("a", "bc", "d"))


def test_beam_covering_all_paths_equals_oracle():
    schema = make_schema("t", ["L"])
    words = ("x", "y", "z")
    assert count_paths(3, 1) == 13
    for seed in range(20):
        scorer = random_table_scorer(seed)
        beam = decode(words, schema, scorer, WordTokenizer(), beam_width=13)
        oracle = exhaustive_argmax(words, schema, scorer, WordTokenizer())
        assert beam == oracle


def test_exhaustive_examples(cardio, disease, tokenizer):
    gold = gold_scorer(cardio, disease, tokenizer)
    oracle = exhaustive_argmax(CARDIO, disease, gold, tokenizer)
    assert oracle.tagged == cardio
    assert oracle.logprob == decode(CARDIO, disease, gold, tokenizer).logprob
    assert exhaustive_argmax(CARDIO, disease, uniform_scorer(), tokenizer).tagged.spans == ()


def test_empty_sentence(disease):
    result = decode((), disease, uniform_scorer(), WordTokenizer())
    assert result.tagged == TaggedSentence(()) and result.steps == 1 and result.text == ""


def test_invalid_beam(disease):
    with pytest.raises(ValueError):
        decode(("a",), disease, uniform_scorer(), WordTokenizer(), beam_width=0)


def test_wider_beam_never_beats_exact_optimum():
    rng = random.Random(4)
    for i in range(150):
        schema = random_schema(rng, max_labels=2)
        words = random_words(rng, rng.randint(1, 4))
        scorer = random_table_scorer(i)
        exact = decode(words, schema, scorer, WordTokenizer(), beam_width=count_paths(len(words), len(schema.labels)))
        for width in (1, 2, 4, 8):
            assert decode(words, schema, scorer, WordTokenizer(), beam_width=width).logprob <= exact.logprob
        huge = decode(words, schema, scorer, WordTokenizer(), beam_width=10_000)
        assert huge.logprob == exact.logprob


def test_decode_is_deterministic(abstrct):
    rng = random.Random(9)
    for i in range(30):
        words = random_words(rng, rng.randint(1, 7))
        runs = {repr(decode(words, abstrct, random_table_scorer(i), CharTokenizer())) for _ in range(3)}
        assert len(runs) == 1


def test_decode_output_parses_small_fuzz():
    rng = random.Random(8)
    for i in range(300):
        schema = random_schema(rng)
        tok = rng.choice([WordTokenizer(), CharTokenizer()])
        words = random_words(rng, rng.randint(0, 8))
        result = decode(words, schema, random_table_scorer(i), tok)
        assert parse(detokenize(result.tokens, schema, tok), schema, source_words=words) == result.tagged


def test_multitask_conditioning_reaches_scorer(disease):
    seen = []

    class Spy(Scorer):
        normalized = True

        def logprobs(self, request):
            seen.append(request.conditioning)
            return uniform_scorer().logprobs(request)

    decode(("a",), disease, Spy(), WordTokenizer(), conditioning="<Disease> a")
    assert set(seen) == {"<Disease> a"}


class FailOn(Scorer):
    normalized = True

    def __init__(self, bad):
        self.bad = bad

    def logprobs(self, request):
        if request.conditioning == self.bad:
            raise ScorerFailure("remote timeout")
        return uniform_scorer().logprobs(request)


def test_decode_batch(abstrct):
    tok = WordTokenizer()
    sentences = [("a", "b"), ("c",), ("d", "e", "f")]
    scorer = random_table_scorer(1)
    assert decode_batch(sentences, abstrct, scorer, tok, 4) == [decode(s, abstrct, scorer, tok) for s in sentences]
    assert decode_batch([], abstrct, scorer, tok) == []
    parallel = decode_batch(sentences * 10, abstrct, scorer, tok, 4, parallelism=4)
    assert parallel == decode_batch(sentences * 10, abstrct, scorer, tok, 4, parallelism=1)


def test_decode_batch_isolates_errors(abstrct):
    out = decode_batch([("a",), ("bad",), ("c",)], abstrct, FailOn("bad"), WordTokenizer())
    assert [type(r) for r in out] == [DecodeResult, DecodeFailure, DecodeResult]
    assert out[1].index == 1 and isinstance(out[1].error, ScorerFailure)
    with pytest.raises(ValueError):
        decode_batch([("a",)], abstrct, FailOn("bad"), WordTokenizer(), parallelism=0)


def test_scorer_failure_propagates_from_decode(abstrct):
    with pytest.raises(ScorerFailure):
        decode(("bad",), abstrct, FailOn("bad"), WordTokenizer())
