import itertools
import random

import pytest

from medtag.annotation import parse, serialize
from medtag.automaton import (
    CLOSE_TAG,
    EMIT_EOS,
    EMIT_SUBTOKEN,
    DecodeState,
    TagAutomaton,
    allowed_actions,
    count_paths,
    detokenize,
    enumerate_annotations,
    open_tag,
    path_for,
    step,
)
from medtag.core import CharTokenizer, Span, WordTokenizer, make_schema
from medtag.errors import FinishedState, IllegalAction, TooManyPaths

from .conftest import random_schema, random_words


def kinds(allowed):
    return [a for a, _ in allowed]


def test_allowed_examples(disease, abstrct):
    words = ("a", "b", "c")
    tok = WordTokenizer()
    assert kinds(allowed_actions(DecodeState(0, 0, None), words, disease, tok)) == [EMIT_SUBTOKEN, open_tag("Disease")]
    assert kinds(allowed_actions(DecodeState(3, 0, ("Disease", 1)), words, disease, tok)) == [CLOSE_TAG]
    assert kinds(allowed_actions(DecodeState(1, 0, ("Claim", 0)), ("a", "b"), abstrct, tok)) == [EMIT_SUBTOKEN, CLOSE_TAG]
    assert kinds(allowed_actions(DecodeState(3, 0, None), words, disease, tok)) == [EMIT_EOS]
    # no close right after open
    assert kinds(allowed_actions(DecodeState(1, 0, ("Disease", 1)), words, disease, tok)) == [EMIT_SUBTOKEN]
    with pytest.raises(FinishedState):
        allowed_actions(DecodeState(3, 0, None, True), words, disease, tok)


def test_no_tags_mid_word(disease):
    a = TagAutomaton(("ab",), disease, CharTokenizer())
    assert kinds(a.allowed(DecodeState(0, 1, None))) == [EMIT_SUBTOKEN]
    assert kinds(a.allowed(DecodeState(0, 1, ("Disease", 0)))) == [EMIT_SUBTOKEN]


def test_step_examples(disease):
    tok = CharTokenizer()
    s = step(DecodeState(0, 0, None), open_tag("Disease"), ("x",), tok)
    assert s == DecodeState(0, 0, ("Disease", 0))
    s1 = step(DecodeState(), EMIT_SUBTOKEN, ("ab",), tok)
    assert s1 == DecodeState(0, 1)
    assert step(s1, EMIT_SUBTOKEN, ("ab",), tok) == DecodeState(1, 0)
    with pytest.raises(IllegalAction):
        step(DecodeState(1, 0, None, True), EMIT_EOS, ("ab",), tok)
    with pytest.raises(IllegalAction):
        step(DecodeState(), CLOSE_TAG, ("ab",), tok)
    with pytest.raises(IllegalAction):
        TagAutomaton(("a",), disease, tok).step(DecodeState(), open_tag("Chemical"))


def brute_force_count(n, num_labels):
    """Count well-formed BIO tag sequences of length n by brute force."""
    labels = range(num_labels)
    tags = ["O"] + [("B", l) for l in labels] + [("I", l) for l in labels]
    total = 0
    for seq in itertools.product(tags, repeat=n):
        prev = "O"
        for tag in seq:
            if tag != "O" and tag[0] == "I" and (prev == "O" or prev[1] != tag[1]):
                break
            prev = tag
        else:
            total += 1
    return total


def dfs_paths(automaton):
    return list(automaton.accepting_paths())


def test_count_paths_examples():
    assert count_paths(0, 1) == 1
    assert count_paths(0, 5) == 1
    assert count_paths(3, 1) == 13
    assert count_paths(1, 2) == 3
    with pytest.raises(ValueError):
        count_paths(-1, 1)
    with pytest.raises(ValueError):
        count_paths(2, 0)


def test_count_paths_matches_automaton_enumeration():
    # f(2,2) from exhaustive enumeration of the automaton, not the recurrence
    schema = make_schema("t", ["A", "B"])
    n_paths = len(dfs_paths(TagAutomaton(("x", "y"), schema, WordTokenizer())))
    assert n_paths == 11
    assert count_paths(2, 2) == n_paths
    assert len(enumerate_annotations(("x", "y"), schema)) == n_paths
    assert len(dfs_paths(TagAutomaton(("x", "y", "z"), make_schema("t", ["A"]), WordTokenizer()))) == 13


@pytest.mark.parametrize("n", range(0, 7))
@pytest.mark.parametrize("num_labels", [1, 2, 3])
def test_count_paths_vs_brute_force(n, num_labels):
    assert count_paths(n, num_labels) == brute_force_count(n, num_labels)


def test_count_paths_is_exact_for_large_n():
    v = count_paths(200, 3)
    assert v > 2**64 and isinstance(v, int)


def test_enumerate_annotations_small(disease):
    anns = enumerate_annotations(("w",), disease)
    assert {a.spans for a in anns} == {(), (Span(0, 1, "Disease"),)}
    with pytest.raises(TooManyPaths):
        enumerate_annotations(("a",) * 8, disease, limit=100)


@pytest.mark.parametrize("tok", [WordTokenizer(), CharTokenizer()])
def test_soundness_completeness_bijection(tok):
    rng = random.Random(3)
    for _ in range(40):
        schema = random_schema(rng, max_labels=2)
        words = random_words(rng, rng.randint(0, 4))
        automaton = TagAutomaton(words, schema, tok)
        texts = []
        for path in automaton.accepting_paths():
            text = detokenize([t for _, t in path], schema, tok)
            parse(text, schema, source_words=words)  # soundness
            texts.append(text)
        expected = {serialize(ts, schema) for ts in enumerate_annotations(words, schema)}
        assert len(texts) == len(set(texts)) == count_paths(len(words), len(schema.labels))
        assert set(texts) == expected


def test_tokenizer_independence():
    rng = random.Random(11)
    for _ in range(20):
        schema = random_schema(rng, max_labels=2)
        words = random_words(rng, rng.randint(0, 4))
        a = sum(1 for _ in TagAutomaton(words, schema, WordTokenizer()).accepting_paths())
        b = sum(1 for _ in TagAutomaton(words, schema, CharTokenizer()).accepting_paths())
        assert a == b


def test_allowed_ids_distinct_in_reachable_states():
    rng = random.Random(5)
    for _ in range(200):
        schema = random_schema(rng)
        tok = rng.choice([WordTokenizer(), CharTokenizer()])
        words = random_words(rng, rng.randint(0, 6), alphabet="aab")
        automaton = TagAutomaton(words, schema, tok)
        state = automaton.initial()
        while not state.finished:
            allowed = automaton.allowed(state)
            ids = [t for _, t in allowed]
            assert len(ids) == len(set(ids))
            assert [automaton.action_key(a) for a, _ in allowed] == sorted(automaton.action_key(a) for a, _ in allowed)
            state = automaton.step(state, rng.choice(allowed)[0])
            if state.open:
                assert state.open[1] <= state.word_pos and state.open[1] < len(words)
        assert state.word_pos == len(words) and state.open is None


def test_path_for_replays(cardio, disease, tokenizer):
    automaton = TagAutomaton(cardio.words, disease, tokenizer)
    path = path_for(cardio, disease, tokenizer)
    state = automaton.initial()
    for action, tok in path:
        assert (action, tok) in automaton.allowed(state)
        state = automaton.step(state, action)
    assert state.finished
    n_sub = sum(len(tokenizer.encode(w)) for w in cardio.words)
    assert len(path) == n_sub + 2 * len(cardio.spans) + 1
    assert detokenize([t for _, t in path], disease, tokenizer) == serialize(cardio, disease)
