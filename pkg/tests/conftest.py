import random

import pytest

from medtag.core import CharTokenizer, Span, TaggedSentence, WordTokenizer, builtin_schemas, make_schema

ACCEPTANCE_LINES = []

CARDIO = ("Patient", "with", "dilated", "cardiomyopathy")


@pytest.fixture
def disease():
    return builtin_schemas()["ncbi-disease"]


@pytest.fixture
def abstrct():
    return builtin_schemas()["abstrct"]


@pytest.fixture
def cardio():
    return TaggedSentence(CARDIO, (Span(2, 4, "Disease"),))


@pytest.fixture(params=["word", "char"])
def tokenizer(request):
    return WordTokenizer() if request.param == "word" else CharTokenizer()


def random_words(rng, n, alphabet="abcdefgh", max_len=4):
    return tuple("".join(rng.choice(alphabet) for _ in range(rng.randint(1, max_len))) for _ in range(n))


def random_tagged(rng, words, labels, p_span=0.3):
    spans = []
    i = 0
    while i < len(words):
        if rng.random() < p_span:
            j = rng.randint(i + 1, min(len(words), i + 3))
            spans.append(Span(i, j, rng.choice(labels)))
            i = j
        else:
            i += 1
    return TaggedSentence(words, tuple(spans))


def random_schema(rng, max_labels=3):
    k = rng.randint(1, max_labels)
    return make_schema("rand", rng.sample(["Disease", "Chemical", "Claim", "Premise", "X-1", "y_2"], k))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
