"""Strict span F1, ROUGE-L and inter-annotator agreement statistics."""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Sequence, Tuple

from scipy.stats import rankdata

from .core import TaggedSentence
from .errors import (
    ConstantVector,
    DegenerateAgreement,
    InvalidPermutation,
    LengthMismatch,
    MalformedJson,
    MissingField,
    WordMismatch,
)


def _ratio(num, den):
    return num / den if den else 0.0


def prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


@dataclass(frozen=True)
class LabelScore:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class F1Report:
    per_label: Dict[str, LabelScore]
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def micro(self) -> Tuple[float, float, float]:
        return self.precision, self.recall, self.f1

    def to_json(self, digits=None) -> dict:
        r = (lambda x: round(x, digits)) if digits is not None else (lambda x: x)
        return {
            "per_label": {
                label: {"tp": s.tp, "fp": s.fp, "fn": s.fn, "precision": r(s.precision),
                        "recall": r(s.recall), "f1": r(s.f1)}
                for label, s in sorted(self.per_label.items())
            },
            "micro": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": r(self.precision),
                      "recall": r(self.recall), "f1": r(self.f1)},
        }


def span_f1(golds: Sequence[TaggedSentence], preds: Sequence[TaggedSentence]) -> F1Report:
    """Strict span-level F1: a prediction counts only on identical label, start and end."""
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} gold sentences but {len(preds)} predictions")
    counts = defaultdict(lambda: [0, 0, 0])
    for i, (gold, pred) in enumerate(zip(golds, preds)):
        if gold.words != pred.words:
            raise WordMismatch(f"sentence {i}: predicted words differ from gold words")
        gold_spans = Counter(gold.spans)
        pred_spans = Counter(pred.spans)
        for span in gold_spans | pred_spans:
            tp = min(gold_spans[span], pred_spans[span])
            c = counts[span.label]
            c[0] += tp
            c[1] += pred_spans[span] - tp
            c[2] += gold_spans[span] - tp
    per_label = {label: LabelScore(tp, fp, fn, *prf(tp, fp, fn)) for label, (tp, fp, fn) in counts.items()}
    tp, fp, fn = (sum(c[k] for c in counts.values()) for k in range(3))
    return F1Report(per_label, *prf(tp, fp, fn), tp=tp, fp=fp, fn=fn)


_TERMINAL_PUNCT = ".,;:!?"


def rouge_tokenize(text: str) -> List[str]:
    """Lowercase, split on whitespace, strip trailing punctuation from each token."""
    out = []
    for tok in text.lower().split():
        tok = tok.rstrip(_TERMINAL_PUNCT)
        if tok:
            out.append(tok)
    return out


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> Tuple[float, float, float]:
    """ROUGE-L ``(precision, recall, f1)``.  Strings are run through :func:`rouge_tokenize`."""
    if isinstance(candidate, str):
        candidate = rouge_tokenize(candidate)
    if isinstance(reference, str):
        reference = rouge_tokenize(reference)
    lcs = lcs_length(candidate, reference)
    p = _ratio(lcs, len(candidate))
    r = _ratio(lcs, len(reference))
    # 2PR/(P+R) simplifies to 2*LCS/(|c|+|r|); this form avoids rounding
    f1 = _ratio(2 * lcs, len(candidate) + len(reference)) if lcs else 0.0
    return p, r, f1


def cohens_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise LengthMismatch("need at least one rated item")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    count_a, count_b = Counter(labels_a), Counter(labels_b)
    p_e = sum(count_a[c] * count_b[c] for c in count_a) / (n * n)
    if p_e == 1:
        if p_o == 1:
            return 1.0
        raise DegenerateAgreement("chance agreement is 1 but observed agreement is not")
    return (p_o - p_e) / (1 - p_e)


def kappa_from_confusion(matrix: Sequence[Sequence[int]]) -> float:
    """Kappa from a square confusion matrix (rows: rater A, columns: rater B)."""
    a, b = [], []
    for i, row in enumerate(matrix):
        for j, count in enumerate(row):
            a.extend([i] * count)
            b.extend([j] * count)
    return cohens_kappa(a, b)


def spearman_rank(ranks_a: Sequence[float], ranks_b: Sequence[float]) -> float:
    """Pearson correlation of the (average-tied) rank vectors."""
    if len(ranks_a) != len(ranks_b):
        raise LengthMismatch(f"{len(ranks_a)} vs {len(ranks_b)} values")
    if len(ranks_a) < 2:
        raise LengthMismatch("need at least two values")
    ra, rb = rankdata(ranks_a), rankdata(ranks_b)
    ma, mb = ra.mean(), rb.mean()
    da, db = ra - ma, rb - mb
    va, vb = float(da @ da), float(db @ db)
    if va == 0 or vb == 0:
        raise ConstantVector("Spearman correlation is undefined for a constant vector")
    return max(-1.0, min(1.0, float(da @ db) / math.sqrt(va * vb)))


@dataclass(frozen=True)
class RankingRecord:
    question: str
    rater: str
    ranks: Mapping[str, int]

    def validate(self):
        values = sorted(self.ranks.values())
        if values != list(range(1, len(values) + 1)):
            raise InvalidPermutation(
                f"question {self.question!r}, rater {self.rater!r}: ranks {values} are not a permutation of 1..{len(values)}")

    def best(self) -> str:
        return min(self.ranks, key=self.ranks.get)


def read_rankings(path) -> List[RankingRecord]:
    """Read a JSON Lines file of ``{"question", "rater", "ranks"}`` records."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedJson(str(e), line=lineno) from None
            for key in ("question", "rater", "ranks"):
                if key not in data:
                    raise MissingField(f"missing field {key!r}", line=lineno)
            ranks = {str(m): int(r) for m, r in data["ranks"].items()}
            records.append(RankingRecord(str(data["question"]), str(data["rater"]), ranks))
    return records


def _pairs_by_question(records):
    by_question = defaultdict(dict)
    for rec in records:
        rec.validate()
        by_question[rec.question][rec.rater] = rec
    for question in sorted(by_question):
        raters = by_question[question]
        for ra, rb in itertools.combinations(sorted(raters), 2):
            yield question, raters[ra], raters[rb]


def average_spearman(records: Sequence[RankingRecord]) -> float:
    """Mean Spearman correlation over every pair of raters of every question."""
    values = []
    for _, a, b in _pairs_by_question(records):
        models = sorted(set(a.ranks) & set(b.ranks))
        values.append(spearman_rank([a.ranks[m] for m in models], [b.ranks[m] for m in models]))
    if not values:
        raise LengthMismatch("no question was ranked by two raters")
    return sum(values) / len(values)


def best_model_kappa(records: Sequence[RankingRecord]) -> float:
    """Kappa over the model each rater ranked best, one item per rater pair and question."""
    a_labels, b_labels = [], []
    for _, a, b in _pairs_by_question(records):
        a_labels.append(a.best())
        b_labels.append(b.best())
    return cohens_kappa(a_labels, b_labels)


@dataclass(frozen=True)
class RankSummary:
    best: Dict[str, int]
    histogram: Dict[str, Dict[int, int]] = field(default_factory=dict)


def rank_aggregate(records: Sequence[RankingRecord]) -> RankSummary:
    """How often each model got each rank, and how often it was ranked best."""
    histogram = defaultdict(Counter)
    for rec in records:
        rec.validate()
        for model, rank in rec.ranks.items():
            histogram[model][rank] += 1
    models = sorted(histogram)
    return RankSummary(
        best={m: histogram[m][1] for m in models},
        histogram={m: dict(sorted(histogram[m].items())) for m in models},
    )
