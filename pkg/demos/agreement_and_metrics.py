"""
Scoring outputs and raters
==========================

Strict span F1 for tagging, ROUGE-L for generated answers, and the
agreement statistics used when people rank model answers.
"""
import random

import numpy as np

from medtag.annotation import parse
from medtag.core import builtin_schemas
from medtag.metrics import (
    RankingRecord,
    average_spearman,
    best_model_kappa,
    cohens_kappa,
    kappa_from_confusion,
    rank_aggregate,
    rouge_l,
    span_f1,
    spearman_rank,
)

###############################################################################
# Span F1
# -------
# A predicted span only counts if label, start and end all match.
schema = builtin_schemas()["abstrct"]
gold = [parse("<Claim> drug A works </Claim> because <Premise> pain fell </Premise>", schema)]
pred = [parse("<Claim> drug A works </Claim> because <Premise> pain </Premise> fell", schema)]
report = span_f1(gold, pred)
print(report.micro)
for label, score in report.per_label.items():
    print(label, score.tp, score.fp, score.fn)

###############################################################################
# ROUGE-L
# -------
print(rouge_l("The cat sat.", "the cat sat on the mat"))
print(rouge_l("insulin lowers blood glucose", "blood glucose is lowered by insulin"))

###############################################################################
# Cohen's kappa
# -------------
# From a confusion matrix, and as a sanity check, two independent raters.
print(kappa_from_confusion([[20, 5], [10, 15]]))
rng = np.random.default_rng(0)
print(cohens_kappa(rng.integers(0, 3, 5000).tolist(), rng.integers(0, 3, 5000).tolist()))

###############################################################################
# Rankings of model answers
# -------------------------
# Two raters rank four models on 30 questions. Rater B mostly agrees with A
# but swaps a neighbouring pair now and then.
models = ["baseline", "domain", "instruct", "small"]
prng = random.Random(1)
records = []
for q in range(30):
    order = prng.sample(models, 4)
    ranks_a = {m: i + 1 for i, m in enumerate(order)}
    ranks_b = dict(ranks_a)
    if prng.random() < 0.4:
        i = prng.randrange(3)
        a, b = order[i], order[i + 1]
        ranks_b[a], ranks_b[b] = ranks_b[b], ranks_b[a]
    records += [RankingRecord(f"q{q}", "A", ranks_a), RankingRecord(f"q{q}", "B", ranks_b)]

print("mean Spearman:", round(average_spearman(records), 3))
print("kappa on best model:", round(best_model_kappa(records), 3))
summary = rank_aggregate(records)
for m in models:
    print(f"{m:12s} best {summary.best[m]:2d}  ranks {summary.histogram[m]}")

print(spearman_rank([1, 2, 3], [1, 3, 2]), spearman_rank([1, 2, 3], [3, 2, 1]))
