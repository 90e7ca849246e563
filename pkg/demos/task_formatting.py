"""
Task formatting
===============

Inputs for multi-task tagging carry the label set up front; question
answering inputs join the question with all of its snippets.
"""
import json
import tempfile
from pathlib import Path

from medtag.core import WordTokenizer, builtin_schemas
from medtag.decoder import decode
from medtag.scorers import uniform_scorer
from medtag.taskio import (
    QAItem,
    add_label_prefix,
    build_qa_prompt,
    read_conll,
    read_qa_jsonl,
    split_label_prefix,
    write_tagged,
)

schemas = builtin_schemas()
print(sorted(schemas))

###############################################################################
# Multi-task prefixes
# -------------------
words = "Patient with dilated cardiomyopathy".split()
for name in ("ncbi-disease", "abstrct", "bc5cdr-chem"):
    text = add_label_prefix(words, schemas[name])
    print(text, "->", split_label_prefix(text, schemas[name]))

# The prefix is passed to the scorer as conditioning, the output is still
# a plain annotated sentence.
schema = schemas["abstrct"]
r = decode(words, schema, uniform_scorer(), WordTokenizer(), conditioning=add_label_prefix(words, schema))
print(r.text)

###############################################################################
# Question answering prompts
# --------------------------
item = QAItem(
    "Which gene is mutated in cystic fibrosis?",
    ["Cystic fibrosis is caused by\nmutations in CFTR.", "CFTR encodes a chloride channel."],
    ["CFTR"],
)
print(build_qa_prompt(item))

###############################################################################
# Files
# -----
tmp = Path(tempfile.mkdtemp())
(tmp / "train.conll").write_text(
    "Patient O\nwith O\ndilated B-Disease\ncardiomyopathy I-Disease\n\n"
    "No O\nfever B-Disease\n"
)
sentences = read_conll(tmp / "train.conll", schemas["ncbi-disease"])
write_tagged(tmp / "train.txt", sentences, schemas["ncbi-disease"])
print((tmp / "train.txt").read_text())

(tmp / "qa.jsonl").write_text(json.dumps({"question": "Q?", "snippets": ["a", "b"], "ideal_answers": ["a"]}) + "\n")
print([build_qa_prompt(i) for i in read_qa_jsonl(tmp / "qa.jsonl")])
