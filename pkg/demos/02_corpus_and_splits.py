"""
Corpus preprocessing and splits
===============================

Read a JSONL corpus, filter it, and cut it into train/validation/test parts
either at random or so that no target appears in two parts.
"""

from collections import Counter

from msplan.corpus import (
    filter_corpus,
    ingest_records,
    precursor_vocabulary,
    refine_heating_ops,
    split_random,
    split_target_disjoint,
)

from _paths import SAMPLE_CORPUS

records, errors = ingest_records(str(SAMPLE_CORPUS))
print(f"{len(records)} records read, {len(errors)} lines rejected")

# Heating steps in raw extractions carry sub-keywords that pick a finer label.
print(refine_heating_ops("heating", ["sintered"]), refine_heating_ops("heating", ["quench"]))

# A low frequency threshold keeps most of this small sample.
kept, report = filter_corpus(records, min_precursor_freq=2)
for name, value in report.to_dict().items():
    print(f"  {name:28s} {value}")

vocab = precursor_vocabulary(kept)
print("vocabulary size:", len(vocab), "most common:", vocab[:5])

for split in (split_random(kept, seed=0), split_target_disjoint(kept, seed=0)):
    sizes = {part: len(split.part(part)) for part in ("train", "validation", "test")}
    by_id = {r.id: r.target for r in kept}
    targets = {part: {by_id[i] for i in split.part(part)} for part in sizes}
    shared = len(targets["train"] & targets["test"])
    print(split.split_kind, sizes, "targets shared train/test:", shared)

ops = Counter(op for r in kept for op in r.operations)
print("operation counts:", dict(ops))
