"""
Nearest-neighbour retrieval baseline
====================================

Predict precursors and operations for held-out targets by copying them from
the training records with the most similar composition vectors.
"""

from msplan.corpus import filter_corpus, ingest_records, select, split_random
from msplan.metrics import evaluate
from msplan.retrieval import build_index, predict_by_retrieval, retrieve_neighbors

from _paths import SAMPLE_CORPUS

records, _ = ingest_records(str(SAMPLE_CORPUS))
kept, _ = filter_corpus(records, min_precursor_freq=2)
split = split_random(kept, seed=0)
train, test = select(kept, split.train), select(kept, split.test)

index = build_index(train)
print("index:", index.vectors.shape)

query = test[0]
print("query", query.target, "truth", list(query.precursors))
for rid, sim in retrieve_neighbors(index, query.target, 3):
    print(f"  {rid}  cos={sim:.4f}")

predictions = {}
for rec in test:
    pre, ops = predict_by_retrieval(index, rec.target, k=5, dedup=True)
    predictions[rec.id] = list(zip(pre, ops))

report = evaluate(predictions, test, "msp", metadata={"method": "retrieval", "k": 5})
for name, value in report.means().items():
    print(f"  {name:8s} {value:.3f}" if value is not None else f"  {name:8s} -")
