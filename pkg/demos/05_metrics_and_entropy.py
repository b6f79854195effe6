"""
Sequence metrics and conditional entropy
========================================

Compare operation sequences, and measure how much knowing the target's
material group or precursor types tells us about the operation sequence.
"""

from msplan.corpus import ingest_records
from msplan.metrics import (
    best_of_candidates,
    exact_match_operations,
    lcs_score,
    multiset_f1,
    ned_similarity,
    plugin_conditional_entropy,
)
from msplan.taxonomy import classify_material_group, precursor_types_of_set

from _paths import SAMPLE_CORPUS

truth = ["mixing", "heating", "sintering"]
guesses = [["mixing", "sintering"], ["heating", "mixing", "sintering"], truth]
for g in guesses:
    print(f"{str(g):45s} ned={ned_similarity(g, truth):.3f} "
          f"lcs={lcs_score(g, truth):.3f} f1={multiset_f1(g, truth):.3f}")
print("exact@1", exact_match_operations(guesses, truth, 1),
      "exact@3", exact_match_operations(guesses, truth, 3))
print("best ned over candidates", best_of_candidates(guesses, truth, "ned"))

records, _ = ingest_records(str(SAMPLE_CORPUS))
h_none = plugin_conditional_entropy(records, lambda r: None)
h_group = plugin_conditional_entropy(records, lambda r: classify_material_group(r.target))
h_types = plugin_conditional_entropy(
    records, lambda r: (classify_material_group(r.target),
                        tuple(sorted(precursor_types_of_set(r.precursors)))))
print(f"H(ops)={h_none:.3f}  H(ops|group)={h_group:.3f}  H(ops|group,types)={h_types:.3f} bits")
