"""Material synthesis planning toolkit.

Formula parsing, material-group and precursor-type rules, prompt/target
construction for precursor prediction (PP) and synthesis-operation
prediction (SOP), corpus preprocessing, a composition-vector retrieval
baseline, evaluation metrics, and a chat-endpoint runner.
"""

from .formula import (
    ELEMENTS,
    Composition,
    canonicalize,
    composition_vector,
    formulas_equal,
    normalize_formula,
    parse_formula,
)
from .taxonomy import (
    PRECURSOR_TYPES,
    PrecursorInfo,
    Taxonomy,
    classify_material_group,
    precursor_type,
    precursor_types_of_set,
)
from .corpus import (
    OPERATIONS,
    CorpusSplit,
    SynthesisContext,
    SynthesisRecord,
    filter_corpus,
    ingest_records,
    precursor_vocabulary,
    refine_heating_ops,
    split_random,
    split_target_disjoint,
    write_records,
)
from .promptkit import (
    ParsedModelOutput,
    export_finetune_jsonl,
    parse_pp_output,
    parse_sop_output,
    render_pp_prompt,
    render_pp_target,
    render_sop_prompt,
    render_sop_target,
)
from .retrieval import build_index, predict_by_retrieval, retrieve_neighbors
from .metrics import (
    EvalReport,
    best_of_candidates,
    evaluate,
    exact_match_msp,
    exact_match_operations,
    exact_match_precursors,
    lcs_score,
    levenshtein,
    multiset_f1,
    ned_similarity,
    plugin_conditional_entropy,
)

__all__ = [
    "ELEMENTS",
    "Composition",
    "canonicalize",
    "composition_vector",
    "formulas_equal",
    "normalize_formula",
    "parse_formula",
    "PRECURSOR_TYPES",
    "PrecursorInfo",
    "Taxonomy",
    "classify_material_group",
    "precursor_type",
    "precursor_types_of_set",
    "OPERATIONS",
    "CorpusSplit",
    "SynthesisContext",
    "SynthesisRecord",
    "filter_corpus",
    "ingest_records",
    "precursor_vocabulary",
    "refine_heating_ops",
    "split_random",
    "split_target_disjoint",
    "write_records",
    "ParsedModelOutput",
    "export_finetune_jsonl",
    "parse_pp_output",
    "parse_sop_output",
    "render_pp_prompt",
    "render_pp_target",
    "render_sop_prompt",
    "render_sop_target",
    "EvalReport",
    "best_of_candidates",
    "evaluate",
    "exact_match_msp",
    "exact_match_operations",
    "exact_match_precursors",
    "lcs_score",
    "levenshtein",
    "multiset_f1",
    "ned_similarity",
    "plugin_conditional_entropy",
    "build_index",
    "predict_by_retrieval",
    "retrieve_neighbors",
]

__version__ = "0.1.0"
