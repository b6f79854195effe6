"""Composition-vector nearest-neighbour baseline.

Targets are embedded as fraction-normalized 118-slot element vectors and
compared by cosine similarity with an exact exhaustive scan.  Predictions copy
the precursor sets and operation sequences of the closest training records.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSet, KTooLarge
from .formula import canonicalize, composition_vector, parse_formula

# Similarities are rounded before ranking so that mathematically equal scores
# tie exactly (then break by id) regardless of float summation order.
RANK_DECIMALS = 12


@dataclass(frozen=True)
class RetrievalIndex:
    ids: tuple
    vectors: np.ndarray  # (n, 118), fraction-normalized rows
    precursors: tuple
    operations: tuple
    unit_vectors: np.ndarray  # rows scaled to unit L2 norm

    def __len__(self):
        return len(self.ids)


def build_index(train_records):
    records = list(train_records)
    if not records:
        raise EmptyTrainingSet("cannot build a retrieval index from zero records")
    vectors = np.vstack([composition_vector(parse_formula(r.target)) for r in records])
    units = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors.setflags(write=False)
    units.setflags(write=False)
    return RetrievalIndex(
        ids=tuple(r.id for r in records),
        vectors=vectors,
        precursors=tuple(tuple(r.precursors) for r in records),
        operations=tuple(tuple(r.operations) for r in records),
        unit_vectors=units,
    )


def _ranking(index, query):
    q = composition_vector(parse_formula(query))
    q = q / np.linalg.norm(q)
    sims = np.clip(index.unit_vectors @ q, 0.0, 1.0)
    keys = np.round(sims, RANK_DECIMALS)
    order = sorted(range(len(index)), key=lambda i: (-keys[i], index.ids[i]))
    return order, sims


def retrieve_neighbors(index, query, k):
    """Top-``k`` ``(id, cosine similarity)`` pairs, best first, ties by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(index):
        raise KTooLarge(f"k={k} exceeds index size {len(index)}")
    order, sims = _ranking(index, query)
    return [(index.ids[i], float(sims[i])) for i in order[:k]]


def predict_by_retrieval(index, query, k, dedup=False):
    """Copy payloads from the nearest neighbours.

    Returns ``(precursor_candidates, operation_candidates)``.  With
    ``dedup=True`` repeated precursor sets / operation sequences are skipped
    and the scan continues down the ranking until ``k`` unique candidates
    are found or the index runs out.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(index):
        raise KTooLarge(f"k={k} exceeds index size {len(index)}")
    order, _ = _ranking(index, query)
    if not dedup:
        top = order[:k]
        return [list(index.precursors[i]) for i in top], [list(index.operations[i]) for i in top]

    pre_out, pre_seen = [], set()
    ops_out, ops_seen = [], set()
    for i in order:
        if len(pre_out) < k:
            key = frozenset(canonicalize(p) for p in index.precursors[i])
            if key not in pre_seen:
                pre_seen.add(key)
                pre_out.append(list(index.precursors[i]))
        if len(ops_out) < k and index.operations[i] not in ops_seen:
            ops_seen.add(index.operations[i])
            ops_out.append(list(index.operations[i]))
        if len(pre_out) >= k and len(ops_out) >= k:
            break
    return pre_out, ops_out
