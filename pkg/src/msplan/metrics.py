"""Evaluation metrics for precursor sets and operation sequences.

* Top-K exact match: set equality for precursors (compositions compared,
  order ignored), token-for-token equality for operation sequences, and the
  conjunction of both for complete plans.
* Sequence similarities in [0, 1]: normalized edit distance (as a
  similarity), longest common subsequence and multiset F1.  Each operation
  is one token.  Both normalizations use the longer sequence's length, and two
  empty sequences score 1.
* Plug-in conditional entropy of operation sequences given a discrete context.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
import csv
import io
import json
import math

from .errors import EmptyCandidates, EmptyCorpus, EmptyTruth
from .formula import formulas_equal, try_canonicalize

TOP_KS = (1, 3, 5, 10)
BEST_OF = 10


# --- exact match ----------------------------------------------------------

def precursor_sets_equal(pred, truth):
    """Set equality under composition comparison (duplicates collapse)."""
    pred_keys = {try_canonicalize(p) for p in pred}
    truth_keys = {try_canonicalize(t) for t in truth}
    if None in pred_keys or None in truth_keys:
        return False
    if pred_keys == truth_keys:
        return True
    # canonical strings round counts; fall back to tolerance comparison
    pred_u, truth_u = _unique(pred), _unique(truth)
    if len(pred_u) != len(truth_u):
        return False
    remaining = list(truth_u)
    for p in pred_u:
        for j, t in enumerate(remaining):
            if formulas_equal(p, t):
                del remaining[j]
                break
        else:
            return False
    return True


def _unique(formulas):
    out = []
    for f in formulas:
        if not any(formulas_equal(f, g) for g in out):
            out.append(f)
    return out


def _check(truth, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if not truth:
        raise EmptyTruth("ground truth is empty")


def exact_match_precursors(candidates, truth, k):
    _check(truth, k)
    return any(precursor_sets_equal(c, truth) for c in list(candidates)[:k])


def exact_match_operations(candidates, truth, k):
    _check(truth, k)
    truth = tuple(truth)
    return any(tuple(c) == truth for c in list(candidates)[:k])


def exact_match_msp(candidates, truth, k):
    """``candidates`` and ``truth`` are ``(precursor set, operation sequence)`` pairs."""
    truth_pre, truth_ops = truth
    _check(truth_pre, k)
    _check(truth_ops, k)
    truth_ops = tuple(truth_ops)
    return any(
        tuple(ops) == truth_ops and precursor_sets_equal(pre, truth_pre)
        for pre, ops in list(candidates)[:k]
    )


# --- sequence similarity --------------------------------------------------

def _match_masks(b):
    """Bit ``i`` of ``masks[t]`` is set when ``b[i] == t``."""
    masks = {}
    bit = 1
    for y in b:
        masks[y] = masks.get(y, 0) | bit
        bit <<= 1
    return masks, bit - 1


def levenshtein(a, b):
    """Unit-cost edit distance between two token sequences.

    Column-wise DP with each column packed into the bits of an integer
    (vertical deltas as +1/-1 bit vectors), so a step costs a few integer
    operations regardless of the length of ``b``.
    """
    if len(a) < len(b):
        a, b = b, a
    m = len(b)
    if not m:
        return len(a)
    masks, full = _match_masks(b)
    last = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for x in a:
        eq = masks.get(x, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | ~(xh | pv)
        mh = pv & xh
        if ph & last:
            score += 1
        elif mh & last:
            score -= 1
        ph = (ph << 1) | 1
        pv = ((mh << 1) | ~(xv | ph)) & full
        mv = ph & xv
    return score


def lcs_length(a, b):
    """Length of the longest common subsequence (bit-vector DP)."""
    masks, full = _match_masks(b)
    v = full
    for x in a:
        u = v & masks.get(x, 0)
        v = ((v + u) | (v - u)) & full
    return len(b) - v.bit_count()


def ned_similarity(pred, truth):
    """``1 - levenshtein / max length``."""
    n = max(len(pred), len(truth))
    if n == 0:
        return 1.0
    return 1.0 - levenshtein(pred, truth) / n


def lcs_score(pred, truth):
    n = max(len(pred), len(truth))
    if n == 0:
        return 1.0
    return lcs_length(pred, truth) / n


def multiset_f1(pred, truth):
    if not pred and not truth:
        return 1.0
    inter = sum((Counter(pred) & Counter(truth)).values())
    if inter == 0:
        return 0.0
    precision = inter / len(pred)
    recall = inter / len(truth)
    return 2 * precision * recall / (precision + recall)


SEQUENCE_METRICS = {"ned": ned_similarity, "lcs": lcs_score, "f1": multiset_f1}


def best_of_candidates(candidates, truth, metric, top=BEST_OF):
    """Best ``metric(candidate, truth)`` among the first ``top`` candidates."""
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("no candidates to score")
    if isinstance(metric, str):
        metric = SEQUENCE_METRICS[metric]
    return max(metric(c, truth) for c in candidates[:top])


# --- entropy --------------------------------------------------------------

def operation_string(record):
    return " -> ".join(record.operations)


def plugin_conditional_entropy(records, context_fn, outcome_fn=operation_string):
    """Plug-in estimate of H(outcome | context) in bits.

    Frequencies are the empirical ones; no bias correction.
    """
    records = list(records)
    if not records:
        raise EmptyCorpus("entropy of an empty corpus")
    by_context = defaultdict(Counter)
    for rec in records:
        by_context[context_fn(rec)][outcome_fn(rec)] += 1
    n = len(records)
    h = 0.0
    for counts in by_context.values():
        n_c = sum(counts.values())
        h_c = -sum((m / n_c) * math.log2(m / n_c) for m in counts.values())
        h += (n_c / n) * h_c
    return max(h, 0.0)


# --- reports --------------------------------------------------------------

CONVENTIONS = {
    "ned": "1 - levenshtein / max(len); both empty = 1",
    "lcs": "lcs_length / max(len); both empty = 1",
    "f1": "multiset min-count intersection; both empty = 1",
    "sequence_metrics": f"best over the top {BEST_OF} candidates",
    "missing_prediction": "scored as a miss",
}

@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    METRIC_COLUMNS = tuple(f"em@{k}" for k in TOP_KS) + ("ned", "lcs", "f1")

    def means(self):
        out = {}
        for col in self.METRIC_COLUMNS:
            values = [r[col] for r in self.rows if r.get(col) is not None]
            out[col] = sum(values) / len(values) if values else None
        return out

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("id",) + self.METRIC_COLUMNS)
        for row in self.rows:
            writer.writerow([row["id"]] + [_fmt(row.get(c)) for c in self.METRIC_COLUMNS])
        means = self.means()
        writer.writerow(["mean"] + [_fmt(means[c]) for c in self.METRIC_COLUMNS])
        writer.writerow(["n"] + [len(self.rows)] * len(self.METRIC_COLUMNS))
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {"metadata": self.metadata, "conventions": CONVENTIONS, "means": self.means(),
             "rows": self.rows},
            indent=1,
        )

    def write(self, csv_path=None, json_path=None):
        if csv_path:
            with open(csv_path, "w", encoding="utf-8") as fh:
                fh.write(self.to_csv())
        if json_path:
            with open(json_path, "w", encoding="utf-8") as fh:
                fh.write(self.to_json() + "\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    return f"{value:.6f}"


def score_record(task, candidates, truth_precursors, truth_operations):
    """Metric row (without id) for one record's ranked candidates.

    ``task`` is ``pp`` (candidates are precursor lists), ``sop`` (operation
    sequences) or ``msp`` (``(precursors, operations)`` pairs).  An empty
    candidate list scores as a miss.
    """
    task = task.lower()
    row = {}
    for k in TOP_KS:
        if not candidates:
            row[f"em@{k}"] = False
        elif task == "pp":
            row[f"em@{k}"] = exact_match_precursors(candidates, truth_precursors, k)
        elif task == "sop":
            row[f"em@{k}"] = exact_match_operations(candidates, truth_operations, k)
        elif task == "msp":
            row[f"em@{k}"] = exact_match_msp(candidates, (truth_precursors, truth_operations), k)
        else:
            raise ValueError(f"unknown task {task!r}")
    if task == "pp":
        row.update(ned=None, lcs=None, f1=None)
    else:
        seqs = [c if task == "sop" else c[1] for c in candidates]
        for name, fn in SEQUENCE_METRICS.items():
            row[name] = best_of_candidates(seqs, truth_operations, fn) if seqs else 0.0
    return row


def evaluate(predictions, truth_records, task, metadata=None):
    """Build an :class:`EvalReport`.

    ``predictions`` maps record id to a ranked candidate list; records with
    no entry are scored as misses.  Row order follows ``truth_records``.
    """
    report = EvalReport(metadata=dict(metadata or {}, task=task))
    for rec in truth_records:
        row = {"id": rec.id}
        row.update(score_record(task, predictions.get(rec.id, []), rec.precursors, rec.operations))
        report.rows.append(row)
    return report


def load_predictions(path, task):
    """Read ``{"id", "candidates"}`` JSONL written by the runner or by hand.

    For ``msp`` each candidate is ``{"precursors": [...], "operations": [...]}``.
    """
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            cands = obj.get("candidates") or []
            if task.lower() == "msp":
                cands = [(c["precursors"], c["operations"]) for c in cands]
            preds[obj["id"]] = cands
    return preds
