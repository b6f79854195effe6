"""Synthesis-record corpus: JSONL ingest, preprocessing filters and splits.

A corpus line looks like::

    {"id": "r1", "target": "BaTiO3", "precursors": ["BaCO3", "TiO2"],
     "operations": ["mixing", "heating", "sintering"],
     "context": {"host_material": null, ...}, "source_title": "..."}

Raw text-mined exports may carry ``operations_raw`` (category + subkeywords)
instead of ``operations``; those go through :func:`refine_heating_ops`.
"""

from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
import json
import logging
import os
import random

from .errors import (
    FormulaError,
    SchemaViolation,
    TooFewRecords,
    TooFewTargets,
    UnknownCategory,
)
from .formula import canonicalize, try_canonicalize

log = logging.getLogger(__name__)

OPERATIONS = ("mixing", "heating", "sintering", "annealing", "quenching", "drying", "shaping")
RAW_CATEGORIES = ("heating", "mixing", "shaping", "quenching", "drying")

CONTEXT_FIELDS = (
    "host_material",
    "dopant_or_substitution",
    "material_class",
    "functional_property",
    "composition_control",
    "processing_or_stimulus",
)
# never shown to a model: it leaks the operations being predicted
EXCLUDED_CONTEXT_FIELDS = frozenset({"processing_or_stimulus"})


@dataclass(frozen=True)
class SynthesisContext:
    host_material: str | None = None
    dopant_or_substitution: str | None = None
    material_class: str | None = None
    functional_property: str | None = None
    composition_control: str | None = None
    processing_or_stimulus: str | None = None

    def prompt_fields(self):
        """(name, value) pairs that may appear in model inputs."""
        return [
            (name, getattr(self, name))
            for name in CONTEXT_FIELDS
            if name not in EXCLUDED_CONTEXT_FIELDS and getattr(self, name) is not None
        ]

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = data or {}
        return cls(**{name: data.get(name) for name in CONTEXT_FIELDS})


@dataclass(frozen=True)
class SynthesisRecord:
    id: str
    target: str
    precursors: tuple
    operations: tuple
    context: SynthesisContext = field(default_factory=SynthesisContext)
    source_title: str = ""

    def to_dict(self):
        return {
            "id": self.id,
            "target": self.target,
            "precursors": list(self.precursors),
            "operations": list(self.operations),
            "context": self.context.to_dict(),
            "source_title": self.source_title,
        }

    def triple_key(self):
        """(target, precursor set, operation sequence) identity used for dedup."""
        target = try_canonicalize(self.target) or self.target.strip()
        precursors = frozenset(_precursor_key(p) for p in self.precursors)
        return target, precursors, tuple(self.operations)


def _precursor_key(p):
    return try_canonicalize(p) or p.strip()


def refine_heating_ops(category, subkeywords=()):
    """Map a raw operation entry onto the 7-token vocabulary.

    Heating entries become ``sintering`` or ``annealing`` when a subkeyword
    mentions it (sinter wins); everything else passes through.
    """
    cat = str(category).strip().lower()
    if cat not in RAW_CATEGORIES:
        raise UnknownCategory(f"unknown operation category {category!r}")
    if cat != "heating":
        return cat
    words = [str(w).lower() for w in subkeywords or ()]
    if any("sinter" in w for w in words):
        return "sintering"
    if any("anneal" in w for w in words):
        return "annealing"
    return "heating"


def _check_str(obj, key, lineno, nullable=False):
    value = obj.get(key)
    if value is None and nullable:
        return None
    if not isinstance(value, str):
        raise SchemaViolation(lineno, f"{key!r} must be a string")
    return value


def record_from_dict(obj, lineno=0):
    """Validate one decoded JSON object and build a record."""
    if not isinstance(obj, dict):
        raise SchemaViolation(lineno, "line is not a JSON object")
    rec_id = _check_str(obj, "id", lineno)
    target = _check_str(obj, "target", lineno)
    if not target.strip():
        raise SchemaViolation(lineno, "empty target")

    precursors = obj.get("precursors")
    if not isinstance(precursors, list) or not all(isinstance(p, str) for p in precursors):
        raise SchemaViolation(lineno, "'precursors' must be a list of strings")

    if "operations" in obj:
        ops = obj["operations"]
        if not isinstance(ops, list) or not all(isinstance(o, str) for o in ops):
            raise SchemaViolation(lineno, "'operations' must be a list of strings")
    elif "operations_raw" in obj:
        raw = obj["operations_raw"]
        if not isinstance(raw, list):
            raise SchemaViolation(lineno, "'operations_raw' must be a list")
        ops = []
        for entry in raw:
            if not isinstance(entry, dict) or "category" not in entry:
                raise SchemaViolation(lineno, "operations_raw entries need a 'category'")
            try:
                ops.append(refine_heating_ops(entry["category"], entry.get("subkeywords") or ()))
            except UnknownCategory as exc:
                raise SchemaViolation(lineno, str(exc)) from None
    else:
        raise SchemaViolation(lineno, "missing 'operations'")
    if not ops:
        raise SchemaViolation(lineno, "empty operation sequence")
    unknown = [o for o in ops if o not in OPERATIONS]
    if unknown:
        raise SchemaViolation(lineno, f"unknown operation token {unknown[0]!r}")

    ctx = obj.get("context")
    if ctx is None:
        ctx = {}
    if not isinstance(ctx, dict):
        raise SchemaViolation(lineno, "'context' must be an object")
    for name in CONTEXT_FIELDS:
        _check_str(ctx, name, lineno, nullable=True)
    title = obj.get("source_title", "")
    if title is None:
        title = ""
    if not isinstance(title, str):
        raise SchemaViolation(lineno, "'source_title' must be a string")

    return SynthesisRecord(
        id=rec_id,
        target=target,
        precursors=tuple(precursors),
        operations=tuple(ops),
        context=SynthesisContext.from_dict(ctx),
        source_title=title,
    )


def ingest_records(path):
    """Read a corpus JSONL file.

    Returns ``(records, errors)``; ``errors`` holds one
    :class:`SchemaViolation` per rejected line.  Blank lines are skipped.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    records, errors = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(SchemaViolation(lineno, f"invalid JSON: {exc.msg}"))
                continue
            try:
                records.append(record_from_dict(obj, lineno))
            except SchemaViolation as exc:
                errors.append(exc)
    if errors:
        log.warning("%s: %d lines rejected", path, len(errors))
    return records, errors


def dumps_record(record):
    return json.dumps(record.to_dict(), ensure_ascii=False)


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_record(rec) + "\n")


@dataclass
class FilterReport:
    n_input: int = 0
    removed_unparseable_target: int = 0
    removed_single_precursor: int = 0
    removed_rare_precursor: int = 0
    removed_duplicate: int = 0
    frequency_rounds: int = 0
    n_output: int = 0
    vocabulary_size: int = 0
    min_precursor_freq: int = 5

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _frequencies(records):
    freq = Counter()
    for rec in records:
        freq.update({_precursor_key(p) for p in rec.precursors})
    return freq


def filter_corpus(records, min_precursor_freq=5):
    """Preprocessing pipeline; returns ``(kept_records, FilterReport)``.

    Stages, in order: drop targets that do not parse (compositional systems),
    drop records with fewer than two distinct precursors, then alternate the
    rare-precursor filter and (target, precursors, operations) dedup until
    neither removes anything.
    """
    report = FilterReport(n_input=len(records), min_precursor_freq=min_precursor_freq)
    kept = []
    for rec in records:
        try:
            canonicalize(rec.target)
        except FormulaError:
            report.removed_unparseable_target += 1
            continue
        kept.append(rec)

    staged = []
    for rec in kept:
        if len({_precursor_key(p) for p in rec.precursors}) < 2:
            report.removed_single_precursor += 1
        else:
            staged.append(rec)
    kept = staged

    while True:
        while True:
            freq = _frequencies(kept)
            survivors = [
                rec for rec in kept
                if all(freq[_precursor_key(p)] >= min_precursor_freq for p in rec.precursors)
            ]
            report.frequency_rounds += 1
            if len(survivors) == len(kept):
                break
            report.removed_rare_precursor += len(kept) - len(survivors)
            kept = survivors
        seen = set()
        unique = []
        for rec in kept:
            key = rec.triple_key()
            if key not in seen:
                seen.add(key)
                unique.append(rec)
        if len(unique) == len(kept):
            break
        # dedup lowers frequencies, so the rare-precursor pass must rerun
        report.removed_duplicate += len(kept) - len(unique)
        kept = unique

    report.n_output = len(kept)
    report.vocabulary_size = len(_frequencies(kept))
    return kept, report


def precursor_vocabulary(records):
    """``[(canonical formula, record count), ...]`` by descending count."""
    freq = _frequencies(records)
    return sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class CorpusSplit:
    train: tuple
    validation: tuple
    test: tuple
    split_kind: str
    seed: int

    def part(self, name):
        return {"train": self.train, "validation": self.validation, "valid": self.validation,
                "val": self.validation, "test": self.test}[name]

    def to_dict(self):
        return {
            "split_kind": self.split_kind,
            "seed": self.seed,
            "train": list(self.train),
            "validation": list(self.validation),
            "test": list(self.test),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data):
        return cls(
            train=tuple(data["train"]),
            validation=tuple(data["validation"]),
            test=tuple(data["test"]),
            split_kind=data["split_kind"],
            seed=data["seed"],
        )

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps() + "\n")


RATIOS = (0.8, 0.1, 0.1)


def _cut_points(n):
    n_train = int(RATIOS[0] * n + 0.5)
    n_val = int((RATIOS[0] + RATIOS[1]) * n + 0.5) - n_train
    return n_train, n_val


def split_random(records, seed=0):
    """8:1:1 split by record under a seeded shuffle."""
    ids = [r.id for r in records]
    if len(ids) < 10:
        raise TooFewRecords(f"need at least 10 records, got {len(ids)}")
    random.Random(seed).shuffle(ids)
    n_train, n_val = _cut_points(len(ids))
    return CorpusSplit(
        train=tuple(ids[:n_train]),
        validation=tuple(ids[n_train:n_train + n_val]),
        test=tuple(ids[n_train + n_val:]),
        split_kind="random",
        seed=seed,
    )


def split_target_disjoint(records, seed=0):
    """8:1:1 split with no canonical target shared between parts.

    Records are grouped by canonical target; groups go, largest first (ties
    in seeded random order), to whichever part is furthest below its quota.
    """
    groups = defaultdict(list)
    for rec in records:
        groups[try_canonicalize(rec.target) or rec.target.strip()].append(rec.id)
    if len(groups) < 10:
        raise TooFewTargets(f"need at least 10 distinct targets, got {len(groups)}")
    keys = sorted(groups)
    random.Random(seed).shuffle(keys)
    keys.sort(key=lambda k: -len(groups[k]))  # stable: keeps shuffled order within a size

    n = len(records)
    quota = [r * n for r in RATIOS]
    parts = ([], [], [])
    for key in keys:
        deficits = [quota[i] - len(parts[i]) for i in range(3)]
        best = max(range(3), key=lambda i: deficits[i])
        parts[best].extend(groups[key])
    return CorpusSplit(
        train=tuple(parts[0]),
        validation=tuple(parts[1]),
        test=tuple(parts[2]),
        split_kind="target_disjoint",
        seed=seed,
    )


def select(records, ids):
    """Records whose id is in ``ids``, in ``ids`` order."""
    by_id = {r.id: r for r in records}
    return [by_id[i] for i in ids if i in by_id]
