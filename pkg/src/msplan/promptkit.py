"""Prompt rendering, target serialization and completion parsing.

Targets use a labeled-line grammar.  A precursor-prediction (PP) target is::

    Material group: oxide
    Precursors: La2O3, MnO2

and an explicit-mode operation-prediction (SOP) target restates the
precursor information between the group and the operations::

    Material group: oxide
    Precursor types: carbonate, oxide
    Precursors: CaCO3, La2O3, MnO2
    Operations: mixing -> heating -> sintering

The parsers accept this grammar plus the looser shapes that un-tuned chat
models produce (lower-case labels, ``;`` separators, numbered prose steps).
"""

from dataclasses import dataclass, field
from importlib import resources
import json
from pathlib import Path
import re

from .corpus import SynthesisContext
from .errors import (
    EmptyOperations,
    EmptyPrecursorSet,
    FormulaError,
    MissingPrecursors,
    NoOperationsFound,
    NoPrecursorsFound,
)
from .formula import canonicalize, normalize_formula, parse_formula
from .taxonomy import (
    PRECURSOR_TYPES,
    PrecursorInfo,
    classify_material_group,
    default_taxonomy,
    sorted_types,
)

TASKS = ("PP", "SOP")
MODES = ("target_only", "implicit", "explicit")

SOP_TEMPLATES = {
    "target_only": "sop_target_only",
    "implicit": "sop_implicit",
    "explicit": "sop_explicit",
}


class TemplateStore:
    """Read-only set of ``*.txt`` prompt templates with ``{name}`` fields."""

    def __init__(self, directory=None):
        if directory is None:
            root = resources.files("msplan").joinpath("templates")
            items = [(p.name, p.read_text("utf-8")) for p in root.iterdir() if p.name.endswith(".txt")]
        else:
            items = [(p.name, p.read_text("utf-8")) for p in Path(directory).glob("*.txt")]
        self._templates = {name[:-4]: text for name, text in items}

    def __contains__(self, name):
        return name in self._templates

    def render(self, name, **values):
        return self._templates[name].format_map(values)


_store = None


def default_templates():
    global _store
    if _store is None:
        _store = TemplateStore()
    return _store


def render_context(context):
    context = context or SynthesisContext()
    lines = [f"- {name.replace('_', ' ')}: {value}" for name, value in context.prompt_fields()]
    return "\n".join(lines) if lines else "- none"


def _join_precursors(precursors):
    return ", ".join(normalize_formula(p) for p in precursors)


def render_pp_prompt(target, context=None, templates=None):
    parse_formula(target)
    return (templates or default_templates()).render(
        "pp_prompt", target=normalize_formula(target), context=render_context(context)
    )


def render_pp_target(group, precursors):
    precursors = list(precursors)
    if not precursors:
        raise EmptyPrecursorSet("PP target needs at least one precursor")
    return f"Material group: {group}\nPrecursors: {_join_precursors(precursors)}"


def render_sop_prompt(target, context=None, z_in=None, mode="explicit", templates=None):
    if mode not in MODES:
        raise ValueError(f"unknown conditioning mode {mode!r}")
    parse_formula(target)
    values = {"target": normalize_formula(target), "context": render_context(context)}
    if mode != "target_only":
        if z_in is None or not z_in.precursors:
            raise MissingPrecursors(f"mode {mode!r} needs precursor information")
        values["precursors"] = _join_precursors(z_in.precursors)
        values["types"] = ", ".join(sorted_types(z_in.types))
    return (templates or default_templates()).render(SOP_TEMPLATES[mode], **values)


def render_sop_target(group, z, operations, mode="explicit"):
    """Serialize (G, Z, O); non-explicit modes drop Z."""
    operations = list(operations)
    if not operations:
        raise EmptyOperations("SOP target needs at least one operation")
    lines = [f"Material group: {group}"]
    if mode == "explicit":
        if z is None:
            raise MissingPrecursors("explicit SOP target needs precursor information")
        lines.append(f"Precursor types: {', '.join(sorted_types(z.types))}")
        lines.append(f"Precursors: {_join_precursors(z.precursors)}")
    elif mode not in MODES:
        raise ValueError(f"unknown conditioning mode {mode!r}")
    lines.append(f"Operations: {' -> '.join(operations)}")
    return "\n".join(lines)


@dataclass
class ParsedModelOutput:
    group: str | None = None
    z: PrecursorInfo | None = None
    precursors: tuple | None = None
    operations: tuple | None = None
    diagnostics: list = field(default_factory=list)

    def precursor_key(self):
        return frozenset(canonicalize(p) for p in self.precursors)

    def to_dict(self):
        return {
            "group": self.group,
            "types": sorted_types(self.z.types) if self.z else None,
            "precursors": list(self.precursors) if self.precursors is not None else None,
            "operations": list(self.operations) if self.operations is not None else None,
            "diagnostics": list(self.diagnostics),
        }


# --- parsing --------------------------------------------------------------

_LABELS = [
    ("types", re.compile(r"precursor\s+types?|types")),
    ("group", re.compile(r"material\s+group|material\s+class|group")),
    ("precursors", re.compile(r"precursors?(?:\s+(?:set|list))?")),
    ("operations", re.compile(r"(?:synthesis\s+)?(?:operations?|steps)(?:\s+sequence)?")),
]
_LABEL_LINE = re.compile(r"^(?P<label>[A-Za-z][A-Za-z ]{0,40}?)\s*[:：]\s*(?P<value>.*)$")
_BULLET = re.compile(r"^\s*(?:[-*•>#]+|\d+[.)])\s*")


def _clean_line(line):
    return line.replace("**", "").replace("__", "").strip()


def _sections(text):
    """Split text into labeled sections; returns (sections, unlabeled lines).

    A list section runs from its label line to the next label or blank line;
    the group section is the label line alone.
    The first occurrence of each label wins.
    """
    sections = {}
    loose = []
    current = None
    for raw in text.splitlines():
        line = _clean_line(raw)
        if not line:
            current = None
            continue
        m = _LABEL_LINE.match(_BULLET.sub("", line))
        kind = None
        if m:
            label = m.group("label").strip().lower()
            for name, pattern in _LABELS:
                if pattern.fullmatch(label):
                    kind = name
                    break
        if kind is not None:
            if kind in sections:
                current = None
                continue
            sections[kind] = [m.group("value")]
            current = None if kind == "group" else kind  # a group is one line
        elif current is not None:
            sections[current].append(line)
        else:
            loose.append(line)
    return {k: "\n".join(v) for k, v in sections.items()}, loose


def _parse_group(value, diagnostics, taxonomy=None):
    labels = (taxonomy or default_taxonomy()).labels
    g = re.sub(r"[^a-z ]", "", value.lower()).strip()
    if g in labels:
        return g
    if g.endswith("s") and g[:-1] in labels:
        return g[:-1]
    for label in labels:
        if re.search(rf"\b{label}s?\b", g):
            return label
    if g:
        diagnostics.append(f"unknown material group {value.strip()!r}")
        return g
    diagnostics.append("empty material group")
    return None


def _split_items(value):
    items = []
    for piece in re.split(r"[,;\n]|\band\b", value):
        piece = _BULLET.sub("", piece).strip().strip("{}[]\"'`").strip()
        piece = piece.rstrip(".")
        if piece:
            items.append(piece)
    return items


def _parse_precursor_items(value, diagnostics):
    out, seen = [], set()
    for item in _split_items(value):
        try:
            formula = normalize_formula(item)
            key = canonicalize(item)
        except FormulaError as exc:
            diagnostics.append(f"unparseable precursor {item!r}: {exc.reason}")
            continue
        if key in seen:
            diagnostics.append(f"duplicate precursor {formula!r} dropped")
            continue
        seen.add(key)
        out.append(formula)
    return out


def _parse_types(value, diagnostics):
    types = set()
    for item in _split_items(value):
        t = item.lower().strip()
        if t.endswith("s") and t[:-1] in PRECURSOR_TYPES:
            t = t[:-1]
        if t in PRECURSOR_TYPES:
            types.add(t)
        else:
            diagnostics.append(f"unknown precursor type {item!r}")
    return frozenset(types)


def parse_pp_output(text, taxonomy=None):
    """Decode a PP completion into group + precursor list.

    Raises :class:`NoPrecursorsFound` only when no precursor can be read.
    """
    diagnostics = []
    text = text if isinstance(text, str) else ""
    sections, _ = _sections(text)
    group = None
    if "group" in sections:
        group = _parse_group(sections["group"], diagnostics, taxonomy)
    else:
        diagnostics.append("missing material group")
    if "precursors" not in sections:
        raise NoPrecursorsFound("no 'Precursors:' line in completion", diagnostics)
    precursors = _parse_precursor_items(sections["precursors"], diagnostics)
    if not precursors:
        raise NoPrecursorsFound("no parseable precursor", diagnostics)
    return ParsedModelOutput(group=group, precursors=tuple(precursors), diagnostics=diagnostics)


_OP_STEMS = [
    ("sinter", "sintering"),
    ("anneal", "annealing"),
    ("quench", "quenching"),
    ("calcin", "heating"),
    ("heat", "heating"),
    ("fir(?:e|ed|es|ing)\\b", "heating"),
    ("mix", "mixing"),
    ("grind", "mixing"),
    ("ground\\b", "mixing"),
    ("mill", "mixing"),
    ("stir", "mixing"),
    ("blend", "mixing"),
    ("dry", "drying"),
    ("dried", "drying"),
    ("shap", "shaping"),
    ("press(?:ed|es|ing)?\\b", "shaping"),
    ("pellet", "shaping"),
    ("compact", "shaping"),
]
# optional re-/pre- prefix: "reground", "re-sintered", "pre-fired"
_OP_PATTERN = re.compile(
    r"\b(?:re-?|pre-?)?(" + "|".join(f"(?:{stem})" for stem, _ in _OP_STEMS) + r")", re.IGNORECASE
)
_OP_REGEXES = [(re.compile(stem, re.IGNORECASE), op) for stem, op in _OP_STEMS]
_STEP_SPLIT = re.compile(r"->|→|=>|⟶|[,;\n]|(?:^|\s)\d+[.)](?=\s|$)")


def _op_for(word):
    for regex, op in _OP_REGEXES:
        if regex.match(word):
            return op
    return None


def operations_from_text(text, diagnostics):
    """Map free-form steps onto the operation vocabulary, in order."""
    ops = []
    for step in _STEP_SPLIT.split(text):
        step = step.strip()
        if not step:
            continue
        found = []
        for m in _OP_PATTERN.finditer(step):
            op = _op_for(m.group(1))
            if not found or found[-1] != op:
                found.append(op)
        if found:
            ops.extend(found)
        else:
            diagnostics.append(f"unrecognized step {step!r} skipped")
    return ops


def parse_sop_output(text, taxonomy=None):
    """Decode an SOP completion into group, optional Z, and operations."""
    diagnostics = []
    text = text if isinstance(text, str) else ""
    sections, loose = _sections(text)
    out = ParsedModelOutput(diagnostics=diagnostics)
    if "group" in sections:
        out.group = _parse_group(sections["group"], diagnostics, taxonomy)
    else:
        diagnostics.append("missing material group")
    if "precursors" in sections:
        precursors = _parse_precursor_items(sections["precursors"], diagnostics)
        if precursors:
            out.precursors = tuple(precursors)
    if "types" in sections and out.precursors:
        out.z = PrecursorInfo(_parse_types(sections["types"], diagnostics), out.precursors)
    if "operations" in sections:
        ops_text = sections["operations"]
    else:
        diagnostics.append("missing 'Operations:' label; reading unlabeled text")
        ops_text = "\n".join(loose)
    ops = operations_from_text(ops_text, diagnostics)
    if not ops:
        raise NoOperationsFound("no synthesis operation recognized", diagnostics)
    out.operations = tuple(ops)
    return out


# --- training data --------------------------------------------------------

@dataclass(frozen=True)
class PromptPair:
    input_text: str
    target_text: str
    task: str
    mode: str | None = None


def pp_pair(record, taxonomy=None, templates=None):
    group = classify_material_group(record.target, taxonomy)
    return PromptPair(
        input_text=render_pp_prompt(record.target, record.context, templates),
        target_text=render_pp_target(group, record.precursors),
        task="PP",
    )


def sop_pair(record, mode="explicit", taxonomy=None, templates=None):
    group = classify_material_group(record.target, taxonomy)
    z = PrecursorInfo.from_precursors(record.precursors)  # ground truth as Z_in
    return PromptPair(
        input_text=render_sop_prompt(record.target, record.context, z, mode, templates),
        target_text=render_sop_target(group, z, record.operations, mode),
        task="SOP",
        mode=mode,
    )


def export_finetune_jsonl(records, task, mode, path, taxonomy=None, templates=None):
    """Write one ``{"input", "output", "task", "mode", "id"}`` line per record."""
    task = task.upper()
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if task == "PP":
                pair = pp_pair(rec, taxonomy, templates)
            else:
                pair = sop_pair(rec, mode, taxonomy, templates)
            line = {
                "input": pair.input_text,
                "output": pair.target_text,
                "task": pair.task,
                "mode": pair.mode,
                "id": rec.id,
            }
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
            n += 1
    return n
