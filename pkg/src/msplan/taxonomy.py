"""Material-group classification and rule-based precursor typing.

Material groups come from a priority-ordered rule list (``data/taxonomy.json``
by default).  Each rule is a conjunction of predicates over the target
composition::

    {"label": "nitride", "rule": ["has_element(N)", "lacks_element(O)"]}

The first matching rule wins and the final label must be an unconditional
``other``.  The bundled rule list is a stand-in with eleven anion-based
groups; pass your own file to :meth:`Taxonomy.load` for a different class
inventory.  Precursor types are assigned one per precursor by structural group
matching on the formula as written (``CO3``, ``NO3``, ``NH4``, ``PO4``).
"""

from dataclasses import dataclass, field
from importlib import resources
import json
import logging
import re

from .errors import EmptyComposition, EmptySet, FormulaError, PrecursorParseError, TaxonomyError
from .formula import ELEMENT_INDEX, METALS, element_sequence, normalize_formula, parse_formula

log = logging.getLogger(__name__)

PRECURSOR_TYPES = ("carbonate", "nitrate", "ammonium", "phosphate", "oxide", "other")

_PREDICATE = re.compile(r"^\s*(has_element|lacks_element|has_group)\(\s*(\w+)\s*\)\s*$")


def _group_metal(c):
    return any(s in METALS for s in c)


def _ratio(c, center, ligand, k):
    n = c.get(center, 0.0)
    return n > 0 and c.get(ligand, 0.0) >= k * n - 1e-9


# Composition-level signatures usable from taxonomy rules.
COMPOSITION_GROUPS = {
    "metal": _group_metal,
    "CO3": lambda c: _ratio(c, "C", "O", 3),
    "NO3": lambda c: _ratio(c, "N", "O", 3),
    "SO4": lambda c: _ratio(c, "S", "O", 4),
    "PO4": lambda c: _ratio(c, "P", "O", 4),
    "NH4": lambda c: _ratio(c, "N", "H", 4),
    "heavy_halogen": lambda c: any(c.get(x, 0.0) > 0 for x in ("Cl", "Br", "I")),
}


@dataclass(frozen=True)
class Predicate:
    kind: str
    arg: str

    def __call__(self, comp):
        if self.kind == "has_element":
            return comp.get(self.arg, 0.0) > 0
        if self.kind == "lacks_element":
            return comp.get(self.arg, 0.0) <= 0
        return COMPOSITION_GROUPS[self.arg](comp)

    @classmethod
    def parse(cls, text):
        m = _PREDICATE.match(text)
        if not m:
            raise TaxonomyError(f"bad predicate {text!r}")
        kind, arg = m.groups()
        if kind in ("has_element", "lacks_element") and arg not in ELEMENT_INDEX:
            raise TaxonomyError(f"unknown element in predicate {text!r}")
        if kind == "has_group" and arg not in COMPOSITION_GROUPS:
            raise TaxonomyError(f"unknown group in predicate {text!r}")
        return cls(kind, arg)

    def __str__(self):
        return f"{self.kind}({self.arg})"


@dataclass(frozen=True)
class GroupRule:
    label: str
    predicates: tuple = ()

    def matches(self, comp):
        return all(p(comp) for p in self.predicates)


@dataclass(frozen=True)
class Taxonomy:
    """Priority-ordered material-group rules."""

    rules: tuple = field(default_factory=tuple)

    def __post_init__(self):
        labels = [r.label for r in self.rules]
        if not labels:
            raise TaxonomyError("empty taxonomy")
        if len(set(labels)) != len(labels):
            raise TaxonomyError("duplicate taxonomy labels")
        if labels[-1] != "other" or self.rules[-1].predicates:
            raise TaxonomyError("last rule must be an unconditional 'other'")

    @property
    def labels(self):
        return tuple(r.label for r in self.rules)

    @classmethod
    def from_entries(cls, entries):
        rules = []
        for entry in entries:
            try:
                label, rule = entry["label"], entry["rule"]
            except (KeyError, TypeError):
                raise TaxonomyError(f"taxonomy entry needs 'label' and 'rule': {entry!r}") from None
            rules.append(GroupRule(str(label), tuple(Predicate.parse(p) for p in rule)))
        return cls(tuple(rules))

    @classmethod
    def load(cls, path=None):
        if path is None:
            text = resources.files("msplan").joinpath("data/taxonomy.json").read_text("utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        return cls.from_entries(json.loads(text))

    def to_entries(self):
        return [{"label": r.label, "rule": [str(p) for p in r.predicates]} for r in self.rules]

    def classify(self, comp):
        if not comp:
            raise EmptyComposition("cannot classify an empty composition")
        for rule in self.rules:
            if rule.matches(comp):
                return rule.label
        return self.rules[-1].label  # unreachable: 'other' always matches


_default_taxonomy = None


def default_taxonomy():
    global _default_taxonomy
    if _default_taxonomy is None:
        _default_taxonomy = Taxonomy.load()
    return _default_taxonomy


def classify_material_group(target, taxonomy=None):
    """Material group label for a target (composition or formula string)."""
    if isinstance(target, str):
        target = parse_formula(target)
    return (taxonomy or default_taxonomy()).classify(target)


def load_type_priority(path=None):
    if path is None:
        text = resources.files("msplan").joinpath("data/precursor_types.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    priority = tuple(json.loads(text)["priority"])
    if sorted(priority) != sorted(PRECURSOR_TYPES):
        raise TaxonomyError(f"priority must be a permutation of {PRECURSOR_TYPES}")
    return priority


DEFAULT_TYPE_PRIORITY = load_type_priority()
log.debug("precursor type priority: %s", " > ".join(DEFAULT_TYPE_PRIORITY))

# (center, local count) followed directly by (ligand, local count)
_STRUCTURAL_GROUPS = {
    "ammonium": ("N", 1, "H", 4),
    "carbonate": ("C", 1, "O", 3),
    "nitrate": ("N", 1, "O", 3),
    "phosphate": ("P", 1, "O", 4),
}


def detected_groups(formula):
    """All precursor-type signatures present in ``formula``.

    Groups are matched on consecutive element tokens of the written formula,
    so ``Co3O4`` is not a carbonate and ``FeC2O4`` (oxalate) is not either.
    """
    seq = element_sequence(formula)
    found = set()
    for (a, na), (b, nb) in zip(seq, seq[1:]):
        for name, (ca, ka, cb, kb) in _STRUCTURAL_GROUPS.items():
            if a == ca and na == ka and b == cb and nb == kb:
                found.add(name)
    comp = parse_formula(formula)
    if comp.has("O") and len(comp) > 1 and all(s == "O" or s in METALS for s in comp):
        found.add("oxide")
    return found


def precursor_type(formula, priority=DEFAULT_TYPE_PRIORITY):
    """Single precursor type for ``formula`` (highest-priority detected group)."""
    found = detected_groups(formula)
    for name in priority:
        if name in found:
            return name
    return "other"


def precursor_types_of_set(precursors, priority=DEFAULT_TYPE_PRIORITY):
    """Set of unique precursor types of a precursor collection."""
    precursors = list(precursors)
    if not precursors:
        raise EmptySet("precursor set is empty")
    types = set()
    for i, p in enumerate(precursors):
        try:
            types.add(precursor_type(p, priority))
        except FormulaError as exc:
            raise PrecursorParseError(i, exc) from exc
    return frozenset(types)


def sorted_types(types):
    """Types in the fixed vocabulary order, for stable serialization."""
    return [t for t in PRECURSOR_TYPES if t in types]


@dataclass(frozen=True)
class PrecursorInfo:
    """The explicit conditioning variable: unique precursor types plus formulas."""

    types: frozenset
    precursors: tuple

    def __post_init__(self):
        if not self.precursors:
            raise EmptySet("PrecursorInfo needs at least one precursor")

    @classmethod
    def from_precursors(cls, precursors, priority=DEFAULT_TYPE_PRIORITY):
        normalized = tuple(normalize_formula(p) for p in precursors)
        return cls(precursor_types_of_set(normalized, priority), normalized)

    def is_consistent(self, priority=DEFAULT_TYPE_PRIORITY):
        return self.types == precursor_types_of_set(self.precursors, priority)
