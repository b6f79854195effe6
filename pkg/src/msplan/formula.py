"""Chemical formula parsing, canonical forms and composition vectors.

The grammar covers what shows up in text-mined solid-state synthesis data:
element symbols with integer or decimal subscripts, nested ``()``/``[]``/``{}``
groups with multipliers, and hydrate segments joined by ``·``, ``*`` or ``.``
(``BaTiO3·2H2O``).  Formulas with alphabetic subscripts (``LixMn2O4``,
``YBa2Cu3O7-δ``) describe compositional systems and are rejected.

>>> parse_formula("Ca(OH)2")
Composition({'Ca': 1.0, 'O': 2.0, 'H': 2.0})
>>> canonicalize("O3Al2")
'Al2O3'
"""

from collections.abc import Mapping
from decimal import Decimal
from functools import lru_cache
import math
import re

import numpy as np

from .errors import (
    EmptyComposition,
    EmptyFormula,
    MalformedNumber,
    UnbalancedBrackets,
    UnknownElement,
    VariableSubscript,
    FormulaError,
)

# Periodic-table order; defines the slot layout of composition vectors.
ELEMENTS = (
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
)
ELEMENT_INDEX = {sym: i for i, sym in enumerate(ELEMENTS)}
N_ELEMENTS = len(ELEMENTS)

# Non-metals; everything else (metalloids included) counts as a cation former.
NONMETALS = frozenset(
    ["H", "He", "C", "N", "O", "F", "Ne", "P", "S", "Cl", "Ar",
     "Se", "Br", "Kr", "I", "Xe", "Rn", "Og", "At", "Ts"]
)
METALS = frozenset(ELEMENTS) - NONMETALS

COUNT_TOL = 1e-9

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}
_HYDRATE_SEPS = frozenset("·•∙⋅*")
_NUMBER = re.compile(r"[0-9]+(?:\.[0-9]+)*")
_PHASE = re.compile(r"\((?:s|l|g|aq|cr|am)\)")
_CHARGE = re.compile(r"\^?\{?\d*[+-]\}?$")


class Composition(Mapping):
    """Immutable element -> count mapping.

    Zero counts are dropped on construction.  Equality compares counts with
    an absolute tolerance of ``COUNT_TOL``; missing elements count as zero.
    """

    __slots__ = ("_counts",)

    def __init__(self, counts=None):
        clean = {}
        for sym, n in dict(counts or {}).items():
            if sym not in ELEMENT_INDEX:
                raise ValueError(f"not an element symbol: {sym!r}")
            n = float(n)
            if not math.isfinite(n) or n < 0:
                raise ValueError(f"invalid count for {sym}: {n}")
            if n > 0:
                clean[sym] = n
        self._counts = clean

    def __getitem__(self, sym):
        return self._counts[sym]

    def __iter__(self):
        return iter(self._counts)

    def __len__(self):
        return len(self._counts)

    def __repr__(self):
        return f"Composition({self._counts!r})"

    def __eq__(self, other):
        if not isinstance(other, Mapping):
            return NotImplemented
        keys = set(self._counts) | set(other)
        return all(abs(self._counts.get(k, 0.0) - other.get(k, 0.0)) <= COUNT_TOL for k in keys)

    __hash__ = None

    def __add__(self, other):
        out = dict(self._counts)
        for k, v in other.items():
            out[k] = out.get(k, 0.0) + v
        return Composition(out)

    def __mul__(self, factor):
        return Composition({k: v * factor for k, v in self._counts.items()})

    __rmul__ = __mul__

    @property
    def total(self):
        return sum(self._counts.values())

    def has(self, sym):
        return self._counts.get(sym, 0.0) > 0

    @property
    def formula(self):
        return format_composition(self)


def _strip_annotations(text):
    s = "".join(text.split())
    s = _PHASE.sub("", s)
    s = _CHARGE.sub("", s)
    return s


def _tokenize(s, original):
    """Yield structural tokens for an annotation-free formula string.

    Token kinds: ``("el", symbol, count)``, ``("open", char)``,
    ``("close", char, multiplier)``, ``("coef", value)`` and ``("sep",)``.
    """
    i, n = 0, len(s)
    expect_coef = True
    while i < n:
        ch = s[i]
        if "0" <= ch <= "9":
            m = _NUMBER.match(s, i)
            if not expect_coef:
                raise MalformedNumber(original, m.group())
            yield ("coef", _to_number(m.group(), original))
            i = m.end()
        elif "A" <= ch <= "Z":
            two = s[i:i + 2]
            if len(two) == 2 and two[1].islower() and two in ELEMENT_INDEX:
                sym = two
            elif ch in ELEMENT_INDEX:
                sym = ch
            elif len(two) == 2 and two[1].islower():
                raise UnknownElement(original, two)
            else:
                raise UnknownElement(original, ch)
            i += len(sym)
            count, i = _read_count(s, i, original)
            yield ("el", sym, count)
        elif ch in _OPEN:
            yield ("open", ch)
            i += 1
        elif ch in _CLOSE:
            count, i = _read_count(s, i + 1, original)
            yield ("close", ch, count)
        elif ch in _HYDRATE_SEPS or ch == ".":
            yield ("sep",)
            i += 1
            expect_coef = True
            continue
        elif ch.isalpha():
            # any other letter (x, y, δ, ...) is a stoichiometric variable
            raise VariableSubscript(original, ch)
        elif ch in "+-" and any(c.isalpha() and not "A" <= c <= "Z" for c in s[i + 1:]):
            # Li1-xCoO2, Ba1+yTiO3, O3-δ
            raise VariableSubscript(original, s[i:])
        else:
            raise UnknownElement(original, ch)
        expect_coef = False


def _read_count(s, i, original):
    m = _NUMBER.match(s, i)
    if not m:
        return 1.0, i
    return _to_number(m.group(), original), m.end()


def _to_number(text, original):
    if text.count(".") > 1:
        raise MalformedNumber(original, text)
    value = float(text)
    if not math.isfinite(value):
        raise MalformedNumber(original, text)
    return value


def _evaluate(tokens, original):
    total = {}
    segment_coef = 1.0
    stack = [({}, None)]

    def flush():
        counts, _ = stack[0]
        for k, v in counts.items():
            total[k] = total.get(k, 0.0) + segment_coef * v
        counts.clear()

    for tok in tokens:
        kind = tok[0]
        if kind == "el":
            counts = stack[-1][0]
            counts[tok[1]] = counts.get(tok[1], 0.0) + tok[2]
        elif kind == "open":
            stack.append(({}, tok[1]))
        elif kind == "close":
            if len(stack) == 1 or _OPEN[stack[-1][1]] != tok[1]:
                raise UnbalancedBrackets(original, f"unexpected {tok[1]!r}")
            inner, _ = stack.pop()
            counts = stack[-1][0]
            for k, v in inner.items():
                counts[k] = counts.get(k, 0.0) + v * tok[2]
        elif kind == "coef":
            segment_coef = tok[1]
        elif kind == "sep":
            if len(stack) > 1:
                raise UnbalancedBrackets(original, "hydrate separator inside brackets")
            if not stack[0][0]:
                raise EmptyFormula(original, "empty hydrate segment")
            flush()
            segment_coef = 1.0
    if len(stack) > 1:
        raise UnbalancedBrackets(original, f"unclosed {stack[-1][1]!r}")
    if not stack[0][0]:
        raise EmptyFormula(original, "empty formula segment")
    flush()
    return total


def parse_formula(text):
    """Parse ``text`` into a :class:`Composition`.

    Raises one of the :class:`~msplan.errors.FormulaError` subclasses on bad
    input; never anything else.
    """
    if not isinstance(text, str):
        raise EmptyFormula(repr(text), "formula must be a string")
    return _parse(text)


@lru_cache(maxsize=65536)
def _parse(text):
    s = _strip_annotations(text)
    if not s:
        raise EmptyFormula(text)
    counts = _evaluate(_tokenize(s, text), text)
    comp = Composition(counts)
    if not comp:
        raise EmptyFormula(text, "all counts are zero")
    return comp


def element_sequence(text):
    """Elements with their local (unmultiplied) subscripts, in written order.

    Brackets and hydrate separators are dropped; this is the view used for
    structural group matching (``CO3``, ``NH4``, ...).
    """
    s = _strip_annotations(text)
    if not s:
        raise EmptyFormula(text)
    tokens = list(_tokenize(s, text))
    _evaluate(iter(tokens), text)  # validation only
    return [(t[1], t[2]) for t in tokens if t[0] == "el"]


def format_count(x):
    """Shortest plain decimal for ``x`` (rounded to 9 places); ``""`` for 1."""
    d = Decimal(repr(round(x, 9))).normalize()
    if d == 1:
        return ""
    text = format(d, "f")
    return text


def hill_order(symbols):
    symbols = set(symbols)
    if "C" in symbols:
        head = ["C"] + (["H"] if "H" in symbols else [])
        return head + sorted(symbols - set(head))
    return sorted(symbols)


def format_composition(comp):
    parts = []
    for sym in hill_order(comp):
        count = format_count(comp[sym])
        if count == "0":
            continue
        parts.append(sym + count)
    return "".join(parts)


def canonicalize(text):
    """Hill-ordered canonical string for a formula, e.g. ``CaCO3 -> CCaO3``."""
    return format_composition(parse_formula(text))


def try_canonicalize(text):
    """Canonical form, or ``None`` if ``text`` does not parse."""
    try:
        return canonicalize(text)
    except FormulaError:
        return None


def composition_vector(comp):
    """Fraction-normalized 118-slot vector in periodic-table order."""
    if isinstance(comp, str):
        comp = parse_formula(comp)
    total = sum(comp.values())
    if not comp or total <= 0:
        raise EmptyComposition("cannot vectorize an empty composition")
    vec = np.zeros(N_ELEMENTS)
    for sym, n in comp.items():
        vec[ELEMENT_INDEX[sym]] = n / total
    return vec


def formulas_equal(a, b, diagnostics=None):
    """True iff both formulas parse to equal compositions (no reduction).

    Parse failures give ``False``; a message is appended to ``diagnostics``
    when a list is supplied.
    """
    try:
        ca = parse_formula(a)
        cb = parse_formula(b)
    except FormulaError as exc:
        if diagnostics is not None:
            diagnostics.append(f"unparseable formula: {exc}")
        return False
    return ca == cb


_SEP_RUN = re.compile(r"[·•∙⋅*]|(?<![0-9])\.|\.(?![0-9])")


def normalize_formula(text):
    """Formula as written, minus whitespace/annotations, hydrate dot unified.

    Unlike :func:`canonicalize` this keeps the written group structure
    (``CaCO3`` stays ``CaCO3``), which precursor typing depends on.
    """
    parse_formula(text)
    return _SEP_RUN.sub("·", _strip_annotations(text))
