"""
Formulas, material groups and precursor types
=============================================

Parse a few chemical formulas, compare them by composition, and look at the
rule-based labels the rest of the toolkit builds on.
"""

import numpy as np

from msplan.formula import (
    ELEMENTS,
    canonicalize,
    composition_vector,
    formulas_equal,
    normalize_formula,
    parse_formula,
)
from msplan.taxonomy import PrecursorInfo, classify_material_group, precursor_type

# A parsed formula is a mapping from element symbol to amount.  Brackets and
# hydrate separators are expanded, fractional subscripts are kept.
for text in ["BaTiO3", "Ca3(PO4)2", "CuSO4.5H2O", "La0.7Sr0.3MnO3"]:
    comp = parse_formula(text)
    print(f"{text:16s} -> {dict(comp)}  total={comp.total:g}  hill={canonicalize(text)}")

# Two spellings of the same composition compare equal.
print(formulas_equal("O3TiBa", "BaTiO3"), formulas_equal("BaTiO3", "SrTiO3"))
print(repr(normalize_formula("  Li Co O2 ")))

# Fraction vectors over the periodic table feed the retrieval baseline.
vec = composition_vector(parse_formula("LiFePO4"))
nonzero = np.flatnonzero(vec)
print({ELEMENTS[i]: round(float(vec[i]), 3) for i in nonzero}, vec.sum())

# Material groups come from the anion content of the target.
for target in ["BaTiO3", "LiFePO4", "Zn2SiO4", "GaN", "CaCO3"]:
    print(f"{target:10s} group={classify_material_group(target)}")

# Precursor types follow the functional groups that appear in the formula.
for p in ["BaCO3", "LiNO3", "NH4H2PO4", "TiO2", "LiOH", "(NH4)2HPO4"]:
    print(f"{p:12s} type={precursor_type(p)}")

z = PrecursorInfo.from_precursors(["Li2CO3", "FeC2O4", "NH4H2PO4"])
print(z)
