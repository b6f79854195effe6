import json

import pytest

from msplan.errors import EmptySet, PrecursorParseError, TaxonomyError
from msplan.formula import Composition
from msplan.taxonomy import (
    PRECURSOR_TYPES,
    PrecursorInfo,
    Taxonomy,
    classify_material_group,
    default_taxonomy,
    detected_groups,
    load_type_priority,
    precursor_type,
    precursor_types_of_set,
    sorted_types,
)

# Labeled by hand from the chemistry of each compound.
HAND_LABELED = [
    ("Li2CO3", "carbonate"),
    ("CaCO3", "carbonate"),
    ("NH4H2PO4", "ammonium"),
    ("(NH4)2HPO4", "ammonium"),
    ("NH4F", "ammonium"),
    ("Fe(NO3)3·9H2O", "nitrate"),
    ("LiNO3", "nitrate"),
    ("Li3PO4", "phosphate"),
    ("FePO4", "phosphate"),
    ("La2O3", "oxide"),
    ("MnO2", "oxide"),
    ("TiO2", "oxide"),
    ("SiO2", "oxide"),
    ("Co3O4", "oxide"),
    ("LiOH", "other"),
    ("LiF", "other"),
    ("H3BO3", "other"),
    ("FeC2O4", "other"),
    ("P2O5", "other"),
    ("Mn(CH3COO)2", "other"),
]


@pytest.mark.parametrize("formula, expected", HAND_LABELED)
def test_hand_labeled_precursor_types(formula, expected):
    assert precursor_type(formula) == expected


def test_worked_example_type_set():
    assert precursor_types_of_set(["CaCO3", "La2O3", "MnO2"]) == {"carbonate", "oxide"}


def test_type_set_errors():
    with pytest.raises(EmptySet):
        precursor_types_of_set([])
    with pytest.raises(PrecursorParseError) as info:
        precursor_types_of_set(["CaCO3", "LixO"])
    assert info.value.index == 1


def test_priority_file_is_a_permutation():
    assert sorted(load_type_priority()) == sorted(PRECURSOR_TYPES)


def test_custom_priority_changes_winner(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"priority": ["phosphate", "ammonium", "carbonate",
                                             "nitrate", "oxide", "other"]}))
    assert precursor_type("NH4H2PO4", load_type_priority(path)) == "phosphate"
    path.write_text(json.dumps({"priority": ["oxide"]}))
    with pytest.raises(TaxonomyError):
        load_type_priority(path)


def test_detected_groups_structural():
    assert detected_groups("NH4H2PO4") == {"ammonium", "phosphate"}
    assert detected_groups("Co3O4") == {"oxide"}
    assert detected_groups("O2") == set()


def test_sorted_types_order():
    assert sorted_types({"oxide", "carbonate"}) == ["carbonate", "oxide"]


def test_precursor_info():
    info = PrecursorInfo.from_precursors(["CaCO3", "La2O3", "MnO2"])
    assert info.types == {"carbonate", "oxide"}
    assert info.precursors == ("CaCO3", "La2O3", "MnO2")
    assert info.is_consistent()
    assert not PrecursorInfo(frozenset({"nitrate"}), ("CaCO3",)).is_consistent()
    with pytest.raises(EmptySet):
        PrecursorInfo(frozenset(), ())


@pytest.mark.parametrize("target, group", [
    ("LiFePO4", "phosphate"),
    ("BaTiO3", "oxide"),
    ("La0.7Sr0.3MnO3", "oxide"),
    ("CaCO3", "carbonate"),
    ("BaSO4", "sulfate"),
    ("Mg2SiO4", "silicate"),
    ("LiBO2", "borate"),
    ("GaN", "nitride"),
    ("ZnS", "sulfide"),
    ("LiF", "fluoride"),
    ("CsPbBr3", "halide"),
    ("Si", "other"),
    ("FeS2O0", "sulfide"),
])
def test_material_groups(target, group):
    assert classify_material_group(target) == group


def test_taxonomy_roundtrip_and_validation(tmp_path):
    tax = default_taxonomy()
    again = Taxonomy.from_entries(tax.to_entries())
    assert again == tax
    with pytest.raises(TaxonomyError):
        Taxonomy.from_entries([{"label": "oxide", "rule": ["has_element(O)"]}])
    with pytest.raises(TaxonomyError):
        Taxonomy.from_entries([{"label": "x", "rule": ["has_element(Qq)"]}, {"label": "other", "rule": []}])
    with pytest.raises(TaxonomyError):
        Taxonomy.from_entries([{"label": "x", "rule": ["has_group(nope)"]}, {"label": "other", "rule": []}])
    with pytest.raises(TaxonomyError):
        Taxonomy.from_entries([{"label": "other", "rule": []}, {"label": "other", "rule": []}])

    path = tmp_path / "tax.json"
    path.write_text(json.dumps([{"label": "hydride", "rule": ["has_element(H)"]},
                                {"label": "other", "rule": []}]))
    custom = Taxonomy.load(path)
    assert classify_material_group("LiH", custom) == "hydride"
    assert classify_material_group(Composition({"Fe": 1}), custom) == "other"
