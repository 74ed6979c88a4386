"""Catalog loading and structural invariants.

The term counts, orders, and nesting depths below were frozen from the
reviewed transcriptions; any drift in the data file or the parser shows up
here before the numerics ever run.
"""

import pytest

from pdegensol.catalog import (
    CatalogError,
    PdeFamily,
    _parse_records,
    _suffix_orders,
    family_ids,
    get_family,
    list_families,
    load_catalog,
)
from pdegensol.expr_core import to_text

ALL_IDS = [
    "3.1", "3.2", "3.3", "3.4", "3.5", "3.6", "3.7", "3.8", "3.9",
    "3.10", "3.11", "4.1", "4.2", "4.3", "4.4", "5.1", "5.2", "5.3",
    "6.1", "6.2", "6.3", "6.4", "6.5", "7.1", "7.2",
]

# family -> (pde term count, max derivative order, integral nesting depth)
STRUCTURE = {
    "3.1": (4, 2, 1), "3.2": (4, 2, 1), "3.3": (4, 2, 2),
    "3.4": (5, 2, 1), "3.5": (7, 2, 2), "3.6": (4, 2, 2),
    "3.7": (6, 2, 3), "3.8": (6, 2, 3), "3.9": (4, 2, 2),
    "3.10": (6, 2, 2), "3.11": (9, 2, 2),
    "4.1": (7, 2, 1), "4.2": (7, 2, 3), "4.3": (6, 2, 4),
    "4.4": (6, 2, 5),
    "5.1": (7, 2, 1), "5.2": (5, 2, 1), "5.3": (4, 2, 1),
    "6.1": (3, 3, 0), "6.2": (5, 3, 0), "6.3": (4, 3, 1),
    "6.4": (4, 3, 2), "6.5": (4, 3, 2),
    "7.1": (5, 3, 0), "7.2": (6, 3, 0),
}


def test_catalog_complete():
    assert family_ids() == ALL_IDS
    cat = load_catalog()
    assert len(cat) == 25


@pytest.mark.parametrize("fid", ALL_IDS)
def test_structure_frozen(fid):
    fam = get_family(fid)
    nterms, order, depth = STRUCTURE[fid]
    assert len(fam.pde_terms) == nterms
    assert fam.order == order
    assert fam.sol_depth == depth


@pytest.mark.parametrize("fid", ALL_IDS)
def test_solution_prints_and_reparses(fid):
    fam = get_family(fid)
    # describe() never raises and mentions the order
    text = fam.describe()
    assert ("second order" in text) or ("third order" in text)
    assert to_text(fam.solution)
    assert to_text(fam.pde)


def test_variables_shapes():
    for fid in ALL_IDS:
        fam = get_family(fid)
        if fid.startswith("5."):
            assert fam.variables == ("x1", "x2", "x3", "x4")
        else:
            assert fam.variables == ("t", "x")


def test_derivative_name_resolution():
    fam = get_family("3.1")
    assert fam.deriv_orders["w_tx"] == (1, 1)
    assert fam.deriv_orders["w_t"] == (1, 0)
    assert fam.deriv_orders["w"] == (0, 0)
    fam4 = get_family("5.1")
    assert fam4.deriv_orders["w_x1x4"] == (1, 0, 0, 1)
    fam6 = get_family("6.1")
    assert fam6.deriv_orders["w_ttx"] == (2, 1)
    assert fam6.deriv_orders["w_tt"] == (2, 0)


def test_suffix_orders_greedy():
    # x1 must win over x when both could match
    assert _suffix_orders("w_x1x1", ("x1", "x2", "x3", "x4")) == (2, 0, 0, 0)
    assert _suffix_orders("w_ttx", ("t", "x")) == (2, 1)
    assert _suffix_orders("w", ("t", "x")) == (0, 0)


def test_function_classification():
    fam = get_family("4.3")
    assert set(fam.coefficient_functions) == {"a", "b", "c"}
    assert set(fam.arbitrary_functions) == {"F", "G"}
    fam2 = get_family("3.1")
    assert fam2.coefficient_functions == {}
    assert set(fam2.arbitrary_functions) == {"F", "G"}


def test_base_points_collected():
    fam = get_family("4.4")
    assert set(fam.base_names) == {"p0", "p1", "q0", "q1", "q2", "q3"}
    fam2 = get_family("6.1")
    assert fam2.base_names == ()


def test_implicit_root_families():
    from pdegensol.expr_core import RootOf, walk

    with_roots = {
        fid for fid in ALL_IDS
        if any(isinstance(n, RootOf) for n in walk(get_family(fid).solution))
    }
    assert with_roots == {"3.7", "3.8", "3.10", "5.2", "5.3"}


def test_get_family_unknown_raises_keyerror():
    with pytest.raises(KeyError):
        get_family("9.9")


def test_list_families_ordered():
    fams = list_families()
    assert [f.family_id for f in fams] == ALL_IDS


# --- record format unit tests ---------------------------------------------

RECORD = """
# comment line
[x.1]
vars: t x
params: a
constraints: a != 0
funcs: F:1
pde: w_t - a*w
sol: F(x)
  * exp(a*t)
note: demo
"""


def test_parse_records_continuation_and_comments():
    recs = list(_parse_records(RECORD))
    assert len(recs) == 1
    rec = recs[0]
    assert rec["id"] == "x.1"
    assert rec["sol"] == "F(x) * exp(a*t)"
    assert rec["note"] == "demo"


def test_record_roundtrips_to_family():
    rec = list(_parse_records(RECORD))[0]
    from pdegensol.catalog import _build_family

    fam = _build_family(rec)
    assert fam.family_id == "x.1"
    assert fam.deriv_orders["w_t"] == (1, 0)
    assert len(fam.pde_terms) == 2


def test_unbound_symbol_rejected():
    bad = RECORD.replace("sol: F(x)", "sol: F(x) + y")
    rec = list(_parse_records(bad))[0]
    from pdegensol.catalog import _build_family

    with pytest.raises(CatalogError):
        _build_family(rec)
