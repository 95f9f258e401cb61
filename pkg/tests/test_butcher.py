import json

import numpy as np
import pytest

from irkwavelab import butcher as bt
from irkwavelab.butcher import ButcherTableau, RootedTree


# known counts of rooted trees (OEIS A000081)
TREE_COUNTS = [1, 1, 2, 4, 9, 20, 48, 115, 286, 719]


def test_tree_counts():
    trees = bt.enumerate_trees(10)
    assert [len(level) for level in trees] == TREE_COUNTS


def test_tree_densities_small():
    assert bt.tree_density(RootedTree.leaf()) == 1
    assert bt.tree_density(RootedTree.chain(3)) == 6
    assert bt.tree_density(RootedTree.bush(3)) == 3
    assert bt.tree_density(RootedTree.chain(4)) == 24


def test_tree_canonical_form():
    a = RootedTree((RootedTree.chain(2), RootedTree.leaf()))
    b = RootedTree((RootedTree.leaf(), RootedTree.chain(2)))
    assert a == b and a.order == 4


@pytest.mark.parametrize("bad", [0, 11, 2.5, "3"])
def test_enumerate_rejects(bad):
    with pytest.raises(ValueError):
        bt.enumerate_trees(bad)


def test_gauss_orders():
    assert bt.order_of_accuracy(bt.irk24()) == 4
    assert bt.order_of_accuracy(bt.irk36()) == 6
    assert bt.order_of_accuracy(bt.builtin_scheme("BE")) == 1
    assert bt.order_of_accuracy(bt.builtin_scheme("FE")) == 1


def test_order_tol_must_be_positive():
    with pytest.raises(ValueError):
        bt.order_of_accuracy(bt.irk24(), tol=0)


def test_elementary_weight_matches_bushy_quadrature():
    # bush of order n: sum b_i c_i^(n-1) = 1/n for Gauss up to 2R
    tab = bt.irk36()
    for n in range(1, 7):
        assert bt.elementary_weight(RootedTree.bush(n), tab) == pytest.approx(1.0 / n, abs=1e-14)


def test_tableau_validation():
    with pytest.raises(bt.TableauError):
        ButcherTableau([[1.0, 0.0]], [1.0])
    with pytest.raises(bt.TableauError):
        ButcherTableau([[0.5]], [1.0, 0.0])
    with pytest.raises(bt.TableauError):
        ButcherTableau([[0.5]], [1.0], [0.4])
    with pytest.raises(bt.TableauError):
        ButcherTableau([[np.nan]], [1.0])


def test_tableau_is_immutable():
    tab = bt.irk24()
    with pytest.raises(ValueError):
        tab.A[0, 0] = 1.0


def test_roundtrip_dict(tmp_path):
    tab = bt.builtin_scheme("S3B2")
    path = tmp_path / "t.json"
    bt.write_tableau(tab, path)
    assert bt.read_tableau(path) == tab
    d = json.loads(path.read_text())
    d["R"] = 2
    with pytest.raises(bt.TableauError):
        ButcherTableau.from_dict(d)
    with pytest.raises(bt.TableauError):
        ButcherTableau.from_dict({"A": [[1.0]]})


def test_family_parameter():
    assert bt.irk24().family_parameter() == pytest.approx(-1.0 / 12, abs=1e-15)
    assert bt.irk36().family_parameter() == pytest.approx(0.1, abs=1e-15)
    assert bt.builtin_scheme("BE").family_parameter() is None


def test_registry_contents():
    names = bt.registry_names()
    assert len(names) == 32
    assert len(set(names)) == len(names)
    tabulated = [n for n in names if n.startswith("S")]
    assert len(tabulated) == 28
    for n in tabulated:
        info = bt.scheme_info(n)
        assert info["stages"] == int(n[1])
        assert bt.builtin_scheme(n).stages == info["stages"]


def test_unknown_scheme():
    with pytest.raises(bt.SchemeLookupError) as exc:
        bt.builtin_scheme("NOPE")
    assert "IRK24" in str(exc.value)
    with pytest.raises(KeyError):
        bt.scheme_info("NOPE")


def test_registry_erratum_entry():
    row = bt._table_rows()["S2B2"]
    assert row["erratum"]["entry"] == "a22"
    tab = bt.builtin_scheme("S2B2")
    assert bt.order_of_accuracy(tab, tol=1e-9) == 2


def test_data_dir_override(tmp_path, monkeypatch):
    src = bt.data_dir() / "schemes.json"
    data = json.loads(src.read_text())
    data["schemes"] = {"S2A1": data["schemes"]["S2A1"]}
    (tmp_path / "schemes.json").write_text(json.dumps(data))
    monkeypatch.setenv("IRKWAVELAB_DATA", str(tmp_path))
    assert bt.registry_names()[0] == "S2A1"
    assert len(bt.registry_names()) == 1 + 4
