import pytest

from metricglue.errors import ConfigError, GeneratorOverflow
from metricglue.metricspace import (LocallyFiniteSpace, from_matrix, make_lattice, make_tree, shells,
                                    space_from_config, validate_space)


def test_lattice_sizes_and_distances():
    z1 = make_lattice(1, 2, 4)
    assert len(z1) == 9
    z2 = make_lattice(2, 1, 4)
    assert z2.dist(z2.id_of((0, 0)), z2.id_of((1, 1))) == 2
    z2e = make_lattice(2, 2, 4)
    assert z2e.dist(z2e.id_of((0, 0)), z2e.id_of((3, 4))) == 5
    assert z2e.labels[z2e.basepoint] == (0, 0)


def test_lattice_cap():
    with pytest.raises(GeneratorOverflow):
        make_lattice(3, 2, 50, cap=1000)


def test_tree():
    t = make_tree(2, 1, edge_len=1.5)
    assert len(t) == 3
    assert t.dist(1, 2) == 3.0
    t3 = make_tree(3, 2)
    assert len(t3) == 13
    leaf = t3.id_of((0, 1))
    assert t3.dist(0, leaf) == 2


def test_shells_on_z1():
    z = make_lattice(1, 2, 6)
    dec = shells(z, 2)
    assert [z.labels[u][0] for u in dec[1]] == list(range(-2, 3))
    assert [z.labels[u][0] for u in dec[2]] == list(range(-4, 5))
    with pytest.raises(IndexError):
        dec[3]


def test_shells_single_point():
    space = LocallyFiniteSpace(["O"], lambda u, v: 1.0)
    dec = shells(space, 3)
    assert all(dec[i] == [0] for i in (1, 2, 3))


def test_shells_l1_diamond():
    z = make_lattice(2, 1, 3)
    assert len(shells(z, 1)[1]) == 13


def test_shell_cap():
    with pytest.raises(GeneratorOverflow):
        shells(make_lattice(2, 2, 10), 4, cap=50)


def test_validate_lattice_and_tree():
    assert validate_space(make_lattice(2, 2, 3)).ok
    rep = validate_space(make_tree(2, 3), samples=10**6)
    assert rep.ok and rep.checked["exhaustive"]


def test_validate_reports_discreteness():
    bad = LocallyFiniteSpace(list(range(4)), lambda u, v: abs(u - v), delta=2.0)
    rep = validate_space(bad)
    assert not rep.ok
    assert {v["kind"] for v in rep.violations} == {"discreteness"}


def test_validate_reports_triangle_triple():
    rep = validate_space(from_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]]))
    tri = [v for v in rep.violations if v["kind"] == "triangle"]
    assert tri and sorted(tri[0]["triple"]) == [0, 1, 2]


def test_space_from_config():
    assert len(space_from_config({"kind": "lattice", "dim": 1, "extent": 3})) == 7
    with pytest.raises(ConfigError):
        space_from_config({"kind": "torus"})
    with pytest.raises(ConfigError):
        space_from_config({"kind": "tree", "depth": 2})
