import math

import numpy as np
import pytest

from metricglue.chain import net_from_lattice, select_subsequence, synthetic_chain, weak_limit
from metricglue.errors import OutOfRange
from metricglue.glue import AugmentedMap, GluedMap, HatMap, TauPath, blend, build_tau, tau, tau_segment
from metricglue.metricspace import make_lattice
from metricglue.seqspace import SparseVector, dist_to_span, norm

from oracles import dense, glued_value, tau_value


def setup(kind="identity", extent=16, p=2, horizon=32):
    net = net_from_lattice(make_lattice(1, p, extent), p)
    ch = synthetic_chain(net, kind, horizon)
    lim = weak_limit(ch, net)
    sel, cert = select_subsequence(ch, net, lim)
    return net, sel, GluedMap(sel, net)


def test_blend_endpoints_and_agreement():
    u, v = SparseVector({0: 1.0, 1: 2.0}), SparseVector({0: 1.0, 2: 4.0})
    assert blend(u, v, 0.0) is u and blend(u, v, 1.0) is v
    w = blend(u, v, 0.25)
    assert w[0] == 1.0 and w[1] == 1.5 and w[2] == 1.0


def test_identity_chain_glues_to_identity():
    net, _, g = setup()
    assert all(g(a) == net.points[a] for a in net.ids)


def test_band_boundary_uses_single_map():
    net, sel, g = setup("shift")
    for a in net.ids:
        r = net.norm(a)
        if r in (2.0, 4.0, 8.0):
            i = int(math.log2(r)) + 1
            assert g(a) == sel.s(i, a)
            assert g.phi(a, band=i - 1) == g.phi(a, band=i)


def test_shift_chain_matches_standalone_formula():
    net, sel, g = setup("shift")
    width = 1 + max(v.max_index() for m in sel.maps for v in m.values())
    maps = {i: {a: dense(v, width) for a, v in sel.maps[i - 1].items()} for i in range(1, len(sel) + 1)}
    three = next(a for a in net.ids if net.points[a] == SparseVector({0: 3.0}))
    expect = (maps[2][three] + maps[3][three]) / 2
    assert np.array_equal(dense(g(three), width), expect)
    for a in net.ids:
        ref = glued_value(maps, net.norm(a), a)
        got = dense(g(a), width)
        assert np.allclose(got, 0 if ref is None else ref, rtol=0, atol=1e-12)


def test_weights_out_of_band():
    _, _, g = setup()
    with pytest.raises(OutOfRange):
        g.weights(5.0, 2)


def test_missing_next_map():
    net, sel, _ = setup()
    short = type(sel)(sel.maps[:2], sel.ns)
    far = max(net.ids, key=net.norm)
    with pytest.raises(OutOfRange):
        GluedMap(short, net)(far)


def test_phi_tilde():
    net, _, g = setup()
    aug = AugmentedMap(g)
    assert aug(net.basepoint) == (SparseVector(), 0.0)
    for a, b in [(0, 5), (3, 30), (16, 17)]:
        d = net.dist(a, b)
        assert d <= aug.distance(a, b) <= 2 * d


class TestTau:
    def test_segments(self):
        assert [tau_segment(t) for t in (0, 3, 3.5, 9, 9.01, 27)] == [1, 1, 2, 2, 3, 3]

    def test_single_point_net(self):
        net = net_from_lattice(make_lattice(1, 2, 1), 2)
        net.points = {net.basepoint: SparseVector()}
        net._norms = {net.basepoint: 0.0}
        path = build_tau(GluedMap(synthetic_chain(net, "identity", 3), net), kmax=2)
        assert path.T == [[net.basepoint]] * 3
        assert path.directions == [SparseVector.basis(k) for k in range(3)]

    def test_T_sets_and_first_direction(self):
        net, sel, g = setup(extent=9)
        path = build_tau(g, kmax=2)
        assert path.T[0] == [a for a in net.ids if net.norm(a) <= 9]
        top = max(g(a).max_index() for a in path.T[0])
        assert path.directions[0] == SparseVector.basis(top + 1)
        assert path.dist_checks == [1.0] * 3
        for i in range(1, 4):
            assert dist_to_span(path.directions[i - 1], path.span_generators(i, g), 2) == 1.0

    def test_values(self):
        _, _, g = setup(extent=9)
        path = build_tau(g, kmax=2)
        p1, p2 = path.directions[:2]
        assert not tau(0, path)
        assert tau(3, path) == 3 * p1
        assert tau(9, path) == 3 * p1 + 6 * p2
        with pytest.raises(OutOfRange):
            tau(28, path)

    def test_lipschitz_against_formula(self):
        _, _, g = setup(extent=9)
        path = build_tau(g, kmax=2)
        width = 1 + path.directions[-1].max_index()
        dirs = [dense(p, width) for p in path.directions]
        rng = np.random.default_rng(0)
        for s, t in rng.uniform(0, 27, size=(500, 2)):
            ts, tt = tau(s, path), tau(t, path)
            assert np.allclose(dense(ts, width), tau_value(s, dirs), atol=1e-12)
            assert norm(ts - tt, 2) <= abs(s - t) + 1e-12

    def test_json_round_trip(self):
        _, _, g = setup(extent=9)
        path = build_tau(g)
        assert TauPath.from_json(path.to_json()) == path


class TestHat:
    def test_basepoint_and_low_band(self):
        net, _, g = setup(extent=9)
        path = build_tau(g)
        hat = HatMap(g, path)
        assert not hat(net.basepoint)
        p1 = path.directions[0]
        for a in net.ids:
            if net.norm(a) <= 3:
                assert hat(a) == net.points[a] + net.norm(a) * p1

    def test_same_band_lower_bound(self):
        net, _, g = setup("shift", extent=30)
        hat = HatMap(g, build_tau(g))
        for a in net.ids:
            for b in net.ids:
                if tau_segment(net.norm(a)) == tau_segment(net.norm(b)):
                    assert norm(hat(a) - hat(b), 2) >= abs(net.norm(a) - net.norm(b)) - 1e-9
