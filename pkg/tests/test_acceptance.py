"""Acceptance criteria, one check per criterion.

Run ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``;
both print one ``PASS``/``FAIL`` line per criterion with the measured values.
"""
import itertools
import json
import math
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from metricglue import cli
from metricglue.audit import check_case_bounds, check_tau_bounds, distortion, one_sum_distance
from metricglue.chain import (frechet_embed, net_from_lattice, pairwise_norms, select_subsequence,
                              synthetic_chain, validate_chain, verify_certificate, weak_limit)
from metricglue.glue import AugmentedMap, GluedMap, HatMap, build_tau, tau
from metricglue.metricspace import from_matrix, make_lattice
from metricglue.seqspace import NormSpec, SparseVector, dist_to_span, norm

from oracles import repaired_metric

SLACK = 1e-9
P_SET = [1, 2, math.inf]
LINES: dict = {}


def report(n, ok, text):
    line = f"{'PASS' if ok else 'FAIL'} [{n}] {text}"
    LINES[n] = line
    print(line)
    return ok


@lru_cache(maxsize=None)
def pipeline(kind, dim, p, extent, horizon=256):
    net = net_from_lattice(make_lattice(dim, p, extent), p)
    chain = synthetic_chain(net, kind, horizon)
    chain_ok = validate_chain(chain, net).ok
    lim = weak_limit(chain, net)
    sel, cert = select_subsequence(chain, net, lim)
    cert_ok = verify_certificate(sel, net, lim, cert).ok
    glued = GluedMap(sel, net)
    return {"net": net, "chain_ok": chain_ok, "cert_ok": cert_ok, "lim": lim, "cert": cert, "glued": glued,
            "aug": AugmentedMap(glued)}


def test_criterion_1_frechet_isometry():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 41))
        space = from_matrix(repaired_metric(n, rng))
        ids = list(space.ids)
        vecs = frechet_embed(ids, space.dist)
        img = pairwise_norms([vecs[u] for u in ids], NormSpec(math.inf))
        src = np.array([space.dist(u, v) for u, v in itertools.combinations(ids, 2)])
        worst = max(worst, float(np.max(np.abs(img - src) / src)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5
    assert report(1, ok, f"Frechet isometry on 50 spaces: max rel err {worst:.2e}, {elapsed:.2f}s")


def test_criterion_2_identity_gluing():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for dim, p, extent in [(1, 1, 64), (1, 2, 64), (2, 1, 8), (2, 2, 8)]:
        run = pipeline("identity", dim, p, extent, horizon=32)
        net, glued, aug = run["net"], run["glued"], run["aug"]
        exact = all(glued(a) == net.points[a] for a in net.ids)
        rep = distortion(aug, net.ids, net.dist, one_sum_distance(net.ns))
        ok &= exact and rep.distortion <= 2 + SLACK
        lines.append(f"Z^{dim} l{p} ext {extent}: exact={exact}, dist={rep.distortion:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    assert report(2, ok, f"identity chain glues to the identity; {'; '.join(lines)}; {elapsed:.2f}s")


def test_criterion_3_certified_chain_audit():
    t0 = time.perf_counter()
    bad, flips, total = [], 0, 0
    for kind, p in itertools.product(["shift", "scaled_shift", "jitter"], P_SET):
        run = pipeline(kind, 1, p, 32)
        s = check_case_bounds(run["aug"], run["lim"], run["cert"], strict=False)
        total += s.pairs
        flips += s.alt_flips
        if not (run["chain_ok"] and run["cert_ok"] and s.ok):
            bad.append((kind, p, len(s.violations)))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    assert report(3, ok, f"9 certified chains on Z^1 ext 32: {total} pairs, violations {bad or 0}, "
                         f"alt-threshold flips {flips}, {elapsed:.2f}s")


def test_criterion_4_case3_envelope():
    worst_env, lo, hi, n3, bad = 0.0, math.inf, 0.0, 0, 0
    for kind in ["identity", "shift", "jitter"]:
        run = pipeline(kind, 1, 2, 64)
        s = check_case_bounds(run["aug"], run["lim"], run["cert"], strict=False)
        for r in s.reports:
            if r.case != "Case3":
                continue
            n3 += 1
            ratio = r.tilde_dist / r.dist
            lo, hi = min(lo, ratio), max(hi, ratio)
            bad += not r.ok
        worst_env = max(worst_env, s.case3_max_envelope)
    ok = n3 > 0 and bad == 0 and worst_env <= 24 + SLACK and 1 / 24 - SLACK <= lo and hi <= 24 + SLACK
    assert report(4, ok, f"Case 3 on Z^1 ext 64: {n3} pairs, max envelope {worst_env:.4f}, "
                         f"measured ratio in [{lo:.4f}, {hi:.4f}]")


def test_criterion_5_tau():
    run = pipeline("shift", 1, 2, 64)
    glued = run["glued"]
    path = build_tau(glued, kmax=3)
    continuous = True
    for k in range(1, path.kmax + 1):
        b = 3.0**k
        right = SparseVector()
        for j in range(1, k + 1):
            right = right + (3.0**j - (0.0 if j == 1 else 3.0 ** (j - 1))) * path.directions[j - 1]
        right = right + (b - b) * path.directions[k]
        continuous &= tau(b, path) == right
    rng = np.random.default_rng(5)
    worst = -math.inf
    for s, t in rng.uniform(0, 81, size=(10_000, 2)):
        worst = max(worst, norm(tau(s, path) - tau(t, path), 2) - abs(s - t))
    dists = [dist_to_span(path.directions[i - 1], path.span_generators(i, glued), 2) for i in range(1, path.kmax + 2)]
    ok = continuous and worst <= 1e-12 and all(d == 1.0 for d in dists) and path.dist_checks == dists
    assert report(5, ok, f"tau on [0, 81]: breakpoints exact={continuous}, max Lipschitz excess {worst:.2e}, "
                         f"dist(p_i, F_i) = {dists}")


def test_criterion_6_phi_hat_alpha():
    nets = [("identity", 1, 2, 64), ("shift", 1, 2, 64), ("jitter", 1, 2, 64), ("identity", 2, 1, 8),
            ("identity", 2, 2, 8)] + [(k, 1, p, 32) for k in ("shift", "scaled_shift", "jitter") for p in P_SET]
    worst, where, bad = math.inf, None, 0
    for key in nets:
        run = pipeline(*key, horizon=32 if key[0] == "identity" else 256)
        glued = run["glued"]
        t = check_tau_bounds(HatMap(glued, build_tau(glued)), strict=False)
        bad += len(t.violations)
        if t.worst_alpha < worst:
            worst, where = t.worst_alpha, key
    ok = bad == 0 and worst >= 4 / 27 - SLACK
    assert report(6, ok, f"phi_hat lower bound over {len(nets)} nets: worst alpha {worst:.4f} "
                         f"(>= 4/27 = {4 / 27:.4f}) on {where}")


def test_criterion_7_coarse_pipeline():
    cfg, _ = cli.load_config(None)
    cfg.update({"space": {"kind": "lattice", "dim": 1, "p": 2, "extent": 32}, "mode": "coarse",
                "chain": {"kind": "shift", "exponent": 0.5}})
    pipe = cli.Pipeline(cli.check_config(cfg)).build()
    ok_all, summary, _ = cli.run_audits(pipe)
    mod = summary["moduli"]
    ok = mod["strictly_increasing"] and mod["ordered"] and mod["buckets"] >= 5
    env = ", ".join(f"{x:.2f}" for x in mod["lower_env"])
    assert report(7, ok, f"coarse pieces + glue on Z^1 ext 32: {mod['buckets']} buckets, lower envelope [{env}], "
                         f"audits {summary['verdict']}")


def test_criterion_8_determinism_and_round_trip(tmp_path):
    conf = tmp_path / "cfg.json"
    conf.write_text(json.dumps({"space": {"kind": "lattice", "dim": 1, "p": 1, "extent": 32},
                                "p": 1, "chain": {"kind": "jitter", "seed": 7}}))
    codes = [cli.main(["embed", "--config", str(conf), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    same_csv = (tmp_path / "a/pairs.csv").read_bytes() == (tmp_path / "b/pairs.csv").read_bytes()
    same_summary = (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()
    code_rt = cli.main(["audit", "--maps", str(tmp_path / "a/maps.json"), "--out", str(tmp_path / "c")])
    first = json.loads((tmp_path / "a/summary.json").read_text())
    again = json.loads((tmp_path / "c/summary.json").read_text())
    rt_csv = (tmp_path / "a/pairs.csv").read_bytes() == (tmp_path / "c/pairs.csv").read_bytes()
    ok = (codes == [0, 0] and same_csv and same_summary and code_rt == codes[0]
          and again["verdict"] == first["verdict"] and again["case_audit"] == first["case_audit"] and rt_csv)
    assert report(8, ok, f"determinism: exit codes {codes}, identical csv={same_csv}, summary={same_summary}; "
                         f"round trip exit {code_rt}, verdict {again['verdict']}, identical csv={rt_csv}")


if __name__ == "__main__":
    import tempfile

    results = []
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
            results.append(True)
        except AssertionError:
            results.append(False)
    sys.exit(0 if all(results) else 1)
