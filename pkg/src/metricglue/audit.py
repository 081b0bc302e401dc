"""Numerical audit of the glued maps.

Every pair of net points is classified by the dyadic shells of its norms
and checked against the lower bound that applies to its branch of the case
analysis. The branch is chosen the same way the argument chooses it, so a
violation means a certificate gap or an arithmetic bug, never a loose
constant.
"""
from __future__ import annotations

import csv
import itertools
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .chain import SelectionCertificate, WeakLimitTable, pairwise_norms, shell_of
from .errors import BoundViolated, DegenerateImage
from .glue import AugmentedMap, HatMap, tau_segment
from .seqspace import NormSpec, norm


@dataclass(frozen=True)
class AuditConstants:
    mab: float = 99 / 100
    weak2: float = 1 / 1000
    weak3: float = 1 / 100
    m_split: float = 1 / 100          # ||m(a)-m(b)|| >= m_split ||a-b|| selects branch (i)
    subcase_split: float = 1 / 10     # weighted deviation >= subcase_split ||a-b|| selects (ii)
    below1: float = 98 / 10000
    below2: float = 88 / 1000
    below3: float = 78 / 100
    norm_coeff: float = 8.0           # coefficient of ||a|| - ||b|| in the Case 1 bounds
    case2_coeff: float = 12.0
    case2_middle: float = 5.0
    case3_ratio: float = 24.0
    close_1000: float = 1 / 1000      # closing threshold after (i) and (ii)
    close_100: float = 1 / 100        # closing threshold after (iii)
    close_case2: float = 1 / 20
    tau_case2: float = 1 / 3
    tau_case3: float = 4 / 27
    slack: float = 1e-9

    @classmethod
    def from_overrides(cls, overrides: dict | None) -> "AuditConstants":
        overrides = dict(overrides or {})
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown audit constants {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in overrides.items()})

    def to_json(self):
        return asdict(self)


# ------------------------------------------------------------ distortion


@dataclass
class DistortionReport:
    lip: float
    colip: float
    distortion: float
    r: float
    worst_expansion: tuple
    worst_contraction: tuple
    pairs: int

    def to_json(self):
        return asdict(self)


def _report(ids, src, img) -> DistortionReport:
    pairs = list(itertools.combinations(ids, 2))
    if np.any(img <= 0):
        j = int(np.flatnonzero(img <= 0)[0])
        raise DegenerateImage(f"distinct points {pairs[j]} share an image")
    ratio = img / src
    # argmax/argmin return the first hit, i.e. the smallest pair in id order
    hi, lo = int(np.argmax(ratio)), int(np.argmin(ratio))
    lip, colip = float(ratio[hi]), float(ratio[lo])
    return DistortionReport(lip, colip, lip / colip, colip, pairs[hi], pairs[lo], len(pairs))


def distortion(evaluator: Callable, points: Sequence, metric: Callable,
               image_dist: Callable | None = None, ns: NormSpec | float | None = None) -> DistortionReport:
    """Exhaustive Lipschitz constants of a map over all unordered pairs.

    ``image_dist`` measures distances between images; if omitted, images
    must be :class:`SparseVector` and ``ns`` selects their norm.
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("distortion needs at least two points")
    src = np.array([metric(a, b) for a, b in itertools.combinations(pts, 2)], dtype=float)
    images = [evaluator(a) for a in pts]
    if image_dist is None:
        img = pairwise_norms(images, NormSpec.of(2 if ns is None else ns))
    elif hasattr(image_dist, "pairwise"):
        img = image_dist.pairwise(images)
    else:
        img = np.array([image_dist(x, y) for x, y in itertools.combinations(images, 2)], dtype=float)
    return _report(pts, src, img)


class OneSumDistance:
    """Distance on the 1-sum of the sequence space and R, for ``(vector, real)`` images."""

    def __init__(self, ns: NormSpec | float):
        self.ns = NormSpec.of(ns)

    def __call__(self, x, y) -> float:
        return norm(x[0] - y[0], self.ns) + abs(x[1] - y[1])

    def pairwise(self, images) -> np.ndarray:
        vec = pairwise_norms([v for v, _ in images], self.ns)
        t = np.array([s for _, s in images], dtype=float)
        i, j = np.triu_indices(len(images), k=1)
        return vec + np.abs(t[i] - t[j])


def one_sum_distance(ns: NormSpec | float) -> OneSumDistance:
    return OneSumDistance(ns)


# -------------------------------------------------------- classification


class CaseLabel(NamedTuple):
    case: str
    i: int
    k: int | None = None
    subcase: str = ""


def classify_case(norm_a: float, norm_b: float) -> CaseLabel:
    """Case of a pair from its norms (order-free; the larger norm plays ``a``).

    Bands are ``[2**(i-1), 2**i]`` with boundary norms in the lower band.
    Pairs involving the basepoint (norm 0) are Case 3 with subcase
    ``basepoint`` and ``i = 0``.
    """
    if norm_a < norm_b:
        norm_a, norm_b = norm_b, norm_a
    k = shell_of(norm_a) if norm_a > 0 else 0
    if norm_b == 0:
        return CaseLabel("Case3", 0, k, "basepoint")
    i = shell_of(norm_b)
    if k == i:
        return CaseLabel("Case1", i)
    if k == i + 1:
        return CaseLabel("Case2", i)
    return CaseLabel("Case3", i, k)


def case3_envelope(i: int, k: int) -> float:
    return 3 * (2.0**k + 2.0**i) / (2.0 ** (k - 1) - 2.0**i)


# ---------------------------------------------------------- pair reports


@dataclass
class PairReport:
    a: int                 # larger norm
    b: int
    case: str
    branch: str
    i: int
    k: int | None
    norm_a: float
    norm_b: float
    dist: float
    phi_dist: float
    tilde_dist: float
    hat_dist: float | None
    bound: float
    margin: float
    witness: float | None = None
    upper: float | None = None
    closing: float | None = None
    alt_flip: bool = False
    ok: bool = True
    note: str = ""

    CSV_FIELDS = ("a", "b", "case", "branch", "i", "k", "norm_a", "norm_b", "dist", "phi_dist",
                  "tilde_dist", "hat_dist", "bound", "margin", "witness", "upper", "closing",
                  "alt_flip", "ok", "note")

    def row(self):
        out = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            out.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
        return out


@dataclass
class CaseSummary:
    pairs: int = 0
    counts: Counter = field(default_factory=Counter)
    passed: Counter = field(default_factory=Counter)
    worst_margin: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    alt_flips: int = 0
    closing_failures: int = 0
    case3_max_envelope: float = 0.0
    case3_ratio_range: list = field(default_factory=lambda: [math.inf, -math.inf])
    case2_middle_max: float = 0.0
    reports: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rep: PairReport):
        key = f"{rep.case}:{rep.branch}"
        self.pairs += 1
        self.counts[key] += 1
        if rep.ok:
            self.passed[key] += 1
        else:
            self.violations.append(asdict(rep))
        self.worst_margin[key] = min(self.worst_margin.get(key, math.inf), rep.margin)
        self.alt_flips += rep.alt_flip
        self.reports.append(rep)

    def to_json(self) -> dict:
        return {"ok": self.ok, "pairs": self.pairs, "counts": dict(sorted(self.counts.items())),
                "passed": dict(sorted(self.passed.items())),
                "worst_margin": dict(sorted(self.worst_margin.items())),
                "violations": self.violations[:50], "violation_count": len(self.violations),
                "alt_threshold_flips": self.alt_flips, "closing_failures": self.closing_failures,
                "case3_max_envelope": self.case3_max_envelope,
                "case3_ratio_range": self.case3_ratio_range, "case2_middle_max_ratio": self.case2_middle_max}


def _ordered(net, u, v):
    """(a, b) with ||b|| <= ||a||, ties broken by id."""
    nu, nv = net.norm(u), net.norm(v)
    if nu > nv or (nu == nv and u > v):
        return u, v
    return v, u


def check_case_bounds(aug: AugmentedMap, limits: WeakLimitTable, cert: SelectionCertificate,
                      consts: AuditConstants = AuditConstants(), hat: HatMap | None = None,
                      strict: bool = True) -> CaseSummary:
    """Audit every pair of the net against its branch lower bound.

    Case 1 picks branch (i) when ``||m(a)-m(b)|| >= ||a-b||/100`` (Step 2
    functional), else (ii) when the weighted ``s_i`` deviation reaches
    ``||a-b||/10`` (Step 1 functional), else (iii). Case 2 uses the
    ``||a-b|| - 12(||a||-||b||)`` bound and Case 3 the envelope ratio. Each
    pair also gets its closing lower bound: the branch bound when
    ``||a||-||b||`` is below the branch threshold, the norm coordinate of
    ``phi_tilde`` otherwise.
    """
    glued = aug.glued
    net, chain, ns = glued.net, glued.chain, glued.ns
    c = consts
    m = limits.m
    ids = net.ids
    phis = [glued.phi(a) for a in ids]
    phi_d = pairwise_norms(phis, ns)
    src_d = pairwise_norms([net.points[a] for a in ids], net.ns)
    m_d = pairwise_norms([m[a] for a in ids], ns)
    hat_d = pairwise_norms([hat(a) for a in ids], ns) if hat is not None else None
    summary = CaseSummary()

    for j, (u, v) in enumerate(itertools.combinations(ids, 2)):
        a, b = _ordered(net, u, v)
        na, nb = net.norm(a), net.norm(b)
        d, delta, pd = float(src_d[j]), na - nb, float(phi_d[j])
        lab = classify_case(na, nb)
        rep = PairReport(a, b, lab.case, lab.subcase, lab.i, lab.k, na, nb, d, pd, pd + delta,
                         None if hat_d is None else float(hat_d[j]), 0.0, 0.0)

        if lab.case == "Case1":
            i = lab.i
            half = 2.0 ** (i - 1)
            if float(m_d[j]) >= c.m_split * d:
                rep.branch = "i"
                rep.bound = c.below1 * d - c.norm_coeff * delta
                entry = cert.step2.get((u, v))
                close, alt = c.close_1000, c.close_100
            else:
                w1 = (2 * half - na) / half
                dev = (chain.s(i, a) - chain.s(i, b)) - (m[a] - m[b])
                if w1 * norm(dev, ns) >= c.subcase_split * d:
                    rep.branch = "ii"
                    rep.bound = c.below2 * d - c.norm_coeff * delta
                    entry = cert.step1.get((i, u, v))
                    close, alt = c.close_1000, c.close_100
                else:
                    rep.branch = "iii"
                    rep.bound = c.below3 * d - c.norm_coeff * delta
                    entry = None
                    close, alt = c.close_100, c.close_1000
            if rep.branch in ("i", "ii"):
                if entry is None:
                    rep.ok = False
                    rep.note = "missing functional"
                else:
                    rep.witness = entry.f(glued.phi(u) - glued.phi(v))
                    if rep.witness < rep.bound - c.slack:
                        rep.ok = False
                        rep.note = "functional witness below bound"
            rep.upper = 2 * d + c.norm_coeff * delta
            rep.closing = rep.bound if delta < close * d else delta
            alt_closing = rep.bound if delta < alt * d else delta
            rep.alt_flip = (rep.closing > 0) != (alt_closing > 0)

        elif lab.case == "Case2":
            i = lab.i
            rep.branch = "main"
            rep.bound = d - c.case2_coeff * delta
            wa = (na - 2.0**i) / 2.0**i
            wb = (2.0**i - nb) / 2.0 ** (i - 1)
            s_a, s_b = chain.s(i + 1, a), chain.s(i + 1, b)
            middle = norm((s_a - s_b) - wa * s_a + wb * s_b, ns)
            summary.case2_middle_max = max(summary.case2_middle_max, middle / d)
            if middle > c.case2_middle * d + c.slack:
                rep.ok = False
                rep.note = "middle term above 5||a-b||"
            rep.upper = c.case2_middle * d + c.norm_coeff * delta
            rep.closing = rep.bound if delta < c.close_case2 * d else delta

        else:
            rep.branch = rep.branch or "separated"
            env = 3.0 if lab.subcase == "basepoint" else case3_envelope(lab.i, lab.k)
            summary.case3_max_envelope = max(summary.case3_max_envelope, env)
            rep.upper = 3 * (na + nb)
            rep.bound = delta
            ratio = rep.tilde_dist / d
            lo, hi = summary.case3_ratio_range
            summary.case3_ratio_range = [min(lo, ratio), max(hi, ratio)]
            if env > c.case3_ratio + c.slack:
                rep.ok = False
                rep.note = "envelope ratio above 24"
            elif not 1 / c.case3_ratio - c.slack <= ratio <= c.case3_ratio + c.slack:
                rep.ok = False
                rep.note = "measured ratio outside [1/24, 24]"
            rep.closing = delta
            rep.margin = rep.tilde_dist - rep.bound

        if lab.case != "Case3":
            rep.margin = pd - rep.bound
        if rep.margin < -c.slack:
            rep.ok = False
            rep.note = rep.note or "measured distance below branch bound"
        if rep.upper is not None:
            measured = rep.tilde_dist if lab.case == "Case3" else pd
            if measured > rep.upper + c.slack:
                rep.ok = False
                rep.note = rep.note or "measured distance above upper envelope"
        if not rep.closing > 0:
            rep.ok = False
            summary.closing_failures += 1
            rep.note = rep.note or "closing lower bound not positive"
        summary.add(rep)

    if strict and not summary.ok:
        raise BoundViolated(f"{len(summary.violations)} pair(s) violate their branch bound", summary)
    return summary


@dataclass
class TauSummary:
    pairs: int = 0
    counts: Counter = field(default_factory=Counter)
    worst_alpha: float = math.inf
    worst_pair: tuple | None = None
    worst_by_case: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    target: float = 4 / 27

    @property
    def ok(self):
        return not self.violations

    def to_json(self):
        return {"ok": self.ok, "pairs": self.pairs, "counts": dict(sorted(self.counts.items())),
                "worst_alpha": self.worst_alpha, "worst_pair": self.worst_pair,
                "worst_by_case": dict(sorted(self.worst_by_case.items())),
                "violations": self.violations[:50], "violation_count": len(self.violations),
                "target": self.target}


def check_tau_bounds(hat: HatMap, consts: AuditConstants = AuditConstants(),
                     strict: bool = True) -> TauSummary:
    """Check ``||phi_hat(a) - phi_hat(b)|| >= alpha (||a|| - ||b||)`` by 3-adic band.

    Same segment: alpha = 1. Adjacent segments: 1/3. Separated: 4/27.
    Pairs with ``||b|| <= 3 <= ||a||`` carry the ``low`` tag.
    """
    net = hat.net
    ids = net.ids
    c = consts
    hd = pairwise_norms([hat(a) for a in ids], hat.glued.ns)
    out = TauSummary(target=c.tau_case3)
    for j, (u, v) in enumerate(itertools.combinations(ids, 2)):
        a, b = _ordered(net, u, v)
        delta = net.norm(a) - net.norm(b)
        if delta <= 0:
            continue
        sa, sb = tau_segment(net.norm(a)), tau_segment(net.norm(b))
        if sa == sb:
            case, const = "tau1", 1.0
        elif sa == sb + 1:
            case, const = "tau2", c.tau_case2
        else:
            case, const = "tau3", c.tau_case3
        if case != "tau1":
            start = 3.0 ** (sa - 1)
            case += ":sub1" if net.norm(a) - start >= delta / 3 else ":sub2"
            if sb == 1:
                case += ":low"
        alpha = float(hd[j]) / delta
        out.pairs += 1
        out.counts[case] += 1
        out.worst_by_case[case] = min(out.worst_by_case.get(case, math.inf), alpha)
        if alpha < out.worst_alpha:
            out.worst_alpha, out.worst_pair = alpha, (a, b)
        if float(hd[j]) < const * delta - c.slack:
            out.violations.append({"a": a, "b": b, "case": case, "alpha": alpha, "required": const})
    if out.pairs and out.worst_alpha < c.tau_case3 - c.slack and not out.violations:
        out.violations.append({"a": out.worst_pair[0], "b": out.worst_pair[1], "case": "global",
                               "alpha": out.worst_alpha, "required": c.tau_case3})
    if strict and not out.ok:
        raise BoundViolated(f"{len(out.violations)} pair(s) violate the tau lower bound", out)
    return out


# --------------------------------------------------------- coarse moduli


@dataclass
class CoarseModuli:
    """Per-bucket image distance extremes and their monotone envelopes.

    ``lower_env`` is the largest non-decreasing minorant of the bucket minima
    (suffix minimum), ``upper_env`` the smallest non-decreasing majorant of
    the maxima (prefix maximum).
    """

    edges: list
    counts: list
    mins: list
    maxs: list
    lower_env: list
    upper_env: list

    @property
    def strictly_increasing(self) -> bool:
        e = self.lower_env
        return all(y > x for x, y in zip(e, e[1:]))

    @property
    def ordered(self) -> bool:
        return all(lo <= hi for lo, hi in zip(self.mins, self.maxs))

    def to_json(self):
        return {**asdict(self), "strictly_increasing": self.strictly_increasing, "ordered": self.ordered,
                "buckets": len(self.counts)}


def empirical_moduli(evaluator: Callable, points: Sequence, metric: Callable, bucket_width: float = 1.0,
                     image_dist: Callable | None = None, ns: NormSpec | float | None = None,
                     max_distance: float | None = None) -> CoarseModuli:
    """Bucket pairs by source distance ``[k w, (k+1) w)``; empty buckets are skipped.

    ``max_distance`` drops pairs farther apart. On a truncated space the
    longest distances are realised only by a few boundary pairs, which can
    pull the lower envelope down, so callers usually pass the truncation
    radius here.
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    src = np.array([metric(a, b) for a, b in itertools.combinations(pts, 2)], dtype=float)
    images = [evaluator(a) for a in pts]
    if image_dist is None:
        img = pairwise_norms(images, NormSpec.of(2 if ns is None else ns))
    elif hasattr(image_dist, "pairwise"):
        img = image_dist.pairwise(images)
    else:
        img = np.array([image_dist(x, y) for x, y in itertools.combinations(images, 2)], dtype=float)
    buckets = defaultdict(list)
    for s, t in zip(src, img):
        if max_distance is not None and s > max_distance:
            continue
        buckets[int(math.floor(s / bucket_width))].append(float(t))
    keys = sorted(buckets)
    mins = [min(buckets[k]) for k in keys]
    maxs = [max(buckets[k]) for k in keys]
    lower = list(np.minimum.accumulate(mins[::-1])[::-1]) if mins else []
    upper = list(np.maximum.accumulate(maxs)) if maxs else []
    return CoarseModuli([k * bucket_width for k in keys], [len(buckets[k]) for k in keys], mins, maxs,
                        [float(x) for x in lower], [float(x) for x in upper])


def write_pairs_csv(reports: Sequence[PairReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PairReport.CSV_FIELDS)
        for rep in reports:
            w.writerow(rep.row())
