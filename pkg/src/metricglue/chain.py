"""From a metric space to a certified family of near-isometries.

The pipeline here is::

    space --(piece embeddings / coordinates)--> EmbeddedNet
          --synthetic_chain--> ScaleChain --weak_limit--> WeakLimitTable
          --select_subsequence--> (ScaleChain, SelectionCertificate)

Weak* limits are coordinatewise limits of norm-bounded sequences. They are
detected on a finite horizon, never proven, and every failure to detect one
raises instead of silently truncating.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .errors import HorizonExhausted, JitterTooLarge, NoConvergence, NonUniform, OutOfRange
from .metricspace import LocallyFiniteSpace, ValidationReport, shells
from .seqspace import DualVector, NormSpec, SparseVector, norm, norming_functional

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 8
DEFAULT_HORIZON = 256
DEFAULT_TOL = 1e-9


def shell_of(r: float) -> int:
    """Smallest ``i >= 1`` with ``r <= 2**i``; exact at powers of two."""
    if r <= 2.0:
        return 1
    mant, exp = math.frexp(r)
    return exp - 1 if mant == 0.5 else exp


def _dense_rows(vecs: Sequence[SparseVector]) -> np.ndarray:
    cols = sorted(set().union(*(v.support for v in vecs))) if vecs else []
    pos = {k: j for j, k in enumerate(cols)}
    out = np.zeros((len(vecs), max(1, len(cols))))
    for r, v in enumerate(vecs):
        for k, x in v.items():
            out[r, pos[k]] = x
    return out


def pairwise_norms(vecs: Sequence[SparseVector], ns: NormSpec) -> np.ndarray:
    """Condensed vector of ``||v_a - v_b||`` over ``a < b`` (pdist order)."""
    if len(vecs) < 2:
        return np.zeros(0)
    rows = _dense_rows(vecs)
    p = ns.p
    if math.isinf(p):
        return pdist(rows, "chebyshev")
    if p == 1:
        return pdist(rows, "cityblock")
    if p == 2:
        return pdist(rows, "euclidean")
    return pdist(rows, "minkowski", p=p)


def frechet_embed(points: Sequence, dist: Callable) -> dict:
    """Isometric embedding of a finite metric space into l_inf^n.

    Point ``a`` maps to ``(dist(a, x_1), ..., dist(a, x_n))``; coordinate ``j``
    belongs to ``points[j]``.
    """
    if len(points) < 1:
        raise ValueError("need at least one point")
    return {a: SparseVector.from_dense([dist(a, x) for x in points]) for a in points}


# ---------------------------------------------------------------- nets


@dataclass
class EmbeddedNet:
    """Finite set ``N`` of vectors indexed by the source point ids."""

    points: dict[int, SparseVector]
    ns: NormSpec
    basepoint: int
    scale: float = 1.0
    source: str = ""

    def __post_init__(self):
        self.ns = NormSpec.of(self.ns)
        if self.points[self.basepoint]:
            raise ValueError("the basepoint must map to the zero vector")
        self.points = dict(sorted(self.points.items()))
        self._norms = {a: norm(v, self.ns) for a, v in self.points.items()}

    @property
    def ids(self) -> list[int]:
        return list(self.points)

    def __len__(self):
        return len(self.points)

    def norm(self, a: int) -> float:
        return self._norms[a]

    def dist(self, a: int, b: int) -> float:
        return norm(self.points[a] - self.points[b], self.ns)

    def shell_index(self, a: int) -> int:
        return shell_of(self._norms[a])

    @property
    def max_shell(self) -> int:
        return max(self.shell_index(a) for a in self.points)

    def subnet(self, i: int) -> list[int]:
        """Ids of ``N_i = {u : ||u|| <= 2**i}``."""
        r = 2.0**i if i < 1024 else math.inf
        return [a for a, nrm in self._norms.items() if nrm <= r]

    def max_index(self) -> int:
        return max((v.max_index() for v in self.points.values()), default=-1)

    def rescaled(self) -> "EmbeddedNet":
        """Scale so that the smallest nonzero norm is at least one."""
        nz = [r for r in self._norms.values() if r > 0]
        if not nz or min(nz) >= 1:
            return self
        c = 1.0 / min(nz)
        return EmbeddedNet({a: c * v for a, v in self.points.items()}, self.ns, self.basepoint,
                           self.scale * c, self.source)

    def to_json(self) -> dict:
        return {"p": self.ns.to_json(), "basepoint": self.basepoint, "scale": self.scale,
                "source": self.source,
                "points": {str(a): v.to_json() for a, v in self.points.items()}}

    @classmethod
    def from_json(cls, obj) -> "EmbeddedNet":
        pts = {int(a): SparseVector.from_json(v) for a, v in obj["points"].items()}
        return cls(pts, NormSpec.of(obj["p"]), int(obj["basepoint"]), float(obj.get("scale", 1.0)),
                   obj.get("source", ""))


def net_from_lattice(space: LocallyFiniteSpace, ns: NormSpec | float) -> EmbeddedNet:
    """Lattice points as their own coordinate vectors (isometric when the exponents agree)."""
    if space.kind != "lattice":
        raise ValueError("coordinate nets need a lattice space")
    pts = {u: SparseVector.from_dense(space.labels[u]) for u in space.ids}
    return EmbeddedNet(pts, NormSpec.of(ns), space.basepoint, source="lattice").rescaled()


def frechet_pieces(space: LocallyFiniteSpace, count: int, exponent: float = 1.0) -> list[dict]:
    """Translated distance profiles ``u -> (d(u,x)**e - d(O,x)**e)_{x in A_i}``.

    Coordinate ``x`` is the space id of ``x``, so the profiles of consecutive
    shells agree wherever both are defined. ``exponent=1`` gives the Fréchet
    embedding (isometric under the sup norm); ``exponent < 1`` a snowflaked,
    coarse but not bilipschitz, family.
    """
    decomp = shells(space, count)
    O = space.basepoint
    out = []
    for i in range(1, count + 1):
        A = decomp[i]
        base = {x: space.dist(O, x) ** exponent for x in A}
        out.append({u: SparseVector((x, space.dist(u, x) ** exponent - base[x]) for x in A) for u in A})
    return out


def shifted_pieces(pieces: Sequence[Mapping[int, SparseVector]], block: int | None = None) -> list[dict]:
    """``f_i`` composed with a coordinate shift by ``i * block``."""
    if block is None:
        block = 1 + max(v.max_index() for f in pieces for v in f.values())
    return [{u: v.shift(i * block) for u, v in f.items()} for i, f in enumerate(pieces, start=1)]


# ----------------------------------------------------------- limit detection


def _richardson(w: Sequence[int], x: Sequence[float], tol: float):
    """Fit ``L + c/i`` through the window ends; return ``L`` if every point fits."""
    w0, wl = w[0], w[-1]
    c = (x[0] - x[-1]) / (1.0 / w0 - 1.0 / wl)
    lim = x[-1] - c / wl
    if all(abs(xi - (lim + c / wi)) <= tol for wi, xi in zip(w, x)):
        return lim
    return None


@dataclass
class _Detection:
    limits: dict
    indices: list
    residual: dict
    transient: dict
    extrapolated: dict
    window: int


def _detect_limits(seqs: Mapping[int, Mapping[int, SparseVector]], indices: Sequence[int],
                   window: int, tol: float) -> _Detection:
    """Coordinatewise limits with subsequence thinning.

    For each point and coordinate, the values over the last ``window``
    surviving indices are classified as

    * stable -- oscillation <= tol, limit is the last value;
    * transient -- above tol at most once in the window (support escaping
      to infinity), limit 0;
    * extrapolated -- fits ``L + c/i`` within tol, limit ``L``;

    anything else thins the index list to the indices agreeing with the
    last value (within tol/2) and the scan restarts.
    """
    indices = list(indices)
    if not indices:
        raise NoConvergence("no indices to take limits over")
    clipped = len(indices) < window
    while True:
        W = indices[-window:]
        limits, residual, transient, extrap = {}, {}, {}, {}
        failing = None
        for a, seq in seqs.items():
            if any(i not in seq for i in W):
                raise NoConvergence(f"point {a} is outside the domain of indices in the window {W}")
            vecs = [seq[i] for i in W]
            coords = sorted(set().union(*(v.support for v in vecs)))
            lim, res = {}, 0.0
            tr, ex = [], []
            for k in coords:
                x = [v[k] for v in vecs]
                if max(x) - min(x) <= tol:
                    lim[k] = x[-1]
                    res = max(res, max(abs(xi - x[-1]) for xi in x))
                    continue
                if sum(abs(xi) > tol for xi in x) <= 1:
                    tr.append(k)
                    continue
                if len(W) >= 3:
                    L = _richardson(W, x, tol)
                    if L is not None:
                        # extrapolated values below the detection tolerance are zero
                        if abs(L) > tol:
                            lim[k] = L
                        ex.append(k)
                        continue
                failing = (a, k, x)
                break
            if failing:
                break
            limits[a] = SparseVector(lim)
            residual[a] = res
            if tr:
                transient[a] = tr
            if ex:
                extrap[a] = ex
        if failing is None:
            return _Detection(limits, indices, residual, transient, extrap, len(W))
        a, k, x = failing
        if clipped:
            raise NoConvergence(f"coordinate {k} of point {a} does not settle and the horizon "
                                f"({len(indices)}) is shorter than the window ({window})")
        last = seqs[a][indices[-1]][k]
        kept = [i for i in indices if i not in seqs[a] or abs(seqs[a][i][k] - last) <= tol / 2]
        log.debug("thinning on point %s coordinate %s: %d -> %d indices", a, k, len(indices), len(kept))
        if len(kept) < window:
            raise NoConvergence(f"thinning on point {a}, coordinate {k} leaves {len(kept)} indices "
                                f"(< window {window}); tail values {x}")
        indices = kept


# ---------------------------------------------------------------- lifting


def lift_space(space: LocallyFiniteSpace, pieces: Sequence[Mapping[int, SparseVector]],
               C: float | None, ns: NormSpec | float = math.inf, window: int = DEFAULT_WINDOW,
               tol: float = DEFAULT_TOL, fallback: str | None = None, rtol: float = 1e-9) -> EmbeddedNet:
    """Build the net ``N`` from a family of piece embeddings ``f_i : A_i -> X``.

    ``pieces[i-1]`` is ``f_i``. With ``C`` given, every piece is checked to
    satisfy ``d <= ||f_i(u) - f_i(v)|| <= C d`` on ``A_i`` (``NonUniform``
    otherwise) and the limit net must keep that bilipschitz window; pass
    ``C=None`` for coarse families, which only require distinct limits.
    ``fallback="fix_last"`` uses the last piece when no usable limit exists.
    """
    ns = NormSpec.of(ns)
    count = len(pieces)
    decomp = shells(space, count)
    O = space.basepoint
    for i, f in enumerate(pieces, start=1):
        A = decomp[i]
        missing = [u for u in A if u not in f]
        if missing:
            raise NonUniform(f"piece f_{i} is undefined on {missing[:5]}")
        if f[O]:
            raise NonUniform(f"piece f_{i} does not fix the basepoint")
        if C is not None and len(A) > 1:
            img = pairwise_norms([f[u] for u in A], ns)
            src = np.array([space.dist(u, v) for u, v in itertools.combinations(A, 2)])
            ratio = img / src
            bad = np.flatnonzero((ratio < 1 - rtol) | (ratio > C * (1 + rtol)))
            if bad.size:
                u, v = list(itertools.combinations(A, 2))[bad[0]]
                raise NonUniform(f"piece f_{i} breaks the bilipschitz window on ({u}, {v}): "
                                 f"ratio {ratio[bad[0]]!r} not in [1, {C}]")

    ids = list(space.ids)
    seqs = {u: {i: f[u] for i, f in enumerate(pieces, start=1) if u in f} for u in ids}
    not_covered = [u for u in ids if not seqs[u]]
    if not_covered:
        raise NonUniform(f"points {not_covered[:5]} lie in no piece domain")
    try:
        det = _detect_limits(seqs, range(1, count + 1), window, tol)
        net = EmbeddedNet(det.limits, ns, O, source="lift")
        _check_lifted(space, net, C, rtol)
    except NoConvergence as exc:
        if fallback != "fix_last":
            raise
        log.info("limit detection failed (%s); using the last piece", exc)
        last = pieces[-1]
        net = EmbeddedNet({u: last[u] for u in ids}, ns, O, source="lift:fix_last")
        _check_lifted(space, net, C, rtol)
    return net.rescaled()


def _check_lifted(space, net, C, rtol):
    ids = net.ids
    img = pairwise_norms([net.points[u] for u in ids], net.ns)
    src = np.array([space.dist(u, v) for u, v in itertools.combinations(ids, 2)])
    if img.size == 0:
        return
    ratio = img / src
    if C is None:
        bad = np.flatnonzero(img <= 0)
    else:
        bad = np.flatnonzero((ratio < 1 - rtol) | (ratio > C * (1 + rtol)))
    if bad.size:
        u, v = list(itertools.combinations(ids, 2))[bad[0]]
        raise NoConvergence(f"detected limit degenerates on pair ({u}, {v}): image/source ratio "
                            f"{ratio[bad[0]]!r}")


# ------------------------------------------------------------ scale chains


@dataclass
class ScaleChain:
    """Maps ``s_1, s_2, ...`` with ``maps[i-1]`` defined exactly on ``N_i``."""

    maps: list[dict[int, SparseVector]]
    ns: NormSpec
    C: float = 1.0
    origin: list[int] | None = None
    kind: str = ""

    def __post_init__(self):
        self.ns = NormSpec.of(self.ns)
        if self.origin is None:
            self.origin = list(range(1, len(self.maps) + 1))

    def __len__(self):
        return len(self.maps)

    def s(self, i: int, a: int) -> SparseVector:
        if not 1 <= i <= len(self.maps):
            raise OutOfRange(f"chain has indices 1..{len(self.maps)}, asked for {i}")
        try:
            return self.maps[i - 1][a]
        except KeyError:
            raise OutOfRange(f"point {a} is not in the domain of s_{i}") from None

    def to_json(self) -> dict:
        return {"C": self.C, "p": self.ns.to_json(), "kind": self.kind, "origin": self.origin,
                "maps": [{"i": i, "points": {str(a): v.to_json() for a, v in m.items()}}
                         for i, m in enumerate(self.maps, start=1)]}

    @classmethod
    def from_json(cls, obj) -> "ScaleChain":
        maps = [None] * len(obj["maps"])
        for entry in obj["maps"]:
            maps[int(entry["i"]) - 1] = {int(a): SparseVector.from_json(v) for a, v in entry["points"].items()}
        return cls(maps, NormSpec.of(obj["p"]), float(obj.get("C", 1.0)), obj.get("origin"), obj.get("kind", ""))


def validate_chain(chain: ScaleChain, net: EmbeddedNet, rtol: float = 1e-9) -> ValidationReport:
    """Check ``s_i(0) = 0``, ``dom s_i = N_i`` and the two-sided near-isometry bound."""
    rep = ValidationReport()
    O = net.basepoint
    worst_lower, worst_upper = math.inf, -math.inf
    pairs_checked = 0
    for i, m in enumerate(chain.maps, start=1):
        dom = net.subnet(i)
        if sorted(m) != dom:
            rep.fail("domain", i=i, expected=len(dom), got=len(m))
            continue
        if m[O]:
            rep.fail("basepoint", i=i)
        if len(dom) < 2:
            continue
        img = pairwise_norms([m[a] for a in dom], chain.ns)
        src = pairwise_norms([net.points[a] for a in dom], net.ns)
        ratio = img / src
        lo, hi = float(ratio.min()), float(ratio.max())
        pairs_checked += ratio.size
        worst_lower = min(worst_lower, lo)
        worst_upper = max(worst_upper, hi - (1 + 1 / i))
        pairs = None
        if lo < 1 - rtol:
            pairs = pairs or list(itertools.combinations(dom, 2))
            j = int(ratio.argmin())
            rep.fail("lower", i=i, pair=list(pairs[j]), ratio=lo)
        if hi > (1 + 1 / i) * (1 + rtol):
            pairs = pairs or list(itertools.combinations(dom, 2))
            j = int(ratio.argmax())
            rep.fail("upper", i=i, pair=list(pairs[j]), ratio=hi, bound=1 + 1 / i)
    rep.checked = {"maps": len(chain), "pairs": pairs_checked}
    rep.worst = {"min_ratio": worst_lower, "max_upper_excess": worst_upper}
    return rep


@dataclass
class WeakLimitTable:
    m: dict[int, SparseVector]
    indices: list[int]
    window: int
    tol: float
    residual: dict = field(default_factory=dict)
    transient: dict = field(default_factory=dict)
    extrapolated: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"indices": self.indices, "window": self.window, "tol": self.tol,
                "m": {str(a): v.to_json() for a, v in self.m.items()},
                "transient": {str(a): v for a, v in self.transient.items()},
                "extrapolated": {str(a): v for a, v in self.extrapolated.items()}}

    @classmethod
    def from_json(cls, obj) -> "WeakLimitTable":
        return cls({int(a): SparseVector.from_json(v) for a, v in obj["m"].items()},
                   list(obj["indices"]), int(obj["window"]), float(obj["tol"]),
                   transient={int(a): v for a, v in obj.get("transient", {}).items()},
                   extrapolated={int(a): v for a, v in obj.get("extrapolated", {}).items()})


def weak_limit(chain: ScaleChain, net: EmbeddedNet, window: int = DEFAULT_WINDOW,
               tol: float = DEFAULT_TOL) -> WeakLimitTable:
    """Coordinatewise limits ``m(a)`` of ``s_i(a)`` along a thinned subsequence."""
    horizon = len(chain)
    if horizon < net.max_shell:
        raise HorizonExhausted(f"horizon {horizon} ends before the outer shell N_{net.max_shell} is reached",
                               index=horizon, detail={"max_shell": net.max_shell})
    if horizon < net.max_shell + window:
        log.warning("horizon %d is shorter than max shell %d + window %d", horizon, net.max_shell, window)
    seqs = {a: {i: m[a] for i, m in enumerate(chain.maps, start=1) if a in m} for a in net.ids}
    det = _detect_limits(seqs, range(1, horizon + 1), window, tol)
    m = dict(det.limits)
    m[net.basepoint] = SparseVector()
    return WeakLimitTable(m, det.indices, det.window, tol, det.residual, det.transient, det.extrapolated)


# ------------------------------------------------------------- selection


@dataclass(frozen=True)
class SelectionConstants:
    weak1: float = 99 / 100   # f(dev_j) >= weak1 * ||dev_j||
    weak2: float = 1 / 1000   # |f(dev_k)| <= weak2 * ||a - b||, k > j
    mab: float = 99 / 100     # f(m(a) - m(b)) >= mab * ||m(a) - m(b)||
    weak3: float = 1 / 100    # |f(dev_k)| <= weak3 * ||m(a) - m(b)||, k >= i

    def to_json(self):
        return {"weak1": self.weak1, "weak2": self.weak2, "mab": self.mab, "weak3": self.weak3}


@dataclass
class Step1Entry:
    f: DualVector
    dev_norm: float
    pairing: float
    weak2_max: float = 0.0
    weak2_bound: float = 0.0

    def to_json(self):
        return {"f": self.f.to_json(), "dev_norm": self.dev_norm, "pairing": self.pairing,
                "weak2_max": self.weak2_max, "weak2_bound": self.weak2_bound}


@dataclass
class Step2Entry:
    f: DualVector
    diff_norm: float
    pairing: float
    first_shell: int
    weak3_max: float = 0.0

    def to_json(self):
        return {"f": self.f.to_json(), "diff_norm": self.diff_norm, "pairing": self.pairing,
                "first_shell": self.first_shell, "weak3_max": self.weak3_max}


@dataclass
class SelectionCertificate:
    """Survivor indices plus the functionals that witness the weak inequalities.

    ``step1[(j, a, b)]`` uses the renumbered index ``j``; ``indices[j-1]`` is
    the original chain index behind it.
    """

    indices: list[int]
    step1: dict[tuple[int, int, int], Step1Entry]
    step2: dict[tuple[int, int], Step2Entry]
    consts: SelectionConstants = SelectionConstants()

    def to_json(self) -> dict:
        return {"indices": self.indices, "consts": self.consts.to_json(),
                "step1": [{"j": j, "a": a, "b": b, **e.to_json()} for (j, a, b), e in self.step1.items()],
                "step2": [{"a": a, "b": b, **e.to_json()} for (a, b), e in self.step2.items()]}

    @classmethod
    def from_json(cls, obj) -> "SelectionCertificate":
        s1 = {(e["j"], e["a"], e["b"]): Step1Entry(DualVector.from_json(e["f"]), e["dev_norm"], e["pairing"],
                                                   e["weak2_max"], e["weak2_bound"]) for e in obj["step1"]}
        s2 = {(e["a"], e["b"]): Step2Entry(DualVector.from_json(e["f"]), e["diff_norm"], e["pairing"],
                                           e["first_shell"], e["weak3_max"]) for e in obj["step2"]}
        return cls(list(obj["indices"]), s1, s2, SelectionConstants(**obj["consts"]))


def _pairs_by_first_shell(net: EmbeddedNet):
    out = []
    for a, b in itertools.combinations(net.ids, 2):
        out.append((max(net.shell_index(a), net.shell_index(b)), a, b))
    out.sort()
    return out


def select_subsequence(chain: ScaleChain, net: EmbeddedNet, limits: WeakLimitTable,
                       consts: SelectionConstants = SelectionConstants(),
                       length: int | None = None) -> tuple[ScaleChain, SelectionCertificate]:
    """Thin the chain so every weak-limit functional inequality holds.

    Survivors are chosen greedily from ``limits.indices``: the ``t``-th
    survivor is the smallest remaining index whose deviations

        dev_n(a, b) = (s_n(a) - s_n(b)) - (m(a) - m(b))

    pair small against every Step 1 functional fixed at an earlier survivor
    and every Step 2 functional of a pair living in ``N_t``. After a survivor
    is fixed, its nonzero deviations on ``N_t`` receive their own duality-map
    functionals. The result is renumbered ``1..length`` and restricted to
    ``N_t``, which keeps the near-isometry bound because ``1 + 1/i`` falls.
    """
    ns, m = chain.ns, limits.m
    if length is None:
        length = net.max_shell + 1
    pairs = _pairs_by_first_shell(net)
    ids = net.ids
    src = dict(zip(itertools.combinations(ids, 2), pairwise_norms([net.points[a] for a in ids], net.ns).tolist()))

    step2: dict = {}
    for fs, a, b in pairs:
        diff = m[a] - m[b]
        if diff:
            f = norming_functional(diff, ns)
            step2[(a, b)] = Step2Entry(f, norm(diff, ns), f(diff), fs)

    survivors: list[int] = []
    step1: dict = {}
    candidates = iter(limits.indices)
    last_failure = None
    for t in range(1, length + 1):
        active2 = [(key, e) for key, e in step2.items() if e.first_shell <= t]
        chosen = None
        for n in candidates:
            smap = chain.maps[n - 1]
            resid: dict = {}

            def r(a):
                if a not in resid:
                    resid[a] = smap[a] - m[a]
                return resid[a]

            failure = None
            for (j, a, b), e in step1.items():
                val = abs(e.f(r(a)) - e.f(r(b)))
                if val > e.weak2_bound:
                    failure = ("weak2", (a, b), j, val, e.weak2_bound)
                    break
            if failure is None:
                for (a, b), e in active2:
                    val = abs(e.f(r(a)) - e.f(r(b)))
                    if val > consts.weak3 * e.diff_norm:
                        failure = ("weak3", (a, b), None, val, consts.weak3 * e.diff_norm)
                        break
            if failure is None:
                chosen = (n, r)
                break
            last_failure = (n, failure)
        if chosen is None:
            detail = {}
            pair = None
            if last_failure:
                n, (which, pair, j, val, bound) = last_failure
                detail = {"inequality": which, "candidate": n, "functional_index": j,
                          "value": val, "bound": bound}
            raise HorizonExhausted(
                f"selection needs {length} survivors but the horizon ran out after {len(survivors)} "
                f"(indices available: {len(limits.indices)})", pair=pair, index=t, detail=detail)
        n, r = chosen
        # every existing functional now also covers index t
        for (j, a, b), e in step1.items():
            e.weak2_max = max(e.weak2_max, abs(e.f(r(a)) - e.f(r(b))))
        for (a, b), e in active2:
            e.weak3_max = max(e.weak3_max, abs(e.f(r(a)) - e.f(r(b))))
        survivors.append(n)
        for fs, a, b in pairs:
            if fs > t:
                break
            dev = r(a) - r(b)
            if dev:
                f = norming_functional(dev, ns)
                step1[(t, a, b)] = Step1Entry(f, norm(dev, ns), f(dev),
                                              weak2_bound=consts.weak2 * src[(a, b)])

    maps = []
    for t, n in enumerate(survivors, start=1):
        dom = net.subnet(t)
        maps.append({a: chain.maps[n - 1][a] for a in dom})
    origin = [chain.origin[n - 1] for n in survivors]
    new_chain = ScaleChain(maps, ns, chain.C, origin, chain.kind)
    return new_chain, SelectionCertificate(survivors, step1, step2, consts)


def verify_certificate(chain: ScaleChain, net: EmbeddedNet, limits: WeakLimitTable,
                       cert: SelectionCertificate, slack: float = 1e-12) -> ValidationReport:
    """Re-derive every certified inequality from the stored functionals.

    ``chain`` is the renumbered chain returned by :func:`select_subsequence`.
    """
    rep = ValidationReport()
    c = cert.consts
    m, ns = limits.m, chain.ns
    T = len(chain)
    resid: dict = {}

    def r(k, a):
        # s_k(a) - m(a); pairings are linear, so f(dev_k(a, b)) = f(r(k, a)) - f(r(k, b))
        if (k, a) not in resid:
            resid[k, a] = chain.s(k, a) - m[a]
        return resid[k, a]

    n1 = n2 = 0
    for (j, a, b), e in cert.step1.items():
        d = r(j, a) - r(j, b)
        dn = norm(d, ns)
        if e.f.dual_norm() > 1 + 1e-12:
            rep.fail("dual_norm", step=1, key=[j, a, b], value=e.f.dual_norm())
        if e.f(d) < c.weak1 * dn - slack:
            rep.fail("weak1", key=[j, a, b], pairing=e.f(d), bound=c.weak1 * dn)
        bound = c.weak2 * net.dist(a, b)
        for k in range(j + 1, T + 1):
            v = abs(e.f(r(k, a)) - e.f(r(k, b)))
            n1 += 1
            if v > bound + slack:
                rep.fail("weak2", key=[j, a, b], k=k, value=v, bound=bound)
    for (a, b), e in cert.step2.items():
        diff = m[a] - m[b]
        dn = norm(diff, ns)
        if e.f(diff) < c.mab * dn - slack:
            rep.fail("mab", key=[a, b], pairing=e.f(diff), bound=c.mab * dn)
        for k in range(e.first_shell, T + 1):
            v = abs(e.f(r(k, a)) - e.f(r(k, b)))
            n2 += 1
            if v > c.weak3 * dn + slack:
                rep.fail("weak3", key=[a, b], k=k, value=v, bound=c.weak3 * dn)
    # every nonzero deviation on N_j must have its functional
    for j in range(1, T + 1):
        for a, b in itertools.combinations(net.subnet(j), 2):
            if r(j, a) != r(j, b) and (j, a, b) not in cert.step1:
                rep.fail("missing_step1", key=[j, a, b])
    for a, b in itertools.combinations(net.ids, 2):
        if m[a] != m[b] and (a, b) not in cert.step2:
            rep.fail("missing_step2", key=[a, b])
    rep.checked = {"step1": len(cert.step1), "step2": len(cert.step2), "weak2_pairings": n1,
                   "weak3_pairings": n2}
    return rep


# -------------------------------------------------------- synthetic chains


def synthetic_chain(net: EmbeddedNet, kind: str, length: int = DEFAULT_HORIZON, *,
                    blocksize: int | None = None, target: float = 0.25, decay: float = 1.0,
                    jitter_dim: int = 2, seed: int = 0) -> ScaleChain:
    """Test chains with different weak-limit behaviour.

    identity
        ``s_i = id``; the limit is the net itself.
    shift
        translate coordinates by ``i * blocksize``; an isometry whose weak
        limit is 0.
    scaled_shift
        ``(1 + 1/(2i))`` times the shift.
    jitter
        ``s_i(a) = a + eps_i P(a)`` where ``P`` is a fixed random map into a
        block of ``jitter_dim`` unused coordinates, ``P(0) = 0``, and
        ``eps_i = target * decay**(i-1) / (i * Lip(P|N_i))``. Disjoint
        supports give the lower bound for every p, the Lipschitz scaling the
        upper one. Needs ``target <= 1``.
    """
    ns = net.ns
    B = blocksize if blocksize is not None else net.max_index() + 1
    B = max(B, 1)
    domains = [net.subnet(i) for i in range(1, length + 1)]
    pts = net.points
    maps: list[dict] = []
    if kind == "identity":
        maps = [{a: pts[a] for a in dom} for dom in domains]
    elif kind == "shift":
        maps = [{a: pts[a].shift(i * B) for a in dom} for i, dom in enumerate(domains, start=1)]
    elif kind == "scaled_shift":
        maps = [{a: (1 + 1 / (2 * i)) * pts[a].shift(i * B) for a in dom}
                for i, dom in enumerate(domains, start=1)]
    elif kind == "jitter":
        if not 0 < target <= 1 or not 0 < decay <= 1:
            raise JitterTooLarge(f"jitter target {target} (decay {decay}) cannot fit the 1 + 1/i window")
        rng = np.random.default_rng(seed)
        P = {a: (SparseVector() if a == net.basepoint else
                 SparseVector.from_dense(rng.uniform(-1, 1, jitter_dim), offset=B))
             for a in net.ids}
        lip_cache: dict[int, float] = {}
        for i, dom in enumerate(domains, start=1):
            key = len(dom)
            if key not in lip_cache:
                if len(dom) < 2:
                    lip_cache[key] = 0.0
                else:
                    lip_cache[key] = float(np.max(pairwise_norms([P[a] for a in dom], ns)
                                                  / pairwise_norms([pts[a] for a in dom], ns)))
            L = lip_cache[key]
            eps = 0.0 if L == 0 else target * decay ** (i - 1) / (i * L)
            maps.append({a: pts[a] + eps * P[a] for a in dom})
    else:
        raise ValueError(f"unknown chain kind {kind!r}")
    return ScaleChain(maps, ns, 1.0, kind=kind)
