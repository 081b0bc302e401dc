"""Finite truncations of locally finite metric spaces.

Every generator returns a :class:`LocallyFiniteSpace` whose points carry
stable integer ids. Distances come from an oracle, so lattices and trees
never build a full distance matrix unless asked to.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import ConfigError, GeneratorOverflow
from .seqspace import NormSpec

DEFAULT_CAP = 200_000


class LocallyFiniteSpace:
    """Point ids ``0..n-1`` with a distance oracle, basepoint and declared delta.

    ``labels[i]`` is a human readable description of point ``i`` (lattice
    coordinates, tree paths, matrix rows).
    """

    def __init__(self, labels: Sequence[Hashable], dist: Callable[[int, int], float],
                 basepoint: int = 0, delta: float = 1.0, kind: str = "points", params=None):
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.labels = list(labels)
        self._dist = dist
        self.basepoint = int(basepoint)
        self.delta = float(delta)
        self.kind = kind
        self.params = dict(params or {})
        if not 0 <= self.basepoint < len(self.labels):
            raise ValueError("basepoint out of range")

    def __len__(self):
        return len(self.labels)

    @property
    def ids(self) -> range:
        return range(len(self.labels))

    def dist(self, u: int, v: int) -> float:
        if u == v:
            return 0.0
        return float(self._dist(u, v))

    def ball(self, center: int, r: float) -> list[int]:
        return [u for u in self.ids if self.dist(center, u) <= r]

    def id_of(self, label) -> int:
        return self.labels.index(label)

    def distance_matrix(self) -> np.ndarray:
        n = len(self)
        out = np.zeros((n, n))
        for u, v in itertools.combinations(range(n), 2):
            out[u, v] = out[v, u] = self.dist(u, v)
        return out

    def spec(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass
class ShellDecomposition:
    """Nested balls ``A_i = ball(O, 2**i)`` for ``i = 1..imax``."""

    shells: list[list[int]]
    basepoint: int

    @property
    def imax(self) -> int:
        return len(self.shells)

    def __getitem__(self, i: int) -> list[int]:
        if not 1 <= i <= len(self.shells):
            raise IndexError(f"shell index {i} outside 1..{len(self.shells)}")
        return self.shells[i - 1]


def shells(space: LocallyFiniteSpace, imax: int, cap: int = DEFAULT_CAP) -> ShellDecomposition:
    if imax < 1:
        raise ValueError("imax must be >= 1")
    radius = {u: space.dist(space.basepoint, u) for u in space.ids}
    out = []
    for i in range(1, imax + 1):
        shell = sorted(u for u, r in radius.items() if r <= 2.0**i)
        if len(shell) > cap:
            raise GeneratorOverflow(f"shell A_{i} has {len(shell)} points, cap is {cap}")
        out.append(shell)
    return ShellDecomposition(out, space.basepoint)


def _lp_dist(p: float):
    if math.isinf(p):
        return lambda x, y: float(max(abs(a - b) for a, b in zip(x, y)))
    if p == 1:
        return lambda x, y: float(sum(abs(a - b) for a, b in zip(x, y)))
    return lambda x, y: float(np.linalg.norm(np.subtract(x, y, dtype=float), ord=p))


def make_lattice(d: int, metric: NormSpec | float = 2.0, extent: int = 4,
                 cap: int = DEFAULT_CAP) -> LocallyFiniteSpace:
    """Integer points of ``[-extent, extent]^d`` with an l_p distance."""
    if d < 1 or extent < 1:
        raise ValueError("need d >= 1 and extent >= 1")
    n = (2 * extent + 1) ** d
    if n > cap:
        raise GeneratorOverflow(f"lattice would have {n} points, cap is {cap}")
    ns = NormSpec.of(metric)
    coords = list(itertools.product(range(-extent, extent + 1), repeat=d))
    f = _lp_dist(ns.p)
    return LocallyFiniteSpace(
        coords, lambda u, v: f(coords[u], coords[v]), basepoint=coords.index((0,) * d),
        delta=1.0, kind="lattice", params={"dim": d, "p": ns.to_json(), "extent": extent},
    )


def make_tree(branching: int, depth: int, edge_len: float = 1.0,
              cap: int = DEFAULT_CAP) -> LocallyFiniteSpace:
    """Complete rooted tree with the path metric, points listed breadth first."""
    if branching < 2 or depth < 1:
        raise ValueError("need branching >= 2 and depth >= 1")
    n = sum(branching**k for k in range(depth + 1))
    if n > cap:
        raise GeneratorOverflow(f"tree would have {n} points, cap is {cap}")
    paths: list[tuple[int, ...]] = [()]
    for level in range(depth):
        paths.extend(p + (c,) for p in paths if len(p) == level for c in range(branching))

    def dist(u, v):
        a, b = paths[u], paths[v]
        common = 0
        for x, y in zip(a, b):
            if x != y:
                break
            common += 1
        return edge_len * (len(a) + len(b) - 2 * common)

    return LocallyFiniteSpace(paths, dist, basepoint=0, delta=edge_len, kind="tree",
                              params={"branching": branching, "depth": depth, "edge_len": edge_len})


def from_matrix(matrix, basepoint: int = 0, delta: float | None = None) -> LocallyFiniteSpace:
    """Space given by an explicit distance matrix (checked with :func:`validate_space`)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ConfigError("distance matrix must be square and non-empty")
    if delta is None:
        off = m[~np.eye(len(m), dtype=bool)]
        delta = float(off.min()) if off.size else 1.0
        if delta <= 0:
            delta = 1.0
    return LocallyFiniteSpace(list(range(len(m))), lambda u, v: m[u, v], basepoint=basepoint,
                              delta=delta, kind="points", params={"matrix": m.tolist()})


def space_from_config(cfg: dict) -> LocallyFiniteSpace:
    kind = cfg.get("kind")
    try:
        if kind == "lattice":
            return make_lattice(int(cfg.get("dim", 1)), cfg.get("p", 2), int(cfg["extent"]))
        if kind == "tree":
            return make_tree(int(cfg["branching"]), int(cfg["depth"]), float(cfg.get("edge_len", 1.0)))
        if kind == "points":
            return from_matrix(cfg["matrix"], int(cfg.get("basepoint", 0)), cfg.get("delta"))
    except KeyError as exc:
        raise ConfigError(f"space spec missing field {exc}") from None
    raise ConfigError(f"unknown space kind {kind!r}")


@dataclass
class ValidationReport:
    ok: bool = True
    checked: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    worst: dict = field(default_factory=dict)

    def fail(self, kind, **detail):
        self.ok = False
        self.violations.append({"kind": kind, **detail})

    def to_json(self) -> dict:
        return {"ok": self.ok, "checked": self.checked, "violations": self.violations, "worst": self.worst}


def validate_space(space: LocallyFiniteSpace, samples: int = 2000, seed: int = 0,
                   rtol: float = 1e-12, max_violations: int = 20) -> ValidationReport:
    """Check symmetry, the triangle inequality and the declared delta.

    Small spaces (n**3 <= samples) are checked exhaustively, larger ones on
    ``samples`` random pairs and triples.
    """
    rep = ValidationReport()
    n = len(space)
    if n < 2:
        rep.checked = {"pairs": 0, "triples": 0, "exhaustive": True}
        return rep
    exhaustive = n**3 <= samples
    rng = np.random.default_rng(seed)
    if exhaustive:
        pairs = list(itertools.combinations(range(n), 2))
        triples = list(itertools.product(range(n), repeat=3))
    else:
        pairs = [tuple(rng.choice(n, 2, replace=False)) for _ in range(samples)]
        triples = [tuple(rng.integers(0, n, 3)) for _ in range(samples)]
    rep.checked = {"pairs": len(pairs), "triples": len(triples), "exhaustive": exhaustive}

    min_gap = math.inf
    for u, v in pairs:
        u, v = int(u), int(v)
        duv, dvu = space.dist(u, v), space.dist(v, u)
        if abs(duv - dvu) > rtol * max(1.0, abs(duv)):
            rep.fail("symmetry", u=u, v=v, d_uv=duv, d_vu=dvu)
        min_gap = min(min_gap, duv)
        if duv < space.delta * (1 - rtol):
            rep.fail("discreteness", u=u, v=v, dist=duv, delta=space.delta)
        if len(rep.violations) >= max_violations:
            break
    for u in range(min(n, samples)) if exhaustive else []:
        if space.dist(u, u) != 0:
            rep.fail("identity", u=u)
    worst_excess = -math.inf
    for u, v, w in triples:
        u, v, w = int(u), int(v), int(w)
        lhs = space.dist(u, w)
        rhs = space.dist(u, v) + space.dist(v, w)
        worst_excess = max(worst_excess, lhs - rhs)
        if lhs > rhs + rtol * max(1.0, rhs):
            rep.fail("triangle", triple=[u, v, w], d_uw=lhs, via=rhs)
        if len(rep.violations) >= max_violations:
            break
    rep.worst = {"min_distance": min_gap, "triangle_excess": worst_excess}
    return rep
