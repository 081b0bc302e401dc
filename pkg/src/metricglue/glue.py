"""Gluing a certified scale chain into one map on the whole net.

``phi`` blends consecutive chain maps across dyadic shells,
``phi_tilde`` appends the norm as an extra real coordinate (1-sum), and
``phi_hat`` replaces that coordinate by a 1-Lipschitz path ``tau`` through
fresh unit directions, so the image stays inside the sequence space itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .chain import EmbeddedNet, ScaleChain, shell_of
from .errors import OutOfRange
from .seqspace import NormSpec, SparseVector, dist_to_span, fresh_direction, norm


def blend(u: SparseVector, v: SparseVector, w: float) -> SparseVector:
    """``(1 - w) u + w v`` evaluated as ``u + w (v - u)``.

    Endpoint weights return ``u`` or ``v`` unchanged, and coordinates where
    ``u`` and ``v`` agree are copied exactly.
    """
    if w == 0.0:
        return u
    if w == 1.0:
        return v
    if u == v:
        return u
    keys = sorted(set(u.support) | set(v.support))
    return SparseVector((k, u[k] if u[k] == v[k] else u[k] + w * (v[k] - u[k])) for k in keys)


class GluedMap:
    """Shell-wise convex blend of ``s_i`` and ``s_{i+1}`` on the net."""

    def __init__(self, chain: ScaleChain, net: EmbeddedNet):
        self.chain = chain
        self.net = net
        self.ns = chain.ns
        self._cache: dict[int, SparseVector] = {}

    def weights(self, r: float, band: int) -> tuple[float, float]:
        half = 2.0 ** (band - 1)
        if not half <= r <= 2 * half:
            raise OutOfRange(f"norm {r} is outside band [{half}, {2 * half}]")
        return (2 * half - r) / half, (r - half) / half

    def phi(self, a: int, band: int | None = None) -> SparseVector:
        """Value of the glued map at net point ``a``.

        ``band`` forces the shell used; it only matters at ``||a|| = 2**i``
        where both neighbouring formulas apply.
        """
        if band is None and a in self._cache:
            return self._cache[a]
        r = self.net.norm(a)
        if r == 0:
            return SparseVector()
        i = shell_of(r) if band is None else band
        _, w = self.weights(r, i)
        if i + 1 > len(self.chain):
            raise OutOfRange(f"point {a} (norm {r}) needs s_{i + 1}; chain has {len(self.chain)} maps")
        val = blend(self.chain.s(i, a), self.chain.s(i + 1, a), w)
        if band is None:
            self._cache[a] = val
        return val

    __call__ = phi


class AugmentedMap:
    """``a -> (phi(a), ||a||)`` in the 1-sum of the sequence space and R."""

    def __init__(self, glued: GluedMap):
        self.glued = glued
        self.net = glued.net

    def phi_tilde(self, a: int) -> tuple[SparseVector, float]:
        return self.glued.phi(a), self.net.norm(a)

    __call__ = phi_tilde

    def distance(self, a: int, b: int) -> float:
        (x, s), (y, t) = self.phi_tilde(a), self.phi_tilde(b)
        return norm(x - y, self.glued.ns) + abs(s - t)


def tau_segment(t: float) -> int:
    """Index ``k`` of the direction ``p_k`` driving ``tau`` at time ``t``.

    Segment 1 is ``[0, 3]``; segment ``k >= 2`` is ``[3**(k-1), 3**k]``.
    Breakpoints belong to the lower segment.
    """
    if t < 0:
        raise OutOfRange("tau is defined on t >= 0")
    k, top = 1, 3.0
    while t > top:
        k += 1
        top *= 3.0
    return k


def _segment_start(k: int) -> float:
    return 0.0 if k == 1 else 3.0 ** (k - 1)


@dataclass
class TauPath:
    """Piecewise linear path with slopes ``p_1, p_2, ...`` and breakpoints ``3**k``.

    ``T[i-1]`` lists the net ids whose glued images make up ``T_i``;
    ``F_i`` is spanned by those images and ``p_1..p_{i-1}``.
    """

    directions: list[SparseVector]
    T: list[list[int]]
    kmax: int
    ns: NormSpec
    dist_checks: list[float] = field(default_factory=list)

    @property
    def breakpoints(self) -> list[float]:
        return [3.0**k for k in range(1, self.kmax + 2)]

    @property
    def t_max(self) -> float:
        return 3.0 ** (self.kmax + 1)

    def __call__(self, t: float) -> SparseVector:
        return tau(t, self)

    def span_generators(self, i: int, glued: GluedMap) -> list[SparseVector]:
        return [glued.phi(u) for u in self.T[i - 1]] + self.directions[: i - 1]

    def to_json(self) -> dict:
        return {"kmax": self.kmax, "p": self.ns.to_json(), "breakpoints": self.breakpoints,
                "directions": [d.to_json() for d in self.directions], "T": self.T,
                "dist_checks": self.dist_checks}

    @classmethod
    def from_json(cls, obj) -> "TauPath":
        return cls([SparseVector.from_json(d) for d in obj["directions"]], [list(t) for t in obj["T"]],
                   int(obj["kmax"]), NormSpec.of(obj["p"]), list(obj.get("dist_checks", [])))


def default_kmax(net: EmbeddedNet) -> int:
    top = max(net.norm(a) for a in net.ids)
    k = 0
    while 3.0 ** (k + 1) < top:
        k += 1
    return k


def build_tau(glued: GluedMap, net: EmbeddedNet | None = None, kmax: int | None = None) -> TauPath:
    """Choose ``p_i`` past every support of ``F_i``, so ``dist(p_i, F_i) = 1``."""
    net = net or glued.net
    if kmax is None:
        kmax = default_kmax(net)
    top = max(net.norm(a) for a in net.ids)
    if 3.0 ** (kmax + 1) < top:
        raise OutOfRange(f"tau up to 3**{kmax + 1} does not reach the largest norm {top}")
    directions: list[SparseVector] = []
    T: list[list[int]] = []
    checks = []
    for i in range(1, kmax + 2):
        Ti = [u for u in net.ids if net.norm(u) <= 3.0 ** (i + 1)]
        T.append(Ti)
        gens = [glued.phi(u) for u in Ti] + directions
        p = fresh_direction(gens)
        checks.append(dist_to_span(p, gens, glued.ns))
        directions.append(p)
    return TauPath(directions, T, kmax, glued.ns, checks)


def tau(t: float, path: TauPath) -> SparseVector:
    if t > path.t_max:
        raise OutOfRange(f"tau is built up to {path.t_max}, asked for {t}")
    k = tau_segment(t)
    out = SparseVector()
    for j in range(1, k):
        out = out + (3.0**j - _segment_start(j)) * path.directions[j - 1]
    return out + (t - _segment_start(k)) * path.directions[k - 1]


class HatMap:
    """``a -> tau(||a||) + phi(a)``, a map into the sequence space alone."""

    def __init__(self, glued: GluedMap, path: TauPath):
        self.glued = glued
        self.tau = path
        self.net = glued.net
        self._cache: dict[int, SparseVector] = {}

    def phi_hat(self, a: int) -> SparseVector:
        if a not in self._cache:
            self._cache[a] = tau(self.net.norm(a), self.tau) + self.glued.phi(a)
        return self._cache[a]

    __call__ = phi_hat
