"""Finitely supported sequences under l_p norms.

This is the computable stand-in for a separable infinite-dimensional Banach
space: vectors have finite support on an unbounded index set, so new
coordinates are always available, duality maps are exact, and a basis vector
beyond every occupied index sits at distance exactly one from their span.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .errors import ZeroVector

__all__ = [
    "NormSpec",
    "SparseVector",
    "DualVector",
    "norm",
    "norming_functional",
    "dist_to_span",
    "fresh_direction",
]


@dataclass(frozen=True)
class NormSpec:
    """Exponent of the modelled space; ``math.inf`` selects the sup norm."""

    p: float = 2.0

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p < 1:
            raise ValueError(f"norm exponent must be >= 1, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def of(cls, p) -> "NormSpec":
        if isinstance(p, NormSpec):
            return p
        if isinstance(p, str):
            p = math.inf if p.strip().lower() in ("inf", "infinity", "∞") else float(p)
        return cls(p)

    @property
    def q(self) -> float:
        """Conjugate exponent."""
        if self.p == 1:
            return math.inf
        if math.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1)

    def to_json(self):
        return "inf" if math.isinf(self.p) else self.p

    def __str__(self):
        return "inf" if math.isinf(self.p) else f"{self.p:g}"


class SparseVector:
    """Immutable finitely supported real sequence.

    Entries are kept sorted by index and zeros are never stored, so two
    vectors are equal exactly when their stored entries agree.
    """

    __slots__ = ("_data",)
    # numpy scalars must defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, entries: Mapping[int, float] | Iterable[tuple[int, float]] | None = None):
        if entries is None:
            items = ()
        elif isinstance(entries, Mapping):
            items = entries.items()
        else:
            items = entries
        data = {}
        for k, v in items:
            k = int(k)
            if k < 0:
                raise ValueError("coordinate indices are non-negative")
            v = float(v)
            if v != 0.0:
                data[k] = v
        self._data = dict(sorted(data.items()))

    @classmethod
    def _raw(cls, data: dict) -> "SparseVector":
        # trusted constructor: data already sorted and zero-free
        out = cls.__new__(cls)
        out._data = data
        return out

    @classmethod
    def basis(cls, m: int, value: float = 1.0) -> "SparseVector":
        return cls({m: value})

    @classmethod
    def from_dense(cls, values: Sequence[float], offset: int = 0) -> "SparseVector":
        return cls((offset + k, v) for k, v in enumerate(values))

    @property
    def idx(self) -> np.ndarray:
        return np.fromiter(self._data.keys(), dtype=np.int64, count=len(self._data))

    @property
    def val(self) -> np.ndarray:
        return np.fromiter(self._data.values(), dtype=float, count=len(self._data))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self._data)

    def items(self):
        return self._data.items()

    def max_index(self) -> int:
        """Largest stored index, or -1 for the zero vector."""
        return next(reversed(self._data)) if self._data else -1

    def __getitem__(self, k: int) -> float:
        return self._data.get(k, 0.0)

    def __len__(self):
        return len(self._data)

    def __bool__(self):
        return bool(self._data)

    def __iter__(self):
        return iter(self._data.items())

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self._data == other._data

    def __hash__(self):
        return hash(tuple(self._data.items()))

    def __repr__(self):
        body = ", ".join(f"{k}: {v!r}" for k, v in self._data.items())
        return f"SparseVector({{{body}}})"

    def _combine(self, other: "SparseVector", sign: float) -> "SparseVector":
        out = dict(self._data)
        for k, v in other._data.items():
            s = out.get(k, 0.0) + sign * v
            if s == 0.0:
                out.pop(k, None)
            else:
                out[k] = s
        return SparseVector._raw(dict(sorted(out.items())))

    def __add__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self._combine(other, 1.0)

    def __sub__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return self._combine(other, -1.0)

    def __neg__(self):
        return SparseVector._raw({k: -v for k, v in self._data.items()})

    def __mul__(self, c):
        c = float(c)
        if c == 0.0:
            return SparseVector()
        return SparseVector._raw({k: c * v for k, v in self._data.items() if c * v != 0.0})

    __rmul__ = __mul__

    def shift(self, offset: int) -> "SparseVector":
        """Translate every coordinate index by ``offset``."""
        return SparseVector._raw({k + offset: v for k, v in self._data.items()})

    def dot(self, other) -> float:
        if isinstance(other, DualVector):
            other = other.entries
        if not self._data or not other._data:
            return 0.0
        a, b = (self._data, other._data) if len(self._data) <= len(other._data) else (other._data, self._data)
        return math.fsum(v * b[k] for k, v in a.items() if k in b)

    def to_json(self) -> dict:
        return {"idx": list(self._data.keys()), "val": list(self._data.values())}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SparseVector":
        idx, val = list(obj["idx"]), list(obj["val"])
        if len(idx) != len(val):
            raise ValueError("idx and val must have equal length")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        return cls(zip(idx, val))


def _lp(values: np.ndarray, p: float) -> float:
    if values.size == 0:
        return 0.0
    return float(np.linalg.norm(values, ord=p))


def norm(v: SparseVector, ns: NormSpec | float = NormSpec()) -> float:
    """l_p norm of a finitely supported vector."""
    return _lp(v.val, NormSpec.of(ns).p)


@dataclass(frozen=True)
class DualVector:
    """Finitely supported functional measured in the conjugate norm ``q``."""

    entries: SparseVector
    q: float

    def __call__(self, v: SparseVector) -> float:
        return self.entries.dot(v)

    def dual_norm(self) -> float:
        return _lp(self.entries.val, self.q)

    def to_json(self) -> dict:
        return {"q": "inf" if math.isinf(self.q) else self.q, **self.entries.to_json()}

    @classmethod
    def from_json(cls, obj) -> "DualVector":
        q = obj["q"]
        return cls(SparseVector.from_json(obj), math.inf if q == "inf" else float(q))


def norming_functional(v: SparseVector, ns: NormSpec | float = NormSpec()) -> DualVector:
    """Duality map: unit functional attaining ``norm(v)`` on ``v``.

    For ``1 < p < inf`` the entries are ``sign(v_k)|v_k|^(p-1) / ||v||^(p-1)``;
    ``p = 1`` gives the sign pattern of ``v`` and ``p = inf`` a signed basis
    functional at the first coordinate of maximal modulus.
    """
    ns = NormSpec.of(ns)
    if not v:
        raise ZeroVector("the zero vector has no norming functional")
    idx, val = v.idx, v.val
    p = ns.p
    if math.isinf(p):
        k = int(np.argmax(np.abs(val)))
        f = SparseVector({int(idx[k]): math.copysign(1.0, val[k])})
    elif p == 1:
        f = SparseVector(zip(idx.tolist(), np.sign(val).tolist()))
    elif p == 2:
        f = SparseVector(zip(idx.tolist(), (val / _lp(val, 2)).tolist()))
    else:
        a = np.abs(val)
        scaled = a / a.max()
        w = np.sign(val) * (scaled / _lp(scaled, p)) ** (p - 1)
        f = SparseVector(zip(idx.tolist(), w.tolist()))
    return DualVector(f, ns.q)


def _dense(vectors: Sequence[SparseVector]):
    cols = sorted(set().union(*(set(b.support) for b in vectors)))
    pos = {k: j for j, k in enumerate(cols)}
    mat = np.zeros((len(cols), len(vectors)))
    for j, b in enumerate(vectors):
        for k, x in b.items():
            mat[pos[k], j] = x
    return mat


def dist_to_span(
    v: SparseVector,
    basis: Sequence[SparseVector],
    ns: NormSpec | float = NormSpec(),
    tol: float = 1e-8,
    maxiter: int = 500,
) -> float:
    """Distance from ``v`` to the linear span of ``basis``.

    Exact for p = 2 (least squares) and whenever the support of ``v`` misses
    every basis support. p = 1 and p = inf are solved as linear programs;
    other exponents by smooth convex minimisation. Outside the exact cases the
    value is the residual norm of a feasible combination, so it never
    underestimates the true distance.
    """
    ns = NormSpec.of(ns)
    nv = norm(v, ns)
    basis = [b for b in basis if b]
    if not basis or not v:
        return 0.0 if not v else nv
    vsup = set(v.support)
    if all(vsup.isdisjoint(b.support) for b in basis):
        return nv

    mat = _dense([v, *basis])
    target, B = mat[:, 0], mat[:, 1:]
    p = ns.p
    if p == 2:
        coef, *_ = np.linalg.lstsq(B, target, rcond=None)
        return min(nv, _lp(target - B @ coef, 2))

    m, n = B.shape
    if p == 1 or math.isinf(p):
        # variables: coefficients c (free) then slack t
        if p == 1:
            cost = np.concatenate([np.zeros(n), np.ones(m)])
            slack = np.eye(m)
        else:
            cost = np.concatenate([np.zeros(n), [1.0]])
            slack = np.ones((m, 1))
        a_ub = np.block([[-B, -slack], [B, -slack]])
        b_ub = np.concatenate([-target, target])
        bounds = [(None, None)] * n + [(0, None)] * slack.shape[1]
        res = optimize.linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            return nv
        coef = res.x[:n]
        return min(nv, _lp(target - B @ coef, p))

    def objective(c):
        r = target - B @ c
        a = np.abs(r)
        return float(np.sum(a**p)), -(B.T @ (p * np.sign(r) * a ** (p - 1)))

    start, *_ = np.linalg.lstsq(B, target, rcond=None)
    res = optimize.minimize(objective, start, jac=True, method="L-BFGS-B",
                            options={"maxiter": maxiter, "ftol": tol * tol, "gtol": tol})
    return min(nv, _lp(target - B @ start, p), _lp(target - B @ res.x, p))


def fresh_direction(occupied: Iterable[SparseVector]) -> SparseVector:
    """Unit basis vector past every index used by ``occupied``."""
    top = max((u.max_index() for u in occupied), default=-1)
    return SparseVector.basis(top + 1)
