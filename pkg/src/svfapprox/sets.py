"""Exact geometry of finite point sets in R^d.

Compact sets are represented by finite, nonempty, deduplicated point clouds.
Every operation here is exact up to floating point: distances, projections,
Hausdorff distance, metric pairs and chains, and the metric and Minkowski
linear combinations.

Points inside a :class:`CompactSet` are kept in lexicographic order, which
makes chain enumeration and tie-breaking deterministic.
"""

from __future__ import annotations

import json
import warnings
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ChainTruncationWarning, DimensionError, UsageError

#: Absolute tolerance under which two distances count as a projection tie.
TIE_TOL = 1e-9

#: Default maximum number of metric chains produced by an enumeration.
CHAIN_CAP = 10_000


class Norm(str, Enum):
    """Choice of the norm on R^d."""

    EUCLIDEAN = "euclidean"
    MAX = "max"
    SUM = "sum"


_ORD = {Norm.EUCLIDEAN: 2, Norm.MAX: np.inf, Norm.SUM: 1}


def as_norm(norm) -> Norm:
    try:
        return Norm(norm)
    except ValueError:
        raise UsageError(f"unknown norm {norm!r}; expected one of "
                         f"{[n.value for n in Norm]}") from None


def vnorm(v, norm=Norm.EUCLIDEAN) -> np.ndarray:
    """Norm of vectors stored along the last axis."""
    v = np.asarray(v, dtype=float)
    return np.linalg.norm(v, ord=_ORD[as_norm(norm)], axis=-1)


def _as_point(p, dim=None) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1:
        raise UsageError(f"a point must be a flat coordinate tuple, got shape {p.shape}")
    if dim is not None and p.shape[0] != dim:
        raise DimensionError(f"point of dimension {p.shape[0]} used with sets of dimension {dim}")
    if not np.all(np.isfinite(p)):
        raise UsageError("point coordinates must be finite")
    return p


class CompactSet:
    """A finite nonempty subset of R^d.

    Parameters
    ----------
    points
        Anything convertible to an array of shape ``(k, d)``. A flat sequence
        of numbers is read as ``k`` points in R^1.
    """

    __slots__ = ("_pts", "_hash")

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0:
            pts = pts.reshape(1, 1)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise UsageError("a compact set needs at least one point of dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise UsageError("set coordinates must be finite")
        # lexicographic order: first coordinate is the primary key
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = np.ascontiguousarray(pts[keep])
        pts.setflags(write=False)
        self._pts = pts
        self._hash = None

    @classmethod
    def _trusted(cls, pts: np.ndarray) -> "CompactSet":
        # pts already sorted and deduplicated
        obj = cls.__new__(cls)
        pts = np.ascontiguousarray(pts, dtype=float)
        pts.setflags(write=False)
        obj._pts = pts
        obj._hash = None
        return obj

    @property
    def points(self) -> np.ndarray:
        return self._pts

    @property
    def dim(self) -> int:
        return self._pts.shape[1]

    def __len__(self) -> int:
        return self._pts.shape[0]

    def __iter__(self):
        return iter(self._pts)

    def __contains__(self, p) -> bool:
        p = _as_point(p, self.dim)
        return bool(np.any(np.all(self._pts == p, axis=1)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompactSet):
            return NotImplemented
        return self._pts.shape == other._pts.shape and bool(np.all(self._pts == other._pts))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._pts.shape, self._pts.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        if self.dim == 1:
            body = ", ".join(f"{v:.6g}" for v in self._pts[:, 0])
        else:
            body = ", ".join("(" + ", ".join(f"{v:.6g}" for v in p) + ")" for p in self._pts)
        return f"CompactSet({{{body}}})"

    def magnitude(self, norm=Norm.EUCLIDEAN) -> float:
        """``|A| = haus(A, {0})``, the largest norm of a member."""
        return float(np.max(vnorm(self._pts, norm)))

    def scaled(self, lam: float) -> "CompactSet":
        return CompactSet(lam * self._pts)

    def to_list(self) -> list:
        return self._pts.tolist()

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text: str) -> "CompactSet":
        data = json.loads(text)
        return from_nested(data)


def from_nested(data) -> CompactSet:
    """Build a set from the JSON shape ``[[x, ...], ...]`` with uniform dimension."""
    if not isinstance(data, list) or not data:
        raise UsageError("a serialized compact set is a nonempty array of points")
    if not all(isinstance(p, list) for p in data):
        raise UsageError("each point must be an array of numbers")
    dims = {len(p) for p in data}
    if len(dims) != 1:
        raise DimensionError(f"points of mixed dimensions {sorted(dims)}")
    return CompactSet(data)


def as_set(obj) -> CompactSet:
    return obj if isinstance(obj, CompactSet) else CompactSet(obj)


def _check_dims(*sets: CompactSet) -> int:
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise DimensionError(f"sets of mixed dimensions {sorted(dims)}")
    return dims.pop()


def pairwise_distances(A: CompactSet, B: CompactSet, norm=Norm.EUCLIDEAN) -> np.ndarray:
    """Matrix of ``|a - b|`` with rows indexed by A and columns by B."""
    _check_dims(A, B)
    diff = A.points[:, None, :] - B.points[None, :, :]
    return vnorm(diff, norm)


def dist_point_set(p, A: CompactSet, norm=Norm.EUCLIDEAN) -> float:
    """Distance from the point ``p`` to the set ``A``."""
    p = _as_point(p, A.dim)
    return float(np.min(vnorm(A.points - p, norm)))


def project(p, A: CompactSet, norm=Norm.EUCLIDEAN, tie_tol: float = TIE_TOL) -> CompactSet:
    """All points of ``A`` nearest to ``p`` (ties within ``tie_tol`` included)."""
    p = _as_point(p, A.dim)
    d = vnorm(A.points - p, norm)
    return CompactSet._trusted(A.points[d <= d.min() + tie_tol])


def nearest_index(p, A: CompactSet, norm=Norm.EUCLIDEAN, tie_tol: float = TIE_TOL) -> int:
    """Index of the lexicographically smallest nearest point of ``A`` to ``p``."""
    d = vnorm(A.points - np.asarray(p, dtype=float), norm)
    return int(np.flatnonzero(d <= d.min() + tie_tol)[0])


def hausdorff(A: CompactSet, B: CompactSet, norm=Norm.EUCLIDEAN) -> float:
    """Hausdorff distance between two finite sets, by exhaustive pairwise search."""
    D = pairwise_distances(A, B, norm)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def _pair_mask(D: np.ndarray, tie_tol: float) -> np.ndarray:
    row = D <= D.min(axis=1, keepdims=True) + tie_tol  # b projects a onto B
    col = D <= D.min(axis=0, keepdims=True) + tie_tol  # a projects b onto A
    return row | col


def metric_pairs(A: CompactSet, B: CompactSet, norm=Norm.EUCLIDEAN,
                 tie_tol: float = TIE_TOL) -> list[tuple[tuple, tuple]]:
    """All ``(a, b)`` where one point is a projection of the other.

    Pairs are returned as tuples of coordinate tuples in lexicographic order.
    """
    D = pairwise_distances(A, B, norm)
    ii, jj = np.nonzero(_pair_mask(D, tie_tol))
    return [(tuple(A.points[i]), tuple(B.points[j])) for i, j in zip(ii, jj)]


def is_metric_pair(a, b, A: CompactSet, B: CompactSet, norm=Norm.EUCLIDEAN,
                   tie_tol: float = TIE_TOL) -> bool:
    a = _as_point(a, A.dim)
    b = _as_point(b, B.dim)
    if a not in A or b not in B:
        return False
    d = float(vnorm(a - b, norm))
    return (d <= dist_point_set(a, B, norm) + tie_tol
            or d <= dist_point_set(b, A, norm) + tie_tol)


def _adjacency(sets: Sequence[CompactSet], norm, tie_tol) -> list[list[np.ndarray]]:
    adj = []
    for A, B in zip(sets[:-1], sets[1:]):
        mask = _pair_mask(pairwise_distances(A, B, norm), tie_tol)
        adj.append([np.flatnonzero(row) for row in mask])
    return adj


def metric_chains(sets: Sequence[CompactSet], cap: int = CHAIN_CAP, norm=Norm.EUCLIDEAN,
                  tie_tol: float = TIE_TOL) -> tuple[list[np.ndarray], bool]:
    """Enumerate metric chains of ``A_0, ..., A_n`` depth first.

    Returns
    -------
    chains, truncated
        ``chains`` is a list of arrays of shape ``(n + 1, d)`` in lexicographic
        order; ``truncated`` is True when the enumeration hit ``cap``.
    """
    sets = [as_set(s) for s in sets]
    if len(sets) < 2:
        raise UsageError("metric chains need at least two sets")
    if cap < 1:
        raise UsageError("cap must be a positive integer")
    _check_dims(*sets)
    adj = _adjacency(sets, norm, tie_tol)
    n = len(sets) - 1
    chains: list[np.ndarray] = []
    path = [0] * (n + 1)
    # iterative DFS; each frame holds the remaining candidates for one level
    stack = [(0, list(range(len(sets[0])))[::-1])]
    while stack:
        level, todo = stack[-1]
        if not todo:
            stack.pop()
            continue
        idx = todo.pop()
        path[level] = idx
        if level == n:
            chains.append(np.array([sets[i].points[path[i]] for i in range(n + 1)]))
            if len(chains) >= cap:
                more = any(frame[1] for frame in stack)
                return chains, more
            continue
        stack.append((level + 1, list(adj[level][idx])[::-1]))
    return chains, False


def metric_chain_through(sets: Sequence[CompactSet], j: int, a, norm=Norm.EUCLIDEAN,
                         tie_tol: float = TIE_TOL) -> np.ndarray:
    """A metric chain whose ``j``-th entry is ``a``.

    Built by greedy projection from position ``j`` to the right and to the
    left; ties resolve to the lexicographically smallest point.
    """
    sets = [as_set(s) for s in sets]
    dim = _check_dims(*sets)
    if not 0 <= j < len(sets):
        raise UsageError(f"anchor index {j} outside 0..{len(sets) - 1}")
    a = _as_point(a, dim)
    if dist_point_set(a, sets[j], norm) > tie_tol:
        raise UsageError(f"anchor point {tuple(a)} is not in set {j}")
    out = np.empty((len(sets), dim))
    out[j] = sets[j].points[nearest_index(a, sets[j], norm, tie_tol)]
    for i in range(j + 1, len(sets)):
        out[i] = sets[i].points[nearest_index(out[i - 1], sets[i], norm, tie_tol)]
    for i in range(j - 1, -1, -1):
        out[i] = sets[i].points[nearest_index(out[i + 1], sets[i], norm, tie_tol)]
    return out


def is_metric_chain(chain, sets: Sequence[CompactSet], norm=Norm.EUCLIDEAN,
                    tie_tol: float = TIE_TOL) -> bool:
    chain = np.asarray(chain, dtype=float)
    if len(chain) != len(sets):
        return False
    return all(is_metric_pair(chain[i], chain[i + 1], sets[i], sets[i + 1], norm, tie_tol)
               for i in range(len(sets) - 1))


def _check_lambdas(lambdas, sets) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float).reshape(-1)
    if len(lam) != len(sets):
        raise UsageError(f"{len(lam)} coefficients for {len(sets)} sets")
    if len(sets) == 0:
        raise UsageError("need at least one set")
    return lam


def metric_linear_combination(lambdas, sets: Sequence[CompactSet], cap: int = CHAIN_CAP,
                              norm=Norm.EUCLIDEAN) -> CompactSet:
    """``{sum_i lambda_i a_i : (a_0, ..., a_n) a metric chain}``.

    Emits :class:`ChainTruncationWarning` when the chain cap was reached.
    """
    sets = [as_set(s) for s in sets]
    lam = _check_lambdas(lambdas, sets)
    if len(sets) == 1:
        return CompactSet(lam[0] * sets[0].points)
    chains, truncated = metric_chains(sets, cap, norm)
    if truncated:
        warnings.warn(f"metric chain enumeration truncated at {cap} chains",
                      ChainTruncationWarning, stacklevel=2)
    sums = np.einsum("i,kid->kd", lam, np.stack(chains))
    return CompactSet(sums)


def minkowski_linear_combination(lambdas, sets: Sequence[CompactSet]) -> CompactSet:
    """``{sum_i lambda_i a_i : a_i in A_i}`` over the full Cartesian product."""
    sets = [as_set(s) for s in sets]
    lam = _check_lambdas(lambdas, sets)
    _check_dims(*sets)
    acc = lam[0] * sets[0].points
    for l, S in zip(lam[1:], sets[1:]):
        acc = (acc[:, None, :] + l * S.points[None, :, :]).reshape(-1, acc.shape[1])
        acc = np.unique(acc, axis=0)
    return CompactSet(acc)


def kuratowski_limsup(sequence: Sequence[CompactSet], eps: float, window: int | None = None,
                      norm=Norm.EUCLIDEAN) -> CompactSet:
    """Windowed stand-in for the upper Kuratowski limit of a finite sequence.

    A point of the last ``window`` sets survives when it lies within ``eps``
    of at least half of those sets. Only meant as a diagnostic.
    """
    if eps <= 0:
        raise UsageError("eps must be positive")
    seq = [as_set(s) for s in sequence]
    if not seq:
        raise UsageError("empty sequence")
    _check_dims(*seq)
    W = len(seq) if window is None else int(window)
    if W < 1:
        raise UsageError("window must be positive")
    tail = seq[-W:]
    cand = np.unique(np.concatenate([s.points for s in tail]), axis=0)
    hits = np.zeros(len(cand), dtype=int)
    for S in tail:
        d = vnorm(cand[:, None, :] - S.points[None, :, :], norm).min(axis=1)
        hits += d <= eps
    keep = hits * 2 >= len(tail)
    if not np.any(keep):
        # fall back to the points closest to satisfying the criterion
        keep = hits == hits.max()
    return CompactSet(cand[keep])


def union(sets: Iterable[CompactSet]) -> CompactSet:
    sets = list(sets)
    _check_dims(*sets)
    return CompactSet(np.concatenate([s.points for s in sets]))


def dedup_close(points, tol: float = 1e-12) -> CompactSet:
    """Build a set, merging points whose coordinates all agree within ``tol``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    pts = CompactSet(pts).points
    kept: list[np.ndarray] = []
    for p in pts:
        if not any(np.all(np.abs(p - q) <= tol) for q in kept):
            kept.append(p)
    return CompactSet._trusted(np.array(kept))
