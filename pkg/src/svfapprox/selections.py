"""Chain functions and metric selections of a set-valued function.

A selection is built by greedy projection: starting from a seed point in one
fiber, each neighbouring fiber receives the (lexicographically smallest)
nearest point to the value already chosen. Every consecutive pair is then a
metric pair by construction, so the selection is a chain function of the
sampled fibers.

Families of selections are built for many seeds at once: the projection maps
between neighbouring fibers are tabulated once and all seeds are propagated
together.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import UsageError
from .sets import TIE_TOL, CompactSet, Norm, hausdorff, is_metric_chain, pairwise_distances
from .svf import (MAX_POINTS, Partition, SetValuedFunction, StepFunction, local_modulus,
                  quasi_modulus_left, quasi_modulus_right, sup_norm, variation,
                  variation_function)

#: Per-coordinate tolerance for treating two selections as the same.
DEDUP_TOL = 1e-12


class ChainFunction(StepFunction):
    """Step function ``y_i`` on ``[x_i, x_{i+1})``, ``y_n`` at ``x_n``, built on a metric chain."""

    def __init__(self, partition: Partition, chain):
        super().__init__(partition, chain)

    @property
    def chain(self) -> np.ndarray:
        return self.values


class Selection(StepFunction):
    """A metric selection sampled on a partition, with the seed it was grown from."""

    def __init__(self, partition: Partition, values, seed: tuple[float, tuple]):
        super().__init__(partition, values)
        self.seed = seed

    def __repr__(self) -> str:
        x, y = self.seed
        return f"Selection(seed=({x:g}, {tuple(round(c, 6) for c in y)}), nodes={len(self.nodes)})"


def chain_function(F: SetValuedFunction, chi: Partition, phi, norm=Norm.EUCLIDEAN) -> ChainFunction:
    """Chain function of ``F`` on ``chi`` based on the metric chain ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi.reshape(-1, 1)
    fibers = F.fibers(chi)
    if len(phi) != len(fibers) or not is_metric_chain(phi, fibers, norm):
        raise UsageError("phi is not a metric chain of the fibers of F on chi")
    return ChainFunction(chi, phi)


class FiberTable:
    """Fibers of an SVF on a partition plus tabulated greedy projections.

    ``right[k, p]`` is the index in fiber ``k + 1`` of the representative
    projection of point ``p`` of fiber ``k``; ``left[k, p]`` maps point ``p``
    of fiber ``k + 1`` back onto fiber ``k``.
    """

    def __init__(self, fibers: Sequence[CompactSet], norm=Norm.EUCLIDEAN, tie_tol: float = TIE_TOL):
        self.fibers = list(fibers)
        self.norm = norm
        n = len(self.fibers)
        self.sizes = np.array([len(A) for A in self.fibers])
        M = int(self.sizes.max())
        d = self.fibers[0].dim
        pts = np.full((n, M, d), np.nan)
        for k, A in enumerate(self.fibers):
            pts[k, :len(A)] = A.points
        self.points = pts
        self.right = np.zeros((n - 1, M), dtype=np.intp)
        self.left = np.zeros((n - 1, M), dtype=np.intp)
        ident = np.arange(M)
        for k in range(n - 1):
            A, B = self.fibers[k], self.fibers[k + 1]
            if A is B or A == B:
                self.right[k] = ident
                self.left[k] = ident
                continue
            D = pairwise_distances(A, B, norm)
            self.right[k, :len(A)] = np.argmax(D <= D.min(axis=1, keepdims=True) + tie_tol, axis=1)
            self.left[k, :len(B)] = np.argmax(D <= D.min(axis=0, keepdims=True) + tie_tol, axis=0)

    def __len__(self) -> int:
        return len(self.fibers)

    def propagate(self, seed_nodes, seed_points) -> np.ndarray:
        """Index table of shape ``(S, n)`` for seeds ``(node, point index)``."""
        j = np.asarray(seed_nodes, dtype=np.intp)
        table = np.zeros((j.size, len(self)), dtype=np.intp)
        table[np.arange(j.size), j] = seed_points
        for k in range(len(self) - 1):
            live = j <= k
            if live.any():
                table[live, k + 1] = self.right[k, table[live, k]]
        for k in range(len(self) - 1, 0, -1):
            live = j >= k
            if live.any():
                table[live, k - 1] = self.left[k - 1, table[live, k]]
        return table

    def values(self, table: np.ndarray) -> np.ndarray:
        """Coordinates ``(S, n, d)`` for an index table."""
        return self.points[np.arange(len(self))[None, :], table]

    def jump_nodes(self, ratio: float = 10.0) -> np.ndarray:
        """Nodes ``i >= 1`` where ``haus(F_{i-1}, F_i)`` stands out from the typical step."""
        inc = np.array([0.0 if A is B else hausdorff(A, B, self.norm)
                        for A, B in zip(self.fibers[:-1], self.fibers[1:])])
        if inc.size == 0:
            return np.array([], dtype=np.intp)
        thresh = max(ratio * float(np.median(inc)), 1e-12)
        return np.flatnonzero(inc > thresh) + 1


def _fiber_index(table: FiberTable, node: int, y, tol: float) -> int:
    A = table.fibers[node]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (A.dim,):
        raise UsageError(f"seed point has dimension {y.size}, fibers have {A.dim}")
    d = np.max(np.abs(A.points - y), axis=1)
    i = int(np.argmin(d))
    if d[i] > tol:
        raise UsageError(f"seed point {tuple(y)} is not in the fiber at node {node}")
    return i


def _node_index(chi: Partition, x: float) -> int:
    i = chi.index_of(x, tol=1e-12 * max(1.0, abs(chi.b - chi.a)))
    if i is None:
        raise UsageError(f"seed abscissa {x!r} is not a partition node")
    return i


def metric_selection_through(F: SetValuedFunction, chi: Partition, alpha, norm=Norm.EUCLIDEAN,
                             table: FiberTable | None = None) -> Selection:
    """Metric selection of ``F`` on ``chi`` passing through ``alpha = (x_j, y)``."""
    x, y = alpha
    table = table or FiberTable(F.fibers(chi), norm)
    j = _node_index(chi, x)
    p = _fiber_index(table, j, y, TIE_TOL)
    idx = table.propagate([j], [p])
    vals = table.values(idx)[0]
    return Selection(chi, vals, (float(chi.nodes[j]), tuple(vals[j])))


def _strided(m: int, k: int, shift: int = 0) -> np.ndarray:
    # rotating the stride by the fiber ordinal lets a single seed per fiber
    # still reach every branch of a multi-point graph
    if k >= m:
        return np.arange(m)
    base = np.round(np.linspace(0, m - 1, k)).astype(np.intp)
    return np.unique((base + shift) % m)


def selection_family(F: SetValuedFunction, chi: Partition, seeds_per_fiber: int = 1,
                     norm=Norm.EUCLIDEAN, anchors: Sequence[float] = (),
                     max_seed_fibers: int = 64, jump_ratio: float = 10.0,
                     table: FiberTable | None = None) -> list[Selection]:
    """Finite, deduplicated family of metric selections of ``F`` on ``chi``.

    Seeds are spread over at most ``max_seed_fibers`` evenly strided fibers,
    taking up to ``seeds_per_fiber`` points of each by index striding
    (rotated by the fiber ordinal). Every
    point of the fibers on both sides of a detected jump, and of the fibers at
    (and just left of) each abscissa in ``anchors``, is seeded as well.
    """
    if seeds_per_fiber < 1:
        raise UsageError("seeds_per_fiber must be at least 1")
    table = table or FiberTable(F.fibers(chi), norm)
    n = len(table)
    if n <= max_seed_fibers:
        nodes = np.arange(n)
    else:
        nodes = np.unique(np.round(np.linspace(0, n - 1, max_seed_fibers)).astype(np.intp))
    seeds: list[tuple[int, int]] = []
    for j, k in enumerate(nodes):
        seeds.extend((int(k), int(p)) for p in _strided(int(table.sizes[k]), seeds_per_fiber, j))
    full = set()
    for k in table.jump_nodes(jump_ratio):
        full.update((int(k) - 1, int(k)))
    for x in anchors:
        k = int(chi.locate(x))
        full.add(k)
        if k > 0 and chi.nodes[k] == x:
            full.add(k - 1)
    for k in sorted(full):
        seeds.extend((k, p) for p in range(int(table.sizes[k])))
    seeds = list(dict.fromkeys(seeds))
    sn = np.array([s[0] for s in seeds], dtype=np.intp)
    sp = np.array([s[1] for s in seeds], dtype=np.intp)
    idx = table.propagate(sn, sp)
    uniq, first = np.unique(idx, axis=0, return_index=True)
    vals = table.values(uniq)
    family = []
    for row, s in zip(vals, first):
        k = int(sn[s])
        family.append(Selection(chi, row, (float(chi.nodes[k]), tuple(row[k]))))
    return _merge_close(family)


def _merge_close(family: list[Selection], tol: float = DEDUP_TOL) -> list[Selection]:
    kept: list[Selection] = []
    for s in family:
        if not any(np.all(np.abs(s.values - t.values) <= tol) for t in kept):
            kept.append(s)
    return kept


def refine_selection(F: SetValuedFunction, s: Selection, levels: int,
                     norm=Norm.EUCLIDEAN) -> list[Selection]:
    """Re-anchor the seed of ``s`` on ``levels`` successive dyadic refinements.

    The returned list starts with the selection on the original partition.
    """
    if levels < 1:
        raise UsageError("levels must be positive")
    if (len(s.nodes) - 1) * 2**levels + 1 > MAX_POINTS:
        raise UsageError(f"refinement would exceed {MAX_POINTS} partition points")
    out = [metric_selection_through(F, s.partition, s.seed, norm)]
    chi = s.partition
    for _ in range(levels):
        chi = chi.refine()
        out.append(metric_selection_through(F, chi, s.seed, norm))
    return out


def refinement_gaps(sequence: Sequence[Selection], norm=Norm.EUCLIDEAN) -> list[float]:
    """Sup-distance between consecutive refinement levels on the coarser nodes."""
    from .sets import vnorm

    gaps = []
    for coarse, fine in zip(sequence[:-1], sequence[1:]):
        gaps.append(float(vnorm(coarse.values - fine.at(coarse.nodes), norm).max()))
    return gaps


@dataclass
class InheritanceReport:
    """Worst excess of each inheritance inequality over a family (<= 0 means it holds)."""

    variation_excess: float
    sup_norm_excess: float
    family_size: int

    def holds(self, tol: float = 1e-9) -> bool:
        return self.variation_excess <= tol and self.sup_norm_excess <= tol


def inheritance_report(F: SetValuedFunction, chi: Partition, family: Sequence[Selection],
                       norm=Norm.EUCLIDEAN) -> InheritanceReport:
    vF = variation(F, chi, norm)
    sF = sup_norm(F, chi, norm)
    return InheritanceReport(
        variation_excess=max(variation(s, chi, norm) - vF for s in family),
        sup_norm_excess=max(sup_norm(s, chi, norm) - sF for s in family),
        family_size=len(family),
    )


def modulus_inheritance_excess(F: SetValuedFunction, chi: Partition, s: Selection,
                               xs: Sequence[float], deltas: Sequence[float],
                               norm=Norm.EUCLIDEAN, vF: StepFunction | None = None) -> float:
    """Largest excess of the modulus and quasi-modulus inheritance inequalities
    over the sampled points and window sizes."""
    vF = vF or variation_function(F, chi, norm)
    worst = -np.inf
    for x in xs:
        for d in deltas:
            worst = max(worst, local_modulus(s, x, d, chi, norm) - local_modulus(vF, x, 2 * d, chi))
            if x > chi.a:
                worst = max(worst, quasi_modulus_left(s, x, d, chi, norm)
                            - quasi_modulus_left(vF, x, 2 * d, chi))
            if x < chi.b:
                worst = max(worst, quasi_modulus_right(s, x, d, chi, norm)
                            - quasi_modulus_right(vF, x, d, chi))
    return float(worst)


def export_family(family: Sequence[Selection], directory, name: str = "selection") -> Path:
    """Write one CSV per selection (columns ``x, y_1..y_d``) and a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(family):
        fname = f"{name}_{i:04d}.csv"
        with (directory / fname).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x"] + [f"y_{c + 1}" for c in range(s.dim)])
            for x, y in zip(s.nodes, s.values):
                w.writerow([f"{x:.17g}"] + [f"{v:.17g}" for v in y])
        entries.append({"file": fname, "seed_x": s.seed[0], "seed_y": list(s.seed[1])})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"count": len(entries), "selections": entries}, indent=2))
    return manifest
