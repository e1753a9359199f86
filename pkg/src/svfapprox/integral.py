"""Scalar quadrature, weighted metric Riemann sums and the weighted metric integral."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError
from .sets import CHAIN_CAP, CompactSet, Norm, dedup_close, metric_linear_combination
from .svf import Partition, SetValuedFunction, StepFunction

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    if order not in _GL_CACHE:
        t, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = ((t + 1.0) / 2.0, w / 2.0)
    return _GL_CACHE[order]


def _merge_edges(a: float, b: float, *groups) -> np.ndarray:
    pts = [np.array([a, b], dtype=float)]
    for g in groups:
        g = np.asarray(g, dtype=float).reshape(-1)
        pts.append(g[(g > a) & (g < b)])
    edges = np.unique(np.concatenate(pts))
    # drop slivers produced by floating point noise
    keep = np.concatenate([[True], np.diff(edges) > 1e-14 * max(1.0, b - a)])
    edges = edges[keep]
    edges[-1] = b
    return edges


@dataclass(frozen=True)
class QuadratureRule:
    """Composite quadrature on ``[a, b]`` with panels split at breakpoints.

    ``kind="gauss"`` uses ``order`` Gauss-Legendre points on each of ``panels``
    uniform panels (further split at breakpoints). ``kind="piecewise"`` takes
    the integrand to be constant between consecutive breakpoints and uses one
    midpoint per piece, which is exact for piecewise-linear integrands.
    """

    kind: str = "gauss"
    order: int = 8
    panels: int = 64

    def __post_init__(self):
        if self.kind not in ("gauss", "piecewise"):
            raise UsageError(f"unknown quadrature kind {self.kind!r}")
        if self.order < 1 or self.panels < 1:
            raise UsageError("order and panels must be positive")

    def edges(self, a: float, b: float, breakpoints=()) -> np.ndarray:
        if self.kind == "piecewise":
            return _merge_edges(a, b, breakpoints)
        return _merge_edges(a, b, np.linspace(a, b, self.panels + 1), breakpoints)

    def nodes_weights(self, a: float, b: float, breakpoints=()) -> tuple[np.ndarray, np.ndarray]:
        if not a < b:
            raise UsageError("need a < b")
        e = self.edges(a, b, breakpoints)
        h = np.diff(e)
        if self.kind == "piecewise":
            return e[:-1] + h / 2, h
        t, w = gauss_legendre(self.order)
        nodes = (e[:-1, None] + h[:, None] * t[None, :]).reshape(-1)
        weights = (h[:, None] * w[None, :]).reshape(-1)
        return nodes, weights


DEFAULT_RULE = QuadratureRule()


def _evaluate(f, ts: np.ndarray, vectorized: bool) -> np.ndarray:
    if hasattr(f, "at"):
        vals = np.asarray(f.at(ts), dtype=float)
    elif vectorized:
        vals = np.asarray(f(ts), dtype=float)
    else:
        vals = np.array([np.atleast_1d(np.asarray(f(t), dtype=float)) for t in ts])
    if vals.ndim == 1:
        vals = vals.reshape(-1, 1)
    if vals.shape[0] != ts.size or not np.all(np.isfinite(vals)):
        raise UsageError("integrand must be finite at the quadrature nodes")
    return vals


def integrate_vector(f, a: float = 0.0, b: float = 1.0, rule: QuadratureRule | None = None,
                     breakpoints=(), vectorized: bool = False) -> np.ndarray:
    """Componentwise integral of a vector-valued ``f`` over ``[a, b]``.

    Returns an array of shape ``(d,)``. Step functions contribute their jump
    locations to the panel split automatically.
    """
    rule = rule or DEFAULT_RULE
    if isinstance(f, StepFunction):
        breakpoints = np.concatenate([np.asarray(breakpoints, dtype=float).reshape(-1), f.nodes])
    nodes, weights = rule.nodes_weights(a, b, breakpoints)
    return weights @ _evaluate(f, nodes, vectorized)


@dataclass
class WeightFunction:
    """A real weight ``kappa`` on ``[a, b]``.

    ``antiderivative``, when given, is used for exact cell integrals.
    ``breakpoints`` lists points where ``kappa`` is not smooth.
    """

    fn: Callable
    a: float = 0.0
    b: float = 1.0
    continuous: bool = True
    bv: bool = True
    antiderivative: Callable | None = None
    breakpoints: Sequence[float] = field(default_factory=tuple)
    vectorized: bool = True

    @classmethod
    def constant(cls, c: float, a: float = 0.0, b: float = 1.0) -> "WeightFunction":
        return cls(lambda t: np.full(np.shape(t), float(c)), a, b,
                   antiderivative=lambda t: float(c) * (np.asarray(t, dtype=float) - a))

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.a, self.b)
        if self.vectorized:
            return np.asarray(self.fn(t), dtype=float)
        return np.vectorize(lambda s: float(self.fn(s)))(t)


def cell_weights(kappa: WeightFunction, edges, rule: QuadratureRule | None = None) -> np.ndarray:
    """``int_{e_i}^{e_{i+1}} kappa`` for consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    if kappa.antiderivative is not None:
        return np.diff(np.asarray(kappa.antiderivative(edges), dtype=float))
    rule = rule or DEFAULT_RULE
    fine = _merge_edges(edges[0], edges[-1], edges, kappa.breakpoints)
    t, w = gauss_legendre(rule.order)
    h = np.diff(fine)
    pts = fine[:-1, None] + h[:, None] * t[None, :]
    vals = kappa(pts.reshape(-1)).reshape(pts.shape)
    per = (vals * w[None, :]).sum(axis=1) * h
    starts = np.searchsorted(fine, edges[:-1])
    return np.add.reduceat(per, starts)


def weighted_metric_riemann_sum(F: SetValuedFunction, kappa: WeightFunction, chi: Partition,
                                cap: int = CHAIN_CAP, norm=Norm.EUCLIDEAN) -> CompactSet:
    """Metric combination of ``F(x_0), ..., F(x_{n-1})`` with weights ``(x_{i+1} - x_i) kappa(x_i)``."""
    x = chi.nodes
    lam = np.diff(x) * kappa(x[:-1])
    fibers = F.fibers(chi)[:-1]
    return metric_linear_combination(lam, fibers, cap, norm)


def selection_integrals(kappa: WeightFunction, family: Sequence[StepFunction],
                        rule: QuadratureRule | None = None) -> np.ndarray:
    """``int kappa s`` for each step function ``s`` of a family on a common partition."""
    if not family:
        raise UsageError("empty selection family")
    nodes = family[0].nodes
    w = cell_weights(kappa, nodes, rule)
    vals = np.stack([s.values[:-1] for s in family])
    return np.einsum("i,sid->sd", w, vals)


def weighted_metric_integral(F: SetValuedFunction, kappa: WeightFunction, chi: Partition,
                             seeds_per_fiber: int = 1, rule: QuadratureRule | None = None,
                             norm=Norm.EUCLIDEAN, family=None) -> CompactSet:
    """``{int kappa s : s a metric selection}`` over a finite selection family."""
    from .selections import selection_family

    if not kappa.bv:
        raise UsageError("the weight must be of bounded variation")
    if family is None:
        family = selection_family(F, chi, seeds_per_fiber, norm)
    return dedup_close(selection_integrals(kappa, family, rule), 1e-12)
