"""Set-valued functions on an interval, variation, and pointwise moduli.

Everything that the theory phrases as a supremum over a continuum is computed
over an explicit :class:`Partition` supplied by the caller, plus a handful of
window endpoints. Accuracy is therefore controlled through the partition.

The same routines accept three kinds of functions:

* set-valued functions (values are :class:`~svfapprox.sets.CompactSet`,
  distances are Hausdorff distances),
* single-valued functions ``[a, b] -> R^d`` such as :class:`Function` and
  :class:`StepFunction` (values are 1-d arrays, distances are norms).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError
from .sets import CompactSet, Norm, as_set, from_nested, hausdorff, vnorm

#: Refinement stops when the variation changes by less than this.
TOL_VAR = 1e-6
#: Hard ceiling on the number of partition points used by any refinement loop.
MAX_POINTS = 2**20


class Partition:
    """Strictly increasing nodes ``a = x_0 < ... < x_n = b``."""

    def __init__(self, nodes):
        x = np.asarray(nodes, dtype=float).reshape(-1)
        if x.size < 2:
            raise UsageError("a partition needs at least two nodes")
        if not np.all(np.isfinite(x)) or np.any(np.diff(x) <= 0):
            raise UsageError("partition nodes must be finite and strictly increasing")
        x.setflags(write=False)
        self.nodes = x

    @classmethod
    def uniform(cls, a: float, b: float, cells: int) -> "Partition":
        if cells < 1:
            raise UsageError("a partition needs at least one cell")
        return cls(np.linspace(a, b, int(cells) + 1))

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def cells(self) -> int:
        return self.nodes.size - 1

    @property
    def norm(self) -> float:
        """Largest gap between consecutive nodes."""
        return float(np.max(np.diff(self.nodes)))

    def __len__(self) -> int:
        return self.nodes.size

    def __repr__(self) -> str:
        return f"Partition([{self.a:g}, {self.b:g}], cells={self.cells})"

    def refine(self) -> "Partition":
        """Insert every midpoint."""
        x = self.nodes
        out = np.empty(2 * x.size - 1)
        out[0::2] = x
        out[1::2] = 0.5 * (x[:-1] + x[1:])
        return Partition(out)

    def locate(self, x):
        """Index ``i`` of the piece ``[x_i, x_{i+1})`` holding ``x``; ``n`` at ``b``.

        Points left of ``a`` map to 0 and points right of ``b`` to ``n``,
        matching constant extension outside the interval.
        """
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.nodes.size - 1)

    def index_of(self, x: float, tol: float = 0.0) -> int | None:
        """Index of the node equal to ``x`` (within ``tol``), else None."""
        i = int(np.argmin(np.abs(self.nodes - x)))
        return i if abs(self.nodes[i] - x) <= tol else None

    def within(self, lo: float, hi: float, *, left_open=False, right_open=False) -> np.ndarray:
        x = self.nodes
        m = (x > lo) if left_open else (x >= lo)
        m &= (x < hi) if right_open else (x <= hi)
        return x[m]


def h_lim(chi: Partition) -> float:
    """Offset used to approximate one-sided limits of closed-form functions."""
    return min(chi.norm / 2, 1e-6 * (chi.b - chi.a))


class Function:
    """A single-valued function on ``[a, b]`` with values in R^d.

    ``fn`` maps a float to a float or a coordinate sequence. Outside ``[a, b]``
    the function is extended by its endpoint values.
    """

    def __init__(self, fn: Callable, a: float = 0.0, b: float = 1.0, name: str = ""):
        if not a < b:
            raise UsageError("need a < b")
        self.fn = fn
        self.a = float(a)
        self.b = float(b)
        self.name = name or getattr(fn, "__name__", "f")

    def __call__(self, x: float) -> np.ndarray:
        x = min(max(float(x), self.a), self.b)
        return np.atleast_1d(np.asarray(self.fn(x), dtype=float))

    def at(self, xs) -> np.ndarray:
        return np.array([self(x) for x in np.asarray(xs, dtype=float).reshape(-1)])

    def __repr__(self) -> str:
        return f"Function({self.name}, [{self.a:g}, {self.b:g}])"


class StepFunction:
    """Right-continuous step function on a partition.

    Takes ``values[i]`` on ``[x_i, x_{i+1})`` and ``values[n]`` at ``x_n``.
    One-sided limits are exact.
    """

    def __init__(self, partition: Partition, values):
        if not isinstance(partition, Partition):
            partition = Partition(partition)
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.shape[0] != len(partition):
            raise UsageError(f"{v.shape[0]} values for {len(partition)} nodes")
        v.setflags(write=False)
        self.partition = partition
        self.values = v

    @property
    def a(self) -> float:
        return self.partition.a

    @property
    def b(self) -> float:
        return self.partition.b

    @property
    def nodes(self) -> np.ndarray:
        return self.partition.nodes

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, x: float) -> np.ndarray:
        return self.values[int(self.partition.locate(x))]

    def at(self, xs) -> np.ndarray:
        return self.values[self.partition.locate(np.asarray(xs, dtype=float))]

    def left_limit(self, x: float) -> np.ndarray:
        if x <= self.a:
            return self.values[0]
        if x > self.b:
            return self.values[-1]
        i = int(self.partition.locate(x))
        return self.values[i - 1] if self.nodes[i] == x else self.values[i]

    def right_limit(self, x: float) -> np.ndarray:
        if x >= self.b:
            return self.values[-1]
        return self.values[int(self.partition.locate(x))]

    def breakpoints(self) -> np.ndarray:
        """Interior nodes where the value actually changes."""
        jump = np.any(self.values[1:-1] != self.values[:-2], axis=1)
        return self.nodes[1:-1][jump]


class SetValuedFunction:
    """Base class: ``x -> CompactSet`` on ``[a, b]``, extended by constants."""

    kind = "abstract"
    a: float
    b: float
    name: str = ""

    def __call__(self, x: float) -> CompactSet:  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return self(self.a).dim

    def fibers(self, chi: Partition) -> list[CompactSet]:
        return [self(x) for x in chi.nodes]


class ClosedFormSVF(SetValuedFunction):
    """SVF given by a formula ``fn(x)`` returning anything convertible to a set."""

    kind = "closed-form"

    def __init__(self, fn: Callable, a: float = 0.0, b: float = 1.0, name: str = ""):
        if not a < b:
            raise UsageError("need a < b")
        self.fn = fn
        self.a = float(a)
        self.b = float(b)
        self.name = name or getattr(fn, "__name__", "F")

    def __call__(self, x: float) -> CompactSet:
        x = min(max(float(x), self.a), self.b)
        return as_set(self.fn(x))

    def fibers(self, chi: Partition) -> list[CompactSet]:
        # one-entry cache: experiments evaluate the same partition many times
        key = (chi.nodes.size, chi.nodes.tobytes())
        cached = getattr(self, "_fiber_cache", None)
        if cached is None or cached[0] != key:
            cached = (key, [self(x) for x in chi.nodes])
            self._fiber_cache = cached
        return list(cached[1])

    def __repr__(self) -> str:
        return f"ClosedFormSVF({self.name}, [{self.a:g}, {self.b:g}])"


class GridSVF(SetValuedFunction):
    """Piecewise-constant SVF: ``F(x) = F_i`` on ``[x_i, x_{i+1})``, ``F(b) = F_N``."""

    kind = "grid-backed"

    def __init__(self, grid, sets: Sequence, name: str = "grid"):
        self.partition = grid if isinstance(grid, Partition) else Partition(grid)
        self.sets = [as_set(s) for s in sets]
        if len(self.sets) != len(self.partition):
            raise UsageError(f"{len(self.sets)} sets for {len(self.partition)} grid points")
        if len({s.dim for s in self.sets}) != 1:
            raise UsageError("all fibers must have the same dimension")
        self.a = self.partition.a
        self.b = self.partition.b
        self.name = name

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    def __call__(self, x: float) -> CompactSet:
        return self.sets[int(self.partition.locate(x))]

    def fibers(self, chi: Partition) -> list[CompactSet]:
        idx = self.partition.locate(chi.nodes)
        return [self.sets[i] for i in idx]

    def left_limit(self, x: float) -> CompactSet:
        if x <= self.a:
            return self.sets[0]
        if x > self.b:
            return self.sets[-1]
        i = int(self.partition.locate(x))
        return self.sets[i - 1] if self.partition.nodes[i] == x else self.sets[i]

    def right_limit(self, x: float) -> CompactSet:
        if x >= self.b:
            return self.sets[-1]
        return self.sets[int(self.partition.locate(x))]

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "grid": self.partition.nodes.tolist(),
                "sets": [s.to_list() for s in self.sets]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, name: str = "grid") -> "GridSVF":
        try:
            grid = data["grid"]
            sets = [from_nested(s) for s in data["sets"]]
            a, b = float(data["a"]), float(data["b"])
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed grid-backed SVF: {exc}") from None
        svf = cls(grid, sets, name=name)
        if svf.a != a or svf.b != b:
            raise UsageError("grid endpoints must equal the declared domain [a, b]")
        return svf

    @classmethod
    def from_file(cls, path) -> "GridSVF":
        path = Path(path)
        with path.open() as fh:
            return cls.from_dict(json.load(fh), name=path.stem)

    def __repr__(self) -> str:
        return f"GridSVF({self.name}, {len(self.sets)} fibers)"


def is_set_valued(f) -> bool:
    return isinstance(f, SetValuedFunction)


def rho(u, v, norm=Norm.EUCLIDEAN) -> float:
    """Distance between two values: Hausdorff for sets, norm of difference otherwise."""
    if isinstance(u, CompactSet):
        return hausdorff(u, v, norm)
    return float(vnorm(np.asarray(u, dtype=float) - np.asarray(v, dtype=float), norm))


def magnitude(u, norm=Norm.EUCLIDEAN) -> float:
    if isinstance(u, CompactSet):
        return u.magnitude(norm)
    return float(vnorm(np.atleast_1d(u), norm))


def values_at(f, xs) -> list:
    """Evaluate ``f`` at every point of ``xs``."""
    if hasattr(f, "at"):
        return list(f.at(xs))
    return [f(x) for x in xs]


def _max_spread(vals, norm) -> float:
    """Largest pairwise distance in a list of values."""
    if not vals:
        return 0.0
    if isinstance(vals[0], CompactSet):
        best = 0.0
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                if vals[i] is not vals[j]:
                    best = max(best, hausdorff(vals[i], vals[j], norm))
        return best
    arr = np.asarray(vals, dtype=float).reshape(len(vals), -1)
    if arr.shape[1] == 1:
        return float(arr.max() - arr.min())
    arr = np.unique(arr, axis=0)
    best = 0.0
    for start in range(0, len(arr), 512):
        block = arr[start:start + 512]
        best = max(best, float(vnorm(block[:, None, :] - arr[None, :, :], norm).max()))
    return best


def limit(f, x: float, side: str, chi: Partition):
    """One-sided limit ``f(x-)`` (side ``"left"``) or ``f(x+)`` (side ``"right"``).

    Exact for step functions and grid-backed SVFs; otherwise ``f`` is
    evaluated at ``x -+ h_lim(chi)``.
    """
    if side not in ("left", "right"):
        raise UsageError("side must be 'left' or 'right'")
    if side == "left" and hasattr(f, "left_limit"):
        return f.left_limit(x)
    if side == "right" and hasattr(f, "right_limit"):
        return f.right_limit(x)
    h = h_lim(chi)
    return f(x - h) if side == "left" else f(x + h)


def _increments(f, chi: Partition, norm) -> np.ndarray:
    if is_set_valued(f):
        fib = f.fibers(chi)
        return np.array([0.0 if A is B else hausdorff(A, B, norm)
                         for A, B in zip(fib[:-1], fib[1:])])
    vals = np.asarray(values_at(f, chi.nodes), dtype=float).reshape(len(chi), -1)
    return vnorm(np.diff(vals, axis=0), norm)


def variation(f, chi: Partition, norm=Norm.EUCLIDEAN) -> float:
    """``V(f, chi)``: sum of distances between values at consecutive nodes.

    A lower bound for the total variation that converges under refinement.
    """
    return float(math.fsum(_increments(f, chi, norm)))


def variation_function(f, chi: Partition, norm=Norm.EUCLIDEAN) -> StepFunction:
    """Table ``x_i -> V(f, chi restricted to [a, x_i])`` as a step function."""
    inc = _increments(f, chi, norm)
    return StepFunction(chi, np.concatenate([[0.0], np.cumsum(inc)]))


def total_variation(f, a: float | None = None, b: float | None = None, norm=Norm.EUCLIDEAN,
                    start_cells: int = 64, tol: float = TOL_VAR,
                    max_points: int = MAX_POINTS) -> tuple[float, Partition]:
    """Refine a uniform partition until the variation settles.

    Returns the last variation and the partition it was computed on.
    """
    a = f.a if a is None else a
    b = f.b if b is None else b
    chi = Partition.uniform(a, b, start_cells)
    v = variation(f, chi, norm)
    while 2 * len(chi) - 1 <= max_points:
        finer = chi.refine()
        v_new = variation(f, finer, norm)
        chi, done = finer, abs(v_new - v) < tol
        v = v_new
        if done:
            break
    return v, chi


def _window_points(chi: Partition, lo: float, hi: float, extra=()) -> np.ndarray:
    pts = [chi.within(lo, hi), np.array([lo, hi], dtype=float), np.asarray(extra, dtype=float)]
    return np.unique(np.concatenate(pts))


def local_modulus(f, x_star: float, delta: float, chi: Partition, norm=Norm.EUCLIDEAN) -> float:
    """``omega(f, x*, delta)``: largest distance between values in the window
    ``[x* - delta/2, x* + delta/2]`` intersected with ``[a, b]``."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    lo = max(x_star - delta / 2, chi.a)
    hi = min(x_star + delta / 2, chi.b)
    pts = _window_points(chi, lo, hi, [x_star] if lo <= x_star <= hi else [])
    return _max_spread(values_at(f, pts), norm)


def quasi_modulus_left(f, x_star: float, delta: float, chi: Partition,
                       norm=Norm.EUCLIDEAN) -> float:
    """Left local quasi-modulus: sup of ``rho(f(x*-), f(x))`` for ``x`` in
    ``[x* - delta, x*)``."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    if not chi.a < x_star <= chi.b:
        raise UsageError("left quasi-modulus needs x* in (a, b]")
    lo = max(x_star - delta, chi.a)
    pts = _window_points(chi, lo, x_star)
    pts = pts[pts < x_star]
    ref = limit(f, x_star, "left", chi)
    return max((rho(ref, v, norm) for v in values_at(f, pts)), default=0.0)


def quasi_modulus_right(f, x_star: float, delta: float, chi: Partition,
                        norm=Norm.EUCLIDEAN) -> float:
    """Right local quasi-modulus: sup of ``rho(f(x*+), f(x))`` for ``x`` in
    ``(x*, x* + delta]``."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    if not chi.a <= x_star < chi.b:
        raise UsageError("right quasi-modulus needs x* in [a, b)")
    hi = min(x_star + delta, chi.b)
    pts = _window_points(chi, x_star, hi)
    pts = pts[pts > x_star]
    ref = limit(f, x_star, "right", chi)
    return max((rho(ref, v, norm) for v in values_at(f, pts)), default=0.0)


def quasi_modulus(f, x_star: float, delta: float, chi: Partition, norm=Norm.EUCLIDEAN) -> float:
    """Symmetric quasi-modulus, the larger of the two one-sided ones."""
    return max(quasi_modulus_left(f, x_star, delta, chi, norm),
               quasi_modulus_right(f, x_star, delta, chi, norm))


def sup_norm(f, chi: Partition, norm=Norm.EUCLIDEAN) -> float:
    """``max_i |f(x_i)|`` with ``|A| = haus(A, {0})`` for sets."""
    if is_set_valued(f):
        return max(A.magnitude(norm) for A in f.fibers(chi))
    vals = np.asarray(values_at(f, chi.nodes), dtype=float).reshape(len(chi), -1)
    return float(vnorm(vals, norm).max())


def lipschitz_probe(f, x: float, radii: Sequence[float], kind: str = "around",
                    samples: int = 33, norm=Norm.EUCLIDEAN, blowup: float = 10.0) -> float:
    """Estimate a local Lipschitz constant of ``f`` near ``x``.

    ``kind="around"`` compares all sampled pairs inside each window
    ``[x - r/2, x + r/2]``; ``kind="at"`` compares only against ``f(x)``.
    Returns ``math.inf`` ("unbounded") when the per-radius estimates keep
    growing as the windows shrink and end up ``blowup`` times larger than at
    the widest radius. Diagnostic only.
    """
    if len(radii) == 0:
        raise UsageError("need at least one probe radius")
    if kind not in ("around", "at"):
        raise UsageError("kind must be 'around' or 'at'")
    a, b = f.a, f.b
    if not a <= x <= b:
        raise UsageError("probe point outside the domain")
    estimates = []
    for r in sorted((float(r) for r in radii), reverse=True):
        if r <= 0:
            raise UsageError("radii must be positive")
        zs = np.linspace(max(x - r / 2, a), min(x + r / 2, b), samples)
        zs = np.unique(np.concatenate([zs, [x]]))
        vals = values_at(f, zs)
        best = 0.0
        if kind == "at":
            fx = vals[int(np.flatnonzero(zs == x)[0])]
            for z, v in zip(zs, vals):
                if z != x:
                    best = max(best, rho(v, fx, norm) / abs(z - x))
        else:
            for i in range(len(zs)):
                for j in range(i + 1, len(zs)):
                    best = max(best, rho(vals[i], vals[j], norm) / (zs[j] - zs[i]))
        estimates.append(best)
    growing = all(e2 > e1 for e1, e2 in zip(estimates, estimates[1:]))
    if len(estimates) > 1 and growing and estimates[-1] > blowup * max(estimates[0], 1e-300):
        return math.inf
    return max(estimates)


def integrated_window_variation(vf: StepFunction, delta: float, samples: int = 20001) -> float:
    """Trapezoid estimate of ``int_a^b V_{x-delta}^{x+delta}(f) dx`` from the
    variation table ``vf`` (constant extension outside ``[a, b]``)."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    xs = np.linspace(vf.a, vf.b, samples)
    up = vf.at(np.minimum(xs + delta, vf.b))[:, 0]
    down = vf.at(np.maximum(xs - delta, vf.a))[:, 0]
    return float(np.trapezoid(up - down, xs))
