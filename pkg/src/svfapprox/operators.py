"""Kernel integral operators and the Bernstein-Durrmeyer and Kantorovich kernels.

An operator is ``T f(x) = int_a^b K(x, t) f(t) dt``. Each :class:`Kernel`
carries an evaluator, an exact antiderivative ``A(x, v) = int_a^v K(x, t) dt``
in ``v`` and optional analytic metadata. Step functions (in particular metric
selections) are integrated exactly through the antiderivative, so convergence
tables carry no quadrature noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .errors import UsageError
from .integral import DEFAULT_RULE, QuadratureRule, integrate_vector
from .sets import CompactSet, Norm, dedup_close
from .svf import Partition, SetValuedFunction, StepFunction

# half width of the binomial window: P(|X - nx| > r) < 2 exp(-44) by Hoeffding
_HOEFFDING = 22.0


@lru_cache(maxsize=64)
def _log_binom(n: int) -> np.ndarray:
    k = np.arange(n + 1)
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _log_basis(n: int, k, x):
    k = np.asarray(k)
    x = np.asarray(x, dtype=float)
    return _log_binom(n)[k] + special.xlogy(k, x) + special.xlog1py(n - k, -x)


def bernstein_basis(n: int, k, x):
    """``C(n, k) x^k (1 - x)^(n - k)``, evaluated through log-gamma."""
    if n < 0:
        raise UsageError("n must be non-negative")
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr > n):
        raise UsageError(f"k must lie in [0, {n}]")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > 1):
        raise UsageError("x must lie in [0, 1]")
    out = np.exp(_log_basis(n, k_arr, x_arr))
    return float(out) if out.ndim == 0 else out


def basis_vector(n: int, x: float) -> np.ndarray:
    """All ``p_{n,k}(x)``, ``k = 0..n``."""
    return np.exp(_log_basis(n, np.arange(n + 1), min(max(float(x), 0.0), 1.0)))


def _window(n: int, x: float, pad: int = 2) -> tuple[int, int]:
    r = math.sqrt(_HOEFFDING * n) + pad
    return max(0, int(math.floor(n * x - r))), min(n, int(math.ceil(n * x + r)))


def basis_window(n: int, x: float) -> tuple[int, np.ndarray]:
    """``(k0, p)`` with ``p[i] = p_{n,k0+i}(x)`` covering all non-negligible terms."""
    lo, hi = _window(n, x)
    return lo, np.exp(_log_basis(n, np.arange(lo, hi + 1), min(max(float(x), 0.0), 1.0)))


@dataclass(frozen=True)
class Kernel:
    """A kernel ``K(x, t)`` on ``[a, b]^2`` together with optional analytic metadata.

    ``evaluate(x, t)`` and ``antiderivative(x, v)`` are vectorized in their
    second argument. ``sign_valid`` is ``"all"`` when ``sign_bound`` holds for
    every ``n`` and ``"large-n"`` when it is only asymptotic.
    """

    n: int
    name: str
    evaluate: Callable
    a: float = 0.0
    b: float = 1.0
    breakpoints: Callable = field(default=lambda x: np.empty(0))
    antiderivative: Optional[Callable] = None
    alpha: Optional[Callable] = None
    M: Optional[Callable] = None
    beta_bound: Optional[Callable] = None
    sign_bound: Optional[Callable] = None
    sign_valid: str = "all"
    moments: dict = field(default_factory=dict)
    second_central: Optional[Callable] = None
    positive: bool = True
    panel_hint: int = 64

    def __repr__(self) -> str:
        return f"Kernel({self.name}, n={self.n})"

    def __call__(self, x: float, t):
        return self.evaluate(x, t)

    def rule_for(self, rule: QuadratureRule | None) -> QuadratureRule:
        rule = rule or DEFAULT_RULE
        if rule.kind == "gauss" and rule.panels < self.panel_hint:
            return QuadratureRule(rule.kind, rule.order, self.panel_hint)
        return rule


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise UsageError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _check_x(x, a=0.0, b=1.0) -> float:
    x = float(x)
    if not a <= x <= b:
        raise UsageError(f"x = {x} outside [{a}, {b}]")
    return x


def bernstein_durrmeyer(n: int) -> Kernel:
    """``K(x, t) = (n + 1) sum_k p_{n,k}(x) p_{n,k}(t)`` on ``[0, 1]``."""
    n = _check_n(n)
    lb1 = _log_binom(n + 1)

    def evaluate(x, t):
        k0, px = basis_window(n, _check_x(x))
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        ks = np.arange(k0, k0 + len(px))
        pt = np.exp(_log_basis(n, ks[None, :], t.reshape(-1, 1)))
        return ((n + 1) * (pt @ px)).reshape(t.shape)

    def antiderivative(x, v):
        # P(Y >= X + 1) with X ~ Bin(n, x), Y ~ Bin(n + 1, v)
        k0, px = basis_window(n, _check_x(x))
        cdf = np.cumsum(px)
        j = np.arange(k0 + 1, k0 + len(px) + 1)
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        flat = v.reshape(-1)
        # Y/(n+1) is sub-Gaussian around v, so far from the window A is 0 or 1
        w = (len(px) + 2) / n + math.sqrt(_HOEFFDING / (n + 3))
        lo_v, hi_v = k0 / (n + 1) - w, (k0 + len(px)) / (n + 1) + w
        out = np.where(flat > hi_v, cdf[-1], 0.0)
        mid = np.flatnonzero((flat >= lo_v) & (flat <= hi_v))
        if mid.size:
            vm = flat[mid, None]
            py = np.exp(lb1[j][None, :] + special.xlogy(j, vm) + special.xlog1py(n + 1 - j, -vm))
            out[mid] = py @ cdf + stats.binom.sf(j[-1], n + 1, vm[:, 0])
        return out.reshape(v.shape)

    def second_central(x):
        return 2.0 * ((n - 3) * x * (1 - x) + 1) / ((n + 2) * (n + 3))

    return Kernel(
        n=n, name="bd", evaluate=evaluate, antiderivative=antiderivative,
        alpha=lambda x: 0.0, M=lambda x: 1.0,
        beta_bound=lambda x, d: 1.0 / (2 * n * d * d),
        sign_bound=lambda x: 13.0 / (2.0 * math.sqrt(n * x * (1 - x))) if 0 < x < 1 else math.inf,
        sign_valid="large-n",
        moments={
            0: lambda x: 1.0,
            1: lambda x: (n * x + 1) / (n + 2),
            2: lambda x: (n * (n - 1) * x * x + 4 * n * x + 2) / ((n + 2) * (n + 3)),
        },
        second_central=second_central,
        panel_hint=max(64, 8 * int(math.ceil(math.sqrt(n)))),
    )


def kantorovich(n: int) -> Kernel:
    """``K(x, t) = (n + 1) sum_k p_{n,k}(x) 1[t in [k/(n+1), (k+1)/(n+1)]]`` on ``[0, 1]``."""
    n = _check_n(n)
    edges = np.arange(n + 2) / (n + 1)

    def evaluate(x, t):
        p = basis_vector(n, _check_x(x))
        t = np.asarray(t, dtype=float)
        k = np.clip(np.floor(t * (n + 1)).astype(int), 0, n)
        return (n + 1) * p[k]

    def antiderivative(x, v):
        p = basis_vector(n, _check_x(x))
        cdf = np.concatenate([[0.0], np.cumsum(p)])
        m = np.clip(np.asarray(v, dtype=float), 0.0, 1.0) * (n + 1)
        k = np.clip(np.floor(m).astype(int), 0, n)
        return cdf[k] + p[k] * (m - k)

    def breakpoints(x):
        return edges

    def second_central(x):
        return (3 * (n - 1) * x * (1 - x) + 1) / (3.0 * (n + 1) ** 2)

    return Kernel(
        n=n, name="kantorovich", evaluate=evaluate, antiderivative=antiderivative,
        breakpoints=breakpoints,
        alpha=lambda x: 0.0, M=lambda x: 1.0,
        beta_bound=lambda x, d: 1.0 / (4 * n * d * d),
        sign_bound=lambda x: 12.0 / math.sqrt(n * x * (1 - x)) if 0 < x < 1 else math.inf,
        sign_valid="all",
        moments={
            0: lambda x: 1.0,
            1: lambda x: (2 * n * x + 1) / (2.0 * (n + 1)),
            2: lambda x: (3 * n * (n - 1) * x * x + 6 * n * x + 1) / (3.0 * (n + 1) ** 2),
        },
        second_central=second_central,
    )


KERNELS = {"bd": bernstein_durrmeyer, "kantorovich": kantorovich}


def kernel_family(name: str) -> Callable[[int], Kernel]:
    try:
        return KERNELS[name]
    except KeyError:
        raise UsageError(f"unknown operator {name!r}; choose from {sorted(KERNELS)}") from None


def cell_masses(T: Kernel, x: float, edges, rule: QuadratureRule | None = None) -> np.ndarray:
    """``int_{e_i}^{e_{i+1}} K(x, t) dt`` for consecutive edges."""
    edges = np.asarray(edges, dtype=float)
    if T.antiderivative is not None:
        return np.diff(T.antiderivative(x, edges))
    rule = T.rule_for(rule)
    out = np.empty(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        nodes, w = QuadratureRule(rule.kind, rule.order, 1).nodes_weights(lo, hi, T.breakpoints(x))
        out[i] = w @ T.evaluate(x, nodes)
    return out


def _step_edges(T: Kernel, s: StepFunction) -> tuple[np.ndarray, np.ndarray]:
    edges = np.asarray(s.nodes, dtype=float)
    vals = s.values[:-1]
    if edges[0] > T.a:
        edges = np.concatenate([[T.a], edges])
        vals = np.concatenate([s.values[:1], vals])
    if edges[-1] < T.b:
        edges = np.concatenate([edges, [T.b]])
        vals = np.concatenate([vals, s.values[-1:]])
    return edges, vals


def apply_scalar(T: Kernel, f, x: float, rule: QuadratureRule | None = None) -> np.ndarray:
    """``int K(x, t) f(t) dt`` componentwise; returns shape ``(d,)``.

    Step functions are integrated exactly cell by cell; anything else goes
    through composite quadrature split at the kernel breakpoints.
    """
    x = _check_x(x, T.a, T.b)
    if isinstance(f, StepFunction):
        edges, vals = _step_edges(T, f)
        return cell_masses(T, x, edges, rule) @ vals
    bps = np.concatenate([np.asarray(T.breakpoints(x), dtype=float).reshape(-1), [x],
                          np.asarray(getattr(f, "jumps", ()), dtype=float).reshape(-1)])
    rule = T.rule_for(rule)
    nodes, w = rule.nodes_weights(T.a, T.b, bps)
    kv = T.evaluate(x, nodes)
    from .integral import _evaluate

    return (w * kv) @ _evaluate(f, nodes, vectorized=False)


def apply_family(T: Kernel, family, x: float, rule: QuadratureRule | None = None) -> np.ndarray:
    """``T s(x)`` for every step function of a family on a common partition, shape ``(S, d)``."""
    if not family:
        raise UsageError("empty selection family")
    edges, _ = _step_edges(T, family[0])
    m = cell_masses(T, _check_x(x, T.a, T.b), edges, rule)
    vals = np.stack([_step_edges(T, s)[1] for s in family])
    return np.einsum("i,sid->sd", m, vals)


def apply_svf(T: Kernel, F: SetValuedFunction, x: float, chi: Partition,
              seeds_per_fiber: int = 1, rule: QuadratureRule | None = None,
              norm=Norm.EUCLIDEAN, family=None) -> CompactSet:
    """``{T s(x) : s in selection family}``, deduplicated at 1e-12."""
    from .selections import selection_family

    if family is None:
        family = selection_family(F, chi, seeds_per_fiber, norm, anchors=(x,))
    return dedup_close(apply_family(T, family, x, rule), 1e-12)


def sign_term(T: Kernel, x: float) -> float:
    """``T(sign(. - x))(x)``."""
    x = _check_x(x, T.a, T.b)
    if T.antiderivative is not None:
        A = T.antiderivative(x, np.array([x, T.b]))
        return float(A[1] - 2.0 * A[0])
    return float(cell_masses(T, x, [T.a, x, T.b]) @ np.array([-1.0, 1.0]))


@dataclass
class KernelDiagnostics:
    """Numeric kernel quantities at one ``(x, delta)`` next to the analytic ones."""

    kernel: str
    n: int
    x: float
    delta: float
    alpha_num: float
    beta_num: float
    mass_num: float
    sign_num: float
    alpha_meta: float | None = None
    beta_bound: float | None = None
    sign_bound: float | None = None
    sign_valid: str = "all"

    def violations(self, tol: float = 1e-10) -> list[str]:
        """Names of metadata claims contradicted by the numbers."""
        out = []
        if self.alpha_meta is not None and abs(self.alpha_num - self.alpha_meta) > tol:
            out.append("alpha")
        if self.beta_bound is not None and self.beta_num > self.beta_bound + tol:
            out.append("beta")
        if self.sign_bound is not None and abs(self.sign_num) > self.sign_bound + tol:
            out.append("sign")
        return out

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def diagnostics(T: Kernel, x: float, delta: float, rule: QuadratureRule | None = None,
                method: str = "auto") -> KernelDiagnostics:
    """alpha, beta, mass and sign term at ``x``.

    ``method="quadrature"`` integrates the kernel with breakpoint-aware panels;
    ``"exact"`` uses the antiderivative (positive kernels only); ``"auto"``
    prefers the antiderivative when the kernel has one.
    """
    if delta <= 0:
        raise UsageError("delta must be positive")
    x = _check_x(x, T.a, T.b)
    if method == "auto":
        method = "exact" if T.antiderivative is not None and T.positive else "quadrature"
    lo, hi = max(T.a, x - delta), min(T.b, x + delta)
    if method == "exact":
        A = T.antiderivative(x, np.array([T.a, lo, x, hi, T.b]))
        total = float(A[4] - A[0])
        mass = total
        beta = float((A[1] - A[0]) + (A[4] - A[3]))
        sign = float((A[4] - A[2]) - (A[2] - A[0]))
    elif method == "quadrature":
        rule = T.rule_for(rule)
        bps = np.concatenate([np.asarray(T.breakpoints(x), dtype=float).reshape(-1), [lo, x, hi]])
        nodes, w = rule.nodes_weights(T.a, T.b, bps)
        kv = T.evaluate(x, nodes)
        total = float(w @ kv)
        mass = float(w @ np.abs(kv))
        far = np.abs(nodes - x) >= delta
        beta = float(w[far] @ np.abs(kv[far]))
        sign = float(w @ (kv * np.sign(nodes - x)))
    else:
        raise UsageError(f"unknown diagnostics method {method!r}")
    return KernelDiagnostics(
        kernel=T.name, n=T.n, x=x, delta=delta,
        alpha_num=abs(total - 1.0), beta_num=max(0.0, beta), mass_num=mass, sign_num=sign,
        alpha_meta=None if T.alpha is None else float(T.alpha(x)),
        beta_bound=None if T.beta_bound is None else float(T.beta_bound(x, delta)),
        sign_bound=None if T.sign_bound is None else float(T.sign_bound(x)),
        sign_valid=T.sign_valid,
    )


def moment(T: Kernel, i: int, x: float, rule: QuadratureRule | None = None) -> float:
    """``T e_i(x)`` by quadrature, with ``e_i(t) = t^i``."""
    x = _check_x(x, T.a, T.b)
    rule = T.rule_for(rule)
    nodes, w = rule.nodes_weights(T.a, T.b, np.asarray(T.breakpoints(x), dtype=float))
    return float(w @ (T.evaluate(x, nodes) * nodes**i))


def central_moment(T: Kernel, x: float, rule: QuadratureRule | None = None) -> float:
    """``T((. - x)^2)(x)`` by quadrature."""
    x = _check_x(x, T.a, T.b)
    rule = T.rule_for(rule)
    nodes, w = rule.nodes_weights(T.a, T.b, np.concatenate(
        [np.asarray(T.breakpoints(x), dtype=float).reshape(-1), [x]]))
    return float(w @ (T.evaluate(x, nodes) * (nodes - x) ** 2))
