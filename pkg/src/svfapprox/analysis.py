"""Error bounds, jump-limit sets, integral moduli and convergence experiments."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import UsageError
from .integral import QuadratureRule, gauss_legendre
from .operators import Kernel, apply_family, diagnostics, sign_term
from .selections import Selection, selection_family
from .sets import CompactSet, Norm, as_norm, dedup_close, hausdorff, vnorm
from .svf import (Partition, StepFunction, is_set_valued, limit, local_modulus, quasi_modulus,
                  sup_norm, variation, variation_function)

DELTA_GRID_STEPS = 12


@dataclass
class PointwiseBound:
    """Components of a pointwise error bound at ``x`` for one ``delta``."""

    x: float
    delta: float
    modulus_term: float
    beta_term: float
    alpha_term: float
    sign_term: float = 0.0
    flavor: str = "continuity"
    observed_error: float = math.nan

    @property
    def total(self) -> float:
        return self.modulus_term + self.beta_term + self.alpha_term + self.sign_term

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass
class _KernelTerms:
    alpha: float
    M: float
    beta: float


def _kernel_terms(T: Kernel, x: float, delta: float) -> _KernelTerms:
    """alpha, M and beta from metadata when present, otherwise numerically."""
    diag = None
    if T.alpha is None or T.M is None or T.beta_bound is None:
        diag = diagnostics(T, x, delta)
    alpha = float(T.alpha(x)) if T.alpha is not None else diag.alpha_num
    M = float(T.M(x)) if T.M is not None else diag.mass_num
    # beta never exceeds the total absolute mass, which M bounds
    beta = min(float(T.beta_bound(x, delta)), M) if T.beta_bound is not None else diag.beta_num
    return _KernelTerms(alpha, M, beta)


def _sign_value(T: Kernel, x: float) -> float:
    """``|T(sign(. - x))(x)|``: metadata when it holds for all n, else the computed value."""
    if T.sign_bound is not None and T.sign_valid == "all":
        return float(T.sign_bound(x))
    return abs(sign_term(T, x))


def _check_delta(delta: float) -> float:
    if not delta > 0:
        raise UsageError("delta must be positive")
    return float(delta)


def bound_continuity(T: Kernel, F, x: float, delta: float, chi: Partition,
                     norm=Norm.EUCLIDEAN, vF: StepFunction | None = None,
                     supF: float | None = None) -> PointwiseBound:
    """Continuity-point bound for ``haus(T F(x), F(x))`` (or ``|T f(x) - f(x)|``).

    Set-valued ``F``: ``omega(v_F, x, 4 delta) M + ||F|| (2 beta + alpha)``.
    Single-valued ``f``: ``omega(f, x, 2 delta) M + 2 ||f|| beta + |f(x)| alpha``.
    """
    delta = _check_delta(delta)
    k = _kernel_terms(T, x, delta)
    sup = sup_norm(F, chi, norm) if supF is None else supF
    if is_set_valued(F):
        vF = vF or variation_function(F, chi, norm)
        return PointwiseBound(x, delta, local_modulus(vF, x, 4 * delta, chi) * k.M,
                              2 * sup * k.beta, sup * k.alpha, flavor="continuity")
    fx = float(vnorm(np.atleast_1d(F(x)), norm))
    return PointwiseBound(x, delta, local_modulus(F, x, 2 * delta, chi, norm) * k.M,
                          2 * sup * k.beta, fx * k.alpha, flavor="continuity")


def bound_jump(T: Kernel, F, x: float, delta: float, chi: Partition, norm=Norm.EUCLIDEAN,
               vF: StepFunction | None = None, supF: float | None = None,
               sign: float | None = None) -> PointwiseBound:
    """Jump-point bound for ``haus(T F(x), A_F(x))`` (or the scalar analogue).

    Set-valued ``F``: ``2 qmod(v_F, x, 2 delta) M + ||F|| (4 beta + alpha + |T sign(. - x)(x)|)``.
    Single-valued ``f``: the same with ``qmod(f, x, delta)``.
    """
    delta = _check_delta(delta)
    if not chi.a < x < chi.b:
        raise UsageError("the jump bound needs x strictly inside the interval")
    k = _kernel_terms(T, x, delta)
    sup = sup_norm(F, chi, norm) if supF is None else supF
    s = _sign_value(T, x) if sign is None else sign
    if is_set_valued(F):
        vF = vF or variation_function(F, chi, norm)
        mod = 2 * quasi_modulus(vF, x, 2 * delta, chi) * k.M
    else:
        mod = 2 * quasi_modulus(F, x, delta, chi, norm) * k.M
    return PointwiseBound(x, delta, mod, 4 * sup * k.beta, sup * k.alpha, sup * s, flavor="jump")


def delta_grid(a: float, b: float, steps: int = DELTA_GRID_STEPS) -> np.ndarray:
    return (b - a) * 2.0 ** -np.arange(1, steps + 1)


def optimal_bound(T: Kernel, F, x: float, chi: Partition, mode: str = "continuity",
                  norm=Norm.EUCLIDEAN, deltas=None, vF=None, supF=None) -> PointwiseBound:
    """The smallest bound over a delta grid (default ``2^-j (b - a)``, ``j = 1..12``)."""
    deltas = delta_grid(chi.a, chi.b) if deltas is None else deltas
    if mode == "continuity":
        cands = [bound_continuity(T, F, x, d, chi, norm, vF, supF) for d in deltas]
    elif mode == "jump":
        s = _sign_value(T, x)
        cands = [bound_jump(T, F, x, d, chi, norm, vF, supF, s) for d in deltas]
    else:
        raise UsageError(f"unknown mode {mode!r}")
    return min(cands, key=lambda b: b.total)


def a_f_set(F, x: float, chi: Partition, seeds_per_fiber: int = 1, norm=Norm.EUCLIDEAN,
            family: Sequence[StepFunction] | None = None) -> CompactSet:
    """``{(s(x-) + s(x+)) / 2}`` over a selection family, deduplicated."""
    if not chi.a < x < chi.b:
        raise UsageError("A_F(x) needs x strictly inside the interval")
    if family is None:
        family = selection_family(F, chi, seeds_per_fiber, norm, anchors=(x,))
    mids = [(s.left_limit(x) + s.right_limit(x)) / 2.0 for s in family]
    return dedup_close(np.array(mids), 1e-12)


def integral_modulus(f, delta: float, order: int = 1, samples: int = 32,
                     a: float | None = None, b: float | None = None,
                     panels: int = 64, gauss_order: int = 8) -> float:
    """First or second order integral modulus, sampled at ``samples`` shifts ``h <= delta``.

    ``f`` is extended by its endpoint values outside ``[a, b]``. The
    integrand is split at every shifted jump of a step function.
    """
    delta = _check_delta(delta)
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    a = f.a if a is None else float(a)
    b = f.b if b is None else float(b)

    def g(t):
        t = np.clip(np.asarray(t, dtype=float), a, b)
        if hasattr(f, "at"):
            v = np.asarray(f.at(t), dtype=float)
        else:
            v = np.array([np.atleast_1d(f(s)) for s in t], dtype=float)
        return v.reshape(len(t), -1)

    jumps = f.breakpoints() if isinstance(f, StepFunction) else np.asarray(getattr(f, "jumps", ()))
    t_gl, w_gl = gauss_legendre(gauss_order)
    best = 0.0
    for h in delta * np.arange(1, samples + 1) / samples:
        shifts = [0.0, -h] if order == 1 else [0.0, -h, h]
        cuts = [np.linspace(a, b, panels + 1), [a + h, b - h, a - h, b + h]]
        cuts += [jumps + s for s in shifts]
        e = np.unique(np.clip(np.concatenate([np.ravel(c) for c in cuts]), a, b))
        hs = np.diff(e)
        xs = (e[:-1, None] + hs[:, None] * t_gl[None, :]).reshape(-1)
        w = (hs[:, None] * w_gl[None, :]).reshape(-1)
        if order == 1:
            diff = g(xs + h) - g(xs)
        else:
            diff = g(xs + h) - 2 * g(xs) + g(xs - h)
        best = max(best, float(w @ np.linalg.norm(diff, axis=1)))
    return best


def _l1_abs(g: Callable, a: float, b: float, grid: int = 2048, order: int = 10) -> float:
    """``int_a^b |g|`` for a smooth ``g``, splitting at its sign changes."""
    xs = np.linspace(a, b, grid + 1)
    gv = np.array([g(x) for x in xs])
    cuts = [a, b, *xs[gv == 0]]
    for i in np.flatnonzero(np.sign(gv[:-1]) * np.sign(gv[1:]) < 0):
        cuts.append(brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
    cuts.extend(xs[1:-1:max(1, grid // 64)])
    e = np.unique(cuts)
    t, w = gauss_legendre(order)
    total = 0.0
    for lo, hi in zip(e[:-1], e[1:]):
        pts = lo + (hi - lo) * t
        total += (hi - lo) * float(w @ np.abs([g(p) for p in pts]))
    return total


def lambda_n(T: Kernel, rule: QuadratureRule | None = None, method: str = "auto") -> float:
    """``(max_{i=0,1} ||T e_i - e_i||_{L1})^(1/2)``.

    ``method="metadata"`` integrates the analytic moment formulas,
    ``"quadrature"`` computes ``T e_i`` numerically at every abscissa.
    """
    from .operators import moment

    if method == "auto":
        method = "metadata" if 0 in T.moments and 1 in T.moments else "quadrature"
    if method == "metadata":
        if 0 not in T.moments or 1 not in T.moments:
            raise UsageError("kernel has no moment metadata")
        gs = [lambda x, i=i: T.moments[i](x) - x**i for i in (0, 1)]
        grid = 512
    elif method == "quadrature":
        gs = [lambda x, i=i: moment(T, i, x, rule) - x**i for i in (0, 1)]
        grid = 64
    else:
        raise UsageError(f"unknown method {method!r}")
    return math.sqrt(max(_l1_abs(g, T.a, T.b, grid=grid) for g in gs))


def _operator_on_family(T: Kernel, family: Sequence[StepFunction], xs: np.ndarray) -> np.ndarray:
    """``T s(x)`` for all ``s`` and all ``x`` in ``xs``, shape ``(S, len(xs), d)``.

    Uses ``T s = s_0 A(x, b) + sum_jumps (s_i - s_{i-1}) (A(x, b) - A(x, x_i))``.
    """
    nodes = family[0].nodes
    vals = np.stack([s.values for s in family])
    change = np.flatnonzero(np.any(np.abs(np.diff(vals[:, :-1], axis=1)) > 0, axis=(0, 2))) + 1
    jumps = nodes[change]
    dv = vals[:, change] - vals[:, change - 1]
    out = np.empty((len(family), len(xs), vals.shape[2]))
    for i, x in enumerate(xs):
        A = T.antiderivative(x, np.concatenate([[T.a, T.b], jumps]))
        total = A[1] - A[0]
        out[:, i] = vals[:, 0] * total + np.einsum("j,sjd->sd", total - (A[2:] - A[0]), dv)
    return out


def l1_hausdorff_selection_sets(T: Kernel, F, chi: Partition, seeds_per_fiber: int = 1,
                                rule: QuadratureRule | None = None, norm=Norm.EUCLIDEAN,
                                family: Sequence[StepFunction] | None = None,
                                lam: float | None = None) -> tuple[float, float]:
    """L1-Hausdorff distance between ``{s}`` and ``{T s}`` over a selection family.

    Returns ``(observed, bound_shape)`` with
    ``bound_shape = (lambda_n^2 (b - a) + 2 lambda_n) V(F, chi)``, reported
    without the unspecified constant.
    """
    if T.antiderivative is None:
        raise UsageError("the L1 distance needs a kernel antiderivative")
    probe = np.linspace(T.a, T.b, 17)
    mass = np.array([T.antiderivative(x, np.array([T.a, T.b])) for x in probe])
    if np.max(np.abs(mass[:, 1] - mass[:, 0] - 1.0)) > 1e-8:
        raise UsageError("kernel does not reproduce constants (T e_0 != e_0)")
    rule = rule or QuadratureRule(panels=256)
    if family is None:
        family = selection_family(F, chi, seeds_per_fiber, norm)
    bps = np.unique(np.concatenate([s.breakpoints() for s in family]))
    xs, w = T.rule_for(rule).nodes_weights(T.a, T.b, bps)
    Ts = _operator_on_family(T, family, xs)
    S = np.stack([s.at(xs) for s in family])
    D = np.einsum("q,ijq->ij", w, vnorm(S[:, None] - Ts[None, :], norm))
    observed = max(float(D.min(axis=1).max()), float(D.min(axis=0).max()))
    lam = lambda_n(T, rule) if lam is None else lam
    shape = (lam**2 * (T.b - T.a) + 2 * lam) * variation(F, chi, norm)
    return observed, shape


@dataclass
class ConvergenceRow:
    n: int
    x: float
    observed: float
    bound: float
    delta_star: float


@dataclass
class ConvergenceTable:
    """Observed errors and bounds over ``n`` at fixed points ``x``."""

    rows: list[ConvergenceRow]
    slopes: dict
    metadata: dict = field(default_factory=dict)

    def slope(self, x: float | None = None) -> float:
        if x is None:
            if len(self.slopes) != 1:
                raise UsageError("several x values; pass x")
            return next(iter(self.slopes.values()))
        return self.slopes[float(x)]

    def column(self, name: str, x: float | None = None) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows if x is None or r.x == x])

    def violations(self, tol: float = 1e-8) -> list[ConvergenceRow]:
        return [r for r in self.rows if r.observed > r.bound + tol]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "x", "observed", "bound", "delta_star", "slope"])
            for r in self.rows:
                w.writerow([r.n, f"{r.x:.17g}", f"{r.observed:.17g}", f"{r.bound:.17g}",
                            f"{r.delta_star:.17g}", f"{self.slopes[r.x]:.17g}"])
        return path

    def to_dict(self) -> dict:
        return {"metadata": self.metadata,
                "slopes": {f"{x:.17g}": s for x, s in self.slopes.items()},
                "rows": [asdict(r) for r in self.rows]}

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, allow_nan=True))
        return path


def loglog_slope(ns, errs) -> float:
    """Least-squares slope of ``log err`` against ``log n``; nan with fewer than 2 positive errors."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = errs > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(ns[ok]), np.log(errs[ok]), 1)[0])


def _delta_candidates(rule, n: int, a: float, b: float, fixed: float | None):
    if rule == "fixed":
        if fixed is None:
            raise UsageError("delta_rule 'fixed' needs a delta value")
        return [float(fixed)]
    if rule == "power":
        return [(b - a) * n ** (-1.0 / 3.0)]
    if rule == "optimize":
        return list(delta_grid(a, b))
    raise UsageError(f"unknown delta rule {rule!r}; use fixed, power or optimize")


def convergence_experiment(kernels: Callable[[int], Kernel], F, x_list: Sequence[float],
                           n_list: Sequence[int], chi: Partition, seeds: int = 1,
                           mode: str = "continuity", delta_rule: str = "optimize",
                           delta: float | None = None, norm=Norm.EUCLIDEAN,
                           jobs: int = 1, family: Sequence[Selection] | None = None
                           ) -> ConvergenceTable:
    """Observed error and bound for every ``(n, x)``.

    The target is ``F(x)`` in continuity mode and ``A_F(x)`` in jump mode.
    """
    x_list = [float(x) for x in x_list]
    n_list = [int(n) for n in n_list]
    if not x_list or not n_list:
        raise UsageError("x_list and n_list must be nonempty")
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise UsageError("n_list must be strictly increasing")
    if mode not in ("continuity", "jump"):
        raise UsageError(f"unknown mode {mode!r}")
    _delta_candidates(delta_rule, n_list[0], chi.a, chi.b, delta)
    norm = as_norm(norm)
    if family is None:
        family = selection_family(F, chi, seeds, norm, anchors=x_list)
    vF = variation_function(F, chi, norm)
    supF = sup_norm(F, chi, norm)
    if mode == "continuity":
        targets = {x: F(x) for x in x_list}
    else:
        targets = {x: a_f_set(F, x, chi, norm=norm, family=family) for x in x_list}

    def row(nx):
        n, x = nx
        T = kernels(n)
        TF = dedup_close(apply_family(T, family, x), 1e-12)
        observed = hausdorff(TF, targets[x], norm)
        deltas = _delta_candidates(delta_rule, n, chi.a, chi.b, delta)
        b = optimal_bound(T, F, x, chi, mode, norm, deltas, vF, supF)
        return ConvergenceRow(n, x, observed, b.total, b.delta)

    pairs = [(n, x) for n in n_list for x in x_list]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(row, pairs))
    else:
        rows = [row(p) for p in pairs]
    slopes = {x: loglog_slope([r.n for r in rows if r.x == x], [r.observed for r in rows if r.x == x])
              for x in x_list}
    meta = {"kernel": kernels(n_list[0]).name, "svf": getattr(F, "name", ""),
            "chi_size": len(chi), "seeds": seeds, "norm": norm.value, "mode": mode,
            "delta_rule": delta_rule, "family_size": len(family)}
    return ConvergenceTable(rows, slopes, meta)
