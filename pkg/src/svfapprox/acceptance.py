"""Acceptance suite: one function per criterion, each returning a :class:`CriterionResult`.

Kernel factories are injectable so a deliberately broken kernel can be fed
through the same checks as a negative control.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sets as S
from .analysis import (a_f_set, convergence_experiment, l1_hausdorff_selection_sets, lambda_n,
                       loglog_slope)
from .catalog import jump_pair, lipschitz_tube
from .operators import bernstein_basis, bernstein_durrmeyer, diagnostics, kantorovich, moment, sign_term
from .selections import inheritance_report, modulus_inheritance_excess, selection_family
from .svf import GridSVF, Partition, variation_function

DEFAULT_KERNELS = {"bd": bernstein_durrmeyer, "kantorovich": kantorovich}


def env_seed(default: int = 0) -> int:
    """Seed for randomized checks, overridable through ``SVFAPPROX_SEED``."""
    try:
        return int(os.environ.get("SVFAPPROX_SEED", default))
    except ValueError:
        return default


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.2f} s)"


@dataclass
class SuiteConfig:
    """Sizes for one suite run. ``full`` uses the stated grids; ``fast`` trims them."""

    name: str = "full"
    sign_n_max: int = 10000
    tube_cells: int = 2**14
    jump_cells: int = 2**10
    random_svfs: int = 100
    set_instances: int = 500
    tube_n: tuple = tuple(2**k for k in range(2, 13))
    l1_n: tuple = tuple(2**k for k in range(4, 13))
    jump_n: tuple = (16, 64, 256, 1024, 4096)
    seed: int = field(default_factory=env_seed)

    @classmethod
    def fast(cls) -> "SuiteConfig":
        return cls(name="fast", sign_n_max=1600, tube_cells=2**12, random_svfs=30,
                   set_instances=150, tube_n=tuple(2**k for k in range(2, 13, 2)),
                   l1_n=(16, 64, 256, 1024, 4096))


def _grid11() -> np.ndarray:
    return np.linspace(0.0, 1.0, 11)


def c1_moments(kernels, cfg) -> tuple[bool, str]:
    worst = 0.0
    for name, make in kernels.items():
        for n in (1, 2, 5, 10, 50, 200):
            T = make(n)
            for x in _grid11():
                for i in (0, 1, 2):
                    worst = max(worst, abs(moment(T, i, x) - T.moments[i](x)))
    return worst <= 1e-9, f"max moment error {worst:.2e} (tol 1e-9)"


def c2_mass(kernels, cfg) -> tuple[bool, str]:
    worst_mass = worst_alpha = 0.0
    for make in kernels.values():
        for n in (1, 2, 5, 10, 50, 200):
            T = make(n)
            for x in _grid11():
                d = diagnostics(T, x, 0.1, method="quadrature")
                worst_mass = max(worst_mass, abs(d.mass_num - 1.0))
                worst_alpha = max(worst_alpha, d.alpha_num, abs(T.alpha(x)))
    ok = worst_mass <= 1e-10 and worst_alpha <= 1e-10
    return ok, f"max |mass - 1| {worst_mass:.2e}, max alpha {worst_alpha:.2e} (tol 1e-10)"


def c3_beta(kernels, cfg) -> tuple[bool, str]:
    bad = []
    worst = -math.inf
    for name, make in kernels.items():
        for n in (10, 100, 1000):
            T = make(n)
            for x in _grid11():
                for delta in (0.05, 0.1, 0.2):
                    d = diagnostics(T, x, delta)
                    excess = d.beta_num - T.beta_bound(x, delta)
                    worst = max(worst, excess)
                    if excess > 0:
                        bad.append((name, n, x, delta))
    return not bad, f"{len(bad)} violations, worst beta - bound {worst:.3e}"


def _sign_ns(start: int, stop: int) -> list[int]:
    ns = []
    n = start
    while n <= stop:
        ns.append(n)
        n *= 2
    if ns[-1] != stop:
        ns.append(stop)
    return ns


def c4_sign(kernels, cfg) -> tuple[bool, str]:
    bad = []
    worst = 0.0
    plans = {"bd": (_sign_ns(100, cfg.sign_n_max), np.linspace(0.1, 0.9, 17)),
             "kantorovich": (_sign_ns(10, cfg.sign_n_max), np.linspace(0.05, 0.95, 19))}
    for name, make in kernels.items():
        ns, xs = plans.get(name, plans["kantorovich"])
        for n in ns:
            T = make(n)
            for x in xs:
                ratio = abs(sign_term(T, x)) / T.sign_bound(x)
                worst = max(worst, ratio)
                if ratio > 1.0:
                    bad.append((name, n, x))
    return not bad, f"{len(bad)} violations, worst |sign term| / bound {worst:.3f}"


def c5_basis(kernels, cfg) -> tuple[bool, str]:
    guo = zp = 0.0
    xs = np.linspace(0.01, 0.99, 99)
    for n in (5, 10, 20, 50, 100, 200, 500):
        k = np.arange(n + 1)
        P = bernstein_basis(n, k[None, :], xs[:, None])
        scale = np.sqrt(n * xs * (1 - xs))
        guo = max(guo, float(np.max(P.max(axis=1) * scale / 2.5)))
        upper = np.where(k[None, :] > n * xs[:, None], P, 0.0).sum(axis=1)
        zp = max(zp, float(np.max(np.abs(upper - 0.5) * scale)))
    ok = guo <= 1.0 and zp <= 1.0
    return ok, f"worst ratio to bound: Guo {guo:.3f}, partial sum {zp:.3f}"


def random_grid_svf(rng: np.random.Generator) -> GridSVF:
    """Random grid-backed SVF with at most 64 fibers of at most 6 points in R^1 or R^2."""
    d = int(rng.integers(1, 3))
    m = int(rng.integers(2, 65))
    grid = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 1.0, m - 2)), [1.0]]) if m > 2 \
        else np.array([0.0, 1.0])
    grid = np.unique(grid)
    sets = []
    prev = None
    for _ in range(len(grid)):
        if prev is not None and rng.random() < 0.3:
            sets.append(prev)
            continue
        k = int(rng.integers(1, 7))
        pts = np.round(rng.normal(size=(k, d)), 3)
        sets.append(pts.tolist())
        prev = sets[-1]
    return GridSVF(grid, sets, name="random")


def c6_inheritance(kernels, cfg) -> tuple[bool, str]:
    rng = np.random.default_rng(cfg.seed)
    worst_v = worst_s = worst_m = -math.inf
    members = 0
    for _ in range(cfg.random_svfs):
        F = random_grid_svf(rng)
        chi = F.partition
        fam = selection_family(F, chi, seeds_per_fiber=6)
        members += len(fam)
        rep = inheritance_report(F, chi, fam)
        worst_v = max(worst_v, rep.variation_excess)
        worst_s = max(worst_s, rep.sup_norm_excess)
        vF = variation_function(F, chi)
        xs = np.concatenate([rng.choice(chi.nodes, 3), rng.uniform(0, 1, 2)])
        for s in fam[:8]:
            worst_m = max(worst_m, modulus_inheritance_excess(F, chi, s, xs, (0.05, 0.2, 0.5), vF=vF))
    ok = max(worst_v, worst_s, worst_m) <= 1e-9
    return ok, (f"{cfg.random_svfs} SVFs, {members} selections; worst excess V {worst_v:.1e}, "
                f"sup {worst_s:.1e}, moduli {worst_m:.1e}")


class _Tables:
    """Experiment tables shared by criteria 7, 8 and 9."""

    def __init__(self, kernels, cfg):
        self.kernels = kernels
        self.cfg = cfg
        self._jump = None
        self._tube = None

    def jump(self):
        if self._jump is None:
            F = jump_pair()
            chi = Partition.uniform(0, 1, self.cfg.jump_cells)
            fam = selection_family(F, chi, 1, anchors=(0.5,))
            self._jump = (a_f_set(F, 0.5, chi, family=fam), {
                name: convergence_experiment(make, F, [0.5], self.cfg.jump_n, chi, mode="jump",
                                             family=fam)
                for name, make in self.kernels.items()})
        return self._jump

    def tube(self):
        if self._tube is None:
            F = lipschitz_tube()
            chi = Partition.uniform(0, 1, self.cfg.tube_cells)
            fam = selection_family(F, chi, 5, anchors=(0.25, 0.5))
            self._tube = {name: convergence_experiment(make, F, [0.25, 0.5], self.cfg.tube_n, chi,
                                                       mode="continuity", family=fam)
                          for name, make in self.kernels.items()}
        return self._tube


def c7_jump(kernels, cfg, tables) -> tuple[bool, str]:
    A, tabs = tables.jump()
    ok = S.hausdorff(A, S.CompactSet([-0.5, 0.5])) <= 1e-12
    parts = [f"A_F(0.5) = {A.to_list()}"]
    for name, tab in tabs.items():
        obs = tab.column("observed")
        # tolerance absorbs round-off: both kernels are symmetric at 0.5
        mono = bool(np.all(np.diff(obs) <= 1e-10))
        ok = ok and obs[-1] <= 0.1 and mono
        parts.append(f"{name}: final {obs[-1]:.1e}, non-increasing={mono}")
    return ok, "; ".join(parts)


def c8_tube(kernels, cfg, tables) -> tuple[bool, str]:
    ok = True
    parts = []
    for name, tab in tables.tube().items():
        for x, s in tab.slopes.items():
            ok = ok and s <= -0.4
            parts.append(f"{name}@{x:g}: {s:.3f}")
    return ok, "slopes " + ", ".join(parts) + " (need <= -0.4)"


def c9_dominance(kernels, cfg, tables) -> tuple[bool, str]:
    rows = bad = 0
    margin = math.inf
    for tab in list(tables.jump()[1].values()) + list(tables.tube().values()):
        rows += len(tab.rows)
        bad += len(tab.violations(1e-8))
        margin = min(margin, min(r.bound - r.observed for r in tab.rows))
    return bad == 0, f"{rows} rows, {bad} violations, smallest bound - observed {margin:.2e}"


def c10_lambda(kernels, cfg) -> tuple[bool, str]:
    exact = {"bd": lambda n: math.sqrt(1 / (2 * (n + 2))),
             "kantorovich": lambda n: math.sqrt(1 / (4 * (n + 1)))}
    worst = 0.0
    for name, make in kernels.items():
        if name not in exact:
            continue
        for n in (1, 10, 100, 1000):
            worst = max(worst, abs(lambda_n(make(n)) - exact[name](n)))
    return worst <= 1e-10, f"max |lambda_n - closed form| {worst:.2e} (tol 1e-10)"


def c11_l1(kernels, cfg) -> tuple[bool, str]:
    F = jump_pair()
    chi = Partition.uniform(0, 1, cfg.jump_cells)
    fam = selection_family(F, chi, 1)
    ok = True
    parts = []
    for name, make in kernels.items():
        obs, shape = np.array([l1_hausdorff_selection_sets(make(n), F, chi, family=fam)
                               for n in cfg.l1_n]).T
        ratio = obs / shape
        C = float(ratio.max())
        spread = float(ratio.max() / ratio.min())
        slope = loglog_slope(cfg.l1_n, obs)
        good = bool(np.all(obs <= C * shape * (1 + 1e-12))) and spread <= 2.0 \
            and abs(slope + 0.5) <= 0.15
        ok = ok and good
        parts.append(f"{name}: C={C:.3f}, ratio spread {spread:.3f}, slope {slope:.3f}")
    return ok, "; ".join(parts)


def _random_set(rng, d) -> S.CompactSet:
    return S.CompactSet(np.round(rng.normal(size=(int(rng.integers(1, 6)), d)), 2))


def c12_sets(kernels, cfg) -> tuple[bool, str]:
    rng = np.random.default_rng(cfg.seed + 12)
    fails = 0
    for _ in range(cfg.set_instances):
        d = int(rng.integers(1, 4))
        norm = S.Norm(rng.choice([n.value for n in S.Norm]))
        A, B, C = (_random_set(rng, d) for _ in range(3))
        hab = S.hausdorff(A, B, norm)
        checks = [
            S.hausdorff(A, A, norm) == 0.0,
            abs(hab - S.hausdorff(B, A, norm)) <= 1e-12,
            hab <= S.hausdorff(A, C, norm) + S.hausdorff(C, B, norm) + 1e-12,
            (hab > 0) == (A != B),
        ]
        pairs = S.metric_pairs(A, B, norm)
        pair_max = max(float(S.vnorm(np.subtract(a, b), norm)) for a, b in pairs)
        checks.append(abs(pair_max - hab) <= 1e-12)
        lam = rng.uniform(-1, 1, 3)
        met = S.metric_linear_combination(lam, [A, B, C], norm=norm)
        mink = S.minkowski_linear_combination(lam, [A, B, C])
        checks.append(all(S.dist_point_set(p, mink) <= 1e-12 for p in met.points))
        fails += not all(checks)
    return fails == 0, f"{cfg.set_instances} instances, {fails} failures"


CRITERIA = [
    (1, "moment identities", c1_moments, False),
    (2, "kernel mass and alpha", c2_mass, False),
    (3, "beta bounds", c3_beta, False),
    (4, "sign-term bounds", c4_sign, False),
    (5, "basis bounds", c5_basis, False),
    (6, "selection inheritance", c6_inheritance, False),
    (7, "jump-point limit", c7_jump, True),
    (8, "continuity-point rate", c8_tube, True),
    (9, "bound dominance", c9_dominance, True),
    (10, "lambda_n", c10_lambda, False),
    (11, "global L1 bound", c11_l1, False),
    (12, "set-algebra properties", c12_sets, False),
]

#: wall-clock limits stated for individual criteria
TIME_LIMITS = {1: 5.0, 12: 10.0}


def run_criterion(number: int, kernels: dict | None = None, cfg: SuiteConfig | None = None,
                  tables: _Tables | None = None) -> CriterionResult:
    kernels = kernels or DEFAULT_KERNELS
    cfg = cfg or SuiteConfig()
    num, name, fn, needs_tables = next(c for c in CRITERIA if c[0] == number)
    t0 = time.perf_counter()
    if needs_tables:
        ok, detail = fn(kernels, cfg, tables or _Tables(kernels, cfg))
    else:
        ok, detail = fn(kernels, cfg)
    dt = time.perf_counter() - t0
    if num in TIME_LIMITS and dt > TIME_LIMITS[num]:
        ok = False
        detail += f"; exceeded {TIME_LIMITS[num]:g} s"
    return CriterionResult(num, name, bool(ok), detail, dt)


def run_suite(suite: str = "fast", kernels: dict | None = None,
              only=None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    """Run all (or ``only`` the listed) criteria and return their results."""
    kernels = kernels or DEFAULT_KERNELS
    cfg = SuiteConfig.fast() if suite == "fast" else SuiteConfig()
    tables = _Tables(kernels, cfg)
    results = []
    for num, *_ in CRITERIA:
        if only is not None and num not in only:
            continue
        r = run_criterion(num, kernels, cfg, tables)
        if echo:
            echo(r.line())
        results.append(r)
    return results
