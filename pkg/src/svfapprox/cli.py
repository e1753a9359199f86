"""Command-line entry point: ``svfapprox {run,check,selections,diag}``.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 bound violation under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import SvfApproxError, UsageError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2, 3

DEFAULTS = {
    "operator": "kantorovich",
    "svf": "jump-pair",
    "n": "16,64,256,1024",
    "x": "0.5",
    "grid": 1024,
    "seeds": 1,
    "norm": "euclidean",
    "delta_rule": "optimize",
    "delta": None,
    "mode": "continuity",
    "out": "svfapprox-out",
    "jobs": 1,
    "strict": False,
    "suite": "fast",
}


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve(args) -> dict:
    """Merge defaults, the optional JSON config and explicit flags (flags win)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(k.replace("-", "_") for k in data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k.replace("-", "_"): v for k, v in data.items()})
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    return cfg


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    helps = {
        "operator": "kernel: bd or kantorovich (default kantorovich)",
        "svf": "catalog name (lipschitz-tube, jump-pair, annulus-slice, const-c) or JSON path "
               "(default jump-pair)",
        "n": "comma-separated increasing operator degrees (default 16,64,256,1024)",
        "x": "comma-separated evaluation points (default 0.5)",
        "grid": "number of uniform partition cells (default 1024)",
        "seeds": "seed points per seeded fiber (default 1)",
        "norm": "point norm: euclidean, max or sum (default euclidean)",
        "out": "output directory (default svfapprox-out)",
    }
    types = {"grid": int, "seeds": int}
    for name in names:
        p.add_argument(f"--{name}", type=types.get(name, str), default=None, help=helps[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svfapprox",
                                     description="Integral operators on set-valued functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="convergence experiment: CSV table and JSON report")
    _common(run, "operator", "svf", "n", "x", "grid", "seeds", "norm", "out")
    run.add_argument("--delta-rule", dest="delta_rule", default=None,
                     choices=["optimize", "power", "fixed"],
                     help="optimize over 2^-j (b-a), j=1..12; power uses n^(-1/3); "
                          "fixed needs --delta (default optimize)")
    run.add_argument("--delta", type=float, default=None, help="delta for --delta-rule fixed")
    run.add_argument("--mode", default=None, choices=["continuity", "jump"],
                     help="compare with F(x) or with A_F(x) (default continuity)")
    run.add_argument("--jobs", type=int, default=None, help="parallel rows (default 1)")
    run.add_argument("--strict", action="store_true", default=None,
                     help="exit 3 if any observed error exceeds its bound")
    run.add_argument("--config", default=None, help="JSON file with the same keys; flags win")

    check = sub.add_parser("check", help="run the acceptance suite")
    check.add_argument("--suite", choices=["fast", "full"], default=None,
                       help="fast trims grids, full uses the stated ones (default fast)")

    sel = sub.add_parser("selections", help="export a metric selection family")
    _common(sel, "svf", "grid", "seeds", "norm", "out")

    diag = sub.add_parser("diag", help="kernel diagnostics (alpha, beta, mass, sign term)")
    _common(diag, "operator", "n", "x", "out")
    diag.add_argument("--delta", type=float, default=None, help="window half-width (default 0.1)")
    return parser


def cmd_run(cfg: dict, out=print) -> int:
    from .analysis import convergence_experiment
    from .catalog import load_svf
    from .operators import kernel_family
    from .sets import as_norm
    from .svf import Partition

    kernels = kernel_family(cfg["operator"])
    F = load_svf(cfg["svf"])
    ns = _int_list(cfg["n"])
    xs = _float_list(cfg["x"])
    if int(cfg["grid"]) < 1:
        raise UsageError("--grid must be positive")
    chi = Partition.uniform(F.a, F.b, int(cfg["grid"]))
    table = convergence_experiment(kernels, F, xs, ns, chi, seeds=int(cfg["seeds"]),
                                   mode=cfg["mode"], delta_rule=cfg["delta_rule"],
                                   delta=cfg["delta"], norm=as_norm(cfg["norm"]),
                                   jobs=int(cfg["jobs"]))
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    table.to_csv(outdir / "table.csv")
    report = table.to_dict()
    report["config"] = {k: cfg[k] for k in sorted(cfg) if k != "suite"}
    (outdir / "report.json").write_text(json.dumps(report, indent=2))
    out(f"{len(table.rows)} rows written to {outdir / 'table.csv'}")
    for x, s in table.slopes.items():
        out(f"x={x:g}: fitted log-log slope {s:.4f}")
    bad = table.violations()
    if bad:
        out(f"{len(bad)} rows where the observed error exceeds the bound")
        if cfg["strict"]:
            return EXIT_VIOLATION
    return EXIT_OK


def cmd_check(cfg: dict, out=print) -> int:
    from .acceptance import run_suite

    results = run_suite(cfg["suite"], echo=out)
    failed = [r for r in results if not r.passed]
    out(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_selections(cfg: dict, out=print) -> int:
    from .catalog import load_svf
    from .selections import export_family, inheritance_report, selection_family
    from .sets import as_norm
    from .svf import Partition

    F = load_svf(cfg["svf"])
    norm = as_norm(cfg["norm"])
    chi = Partition.uniform(F.a, F.b, int(cfg["grid"]))
    fam = selection_family(F, chi, int(cfg["seeds"]), norm)
    manifest = export_family(fam, cfg["out"])
    rep = inheritance_report(F, chi, fam, norm)
    out(f"{len(fam)} selections written, manifest {manifest}")
    out(f"V(s) <= V(F): {'ok' if rep.variation_excess <= 1e-9 else 'VIOLATED'} "
        f"(worst excess {rep.variation_excess:.3g})")
    out(f"||s|| <= ||F||: {'ok' if rep.sup_norm_excess <= 1e-9 else 'VIOLATED'} "
        f"(worst excess {rep.sup_norm_excess:.3g})")
    return EXIT_OK if rep.holds() else EXIT_FAIL


def cmd_diag(cfg: dict, out=print) -> int:
    from .operators import diagnostics, kernel_family

    make = kernel_family(cfg["operator"])
    delta = 0.1 if cfg["delta"] is None else float(cfg["delta"])
    rows = [diagnostics(make(n), x, delta).as_dict()
            for n in _int_list(cfg["n"]) for x in _float_list(cfg["x"])]
    outdir = Path(cfg["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "diagnostics.csv"
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: f"{v:.17g}" if isinstance(v, float) else v for k, v in r.items()})
    for r in rows:
        out(f"n={r['n']} x={r['x']:g}: alpha {r['alpha_num']:.2e} beta {r['beta_num']:.4g} "
            f"mass {r['mass_num']:.12g} sign {r['sign_num']:.4g}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "selections": cmd_selections, "diag": cmd_diag}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except SvfApproxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
