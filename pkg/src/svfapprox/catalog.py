"""Built-in set-valued functions on [0, 1] used by the CLI and the experiments."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import UsageError
from .svf import ClosedFormSVF, GridSVF, SetValuedFunction


def lipschitz_tube(m: int = 5) -> ClosedFormSVF:
    """``F(x)`` = m equally spaced points of ``[-1 - x^2, 1 + x^2]``."""
    if m < 2:
        raise UsageError("the tube needs at least two points per fiber")
    base = np.linspace(-1.0, 1.0, m)

    def tube(x):
        return base * (1.0 + x * x)

    return ClosedFormSVF(tube, 0.0, 1.0, name="lipschitz-tube")


def jump_pair() -> ClosedFormSVF:
    """``{0}`` left of 1/2 and ``{-1, 1}`` from 1/2 on."""

    def jump(x):
        return [0.0] if x < 0.5 else [-1.0, 1.0]

    return ClosedFormSVF(jump, 0.0, 1.0, name="jump-pair")


def annulus_slice(radii=(1.0, 2.0), angles: int = 8) -> ClosedFormSVF:
    """Planar, nonconvex fibers: points on two concentric arcs whose opening
    angle grows from pi/2 at x = 0 to 3 pi/2 at x = 1."""
    radii = np.asarray(radii, dtype=float)

    def annulus(x):
        theta = np.linspace(0.0, np.pi * (0.5 + x), angles)
        ring = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return (radii[:, None, None] * ring[None]).reshape(-1, 2)

    return ClosedFormSVF(annulus, 0.0, 1.0, name="annulus-slice")


def const_c(c: float = 1.5) -> ClosedFormSVF:
    """The constant SVF ``F(x) = {c}``."""

    def const(x):
        return [c]

    return ClosedFormSVF(const, 0.0, 1.0, name="const-c")


CATALOG = {
    "lipschitz-tube": lipschitz_tube,
    "jump-pair": jump_pair,
    "annulus-slice": annulus_slice,
    "const-c": const_c,
}


def load_svf(source: str) -> SetValuedFunction:
    """Resolve a catalog name or a path to a grid-backed SVF JSON file."""
    if source in CATALOG:
        return CATALOG[source]()
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            return GridSVF.from_file(path)
        except OSError as exc:
            raise UsageError(f"cannot read SVF file {source}: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"cannot parse SVF file {source}: {exc}") from None
    raise UsageError(f"unknown SVF {source!r}; catalog names are {sorted(CATALOG)}")
