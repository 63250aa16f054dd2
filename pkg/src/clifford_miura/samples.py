"""Manufactured inputs: random polynomial fields, trigonometric fields and symbolic potentials."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np
import sympy

from .algebra import CliffordAlgebra
from .grid import CliffordField, GridSpec

_ALLOWED = {name: getattr(sympy, name) for name in ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh", "sqrt", "pi", "E")}


def random_polynomial_field(
    grid: GridSpec, alg: CliffordAlgebra, rng: np.random.Generator, degree: int = 2, complex_coeffs: bool = False
) -> CliffordField:
    """Every component is a random polynomial of total degree <= ``degree``."""
    coords = grid.mesh()
    monomials = [np.ones(grid.counts)]
    for d in range(1, degree + 1):
        for idx in combinations_with_replacement(range(grid.n), d):
            monomials.append(np.prod([coords[i] for i in idx], axis=0))
    coeffs = rng.normal(size=(alg.dim, len(monomials)))
    if complex_coeffs:
        coeffs = coeffs + 1j * rng.normal(size=coeffs.shape)
    data = np.tensordot(coeffs, np.stack(monomials), axes=(1, 0))
    return CliffordField(grid, alg, data.astype(complex))


def trig_field(grid: GridSpec, alg: CliffordAlgebra) -> CliffordField:
    """A smooth field with every component a distinct product of sines and cosines."""
    coords = grid.mesh()
    data = np.zeros((alg.dim, *grid.counts), dtype=complex)
    for i in range(alg.dim):
        val = np.ones(grid.counts)
        for j, x in enumerate(coords):
            k = 1 + (i + j) % 2
            val = val * (np.sin(k * x + 0.3 * i) if (i + j) % 2 else np.cos(k * x - 0.2 * j))
        data[i] = val
    return CliffordField(grid, alg, data)


@dataclass(frozen=True)
class ManufacturedPhi:
    """A symbolic ``phi`` with its Schrodinger potential and logarithmic gradient."""

    expr: sympy.Expr
    n: int
    phi: Callable
    potential: Callable
    log_gradient: tuple[Callable, ...]

    def fields(self, grid: GridSpec, alg: CliffordAlgebra) -> tuple[CliffordField, CliffordField, CliffordField]:
        """``(phi, v = -Lap(phi)/phi, a* = grad ln phi)`` sampled on ``grid``."""
        coords = grid.mesh()

        def val(fn):
            return np.broadcast_to(np.asarray(fn(*coords), dtype=float), grid.counts)

        phi = CliffordField.scalar(grid, alg, val(self.phi))
        v = CliffordField.scalar(grid, alg, val(self.potential))
        a = CliffordField.vector(grid, alg, [val(g) for g in self.log_gradient])
        return phi, v, a


def manufactured_phi(text: str, n: int) -> ManufacturedPhi:
    """Parse ``text`` in the variables ``x1..xn`` (e.g. ``"exp(0.1*x1*x2)"``)."""
    xs = sympy.symbols(" ".join(f"x{j + 1}" for j in range(n)))
    xs = (xs,) if n == 1 else tuple(xs)
    local = dict(_ALLOWED)
    local.update({str(x): x for x in xs})
    try:
        expr = sympy.sympify(text, locals=local)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse phi expression {text!r}: {exc}") from None
    extra = expr.free_symbols - set(xs)
    if extra:
        raise ValueError(f"phi expression uses unknown symbols {sorted(map(str, extra))}")
    lap = sum(sympy.diff(expr, x, 2) for x in xs)
    potential = -lap / expr
    grads = tuple(sympy.lambdify(xs, sympy.diff(expr, x) / expr, "numpy") for x in xs)
    return ManufacturedPhi(expr, n, sympy.lambdify(xs, expr, "numpy"), sympy.lambdify(xs, potential, "numpy"), grads)
