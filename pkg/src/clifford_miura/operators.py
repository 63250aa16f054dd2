"""Finite-difference Dirac-type operators and the residuals of their factorization identities.

All first derivatives are central in the interior and one-sided second order
on the boundary; second derivatives use the 3-point stencil inside and a
4-point one-sided stencil on the boundary.  Every stencil is exact on
polynomials of total degree <= 2.

Space-time fields put time on the last grid axis.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .algebra import Multivector
from .grid import CliffordField, GridError, core_l2, left_multiply, partial

RESIDUAL_LAYERS = 2


def _generator(f: CliffordField, j: int) -> Multivector:
    return Multivector.basis(f.n, f"e{j}", f.algebra.witt)


def _spatial_axes(f: CliffordField, axes: Sequence[int] | None) -> list[int]:
    axes = list(range(f.grid.n)) if axes is None else list(axes)
    if len(axes) > f.n:
        raise GridError(f"{len(axes)} derivative axes but only {f.n} generators")
    return axes


def dirac_apply(f: CliffordField, axes: Sequence[int] | None = None) -> CliffordField:
    """``sum_j e_j d_j f`` (left multiplication by the generators)."""
    out = np.zeros_like(f.data)
    for j, ax in enumerate(_spatial_axes(f, axes)):
        d = f.with_data(partial(f.data, f.grid, ax))
        out += left_multiply(_generator(f, j + 1), d).data
    return f.with_data(out)


def second_partial(data: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second derivative along ``axis`` of an array (no component axis)."""
    a = np.moveaxis(data, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
    out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def laplacian_apply(f: CliffordField, axes: Sequence[int] | None = None) -> CliffordField:
    axes = list(range(f.grid.n)) if axes is None else list(axes)
    out = np.zeros_like(f.data)
    for ax in axes:
        out += second_partial(f.data, f.grid.h[ax], ax + 1)
    return f.with_data(out)


def cauchy_riemann_apply(f: CliffordField, conjugate: bool = False) -> CliffordField:
    """``d_0 f +- sum_j e_j d_j f`` with grid axis 0 playing x_0."""
    if f.grid.n - 1 > f.n:
        raise GridError("Cauchy-Riemann operator needs n generators on an (n+1)-axis grid")
    d0 = partial(f.data, f.grid, 0)
    dx = dirac_apply(f, axes=range(1, f.grid.n)).data
    return f.with_data(d0 - dx if conjugate else d0 + dx)


def _scalar_multiplier(k, f: CliffordField):
    if isinstance(k, CliffordField):
        f._check(k)
        if not k.is_grade(0):
            raise GridError("k must be scalar valued")
        return k.scalar_part
    return k


def disturbed_dirac_apply(
    f: CliffordField, k=None, a: CliffordField | None = None, axes: Sequence[int] | None = None
) -> CliffordField:
    """``D f + k f`` for a complex scalar (or scalar field) ``k``, or ``D f + f a``.

    Exactly one of ``k`` and ``a`` must be given.
    """
    if (k is None) == (a is None):
        raise ValueError("give exactly one of k (scalar shift) or a (right multiplier)")
    df = dirac_apply(f, axes)
    if k is not None:
        return df + f * _scalar_multiplier(k, f)
    f._check(a)
    return df + f * a


def parabolic_dirac_apply(f: CliffordField, sign: int = +1, variant: str = "schrodinger") -> CliffordField:
    """``D_x f + f d_t f +- c f+ f`` with ``c = i`` (schrodinger) or ``c = 1`` (heat)."""
    if not f.algebra.witt:
        raise GridError("parabolic Dirac operator needs a Witt-enabled field")
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if variant not in ("schrodinger", "heat"):
        raise ValueError(f"unknown variant {variant!r}")
    t_axis = f.grid.n - 1
    c = 1j if variant == "schrodinger" else 1.0
    wf = Multivector.basis(f.n, "f", True)
    wfp = Multivector.basis(f.n, "f+", True)
    out = dirac_apply(f, axes=range(t_axis))
    out = out + left_multiply(wf, f.with_data(partial(f.data, f.grid, t_axis)))
    return out + left_multiply(sign * c * wfp, f)


def _miura_sandwich(u: CliffordField, a: CliffordField, first) -> CliffordField:
    """``(X + M^a)(X - M^a) u`` for a first-order operator ``X``."""
    w = first(u) - u * a
    return first(w) + w * a


def factorization_residual(case: str, u: CliffordField, **params) -> float:
    """L2 norm over the two-layer interior of a factorization identity rearranged to zero.

    Cases and parameters:

    - ``laplace``: ``DDu + Lap u``
    - ``cauchy_riemann``: ``D Dbar u - Lap_{n+1} u`` (grid axis 0 is x_0)
    - ``helmholtz`` (``k``): ``(D+k)(D-k)u + Lap u + k^2 u``
    - ``miura`` (``a``, optional ``V``): ``(D+M^a)(D-M^a)u + Lap u + u V`` with
      ``V = Da + a^2`` when not supplied; exact for scalar ``u`` or constant ``a``
    - ``parabolic`` (``sign``, ``variant``): ``(D+-)^2 u + Lap u -+ c d_t u``
    - ``parabolic_miura`` (``a``, optional ``V``): ``(D- + M^a)(D- - M^a)u -
      (-i d_t - Lap)u + u V`` with ``V = D_x a + f d_t a + a^2`` by default
    """
    if case == "laplace":
        r = dirac_apply(dirac_apply(u)) + laplacian_apply(u)
    elif case == "cauchy_riemann":
        r = cauchy_riemann_apply(cauchy_riemann_apply(u, conjugate=True)) - laplacian_apply(u)
    elif case == "helmholtz":
        k = params["k"]
        r = disturbed_dirac_apply(disturbed_dirac_apply(u, k=-k), k=k) + laplacian_apply(u) + u * (k * k)
    elif case == "miura":
        a = params["a"]
        V = params.get("V")
        if V is None:
            V = dirac_apply(a) + a * a
        r = _miura_sandwich(u, a, dirac_apply) + laplacian_apply(u) + u * V
    elif case == "parabolic":
        sign = params.get("sign", +1)
        variant = params.get("variant", "schrodinger")
        c = 1j if variant == "schrodinger" else 1.0
        t_axis = u.grid.n - 1
        sq = parabolic_dirac_apply(parabolic_dirac_apply(u, sign, variant), sign, variant)
        dt = u.with_data(partial(u.data, u.grid, t_axis))
        r = sq + laplacian_apply(u, axes=range(t_axis)) - dt * (sign * c)
    elif case == "parabolic_miura":
        a = params["a"]
        t_axis = u.grid.n - 1
        V = params.get("V")
        if V is None:
            wf = Multivector.basis(a.n, "f", True)
            V = dirac_apply(a, axes=range(t_axis)) + left_multiply(wf, a.with_data(partial(a.data, a.grid, t_axis))) + a * a

        def dminus(g):
            return parabolic_dirac_apply(g, -1, "schrodinger")

        dt = u.with_data(partial(u.data, u.grid, t_axis))
        schrod = dt * (-1j) - laplacian_apply(u, axes=range(t_axis))
        r = _miura_sandwich(u, a, dminus) - schrod + u * V
    else:
        raise ValueError(f"unknown factorization case {case!r}")
    return core_l2(r, RESIDUAL_LAYERS)


def vector_field_sq(a: CliffordField) -> np.ndarray:
    """Nodewise ``|a|^2 = sum_j a_j^2`` of a real vector field."""
    comps = a.vector_components()
    return np.sum(comps.real**2, axis=0)

