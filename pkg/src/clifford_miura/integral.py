"""Cauchy kernel, Teodorescu transform, boundary Cauchy operator and closed-form
fundamental solutions of the Schrodinger-adapted operators.

Sign conventions: with e_j^2 = -1 the fundamental solution of ``D`` is
``e(x) = -x / (omega_n |x|^n)``.  The volume transform is ``Tf = e * f`` so that
``D T = I``, and the boundary operator is ``Ff(x) = int e(y - x) n(y) f(y)``
so that ``F f + T D f = f`` inside the box.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from pathlib import Path

import numpy as np

from .algebra import Multivector, algebra
from .grid import CliffordField, GridError, GridGeometry, GridSpec, build_grid, core_l2, embed_field
from .operators import dirac_apply
from .parallel import map_chunks

CORE_LAYERS = 3
SUBCELLS = 4
QUADRATURES = ("cell", "subcell")


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def cauchy_kernel(x, n: int | None = None) -> Multivector:
    """``e(x) = -x / (omega_n |x|^n)`` as a grade-1 multivector."""
    x = np.asarray(x, dtype=float)
    n = n or x.size
    if x.size != n:
        raise ValueError(f"point has {x.size} coordinates, expected {n}")
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise ValueError("Cauchy kernel is singular at x = 0")
    return Multivector.vector(-x / (sphere_area(n) * r**n))


def _kernel_components(diff: np.ndarray, n: int) -> np.ndarray:
    """Kernel components for difference vectors ``diff[..., n]``; zero where diff = 0."""
    r2 = np.sum(diff**2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r2 > 0, -1.0 / (sphere_area(n) * r2 ** (n / 2)), 0.0)
    return diff * scale[..., None]


def _corner_primitive(u, v, w=None):
    """Mixed antiderivative of ``u / |d|^n`` over a box corner (n = 2 or 3)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if w is None:
            r2 = u * u + v * v
            t1 = np.where(u == 0, 0.0, u * np.arctan(v / np.where(u == 0, 1.0, u)))
            t2 = np.where(v == 0, 0.0, 0.5 * v * np.log(np.where(r2 == 0, 1.0, r2)))
            return t1 + t2
        r = np.sqrt(u * u + v * v + w * w)
        t1 = np.where(v == 0, 0.0, v * np.log(np.where(v == 0, 1.0, w + r)))
        t2 = np.where(w == 0, 0.0, w * np.log(np.where(w == 0, 1.0, v + r)))
        t3 = np.where(u == 0, 0.0, u * np.arctan(v * w / np.where(u == 0, 1.0, u * r)))
        return -(t1 + t2 - t3)


def box_integral(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Exact ``int_box d / |d|^n dd`` for boxes ``[lo, hi]`` of shape ``(..., n)``, n in {2, 3}."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[-1]
    if n not in (2, 3):
        raise ValueError("closed-form box integrals exist here for n = 2, 3 only")
    out = np.zeros(lo.shape)
    for m in range(n):
        others = [a for a in range(n) if a != m]
        total = 0.0
        for corner in itertools.product((0, 1), repeat=n):
            sign = (-1) ** (n - sum(corner))
            c = [hi[..., a] if corner[a] else lo[..., a] for a in range(n)]
            total = total + sign * _corner_primitive(c[m], *[c[a] for a in others])
        out[..., m] = total
    return out


def _cell_boxes(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper corners of every node's clipped control cell, shape ``(N, n)``."""
    pts = spec.points()
    h = np.array(spec.h)
    lo = np.maximum(pts - h / 2, np.array(spec.origin))
    hi = np.minimum(pts + h / 2, np.array(spec.origin) + np.array(spec.extents))
    return lo, hi


class KernelCache:
    """Dense table ``K[m, i, j]``: the m-th component of ``e(x_i - y)`` integrated
    over the control cell of node ``j`` (the node's box, clipped to the domain).

    ``quadrature="cell"`` integrates every cell in closed form, i.e. the
    density is taken piecewise constant.  ``quadrature="subcell"`` uses the
    point value ``e(x_i - y_j) w_j`` for far cells, ``4^n`` midpoint subcells on
    the ``3^n - 1`` neighbouring cells, and zero on the self cell; with
    ``diagonal="analytic"`` a self cell clipped by the boundary is still
    integrated exactly, since the odd-kernel cancellation fails there.

    Full self cells contribute exactly zero under both rules.
    """

    def __init__(
        self,
        spec: GridSpec,
        table: np.ndarray | None = None,
        quadrature: str = "cell",
        diagonal: str = "analytic",
    ):
        if quadrature not in QUADRATURES:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        if diagonal not in ("analytic", "zero"):
            raise ValueError(f"unknown diagonal rule {diagonal!r}")
        if spec.n not in (2, 3):
            quadrature, diagonal = "subcell", "zero"
        self.spec = spec
        self.n = spec.n
        self.quadrature = quadrature
        self.diagonal = diagonal
        if table is None:
            table = self._build()
        if table.shape != (self.n, spec.size, spec.size):
            raise GridError(f"kernel table shape {table.shape} does not match grid")
        table.setflags(write=False)
        self.table = table

    def _build(self) -> np.ndarray:
        spec, n, N = self.spec, self.n, self.spec.size
        h = np.array(spec.h)
        counts = np.array(spec.counts)
        # translation-invariant values on all index offsets
        offs = np.stack(np.meshgrid(*[np.arange(-(c - 1), c) for c in counts], indexing="ij"), axis=-1) * h
        if self.quadrature == "cell":
            G = -box_integral(offs - h / 2, offs + h / 2) / sphere_area(n)
            w = np.ones(N)
        else:
            G = _kernel_components(offs, n)
            w = spec.weights().ravel()
        G = np.moveaxis(G, -1, 0).reshape(n, -1)
        idx = np.stack(np.unravel_index(np.arange(N), spec.counts), axis=1)
        table = np.empty((n, N, N))

        def fill(rows: slice):
            d = idx[rows, None, :] - idx[None, :, :] + (counts - 1)
            flat = np.ravel_multi_index(tuple(np.moveaxis(d, -1, 0)), tuple(2 * counts - 1))
            for m in range(n):
                table[m, rows] = G[m][flat] * w

        map_chunks(fill, N)
        table[:, np.arange(N), np.arange(N)] = 0.0
        if self.quadrature == "cell":
            self._clipped_columns(table)
        else:
            if self.diagonal == "analytic":
                self._clipped_self_cells(table)
            self._refine_neighbours(table, idx)
        return table

    def _clipped_columns(self, table: np.ndarray) -> None:
        """Exact integrals over the clipped cells of boundary sources, for all targets."""
        spec = self.spec
        pts = spec.points()
        lo, hi = _cell_boxes(spec)
        src = np.flatnonzero(~spec.core_mask(1).ravel())

        def work(rows: slice):
            x = pts[rows][:, None, :]
            vals = -box_integral(x - hi[src][None], x - lo[src][None]) / sphere_area(self.n)
            for m in range(self.n):
                table[m][rows][:, src] = vals[..., m]

        map_chunks(work, spec.size)

    def _clipped_self_cells(self, table: np.ndarray) -> None:
        spec = self.spec
        pts = spec.points()
        lo, hi = _cell_boxes(spec)
        clipped = np.flatnonzero(~spec.core_mask(1).ravel())
        x = pts[clipped]
        vals = -box_integral(x - hi[clipped], x - lo[clipped]) / sphere_area(self.n)
        table[:, clipped, clipped] = vals.T

    def _refine_neighbours(self, table: np.ndarray, idx: np.ndarray) -> None:
        spec, n = self.spec, self.n
        pts = spec.points()
        lo, hi = _cell_boxes(spec)
        frac = (np.arange(SUBCELLS) + 0.5) / SUBCELLS
        sub = np.stack(np.meshgrid(*([frac] * n), indexing="ij"), axis=-1).reshape(-1, n)
        counts = np.array(spec.counts)
        for off in itertools.product((-1, 0, 1), repeat=n):
            if not any(off):
                continue
            src = idx + np.array(off)
            ok = np.all((src >= 0) & (src < counts), axis=1)
            tgt = np.flatnonzero(ok)
            srcf = np.ravel_multi_index(tuple(src[ok].T), spec.counts)
            size = hi[srcf] - lo[srcf]
            ys = lo[srcf][:, None, :] + sub[None, :, :] * size[:, None, :]
            vals = _kernel_components(pts[tgt][:, None, :] - ys, n)
            integral = vals.sum(axis=1) * (np.prod(size, axis=1) / sub.shape[0])[:, None]
            table[:, tgt, srcf] = integral.T

    # persistence
    def header(self) -> dict:
        return {
            "grid": self.spec.to_dict(),
            "grid_hash": grid_hash(self.spec),
            "n": self.n,
            "shape": list(self.table.shape),
            "dtype": "<f8",
            "layout": "component,target,source",
            "subcells": SUBCELLS,
            "quadrature": self.quadrature,
            "diagonal": self.diagonal,
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.with_suffix(".json").write_text(json.dumps(self.header(), indent=2, sort_keys=True) + "\n")
        np.ascontiguousarray(self.table, dtype="<f8").tofile(path.with_suffix(".bin"))
        return path

    @classmethod
    def load(cls, path: str | Path, spec: GridSpec | None = None) -> "KernelCache":
        path = Path(path)
        head = json.loads(path.with_suffix(".json").read_text())
        stored = GridSpec.from_dict(head["grid"])
        if head["grid_hash"] != grid_hash(stored) or (spec is not None and stored != spec):
            raise GridError("kernel cache was built for a different grid")
        if head.get("subcells") != SUBCELLS:
            raise GridError("kernel cache built with a different near-field rule")
        table = np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(head["shape"])
        return cls(stored, table, quadrature=head["quadrature"], diagonal=head["diagonal"])


def grid_hash(spec: GridSpec) -> str:
    return hashlib.sha256(spec.key().encode()).hexdigest()[:16]


_CACHES: dict[GridSpec, KernelCache] = {}


def kernel_cache(spec: GridSpec) -> KernelCache:
    """Process-wide memoised cache per grid."""
    if spec not in _CACHES:
        _CACHES[spec] = KernelCache(spec)
    return _CACHES[spec]


def _combine_vector_left(f: CliffordField, parts: np.ndarray, active: np.ndarray) -> CliffordField:
    """``sum_m e_m * parts[m]`` where ``parts[m]`` holds the active blades of a field."""
    alg = f.algebra
    out = np.zeros((alg.dim, parts.shape[-1]), dtype=complex)
    for m in range(parts.shape[0]):
        em = alg.basis_index(f"e{m + 1}")
        out += alg.table[em][np.ix_(active, np.arange(alg.dim))].T @ parts[m]
    return f.with_data(out.reshape((alg.dim, *f.grid.counts)))


def teodorescu_apply(f: CliffordField, cache: KernelCache | None = None) -> CliffordField:
    """``Tf(x) = int_G e(x - y) f(y) dy`` on all grid nodes."""
    cache = cache or kernel_cache(f.grid)
    if cache.spec != f.grid:
        raise GridError("kernel cache belongs to another grid")
    if f.n < cache.n:
        raise GridError("field algebra has fewer generators than the grid dimension")
    active = f.active()
    N = f.grid.size
    parts = np.zeros((cache.n, active.size, N), dtype=complex)
    if active.size == 0:
        return CliffordField.zeros(f.grid, f.algebra)
    src = f.data.reshape(f.algebra.dim, N)[active]
    rhs = np.concatenate([src.real, src.imag]).T.copy()  # (N, 2a)
    res = np.empty((cache.n, N, rhs.shape[1]))

    def work(rows: slice):
        for m in range(cache.n):
            res[m, rows] = cache.table[m, rows] @ rhs

    map_chunks(work, N)
    k = active.size
    parts[:] = np.transpose(res[:, :, :k] + 1j * res[:, :, k:], (0, 2, 1))
    return _combine_vector_left(f, parts, active)


def cauchy_boundary_apply(
    g: CliffordField, geometry: GridGeometry | None = None, targets: np.ndarray | None = None
) -> CliffordField:
    """``Fg(x) = sum_faces e(y - x) n(y) g(y) w`` at target nodes (zero elsewhere).

    Only the boundary values of ``g`` are read.  Targets default to all
    interior nodes and must not touch the boundary.
    """
    geometry = geometry or build_grid(g.grid)
    spec = g.grid
    if geometry.spec != spec:
        raise GridError("geometry belongs to another grid")
    mask = geometry.interior if targets is None else np.asarray(targets, dtype=bool)
    if np.any(mask & geometry.boundary):
        raise GridError("Cauchy boundary integral is singular at boundary targets")
    alg = g.algebra
    fidx, normals, weights = geometry.face_arrays()
    gflat = g.data.reshape(alg.dim, -1)[:, fidx]  # (dim, F)
    # n(y) g(y) per face
    ng = np.zeros_like(gflat)
    for j in range(spec.n):
        ej = alg.basis_index(f"e{j + 1}")
        ng += (alg.table[ej].T @ gflat) * normals[:, j]
    ng *= weights
    tgt = np.flatnonzero(mask.ravel())
    pts = spec.points()
    K = _kernel_components(pts[fidx][None, :, :] - pts[tgt][:, None, :], spec.n)  # (T, F, n)
    parts = np.zeros((spec.n, alg.dim, spec.size), dtype=complex)
    for m in range(spec.n):
        parts[m][:, tgt] = (K[:, :, m] @ ng.T).T
    return _combine_vector_left(g, parts, np.arange(alg.dim))


def _relative(r: CliffordField, f: CliffordField, layers: int) -> float:
    denom = core_l2(f, layers)
    if denom == 0.0:
        return 0.0
    return core_l2(r, layers) / denom


def borel_pompeiu_residual(f: CliffordField, cache: KernelCache | None = None, layers: int = CORE_LAYERS) -> float:
    """Relative core residual of ``F(tr f) + T(Df) - f``."""
    core = f.grid.core_mask(layers)
    bp = cauchy_boundary_apply(f, targets=core) + teodorescu_apply(dirac_apply(f), cache)
    return _relative(bp - f, f, layers)


def right_inverse_residual(f: CliffordField, cache: KernelCache | None = None, layers: int = CORE_LAYERS) -> float:
    """Relative core residual of ``D(Tf) - f``."""
    f.grid.core_mask(layers)
    return _relative(dirac_apply(teodorescu_apply(f, cache)) - f, f, layers)


def image_q_residual(f: CliffordField, cache: KernelCache | None = None, layers: int = CORE_LAYERS) -> float:
    """Relative core size of ``F(tr Tf)``; vanishes in the continuum since tr Tf lies in im Q."""
    core = f.grid.core_mask(layers)
    return _relative(cauchy_boundary_apply(teodorescu_apply(f, cache), targets=core), f, layers)


def _heaviside(t: float) -> float:
    return 1.0 if t > 0 else 0.0


def schrodinger_kernel(x, t: float, n: int | None = None) -> complex:
    """``E(x,t) = H(t) / (2 sqrt(pi i t))^n exp(i |x|^2 / 4t)``, principal branch."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = n or x.size
    if t <= 0:
        return 0j
    r2 = float(np.sum(x**2))
    return complex(np.exp(1j * r2 / (4 * t)) / (2 * np.sqrt(np.pi * 1j * t)) ** n)


def schrodinger_kernel_residual(x, t: float, step: float = 1e-3) -> float:
    """Central-difference ``|(-i d_t - Lap) E| / |E|`` at a point with ``t > 0``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t - step <= 0:
        raise ValueError("probe too close to t = 0 for the difference step")
    e0 = schrodinger_kernel(x, t)
    dt = (schrodinger_kernel(x, t + step) - schrodinger_kernel(x, t - step)) / (2 * step)
    lap = 0j
    for j in range(x.size):
        d = np.zeros_like(x)
        d[j] = step
        lap += (schrodinger_kernel(x + d, t) - 2 * e0 + schrodinger_kernel(x - d, t)) / step**2
    return float(abs(-1j * dt - lap) / abs(e0))


def parabolic_kernel(x, t: float, n: int | None = None) -> Multivector:
    """``e(x,t) = E(x,-t) D+_{x,t}`` in closed form, a Witt-enabled multivector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = n or x.size
    if t == 0:
        raise ValueError("parabolic kernel is singular at t = 0")
    zero = Multivector.zero(n, witt=True)
    if t > 0:
        return zero
    r2 = float(np.sum(x**2))
    pref = np.exp(-1j * r2 / (4 * t)) / (2 * np.sqrt(np.pi * 1j * (-t))) ** n
    terms = {f"e{j + 1}": (-1j / (2 * t)) * x[j] for j in range(n)}
    terms["f"] = -n / (2 * t) + 1j * r2 / (4 * t**2)
    terms["f+"] = 1j
    return Multivector.from_terms(n, terms, witt=True) * complex(pref)


def promote(f: CliffordField, witt: bool | None = None) -> CliffordField:
    """Re-home ``f`` in the algebra with ``grid.n`` generators (keeps Witt flag by default)."""
    alg = algebra(f.grid.n, f.algebra.witt if witt is None else witt)
    return f if f.algebra is alg else embed_field(f, alg)
