"""Box grids, Clifford-valued grid fields and their discrete Banach norms."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .algebra import Blade, CliffordAlgebra, Multivector, algebra

MIN_COUNT = 8


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned box ``origin + [0, extents]`` sampled with ``counts`` nodes per axis."""

    origin: tuple[float, ...]
    extents: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "extents", tuple(float(v) for v in self.extents))
        object.__setattr__(self, "counts", tuple(int(v) for v in self.counts))
        if not (len(self.origin) == len(self.extents) == len(self.counts)):
            raise GridError("origin, extents and counts must have equal length")
        if any(e <= 0 for e in self.extents):
            raise GridError(f"extents must be positive: {self.extents}")
        if any(c < MIN_COUNT for c in self.counts):
            raise GridError(f"need at least {MIN_COUNT} nodes per axis, got {self.counts}")

    @classmethod
    def box(cls, lo, hi, counts) -> "GridSpec":
        lo = tuple(lo)
        return cls(lo, tuple(b - a for a, b in zip(lo, hi)), tuple(counts))

    @classmethod
    def unit(cls, n: int, count: int) -> "GridSpec":
        return cls((0.0,) * n, (1.0,) * n, (count,) * n)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / (c - 1) for e, c in zip(self.extents, self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.h)

    def axes(self) -> list[np.ndarray]:
        return [o + np.arange(c) * hh for o, c, hh in zip(self.origin, self.counts, self.h)]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``, C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def axis_weights(self) -> list[np.ndarray]:
        out = []
        for c, hh in zip(self.counts, self.h):
            w = np.full(c, hh)
            w[0] = w[-1] = hh / 2
            out.append(w)
        return out

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (product of per-axis weights)."""
        w = np.ones(())
        for wa in self.axis_weights():
            w = np.multiply.outer(w, wa)
        return w

    def core_mask(self, layers: int) -> np.ndarray:
        """Nodes at least ``layers`` index steps away from the boundary."""
        if any(c <= 2 * layers for c in self.counts):
            raise GridError(f"grid {self.counts} has no core at depth {layers}")
        m = np.zeros(self.counts, dtype=bool)
        m[tuple(slice(layers, c - layers) for c in self.counts)] = True
        return m

    def core_weights(self, layers: int, margin: float = 0.0) -> np.ndarray:
        """Quadrature weights for the interior core.

        With ``margin = 0`` every core node carries the cell volume.  With
        ``margin > 0`` the core is the fixed box inset by ``margin * extent`` on
        every face: each node's cell is weighted by its overlap with that box,
        so the measured region does not change under refinement.
        """
        mask = self.core_mask(layers)
        if margin <= 0:
            return mask * self.cell_volume
        w = np.ones(self.counts)
        for ax, (x, o, e, h) in enumerate(zip(self.axes(), self.origin, self.extents, self.h)):
            lo, hi = o + margin * e, o + e - margin * e
            if hi <= lo:
                raise GridError(f"margin {margin} leaves no core")
            overlap = np.clip(np.minimum(x + h / 2, hi) - np.maximum(x - h / 2, lo), 0.0, None)
            shape = [1] * self.n
            shape[ax] = overlap.size
            w = w * overlap.reshape(shape)
        return w * mask

    def key(self) -> str:
        return json.dumps({"origin": self.origin, "extents": self.extents, "counts": self.counts})

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "extents": list(self.extents), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GridSpec":
        return cls(tuple(d["origin"]), tuple(d["extents"]), tuple(d["counts"]))


@dataclass(frozen=True)
class BoundaryFace:
    """One quadrature point of the boundary: node, outward unit normal, surface weight."""

    node: tuple[int, ...]
    normal: Multivector
    weight: float


@dataclass(frozen=True)
class GridGeometry:
    spec: GridSpec
    points: np.ndarray
    interior: np.ndarray
    faces: list[BoundaryFace] = field(repr=False)

    @property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    def face_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat node index, normal components ``(F, n)`` and weights of all faces."""
        idx = np.array([np.ravel_multi_index(f.node, self.spec.counts) for f in self.faces])
        normals = np.array([[f.normal[Blade((j + 1,))].real for j in range(self.spec.n)] for f in self.faces])
        weights = np.array([f.weight for f in self.faces])
        return idx, normals, weights


def build_grid(spec: GridSpec) -> GridGeometry:
    """Lattice nodes, interior mask and boundary faces of a box.

    A boundary node lying on several sides (edges and corners) yields one face
    per side; each face carries the trapezoid weight of its tangential axes so
    that the weights of a side sum to its measure.
    """
    n = spec.n
    interior = spec.core_mask(1)
    aw = spec.axis_weights()
    faces: list[BoundaryFace] = []
    for axis in range(n):
        tangential = [a for a in range(n) if a != axis]
        for side, sign in ((0, -1.0), (spec.counts[axis] - 1, 1.0)):
            normal = Multivector.vector([sign if j == axis else 0.0 for j in range(n)])
            ranges = [range(spec.counts[a]) for a in tangential]
            for combo in np.ndindex(*[len(r) for r in ranges]):
                node = [0] * n
                node[axis] = side
                w = 1.0
                for a, i in zip(tangential, combo):
                    node[a] = i
                    w *= aw[a][i]
                faces.append(BoundaryFace(tuple(node), normal, float(w)))
    return GridGeometry(spec, spec.points(), interior, faces)


class CliffordField:
    """Multivector-valued samples on a grid; ``data`` has shape ``(algebra.dim, *grid.counts)``."""

    __slots__ = ("grid", "algebra", "data")

    def __init__(self, grid: GridSpec, alg: CliffordAlgebra, data):
        arr = np.array(data, dtype=complex)
        if arr.shape != (alg.dim, *grid.counts):
            raise GridError(f"field data shape {arr.shape} != {(alg.dim, *grid.counts)}")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "algebra", alg)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, key, value):
        raise AttributeError("CliffordField is immutable")

    @classmethod
    def zeros(cls, grid: GridSpec, alg: CliffordAlgebra) -> "CliffordField":
        return cls(grid, alg, np.zeros((alg.dim, *grid.counts)))

    @classmethod
    def scalar(cls, grid: GridSpec, alg: CliffordAlgebra, values) -> "CliffordField":
        data = np.zeros((alg.dim, *grid.counts), dtype=complex)
        data[0] = values
        return cls(grid, alg, data)

    @classmethod
    def from_components(cls, grid: GridSpec, alg: CliffordAlgebra, comps: Mapping) -> "CliffordField":
        data = np.zeros((alg.dim, *grid.counts), dtype=complex)
        for blade, values in comps.items():
            data[alg.basis_index(blade)] += values
        return cls(grid, alg, data)

    @classmethod
    def vector(cls, grid: GridSpec, alg: CliffordAlgebra, comps) -> "CliffordField":
        return cls.from_components(grid, alg, {Blade((j + 1,)): c for j, c in enumerate(comps)})

    @property
    def n(self) -> int:
        return self.algebra.n

    def component(self, blade: Blade | str) -> np.ndarray:
        return self.data[self.algebra.basis_index(blade)]

    @property
    def scalar_part(self) -> np.ndarray:
        return self.data[0]

    def vector_components(self) -> np.ndarray:
        return np.stack([self.component(Blade((j + 1,))) for j in range(self.n)])

    def at(self, index) -> Multivector:
        return Multivector(self.algebra, self.data[(slice(None), *index)])

    def active(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.data.reshape(self.algebra.dim, -1) != 0, axis=1))

    def grade(self, k: int) -> "CliffordField":
        keep = (self.algebra.grades == k).reshape((-1,) + (1,) * self.grid.n)
        return self.with_data(np.where(keep, self.data, 0))

    def is_grade(self, k: int) -> bool:
        return bool(np.all(self.data[self.algebra.grades != k] == 0))

    def with_data(self, data) -> "CliffordField":
        return CliffordField(self.grid, self.algebra, data)

    def _check(self, other: "CliffordField"):
        if other.grid != self.grid or other.algebra is not self.algebra:
            raise GridError("fields live on different grids or algebras")

    def __add__(self, other):
        if isinstance(other, CliffordField):
            self._check(other)
            return self.with_data(self.data + other.data)
        if isinstance(other, Multivector):
            return self.with_data(self.data + other.data.reshape((-1,) + (1,) * self.grid.n))
        return NotImplemented

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self.with_data(-self.data)

    def __mul__(self, other):
        if isinstance(other, CliffordField):
            return field_product(self, other)
        if isinstance(other, Multivector):
            return right_multiply(self, other)
        if np.isscalar(other):
            return self.with_data(self.data * other)
        if isinstance(other, np.ndarray) and other.shape == self.grid.counts:
            return self.with_data(self.data * other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, Multivector):
            return left_multiply(other, self)
        if np.isscalar(other) or (isinstance(other, np.ndarray) and other.shape == self.grid.counts):
            return self.with_data(self.data * other)
        return NotImplemented

    def __truediv__(self, other):
        return self.with_data(self.data / other)


def field_product(u: CliffordField, v: CliffordField) -> CliffordField:
    """Nodewise geometric product ``u(x) v(x)``."""
    u._check(v)
    iu, iv = u.active(), v.active()
    out = np.zeros_like(u.data)
    if iu.size and iv.size:
        sub = u.algebra.table[np.ix_(iu, iv)]
        out += np.einsum("ijk,i...,j...->k...", sub, u.data[iu], v.data[iv])
    return u.with_data(out)


def left_multiply(m: Multivector, u: CliffordField) -> CliffordField:
    mat = u.algebra.left_matrix(m.data)
    return u.with_data(np.tensordot(mat, u.data, axes=(1, 0)))


def right_multiply(u: CliffordField, m: Multivector) -> CliffordField:
    mat = u.algebra.right_matrix(m.data)
    return u.with_data(np.tensordot(mat, u.data, axes=(1, 0)))


def sample_field(expr: Callable, grid: GridSpec, alg: CliffordAlgebra | None = None) -> CliffordField:
    """Evaluate ``expr(*coords)`` at every node.

    ``expr`` may return an array/number (scalar part), a constant Multivector,
    or a mapping ``blade -> array``.
    """
    alg = alg or algebra(grid.n)
    coords = grid.mesh()
    val = expr(*coords)
    if isinstance(val, Multivector):
        data = np.broadcast_to(val.data.reshape((-1,) + (1,) * grid.n), (alg.dim, *grid.counts))
        return CliffordField(grid, alg, data)
    if isinstance(val, Mapping):
        comps = {b: np.broadcast_to(v, grid.counts) for b, v in val.items()}
        return CliffordField.from_components(grid, alg, comps)
    return CliffordField.scalar(grid, alg, np.broadcast_to(val, grid.counts))


def _check_p(p: float):
    if not (1 < p < math.inf):
        raise GridError(f"exponent p must satisfy 1 < p < inf, got {p}")


def _component_powers(data: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """Per-component ``sum w |f_A|^p``."""
    return np.array([np.sum(weights * np.abs(c) ** p) for c in data])


def lp_norm(f: CliffordField, p: float) -> float:
    """Component-sum-of-squares combination of per-blade discrete L^p norms."""
    _check_p(p)
    comp = _component_powers(f.data, f.grid.weights(), p) ** (1.0 / p)
    return float(math.sqrt(np.sum(comp**2)))


def partial(data: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Second-order partial along a grid axis of component-stacked data."""
    return np.gradient(data, grid.h[axis], axis=axis + 1, edge_order=2)


def w1p_norm(f: CliffordField, p: float) -> float:
    _check_p(p)
    total = lp_norm(f, p) ** p
    for j in range(f.grid.n):
        total += lp_norm(f.with_data(partial(f.data, f.grid, j)), p) ** p
    return float(total ** (1.0 / p))


def core_l2(f: CliffordField, layers: int = 3, margin: float = 0.0) -> float:
    """Discrete L^2 norm over nodes at least ``layers`` steps from the boundary."""
    w = f.grid.core_weights(layers, margin)
    return float(math.sqrt(np.sum(w * np.sum(np.abs(f.data) ** 2, axis=0))))


def write_field_csv(f: CliffordField, path: str | Path) -> Path:
    """Write ``x1..xn,blade,re,im`` rows plus a ``.json`` sidecar with grid metadata."""
    path = Path(path)
    pts = f.grid.points()
    flat = f.data.reshape(f.algebra.dim, -1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(f.grid.n)] + ["blade", "re", "im"])
        for node in range(pts.shape[0]):
            for b in np.flatnonzero(flat[:, node]):
                c = flat[b, node]
                w.writerow([repr(float(x)) for x in pts[node]] + [f.algebra.blades[b].name, repr(float(c.real)), repr(float(c.imag))])
    meta = {"grid": f.grid.to_dict(), "n": f.algebra.n, "witt": f.algebra.witt}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_field_csv(path: str | Path) -> CliffordField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = GridSpec.from_dict(meta["grid"])
    alg = algebra(meta["n"], meta["witt"])
    data = np.zeros((alg.dim, grid.size), dtype=complex)
    with path.open() as fh:
        for row in csv.DictReader(fh):
            idx = [int(round((float(row[f"x{j + 1}"]) - grid.origin[j]) / grid.h[j])) for j in range(grid.n)]
            if any(not 0 <= i < c for i, c in zip(idx, grid.counts)):
                raise GridError(f"row outside grid: {row}")
            flat = np.ravel_multi_index(tuple(idx), grid.counts)
            data[alg.basis_index(row["blade"]), flat] += complex(float(row["re"]), float(row["im"]))
    return CliffordField(grid, alg, data.reshape((alg.dim, *grid.counts)))


def embed_field(f: CliffordField, alg: CliffordAlgebra) -> CliffordField:
    """Copy ``f`` into a larger algebra, blade by blade."""
    data = np.zeros((alg.dim, *f.grid.counts), dtype=complex)
    for i, b in enumerate(f.algebra.blades):
        data[alg.basis_index(b)] = f.data[i]
    return CliffordField(f.grid, alg, data)
