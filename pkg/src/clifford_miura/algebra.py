"""Clifford algebra Cl(0,n) with an optional Witt pair f, f+.

Basis words are normal ordered as ``e_A w`` where ``e_A`` is an ascending
product of Euclidean generators (e_i^2 = -1) and ``w`` is one of the Witt
words ``1, f, f+, f+f``.  The Witt generators satisfy f^2 = (f+)^2 = 0,
f f+ + f+ f = 1 and anticommute with every e_j.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

WITT_WORDS = ("", "f", "f+", "f+f")
_WITT_DEGREE = {"": 0, "f": 1, "f+": 1, "f+f": 2}
_WITT_LETTERS = {"": (), "f": ("f",), "f+": ("f+",), "f+f": ("f+", "f")}

# Products of normal-ordered Witt words, as (coefficient, word) terms.
_WITT_TABLE: dict[tuple[str, str], tuple[tuple[int, str], ...]] = {
    ("f", "f"): (),
    ("f", "f+"): ((1, ""), (-1, "f+f")),
    ("f", "f+f"): ((1, "f"),),
    ("f+", "f"): ((1, "f+f"),),
    ("f+", "f+"): (),
    ("f+", "f+f"): (),
    ("f+f", "f"): (),
    ("f+f", "f+"): ((1, "f+"),),
    ("f+f", "f+f"): ((1, "f+f"),),
}

MAX_DIM = 4
INVOLUTIONS = ("principal", "reversion", "conjugation")


class AlgebraError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Blade:
    """A canonical basis word ``e_A w``."""

    euclid: tuple[int, ...] = ()
    witt: str = ""

    def __post_init__(self):
        if tuple(sorted(set(self.euclid))) != tuple(self.euclid):
            raise AlgebraError(f"generators must be strictly increasing: {self.euclid}")
        if self.witt not in WITT_WORDS:
            raise AlgebraError(f"unknown Witt word {self.witt!r}")

    @property
    def grade(self) -> int:
        return len(self.euclid)

    @property
    def degree(self) -> int:
        """Generator count, with f and f+ counted once each."""
        return len(self.euclid) + _WITT_DEGREE[self.witt]

    @property
    def name(self) -> str:
        if not self.euclid and not self.witt:
            return "e0"
        return "".join(f"e{i}" for i in self.euclid) + self.witt

    @classmethod
    def parse(cls, name: str) -> "Blade":
        s = name.strip()
        if s in ("e0", "1", ""):
            return cls()
        witt = ""
        for w in ("f+f", "f+", "f"):
            if s.endswith(w):
                witt, s = w, s[: -len(w)]
                break
        if not s:
            return cls((), witt)
        parts = s.split("e")
        if parts[0] != "" or any(not p.isdigit() for p in parts[1:]):
            raise AlgebraError(f"cannot parse blade {name!r}")
        return cls(tuple(int(p) for p in parts[1:]), witt)

    def validate(self, n: int, witt_enabled: bool = True) -> None:
        if any(i < 1 or i > n for i in self.euclid):
            raise AlgebraError(f"generator index out of range 1..{n} in {self.name}")
        if self.witt and not witt_enabled:
            raise AlgebraError(f"Witt word {self.witt} in an algebra without Witt pair")

    def __str__(self):
        return self.name


def _euclid_product(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    swaps = sum(1 for x in a for y in b if x > y)
    common = len(set(a) & set(b))
    sign = -1 if (swaps + common) % 2 else 1
    return sign, tuple(sorted(set(a) ^ set(b)))


def blade_product(a: Blade, b: Blade, n: int) -> tuple[tuple[complex, Blade], ...]:
    """Normal-ordered product of two basis words.

    Returns the product as a tuple of ``(coefficient, blade)`` terms; an empty
    tuple means zero.  ``f f+`` is the only case producing two terms.
    """
    a.validate(n)
    b.validate(n)
    sign, euclid = _euclid_product(a.euclid, b.euclid)
    # moving w1 past e_B
    if _WITT_DEGREE[a.witt] * len(b.euclid) % 2:
        sign = -sign
    if not a.witt or not b.witt:
        return ((complex(sign), Blade(euclid, a.witt or b.witt)),)
    return tuple((complex(sign * c), Blade(euclid, w)) for c, w in _WITT_TABLE[a.witt, b.witt])


class CliffordAlgebra:
    """Basis bookkeeping and dense Cayley table for Cl(0,n), optionally Witt-extended."""

    def __init__(self, n: int, witt: bool = False):
        if not 1 <= n <= MAX_DIM:
            raise AlgebraError(f"dimension n must lie in 1..{MAX_DIM}, got {n}")
        self.n = n
        self.witt = witt
        euclid = [c for k in range(n + 1) for c in itertools.combinations(range(1, n + 1), k)]
        words = WITT_WORDS if witt else ("",)
        self.blades: tuple[Blade, ...] = tuple(Blade(e, w) for w in words for e in euclid)
        self.index = {b: i for i, b in enumerate(self.blades)}
        self.dim = len(self.blades)
        table = np.zeros((self.dim, self.dim, self.dim))
        for i, bi in enumerate(self.blades):
            for j, bj in enumerate(self.blades):
                for c, bk in blade_product(bi, bj, n):
                    table[i, j, self.index[bk]] += c.real
        table.setflags(write=False)
        self.table = table
        self.degrees = np.array([b.degree for b in self.blades])
        self.grades = np.array([b.grade if not b.witt else -1 for b in self.blades])

    def __repr__(self):
        return f"CliffordAlgebra(n={self.n}, witt={self.witt})"

    def basis_index(self, blade: Blade | str) -> int:
        if isinstance(blade, str):
            blade = Blade.parse(blade)
        blade.validate(self.n, self.witt)
        return self.index[blade]

    def involution_matrix(self, kind: str) -> np.ndarray:
        """Matrix of an involution in the blade basis.

        Each blade is written as a product of generators; principal flips every
        generator, reversion reverses the order, conjugation does both.  On the
        plain algebra the matrix is diagonal with the familiar grade signs; with
        the Witt pair, reversing ``f+ f`` gives ``f f+ = 1 - f+ f``.
        """
        if kind not in INVOLUTIONS:
            raise AlgebraError(f"unknown involution {kind!r}")
        return self._involutions[kind]

    @functools.cached_property
    def _involutions(self) -> dict[str, np.ndarray]:
        out = {}
        for kind in INVOLUTIONS:
            mat = np.zeros((self.dim, self.dim), dtype=complex)
            for col, blade in enumerate(self.blades):
                gens = [Blade((j,)) for j in blade.euclid] + [Blade((), w) for w in _WITT_LETTERS[blade.witt]]
                if kind != "principal":
                    gens = gens[::-1]
                sign = (-1) ** len(gens) if kind != "reversion" else 1
                vec = np.zeros(self.dim, dtype=complex)
                vec[0] = sign
                for g in gens:
                    vec = self.right_matrix(np.eye(self.dim)[self.index[g]]) @ vec
                mat[:, col] = vec
            mat.setflags(write=False)
            out[kind] = mat
        return out

    def left_matrix(self, coeffs: np.ndarray) -> np.ndarray:
        """Matrix ``M`` with ``(u v).coeffs == M @ v.coeffs`` for fixed ``u``."""
        return np.einsum("i,ijk->kj", coeffs, self.table)

    def right_matrix(self, coeffs: np.ndarray) -> np.ndarray:
        """Matrix ``M`` with ``(v u).coeffs == M @ v.coeffs`` for fixed ``u``."""
        return np.einsum("j,ijk->ki", coeffs, self.table)


@functools.lru_cache(maxsize=None)
def _cached_algebra(n: int, witt: bool) -> CliffordAlgebra:
    return CliffordAlgebra(n, witt)


def algebra(n: int, witt: bool = False) -> CliffordAlgebra:
    """Shared algebra instance, so fields can compare algebras by identity."""
    return _cached_algebra(int(n), bool(witt))


class Multivector:
    """Immutable element of Cl(0,n) (optionally Witt-extended) with complex coefficients."""

    __slots__ = ("algebra", "data")

    def __init__(self, alg: CliffordAlgebra, data):
        arr = np.array(data, dtype=complex)
        if arr.shape != (alg.dim,):
            raise AlgebraError(f"expected {alg.dim} coefficients, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "algebra", alg)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, key, value):
        raise AttributeError("Multivector is immutable")

    # construction
    @classmethod
    def from_terms(cls, n: int, terms: Mapping[Blade | str, complex] | Iterable, witt: bool = False) -> "Multivector":
        alg = algebra(n, witt)
        data = np.zeros(alg.dim, dtype=complex)
        items = terms.items() if isinstance(terms, Mapping) else terms
        for blade, c in items:
            data[alg.basis_index(blade)] += c
        return cls(alg, data)

    @classmethod
    def scalar(cls, n: int, value: complex = 1.0, witt: bool = False) -> "Multivector":
        return cls.from_terms(n, {Blade(): value}, witt)

    @classmethod
    def basis(cls, n: int, name: str, witt: bool = False) -> "Multivector":
        return cls.from_terms(n, {name: 1.0}, witt)

    @classmethod
    def vector(cls, components, witt: bool = False) -> "Multivector":
        comps = list(components)
        return cls.from_terms(len(comps), {Blade((i + 1,)): c for i, c in enumerate(comps)}, witt)

    @classmethod
    def zero(cls, n: int, witt: bool = False) -> "Multivector":
        return cls(algebra(n, witt), np.zeros(algebra(n, witt).dim))

    # inspection
    @property
    def n(self) -> int:
        return self.algebra.n

    @property
    def witt_enabled(self) -> bool:
        return self.algebra.witt

    @property
    def coeffs(self) -> dict[Blade, complex]:
        return {b: complex(c) for b, c in zip(self.algebra.blades, self.data) if c != 0}

    def __getitem__(self, blade: Blade | str) -> complex:
        return complex(self.data[self.algebra.basis_index(blade)])

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.data) <= atol))

    def allclose(self, other: "Multivector", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.all(np.abs(self.data - other.data) <= atol))

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.algebra is other.algebra and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.n, self.witt_enabled, self.data.tobytes()))

    def __repr__(self):
        terms = self.coeffs
        if not terms:
            return "0"
        return " + ".join(f"({c:g}){b.name}" for b, c in terms.items())

    # arithmetic
    def _check(self, other: "Multivector"):
        if self.algebra is not other.algebra:
            raise AlgebraError(f"algebra mismatch: {self.algebra} vs {other.algebra}")

    def __add__(self, other):
        if isinstance(other, Multivector):
            self._check(other)
            return Multivector(self.algebra, self.data + other.data)
        if np.isscalar(other):
            return self + Multivector.scalar(self.n, other, self.witt_enabled)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Multivector(self.algebra, -self.data)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        if np.isscalar(other):
            return Multivector(self.algebra, self.data * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return Multivector(self.algebra, self.data * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return Multivector(self.algebra, self.data / other)
        return NotImplemented

    # serialization
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "witt": self.witt_enabled,
            "terms": [{"blade": b.name, "re": c.real, "im": c.imag} for b, c in self.coeffs.items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping) -> "Multivector":
        terms = [(Blade.parse(t["blade"]), complex(t.get("re", 0.0), t.get("im", 0.0))) for t in d["terms"]]
        return cls.from_terms(int(d["n"]), terms, bool(d.get("witt", False)))

    @classmethod
    def from_json(cls, s: str) -> "Multivector":
        return cls.from_dict(json.loads(s))


def geometric_product(u: Multivector, v: Multivector) -> Multivector:
    u._check(v)
    return Multivector(u.algebra, np.einsum("i,j,ijk->k", u.data, v.data, u.algebra.table))


def involution(u: Multivector, kind: str) -> Multivector:
    """principal: (-1)^|A|, reversion: (-1)^(|A|(|A|-1)/2), conjugation: (-1)^(|A|(|A|+1)/2).

    Those are the signs on plain blades.  With the Witt pair the involutions
    are extended generator-wise (f, f+ count as vectors), which is no longer
    diagonal on the word ``f+ f``.
    """
    return Multivector(u.algebra, u.algebra.involution_matrix(kind) @ u.data)


def grade_project(u: Multivector, k: int) -> Multivector:
    if not 0 <= k <= u.n:
        raise AlgebraError(f"grade {k} outside 0..{u.n}")
    return Multivector(u.algebra, np.where(u.algebra.grades == k, u.data, 0))


def is_vector(u: Multivector) -> bool:
    return bool(np.all(u.data[u.algebra.grades != 1] == 0))


def vector_inverse(x: Multivector) -> Multivector:
    """Inverse of a nonzero real vector: ``-x / |x|^2``."""
    if not is_vector(x) or np.any(x.data.imag != 0):
        raise AlgebraError("vector_inverse needs a real grade-1 multivector")
    norm2 = float(np.sum(x.data.real**2))
    if norm2 == 0.0:
        raise AlgebraError("zero vector has no inverse")
    return -x / norm2
