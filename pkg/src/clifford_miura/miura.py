"""Fixed-point solver for the nonlinear Dirac (Miura) equation ``Da = V + |a|^2``.

The solver iterates ``a_n = T(V + |a_{n-1}|^2)``, whose fixed points have
boundary traces in im Q.  A Cauchy datum ``h`` may be supplied to look for
solutions with the boundary behaviour of ``h`` instead; its Cauchy integral
``F(tr h)`` is evaluated as ``h - T(Dh)`` and added to every iterate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import algebra
from .grid import CliffordField, GridSpec, core_l2, lp_norm, w1p_norm
from .integral import CORE_LAYERS, KernelCache, kernel_cache, teodorescu_apply
from .operators import dirac_apply, laplacian_apply, vector_field_sq

SAFETY = 1.25
DIVERGENCE_FACTOR = 5.0
PHI_FLOOR = 1e-12
# pointwise identities are measured on a core of fixed physical size
CORE_MARGIN = 0.2


class MiuraError(ValueError):
    pass


def default_exponent(n: int) -> float:
    return 1.5 if n == 2 else 2.0


def check_exponent(p: float, n: int) -> None:
    """Require ``n > p >= n/2 > 1`` (or ``2 > p > 1`` when n = 2)."""
    if n == 2:
        ok = 1 < p < 2
    else:
        ok = n > p >= n / 2 > 1
    if not ok:
        raise MiuraError(f"exponent p={p} outside the admissible window for n={n}")


@dataclass
class MiuraConfig:
    p: float = 1.5
    tol: float = 1e-10
    max_iter: int = 200
    k1: float | None = None
    C: float | None = None
    trials: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise MiuraError("tol must be positive")
        if self.max_iter < 1:
            raise MiuraError("max_iter must be a positive integer")
        for name in ("k1", "C"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise MiuraError(f"{name} must be positive")

    @property
    def k2(self) -> float | None:
        if self.k1 is None or self.C is None:
            return None
        return self.k1 * self.C**2

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConvergenceReport:
    norm_V: float
    k1: float
    C: float
    k2: float
    constants_estimated: bool
    threshold: float
    small_enough: bool
    W: float | None
    L: float | None
    iterations: int = 0
    converged: bool = False
    diverged: bool = False
    vector_pure: bool = True
    residual_history: list[float] = field(default_factory=list)
    ratio_history: list[float] = field(default_factory=list)
    norm_history: list[float] = field(default_factory=list)
    final_fp_residual: float = math.nan
    final_strong_residual: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _probe(rng: np.random.Generator, grid: GridSpec, trial: int) -> np.ndarray:
    """Trial 0 is the constant 1; later trials are random low-frequency cosine sums."""
    if trial == 0:
        return np.ones(grid.counts)
    coords = grid.mesh()
    out = np.zeros(grid.counts)
    for _ in range(3):
        k = rng.integers(0, 4, size=grid.n)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal()
        arg = sum(np.pi * kj * (x - o) / e for kj, x, o, e in zip(k, coords, grid.origin, grid.extents))
        out += amp * np.cos(arg + phase)
    if not np.any(out):
        out[...] = 1.0
    return out


def estimate_constants(
    grid: GridSpec, p: float, trials: int = 16, seed: int = 0, cache: KernelCache | None = None
) -> tuple[float, float]:
    """Randomized lower bounds for ``||T||_{L^p -> W^1_p}`` and the ``W^1_p -> L^2p`` embedding.

    Both are maxima over the same seeded probe sequence, scaled by ``SAFETY``.
    """
    if trials < 16:
        raise MiuraError("need at least 16 trials")
    cache = cache or kernel_cache(grid)
    alg = algebra(grid.n)
    rng = np.random.default_rng(seed)
    k1 = C = 0.0
    for t in range(trials):
        f = CliffordField.scalar(grid, alg, _probe(rng, grid, t))
        k1 = max(k1, w1p_norm(teodorescu_apply(f, cache), p) / lp_norm(f, p))
        C = max(C, lp_norm(f, 2 * p) / w1p_norm(f, p))
    return SAFETY * k1, SAFETY * C


def convergence_bounds(norm_V: float, k1: float, k2: float) -> tuple[float, bool, float | None, float | None]:
    """Threshold ``1/(4 k1 k2)``, smallness flag, radius ``W`` and contraction ``L``.

    ``W = sqrt(1/(4 k2^2) - (k1/k2) ||V||)`` and ``L = 1 - 2 k2 W``.  Loads within
    a few ulps of the threshold are treated as lying on it.
    """
    if k1 <= 0 or k2 <= 0 or norm_V < 0:
        raise MiuraError("need k1, k2 > 0 and norm_V >= 0")
    threshold = 1.0 / (4 * k1 * k2)
    load = 4 * k1 * k2 * norm_V
    if math.isclose(load, 1.0, rel_tol=4 * np.finfo(float).eps):
        load = 1.0
    if load > 1.0:
        return threshold, False, None, None
    root = math.sqrt(1.0 - load)
    W = root / (2 * k2)
    return threshold, True, W, 1.0 - root


def _check_scalar(V: CliffordField) -> None:
    if not V.is_grade(0) or np.any(V.data.imag != 0):
        raise MiuraError("V must be a real scalar-valued field")


def _check_vector(a: CliffordField, what: str = "a") -> None:
    if not a.is_grade(1) or np.any(a.data.imag != 0):
        raise MiuraError(f"{what} must be a real grade-1 field")


def _home(f: CliffordField) -> CliffordField:
    from .integral import promote

    return promote(f, witt=False)


def cauchy_datum(h: CliffordField, cache: KernelCache | None = None) -> CliffordField:
    """``F(tr h)`` through the Borel-Pompeiu identity: ``h - T(Dh)``."""
    return h - teodorescu_apply(dirac_apply(h), cache)


def _fixed_point_map(a: CliffordField, V: CliffordField, cache, offset) -> CliffordField:
    src = V + CliffordField.scalar(a.grid, a.algebra, vector_field_sq(a))
    out = teodorescu_apply(src, cache)
    return out if offset is None else out + offset


def miura_residual(
    a: CliffordField,
    V: CliffordField,
    cache: KernelCache | None = None,
    p: float | None = None,
    datum: CliffordField | None = None,
) -> tuple[float, float]:
    """``(||a - T(V + |a|^2)||_{W^1_p}, core ||Da - |a|^2 e0 - V||_2)``.

    With a ``datum`` the fixed-point residual includes its Cauchy integral.
    """
    a, V = _home(a), _home(V)
    if a.grid != V.grid:
        raise MiuraError("a and V live on different grids")
    p = p or default_exponent(a.grid.n)
    cache = cache or kernel_cache(a.grid)
    offset = None if datum is None else cauchy_datum(_home(datum), cache)
    fp = w1p_norm(a - _fixed_point_map(a, V, cache, offset), p)
    sq = CliffordField.scalar(a.grid, a.algebra, vector_field_sq(a))
    strong = core_l2(dirac_apply(a) - sq - V, CORE_LAYERS, CORE_MARGIN)
    return fp, strong


def miura_iterate(
    V: CliffordField,
    a0: CliffordField | None = None,
    cfg: MiuraConfig | None = None,
    cache: KernelCache | None = None,
    datum: CliffordField | None = None,
) -> tuple[CliffordField, ConvergenceReport]:
    """Picard iteration ``a_n = T(V + |a_{n-1}|^2)`` (plus ``F(tr datum)`` if given).

    Stops when the W^1_p difference of successive iterates drops to ``cfg.tol``,
    after ``cfg.max_iter`` steps, or when the difference grows to
    ``DIVERGENCE_FACTOR`` times its running minimum.  Divergence is reported,
    not raised.
    """
    V = _home(V)
    _check_scalar(V)
    grid = V.grid
    cfg = cfg or MiuraConfig(p=default_exponent(grid.n))
    check_exponent(cfg.p, grid.n)
    cache = cache or kernel_cache(grid)
    alg = V.algebra
    a = CliffordField.zeros(grid, alg) if a0 is None else _home(a0)
    _check_vector(a, "a0")
    offset = None
    if datum is not None:
        datum = _home(datum)
        _check_vector(datum, "datum")
        offset = cauchy_datum(datum, cache)

    estimated = cfg.k1 is None or cfg.C is None
    if estimated:
        k1, C = estimate_constants(grid, cfg.p, cfg.trials, cfg.seed, cache)
    else:
        k1, C = cfg.k1, cfg.C
    k2 = k1 * C**2
    norm_V = lp_norm(V, cfg.p)
    threshold, small, W, L = convergence_bounds(norm_V, k1, k2)
    report = ConvergenceReport(norm_V, k1, C, k2, estimated, threshold, small, W, L)

    best = math.inf
    for it in range(1, cfg.max_iter + 1):
        a_new = _fixed_point_map(a, V, cache, offset)
        if not a_new.is_grade(1):
            report.vector_pure = False
        diff = w1p_norm(a_new - a, cfg.p)
        report.iterations = it
        if report.residual_history and report.residual_history[-1] > 0:
            report.ratio_history.append(diff / report.residual_history[-1])
        report.residual_history.append(diff)
        report.norm_history.append(w1p_norm(a_new, cfg.p))
        a = a_new
        if not math.isfinite(diff):
            report.diverged = True
            break
        if diff <= cfg.tol:
            report.converged = True
            break
        best = min(best, diff)
        if diff > DIVERGENCE_FACTOR * best:
            report.diverged = True
            break

    if math.isfinite(report.residual_history[-1]):
        report.final_fp_residual, report.final_strong_residual = miura_residual(a, V, cache, cfg.p, datum)
    return a, report


def log_derivative(phi: CliffordField) -> CliffordField:
    """``D(ln phi) = phi^{-1} D phi`` for a real scalar field without zeros."""
    phi = _home(phi)
    _check_scalar(phi)
    vals = phi.scalar_part.real
    if np.any(np.abs(vals) < PHI_FLOOR):
        raise MiuraError("phi vanishes (|phi| < 1e-12) somewhere on the grid")
    return dirac_apply(phi) * (1.0 / vals)


def schrodinger_potential(phi: CliffordField) -> CliffordField:
    """``v = -Lap(phi) / phi``, the potential for which phi solves ``-Lap u - v u = 0``."""
    phi = _home(phi)
    return laplacian_apply(phi) * (-1.0 / phi.scalar_part.real)


def proposition_check(phi: CliffordField, v: CliffordField | None = None) -> float:
    """Core L2 norm of ``Da - |a|^2 - v`` for ``a = D(ln phi)``.

    ``v`` defaults to ``-Lap(phi)/phi``, making the residual a pure consistency
    check of the logarithmic-derivative correspondence.
    """
    phi = _home(phi)
    a = log_derivative(phi)
    v = schrodinger_potential(phi) if v is None else _home(v)
    sq = CliffordField.scalar(a.grid, a.algebra, vector_field_sq(a))
    return core_l2(dirac_apply(a) - sq - v, CORE_LAYERS, CORE_MARGIN)


def schrodinger_residual(phi: CliffordField, v: CliffordField) -> float:
    """Core L2 norm of ``-Lap(phi) - v phi``."""
    phi, v = _home(phi), _home(v)
    return core_l2(-laplacian_apply(phi) - v * phi.scalar_part.real, CORE_LAYERS, CORE_MARGIN)


def _edge_gradient(grid: GridSpec) -> tuple[sp.csr_matrix, list[tuple[int, np.ndarray, np.ndarray]]]:
    """Forward differences along every grid edge, stacked axis by axis."""
    N = grid.size
    ids = np.arange(N).reshape(grid.counts)
    parts, blocks = [], []
    for ax in range(grid.n):
        lo = np.take(ids, np.arange(grid.counts[ax] - 1), axis=ax).ravel()
        hi = np.take(ids, np.arange(1, grid.counts[ax]), axis=ax).ravel()
        m, h = lo.size, grid.h[ax]
        r = np.arange(m)
        vals = np.r_[np.full(m, -1 / h), np.full(m, 1 / h)]
        parts.append(sp.csr_matrix((vals, (np.r_[r, r], np.r_[lo, hi])), shape=(m, N)))
        blocks.append((ax, lo, hi))
    return sp.vstack(parts).tocsr(), blocks


def reconstruct_log_phi(a: CliffordField) -> tuple[CliffordField, float]:
    """Least-squares potential ``s`` with ``grad s ~ a`` (mean-zero gauge).

    Edge differences of ``s`` are matched to edge averages of ``a``; the normal
    equations are the pure-Neumann discrete Poisson problem.  Returns ``s`` and
    the relative least-squares residual, which stays away from zero when ``a``
    is not a gradient.
    """
    a = _home(a)
    _check_vector(a)
    grid = a.grid
    G, blocks = _edge_gradient(grid)
    comps = a.vector_components().real.reshape(grid.n, -1)
    rhs = np.concatenate([(comps[ax][lo] + comps[ax][hi]) / 2 for ax, lo, hi in blocks])
    M = (G.T @ G).tocsc()[1:, 1:]
    b = (G.T @ rhs)[1:]
    s = np.zeros(grid.size)
    s[1:] = spla.spsolve(M, b)
    s -= s.mean()
    denom = np.linalg.norm(rhs)
    resid = float(np.linalg.norm(G @ s - rhs) / denom) if denom > 0 else 0.0
    return CliffordField.scalar(grid, a.algebra, s.reshape(grid.counts)), resid
