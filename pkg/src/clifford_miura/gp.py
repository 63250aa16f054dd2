"""Stationary Gross-Pitaevskii system with a finite-range interaction.

The system is

    (1 - alpha^2 Lap) F = |phi|^2,
    (-hbar^2/(2m) Lap + g F + V - mu) phi = 0,

and the second equation is a Schrodinger equation ``-Lap phi - v_eff phi = 0``
with ``v_eff = -(2m/hbar^2)(g F + V - mu)``.  Its logarithmic derivative solves
the Miura equation ``Da = v_eff + |a|^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import CliffordField, GridSpec, core_l2, lp_norm, read_field_csv
from .integral import KernelCache, kernel_cache, promote
from .miura import (
    CORE_LAYERS,
    CORE_MARGIN,
    ConvergenceReport,
    MiuraConfig,
    log_derivative,
    miura_iterate,
    miura_residual,
    proposition_check,
    schrodinger_residual,
)
from .operators import dirac_apply

F_RTOL = 1e-10
EULER_GAMMA = 0.57721566490153286061


class GpError(ValueError):
    pass


@dataclass
class GpConfig:
    hbar: float = 1.0
    mass: float = 1.0
    g: float = 0.0
    alpha: float = 0.0
    mu: float = 0.0
    trap: dict = field(default_factory=lambda: {"kind": "zero"})

    def __post_init__(self):
        if self.hbar <= 0 or self.mass <= 0:
            raise GpError("hbar and mass must be positive")
        if self.alpha < 0:
            raise GpError("alpha must be non-negative")
        kind = self.trap.get("kind")
        if kind == "harmonic":
            if "omega" not in self.trap:
                raise GpError("harmonic trap needs omega")
        elif kind == "sampled":
            if "file" not in self.trap:
                raise GpError("sampled trap needs a file")
        elif kind != "zero":
            raise GpError(f"unknown trap kind {kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "GpConfig":
        unknown = set(d) - {"hbar", "mass", "g", "alpha", "mu", "trap"}
        if unknown:
            raise GpError(f"unknown GpConfig fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "GpConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class GpReport:
    F_solve_residual: float
    effective_potential_field: CliffordField
    miura_report: ConvergenceReport
    proposition_residual: float
    schrodinger_residual: float
    datum_strong_residual: float
    algebraic_strong_residual: float
    F_field: CliffordField | None = None

    def to_dict(self) -> dict:
        v = self.effective_potential_field.scalar_part.real
        return {
            "F_solve_residual": self.F_solve_residual,
            "effective_potential": {"min": float(v.min()), "max": float(v.max()), "l2": lp_norm(self.effective_potential_field, 2)},
            "miura_report": self.miura_report.to_dict(),
            "proposition_residual": self.proposition_residual,
            "schrodinger_residual": self.schrodinger_residual,
            "datum_strong_residual": self.datum_strong_residual,
            "algebraic_strong_residual": self.algebraic_strong_residual,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _scalar_values(f) -> np.ndarray:
    if isinstance(f, CliffordField):
        if not f.is_grade(0):
            raise GpError("expected a scalar field")
        return f.scalar_part
    return np.asarray(f)


def _interior_laplacian(grid: GridSpec) -> sp.csr_matrix:
    """5-point (2n+1-point) Laplacian on interior nodes with zero Dirichlet data."""
    inner = [c - 2 for c in grid.counts]
    lap = None
    for ax, (m, h) in enumerate(zip(inner, grid.h)):
        d2 = sp.diags([np.ones(m - 1), -2 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2
        term = None
        for j, mj in enumerate(inner):
            piece = d2 if j == ax else sp.identity(mj)
            term = piece if term is None else sp.kron(term, piece)
        lap = term if lap is None else lap + term
    return lap.tocsr()


def helmholtz_solve_F(phi: CliffordField, alpha: float, return_residual: bool = False):
    """Solve ``(I - alpha^2 Lap_h) F = |phi|^2`` with ``F = 0`` on the boundary.

    The system is symmetric positive definite, so conjugate gradients are used
    to relative residual ``1e-10``.  ``alpha = 0`` returns ``|phi|^2`` untouched.
    """
    if alpha < 0:
        raise GpError("alpha must be non-negative")
    grid = phi.grid
    rho = np.abs(_scalar_values(phi)) ** 2
    if alpha == 0:
        F = CliffordField.scalar(grid, phi.algebra, rho)
        return (F, 0.0) if return_residual else F
    A = sp.identity(int(np.prod([c - 2 for c in grid.counts]))) - alpha**2 * _interior_laplacian(grid)
    inner = tuple(slice(1, -1) for _ in grid.counts)
    b = rho[inner].ravel()
    out = np.zeros(grid.counts)
    resid = 0.0
    bnorm = np.linalg.norm(b)
    if bnorm > 0:
        x, info = spla.cg(A, b, rtol=F_RTOL, atol=0.0, maxiter=20 * b.size)
        if info != 0:
            raise GpError(f"F-solve did not converge (cg info={info})")
        resid = float(np.linalg.norm(b - A @ x) / bnorm)
        out[inner] = x.reshape([c - 2 for c in grid.counts])
    F = CliffordField.scalar(grid, phi.algebra, out)
    return (F, resid) if return_residual else F


def trap_field(cfg: GpConfig, grid: GridSpec, alg) -> CliffordField:
    kind = cfg.trap["kind"]
    if kind == "zero":
        return CliffordField.zeros(grid, alg)
    if kind == "harmonic":
        r2 = sum(x**2 for x in grid.mesh())
        return CliffordField.scalar(grid, alg, 0.5 * cfg.mass * cfg.trap["omega"] ** 2 * r2)
    f = promote(read_field_csv(Path(cfg.trap["file"])), witt=False)
    if f.grid != grid:
        raise GpError("sampled trap lives on a different grid")
    return f


def assemble_effective_potential(F: CliffordField, trap: CliffordField, cfg: GpConfig) -> CliffordField:
    """``v_eff = -(2m/hbar^2)(g F + V - mu)``."""
    if F.grid != trap.grid:
        raise GpError("F and trap live on different grids")
    F = promote(F, witt=False)
    vals = cfg.g * _scalar_values(F) + _scalar_values(promote(trap, witt=False)) - cfg.mu
    return CliffordField.scalar(F.grid, F.algebra, (-2 * cfg.mass / cfg.hbar**2) * vals.real)


def gp_miura_pipeline(
    phi: CliffordField,
    cfg: GpConfig,
    mcfg: MiuraConfig | None = None,
    cache: KernelCache | None = None,
    trap: CliffordField | None = None,
) -> GpReport:
    """Verify a candidate condensate ``phi`` and solve the induced Miura problem.

    The Miura solver runs on ``V_fp = v_eff`` with the logarithmic derivative of
    ``phi`` as Cauchy datum; the strong residual is also evaluated in the
    algebraic form ``Da + a a - v_eff`` as a cross-check of the sign bridge.
    """
    phi = promote(phi, witt=False)
    vals = _scalar_values(phi)
    if np.any(vals.imag != 0) or np.any(vals.real <= 0):
        raise GpError("phi must be real and positive at every node")
    grid = phi.grid
    cache = cache or kernel_cache(grid)
    F, fres = helmholtz_solve_F(phi, cfg.alpha, return_residual=True)
    trap = trap_field(cfg, grid, phi.algebra) if trap is None else trap
    v_eff = assemble_effective_potential(F, trap, cfg)
    a_phi = log_derivative(phi)
    prop = proposition_check(phi, v_eff)
    schr = schrodinger_residual(phi, v_eff)
    _, datum_strong = miura_residual(a_phi, v_eff, cache, mcfg.p if mcfg else None)
    algebraic = core_l2(dirac_apply(a_phi) + a_phi * a_phi - v_eff, CORE_LAYERS, CORE_MARGIN)
    _, report = miura_iterate(v_eff, cfg=mcfg, cache=cache, datum=a_phi)
    return GpReport(fres, v_eff, report, prop, schr, datum_strong, algebraic, F)


def effective_potential_kernel(r, alpha: float, dim: int):
    """Yukawa (dim 3) or MacDonald (dim 2) effective interaction kernel."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise GpError("r must be positive")
    if alpha <= 0:
        raise GpError("alpha must be positive")
    if dim == 3:
        out = np.exp(-r / alpha) / (4 * np.pi * alpha**2 * r)
    elif dim == 2:
        out = bessel_k0(r / alpha) / (2 * np.pi * alpha**2)
    else:
        raise GpError("dim must be 2 or 3")
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


def scattering_coupling(alpha_s: float, cfg: GpConfig) -> float:
    """``g = 4 pi hbar^2 alpha_s / m``."""
    if alpha_s <= 0:
        raise GpError("scattering length must be positive")
    return 4 * math.pi * cfg.hbar**2 * alpha_s / cfg.mass


def _k0_series(z: float) -> float:
    q = z * z / 4
    term, harmonic, i0, tail = 1.0, 0.0, 1.0, 0.0
    k = 0
    while True:
        k += 1
        term *= q / (k * k)
        harmonic += 1.0 / k
        i0 += term
        tail += term * harmonic
        if term * max(harmonic, 1.0) < 1e-17 * max(abs(tail), 1.0):
            break
    return -(math.log(z / 2) + EULER_GAMMA) * i0 + tail


def _k0_integral(z: float) -> float:
    # K0(z) = int_0^inf exp(-z cosh t) dt; trapezoid is spectrally accurate here.
    t_max = math.acosh(1 + 745.0 / z)
    m = int(math.ceil(t_max / 0.02))
    t = np.linspace(0.0, t_max, m + 1)
    vals = np.exp(-z * (np.cosh(t) - 1))
    step = t[1] - t[0]
    return float(math.exp(-z) * step * (vals.sum() - 0.5 * vals[0] - 0.5 * vals[-1]))


def bessel_k0(z):
    """MacDonald function ``K_0`` for ``z > 0``.

    Power series for ``z <= 2``, trapezoid quadrature of the integral
    representation above that.
    """
    arr = np.asarray(z, dtype=float)
    if np.any(arr <= 0):
        raise GpError("K0 needs z > 0")
    out = np.array([_k0_series(v) if v <= 2 else _k0_integral(v) for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out
