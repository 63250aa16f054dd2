"""Batch front end.

    clifford-miura run CONFIG.json [--threads N] [--output DIR]
    clifford-miura study --case NAME --levels 16,32,64 [--threads N] [--output DIR]

Exit status: 0 success, 2 invalid configuration or input, 3 solver divergence.
The default output directory comes from ``CLIFFORD_MIURA_OUTPUT`` (else ``./out``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy
import sympy

from . import __version__
from .algebra import AlgebraError, Multivector, algebra, involution
from .gp import GpConfig, GpError, bessel_k0, effective_potential_kernel, gp_miura_pipeline, helmholtz_solve_F
from .grid import CliffordField, GridError, GridSpec, read_field_csv, write_field_csv
from .integral import (
    borel_pompeiu_residual,
    image_q_residual,
    kernel_cache,
    parabolic_kernel,
    promote,
    right_inverse_residual,
    schrodinger_kernel,
    schrodinger_kernel_residual,
)
from .miura import MiuraConfig, MiuraError, default_exponent, miura_iterate, proposition_check, reconstruct_log_phi
from .operators import factorization_residual
from .parallel import threads
from .samples import manufactured_phi, random_polynomial_field, trig_field

COMMANDS = ("algebra-check", "identities", "miura-solve", "gp-run", "kernels", "convergence-study")
OUTPUT_ENV = "CLIFFORD_MIURA_OUTPUT"
EXIT_OK, EXIT_INVALID, EXIT_DIVERGED = 0, 2, 3
EXACT = 1e-12
MANIFEST_SCHEMA = 1


class ConfigError(ValueError):
    pass


INVALID = (ConfigError, GridError, MiuraError, GpError, AlgebraError, ValueError, KeyError, TypeError, OSError)


@dataclass
class RunConfig:
    command: str
    grid: GridSpec | None = None
    miura: MiuraConfig | None = None
    gp: GpConfig | None = None
    potential: dict = field(default_factory=lambda: {"kind": "zero"})
    seed: int = 0
    output_dir: str | None = None
    study: dict | None = None
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"command": self.command, "potential": self.potential, "seed": self.seed}
        if self.grid is not None:
            d["grid"] = self.grid.to_dict()
        if self.miura is not None:
            d["miura"] = self.miura.to_dict()
        if self.gp is not None:
            d["gp"] = self.gp.to_dict()
        if self.output_dir is not None:
            d["output_dir"] = self.output_dir
        if self.study is not None:
            d["study"] = self.study
        if self.options:
            d["options"] = self.options
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"command", "grid", "miura", "gp", "potential", "seed", "output_dir", "study", "options"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        command = d.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
        grid = GridSpec.from_dict(d["grid"]) if "grid" in d else None
        miura = MiuraConfig(**d["miura"]) if "miura" in d else None
        gp = GpConfig.from_dict(d["gp"]) if "gp" in d else None
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed must be an integer")
        cfg = cls(command, grid, miura, gp, d.get("potential", {"kind": "zero"}), seed, d.get("output_dir"), d.get("study"), d.get("options", {}))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        needs_grid = {"identities", "miura-solve", "gp-run"}
        if self.command in needs_grid and self.grid is None:
            raise ConfigError(f"command {self.command!r} needs a 'grid' section")
        if self.command == "gp-run":
            if self.gp is None:
                raise ConfigError("command 'gp-run' needs a 'gp' section")
            if self.potential.get("kind") != "manufactured":
                raise ConfigError("command 'gp-run' needs a manufactured potential (phi expression)")
        if self.command == "convergence-study":
            if not self.study or "case" not in self.study:
                raise ConfigError("command 'convergence-study' needs study.case")
            _levels(self.study.get("levels", [16, 32, 64]))
        kind = self.potential.get("kind")
        if kind not in ("manufactured", "sampled", "zero"):
            raise ConfigError(f"potential.kind must be manufactured, sampled or zero, got {kind!r}")
        if kind == "manufactured" and "phi" not in self.potential:
            raise ConfigError("manufactured potential needs a 'phi' expression")
        if kind == "sampled" and "file" not in self.potential:
            raise ConfigError("sampled potential needs a 'file'")


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return RunConfig.from_dict(raw)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode()).hexdigest()


def _levels(levels) -> list[int]:
    if isinstance(levels, str):
        levels = [int(s) for s in levels.split(",") if s.strip()]
    levels = [int(v) for v in levels]
    if len(levels) < 2:
        raise ConfigError("a convergence study needs at least two levels")
    return levels


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Outputs:
    """Collects written artifacts so the manifest can list their digests."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _record(self, path: Path) -> None:
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def json(self, name: str, obj) -> None:
        path = self.root / name
        path.write_text(_dump(obj))
        self._record(path)

    def text(self, name: str, text: str) -> None:
        path = self.root / name
        path.write_text(text)
        self._record(path)

    def field(self, name: str, f: CliffordField) -> None:
        path = write_field_csv(f, self.root / name)
        self._record(path)
        self._record(path.with_suffix(".json"))


def manifest(cfg: RunConfig, out: Outputs, status: int) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "tool": "clifford-miura",
        "version": __version__,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "exit_status": status,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "sympy": sympy.__version__,
        },
        "outputs": dict(sorted(out.files.items())),
    }


# --- commands ----------------------------------------------------------------


def _algebra_check(cfg: RunConfig, out: Outputs) -> int:
    n = int(cfg.options.get("n", 3))
    trials = int(cfg.options.get("trials", 1000))
    rng = np.random.default_rng(cfg.seed)
    report = {"n": n, "trials": trials, "seed": cfg.seed}
    for witt in (False, True):
        alg = algebra(n, witt)

        def rand():
            return Multivector(alg, rng.normal(size=alg.dim) + 1j * rng.normal(size=alg.dim))

        assoc = conj = 0.0
        for _ in range(trials):
            u, v, w = rand(), rand(), rand()
            assoc = max(assoc, float(np.max(np.abs(((u * v) * w - u * (v * w)).data))))
            lhs = involution(u * v, "conjugation")
            rhs = involution(v, "conjugation") * involution(u, "conjugation")
            conj = max(conj, float(np.max(np.abs((lhs - rhs).data))))
        gen = 0.0
        one = Multivector.scalar(n, 1.0, witt)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                ei, ej = Multivector.basis(n, f"e{i}", witt), Multivector.basis(n, f"e{j}", witt)
                target = -2 * one if i == j else Multivector.zero(n, witt)
                gen = max(gen, float(np.max(np.abs((ei * ej + ej * ei - target).data))))
        entry = {"associativity": assoc, "conjugation_composition": conj, "generator_relations": gen}
        if witt:
            f, fp = Multivector.basis(n, "f", True), Multivector.basis(n, "f+", True)
            witt_err = max(
                float(np.max(np.abs(x.data)))
                for x in [f * f, fp * fp, f * fp + fp * f - one]
                + [f * Multivector.basis(n, f"e{j}", True) + Multivector.basis(n, f"e{j}", True) * f for j in range(1, n + 1)]
            )
            entry["witt_relations"] = witt_err
        entry["passed"] = all(v <= EXACT for v in entry.values())
        report["witt" if witt else "plain"] = entry
    out.json("algebra_report.json", report)
    return EXIT_OK


def _identity_inputs(cfg: RunConfig):
    grid = cfg.grid
    rng = np.random.default_rng(cfg.seed)
    n = grid.n
    alg = algebra(n)
    a_const = CliffordField.vector(grid, alg, [np.full(grid.counts, c) for c in rng.normal(size=n)])
    cases = {
        "laplace": ({}, alg),
        "helmholtz": ({"k": 1.3}, alg),
        "miura": ({"a": a_const}, alg),
    }
    if n >= 2:
        cases["cauchy_riemann"] = ({}, algebra(n - 1))
        cases["parabolic"] = ({"sign": +1, "variant": "schrodinger"}, algebra(n - 1, True))
    return rng, cases


def _identities(cfg: RunConfig, out: Outputs) -> int:
    rng, cases = _identity_inputs(cfg)
    grid = cfg.grid
    report = {}
    for case, (params, alg) in cases.items():
        if case == "miura" and alg.n != grid.n:
            continue
        u = random_polynomial_field(grid, alg, rng, complex_coeffs=True)
        report[case] = {
            "polynomial_residual": factorization_residual(case, u, **params),
            "trig_residual": factorization_residual(case, trig_field(grid, alg), **params),
        }
    out.json("identities_report.json", report)
    return EXIT_OK


def _load_scalar(path: str, grid: GridSpec) -> CliffordField:
    f = promote(read_field_csv(path), witt=False)
    if f.grid != grid:
        raise ConfigError(f"{path}: field grid does not match the config grid")
    return f


def _miura_solve(cfg: RunConfig, out: Outputs) -> int:
    grid = cfg.grid
    alg = algebra(grid.n)
    mcfg = cfg.miura or MiuraConfig(p=default_exponent(grid.n), seed=cfg.seed)
    kind = cfg.potential["kind"]
    datum = None
    exact = None
    if kind == "zero":
        V = CliffordField.zeros(grid, alg)
    elif kind == "sampled":
        V = _load_scalar(cfg.potential["file"], grid)
    else:
        mp = manufactured_phi(cfg.potential["phi"], grid.n)
        _, V, exact = mp.fields(grid, alg)
        if cfg.potential.get("datum", "log_derivative") == "log_derivative":
            datum = exact
    a, report = miura_iterate(V, cfg=mcfg, cache=kernel_cache(grid), datum=datum)
    rep = report.to_dict()
    if exact is not None:
        from .grid import w1p_norm

        rep["manufactured_relative_error"] = w1p_norm(a - exact, mcfg.p) / w1p_norm(exact, mcfg.p)
    out.field("a.csv", a)
    out.field("V.csv", V)
    out.json("miura_report.json", rep)
    return EXIT_DIVERGED if report.diverged else EXIT_OK


def _gp_run(cfg: RunConfig, out: Outputs) -> int:
    grid = cfg.grid
    alg = algebra(grid.n)
    phi, _, _ = manufactured_phi(cfg.potential["phi"], grid.n).fields(grid, alg)
    mcfg = cfg.miura or MiuraConfig(p=default_exponent(grid.n), seed=cfg.seed)
    rep = gp_miura_pipeline(phi, cfg.gp, mcfg, kernel_cache(grid))
    out.field("F.csv", rep.F_field)
    out.field("v_eff.csv", rep.effective_potential_field)
    out.json("gp_report.json", rep.to_dict())
    return EXIT_DIVERGED if rep.miura_report.diverged else EXIT_OK


def _kernels(cfg: RunConfig, out: Outputs) -> int:
    rng = np.random.default_rng(cfg.seed)
    report: dict = {"schrodinger": {}, "parabolic": {}}
    for n in (2, 3):
        probes = [(rng.uniform(-1, 1, n), float(rng.uniform(0.5, 2.0))) for _ in range(5)]
        report["schrodinger"][str(n)] = {
            "fd_residuals": [schrodinger_kernel_residual(x, t) for x, t in probes],
            "gated_zero": all(schrodinger_kernel(x, -t) == 0 for x, t in probes),
        }
        report["parabolic"][str(n)] = {
            "gated_zero": all(not np.any(parabolic_kernel(x, t).data) for x, t in probes),
            "sample": parabolic_kernel(probes[0][0], -probes[0][1]).to_dict(),
        }
    alpha = float(cfg.options.get("alpha", 1.0))
    report["effective_potential"] = {
        "alpha": alpha,
        "yukawa_at_alpha": effective_potential_kernel(alpha, alpha, 3),
        "macdonald_at_alpha": effective_potential_kernel(alpha, alpha, 2),
        "K0(1)": bessel_k0(1.0),
    }
    out.json("kernels_report.json", report)
    return EXIT_OK


# --- convergence studies -----------------------------------------------------


def _unit(n: int, N: int) -> GridSpec:
    return GridSpec.unit(n, N)


def _study_integral(fn: Callable, which: str) -> Callable[[int], float]:
    def run(N: int) -> float:
        g = _unit(2, N)
        alg = algebra(2)
        x1 = g.mesh()[0]
        f = {
            "e0": CliffordField.scalar(g, alg, np.ones(g.counts)),
            "x1e1": CliffordField.vector(g, alg, [x1, np.zeros(g.counts)]),
            "sin": CliffordField.vector(g, alg, [np.zeros(g.counts), np.sin(np.pi * x1)]),
        }[which]
        return fn(f, kernel_cache(g))

    return run


def _study_factorization(case: str, poly: bool) -> Callable[[int], float]:
    def run(N: int) -> float:
        g = _unit(2, N)
        alg = algebra(2)
        params = {}
        if case == "helmholtz":
            params = {"k": 1.3}
        elif case == "miura":
            a = CliffordField.vector(g, alg, [np.full(g.counts, 0.4), np.full(g.counts, -0.7)])
            if not poly:
                x, y = g.mesh()
                a = CliffordField.vector(g, alg, [0.3 * np.sin(x + y), 0.2 * np.cos(x * y)])
            params = {"a": a}
        if poly:
            u = random_polynomial_field(g, alg, np.random.default_rng(0), complex_coeffs=True)
        else:
            u = trig_field(g, alg)
            if case == "miura":
                u = u.grade(0)
        return factorization_residual(case, u, **params)

    return run


def _study_proposition(text: str) -> Callable[[int], float]:
    def run(N: int) -> float:
        g = _unit(2, N)
        phi, _, _ = manufactured_phi(text, 2).fields(g, algebra(2))
        return proposition_check(phi)

    return run


def _study_reconstruct(text: str) -> Callable[[int], float]:
    def run(N: int) -> float:
        g = _unit(2, N)
        phi, _, a = manufactured_phi(text, 2).fields(g, algebra(2))
        s, _ = reconstruct_log_phi(a)
        exact = np.log(phi.scalar_part.real)
        exact = exact - exact.mean()
        return float(np.sqrt(np.sum(g.weights() * (s.scalar_part.real - exact) ** 2)))

    return run


def _study_helmholtz_F(alpha: float = 0.3) -> Callable[[int], float]:
    def run(N: int) -> float:
        g = _unit(2, N)
        x, y = g.mesh()
        Fs = np.sin(np.pi * x) * np.sin(np.pi * y)
        phi = CliffordField.scalar(g, algebra(2), np.sqrt((1 + 2 * alpha**2 * np.pi**2) * np.clip(Fs, 0, None)))
        F = helmholtz_solve_F(phi, alpha)
        return float(np.sqrt(np.sum(g.weights() * (F.scalar_part.real - Fs) ** 2)))

    return run


STUDIES: dict[str, Callable[[int], float]] = {
    "laplace_quadratic": _study_factorization("laplace", True),
    "laplace_trig": _study_factorization("laplace", False),
    "helmholtz_trig": _study_factorization("helmholtz", False),
    "miura_trig": _study_factorization("miura", False),
    "borel_pompeiu": _study_integral(borel_pompeiu_residual, "x1e1"),
    "borel_pompeiu_e0": _study_integral(borel_pompeiu_residual, "e0"),
    "borel_pompeiu_sin": _study_integral(borel_pompeiu_residual, "sin"),
    "right_inverse": _study_integral(right_inverse_residual, "x1e1"),
    "image_q": _study_integral(image_q_residual, "x1e1"),
    "proposition": _study_proposition("exp(0.1*x1*x2)"),
    "reconstruct": _study_reconstruct("exp(0.1*x1*x2)"),
    "helmholtz_F": _study_helmholtz_F(),
}


def convergence_study(case: str, levels) -> list[dict]:
    """Residual per level plus the observed order ``log2(r_k / r_{k+1})``.

    The order column reads ``"exact"`` when both residuals are at roundoff.
    """
    if case not in STUDIES:
        raise ConfigError(f"unknown study case {case!r}; choose from {sorted(STUDIES)}")
    levels = _levels(levels)
    rows = []
    prev = None
    for N in levels:
        r = STUDIES[case](N)
        order: float | str | None = None
        if prev is not None:
            if prev <= EXACT and r <= EXACT:
                order = "exact"
            elif r > 0 and prev > 0:
                order = math.log2(prev / r)
        rows.append({"level": N, "h": 1.0 / (N - 1), "residual": r, "order": order})
        prev = r
    return rows


def _study_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "h", "residual", "order"])
    for r in rows:
        order = "" if r["order"] is None else (r["order"] if isinstance(r["order"], str) else repr(r["order"]))
        w.writerow([r["level"], repr(r["h"]), repr(r["residual"]), order])
    return buf.getvalue()


def _convergence_study(cfg: RunConfig, out: Outputs) -> int:
    rows = convergence_study(cfg.study["case"], cfg.study.get("levels", [16, 32, 64]))
    out.text("study.csv", _study_csv(rows))
    out.json("study.json", {"case": cfg.study["case"], "rows": rows})
    return EXIT_OK


RUNNERS = {
    "algebra-check": _algebra_check,
    "identities": _identities,
    "miura-solve": _miura_solve,
    "gp-run": _gp_run,
    "kernels": _kernels,
    "convergence-study": _convergence_study,
}


def execute(cfg: RunConfig, output: str | Path | None = None, n_threads: int = 1) -> int:
    root = Path(output or cfg.output_dir or os.environ.get(OUTPUT_ENV, "out"))
    out = Outputs(root)
    with threads(n_threads):
        status = RUNNERS[cfg.command](cfg, out)
    (root / "manifest.json").write_text(_dump(manifest(cfg, out, status)))
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clifford-miura", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="execute a JSON run configuration")
    run.add_argument("config")
    study = sub.add_parser("study", help="refinement study of a named residual")
    study.add_argument("--case", required=True, choices=sorted(STUDIES))
    study.add_argument("--levels", default="16,32,64")
    study.add_argument("--seed", type=int, default=0)
    for sp_ in (run, study):
        sp_.add_argument("--threads", type=int, default=1)
        sp_.add_argument("--output", default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        if args.cmd == "run":
            cfg = load_config(args.config)
        else:
            cfg = RunConfig("convergence-study", seed=args.seed, study={"case": args.case, "levels": _levels(args.levels)})
            cfg.validate()
        status = execute(cfg, args.output, args.threads)
    except INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if status == EXIT_DIVERGED:
        print("solver diverged; see the report", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
