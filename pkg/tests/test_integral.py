import math

import numpy as np
import pytest
from scipy import integrate

from clifford_miura.algebra import Multivector, algebra
from clifford_miura.grid import CliffordField, GridError, GridSpec, core_l2, sample_field
from clifford_miura.integral import (
    KernelCache,
    borel_pompeiu_residual,
    box_integral,
    cauchy_boundary_apply,
    cauchy_kernel,
    image_q_residual,
    kernel_cache,
    parabolic_kernel,
    right_inverse_residual,
    schrodinger_kernel,
    schrodinger_kernel_residual,
    sphere_area,
    teodorescu_apply,
)
from clifford_miura.parallel import threads


def test_sphere_areas():
    assert math.isclose(sphere_area(2), 2 * math.pi)
    assert math.isclose(sphere_area(3), 4 * math.pi)


def test_cauchy_kernel_values():
    e = cauchy_kernel([3.0, 4.0])
    assert e.allclose(Multivector.vector([-3 / (2 * math.pi * 25), -4 / (2 * math.pi * 25)]))
    with pytest.raises(ValueError):
        cauchy_kernel([0.0, 0.0])


def test_cauchy_kernel_is_monogenic_away_from_origin():
    # D e = 0 for x != 0: check by central differences at a point
    x0, h = np.array([0.7, -0.4, 0.3]), 1e-4
    total = Multivector.zero(3)
    for j in range(3):
        d = np.zeros(3)
        d[j] = h
        de = (cauchy_kernel(x0 + d) - cauchy_kernel(x0 - d)) / (2 * h)
        total = total + Multivector.basis(3, f"e{j + 1}") * de
    assert total.allclose(Multivector.zero(3), atol=1e-6)


@pytest.mark.parametrize(
    "lo,hi",
    [
        ([0.1, -0.3], [0.5, 0.2]),
        ([-0.2, -0.2], [0.3, 0.1]),  # contains the singularity
        ([0.0, 0.0], [0.4, 0.3]),  # singular corner
    ],
)
def test_box_integral_2d_matches_quadrature(lo, hi):
    got = box_integral(np.array(lo), np.array(hi))
    for m in range(2):
        ref, _ = integrate.nquad(lambda x, y: (x, y)[m] / (x * x + y * y), [[lo[0], hi[0]], [lo[1], hi[1]]], opts={"limit": 200, "points": [0.0]})
        assert math.isclose(got[m], ref, rel_tol=1e-7, abs_tol=1e-9)


def test_box_integral_3d_matches_quadrature():
    lo, hi = np.array([0.1, -0.2, 0.05]), np.array([0.4, 0.3, 0.35])
    got = box_integral(lo, hi)
    for m in range(3):
        ref, _ = integrate.nquad(
            lambda x, y, z: (x, y, z)[m] / (x * x + y * y + z * z) ** 1.5, list(zip(lo, hi)), opts={"epsabs": 1e-12}
        )
        assert math.isclose(got[m], ref, rel_tol=1e-7)


def test_box_integral_vanishes_on_symmetric_box():
    np.testing.assert_allclose(box_integral(np.array([-0.1, -0.2, -0.3]), np.array([0.1, 0.2, 0.3])), 0, atol=1e-14)


def _fields(g):
    alg = algebra(2)
    x1 = g.mesh()[0]
    zero = np.zeros(g.counts)
    return {
        "e0": CliffordField.scalar(g, alg, np.ones(g.counts)),
        "x1e1": CliffordField.vector(g, alg, [x1, zero]),
        "sin": CliffordField.vector(g, alg, [zero, np.sin(np.pi * x1)]),
    }


def test_teodorescu_is_right_inverse_on_coarse_grid():
    g = GridSpec.unit(2, 16)
    for f in _fields(g).values():
        assert right_inverse_residual(f) < 0.05


def test_teodorescu_maps_scalar_to_vector():
    g = GridSpec.unit(2, 12)
    tf = teodorescu_apply(sample_field(lambda x, y: 1 + x * y, g))
    assert tf.is_grade(1)


def test_teodorescu_of_constant_against_direct_quadrature():
    # fine midpoint quadrature of -(x-y)/(2 pi |x-y|^2) over the square, away from the grid
    g = GridSpec.unit(2, 24)
    tf = teodorescu_apply(CliffordField.scalar(g, algebra(2), np.ones(g.counts)))
    idx = (8, 15)
    x = g.points()[np.ravel_multi_index(idx, g.counts)]
    ref = -box_integral(x - 1.0, x - 0.0) / (2 * math.pi)
    np.testing.assert_allclose([tf.component("e1")[idx].real, tf.component("e2")[idx].real], ref, rtol=1e-12)


def test_cauchy_operator_reproduces_constants():
    g = GridSpec.unit(2, 32)
    one = CliffordField.scalar(g, algebra(2), np.ones(g.counts))
    core = g.core_mask(3)
    fone = cauchy_boundary_apply(one, targets=core)
    assert core_l2(fone - one * core) / core_l2(one, 3) < 0.01


def test_cauchy_operator_rejects_boundary_targets():
    g = GridSpec.unit(2, 9)
    one = CliffordField.scalar(g, algebra(2), np.ones(g.counts))
    with pytest.raises(GridError):
        cauchy_boundary_apply(one, targets=np.ones(g.counts, dtype=bool))


@pytest.mark.parametrize("name", ["e0", "x1e1", "sin"])
def test_borel_pompeiu_refinement(name):
    res = [borel_pompeiu_residual(_fields(GridSpec.unit(2, N))[name]) for N in (16, 32)]
    assert res[1] < 0.05
    assert res[0] / res[1] >= 1.5
    assert image_q_residual(_fields(GridSpec.unit(2, 32))[name]) < res[1]


def test_borel_pompeiu_3d():
    g = GridSpec.unit(3, 10)
    f = sample_field(lambda x, y, z: {"e1": x, "e2": y * z}, g)
    assert borel_pompeiu_residual(f, layers=3) < 0.1
    assert right_inverse_residual(f, layers=3) < 0.1


def test_subcell_rule_still_available():
    g = GridSpec.unit(2, 16)
    cache = KernelCache(g, quadrature="subcell")
    assert right_inverse_residual(_fields(g)["x1e1"], cache) < 0.05
    with pytest.raises(ValueError):
        KernelCache(g, quadrature="gauss")


def test_cache_round_trip(tmp_path):
    g = GridSpec.unit(2, 10)
    cache = KernelCache(g)
    cache.save(tmp_path / "k")
    back = KernelCache.load(tmp_path / "k", g)
    np.testing.assert_array_equal(back.table, cache.table)
    with pytest.raises(GridError):
        KernelCache.load(tmp_path / "k", GridSpec.unit(2, 11))


def test_kernel_cache_is_memoised():
    g = GridSpec.unit(2, 9)
    assert kernel_cache(g) is kernel_cache(g)


def test_results_independent_of_thread_count():
    g = GridSpec.box((0, 0), (1, 2), (17, 23))  # > one chunk of targets
    f = sample_field(lambda x, y: {"e0": np.cos(x * y), "e1e2": x}, g)
    with threads(1):
        a = KernelCache(g).table.copy()
        ta = teodorescu_apply(f, KernelCache(g)).data
    with threads(3):
        b = KernelCache(g).table
        tb = teodorescu_apply(f, KernelCache(g)).data
    assert np.array_equal(a, b)
    assert np.array_equal(ta, tb)


@pytest.mark.parametrize("n", [2, 3])
def test_schrodinger_kernel_solves_equation(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        assert schrodinger_kernel_residual(rng.uniform(-1, 1, n), rng.uniform(0.5, 2.0)) < 1e-4


def test_schrodinger_kernel_gating_and_value():
    assert schrodinger_kernel([0.3, 0.1], 0.0) == 0
    assert schrodinger_kernel([0.3, 0.1], -1.0) == 0
    # n = 1, x = 0, t = 1/(4 pi): 1 / sqrt(i) = exp(-i pi/4)
    assert abs(schrodinger_kernel([0.0], 1 / (4 * math.pi)) - np.exp(-1j * math.pi / 4)) < 1e-14


def test_parabolic_kernel_gating_and_form():
    x = np.array([0.2, -0.5])
    assert parabolic_kernel(x, 0.7).is_zero()
    with pytest.raises(ValueError):
        parabolic_kernel(x, 0.0)
    k = parabolic_kernel(x, -0.7)
    E = schrodinger_kernel(x, 0.7)
    assert abs(k["f+"] - 1j * E) < 1e-14
    assert abs(k["e1"] - (-1j / (2 * -0.7)) * x[0] * E) < 1e-14
