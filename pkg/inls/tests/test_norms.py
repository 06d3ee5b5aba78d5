from fractions import Fraction
import numpy as np
import pytest
from app.errors import WeightNotIntegrable
from app.exponents import (
    derive_dual_Hs_first,
    derive_dual_Hs_second,
    derive_dual_L2,
    region_sample,
)
from app.experiments import random_field
from app.norms import (
    check_nonlinear_estimate_Hs,
    check_nonlinear_estimate_L2,
    coarsen,
    estimate_budget,
    quadrature_budget,
    simple_inequality_constant,
    spacetime_norm,
    sup_time_l2,
    weighted_lebesgue_norm,
)
from app.schemas import DualTriple, ExponentTriple, GridSpec, WeightedNormSpec
from app.solver import free_trajectory
from app.spectral import (
    ComplexField,
    Trajectory,
    gaussian,
    l2_norm,
    normalize,
    radius,
)


def pair(grid, rng, T=0.25, n_t=16):
    u0 = normalize(random_field(grid, 0.0, rng), 0.1)
    v0 = normalize(random_field(grid, 0.0, rng), 0.1)
    return free_trajectory(u0, T, n_t), free_trajectory(v0, T, n_t)


def test_unweighted_norm_is_l2(grid3d, datum):

    spec = WeightedNormSpec(r=2.0)
    assert weighted_lebesgue_norm(datum, spec) == pytest.approx(l2_norm(datum))


def test_weight_not_integrable(grid3d, datum):

    with pytest.raises(WeightNotIntegrable) as exc:
        weighted_lebesgue_norm(datum, WeightedNormSpec(r=2.0, gamma=1.5))
    assert "not integrable" in str(exc.value)
    assert exc.value.d == 3

    # Source-side weights grow at infinity and are always accepted
    spec = WeightedNormSpec(r=2.0, gamma=1.5, dual=True)
    assert weighted_lebesgue_norm(datum, spec) > 0


def test_annulus_quadrature():

    # int_{1 <= |x| <= 3} |x|^-1 dx = 16 pi in d = 3
    grid = GridSpec(dimension=3, points_per_axis=64, half_length=4.0)
    r = radius(grid)
    shell = ComplexField(grid=grid, values=((r >= 1) & (r <= 3)).astype(float))
    norm = weighted_lebesgue_norm(shell, WeightedNormSpec(r=2.0, gamma=0.5))
    assert norm**2 == pytest.approx(16 * np.pi, rel=0.02)


def test_spacetime_norm_constant(grid3d, datum):

    traj = Trajectory.constant(datum, T=2.0, n_t=8)
    spec = WeightedNormSpec(r=3.0, gamma=0.25, q=4.0)
    spatial = weighted_lebesgue_norm(datum, spec)
    assert spacetime_norm(traj, spec) == pytest.approx(2.0**0.25 * spatial)
    assert sup_time_l2(traj) == pytest.approx(l2_norm(datum))

    with pytest.raises(ValueError) as exc:
        spacetime_norm(traj, WeightedNormSpec(r=3.0))
    assert "temporal exponent" in str(exc.value)


def test_quadrature_budget():

    assert quadrature_budget(1.0, 1.3) == pytest.approx(0.1)
    assert quadrature_budget(1.0, 1.0) == 0


def test_simple_inequality_constant(grid3d, rng):

    for beta in (1 / 3, 2 / 3, 2.0):
        u = normalize(random_field(grid3d, 0.0, rng), 1.0)
        v = normalize(random_field(grid3d, 0.0, rng), 1.0)
        constant = simple_inequality_constant(u, v, beta)
        assert 0 < constant <= beta + 1

    assert simple_inequality_constant(u, u, 0.5) == 0.0


def test_nonlinear_estimate_L2(grid3d, critical, rng):

    triples = region_sample(critical, 10, rng_seed=3)
    for triple in triples:
        u, v = pair(grid3d, rng)
        dual, theta0 = derive_dual_L2(critical, triple)
        assert theta0 == 0
        lhs, rhs, holds = check_nonlinear_estimate_L2(
            u, v, critical, triple, dual, T=0.25
        )
        assert holds
        assert 0 < lhs <= rhs * (1 + 1e-6)


def test_nonlinear_estimate_L2_mesh_mismatch(grid3d, critical, rng):

    triple = region_sample(critical, 1, rng_seed=3)[0]
    dual, _ = derive_dual_L2(critical, triple)
    u, _ = pair(grid3d, rng)
    _, v = pair(grid3d, rng, n_t=8)
    with pytest.raises(ValueError) as exc:
        check_nonlinear_estimate_L2(u, v, critical, triple, dual, T=0.25)
    assert "time meshes" in str(exc.value)

    with pytest.raises(ValueError) as exc:
        check_nonlinear_estimate_L2(u, u, critical, triple, dual, T=0.5)
    assert "does not match" in str(exc.value)


def test_nonlinear_estimate_Hs(grid3d, fractional, rng):

    for triple in region_sample(fractional, 8, rng_seed=5, mode="hs"):
        u, v = pair(grid3d, rng)
        dual1, theta1 = derive_dual_Hs_first(fractional, triple)
        dual2, theta2 = derive_dual_Hs_second(fractional, triple)
        assert theta2 > theta1
        report = check_nonlinear_estimate_Hs(
            u, v, fractional, triple, dual1, dual2, T=0.25
        )
        assert report.f1_holds
        assert np.isfinite(report.f2_ratio) and report.f2_ratio > 0


def test_gaussian_weighted_norm_radial():

    # ||e^{-|x|^2/2}||_{L^2(|x|^-1)}^2 = 4 pi int r e^{-r^2} dr = 2 pi
    grid = GridSpec(dimension=3, points_per_axis=64, half_length=8.0)
    f = gaussian(grid)
    norm = weighted_lebesgue_norm(f, WeightedNormSpec(r=2.0, gamma=Fraction(1, 2)))
    assert norm**2 == pytest.approx(2 * np.pi, rel=2e-2)


def test_weighted_norm_homogeneous(grid3d, rng):

    f = random_field(grid3d, 0.0, rng)
    spec = WeightedNormSpec(r=3.0, gamma=0.5)
    scaled = f.with_values((2.0 - 1.5j) * f.values)
    assert weighted_lebesgue_norm(scaled, spec) == pytest.approx(
        2.5 * weighted_lebesgue_norm(f, spec)
    )


def test_weighted_norm_monotone_in_gamma():

    # max(|x|, h/2) <= 1 inside the unit ball and > 1 outside it
    grid = GridSpec(dimension=3, points_per_axis=32, half_length=4.0)
    r = radius(grid)
    inner = ComplexField(grid=grid, values=(r <= 1).astype(float))
    outer = ComplexField(grid=grid, values=((r > 1) & (r < 3)).astype(float))
    gammas = (0.0, 0.25, 0.5, 1.0, 1.25)
    inner_norms = [
        weighted_lebesgue_norm(inner, WeightedNormSpec(r=2.0, gamma=g))
        for g in gammas
    ]
    outer_norms = [
        weighted_lebesgue_norm(outer, WeightedNormSpec(r=2.0, gamma=g))
        for g in gammas
    ]
    assert all(a < b for a, b in zip(inner_norms, inner_norms[1:]))
    assert all(a > b for a, b in zip(outer_norms, outer_norms[1:]))


def test_coarsen(grid3d, datum):

    traj = free_trajectory(datum, 0.25, 8)
    coarse = coarsen(traj)
    assert coarse.n_t == 4
    assert coarse.T == pytest.approx(traj.T)
    assert np.array_equal(coarse.values[1], traj.values[2])
    with pytest.raises(ValueError):
        coarsen(free_trajectory(datum, 0.25, 9))


def _mass_critical_pair():
    # 1/q = 1/r = 3/10 and gamma = 0 at alpha = 1, beta = 2/3: the dual is
    # (1/2, 1/2, 1) and the L^2 estimate is an exact Hoelder identity for u = v
    triple = ExponentTriple.from_scaling(Fraction(3, 10), 0, 3)
    perturbed = DualTriple(
        inv_qt=Fraction(1, 2), inv_rt=Fraction(1, 2), gamma_t=Fraction(9, 10)
    )
    return triple, perturbed


def test_estimate_budget_constant_in_time(grid3d, critical):

    triple, _ = _mass_critical_pair()
    dual, theta0 = derive_dual_L2(critical, triple)
    assert dual == DualTriple(
        inv_qt=Fraction(1, 2), inv_rt=Fraction(1, 2), gamma_t=1
    )
    u = Trajectory.constant(gaussian(grid3d), T=0.5, n_t=8)
    budget = estimate_budget(u, u, critical, triple, dual, theta0, 0.5)
    assert budget == pytest.approx(0.0, abs=1e-12)
    lhs, rhs, holds = check_nonlinear_estimate_L2(u, u, critical, triple, dual, 0.5)
    assert holds
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_estimate_budget_matches_halved_mesh(grid3d, critical, rng):

    triple, _ = _mass_critical_pair()
    dual, theta0 = derive_dual_L2(critical, triple)
    u, v = pair(grid3d, rng)
    budget = estimate_budget(u, v, critical, triple, dual, theta0, 0.25)
    fine = check_nonlinear_estimate_L2(u, v, critical, triple, dual, 0.25)
    coarse = check_nonlinear_estimate_L2(
        coarsen(u), coarsen(v), critical, triple, dual, 0.25
    )
    expected = quadrature_budget(coarse[0], fine[0]) + quadrature_budget(
        coarse[1], fine[1]
    )
    assert budget == pytest.approx(expected)
    assert budget > 0


def test_estimate_held_by_budget(grid3d, critical):

    # Snapshots f, 0, f, 0, f: the halved mesh doubles the time integrals,
    # and the perturbed dual weight 0.5^-0.2 at the origin lifts lhs by 7%
    triple, dual = _mass_critical_pair()
    f = gaussian(grid3d, width=0.25).values
    zero = np.zeros(grid3d.shape)
    u = Trajectory(
        grid=grid3d,
        times=np.linspace(0.0, 1.0, 5),
        values=np.stack([f, zero, f, zero, f]),
    )
    lhs, rhs, holds = check_nonlinear_estimate_L2(u, u, critical, triple, dual, 1.0)
    assert lhs == pytest.approx(0.5**-0.1 * rhs, rel=1e-6)
    assert not holds

    budget = estimate_budget(u, u, critical, triple, dual, 0, 1.0)
    assert lhs - rhs < budget
    _, _, holds = check_nonlinear_estimate_L2(
        u, u, critical, triple, dual, 1.0, slack=budget
    )
    assert holds
