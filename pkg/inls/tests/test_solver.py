import numpy as np
import pytest
from app.errors import BlowUp, NoConvergence, NotCauchy
from app.experiments import mass_drift, random_field, scaling_residual_ratio
from app.exponents import region_sample
from app.norms import spacetime_norm
from app.schemas import GridSpec, PicardConfig, WeightedNormSpec
from app.solver import (
    apply_nonlinearity,
    contraction_ratio,
    dependence_ratio,
    duhamel_map,
    duhamel_residual,
    family_datum,
    free_spacetime_norm,
    free_trajectory,
    lifespan_estimate,
    picard_extend,
    picard_solve,
    rescale_trajectory,
    scaled_datum,
    scattering_state,
    splitstep_order,
    splitstep_solve,
    trajectory_distance,
)
from app.spectral import (
    ComplexField,
    Trajectory,
    clamped_radius,
    free_propagate,
    gaussian,
    l2_norm,
    normalize,
)


def test_free_trajectory(datum):

    traj = free_trajectory(datum, T=0.5, n_t=8)
    assert traj.times[-1] == pytest.approx(0.5)
    for k in (0, 3, 8):
        expected = free_propagate(datum, traj.times[k])
        assert np.allclose(traj.snapshot(k).values, expected.values, atol=1e-14)


def test_free_spacetime_norm(datum):

    spec = WeightedNormSpec(q=4.0, r=3.0, gamma=0.5)
    value = free_spacetime_norm(datum, spec, T=0.5, n_t=8)
    assert value > 0
    assert value == pytest.approx(
        spacetime_norm(free_trajectory(datum, 0.5, 8), spec)
    )


def test_linear_picard_is_free(datum, critical):

    config = PicardConfig(T=0.25, n_t=16, linear=True)
    traj, iterations, increments = picard_solve(datum, critical, config)
    assert iterations == 1
    assert increments[0] < 1e-14
    assert np.allclose(
        traj.values, free_trajectory(datum, 0.25, 16).values, atol=1e-14
    )


def test_picard_reference_run(datum, critical):

    config = PicardConfig(T=0.25, n_t=16)
    traj, iterations, increments = picard_solve(datum, critical, config)
    assert increments[-1] < config.tol
    assert iterations > 1
    assert mass_drift(traj) < 1e-6
    assert duhamel_residual(traj, datum, critical, config) < 1e-8

    # Increments contract geometrically
    ratios = [b / a for a, b in zip(increments, increments[1:]) if b > 1e-8]
    assert max(ratios) <= 0.6


def test_picard_failures(datum, critical):

    config = PicardConfig(T=0.25, n_t=16, max_iter=2, tol=1e-30)
    with pytest.raises(NoConvergence) as exc:
        picard_solve(datum, critical, config)
    assert exc.value.iterations == 2
    assert len(exc.value.increments) == 2

    # Leaving the ball of radius M_bound stops the iteration
    config = PicardConfig(T=0.25, n_t=16, M_bound=1e-3)
    with pytest.raises(NoConvergence) as exc:
        picard_solve(datum, critical, config)
    assert exc.value.iterations == 1

    config = PicardConfig(T=0.25, n_t=16, blowup_factor=0.5)
    with pytest.raises(BlowUp):
        picard_solve(datum, critical, config)


def test_duhamel_map_grid_mismatch(datum, critical):

    other = GridSpec(dimension=3, points_per_axis=8, half_length=8.0)
    traj = free_trajectory(normalize(gaussian(other), 0.1), 0.25, 8)
    with pytest.raises(ValueError) as exc:
        duhamel_map(traj, datum, critical, PicardConfig(T=0.25, n_t=8))
    assert "different grids" in str(exc.value)


def test_splitstep_mass_and_cross_method(datum, critical):

    split = splitstep_solve(datum, critical, dt=0.25 / 32, T=0.25)
    assert len(split.times) == 33
    assert mass_drift(split) < 1e-12

    picard, _, _ = picard_solve(datum, critical, PicardConfig(T=0.25, n_t=32))
    assert trajectory_distance(picard, split) < 1e-4


def test_splitstep_validation(datum, critical):

    with pytest.raises(ValueError) as exc:
        splitstep_solve(datum, critical, dt=0.3, T=1.0)
    assert "does not divide" in str(exc.value)
    with pytest.raises(ValueError):
        splitstep_solve(datum, critical, dt=0.25, T=1.0, save_every=3)
    with pytest.raises(ValueError):
        splitstep_solve(datum, critical, dt=-0.1, T=1.0)


def test_splitstep_save_every(datum, critical):

    traj = splitstep_solve(datum, critical, dt=0.125, T=1.0, save_every=2)
    assert len(traj.times) == 5
    assert traj.dt == pytest.approx(0.25)


def test_splitstep_linear(datum, critical):

    traj = splitstep_solve(datum, critical, dt=0.125, T=1.0, linear=True)
    expected = free_propagate(datum, 1.0)
    assert np.allclose(traj.final.values, expected.values, atol=1e-12)


def test_splitstep_blowup(datum, critical):

    with pytest.raises(BlowUp) as exc:
        splitstep_solve(datum, critical, dt=0.125, T=1.0, blowup_factor=0.5)
    assert exc.value.step == 1


def test_splitstep_time_reversal(datum, critical):

    # Stepping conj(u(T)) forward by T returns conj(u0)
    T = 0.5
    forward = splitstep_solve(datum, critical, dt=T / 16, T=T)
    back = splitstep_solve(
        forward.final.with_values(np.conj(forward.final.values)),
        critical,
        dt=T / 16,
        T=T,
    )
    assert np.allclose(back.final.values, np.conj(datum.values), atol=1e-10)


def test_scaling_residual_ratio(datum, subcritical):

    config = PicardConfig(T=0.25, n_t=16)
    base, rescaled, expected = scaling_residual_ratio(subcritical, datum, config)
    assert expected == pytest.approx(2.0**1.5)
    assert 0 < base < 1e-8
    assert rescaled < 5.0 * base
    assert rescaled == pytest.approx(expected * base, rel=1e-2)


def test_rescale_trajectory(datum):

    traj = free_trajectory(datum, 0.25, 8)
    scaled = rescale_trajectory(traj, 2.0, 1.0, 2.0 / 3.0)
    assert scaled.grid.half_length == pytest.approx(datum.grid.half_length / 2)
    assert np.allclose(scaled.times, traj.times / 4)
    assert np.allclose(scaled.values, 2.0**1.5 * traj.values)
    with pytest.raises(ValueError):
        rescale_trajectory(traj, 0.0, 1.0, 2.0 / 3.0)


def test_picard_extend(datum, critical):

    config = PicardConfig(T=0.125, n_t=8)
    traj, iterations, increments = picard_extend(datum, critical, config, windows=2)
    assert traj.values.shape == (17,) + datum.grid.shape
    assert traj.T == pytest.approx(0.25)
    assert np.allclose(traj.initial.values, datum.values)
    assert len(iterations) == len(increments) == 2
    assert all(window[-1] < config.tol for window in increments)

    # The second window starts from the end of the first
    first, _, _ = picard_solve(datum, critical, config)
    assert np.allclose(traj.snapshot(8).values, first.final.values)
    with pytest.raises(ValueError):
        picard_extend(datum, critical, config, windows=0)


def test_contraction_ratio(datum, critical):

    triple = region_sample(critical, 1, rng_seed=1)[0]
    config = PicardConfig(T=0.25, n_t=16)
    u = free_trajectory(datum, 0.25, 16)
    v = free_trajectory(datum.with_values(1.1 * datum.values), 0.25, 16)
    ratio = contraction_ratio(u, v, datum, critical, config, triple)
    assert 0 < ratio < 1

    with pytest.raises(ValueError) as exc:
        contraction_ratio(u, u, datum, critical, config, triple)
    assert "distinct" in str(exc.value)


def test_dependence_ratio(datum, critical):

    config = PicardConfig(T=0.25, n_t=16)
    v0 = datum.with_values(1.1 * datum.values)
    ratio = dependence_ratio(datum, v0, critical, config)
    assert 0.5 < ratio < 2.0
    with pytest.raises(ValueError):
        dependence_ratio(datum, datum, critical, config)


def test_lifespan_estimate(datum, critical, subcritical):

    config = PicardConfig(T=1.0, n_t=16)
    with pytest.raises(ValueError) as exc:
        lifespan_estimate(1.0, datum, critical, config)
    assert "theta0 > 0" in str(exc.value)

    small = lifespan_estimate(1e-3, datum, subcritical, config, T_max=1.0)
    assert small == 1.0

    config = PicardConfig(T=1.0, n_t=16, max_iter=16, M_bound=0.2)
    large = lifespan_estimate(
        1e4, datum, subcritical, config, T_max=1.0, bisections=6
    )
    assert 1e-6 <= large < 1.0

    with pytest.raises(ValueError):
        lifespan_estimate(1.0, datum, subcritical, config, family="dilation")


def test_lifespan_scaling_law(datum, subcritical):

    # T* ~ c^(-beta/theta0) = c^(-4/3) along the scaling family
    config = PicardConfig(T=1.0, n_t=8, M_bound=0.2)
    spans = [
        lifespan_estimate(c, datum, subcritical, config, T_min=1e-6, T_max=1e8)
        for c in (1.0, 4.0)
    ]
    assert 1e-6 < spans[1] < spans[0] < 1e8
    slope = np.log(spans[1] / spans[0]) / np.log(4.0)
    assert abs(slope + 4 / 3) <= 0.15 * 4 / 3


def test_scaled_datum(datum, subcritical, critical):

    scaled = scaled_datum(datum, 4.0, subcritical)
    lam = 4.0 ** (2 / 3)
    assert l2_norm(scaled) == pytest.approx(4.0 * l2_norm(datum))
    assert scaled.grid.half_length == pytest.approx(datum.grid.half_length / lam)
    assert np.allclose(scaled.values, lam**3 * datum.values)

    amplitude = family_datum(datum, 4.0, subcritical, "amplitude")
    assert amplitude.grid == datum.grid
    assert l2_norm(amplitude) == pytest.approx(4.0 * l2_norm(datum))

    with pytest.raises(ValueError) as exc:
        scaled_datum(datum, 4.0, critical)
    assert "s_c < 0" in str(exc.value)
    with pytest.raises(ValueError):
        scaled_datum(datum, 0.0, subcritical)


def _profile_trajectory(u0, w, coefficients):
    times = np.linspace(0.0, 1.0, len(coefficients))
    values = [
        free_propagate(u0.with_values(u0.values + c * w.values), t).values
        for t, c in zip(times, coefficients)
    ]
    return Trajectory(grid=u0.grid, times=times, values=np.stack(values))


def test_scattering_state(datum, critical, rng):

    w = normalize(
        ComplexField(grid=datum.grid, values=rng.standard_normal(datum.grid.shape)),
        1.0,
    )
    coefficients = [1 - 2.0**-k for k in range(9)]
    traj = _profile_trajectory(datum, w, coefficients)
    profile, increments = scattering_state(traj, critical)
    assert len(increments) == 8
    assert increments[-1] == pytest.approx(2.0**-8, rel=1e-8)
    expected = datum.values + coefficients[-1] * w.values
    assert np.allclose(profile.values, expected, atol=1e-12)

    traj = _profile_trajectory(datum, w, [k**2 / 64 for k in range(9)])
    with pytest.raises(NotCauchy) as exc:
        scattering_state(traj, critical)
    assert len(exc.value.increments) == 8


def test_nonlinearity_at_origin(grid3d, critical):

    # The weight is clamped to (h/2)^-alpha on the origin node
    u = ComplexField(grid=grid3d, values=np.full(grid3d.shape, 0.5 + 0j))
    F = apply_nonlinearity(u, critical)
    origin = (grid3d.points_per_axis // 2,) * 3
    expected = (grid3d.spacing / 2) ** -1 * 0.5 ** (2 / 3) * 0.5
    assert F.values[origin] == pytest.approx(expected)


def test_nonlinearity_gauge_and_modulus(grid3d, critical, rng):

    shape = grid3d.shape
    u = ComplexField(
        grid=grid3d,
        values=rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
    )
    phase = np.exp(1.3j)
    F = apply_nonlinearity(u, critical)
    rotated = apply_nonlinearity(u.with_values(phase * u.values), critical)
    assert np.allclose(rotated.values, phase * F.values, atol=1e-13)

    # |F(u)| = w |u|^(beta+1) with the clamped weight w
    weight = clamped_radius(grid3d) ** -1.0
    assert np.allclose(
        np.abs(F.values), weight * np.abs(u.values) ** (5 / 3), rtol=1e-12
    )


def test_gauge_covariance(datum, critical):

    phase = np.exp(0.7j)
    rotated = datum.with_values(phase * datum.values)

    config = PicardConfig(T=0.25, n_t=16)
    picard, _, _ = picard_solve(datum, critical, config)
    picard_rotated, _, _ = picard_solve(rotated, critical, config)
    assert np.allclose(picard_rotated.values, phase * picard.values, atol=1e-10)

    split = splitstep_solve(datum, critical, dt=0.25 / 16, T=0.25)
    split_rotated = splitstep_solve(rotated, critical, dt=0.25 / 16, T=0.25)
    assert np.allclose(split_rotated.values, phase * split.values, atol=1e-13)


def test_splitstep_second_order(datum, critical):

    order = splitstep_order(datum, critical, dt=0.25 / 16, T=0.25)
    assert order >= 1.9

    with pytest.raises(ValueError):
        splitstep_order(datum, critical, dt=0.3, T=1.0)


def test_contraction_ratio_random_pairs(datum, critical):

    triple = region_sample(critical, 1, rng_seed=1)[0]
    config = PicardConfig(T=0.25, n_t=16)
    ratios = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        u0 = normalize(random_field(datum.grid, 0.0, rng), 0.1)
        v0 = normalize(random_field(datum.grid, 0.0, rng), 0.1)
        u = free_trajectory(u0, 0.25, 16)
        v = free_trajectory(v0, 0.25, 16)
        ratios.append(contraction_ratio(u, v, datum, critical, config, triple))
    assert sum(r < 1 for r in ratios) >= 0.95 * len(ratios)
