from fractions import Fraction
import numpy as np
import pytest
from app.exponents import check_classical, check_prop1
from app.experiments import (
    admissible_triple,
    classical_triple,
    cmd_admissible,
    cmd_lifespan,
    cmd_scatter,
    cmd_solve,
    cmd_strichartz,
    cmd_verify,
    concentrating_field,
    default_strichartz_triples,
    divergence_spec,
    fit_slope,
    observed_ratio,
    random_field,
    write_outputs,
)
from app.schemas import (
    AdmissibleConfig,
    GridSpec,
    LifespanConfig,
    ScatterConfig,
    SolveConfig,
    StrichartzConfig,
    VerifyConfig,
)
from app.spectral import sobolev_norm
from app.utils import dumps, read_csv

SMALL_GRID = dict(points=16, half_length=8.0)


# Ensembles


def test_random_field_normalized(grid3d, rng):

    for s in (0.0, 0.1, 0.25):
        f = random_field(grid3d, s, rng)
        assert sobolev_norm(f, s) == pytest.approx(1.0)
        assert f.values.shape == grid3d.shape


def test_random_field_refines(grid3d):

    fine = GridSpec(dimension=3, points_per_axis=32, half_length=8.0)
    coarse_field = random_field(grid3d, 0.0, np.random.default_rng(3))
    fine_field = random_field(fine, 0.0, np.random.default_rng(3), bandwidth=16)
    assert np.allclose(
        fine_field.values[::2, ::2, ::2], coarse_field.values, atol=1e-12
    )


def test_random_field_bandwidth(grid3d, rng):

    with pytest.raises(ValueError) as exc:
        random_field(grid3d, 0.0, rng, bandwidth=32)
    assert "exceeds" in str(exc.value)


def test_default_triples():

    labels = [label for label, _ in default_strichartz_triples(3, 0)]
    assert labels == ["gamma_1_4", "gamma_2_4", "gamma_3_4", "classical"]

    s = Fraction(1, 10)
    triples = default_strichartz_triples(3, s)
    assert len(triples) == 3
    for _, triple in triples:
        assert check_prop1(triple, s, 3)

    classical = classical_triple(3)
    assert check_classical(classical.inv_q, classical.inv_r, 3)
    assert classical.gamma == 0

    with pytest.raises(ValueError):
        admissible_triple(3, 0, Fraction(3, 2))


def test_divergence_datum(grid3d):

    spec = divergence_spec(Fraction(1, 10))
    assert spec.gamma == pytest.approx(1.3)
    assert spec.q == spec.r == 2.0
    assert divergence_spec(0, 2).gamma == 2.0

    f = concentrating_field(grid3d, 0.25)
    assert sobolev_norm(f, 0.25) == pytest.approx(1.0)
    assert np.argmax(np.abs(f.values)) == np.ravel_multi_index(
        (8, 8, 8), grid3d.shape
    )


def test_observed_ratio_and_slope():

    assert observed_ratio([1.0, 0.5, 0.1, 1e-12], floor=1e-9) == pytest.approx(0.5)
    assert observed_ratio([1.0], floor=1e-9) == 0.0
    assert fit_slope([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)


# admissible


def test_cmd_admissible_l2():

    output = cmd_admissible(AdmissibleConfig(n=50, seed=1))
    report = output.report
    assert report.passed, report.verdict
    assert report.measurements["samples"] == 50
    assert report.measurements["dual_failures"] == 0
    assert report.measurements["theta0"] == 0
    assert report.records == []
    assert len(output.tables["triples.csv"].rows) == 50


def test_cmd_admissible_hs():

    config = AdmissibleConfig(
        mode="hs",
        alpha=Fraction(3, 2),
        beta=Fraction(5, 14),
        s=Fraction(1, 10),
        n=20,
    )
    report = cmd_admissible(config).report
    assert report.passed, report.verdict
    assert report.measurements["theta1"] == 0
    assert report.verdict["l2_excess_criterion"]
    assert "l2_excess_window" in report.measurements


def test_cmd_admissible_outside_window():

    with pytest.raises(ValueError):
        cmd_admissible(AdmissibleConfig(beta=1, n=5))


def test_cmd_admissible_deterministic():

    config = AdmissibleConfig(n=30, seed=9)
    first = cmd_admissible(config).report
    second = cmd_admissible(config.copy(update={"workers": 3})).report
    exclude = {"runtime_ms", "config"}
    assert dumps(first.dict(exclude=exclude)) == dumps(second.dict(exclude=exclude))
    changed = {
        key
        for key, value in first.config.items()
        if second.config[key] != value
    }
    assert changed == {"workers"}


def test_cmd_admissible_ten_thousand():

    report = cmd_admissible(AdmissibleConfig(n=10000, seed=2024)).report
    assert report.passed, report.verdict
    assert report.measurements["dual_failures"] == 0


# solve


def test_cmd_solve():

    output = cmd_solve(SolveConfig(**SMALL_GRID, dump=True))
    report = output.report
    assert report.passed, report.verdict
    assert set(report.verdict) == {
        "picard_converged",
        "picard_mass",
        "picard_geometric",
        "splitstep_finite",
        "splitstep_mass",
        "splitstep_order",
        "cross_method",
    }
    assert report.measurements["cross_method_distance"] < 1e-4
    assert report.measurements["splitstep_order"] >= 1.9
    rows = output.tables["increments.csv"].rows
    assert {row["window"] for row in rows} == {0}
    assert [row["iteration"] for row in rows] == list(range(1, len(rows) + 1))
    assert output.trajectory is not None
    assert len(output.tables["mass.csv"].rows) == 2 * 33


def test_cmd_solve_windows():

    output = cmd_solve(SolveConfig(**SMALL_GRID, windows=2))
    report = output.report
    assert report.passed, report.verdict
    rows = output.tables["increments.csv"].rows
    assert {row["window"] for row in rows} == {0, 1}
    assert report.measurements["picard_iterations"] == len(rows)
    # Both methods cover [0, 2T]
    assert len(output.tables["mass.csv"].rows) == 2 * 65


def test_cmd_solve_reference():

    report = cmd_solve(SolveConfig()).report
    assert report.passed, report.verdict
    assert report.verdict["cross_method"]
    assert report.measurements["splitstep_order"] >= 1.9


def test_cmd_solve_blowup_recorded():

    output = cmd_solve(SolveConfig(**SMALL_GRID, blowup_factor=0.5))
    report = output.report
    assert set(report.failures) == {"picard", "splitstep"}
    assert report.failures["picard"]["error"] == "BlowUp"
    assert not report.verdict["picard_converged"]
    assert "cross_method_distance" not in report.measurements


def test_cmd_solve_single_method():

    output = cmd_solve(SolveConfig(**SMALL_GRID, method="splitstep"))
    assert "picard_converged" not in output.report.verdict
    assert output.tables["increments.csv"].rows == []
    assert output.trajectory is None


# verify


def test_cmd_verify():

    output = cmd_verify(VerifyConfig(samples=3))
    report = output.report
    for key in (
        "picard_mass",
        "splitstep_mass",
        "scaling_slope",
        "scaling_residual",
        "simple_inequality",
        "l2_estimate",
        "hs_first_estimate",
        "hs_second_bounded",
    ):
        assert report.verdict[key], key
    measurements = report.measurements
    assert measurements["scaling_residual_exact"] == pytest.approx(1.0)
    assert (
        measurements["scaling_residual_rescaled"]
        < 5 * measurements["scaling_residual"]
    )
    assert report.measurements["dependence_ratio"] > 0
    kinds = {row["kind"] for row in output.tables["estimates.csv"].rows}
    assert kinds == {"simple", "l2", "hs_first", "hs_second"}
    for row in output.tables["estimates.csv"].rows:
        if row["kind"] in ("l2", "hs_first"):
            assert row["budget"] >= 0
    assert len(output.tables["scaling.csv"].rows) == 3


def test_cmd_verify_supercritical_skips_l2():

    output = cmd_verify(VerifyConfig(beta=1, samples=2))
    assert "l2_estimate" not in output.report.verdict
    kinds = {row["kind"] for row in output.tables["estimates.csv"].rows}
    assert "l2" not in kinds


# strichartz


def test_cmd_strichartz():

    config = StrichartzConfig(n=3, points=[16, 32], T=0.5, n_t=8)
    output = cmd_strichartz(config)
    report = output.report
    assert report.verdict["classical_stable"]
    assert report.verdict["divergence_increasing"]
    assert report.verdict["smoothing_endpoint"]
    assert report.measurements["smoothing_rho"] == 0
    assert report.measurements["divergence_gamma"] == pytest.approx(1.2)
    for label in ("gamma_1_4", "gamma_2_4", "gamma_3_4", "classical", "divergence"):
        assert report.measurements[f"{label}_max_N16"] > 0
        assert report.measurements[f"{label}_max_N32"] > 0
    assert len(output.tables["ratios.csv"].rows) == 4 * 2 * 3 + 2
    assert len(output.tables["summary.csv"].rows) == 5 * 2


def test_cmd_strichartz_configured_triples():

    triple = admissible_triple(3, 0, Fraction(1, 2))
    config = StrichartzConfig(
        triples=[[triple.inv_r, triple.gamma]],
        n=2,
        points=[16],
        T=0.5,
        n_t=8,
        divergence_gamma=2,
    )
    report = cmd_strichartz(config).report
    assert "triple_0_max_N16" in report.measurements
    assert report.failures["divergence"]["error"] == "WeightNotIntegrable"
    assert "divergence_increasing" not in report.verdict

    with pytest.raises(ValueError) as exc:
        cmd_strichartz(config.copy(update={"triples": [["1/10", "1/2"]]}))
    assert "not admissible" in str(exc.value)
    with pytest.raises(ValueError):
        cmd_strichartz(config.copy(update={"triples": [["1/4"]]}))


# lifespan


def test_cmd_lifespan():

    config = LifespanConfig(
        amplitudes=[1.0, 4.0],
        n_t=8,
        T_min=1e-6,
        T_max=1e8,
        bisections=16,
        **SMALL_GRID,
    )
    output = cmd_lifespan(config)
    report = output.report
    assert report.measurements["lifespan_slope_expected"] == pytest.approx(-4 / 3)
    assert report.measurements["theta0"] == pytest.approx(0.25)
    spans = [row["T_star"] for row in output.tables["lifespan.csv"].rows]
    assert len(spans) == 2
    assert all(config.T_min <= t <= config.T_max for t in spans)
    assert report.measurements["lifespan_saturated"] == 0
    assert spans[1] < spans[0]
    assert report.verdict["lifespan_slope"]
    assert abs(report.measurements["lifespan_slope"] + 4 / 3) <= 0.2
    ratios = [row["ratio"] for row in output.tables["contraction.csv"].rows]
    assert all(r > 0 for r in ratios)


def test_cmd_lifespan_critical():

    with pytest.raises(ValueError):
        cmd_lifespan(LifespanConfig(beta=Fraction(2, 3), amplitudes=[1.0]))


# scatter


def test_cmd_scatter():

    config = ScatterConfig(T=2.0, dt=0.125, save_every=2, **SMALL_GRID)
    output = cmd_scatter(config)
    report = output.report
    assert report.passed, report.verdict
    assert report.measurements["final_increment"] < report.measurements[
        "first_increment"
    ]
    assert report.measurements["mass_drift"] < 1e-12
    assert report.measurements["epsilon"] > 0
    assert len(output.tables["increments.csv"].rows) == 8


def test_cmd_scatter_reference():

    report = cmd_scatter(ScatterConfig()).report
    assert report.passed, report.verdict
    assert report.measurements["final_increment"] < 1e-3


def test_cmd_scatter_blowup_recorded():

    config = ScatterConfig(T=1.0, dt=0.125, save_every=1, blowup_factor=0.5)
    report = cmd_scatter(config.copy(update=SMALL_GRID)).report
    assert report.failures["splitstep"]["error"] == "BlowUp"
    assert report.verdict == {"finite": False}


# Output files


def test_write_outputs(tmp_path):

    output = cmd_admissible(AdmissibleConfig(n=5))
    path = write_outputs(output, tmp_path / "admissible")
    assert path.name == "report.json"
    assert (tmp_path / "admissible" / "timing.json").exists()
    rows = read_csv(tmp_path / "admissible" / "triples.csv")
    assert len(rows) == 5
    assert rows[0]["verdict"] == "True"
    assert "/" in rows[0]["gamma"]


def test_write_outputs_trajectory(tmp_path):

    output = cmd_solve(SolveConfig(**SMALL_GRID, method="splitstep", dump=True))
    write_outputs(output, tmp_path)
    assert (tmp_path / "traj.bin").exists()
    assert (tmp_path / "mass.csv").exists()
