import logging
import time
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Type
import numpy as np
from pydantic import BaseModel
from app.errors import BlowUp, NoConvergence, NotCauchy, WeightNotIntegrable
from app.experiments.ensembles import (
    concentrating_field,
    default_strichartz_triples,
    divergence_gamma,
    divergence_spec,
    random_field,
)
from app.exponents import (
    audit_triple,
    check_classical,
    check_kato_yajima,
    check_prop1,
    compute_thetas,
    critical_index,
    derive_dual_Hs_first,
    derive_dual_Hs_second,
    derive_dual_L2,
    hypothesis_certificate,
    l2_excess_criterion,
    l2_excess_window,
    lifespan_exponent,
    region_sample,
    thm1_mode,
    thm2_beta_interval,
)
from app.norms import (
    check_nonlinear_estimate_Hs,
    check_nonlinear_estimate_L2,
    estimate_budget,
    simple_inequality_constant,
    snapshot_norms,
)
from app.schemas import (
    AdmissibleConfig,
    ExperimentReport,
    ExponentTriple,
    GridSpec,
    LifespanConfig,
    PicardConfig,
    ProblemParams,
    ScatterConfig,
    SolveConfig,
    StrichartzConfig,
    VerifyConfig,
    WeightedNormSpec,
)
from app.solver import (
    contraction_ratio,
    dependence_ratio,
    duhamel_residual,
    family_datum,
    free_spacetime_norm,
    free_trajectory,
    lifespan_estimate,
    picard_extend,
    picard_solve,
    rescale_trajectory,
    scattering_state,
    splitstep_order,
    splitstep_solve,
    trajectory_distance,
)
from app.spectral import (
    ComplexField,
    Trajectory,
    gaussian,
    mass,
    normalize,
    rescale_field,
    sobolev_norm,
)
from app.utils import (
    dump_trajectory,
    run_parallel,
    spawn_generators,
    spawn_seeds,
    write_csv,
    write_report,
)

logger = logging.getLogger(__name__)

# Thresholds of the reported verdicts
PICARD_MASS_TOL = 1e-6
SPLITSTEP_MASS_TOL = 1e-12
CROSS_METHOD_TOL = 1e-4
STRANG_ORDER_MIN = 1.9
GEOMETRIC_RATIO_MAX = 0.6
SCALING_SLOPE_RTOL = 0.01
SCALING_RESIDUAL_FACTOR = 5.0
F2_SPREAD_MAX = 10.0
REFINEMENT_VARIATION_MAX = 0.25
LIFESPAN_SLOPE_RTOL = 0.15
SCATTER_FINAL_MAX = 1e-3

SCALING_FACTORS = (1.0, 2.0, 4.0)


class Table(BaseModel):
    columns: List[str]
    rows: List[dict] = []


class ExperimentOutput(BaseModel):
    """
    Everything one subcommand produces: the canonical report, its CSV
    tables keyed by file name and an optional trajectory to dump.
    """

    report: ExperimentReport
    tables: Dict[str, Table] = {}
    trajectory: Optional[Trajectory] = None

    class Config:
        arbitrary_types_allowed = True


def write_outputs(output: ExperimentOutput, out_dir) -> Path:
    """
    Write report.json, timing.json, every table and traj.bin if present.

    :returns: path of report.json
    """
    out = Path(out_dir)
    path = write_report(output.report, out)
    for name, table in output.tables.items():
        write_csv(out / name, table.columns, table.rows)
    if output.trajectory is not None:
        dump_trajectory(output.trajectory, out / "traj.bin")
    return path


# Shared helpers


def _elapsed_ms(start: float) -> int:
    return int(round(1000.0 * (time.perf_counter() - start)))


def _params(config, **overrides) -> ProblemParams:
    values = dict(
        d=config.d,
        alpha=config.alpha,
        beta=config.beta,
        s=getattr(config, "s", Fraction(0)),
        lam=getattr(config, "lam", 1),
    )
    values.update(overrides)
    return ProblemParams(**values)


def _grid(d: int, points: int, half_length: float) -> GridSpec:
    return GridSpec(dimension=d, points_per_axis=points, half_length=half_length)


def reference_datum(grid: GridSpec, norm: float) -> ComplexField:
    """
    Centred Gaussian e^(-|x|^2/2) scaled to L^2 norm `norm`.
    """
    return normalize(gaussian(grid), norm)


def masses(traj: Trajectory) -> np.ndarray:
    return snapshot_norms(traj.values, traj.grid, WeightedNormSpec(r=2.0)) ** 2


def mass_drift(traj: Trajectory) -> float:
    """
    max_k |M(t_k) - M(0)| / M(0).
    """
    m = masses(traj)
    return float(np.max(np.abs(m - m[0])) / m[0])


def observed_ratio(increments: List[float], floor: float) -> float:
    """
    Largest ratio of consecutive Picard increments above `floor`.
    """
    pairs = [
        (a, b) for a, b in zip(increments, increments[1:]) if b > floor
    ]
    if not pairs:
        return 0.0
    return max(b / a for a, b in pairs)


def fit_slope(x, y) -> float:
    """
    Least-squares slope of log y against log x.
    """
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _failure(exc: Exception) -> dict:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NoConvergence):
        record.update(iterations=exc.iterations, increments=exc.increments)
    elif isinstance(exc, BlowUp):
        record.update(step=exc.step, sup_norm=exc.sup_norm)
    elif isinstance(exc, NotCauchy):
        record.update(increments=exc.increments)
    return record


def _mass_rows(method: str, traj: Trajectory) -> List[dict]:
    return [
        {"method": method, "step": k, "time": t, "mass": m}
        for k, (t, m) in enumerate(zip(traj.times, masses(traj)))
    ]


# admissible


ADMISSIBLE_COLUMNS = [
    "index",
    "inv_q",
    "inv_r",
    "gamma",
    "dual_inv_qt",
    "dual_inv_rt",
    "dual_gamma_t",
    "dual2_inv_qt",
    "dual2_inv_rt",
    "dual2_gamma_t",
    "verdict",
]


def _audit_row(index: int, audit: dict) -> dict:
    triple = audit["triple"]
    row = {
        "index": index,
        "inv_q": triple.inv_q,
        "inv_r": triple.inv_r,
        "gamma": triple.gamma,
        "verdict": audit["verdict"],
    }
    duals = audit["duals"]
    first = duals.get("dual", duals.get("dual1"))
    for prefix, dual in (("dual", first), ("dual2", duals.get("dual2"))):
        if dual is not None:
            row[f"{prefix}_inv_qt"] = dual.inv_qt
            row[f"{prefix}_inv_rt"] = dual.inv_rt
            row[f"{prefix}_gamma_t"] = dual.gamma_t
    return row


def cmd_admissible(config: AdmissibleConfig) -> ExperimentOutput:
    """
    Sample admissible triples, derive and audit their duals, and certify
    the parameter hypotheses.

    :param config: AdmissibleConfig

    :returns: ExperimentOutput with triples.csv

    :raises: ValueError if the parameters are outside the mode's window;
        RegionEmpty if sampling fails.
    """
    start = time.perf_counter()
    s = config.s if config.mode == "hs" else Fraction(0)
    params = _params(config, s=s)
    triples = region_sample(
        params,
        config.n,
        config.seed,
        mode=config.mode,
        max_denominator=config.max_denominator,
        max_resamples=config.max_resamples,
    )
    logger.info("Auditing %d %s triples", len(triples), config.mode)
    audits = run_parallel(
        lambda triple: audit_triple(params, triple, config.mode),
        triples,
        config.workers,
    )
    failures = [
        dict(audit, index=i) for i, audit in enumerate(audits) if not audit["verdict"]
    ]
    thetas = compute_thetas(params)
    measurements = {
        "samples": len(audits),
        "dual_failures": len(failures),
        "theta0": float(thetas.theta0),
        "theta1": float(thetas.theta1),
        "theta2": float(thetas.theta2),
        "critical_index": float(critical_index(params)),
    }
    verdict = {"audit": not failures}
    certificate = hypothesis_certificate(params.d, s)
    verdict.update({f"hypothesis_{k}": v for k, v in certificate.items()})
    if config.mode == "hs":
        window = l2_excess_window(params.d, s, params.alpha)
        measurements["l2_excess_window"] = float(window)
        verdict["l2_excess_criterion"] = window == l2_excess_criterion(
            params.d, s, params.alpha
        )
    report = ExperimentReport(
        experiment="admissible",
        params=params.dict(by_alias=True),
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        records=failures,
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    table = Table(
        columns=ADMISSIBLE_COLUMNS,
        rows=[_audit_row(i, audit) for i, audit in enumerate(audits)],
    )
    return ExperimentOutput(report=report, tables={"triples.csv": table})


# solve


def cmd_solve(config: SolveConfig) -> ExperimentOutput:
    """
    Solve from the reference Gaussian with Picard iteration, split-step
    or both, and compare. Picard runs over config.windows chained windows
    of length config.T; split-step covers the same horizon.

    Solver failures are recorded under `failures`; they do not raise.

    :param config: SolveConfig

    :returns: ExperimentOutput with increments.csv and mass.csv
    """
    start = time.perf_counter()
    params = _params(config)
    grid = _grid(config.d, config.points, config.half_length)
    u0 = reference_datum(grid, config.norm)
    horizon = config.T * config.windows
    dt = config.T / config.n_t
    measurements: Dict[str, float] = {"initial_mass": mass(u0)}
    verdict: Dict[str, bool] = {}
    failures: Dict[str, dict] = {}
    increment_rows: List[dict] = []
    mass_rows: List[dict] = []
    picard = split = None

    if config.method in ("picard", "both"):
        picard_config = PicardConfig(
            T=config.T,
            n_t=config.n_t,
            max_iter=config.max_iter,
            tol=config.tol,
            blowup_factor=config.blowup_factor,
        )
        try:
            picard, iterations, increments = picard_extend(
                u0, params, picard_config, config.windows
            )
        except (NoConvergence, BlowUp) as exc:
            logger.warning("Picard run failed: %s", exc)
            failures["picard"] = _failure(exc)
            verdict["picard_converged"] = False
        else:
            ratio = max(
                observed_ratio(window, 100.0 * config.tol) for window in increments
            )
            measurements.update(
                picard_iterations=sum(iterations),
                picard_final_increment=increments[-1][-1],
                picard_contraction=ratio,
                picard_mass_drift=mass_drift(picard),
                picard_residual=duhamel_residual(
                    picard, u0, params, picard_config
                ),
            )
            verdict["picard_converged"] = True
            verdict["picard_mass"] = (
                measurements["picard_mass_drift"] < PICARD_MASS_TOL
            )
            verdict["picard_geometric"] = ratio <= GEOMETRIC_RATIO_MAX
            increment_rows = [
                {"window": w, "iteration": k, "increment": inc}
                for w, window in enumerate(increments)
                for k, inc in enumerate(window, start=1)
            ]
            mass_rows += _mass_rows("picard", picard)

    if config.method in ("splitstep", "both"):
        try:
            split = splitstep_solve(
                u0, params, dt=dt, T=horizon, blowup_factor=config.blowup_factor
            )
            order = splitstep_order(
                u0, params, dt, horizon, blowup_factor=config.blowup_factor
            )
        except BlowUp as exc:
            logger.warning("Split-step run failed: %s", exc)
            failures["splitstep"] = _failure(exc)
            verdict["splitstep_finite"] = False
        else:
            measurements["splitstep_mass_drift"] = mass_drift(split)
            measurements["splitstep_order"] = order
            verdict["splitstep_finite"] = True
            verdict["splitstep_mass"] = (
                measurements["splitstep_mass_drift"] < SPLITSTEP_MASS_TOL
            )
            verdict["splitstep_order"] = order >= STRANG_ORDER_MIN
            mass_rows += _mass_rows("splitstep", split)

    if picard is not None and split is not None:
        distance = trajectory_distance(picard, split)
        measurements["cross_method_distance"] = distance
        verdict["cross_method"] = distance < CROSS_METHOD_TOL

    report = ExperimentReport(
        experiment="solve",
        params=params.dict(by_alias=True),
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        failures=failures,
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    tables = {
        "increments.csv": Table(
            columns=["window", "iteration", "increment"], rows=increment_rows
        ),
        "mass.csv": Table(
            columns=["method", "step", "time", "mass"], rows=mass_rows
        ),
    }
    trajectory = (picard if picard is not None else split) if config.dump else None
    return ExperimentOutput(report=report, tables=tables, trajectory=trajectory)


# verify


def _conservation(params, u0, config: VerifyConfig):
    picard_config = PicardConfig(T=config.T, n_t=config.n_t)
    picard, _, _ = picard_solve(u0, params, picard_config)
    split = splitstep_solve(u0, params, dt=config.T / config.n_t, T=config.T)
    return {
        "picard_mass_drift": mass_drift(picard),
        "splitstep_mass_drift": mass_drift(split),
    }


def scaling_law(config: VerifyConfig, params: ProblemParams):
    """
    Hdot^s norms of lam^((2-alpha)/beta) f(lam x) for lam in 1, 2, 4 and
    their fitted log-log slope.

    :returns: (slope, expected slope, rows)
    """
    grid = _grid(params.d, config.scaling_points, config.scaling_half_length)
    f = gaussian(grid, width=2.0)
    s = config.scaling_s
    norms = [
        sobolev_norm(rescale_field(f, lam, params.alpha_f, params.beta_f), s)
        for lam in SCALING_FACTORS
    ]
    expected = s + (2.0 - params.alpha_f) / params.beta_f - params.d / 2.0
    rows = [
        {"lambda": lam, "hs_norm": norm}
        for lam, norm in zip(SCALING_FACTORS, norms)
    ]
    return fit_slope(SCALING_FACTORS, norms), expected, rows


def scaling_residual_ratio(
    params: ProblemParams, u0: ComplexField, config: PicardConfig, lam=2.0
) -> Tuple[float, float, float]:
    """
    Duhamel residuals of the converged Picard solution from u0 and of its
    rescaling by lam, carried onto the grid refined by lam and checked
    against the rescaled problem.

    :returns: (residual, rescaled residual, lam^(-s_c))

    :raises: NoConvergence; BlowUp.
    """
    solution, _, _ = picard_solve(u0, params, config)
    base = duhamel_residual(solution, u0, params, config)
    scaled = rescale_trajectory(solution, lam, params.alpha_f, params.beta_f)
    rescaled = duhamel_residual(
        scaled,
        scaled.initial,
        params,
        config.copy(update={"T": config.T / lam**2}),
    )
    logger.debug("Residuals %.3e before and %.3e after rescaling", base, rescaled)
    return base, rescaled, lam ** (-float(critical_index(params)))


def hs_params(config: VerifyConfig) -> ProblemParams:
    beta = config.hs_beta
    if beta is None:
        beta = thm2_beta_interval(config.d, config.hs_s, config.hs_alpha).midpoint()
    return ProblemParams(
        d=config.d,
        alpha=config.hs_alpha,
        beta=beta,
        s=config.hs_s,
        lam=config.lam,
    )


def _sample_pair(grid: GridSpec, seed, norm: float):
    rng = np.random.default_rng(seed)
    u0 = normalize(random_field(grid, 0.0, rng), norm)
    v0 = normalize(random_field(grid, 0.0, rng), norm)
    return u0, v0


def _estimate_sample(args) -> List[dict]:
    index, seed, grid, config, params, hs, l2_triple, hs_triple = args
    u0, v0 = _sample_pair(grid, seed, config.norm)
    u = free_trajectory(u0, config.T, config.n_t)
    v = free_trajectory(v0, config.T, config.n_t)
    rows = [
        {
            "index": index,
            "kind": "simple",
            "lhs": simple_inequality_constant(u0, v0, params.beta_f),
            "rhs": params.beta_f + 1.0,
        }
    ]
    if l2_triple is not None:
        dual, theta0 = derive_dual_L2(params, l2_triple)
        budget = estimate_budget(u, v, params, l2_triple, dual, theta0, config.T)
        lhs, rhs, holds = check_nonlinear_estimate_L2(
            u, v, params, l2_triple, dual, config.T, config.rtol, budget
        )
        rows.append(
            {
                "index": index,
                "kind": "l2",
                "lhs": lhs,
                "rhs": rhs,
                "budget": budget,
                "holds": holds,
            }
        )
    dual1, theta1 = derive_dual_Hs_first(hs, hs_triple)
    dual2, _ = derive_dual_Hs_second(hs, hs_triple)
    budget = estimate_budget(u, v, hs, hs_triple, dual1, theta1, config.T)
    estimate = check_nonlinear_estimate_Hs(
        u, v, hs, hs_triple, dual1, dual2, config.T, config.rtol, budget
    )
    rows.append(
        {
            "index": index,
            "kind": "hs_first",
            "lhs": estimate.f1_lhs,
            "rhs": estimate.f1_rhs,
            "budget": budget,
            "holds": estimate.f1_holds,
        }
    )
    rows.append(
        {
            "index": index,
            "kind": "hs_second",
            "lhs": estimate.f2_lhs,
            "rhs": estimate.f2_rhs,
            "ratio": estimate.f2_ratio,
        }
    )
    return rows


ESTIMATE_COLUMNS = ["index", "kind", "lhs", "rhs", "budget", "holds", "ratio"]


def cmd_verify(config: VerifyConfig) -> ExperimentOutput:
    """
    Conservation, scaling, nonlinear-estimate and simple-inequality audits.

    :param config: VerifyConfig

    :returns: ExperimentOutput with estimates.csv and scaling.csv

    :raises: ValueError on parameters outside the theorem windows.
    """
    start = time.perf_counter()
    params = _params(config)
    grid = _grid(config.d, config.points, config.half_length)
    u0 = reference_datum(grid, config.norm)
    measurements: Dict[str, float] = {}
    verdict: Dict[str, bool] = {}
    failures: Dict[str, dict] = {}

    logger.info("Checking mass conservation")
    try:
        measurements.update(_conservation(params, u0, config))
    except (NoConvergence, BlowUp) as exc:
        failures["conservation"] = _failure(exc)
        verdict["picard_mass"] = False
    else:
        verdict["picard_mass"] = (
            measurements["picard_mass_drift"] < PICARD_MASS_TOL
        )
        verdict["splitstep_mass"] = (
            measurements["splitstep_mass_drift"] < SPLITSTEP_MASS_TOL
        )

    logger.info("Checking the scaling law")
    slope, expected, scaling_rows = scaling_law(config, params)
    measurements.update(scaling_slope=slope, scaling_slope_expected=expected)
    verdict["scaling_slope"] = abs(slope - expected) <= SCALING_SLOPE_RTOL * max(
        abs(expected), 1.0
    )
    try:
        base, rescaled, exact = scaling_residual_ratio(
            params, u0, PicardConfig(T=config.T, n_t=config.n_t)
        )
    except (NoConvergence, BlowUp) as exc:
        failures["scaling_residual"] = _failure(exc)
        verdict["scaling_residual"] = False
    else:
        measurements.update(
            scaling_residual=base,
            scaling_residual_rescaled=rescaled,
            scaling_residual_exact=exact,
        )
        verdict["scaling_residual"] = rescaled < SCALING_RESIDUAL_FACTOR * base

    logger.info("Auditing nonlinear estimates on %d samples", config.samples)
    hs = hs_params(config)
    l2_triples: List[Optional[ExponentTriple]] = [None] * config.samples
    if thm1_mode(params):
        l2_triples = region_sample(params, config.samples, config.seed, "l2")
    hs_triples = region_sample(hs, config.samples, config.seed, "hs")
    seeds = spawn_seeds(config.seed, config.samples)
    jobs = [
        (i, seeds[i], grid, config, params, hs, l2_triples[i], hs_triples[i])
        for i in range(config.samples)
    ]
    rows = [
        row
        for sample in run_parallel(_estimate_sample, jobs, config.workers)
        for row in sample
    ]

    simple = [row["lhs"] for row in rows if row["kind"] == "simple"]
    measurements["simple_inequality_constant"] = max(simple)
    verdict["simple_inequality"] = max(simple) <= params.beta_f + 1.0
    if thm1_mode(params):
        held = sum(row["holds"] for row in rows if row["kind"] == "l2")
        measurements["l2_estimate_holds"] = held
        verdict["l2_estimate"] = held == config.samples
    held = sum(row["holds"] for row in rows if row["kind"] == "hs_first")
    measurements["hs_first_estimate_holds"] = held
    verdict["hs_first_estimate"] = held == config.samples
    f2 = np.array([row["ratio"] for row in rows if row["kind"] == "hs_second"])
    spread = float(np.max(f2) / np.median(f2))
    measurements.update(hs_second_ratio_max=float(np.max(f2)), hs_second_spread=spread)
    verdict["hs_second_bounded"] = spread < F2_SPREAD_MAX

    _, perturbation = _sample_pair(grid, seeds[0], 1e-3 * config.norm)
    v0 = u0.with_values(u0.values + perturbation.values)
    try:
        measurements["dependence_ratio"] = dependence_ratio(
            u0, v0, params, PicardConfig(T=config.T, n_t=config.n_t)
        )
    except (NoConvergence, BlowUp) as exc:
        failures["dependence"] = _failure(exc)

    report = ExperimentReport(
        experiment="verify",
        params=params.dict(by_alias=True),
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        failures=failures,
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    tables = {
        "estimates.csv": Table(columns=ESTIMATE_COLUMNS, rows=rows),
        "scaling.csv": Table(columns=["lambda", "hs_norm"], rows=scaling_rows),
    }
    return ExperimentOutput(report=report, tables=tables)


# strichartz


def _configured_triples(config: StrichartzConfig):
    if not config.triples:
        return default_strichartz_triples(config.d, config.s)
    labelled = []
    for i, pair in enumerate(config.triples):
        if len(pair) != 2:
            raise ValueError("Each triple is given as [1/r, gamma]")
        triple = ExponentTriple.from_scaling(pair[0], pair[1], config.d, config.s)
        classical = (
            triple.gamma == 0
            and config.s == 0
            and check_classical(triple.inv_q, triple.inv_r, config.d)
        )
        if not (classical or check_prop1(triple, config.s, config.d)):
            raise ValueError(f"Triple {triple} is not admissible")
        labelled.append((f"triple_{i}", triple))
    return labelled


def strichartz_ratios(
    spec: WeightedNormSpec,
    grid: GridSpec,
    config: StrichartzConfig,
    bandwidth: Optional[int],
) -> List[float]:
    """
    ||e^{itLap} f|| / ||f||_{Hdot^s} over the seeded ensemble on one grid.

    :raises: WeightNotIntegrable for r*gamma >= d.
    """
    s = float(config.s)

    def ratio(rng: np.random.Generator) -> float:
        f = random_field(grid, s, rng, config.p, bandwidth)
        return free_spacetime_norm(f, spec, config.T, config.n_t) / sobolev_norm(
            f, s
        )

    return run_parallel(ratio, spawn_generators(config.seed, config.n), config.workers)


def concentration_ratio(
    spec: WeightedNormSpec, grid: GridSpec, config: StrichartzConfig
) -> float:
    """
    Ratio of the grid-scale Gaussian, which grows like h^(1+s-gamma) when
    gamma > 1 + s.
    """
    f = concentrating_field(grid, float(config.s))
    return free_spacetime_norm(f, spec, config.T, config.n_t)


def cmd_strichartz(config: StrichartzConfig) -> ExperimentOutput:
    """
    Boundedness proxy for the weighted Strichartz estimate under grid
    refinement, and the growth of the L^2_t L^2_x ratio for a gamma above
    the window, measured on a datum concentrating at the grid scale.

    :param config: StrichartzConfig

    :returns: ExperimentOutput with ratios.csv and summary.csv

    :raises: ValueError for an inadmissible configured triple.
    """
    start = time.perf_counter()
    grids = [
        _grid(config.d, n, config.half_length) for n in sorted(set(config.points))
    ]
    bandwidth = grids[0].points_per_axis
    triples = dict(_configured_triples(config))
    runs: List[Tuple[str, WeightedNormSpec]] = [
        (label, WeightedNormSpec.primal(triple)) for label, triple in triples.items()
    ]
    measurements: Dict[str, float] = {}
    verdict: Dict[str, bool] = {}
    failures: Dict[str, dict] = {}
    records: List[dict] = []
    ratio_rows: List[dict] = []
    summary_rows: List[dict] = []

    # L^2_t L^2_x(|x|^(-2(1-rho))) is bounded by Hdot^(-rho); gamma = 1+s
    rho = -config.s
    measurements["smoothing_rho"] = float(rho)
    verdict["smoothing_endpoint"] = check_kato_yajima(rho, config.d)
    if config.divergence:
        gamma = divergence_gamma(config.s, config.divergence_gamma)
        measurements["divergence_gamma"] = float(gamma)
        runs.append(("divergence", divergence_spec(config.s, gamma)))

    for label, spec in runs:
        logger.info("Strichartz ratios for %s", label)
        maxima = []
        try:
            for grid in grids:
                if label == "divergence":
                    ratios = [concentration_ratio(spec, grid, config)]
                else:
                    ratios = strichartz_ratios(spec, grid, config, bandwidth)
                n = grid.points_per_axis
                ratio_rows += [
                    {"label": label, "points": n, "sample": i, "ratio": r}
                    for i, r in enumerate(ratios)
                ]
                maxima.append(max(ratios))
                summary_rows.append(
                    {
                        "label": label,
                        "points": n,
                        "max_ratio": max(ratios),
                        "median_ratio": float(np.median(ratios)),
                    }
                )
                measurements[f"{label}_max_N{n}"] = max(ratios)
                measurements[f"{label}_median_N{n}"] = float(np.median(ratios))
        except WeightNotIntegrable as exc:
            failures[label] = _failure(exc)
            continue
        if label == "divergence":
            records.append({"label": label, "gamma": measurements["divergence_gamma"]})
            verdict["divergence_increasing"] = all(
                a < b for a, b in zip(maxima, maxima[1:])
            )
        else:
            records.append({"label": label, "triple": triples[label]})
            variation = max(maxima) / min(maxima) - 1.0
            measurements[f"{label}_variation"] = variation
            verdict[f"{label}_stable"] = variation < REFINEMENT_VARIATION_MAX

    report = ExperimentReport(
        experiment="strichartz",
        params=None,
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        failures=failures,
        records=records,
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    tables = {
        "ratios.csv": Table(
            columns=["label", "points", "sample", "ratio"], rows=ratio_rows
        ),
        "summary.csv": Table(
            columns=["label", "points", "max_ratio", "median_ratio"],
            rows=summary_rows,
        ),
    }
    return ExperimentOutput(report=report, tables=tables)


# lifespan


def cmd_lifespan(config: LifespanConfig) -> ExperimentOutput:
    """
    Life span T* of the Picard contraction against the data norm, and
    the contraction ratio against T.

    Along the default scaling family the data are
    lam^((2-alpha)/beta) u0(lam x) with L^2 norm c ||u0||, so that T*
    follows c^(-beta/theta0) up to the bisection resolution.

    :param config: LifespanConfig

    :returns: ExperimentOutput with lifespan.csv and contraction.csv

    :raises: ValueError outside the subcritical case theta0 > 0.
    """
    start = time.perf_counter()
    params = _params(config)
    grid = _grid(config.d, config.points, config.half_length)
    u0 = reference_datum(grid, config.norm)
    expected = -float(lifespan_exponent(params))
    amplitudes = sorted(config.amplitudes)
    picard_config = PicardConfig(
        T=1.0,
        n_t=config.n_t,
        max_iter=config.max_iter,
        tol=config.tol,
        M_bound=2.0 * config.norm,
    )

    def life_span(amplitude: float) -> float:
        return lifespan_estimate(
            amplitude,
            u0,
            params,
            picard_config,
            T_min=config.T_min,
            T_max=config.T_max,
            bisections=config.bisections,
            family=config.family,
        )

    logger.info(
        "Bisecting life spans for %d %s data", len(amplitudes), config.family
    )
    spans = run_parallel(life_span, amplitudes, config.workers)
    data_norms = [a * config.norm for a in amplitudes]
    slope = fit_slope(data_norms, spans)
    saturated = sum(t in (config.T_min, config.T_max) for t in spans)

    # Contraction ratio of the smallest datum below its life span
    amplitude, span = amplitudes[0], spans[0]
    data = family_datum(u0, amplitude, params, config.family)
    triple = region_sample(params, 1, config.seed, "l2")[0]
    horizons = [span / 8.0, span / 4.0, span / 2.0]
    ratios = []
    for T in horizons:
        u = free_trajectory(data, T, config.n_t)
        v = free_trajectory(data.with_values(1.1 * data.values), T, config.n_t)
        ratios.append(
            contraction_ratio(
                u, v, data, params, PicardConfig(T=T, n_t=config.n_t), triple
            )
        )
    theta0 = float(compute_thetas(params).theta0)

    measurements = {
        "lifespan_slope": slope,
        "lifespan_slope_expected": expected,
        "lifespan_saturated": saturated,
        "contraction_slope": fit_slope(horizons, ratios),
        "theta0": theta0,
    }
    verdict = {
        "lifespan_slope": abs(slope - expected) <= LIFESPAN_SLOPE_RTOL * abs(expected),
    }
    report = ExperimentReport(
        experiment="lifespan",
        params=params.dict(by_alias=True),
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        records=[{"contraction_triple": triple}],
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    tables = {
        "lifespan.csv": Table(
            columns=["amplitude", "data_norm", "T_star"],
            rows=[
                {"amplitude": a, "data_norm": n, "T_star": t}
                for a, n, t in zip(amplitudes, data_norms, spans)
            ],
        ),
        "contraction.csv": Table(
            columns=["T", "ratio"],
            rows=[{"T": T, "ratio": r} for T, r in zip(horizons, ratios)],
        ),
    }
    return ExperimentOutput(report=report, tables=tables)


# scatter


def cmd_scatter(config: ScatterConfig) -> ExperimentOutput:
    """
    Long split-step run from small data and the Cauchy tail of the
    profiles e^{-itLap} u(t).

    :param config: ScatterConfig

    :returns: ExperimentOutput with increments.csv
    """
    start = time.perf_counter()
    params = _params(config)
    grid = _grid(config.d, config.points, config.half_length)
    u0 = reference_datum(grid, config.norm)
    measurements: Dict[str, float] = {}
    verdict: Dict[str, bool] = {}
    failures: Dict[str, dict] = {}
    rows: List[dict] = []

    try:
        traj = splitstep_solve(
            u0,
            params,
            dt=config.dt,
            T=config.T,
            save_every=config.save_every,
            blowup_factor=config.blowup_factor,
        )
    except BlowUp as exc:
        failures["splitstep"] = _failure(exc)
        verdict["finite"] = False
        traj = None

    if traj is not None:
        measurements["mass_drift"] = mass_drift(traj)
        try:
            profile, increments = scattering_state(traj, params)
            measurements["profile_mass"] = mass(profile)
            verdict["cauchy"] = True
        except NotCauchy as exc:
            failures["scattering"] = _failure(exc)
            increments = exc.increments
            verdict["cauchy"] = False
        measurements.update(
            first_increment=increments[0], final_increment=increments[-1]
        )
        verdict["final_increment"] = increments[-1] < SCATTER_FINAL_MAX
        rows = [
            {"step": k, "time": t, "increment": inc}
            for k, (t, inc) in enumerate(zip(traj.times[1:], increments), start=1)
        ]
        if thm1_mode(params):
            triple = region_sample(params, 1, config.seed, "l2")[0]
            measurements["epsilon"] = free_spacetime_norm(
                u0, WeightedNormSpec.primal(triple), config.T, traj.n_t
            )

    report = ExperimentReport(
        experiment="scatter",
        params=params.dict(by_alias=True),
        config=config.dict(),
        measurements=measurements,
        verdict=verdict,
        failures=failures,
        seed=config.seed,
        runtime_ms=_elapsed_ms(start),
    )
    table = Table(columns=["step", "time", "increment"], rows=rows)
    return ExperimentOutput(report=report, tables={"increments.csv": table})


COMMANDS: Dict[str, Tuple[Type[BaseModel], Callable]] = {
    "admissible": (AdmissibleConfig, cmd_admissible),
    "solve": (SolveConfig, cmd_solve),
    "verify": (VerifyConfig, cmd_verify),
    "strichartz": (StrichartzConfig, cmd_strichartz),
    "lifespan": (LifespanConfig, cmd_lifespan),
    "scatter": (ScatterConfig, cmd_scatter),
}
