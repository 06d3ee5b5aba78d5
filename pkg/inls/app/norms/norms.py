import logging
from typing import Optional, Tuple
import numpy as np
from scipy.integrate import trapezoid
from app.errors import WeightNotIntegrable
from app.exponents import compute_thetas
from app.schemas import (
    DualTriple,
    ExponentTriple,
    GridSpec,
    HsEstimateReport,
    ProblemParams,
    WeightedNormSpec,
)
from app.spectral import (
    ComplexField,
    Trajectory,
    clamped_radius,
    fractional_symbol,
)

logger = logging.getLogger(__name__)


def _weight(grid: GridSpec, spec: WeightedNormSpec) -> Optional[np.ndarray]:
    # None means the unweighted quadrature
    if spec.gamma == 0:
        return None
    exponent = spec.r * spec.gamma
    if spec.dual:
        return clamped_radius(grid) ** exponent
    if exponent >= grid.dimension:
        raise WeightNotIntegrable(spec.r, spec.gamma, grid.dimension)
    return clamped_radius(grid) ** (-exponent)


def snapshot_norms(
    values: np.ndarray, grid: GridSpec, spec: WeightedNormSpec
) -> np.ndarray:
    """
    Weighted L^r norms over the trailing d axes of `values`.

    :param values: array shaped (..., N, ..., N)
    :param grid: GridSpec of the trailing axes
    :param spec: WeightedNormSpec

    :returns: array of norms with the leading shape of `values`

    :raises: WeightNotIntegrable if r*gamma >= d on a primal spec.
    """
    weight = _weight(grid, spec)
    axes = tuple(range(-grid.dimension, 0))
    integrand = np.abs(values) ** spec.r
    if weight is not None:
        integrand = weight * integrand
    total = np.sum(integrand, axis=axes) * grid.cell_volume
    return total ** (1.0 / spec.r)


def weighted_lebesgue_norm(f: ComplexField, spec: WeightedNormSpec) -> float:
    """
    ||f||_{L^r(|x|^{-r gamma})} with the weight clamped at max(|x|, h/2).

    :param f: field
    :param spec: WeightedNormSpec

    :returns: float

    :raises: WeightNotIntegrable if r*gamma >= d.
    """
    return float(snapshot_norms(f.values, f.grid, spec))


def spacetime_norm(traj: Trajectory, spec: WeightedNormSpec) -> float:
    """
    ||u||_{L^q_t L^r_x(|x|^{-r gamma})} with the trapezoid rule in time.

    :param traj: Trajectory
    :param spec: WeightedNormSpec with q set

    :returns: float

    :raises: ValueError if spec.q is not set; WeightNotIntegrable.
    """
    if spec.q is None:
        raise ValueError("Space-time norm needs a temporal exponent q")
    spatial = snapshot_norms(traj.values, traj.grid, spec)
    return float(trapezoid(spatial**spec.q, traj.times) ** (1.0 / spec.q))


def sup_time_l2(traj: Trajectory) -> float:
    """
    sup_k ||u(t_k)||_{L^2}.
    """
    spec = WeightedNormSpec(r=2.0)
    return float(np.max(snapshot_norms(traj.values, traj.grid, spec)))


def quadrature_budget(coarse: float, fine: float, order: int = 2) -> float:
    """
    Richardson estimate |fine - coarse| / (2^order - 1) of the error left
    in `fine`.
    """
    return abs(fine - coarse) / (2.0**order - 1.0)


def coarsen(traj: Trajectory) -> Trajectory:
    """
    Every other snapshot of `traj`.

    :raises: ValueError for an odd number of time steps.
    """
    if traj.n_t % 2:
        raise ValueError(f"Cannot halve a mesh of {traj.n_t} time steps")
    return Trajectory(
        grid=traj.grid, times=traj.times[::2], values=traj.values[::2]
    )


def simple_inequality_constant(
    u: ComplexField, v: ComplexField, beta: float
) -> float:
    """
    Smallest C with ||u|^b u - |v|^b v| <= C (|u|^b + |v|^b)|u - v| on the
    samples of u and v. Always <= beta + 1.
    """
    a, b = u.values, v.values
    lhs = np.abs(np.abs(a) ** beta * a - np.abs(b) ** beta * b)
    rhs = (np.abs(a) ** beta + np.abs(b) ** beta) * np.abs(a - b)
    mask = rhs > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(lhs[mask] / rhs[mask]))


def _source_term(u: Trajectory, v: Trajectory, alpha: float, beta: float):
    weight = clamped_radius(u.grid) ** (-alpha)
    return weight * np.abs(u.values) ** beta * v.values


def _same_mesh(u: Trajectory, v: Trajectory, T: float):
    if u.grid != v.grid:
        raise ValueError("Trajectories live on different grids")
    if u.times.shape != v.times.shape or not np.allclose(u.times, v.times):
        raise ValueError("Trajectories live on different time meshes")
    if not np.isclose(u.T, T):
        raise ValueError(f"Trajectory horizon {u.T} does not match T={T}")


def _hoelder_sides(u, v, params, triple, dual, theta, T, derivative=None):
    beta = params.beta_f
    primal = WeightedNormSpec.primal(triple)
    source = WeightedNormSpec.source(dual)
    F = _source_term(u, v, params.alpha_f, beta)
    if derivative is not None:
        F = fractional_symbol(u.grid, -derivative).apply_values(F)
    lhs = spacetime_norm(u.with_values(F), source)
    rhs = (
        T ** float(theta)
        * spacetime_norm(u, primal) ** beta
        * spacetime_norm(v, primal)
    )
    return lhs, rhs


def estimate_budget(
    u: Trajectory,
    v: Trajectory,
    params: ProblemParams,
    triple: ExponentTriple,
    dual: DualTriple,
    theta,
    T: float,
    derivative: Optional[float] = None,
) -> float:
    """
    Time-quadrature budget of a Hoelder-type nonlinear estimate: the
    Richardson error of each side between the full and the halved mesh,
    summed over both sides. Pass it as `slack` to the checks.

    :raises: ValueError for an odd number of time steps; WeightNotIntegrable.
    """
    _same_mesh(u, v, T)
    fine = _hoelder_sides(u, v, params, triple, dual, theta, T, derivative)
    coarse = _hoelder_sides(
        coarsen(u), coarsen(v), params, triple, dual, theta, T, derivative
    )
    budget = sum(quadrature_budget(c, f) for c, f in zip(coarse, fine))
    logger.debug("Quadrature budget %.3e", budget)
    return budget


def check_nonlinear_estimate_L2(
    u: Trajectory,
    v: Trajectory,
    params: ProblemParams,
    triple: ExponentTriple,
    dual: DualTriple,
    T: float,
    rtol: float = 1e-6,
    slack: float = 0.0,
) -> Tuple[float, float, bool]:
    """
    Both sides of the L^2-level nonlinear estimate

        || |x|^-a |u|^b v ||_{dual} <= T^theta0 ||u||^b ||v||

    with constant 1.

    :param u: Trajectory
    :param v: Trajectory on the same mesh
    :param params: ProblemParams
    :param triple: primal ExponentTriple
    :param dual: DualTriple from derive_dual_L2
    :param T: horizon of the trajectories
    :param rtol: multiplicative tolerance
    :param slack: additive quadrature budget

    :returns: (lhs, rhs, holds)

    :raises: ValueError on mismatched meshes; WeightNotIntegrable.
    """
    _same_mesh(u, v, T)
    theta0 = compute_thetas(params).theta0
    lhs, rhs = _hoelder_sides(u, v, params, triple, dual, theta0, T)
    holds = lhs <= rhs * (1.0 + rtol) + slack
    logger.debug("L2 estimate lhs=%.6e rhs=%.6e holds=%s", lhs, rhs, holds)
    return lhs, rhs, bool(holds)


def check_nonlinear_estimate_Hs(
    u: Trajectory,
    v: Trajectory,
    params: ProblemParams,
    triple: ExponentTriple,
    dual1: DualTriple,
    dual2: DualTriple,
    T: float,
    rtol: float = 1e-6,
    slack: float = 0.0,
) -> HsEstimateReport:
    """
    The two H^s-level estimates. The first has constant 1 and is decided;
    the second carries the unknown weighted Sobolev embedding constant and
    is reported as the ratio lhs / (T^theta2 rhs).
    """
    _same_mesh(u, v, T)
    thetas = compute_thetas(params)
    f1_lhs, f1_rhs = _hoelder_sides(
        u, v, params, triple, dual1, thetas.theta1, T
    )
    f2_lhs, f2_rhs = _hoelder_sides(
        u, v, params, triple, dual2, thetas.theta2, T, derivative=params.s_f
    )
    if f2_rhs > 0:
        ratio = f2_lhs / f2_rhs
    else:
        ratio = 0.0 if f2_lhs == 0 else float("inf")
    return HsEstimateReport(
        f1_lhs=f1_lhs,
        f1_rhs=f1_rhs,
        f1_holds=f1_lhs <= f1_rhs * (1.0 + rtol) + slack,
        f2_lhs=f2_lhs,
        f2_rhs=f2_rhs,
        f2_ratio=ratio,
    )
