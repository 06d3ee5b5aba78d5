import logging
from typing import List, Optional, Tuple
import numpy as np
from scipy import fft
from scipy.integrate import cumulative_trapezoid
from app.errors import BlowUp, NoConvergence, NotCauchy
from app.exponents import compute_thetas, critical_index
from app.norms import snapshot_norms, spacetime_norm, sup_time_l2
from app.schemas import (
    ExponentTriple,
    GridSpec,
    PicardConfig,
    ProblemParams,
    WeightedNormSpec,
)
from app.spectral import (
    ComplexField,
    Trajectory,
    clamped_radius,
    frequency_modulus,
    l2_norm,
)

logger = logging.getLogger(__name__)


def _spatial_axes(grid: GridSpec) -> tuple:
    return tuple(range(-grid.dimension, 0))


def _time_column(times: np.ndarray, grid: GridSpec) -> np.ndarray:
    return times.reshape((-1,) + (1,) * grid.dimension)


def _check_ceiling(values: np.ndarray, ceiling: float, step: int = 0):
    sup = np.max(np.abs(values)) if values.size else 0.0
    if not np.all(np.isfinite(values)) or sup > ceiling:
        raise BlowUp(step, float(sup))


def _ceiling(u0: ComplexField, factor: float) -> float:
    return factor * u0.sup_norm()


def _scaled_grid(grid: GridSpec, lam: float) -> GridSpec:
    # Same samples, half-length L/lam
    return GridSpec(
        dimension=grid.dimension,
        points_per_axis=grid.points_per_axis,
        half_length=grid.half_length / lam,
    )


# Nonlinearity


def nonlinearity_values(
    values: np.ndarray, grid: GridSpec, params: ProblemParams
) -> np.ndarray:
    """
    lambda * max(|x|, h/2)^(-alpha) |u|^beta u on raw samples.
    """
    weight = clamped_radius(grid) ** (-params.alpha_f)
    return params.lam * weight * np.abs(values) ** params.beta_f * values


def apply_nonlinearity(u: ComplexField, params: ProblemParams) -> ComplexField:
    """
    F(u) = lambda |x|^(-alpha) |u|^beta u with the clamped weight.

    :param u: field
    :param params: ProblemParams

    :returns: ComplexField
    """
    return u.with_values(nonlinearity_values(u.values, u.grid, params))


# Free evolution


def free_trajectory(u0: ComplexField, T: float, n_t: int) -> Trajectory:
    """
    e^{it Lap} u0 sampled at t_k = k T / n_t.
    """
    grid = u0.grid
    axes = _spatial_axes(grid)
    times = np.linspace(0.0, T, n_t + 1)
    phase = np.exp(-1j * _time_column(times, grid) * frequency_modulus(grid) ** 2)
    values = fft.ifftn(phase * fft.fftn(u0.values), axes=axes)
    return Trajectory(grid=grid, times=times, values=values)


def free_spacetime_norm(
    u0: ComplexField, spec: WeightedNormSpec, T: float, n_t: int
) -> float:
    """
    ||e^{it Lap} u0|| in the weighted space-time norm on [0, T].
    """
    return spacetime_norm(free_trajectory(u0, T, n_t), spec)


# Duhamel map and Picard iteration


def _duhamel_values(
    values: np.ndarray,
    u0: ComplexField,
    times: np.ndarray,
    params: ProblemParams,
    linear: bool,
) -> np.ndarray:
    # Interaction picture: integrate e^{i tau |xi|^2} F^(tau) with the
    # cumulative trapezoid rule, then propagate back to each t_k.
    grid = u0.grid
    axes = _spatial_axes(grid)
    k2 = frequency_modulus(grid) ** 2
    t = _time_column(times, grid)
    u0_hat = fft.fftn(u0.values)
    if linear:
        integral = 0.0
    else:
        source_hat = fft.fftn(nonlinearity_values(values, grid, params), axes=axes)
        integral = cumulative_trapezoid(
            np.exp(1j * t * k2) * source_hat, times, axis=0, initial=0
        )
    return fft.ifftn(np.exp(-1j * t * k2) * (u0_hat - 1j * integral), axes=axes)


def duhamel_map(
    traj: Trajectory,
    u0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
) -> Trajectory:
    """
    Phi(u)(t) = e^{it Lap} u0 - i int_0^t e^{i(t-tau) Lap} F(u(tau)) dtau on
    the snapshot mesh of `traj`, with the trapezoid rule in tau.

    :param traj: Trajectory u
    :param u0: initial datum on the same grid
    :param params: ProblemParams
    :param config: PicardConfig (linear hook, blow-up factor)

    :returns: Trajectory Phi(u)

    :raises: ValueError on mismatched grids; BlowUp above the ceiling.
    """
    if traj.grid != u0.grid:
        raise ValueError("Trajectory and initial datum live on different grids")
    values = _duhamel_values(traj.values, u0, traj.times, params, config.linear)
    _check_ceiling(values, _ceiling(u0, config.blowup_factor))
    return traj.with_values(values)


def _snapshot_distance(
    a: np.ndarray, b: np.ndarray, grid: GridSpec, distance_s: float
) -> float:
    diff = a - b
    l2 = snapshot_norms(diff, grid, WeightedNormSpec(r=2.0))
    if distance_s <= 0:
        return float(np.max(l2))
    axes = _spatial_axes(grid)
    diff_hat = grid.cell_volume * fft.fftn(diff, axes=axes)
    k = frequency_modulus(grid) ** (2.0 * distance_s)
    dot = np.sum(k * np.abs(diff_hat) ** 2, axis=axes) / grid.volume
    return float(np.max(np.sqrt(l2**2 + dot)))


def picard_solve(
    u0: ComplexField, params: ProblemParams, config: PicardConfig
) -> Tuple[Trajectory, int, List[float]]:
    """
    Iterate the Duhamel map from the free evolution until the sup-in-time
    increment drops below config.tol.

    :param u0: initial datum
    :param params: ProblemParams
    :param config: PicardConfig

    :returns: (Trajectory, iterations, increments)

    :raises: NoConvergence after config.max_iter iterations or when an
        iterate leaves the ball of radius config.M_bound; BlowUp.
    """
    grid = u0.grid
    free = free_trajectory(u0, config.T, config.n_t)
    times = free.times
    current = free.values
    ceiling = _ceiling(u0, config.blowup_factor)
    increments: List[float] = []
    for iteration in range(1, config.max_iter + 1):
        updated = _duhamel_values(current, u0, times, params, config.linear)
        _check_ceiling(updated, ceiling)
        increment = _snapshot_distance(
            updated, current, grid, config.distance_s
        )
        increments.append(increment)
        current = updated
        logger.debug("Picard iteration %d increment %.3e", iteration, increment)
        if config.M_bound is not None:
            radius = float(
                np.max(snapshot_norms(current, grid, WeightedNormSpec(r=2.0)))
            )
            if radius > config.M_bound:
                raise NoConvergence(iteration, increments)
        if increment < config.tol:
            return free.with_values(current), iteration, increments
    raise NoConvergence(config.max_iter, increments)


def duhamel_residual(
    traj: Trajectory,
    u0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
) -> float:
    """
    sup_k ||Phi(u)(t_k) - u(t_k)||_{L^2}.
    """
    image = duhamel_map(traj, u0, params, config)
    return sup_time_l2(image.with_values(image.values - traj.values))


def picard_extend(
    u0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
    windows: int,
) -> Tuple[Trajectory, List[int], List[List[float]]]:
    """
    Chain `windows` Picard solves of length config.T, each started from the
    previous final state.

    :returns: (Trajectory on [0, windows*T], iterations per window,
        increments per window)

    :raises: ValueError for windows < 1; NoConvergence; BlowUp.
    """
    if windows < 1:
        raise ValueError("Need at least one window")
    pieces = []
    iterations: List[int] = []
    increments: List[List[float]] = []
    start = u0
    for window in range(windows):
        traj, count, window_increments = picard_solve(start, params, config)
        logger.debug("Window %d converged in %d iterations", window, count)
        pieces.append(traj.values if window == 0 else traj.values[1:])
        iterations.append(count)
        increments.append(window_increments)
        start = traj.final
    n_total = config.n_t * windows
    times = np.linspace(0.0, config.T * windows, n_total + 1)
    traj = Trajectory(grid=u0.grid, times=times, values=np.concatenate(pieces))
    return traj, iterations, increments


# Split-step integrator


def splitstep_solve(
    u0: ComplexField,
    params: ProblemParams,
    dt: float,
    T: float,
    save_every: int = 1,
    blowup_factor: float = 1e6,
    linear: bool = False,
) -> Trajectory:
    """
    Strang splitting: half free step, exact phase rotation by the real
    potential lambda w(x)|u|^beta over dt, half free step.

    :param u0: initial datum
    :param params: ProblemParams
    :param dt: time step, must divide T
    :param T: horizon
    :param save_every: keep every save_every-th step
    :param blowup_factor: ceiling on sup|u| relative to sup|u0|
    :param linear: drop the nonlinear step

    :returns: Trajectory

    :raises: ValueError if dt does not divide T; BlowUp.
    """
    if dt <= 0 or T <= 0:
        raise ValueError("dt and T must be positive")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    if save_every < 1 or steps % save_every != 0:
        raise ValueError("save_every must divide the number of steps")

    grid = u0.grid
    axes = _spatial_axes(grid)
    half = np.exp(-0.5j * dt * frequency_modulus(grid) ** 2)
    weight = params.lam * clamped_radius(grid) ** (-params.alpha_f)
    ceiling = _ceiling(u0, blowup_factor)

    u = u0.values.copy()
    saved = [u.copy()]
    for step in range(1, steps + 1):
        u = fft.ifftn(half * fft.fftn(u, axes=axes), axes=axes)
        if not linear:
            u = u * np.exp(-1j * dt * weight * np.abs(u) ** params.beta_f)
        u = fft.ifftn(half * fft.fftn(u, axes=axes), axes=axes)
        _check_ceiling(u, ceiling, step)
        if step % save_every == 0:
            saved.append(u.copy())
    times = np.linspace(0.0, T, steps // save_every + 1)
    return Trajectory(grid=grid, times=times, values=np.stack(saved))


def splitstep_order(
    u0: ComplexField,
    params: ProblemParams,
    dt: float,
    T: float,
    blowup_factor: float = 1e6,
) -> float:
    """
    Observed order log2(|u_dt - u_dt/2| / |u_dt/2 - u_dt/4|) of the final
    states at T, in L^2.

    :raises: ValueError if dt does not divide T; BlowUp.
    """
    finals = [
        splitstep_solve(
            u0, params, dt / 2**k, T, save_every=2**k, blowup_factor=blowup_factor
        ).final.values
        for k in range(3)
    ]
    coarse, fine = (
        l2_norm(u0.with_values(a - b)) for a, b in zip(finals, finals[1:])
    )
    order = float(np.log2(coarse / fine))
    logger.debug("Split-step differences %.3e %.3e order %.3f", coarse, fine, order)
    return order


# Diagnostics


def trajectory_distance(
    u: Trajectory, v: Trajectory, triple: Optional[ExponentTriple] = None
) -> float:
    """
    sup-in-time L^2 distance, plus the weighted space-time distance when a
    triple is given.
    """
    diff = u.with_values(u.values - v.values)
    distance = sup_time_l2(diff)
    if triple is not None:
        distance += spacetime_norm(diff, WeightedNormSpec.primal(triple))
    return distance


def contraction_ratio(
    u: Trajectory,
    v: Trajectory,
    u0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
    triple: ExponentTriple,
) -> float:
    """
    d(Phi u, Phi v) / d(u, v) in the metric sup L^2 + weighted space-time.

    :raises: ValueError if u == v; WeightNotIntegrable.
    """
    if np.array_equal(u.values, v.values):
        raise ValueError("Contraction ratio needs two distinct trajectories")
    image_u = duhamel_map(u, u0, params, config)
    image_v = duhamel_map(v, u0, params, config)
    return trajectory_distance(image_u, image_v, triple) / trajectory_distance(
        u, v, triple
    )


def dependence_ratio(
    u0: ComplexField,
    v0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
    triple: Optional[ExponentTriple] = None,
) -> float:
    """
    d(u, v) / ||u0 - v0||_{L^2} for the Picard solutions from u0 and v0.

    :raises: ValueError if u0 == v0; NoConvergence; BlowUp.
    """
    gap = l2_norm(u0.with_values(u0.values - v0.values))
    if gap == 0:
        raise ValueError("Initial data must differ")
    u, _, _ = picard_solve(u0, params, config)
    v, _, _ = picard_solve(v0, params, config)
    return trajectory_distance(u, v, triple) / gap


def scaled_datum(
    u0: ComplexField, scale: float, params: ProblemParams
) -> ComplexField:
    """
    Member lam^((2-alpha)/beta) u0(lam x) of the scaling family whose L^2
    norm is scale * ||u0||, carried exactly onto the grid of half-length
    L/lam. Here lam = scale^(-1/s_c).

    :raises: ValueError unless scale > 0 and s_c < 0.
    """
    if scale <= 0:
        raise ValueError("Scale must be positive")
    s_c = float(critical_index(params))
    if s_c >= 0:
        raise ValueError("The scaling family needs s_c < 0")
    lam = scale ** (-1.0 / s_c)
    return ComplexField(
        grid=_scaled_grid(u0.grid, lam),
        values=lam ** ((2.0 - params.alpha_f) / params.beta_f) * u0.values,
    )


def family_datum(
    u0: ComplexField, scale: float, params: ProblemParams, family: str
) -> ComplexField:
    """
    Datum of L^2 norm scale * ||u0|| from the scaling or amplitude family.
    """
    if family == "scaling":
        return scaled_datum(u0, scale, params)
    if family == "amplitude":
        return u0.with_values(scale * u0.values)
    raise ValueError(f"Unknown family {family!r}")


def lifespan_estimate(
    scale: float,
    u0: ComplexField,
    params: ProblemParams,
    config: PicardConfig,
    T_min: float = 1e-6,
    T_max: float = 1e8,
    bisections: int = 16,
    family: str = "scaling",
) -> float:
    """
    Largest T in [T_min, T_max] on which Picard iteration from the datum of
    norm scale * ||u0|| converges, by bisection in log T.

    config.tol and config.M_bound are given for u0 and are multiplied by
    `scale`, so that along the scaling family T_star is exactly
    proportional to scale^(-beta/theta0).

    :param scale: ratio c of the data norm to ||u0||
    :param u0: base datum
    :param params: ProblemParams with theta0 > 0
    :param config: PicardConfig; its T is replaced by the bisection points
    :param T_min: lower bracket
    :param T_max: upper bracket
    :param bisections: number of halvings of the log bracket
    :param family: "scaling" or "amplitude"

    :returns: T_star

    :raises: ValueError when theta0 <= 0.
    """
    if compute_thetas(params).theta0 <= 0:
        raise ValueError("Life span estimate needs theta0 > 0")
    data = family_datum(u0, scale, params, family)
    update = {"tol": scale * config.tol}
    if config.M_bound is not None:
        update["M_bound"] = scale * config.M_bound
    config = config.copy(update=update)

    def converges(T: float) -> bool:
        try:
            picard_solve(data, params, config.copy(update={"T": T}))
        except (NoConvergence, BlowUp):
            return False
        return True

    if converges(T_max):
        logger.warning("Converged at T_max=%s for scale %s", T_max, scale)
        return T_max
    if not converges(T_min):
        logger.warning("No convergence at T_min=%s for scale %s", T_min, scale)
        return T_min
    lo, hi = np.log(T_min), np.log(T_max)
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        if converges(float(np.exp(mid))):
            lo = mid
        else:
            hi = mid
    return float(np.exp(lo))


def scattering_state(
    traj: Trajectory, params: ProblemParams
) -> Tuple[ComplexField, List[float]]:
    """
    Profiles e^{-it_k Lap} u(t_k) and their successive L^2 increments.

    :param traj: Trajectory of a global run
    :param params: ProblemParams

    :returns: (final profile phi, increments)

    :raises: NotCauchy if the increments of the final quarter exceed those
        of the first quarter.
    """
    grid = traj.grid
    axes = _spatial_axes(grid)
    t = _time_column(traj.times, grid)
    back = np.exp(1j * t * frequency_modulus(grid) ** 2)
    profiles = fft.ifftn(back * fft.fftn(traj.values, axes=axes), axes=axes)
    spec = WeightedNormSpec(r=2.0)
    increments = [
        float(x)
        for x in snapshot_norms(np.diff(profiles, axis=0), grid, spec)
    ]
    quarter = max(1, len(increments) // 4)
    if max(increments[-quarter:]) > max(increments[:quarter]):
        raise NotCauchy(increments)
    logger.debug(
        "Scattering increments for lambda=%d: first %.3e last %.3e",
        params.lam,
        increments[0],
        increments[-1],
    )
    return ComplexField(grid=grid, values=profiles[-1]), increments


def rescale_trajectory(
    traj: Trajectory, lam: float, alpha: float, beta: float
) -> Trajectory:
    """
    lam^((2-alpha)/beta) u(lam x, lam^2 t) carried exactly onto the grid of
    half-length L/lam and the times t/lam^2.
    """
    if lam <= 0:
        raise ValueError("Scaling factor must be positive")
    return Trajectory(
        grid=_scaled_grid(traj.grid, lam),
        times=traj.times / lam**2,
        values=lam ** ((2.0 - alpha) / beta) * traj.values,
    )
