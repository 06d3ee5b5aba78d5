import logging
from functools import lru_cache
from typing import List
import numpy as np
from scipy import fft
from pydantic import BaseModel, validator
from app.schemas import GridSpec

logger = logging.getLogger(__name__)


# Grid geometry


@lru_cache(maxsize=32)
def coordinates(grid: GridSpec) -> np.ndarray:
    """
    Sample points x_j = -L + j*h of one axis.
    """
    x = -grid.half_length + grid.spacing * np.arange(grid.points_per_axis)
    x.setflags(write=False)
    return x


@lru_cache(maxsize=32)
def frequencies(grid: GridSpec) -> np.ndarray:
    """
    Dual grid frequencies xi_k = pi*k/L of one axis, in FFT order.
    """
    xi = 2.0 * np.pi * fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    xi.setflags(write=False)
    return xi


@lru_cache(maxsize=32)
def radius(grid: GridSpec) -> np.ndarray:
    """
    |x| on the full grid, shaped (N,)*d.
    """
    axes = np.meshgrid(*([coordinates(grid)] * grid.dimension), indexing="ij")
    r = np.sqrt(sum(a**2 for a in axes))
    r.setflags(write=False)
    return r


@lru_cache(maxsize=32)
def frequency_modulus(grid: GridSpec) -> np.ndarray:
    """
    |xi| on the full dual grid, shaped (N,)*d.
    """
    axes = np.meshgrid(*([frequencies(grid)] * grid.dimension), indexing="ij")
    k = np.sqrt(sum(a**2 for a in axes))
    k.setflags(write=False)
    return k


def clamped_radius(grid: GridSpec) -> np.ndarray:
    """
    max(|x|, h/2): the origin regularization shared by the weighted norms
    and the nonlinearity.
    """
    return np.maximum(radius(grid), grid.spacing / 2.0)


# Fields


class ComplexField(BaseModel):
    """
    Complex samples of a function on a GridSpec. `values` is stored shaped
    (N,)*d; `flat` gives the row-major vector.
    """

    grid: GridSpec
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("values", pre=True)
    def shape_and_finite(cls, v, values):
        grid = values.get("grid")
        if grid is None:
            raise ValueError("grid is required")
        arr = np.asarray(v, dtype=np.complex128)
        if arr.size != grid.size:
            raise ValueError(
                f"values length {arr.size} does not match grid size {grid.size}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        return arr.reshape(grid.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "ComplexField":
        return ComplexField(grid=self.grid, values=values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def zeros(grid: GridSpec) -> ComplexField:
    return ComplexField(grid=grid, values=np.zeros(grid.shape))


class Trajectory(BaseModel):
    """
    Snapshots u(t_k) for t_k = k*T/n_t, stored as one array of shape
    (n_t + 1, N, ..., N).
    """

    grid: GridSpec
    times: np.ndarray
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("times", pre=True)
    def uniform_times(cls, v):
        times = np.asarray(v, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a trajectory needs at least two snapshots")
        steps = np.diff(times)
        if not np.all(steps > 0) or not np.allclose(
            steps, steps[0], rtol=1e-9, atol=0.0
        ):
            raise ValueError("times must form a uniform increasing mesh")
        return times

    @validator("values", pre=True)
    def snapshot_shape(cls, v, values):
        grid = values.get("grid")
        times = values.get("times")
        if grid is None or times is None:
            raise ValueError("grid and times are required")
        arr = np.asarray(v, dtype=np.complex128)
        if arr.size != times.size * grid.size:
            raise ValueError("snapshot count does not match times")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory values must be finite")
        return arr.reshape((times.size,) + grid.shape)

    @classmethod
    def constant(cls, f: ComplexField, T: float, n_t: int):
        times = np.linspace(0.0, T, n_t + 1)
        values = np.broadcast_to(f.values, (n_t + 1,) + f.grid.shape)
        return cls(grid=f.grid, times=times, values=values)

    @property
    def n_t(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def snapshots(self) -> List[ComplexField]:
        return [self.snapshot(k) for k in range(self.times.size)]

    def snapshot(self, k: int) -> ComplexField:
        return ComplexField(grid=self.grid, values=self.values[k])

    @property
    def initial(self) -> ComplexField:
        return self.snapshot(0)

    @property
    def final(self) -> ComplexField:
        return self.snapshot(-1)

    def with_values(self, values) -> "Trajectory":
        return Trajectory(grid=self.grid, times=self.times, values=values)


# Transforms


def transform(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """
    Forward transform with Riemann weight h^d, so that
    sum |f|^2 h^d = (1/V) sum |f^|^2.
    """
    axes = tuple(range(-grid.dimension, 0))
    return grid.cell_volume * fft.fftn(values, axes=axes)


def inverse_transform(values_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    axes = tuple(range(-grid.dimension, 0))
    return fft.ifftn(values_hat, axes=axes) / grid.cell_volume


class FourierMultiplier(BaseModel):
    """
    Diagonal operator f^ -> m(xi) f^ on the dual grid.
    """

    grid: GridSpec
    symbol: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("symbol", pre=True)
    def symbol_shape(cls, v, values):
        grid = values.get("grid")
        if grid is None:
            raise ValueError("grid is required")
        arr = np.asarray(v, dtype=np.complex128)
        if arr.size != grid.size:
            raise ValueError("symbol length does not match grid size")
        return arr.reshape(grid.shape)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """
        Apply to raw samples; leading axes (e.g. time) are broadcast.
        """
        axes = tuple(range(-self.grid.dimension, 0))
        return fft.ifftn(self.symbol * fft.fftn(values, axes=axes), axes=axes)

    def apply(self, f: ComplexField) -> ComplexField:
        if f.grid != self.grid:
            raise ValueError("Field and multiplier live on different grids")
        return f.with_values(self.apply_values(f.values))

    def compose(self, other: "FourierMultiplier") -> "FourierMultiplier":
        if other.grid != self.grid:
            raise ValueError("Multipliers live on different grids")
        return FourierMultiplier(grid=self.grid, symbol=self.symbol * other.symbol)


def propagator_symbol(grid: GridSpec, t: float) -> FourierMultiplier:
    """
    Symbol e^{-it|xi|^2} of the free Schrodinger group e^{itLap}.
    """
    k = frequency_modulus(grid)
    return FourierMultiplier(grid=grid, symbol=np.exp(-1j * t * k**2))


def fractional_symbol(grid: GridSpec, s: float) -> FourierMultiplier:
    """
    Symbol |xi|^s of |grad|^s.

    :param grid: GridSpec
    :param s: order, -d < s < d

    :returns: FourierMultiplier whose zero mode is 0 for s != 0 and 1 for
        s == 0

    :raises: ValueError if s is outside (-d, d).
    """
    d = grid.dimension
    if s <= -d or s >= d:
        raise ValueError(f"Fractional order s={s} outside (-{d}, {d})")
    k = frequency_modulus(grid)
    if s == 0:
        return FourierMultiplier(grid=grid, symbol=np.ones(grid.shape))
    symbol = np.zeros(grid.shape)
    nonzero = k > 0
    symbol[nonzero] = k[nonzero] ** s
    return FourierMultiplier(grid=grid, symbol=symbol)


# Operations


def free_propagate(f: ComplexField, t: float) -> ComplexField:
    """
    Solve i u_t + Lap u = 0 from u(0) = f up to time t.

    :param f: initial field
    :param t: time, any sign

    :returns: ComplexField e^{itLap} f
    """
    return propagator_symbol(f.grid, t).apply(f)


def fractional_derivative(f: ComplexField, s: float) -> ComplexField:
    """
    Apply |grad|^s. The mean mode is removed whenever s != 0.

    :raises: ValueError if s <= -d or s >= d.
    """
    return fractional_symbol(f.grid, s).apply(f)


def l2_norm(f: ComplexField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.cell_volume))


def mass(f: ComplexField) -> float:
    """
    Discrete mass ||f||_{L^2}^2.
    """
    return l2_norm(f) ** 2


def sobolev_norm(f: ComplexField, s: float, homogeneous: bool = True) -> float:
    """
    Fractional Sobolev norm from the Plancherel sum.

    :param f: field
    :param s: regularity, s >= 0
    :param homogeneous: Hdot^s when True, else (||f||^2 + ||f||_{Hdot^s}^2)^(1/2)

    :returns: float

    :raises: ValueError if s < 0.
    """
    if s < 0:
        raise ValueError("Sobolev order must be non-negative")
    grid = f.grid
    f_hat = transform(f.values, grid)
    if s == 0:
        weight = 1.0
    else:
        weight = frequency_modulus(grid) ** (2.0 * s)
    dot = np.sum(weight * np.abs(f_hat) ** 2) / grid.volume
    if homogeneous:
        return float(np.sqrt(dot))
    return float(np.sqrt(l2_norm(f) ** 2 + dot))


def _interpolation_matrix(grid: GridSpec, lam: float) -> np.ndarray:
    # Rows evaluate the trigonometric interpolant at lam * x_j; points that
    # leave the box are set to zero instead of wrapping around.
    n = grid.points_per_axis
    x = coordinates(grid)
    xi = frequencies(grid)
    targets = lam * x
    modes = np.exp(1j * np.outer(targets + grid.half_length, xi))
    matrix = modes @ fft.fft(np.eye(n), axis=0) / n
    outside = (targets < -grid.half_length) | (targets >= grid.half_length)
    matrix[outside] = 0.0
    return matrix


def rescale_field(
    f: ComplexField, lam: float, alpha: float, beta: float
) -> ComplexField:
    """
    Return lam^((2-alpha)/beta) f(lam x) by trigonometric interpolation.

    :param f: field
    :param lam: scaling factor, lam >= 1
    :param alpha: weight exponent
    :param beta: nonlinearity exponent

    :returns: ComplexField

    :raises: ValueError if lam < 1.
    """
    if lam < 1:
        raise ValueError("Scaling factor must be >= 1")
    if lam == 1:
        return f
    matrix = _interpolation_matrix(f.grid, lam)
    values = f.values
    for axis in range(f.grid.dimension):
        values = np.moveaxis(
            np.tensordot(matrix, values, axes=([1], [axis])), 0, axis
        )
    return f.with_values(lam ** ((2.0 - alpha) / beta) * values)


def gaussian(
    grid: GridSpec, width: float = 1.0, amplitude: float = 1.0
) -> ComplexField:
    """
    amplitude * exp(-|x|^2 / (2 width^2)) centred at the origin.
    """
    r = radius(grid)
    values = amplitude * np.exp(-(r**2) / (2.0 * width**2))
    return ComplexField(grid=grid, values=values)


def free_gaussian(grid: GridSpec, t: float) -> ComplexField:
    """
    Closed-form e^{itLap} exp(-|x|^2/2) = (1+2it)^(-d/2) exp(-|x|^2/(2(1+2it))).
    """
    z = 1.0 + 2.0j * t
    r = radius(grid)
    values = z ** (-grid.dimension / 2.0) * np.exp(-(r**2) / (2.0 * z))
    return ComplexField(grid=grid, values=values)


def normalize(f: ComplexField, target: float = 1.0) -> ComplexField:
    """
    Scale f to L^2 norm `target`.

    :raises: ValueError if f is zero.
    """
    norm = l2_norm(f)
    if norm == 0:
        raise ValueError("Cannot normalize the zero field")
    return f.with_values(f.values * (target / norm))
