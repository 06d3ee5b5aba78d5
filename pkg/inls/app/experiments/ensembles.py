from fractions import Fraction
from typing import List, Optional, Tuple
import numpy as np
from scipy import fft
from app.exponents import HALF, check_classical, check_prop1
from app.schemas import ExponentTriple, GridSpec, WeightedNormSpec, parse_rational
from app.spectral import ComplexField, gaussian, inverse_transform, sobolev_norm


def default_envelope(d: int, s: float) -> float:
    """
    Spectral decay p = (d + 2s + 1)/2 of the random ensemble.
    """
    return (d + 2.0 * s + 1.0) / 2.0


def _integer_modes(bandwidth: int) -> np.ndarray:
    # No Nyquist mode; the spectrum embeds unchanged in finer grids
    modes = np.rint(fft.fftfreq(bandwidth, d=1.0 / bandwidth)).astype(int)
    return modes[modes != -bandwidth // 2]


def random_field(
    grid: GridSpec,
    s: float,
    rng: np.random.Generator,
    p: Optional[float] = None,
    bandwidth: Optional[int] = None,
) -> ComplexField:
    """
    Gaussian random field with unit Hdot^s norm.

    Fourier coefficients are i.i.d. complex Gaussians on the integer modes
    |k| < bandwidth/2, shaped by |xi|^(-p) and zero at the mean mode. The
    same generator state gives the same function on every grid with the
    same half-length and points_per_axis >= bandwidth.

    :param grid: GridSpec
    :param s: regularity of the normalization
    :param rng: numpy Generator
    :param p: envelope exponent, default (d + 2s + 1)/2
    :param bandwidth: number of modes per axis, default points_per_axis

    :returns: ComplexField

    :raises: ValueError if bandwidth exceeds the grid resolution.
    """
    d = grid.dimension
    n = grid.points_per_axis
    bandwidth = bandwidth or n
    if bandwidth > n:
        raise ValueError(f"bandwidth {bandwidth} exceeds grid resolution {n}")
    p = default_envelope(d, s) if p is None else p

    modes = _integer_modes(bandwidth)
    shape = (modes.size,) * d
    coefficients = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    axes = np.meshgrid(*([modes * np.pi / grid.half_length] * d), indexing="ij")
    xi = np.sqrt(sum(a**2 for a in axes))
    envelope = np.zeros(shape)
    envelope[xi > 0] = xi[xi > 0] ** (-p)

    spectrum = np.zeros(grid.shape, dtype=complex)
    index = np.ix_(*([modes % n] * d))
    spectrum[index] = envelope * coefficients
    field = ComplexField(grid=grid, values=inverse_transform(spectrum, grid))
    return field.with_values(field.values / sobolev_norm(field, s))


def classical_triple(d: int) -> ExponentTriple:
    """
    Unweighted Strichartz pair with 1/q = 3/10.
    """
    inv_q = Fraction(3, 10)
    inv_r = HALF - 2 * inv_q / d
    if not check_classical(inv_q, inv_r, d):
        raise ValueError(f"No classical pair with 1/q = 3/10 in d={d}")
    return ExponentTriple(inv_q=inv_q, inv_r=inv_r, gamma=0)


def admissible_triple(d: int, s, gamma) -> ExponentTriple:
    """
    Triple with the given gamma and 1/r at the midpoint of its window.
    """
    s, gamma = parse_rational(s), parse_rational(gamma)
    lo = max((gamma - s) / 2, Fraction(d - 2, 2 * d) + (gamma - s) / d)
    triple = ExponentTriple.from_scaling((lo + HALF) / 2, gamma, d, s)
    if not check_prop1(triple, s, d):
        raise ValueError(f"No admissible triple with gamma={gamma}, s={s}")
    return triple


def default_strichartz_triples(d: int, s) -> List[Tuple[str, ExponentTriple]]:
    """
    Labelled triples at 1/4, 1/2 and 3/4 of the window 3s < gamma < 1+s,
    plus the classical unweighted pair when s = 0.
    """
    s = parse_rational(s)
    lo, hi = 3 * s, 1 + s
    triples = [
        (f"gamma_{k}_4", admissible_triple(d, s, lo + (hi - lo) * k / 4))
        for k in (1, 2, 3)
    ]
    if s == 0:
        triples.append(("classical", classical_triple(d)))
    return triples


def divergence_gamma(s, gamma=None) -> Fraction:
    """
    Weight exponent of the divergence run, default 1 + s + 1/5, above
    the gamma window.
    """
    s = parse_rational(s)
    return 1 + s + Fraction(1, 5) if gamma is None else parse_rational(gamma)


def divergence_spec(s, gamma=None) -> WeightedNormSpec:
    """
    Weighted L^2_t L^2_x(|x|^(-2 gamma)) norm with gamma from divergence_gamma.
    """
    return WeightedNormSpec(q=2.0, r=2.0, gamma=float(divergence_gamma(s, gamma)))


def concentrating_field(grid: GridSpec, s: float) -> ComplexField:
    """
    Gaussian of width 2h with unit Hdot^s norm. It concentrates at the
    origin under refinement.
    """
    f = gaussian(grid, width=2.0 * grid.spacing)
    return f.with_values(f.values / sobolev_norm(f, s))
