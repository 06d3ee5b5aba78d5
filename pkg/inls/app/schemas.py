from fractions import Fraction
from typing import Dict, List, Optional
from pydantic import BaseModel, Field, validator


def parse_rational(value) -> Fraction:
    """
    Parse an exact rational from a Fraction, an int, a float or a "p/q"
    string.

    :param value: value to parse

    :returns: Fraction

    :raises: ValueError if the value is not a rational literal.
    """
    if isinstance(value, bool):
        raise ValueError(f"Not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"Malformed rational: {value!r}")
    raise ValueError(f"Not a rational: {value!r}")


class Rational(Fraction):
    """
    Pydantic field type for exact rationals.
    """

    @classmethod
    def __get_validators__(cls):
        yield parse_rational


ENCODERS = {Fraction: str}


# Spatial discretization


class GridSpec(BaseModel):
    """
    Periodic box [-L, L)^d sampled with N points per axis.
    """

    dimension: int
    points_per_axis: int
    half_length: float = 16.0

    class Config:
        frozen = True

    @validator("dimension")
    def dimension_positive(cls, v):
        if v < 1:
            raise ValueError("dimension must be >= 1")
        return v

    @validator("points_per_axis")
    def points_power_of_two(cls, v):
        if v < 8 or v & (v - 1) != 0:
            raise ValueError("points_per_axis must be a power of two >= 8")
        return v

    @validator("half_length")
    def half_length_positive(cls, v):
        if not v > 0:
            raise ValueError("half_length must be positive")
        return v

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.points_per_axis

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dimension

    @property
    def volume(self) -> float:
        return (2.0 * self.half_length) ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension


# Exponents


class ProblemParams(BaseModel):
    """
    PDE parameters of i u_t + Lap u = lambda |x|^(-alpha) |u|^beta u.
    """

    d: int
    alpha: Rational
    beta: Rational
    s: Rational = Fraction(0)
    lam: int = Field(1, alias="lambda")

    class Config:
        frozen = True
        allow_population_by_field_name = True
        json_encoders = ENCODERS

    @validator("d")
    def dimension_at_least_three(cls, v):
        if v < 3:
            raise ValueError("d must be >= 3")
        return v

    @validator("alpha")
    def alpha_range(cls, v):
        if not 0 < v < 2:
            raise ValueError("alpha must lie in (0, 2)")
        return v

    @validator("beta")
    def beta_positive(cls, v):
        if not v > 0:
            raise ValueError("beta must be positive")
        return v

    @validator("s")
    def s_range(cls, v):
        if not 0 <= v < Fraction(1, 3):
            raise ValueError("s must lie in [0, 1/3)")
        return v

    @validator("lam")
    def lam_sign(cls, v):
        if v not in (-1, 1):
            raise ValueError("lambda must be -1 or +1")
        return v

    @property
    def alpha_f(self) -> float:
        return float(self.alpha)

    @property
    def beta_f(self) -> float:
        return float(self.beta)

    @property
    def s_f(self) -> float:
        return float(self.s)


class ExponentTriple(BaseModel):
    """
    (q, r, gamma) stored as (1/q, 1/r, gamma).
    """

    inv_q: Rational
    inv_r: Rational
    gamma: Rational

    class Config:
        frozen = True
        json_encoders = ENCODERS

    @validator("inv_q")
    def inv_q_range(cls, v):
        if not 0 < v <= Fraction(1, 2):
            raise ValueError("1/q must lie in (0, 1/2]")
        return v

    @validator("inv_r")
    def inv_r_range(cls, v):
        if not 0 < v < Fraction(1, 2):
            raise ValueError("1/r must lie in (0, 1/2)")
        return v

    @classmethod
    def from_scaling(cls, inv_r, gamma, d: int, s=Fraction(0)):
        """
        Build the triple whose 1/q is forced by 2/q = d(1/2 - 1/r) + gamma - s.
        """
        inv_r = parse_rational(inv_r)
        gamma = parse_rational(gamma)
        inv_q = (d * (Fraction(1, 2) - inv_r) + gamma - parse_rational(s)) / 2
        return cls(inv_q=inv_q, inv_r=inv_r, gamma=gamma)

    @property
    def q(self) -> float:
        return 1.0 / float(self.inv_q)

    @property
    def r(self) -> float:
        return 1.0 / float(self.inv_r)


class DualTriple(BaseModel):
    """
    (q~, r~, gamma~) stored as reciprocals. The source-side norm is
    L^{q~'}_t L^{r~'}_x(|x|^{r~' gamma~}).
    """

    inv_qt: Rational
    inv_rt: Rational
    gamma_t: Rational

    class Config:
        frozen = True
        json_encoders = ENCODERS

    @property
    def inv_qt_prime(self) -> Fraction:
        return 1 - self.inv_qt

    @property
    def inv_rt_prime(self) -> Fraction:
        return 1 - self.inv_rt


class ThetaValues(BaseModel):
    theta0: Rational
    theta1: Rational
    theta2: Rational

    class Config:
        frozen = True
        json_encoders = ENCODERS


class Interval(BaseModel):
    """
    Rational interval with open or closed ends.
    """

    lo: Rational
    hi: Rational
    lo_closed: bool = False
    hi_closed: bool = False

    class Config:
        frozen = True
        json_encoders = ENCODERS

    @property
    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo == self.hi and self.lo_closed and self.hi_closed)

    def contains(self, x) -> bool:
        x = parse_rational(x)
        above = x >= self.lo if self.lo_closed else x > self.lo
        below = x <= self.hi if self.hi_closed else x < self.hi
        return above and below

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def sample(self, rng, max_denominator: int = 2**48) -> Fraction:
        """
        Rational lo + (hi - lo) k/D with 1 <= k < D drawn from `rng`.

        :raises: ValueError on an empty interval.
        """
        if self.is_empty:
            raise ValueError(f"Cannot sample from empty interval {self}")
        if self.lo == self.hi:
            return self.lo
        k = int(rng.integers(1, max_denominator))
        return self.lo + (self.hi - self.lo) * Fraction(k, max_denominator)

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif self.lo < other.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif self.hi > other.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        return Interval(lo=lo, hi=hi, lo_closed=lo_closed, hi_closed=hi_closed)


# Norms and solver


class WeightedNormSpec(BaseModel):
    """
    Spec of L^q_t L^r_x(|x|^(-r gamma)); with dual=True the weight is
    |x|^(+r gamma) as in the source-side norms.
    """

    r: float
    gamma: float = 0.0
    q: Optional[float] = None
    dual: bool = False

    class Config:
        frozen = True

    @validator("r")
    def r_finite(cls, v):
        if not 1 <= v < float("inf"):
            raise ValueError("r must satisfy 1 <= r < inf")
        return v

    @validator("gamma")
    def gamma_nonnegative(cls, v):
        if v < 0:
            raise ValueError("gamma must be >= 0")
        return v

    @validator("q")
    def q_at_least_one(cls, v):
        if v is not None and not 1 <= v < float("inf"):
            raise ValueError("q must satisfy 1 <= q < inf")
        return v

    @classmethod
    def primal(cls, triple: ExponentTriple):
        return cls(r=triple.r, gamma=float(triple.gamma), q=triple.q)

    @classmethod
    def source(cls, dual: DualTriple):
        return cls(
            r=1.0 / float(dual.inv_rt_prime),
            gamma=float(dual.gamma_t),
            q=1.0 / float(dual.inv_qt_prime),
            dual=True,
        )


class PicardConfig(BaseModel):
    T: float
    n_t: int = 16
    max_iter: int = 64
    tol: float = 1e-10
    M_bound: Optional[float] = None
    blowup_factor: float = 1e6
    distance_s: float = 0.0
    linear: bool = False

    @validator("T", "tol")
    def strictly_positive(cls, v):
        if not v > 0:
            raise ValueError("T and tol must be positive")
        return v

    @validator("n_t")
    def enough_steps(cls, v):
        if v < 8:
            raise ValueError("n_t must be >= 8")
        return v


class HsEstimateReport(BaseModel):
    f1_lhs: float
    f1_rhs: float
    f1_holds: bool
    f2_lhs: float
    f2_rhs: float
    f2_ratio: float


# Reports


class ExperimentReport(BaseModel):
    """
    Record of one harness run.
    """

    experiment: str
    params: Optional[dict] = None
    config: dict
    measurements: Dict[str, float] = {}
    verdict: Dict[str, bool] = {}
    failures: Dict[str, dict] = {}
    records: List[dict] = []
    seed: int = 0
    runtime_ms: int = 0

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())


# Command configs


class AdmissibleConfig(BaseModel):
    mode: str = "l2"
    d: int = 3
    alpha: Rational = Fraction(1)
    beta: Rational = Fraction(2, 3)
    s: Rational = Fraction(0)
    n: int = 10000
    seed: int = 0
    max_denominator: int = 2**48
    max_resamples: int = 1000
    workers: int = 1

    class Config:
        json_encoders = ENCODERS

    @validator("mode")
    def known_mode(cls, v):
        if v not in ("l2", "hs"):
            raise ValueError("mode must be 'l2' or 'hs'")
        return v


class SolveConfig(BaseModel):
    method: str = "both"
    d: int = 3
    alpha: Rational = Fraction(1)
    beta: Rational = Fraction(2, 3)
    s: Rational = Fraction(0)
    lam: int = 1
    points: int = 32
    half_length: float = 16.0
    norm: float = 0.1
    T: float = 0.25
    n_t: int = 32
    max_iter: int = 64
    windows: int = 1
    tol: float = 1e-10
    blowup_factor: float = 1e6
    dump: bool = False
    seed: int = 0

    class Config:
        json_encoders = ENCODERS

    @validator("method")
    def known_method(cls, v):
        if v not in ("picard", "splitstep", "both"):
            raise ValueError("method must be picard, splitstep or both")
        return v

    @validator("windows")
    def at_least_one_window(cls, v):
        if v < 1:
            raise ValueError("windows must be >= 1")
        return v


class VerifyConfig(BaseModel):
    d: int = 3
    alpha: Rational = Fraction(1)
    beta: Rational = Fraction(2, 3)
    s: Rational = Fraction(0)
    hs_alpha: Rational = Fraction(3, 2)
    hs_s: Rational = Fraction(1, 10)
    # Midpoint of the H^s beta window when unset
    hs_beta: Optional[Rational] = None
    lam: int = 1
    points: int = 16
    half_length: float = 8.0
    norm: float = 0.1
    T: float = 0.25
    n_t: int = 16
    samples: int = 100
    scaling_s: float = 0.25
    scaling_points: int = 64
    scaling_half_length: float = 16.0
    rtol: float = 1e-6
    seed: int = 0
    workers: int = 1

    class Config:
        json_encoders = ENCODERS

    @validator("n_t")
    def even_steps(cls, v):
        if v < 8 or v % 2:
            raise ValueError("n_t must be even and >= 8")
        return v


class StrichartzConfig(BaseModel):
    d: int = 3
    s: Rational = Fraction(0)
    # Each entry is [1/r, gamma]; 1/q follows from the scaling relation
    triples: List[List[Rational]] = []
    n: int = 50
    points: List[int] = [16, 32, 64]
    half_length: float = 8.0
    T: float = 1.0
    n_t: int = 16
    p: Optional[float] = None
    divergence: bool = True
    divergence_gamma: Optional[Rational] = None
    seed: int = 0
    workers: int = 1

    class Config:
        json_encoders = ENCODERS


class LifespanConfig(BaseModel):
    d: int = 3
    alpha: Rational = Fraction(1)
    beta: Rational = Fraction(1, 3)
    lam: int = 1
    points: int = 16
    half_length: float = 8.0
    amplitudes: List[float] = [0.25, 0.5, 1.0, 2.0, 4.0]
    # "scaling": lam^((2-alpha)/beta) u0(lam x); "amplitude": c u0
    family: str = "scaling"
    norm: float = 1.0
    n_t: int = 16
    max_iter: int = 64
    tol: float = 1e-10
    T_min: float = 1e-6
    T_max: float = 1e8
    bisections: int = 16
    seed: int = 0
    workers: int = 1

    class Config:
        json_encoders = ENCODERS

    @validator("family")
    def known_family(cls, v):
        if v not in ("scaling", "amplitude"):
            raise ValueError("family must be 'scaling' or 'amplitude'")
        return v


class ScatterConfig(BaseModel):
    d: int = 3
    alpha: Rational = Fraction(1)
    beta: Rational = Fraction(2, 3)
    lam: int = 1
    points: int = 32
    half_length: float = 16.0
    norm: float = 0.01
    T: float = 8.0
    dt: float = 0.05
    save_every: int = 4
    blowup_factor: float = 1e6
    seed: int = 0

    class Config:
        json_encoders = ENCODERS
