import logging
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple
import numpy as np
from app.errors import EmptyFeasibleInterval, InfeasibleDual, RegionEmpty
from app.schemas import (
    DualTriple,
    ExponentTriple,
    Interval,
    ProblemParams,
    ThetaValues,
    parse_rational,
)

logger = logging.getLogger(__name__)

HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


# Scaling quantities


def critical_index(params: ProblemParams) -> Fraction:
    """
    Critical Sobolev index s_c = d/2 - (2 - alpha)/beta.
    """
    return Fraction(params.d, 2) - (2 - params.alpha) / params.beta


def compute_thetas(params: ProblemParams) -> ThetaValues:
    """
    Time exponents of the nonlinear estimates.

    :param params: ProblemParams

    :returns: ThetaValues with theta0 = -d beta/4 + 1 - alpha/2,
        theta1 = theta0 + s beta/2 and theta2 = theta0 + s(beta+1)/2
    """
    d, alpha, beta, s = params.d, params.alpha, params.beta, params.s
    theta0 = -d * beta / 4 + 1 - alpha / 2
    return ThetaValues(
        theta0=theta0,
        theta1=theta0 + s * beta / 2,
        theta2=theta0 + s * (beta + 1) / 2,
    )


def lifespan_exponent(params: ProblemParams) -> Fraction:
    """
    Exponent p of T ~ ||u0||_{L^2}^(-p), p = beta/theta0.

    :raises: ValueError in the critical case theta0 == 0.
    """
    theta0 = compute_thetas(params).theta0
    if theta0 == 0:
        raise ValueError("Life span is not a power of the norm when theta0 = 0")
    return params.beta / theta0


# Linear estimates


def check_classical(inv_q, inv_r, d: int) -> bool:
    """
    Unweighted Strichartz pairs: 2/q = d(1/2 - 1/r), 0 <= 1/q, 1/r <= 1/2.
    """
    inv_q, inv_r = parse_rational(inv_q), parse_rational(inv_r)
    return (
        2 * inv_q == d * (HALF - inv_r)
        and 0 <= inv_q <= HALF
        and 0 <= inv_r <= HALF
    )


def check_kato_yajima(rho, d: int) -> bool:
    """
    Range -(d-2)/2 < rho < 1/2 of the local smoothing estimate.
    """
    rho = parse_rational(rho)
    return -Fraction(d - 2, 2) < rho < HALF


def prop1_checks(triple: ExponentTriple, s, d: int) -> Dict[str, bool]:
    s = parse_rational(s)
    g, iq, ir = triple.gamma, triple.inv_q, triple.inv_r
    return {
        "scaling": 2 * iq == d * (HALF - ir) + g - s,
        "q_window": (g - s) / 2 < iq <= HALF,
        "r_window": (g - s) / 2 <= ir < HALF,
        "gamma_window": 3 * s < g < 1 + s,
    }


def check_prop1(triple: ExponentTriple, s, d: int) -> bool:
    """
    Admissibility of a primal triple for the weighted homogeneous estimate.
    """
    return all(prop1_checks(triple, s, d).values())


def prop1_dual_checks(dual: DualTriple, s, d: int) -> Dict[str, bool]:
    s = parse_rational(s)
    g, iq, ir = dual.gamma_t, dual.inv_qt, dual.inv_rt
    return {
        "scaling": 2 * iq == d * (HALF - ir) + g + s,
        "q_window": (g + s) / 2 < iq <= HALF,
        "r_window": (g + s) / 2 <= ir < HALF,
        "gamma_window": s < g < 1 - s,
    }


def check_prop1_dual(dual: DualTriple, s, d: int) -> bool:
    """
    Admissibility of a dual triple for the smoothing estimate.
    """
    return all(prop1_dual_checks(dual, s, d).values())


def check_interp_region(inv_q, inv_r, gamma, sigma, d: int) -> bool:
    """
    Region of (1/q, 1/r, gamma, sigma) on which
    ||e^{itLap} f||_{L^q L^r(|x|^{-r gamma})} <~ ||f||_{Hdot^{-sigma}}
    follows from interpolating the classical and smoothing estimates.
    """
    iq, ir = parse_rational(inv_q), parse_rational(inv_r)
    g, sigma = parse_rational(gamma), parse_rational(sigma)
    theta = g + sigma
    return (
        0 < theta < 1
        and -g * (d - 2) / d < sigma < g
        and 2 * iq == d * (HALF - ir) + theta
        and theta / 2 <= iq <= HALF
        and theta / 2 <= ir <= HALF
        and (iq, ir) != (theta / 2, HALF)
    )


def check_stein_weiss(a, b, inv_p, inv_q, s, d: int) -> Dict[str, bool]:
    """
    Side conditions of || |x|^b f ||_q <= C || |x|^a |grad|^s f ||_p.

    :returns: dict of named conditions
    """
    a, b, s = parse_rational(a), parse_rational(b), parse_rational(s)
    inv_p, inv_q = parse_rational(inv_p), parse_rational(inv_q)
    return {
        "order": 0 < s < d,
        "exponents": 0 < inv_q <= inv_p < 1,
        "b_lower": -d * inv_q < b,
        "b_le_a": b <= a,
        "a_upper": a < d * (1 - inv_p),
        "balance": a - b - s == d * inv_q - d * inv_p,
    }


# Theorem windows


def thm1_mode(params: ProblemParams) -> bool:
    """
    0 < beta <= (4 - 2 alpha)/d.
    """
    return 0 < params.beta <= (4 - 2 * params.alpha) / params.d


def thm2_alpha_lower(d: int, s) -> Fraction:
    s = parse_rational(s)
    return max(
        Fraction(26 - 3 * d, 12),
        (12 * s + 4 * d * s - 8 * s * s) / (d + 4 * s),
    )


def thm2_beta_interval(d: int, s, alpha) -> Interval:
    s, alpha = parse_rational(s), parse_rational(alpha)
    return Interval(
        lo=max(Fraction(0), (10 * s - 2 * alpha) / (d - 6 * s)),
        hi=(4 - 2 * alpha) / (d - 2 * s),
        hi_closed=True,
    )


def thm2_mode(params: ProblemParams) -> bool:
    """
    0 < s < 1/3 with alpha and beta in the fractional-regularity windows.
    """
    d, s = params.d, params.s
    return (
        0 < s < THIRD
        and thm2_alpha_lower(d, s) < params.alpha < 2
        and thm2_beta_interval(d, s, params.alpha).contains(params.beta)
    )


def thm1_gamma_interval(params: ProblemParams) -> Interval:
    a, b1 = params.alpha, params.beta + 1
    return Interval(
        lo=max(Fraction(0), (a - 1) / b1), hi=min(Fraction(1), a / b1)
    )


def thm2_gamma_interval(params: ProblemParams) -> Interval:
    d, a, b, s = params.d, params.alpha, params.beta, params.s
    b1 = b + 1
    return Interval(
        lo=max(3 * s, (a + s - 1) / b1),
        hi=min(1 + s, (a - s) / b1, (d * b + 2 * a - 4 * s) / (2 * b1)),
    )


def thm1_r_interval(params: ProblemParams, gamma) -> Interval:
    d, a, b1 = params.d, params.alpha, params.beta + 1
    gamma = parse_rational(gamma)
    return Interval(
        lo=1 / (2 * b1),
        hi=(d - 2 * (a - 1)) / (2 * d * b1) + gamma / d,
    )


def thm2_r_interval(params: ProblemParams, gamma) -> Interval:
    d, a, b1, s = params.d, params.alpha, params.beta + 1, params.s
    gamma = parse_rational(gamma)
    return Interval(
        lo=max(1 / (2 * b1), 1 / (2 * b1) + (2 * s - a) / (d * b1) + gamma / d),
        hi=(d - 2 * s - 2 * (a - 1)) / (2 * d * b1) + gamma / d,
    )


def scaling_r_interval(d: int, gamma, s=Fraction(0)) -> Interval:
    """
    1/r for which the 1/q forced by the scaling relation lies in
    ((gamma - s)/2, 1/2].
    """
    gamma, s = parse_rational(gamma), parse_rational(s)
    return Interval(
        lo=Fraction(d - 2, 2 * d) + (gamma - s) / d, hi=HALF, lo_closed=True
    )


def thm1_checks(
    params: ProblemParams, triple: ExponentTriple
) -> Dict[str, bool]:
    d = params.d
    g, iq, ir = triple.gamma, triple.inv_q, triple.inv_r
    return {
        "beta_window": thm1_mode(params),
        "gamma_window": thm1_gamma_interval(params).contains(g),
        "scaling": 2 * iq == d * (HALF - ir) + g,
        "q_window": g / 2 < iq <= HALF,
        "r_window": thm1_r_interval(params, g).contains(ir),
    }


def check_thm1(params: ProblemParams, triple: ExponentTriple) -> bool:
    """
    Every condition of the L^2 well-posedness theorem for (q, r, gamma).
    """
    return all(thm1_checks(params, triple).values())


def thm2_checks(
    params: ProblemParams, triple: ExponentTriple
) -> Dict[str, bool]:
    d, s = params.d, params.s
    g, iq, ir = triple.gamma, triple.inv_q, triple.inv_r
    return {
        "s_range": 0 < s < THIRD,
        "alpha_window": thm2_alpha_lower(d, s) < params.alpha < 2,
        "beta_window": thm2_beta_interval(d, s, params.alpha).contains(
            params.beta
        ),
        "gamma_window": thm2_gamma_interval(params).contains(g),
        "scaling": 2 * iq == d * (HALF - ir) + g - s,
        "q_window": (g - s) / 2 < iq <= HALF,
        "r_window": thm2_r_interval(params, g).contains(ir),
    }


def check_thm2(params: ProblemParams, triple: ExponentTriple) -> bool:
    """
    Every condition of the H^s well-posedness theorem for (q, r, gamma).
    """
    return all(thm2_checks(params, triple).values())


# Dual constructions


def _hoelder_dual(params, triple, theta) -> DualTriple:
    b1 = params.beta + 1
    inv_rt = 1 - b1 * triple.inv_r
    inv_qt = 1 - theta - b1 * triple.inv_q
    gamma_t = params.alpha - triple.gamma * b1
    for name, value in (("1/q~", inv_qt), ("1/r~", inv_rt)):
        if not 0 < value < 1:
            raise InfeasibleDual(f"Derived {name} = {value} outside (0, 1)")
    return DualTriple(inv_qt=inv_qt, inv_rt=inv_rt, gamma_t=gamma_t)


def derive_dual_L2(
    params: ProblemParams, triple: ExponentTriple
) -> Tuple[DualTriple, Fraction]:
    """
    Dual triple of the L^2 nonlinear estimate:
    1/q~' = theta0 + (beta+1)/q, 1/r~' = (beta+1)/r,
    gamma~ = alpha - gamma(beta+1).

    :param params: ProblemParams
    :param triple: ExponentTriple passing check_thm1

    :returns: (DualTriple, theta0)

    :raises: InfeasibleDual if a derived reciprocal leaves (0, 1).
    """
    theta0 = compute_thetas(params).theta0
    return _hoelder_dual(params, triple, theta0), theta0


def derive_dual_Hs_first(
    params: ProblemParams, triple: ExponentTriple
) -> Tuple[DualTriple, Fraction]:
    """
    Same construction as derive_dual_L2 with theta1 in place of theta0.
    """
    theta1 = compute_thetas(params).theta1
    return _hoelder_dual(params, triple, theta1), theta1


def r2_interval(params: ProblemParams, triple: ExponentTriple) -> Interval:
    """
    Feasible set of 1/r2~ for the second H^s dual: intersection of the
    embedding window, the Hoelder window and (s, 1/2).
    """
    d, a, b1, s = params.d, params.alpha, params.beta + 1, params.s
    g, ir = triple.gamma, triple.inv_r
    embedding = Interval(
        lo=(2 * s - a + g * b1) / d - b1 * ir + 1,
        hi=(d - a + g * b1) / (d - 2) - d * b1 * ir / (d - 2),
        hi_closed=True,
    )
    hoelder = Interval(
        lo=1 - b1 * ir,
        hi=s / d + 1 - b1 * ir,
        lo_closed=True,
        hi_closed=True,
    )
    return embedding.intersect(hoelder).intersect(Interval(lo=s, hi=HALF))


def derive_dual_Hs_second(
    params: ProblemParams, triple: ExponentTriple
) -> Tuple[DualTriple, Fraction]:
    """
    Dual triple of the estimate carrying |grad|^-s. 1/r2~ is the midpoint of
    r2_interval; gamma2~ and 1/q2~ follow from the embedding balance and
    the scaling relation.

    :param params: ProblemParams
    :param triple: ExponentTriple passing check_thm2

    :returns: (DualTriple, theta2)

    :raises: EmptyFeasibleInterval if no 1/r2~ exists.
    """
    d, a, b1 = params.d, params.alpha, params.beta + 1
    interval = r2_interval(params, triple)
    if interval.is_empty:
        raise EmptyFeasibleInterval(
            f"No 1/r2~ in [{interval.lo}, {interval.hi}] for {triple}"
        )
    x = interval.midpoint()
    source_weight = a - triple.gamma * b1
    gamma_t = source_weight - params.s - d * (1 - x) + d * b1 * triple.inv_r
    inv_qt = (-Fraction(d, 2) + source_weight + d * b1 * triple.inv_r) / 2
    theta2 = compute_thetas(params).theta2
    return DualTriple(inv_qt=inv_qt, inv_rt=x, gamma_t=gamma_t), theta2


def stein_weiss_checks(
    params: ProblemParams, triple: ExponentTriple, dual2: DualTriple
) -> Dict[str, bool]:
    """
    Embedding side conditions with a = alpha - gamma(beta+1), b = gamma2~,
    p = r/(beta+1) and q = r2~'.
    """
    b1 = params.beta + 1
    return check_stein_weiss(
        a=params.alpha - triple.gamma * b1,
        b=dual2.gamma_t,
        inv_p=b1 * triple.inv_r,
        inv_q=dual2.inv_rt_prime,
        s=params.s,
        d=params.d,
    )


def dual_checks(
    params: ProblemParams,
    triple: ExponentTriple,
    dual: DualTriple,
    theta: Fraction,
    s=Fraction(0),
    hoelder_space: bool = True,
) -> Dict[str, bool]:
    """
    Named audit of a dual triple: admissibility, q > q~', and the exact
    Hoelder bookkeeping in time (and in space when `hoelder_space`).
    """
    b1 = params.beta + 1
    checks = {
        f"dual_{k}": v for k, v in prop1_dual_checks(dual, s, params.d).items()
    }
    checks["q_exceeds_dual"] = triple.inv_q < dual.inv_qt_prime
    checks["time_hoelder"] = dual.inv_qt_prime == theta + b1 * triple.inv_q
    if hoelder_space:
        checks["space_hoelder"] = dual.inv_rt_prime == b1 * triple.inv_r
    return checks


def audit_triple(
    params: ProblemParams, triple: ExponentTriple, mode: str
) -> Dict[str, object]:
    """
    Derive and audit every dual for one sampled triple.

    :param params: ProblemParams
    :param triple: ExponentTriple
    :param mode: "l2" or "hs"

    :returns: dict with keys triple, duals, thetas, checks, verdict
    """
    checks: Dict[str, bool] = {}
    duals: Dict[str, Optional[DualTriple]] = {}
    if mode == "l2":
        checks.update(
            {f"thm_{k}": v for k, v in thm1_checks(params, triple).items()}
        )
        checks.update(
            {f"prop_{k}": v for k, v in prop1_checks(triple, 0, params.d).items()}
        )
        try:
            dual, theta0 = derive_dual_L2(params, triple)
            duals["dual"] = dual
            checks.update(dual_checks(params, triple, dual, theta0))
        except InfeasibleDual:
            checks["dual_feasible"] = False
    else:
        s = params.s
        checks.update(
            {f"thm_{k}": v for k, v in thm2_checks(params, triple).items()}
        )
        checks.update(
            {f"prop_{k}": v for k, v in prop1_checks(triple, s, params.d).items()}
        )
        try:
            dual1, theta1 = derive_dual_Hs_first(params, triple)
            duals["dual1"] = dual1
            checks.update(
                {
                    f"first_{k}": v
                    for k, v in dual_checks(
                        params, triple, dual1, theta1, s=s
                    ).items()
                }
            )
        except InfeasibleDual:
            checks["first_dual_feasible"] = False
        try:
            dual2, theta2 = derive_dual_Hs_second(params, triple)
            duals["dual2"] = dual2
            checks.update(
                {
                    f"second_{k}": v
                    for k, v in dual_checks(
                        params, triple, dual2, theta2, s=s, hoelder_space=False
                    ).items()
                }
            )
            checks.update(
                {
                    f"embedding_{k}": v
                    for k, v in stein_weiss_checks(params, triple, dual2).items()
                }
            )
        except EmptyFeasibleInterval:
            checks["second_interval_nonempty"] = False
    return {
        "triple": triple,
        "duals": duals,
        "checks": checks,
        "verdict": all(checks.values()),
    }


# Sampling


def sample_interval(interval: Interval, rng, max_denominator: int) -> Fraction:
    """
    Rational strictly inside `interval`: lo + (hi - lo) k/D with
    1 <= k < D.

    :raises: ValueError on an empty interval.
    """
    return interval.sample(rng, max_denominator)


def default_mode(params: ProblemParams) -> str:
    return "hs" if params.s > 0 else "l2"


def region_sample(
    params: ProblemParams,
    n: int,
    rng_seed: int,
    mode: Optional[str] = None,
    max_denominator: int = 2**48,
    max_resamples: int = 1000,
) -> List[ExponentTriple]:
    """
    Draw n exactly admissible triples: gamma in its open interval, then 1/r
    in its window, then 1/q from the scaling relation.

    :param params: ProblemParams valid in the chosen mode
    :param n: number of triples
    :param rng_seed: seed of numpy's default generator
    :param mode: "l2" or "hs"; inferred from s when omitted
    :param max_denominator: D of the rational grid k/D
    :param max_resamples: attempts per triple

    :returns: list of ExponentTriple

    :raises: ValueError if params are outside the mode; RegionEmpty if a
        triple cannot be found within max_resamples attempts.
    """
    mode = mode or default_mode(params)
    if mode == "l2":
        if not thm1_mode(params):
            raise ValueError("Parameters are outside the L2 theorem window")
        gamma_interval = thm1_gamma_interval(params)
        r_window, check, s = thm1_r_interval, check_thm1, Fraction(0)
    elif mode == "hs":
        if not thm2_mode(params):
            raise ValueError("Parameters are outside the H^s theorem window")
        gamma_interval = thm2_gamma_interval(params)
        r_window, check, s = thm2_r_interval, check_thm2, params.s
    else:
        raise ValueError(f"Unknown mode {mode!r}")
    if gamma_interval.is_empty:
        raise RegionEmpty(f"Empty gamma interval {gamma_interval}")

    rng = np.random.default_rng(rng_seed)
    triples = []
    for _ in range(n):
        for _attempt in range(max_resamples):
            gamma = sample_interval(gamma_interval, rng, max_denominator)
            window = r_window(params, gamma).intersect(
                scaling_r_interval(params.d, gamma, s)
            )
            if window.is_empty:
                continue
            inv_r = sample_interval(window, rng, max_denominator)
            triple = ExponentTriple.from_scaling(inv_r, gamma, params.d, s)
            if check(params, triple):
                triples.append(triple)
                break
        else:
            raise RegionEmpty(
                f"No admissible triple after {max_resamples} resamples"
            )
    logger.debug("Sampled %d %s triples", len(triples), mode)
    return triples


# Hypothesis nonemptiness


def hypothesis_feasible(
    d: int, s
) -> Tuple[Interval, Callable[[Fraction], Interval]]:
    """
    Parameter windows of the H^s theorem.

    :param d: dimension, d >= 3
    :param s: regularity in [0, 1/3)

    :returns: (alpha interval, function alpha -> beta interval)

    :raises: ValueError outside d >= 3, 0 <= s < 1/3.
    """
    s = parse_rational(s)
    if d < 3 or not 0 <= s < THIRD:
        raise ValueError("Need d >= 3 and 0 <= s < 1/3")
    alpha_interval = Interval(lo=thm2_alpha_lower(d, s), hi=Fraction(2))

    def beta_interval(alpha) -> Interval:
        return thm2_beta_interval(d, s, alpha)

    return alpha_interval, beta_interval


def quadratic_f1(s, d: int) -> Fraction:
    s = parse_rational(s)
    return -4 * s * s + 2 * (1 + d) * s


def quadratic_f2(s, d: int, alpha) -> Fraction:
    s, alpha = parse_rational(s), parse_rational(alpha)
    return -10 * s * s + (5 * d + 12 - 4 * alpha) * s


def hypothesis_certificate(d: int, s) -> Dict[str, bool]:
    """
    Exact certificates that the H^s theorem's hypotheses are nonempty.
    The f2 bound is taken at the lower alpha endpoint.
    """
    alpha_interval, beta_interval = hypothesis_feasible(d, s)
    alpha_mid = alpha_interval.midpoint()
    return {
        "alpha_interval_nonempty": not alpha_interval.is_empty,
        "beta_interval_nonempty": not beta_interval(alpha_mid).is_empty,
        "f1_below_d": quadratic_f1(THIRD, d) < d,
        "f2_below_2d": quadratic_f2(THIRD, d, alpha_interval.lo) <= 2 * d,
        "beta_cap": (4 - 2 * alpha_mid) / (d - 2 * parse_rational(s))
        < (12 - 6 * alpha_mid) / (3 * d - 2),
    }


def l2_excess_window(d: int, s, alpha) -> bool:
    """
    Whether the H^s beta window contains ((4-2alpha)/d, (4-2alpha)/(d-2s)].
    """
    beta_lo = thm2_beta_interval(d, s, alpha).lo
    return beta_lo <= (4 - 2 * parse_rational(alpha)) / d


def l2_excess_criterion(d: int, s, alpha) -> bool:
    """
    Closed form of l2_excess_window: alpha >= 5s, or
    alpha >= (5ds - 2d + 12s)/(6s).
    """
    s, alpha = parse_rational(s), parse_rational(alpha)
    if alpha >= 5 * s:
        return True
    return alpha >= (5 * d * s - 2 * d + 12 * s) / (6 * s)
