class INLSError(ValueError):
    """
    Base class for every named failure of the laboratory.
    """


class WeightNotIntegrable(INLSError):
    """
    Raised when r*gamma >= d, i.e. |x|^(-r*gamma) is not locally integrable.
    """

    def __init__(self, r: float, gamma: float, d: int):
        self.r = r
        self.gamma = gamma
        self.d = d
        super().__init__(
            f"Weight |x|^(-r*gamma) not integrable: r*gamma = {r * gamma} >= d"
            f" = {d}"
        )


class InfeasibleDual(INLSError):
    """
    Raised when a derived dual reciprocal leaves (0, 1).
    """


class EmptyFeasibleInterval(INLSError):
    """
    Raised when the interval for 1/r2~ is empty.
    """


class RegionEmpty(INLSError):
    """
    Raised when region sampling exhausts its resample budget.
    """


class NoConvergence(INLSError):
    """
    Raised when Picard iteration does not reach the tolerance.
    """

    def __init__(self, iterations: int, increments: list):
        self.iterations = iterations
        self.increments = list(increments)
        last = increments[-1] if increments else float("nan")
        super().__init__(
            f"Picard iteration did not converge after {iterations} iterations"
            f" (last increment {last:.3e})"
        )


class BlowUp(INLSError):
    """
    Raised when a snapshot exceeds the sup-norm ceiling or is not finite.
    """

    def __init__(self, step: int, sup_norm: float):
        self.step = step
        self.sup_norm = sup_norm
        super().__init__(
            f"Blow-up detected at step {step}: sup-norm {sup_norm:.3e}"
        )


class NotCauchy(INLSError):
    """
    Raised when scattering increments fail to decrease.
    """

    def __init__(self, increments: list):
        self.increments = list(increments)
        super().__init__(
            "Scattering increments did not decrease by the final quarter"
        )
