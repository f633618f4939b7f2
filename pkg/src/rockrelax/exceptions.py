"""Exception types shared across the package."""


class CoercivityError(ValueError):
    """A diffusion coefficient sample is non-positive (or its denominator is)."""


class InfeasibleError(ValueError):
    """A perturbation vector lies outside its feasible set."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""
