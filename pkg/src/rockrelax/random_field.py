"""Random coefficient models and sample generation.

Sampling uses NumPy's ``Generator(PCG64(seed))`` and its ``standard_normal``
method (ziggurat transform).  Draws are taken in one call, row-major, so
sample ``i`` component ``k`` is the ``i * d + k``-th variate of the stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import CoercivityError


@dataclass(frozen=True)
class KKLCoefficient:
    """Log-normal field ``exp(sigma * sum_k sqrt(lam_k) sin(x / sqrt(lam_k)) xi_k)``.

    The exponent is a ``d``-term expansion of a rescaled Brownian motion on
    (0, 1) with ``lam_k = 4 / ((2k - 1)^2 pi^2)``.
    """

    sigma: float = 0.4
    d: int = 50

    @property
    def lambdas(self) -> np.ndarray:
        k = np.arange(1, self.d + 1)
        return 4.0 / ((2 * k - 1) ** 2 * np.pi ** 2)

    def basis(self, x) -> np.ndarray:
        """Matrix of ``sqrt(lam_k) sin(x / sqrt(lam_k))``, shape ``(len(x), d)``."""
        root = np.sqrt(self.lambdas)
        return root * np.sin(np.asarray(x, dtype=float)[..., None] / root)

    def log_values(self, x, xi) -> np.ndarray:
        """Exponent at points ``x`` for one sample ``(d,)`` or a batch ``(N, d)``."""
        return self.sigma * (np.asarray(xi, dtype=float) @ self.basis(x).T)

    def __call__(self, x, xi):
        return np.exp(self.log_values(x, xi))


def eval_kkl(coef: KKLCoefficient, x, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != coef.d:
        raise ValueError(f"sample has {xi.shape[-1]} components, expected {coef.d}")
    return coef(x, xi)


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray
    seed: int | None = None
    n_corrupted: int = 0

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def corrupted_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[: self.n_corrupted] = True
        return mask


def sample_standard_normal(n: int, d: int, seed: int) -> SampleSet:
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    samples = rng.standard_normal((n, d))
    samples.setflags(write=False)
    return SampleSet(samples=samples, seed=seed)


def corrupt_samples(s: SampleSet, M: int, scale: float = 10.0,
                    allow_repeat: bool = False) -> SampleSet:
    """Multiply the first ``M`` rows by ``scale`` (variance inflation).

    Corrupting an already corrupted set would compound the scaling, so it is
    refused unless ``allow_repeat`` is set.
    """
    if not 0 <= M <= s.n:
        raise ValueError(f"M must lie in [0, {s.n}], got {M}")
    if s.n_corrupted and M and not allow_repeat:
        raise ValueError("sample set is already corrupted; pass allow_repeat=True to rescale again")
    out = np.array(s.samples)
    out[:M] *= scale
    out.setflags(write=False)
    return replace(s, samples=out, n_corrupted=max(M, s.n_corrupted))


def _radius(x):
    x = np.asarray(x, dtype=float)
    if x.ndim and x.shape[-1] == 2:
        return np.linalg.norm(x, axis=-1)
    return np.abs(x)


def eval_osc_radius(xi, r):
    """``1 / (xi + 3 sin(10 pi r))`` as a function of the radius ``r = ||x||``."""
    denom = np.asarray(xi, dtype=float) + 3.0 * np.sin(10 * np.pi * np.asarray(r, dtype=float))
    if np.any(denom <= 0):
        raise CoercivityError(f"xi + 3 sin(10 pi |x|) must be positive, min {np.min(denom):g}")
    return 1.0 / denom


def eval_osc(xi, x):
    """Oscillatory coefficient at point(s) ``x`` (trailing axis of length 2)."""
    return eval_osc_radius(xi, _radius(x))


def eval_osc_dxi(xi, x):
    """Derivative of :func:`eval_osc` with respect to ``xi``; equals ``-a^2``."""
    return -eval_osc(xi, x) ** 2


def contrast_ratio(xi: float) -> float:
    """``sup_x a / inf_x a = (xi + 3) / (xi - 3)``; requires ``xi > 3``."""
    if np.isinf(xi):
        return 1.0
    if xi <= 3:
        raise CoercivityError(f"contrast ratio undefined for xi={xi} <= 3")
    return (xi + 3.0) / (xi - 3.0)


@dataclass(frozen=True)
class DiscreteDistribution:
    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if atoms.shape[0] != probs.shape[0]:
            raise ValueError("atoms and probs differ in length")
        if np.any(probs < 0) or np.any(probs > 1) or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("probs must lie on the probability simplex")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class TwoAtomLaw:
    """Corrupted constant-coefficient law: ``P[0.2] = eps``, ``P[2] = 1 - eps``."""

    eps: float
    atoms: tuple[float, float] = field(default=(0.2, 2.0))

    def __post_init__(self):
        if not 0 <= self.eps <= 1:
            raise ValueError(f"eps must lie in [0, 1], got {self.eps}")

    @property
    def probs(self) -> np.ndarray:
        return np.array([self.eps, 1.0 - self.eps])

    def distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(np.array(self.atoms), self.probs)
