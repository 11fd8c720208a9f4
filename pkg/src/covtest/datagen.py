"""Data-generation models for the type-I-error and power studies, plus
signal-to-noise utilities.

All generators are pure given (spec, n, rng): rows are i.i.d. draws from the
model, and the population covariance is available in closed form wherever the
model determines it.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateStatisticError, InternalError

__all__ = [
    "Distribution",
    "LinearMapModel",
    "BlockDiagonalModel",
    "MovingAverageModel",
    "CovarianceModel",
    "HYBRID_DISTRIBUTIONS",
    "sigma_alternative_diag",
    "sigma_alternative_cs",
    "sparse_cai_pair",
    "compound_symmetry_matrix",
    "ssnr",
]

_EULER_GAMMA = float(np.euler_gamma)


def _positive(name: str):
    def check(x: float) -> None:
        if not x > 0:
            raise DataError(f"{name} must be > 0, got {x}")

    return check

def _any(_: float) -> None:
    return None

def _prob(x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise DataError(f"probability must be in [0, 1], got {x}")


# family -> (parameter validators, sampler, mean, variance)
_FAMILIES: dict[str, tuple] = {
    "normal": (
        (_any, _positive("sd")),
        lambda rng, a, size: rng.normal(a[0], a[1], size),
        lambda a: a[0],
        lambda a: a[1] ** 2,
    ),
    "gamma": (
        (_positive("shape"), _positive("scale")),
        lambda rng, a, size: rng.gamma(a[0], a[1], size),
        lambda a: a[0] * a[1],
        lambda a: a[0] * a[1] ** 2,
    ),
    "lognormal": (
        (_any, _positive("log-sd")),
        lambda rng, a, size: rng.lognormal(a[0], a[1], size),
        lambda a: float(np.exp(a[0] + a[1] ** 2 / 2)),
        lambda a: float((np.exp(a[1] ** 2) - 1) * np.exp(2 * a[0] + a[1] ** 2)),
    ),
    "student-t": (
        (_positive("df"),),
        lambda rng, a, size: rng.standard_t(a[0], size),
        lambda a: 0.0,
        lambda a: a[0] / (a[0] - 2) if a[0] > 2 else float("inf"),
    ),
    "gumbel": (
        (_any, _positive("scale")),
        lambda rng, a, size: rng.gumbel(a[0], a[1], size),
        lambda a: a[0] + _EULER_GAMMA * a[1],
        lambda a: float(np.pi**2 / 6) * a[1] ** 2,
    ),
    "poisson": (
        (_positive("rate"),),
        lambda rng, a, size: rng.poisson(a[0], size).astype(float),
        lambda a: a[0],
        lambda a: a[0],
    ),
    "uniform": (
        (_any, _any),
        lambda rng, a, size: rng.uniform(a[0], a[1], size),
        lambda a: (a[0] + a[1]) / 2,
        lambda a: (a[1] - a[0]) ** 2 / 12,
    ),
    "bernoulli": (
        (_prob,),
        lambda rng, a, size: rng.binomial(1, a[0], size).astype(float),
        lambda a: a[0],
        lambda a: a[0] * (1 - a[0]),
    ),
}

_DIST_PATTERN = re.compile(r"^\s*([a-zA-Z-]+)\s*\(([^)]*)\)\s*$")


@dataclass(frozen=True)
class Distribution:
    """A univariate sampling distribution, e.g. ``Distribution("gamma", (4, 0.5))``.

    Gamma is parameterized shape-scale, lognormal by the mean and standard
    deviation of the underlying normal, and gumbel location-scale with the
    standard extreme-value CDF.
    """

    family: str
    args: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise DataError(
                f"unknown distribution family {self.family!r}; "
                f"known: {', '.join(sorted(_FAMILIES))}"
            )
        validators = _FAMILIES[self.family][0]
        if len(self.args) != len(validators):
            raise DataError(
                f"{self.family} takes {len(validators)} parameter(s), "
                f"got {len(self.args)}"
            )
        for check, value in zip(validators, self.args):
            check(float(value))
        object.__setattr__(self, "args", tuple(float(a) for a in self.args))

    @classmethod
    def parse(cls, text: str) -> "Distribution":
        """Parse ``"family(a,b)"`` notation, e.g. ``"gumbel(10,2)"``.
        ``uniform(0,1)`` style aliases with underscores (``student_t``) are
        accepted."""
        m = _DIST_PATTERN.match(text)
        if not m:
            raise DataError(f"cannot parse distribution {text!r}; expected family(args)")
        family = m.group(1).lower().replace("_", "-")
        raw = m.group(2).strip()
        try:
            args = tuple(float(x) for x in raw.split(",")) if raw else ()
        except ValueError:
            raise DataError(f"non-numeric parameter in distribution {text!r}") from None
        return cls(family, args)

    def __str__(self) -> str:
        inner = ",".join(format(a, "g") for a in self.args)
        return f"{self.family}({inner})"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return _FAMILIES[self.family][1](rng, self.args, size)

    @property
    def mean(self) -> float:
        return float(_FAMILIES[self.family][2](self.args))

    @property
    def variance(self) -> float:
        return float(_FAMILIES[self.family][3](self.args))

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))

    @property
    def snr(self) -> float:
        """Population signal-to-noise ratio mean/sd (reciprocal coefficient
        of variation)."""
        return self.mean / self.sd


# Block order for the hybrid block-diagonal configuration.
HYBRID_DISTRIBUTIONS = (
    Distribution("normal", (0, 1)),
    Distribution("lognormal", (0, 1)),
    Distribution("student-t", (5,)),
    Distribution("gumbel", (10, 2)),
)


def compound_symmetry_matrix(p: int, rho: float, scale: float = 1.0) -> np.ndarray:
    """scale * [(1-rho) I + rho J]."""
    if p < 1:
        raise DataError("dimension must be >= 1")
    return scale * ((1 - rho) * np.eye(p) + rho * np.ones((p, p)))


@dataclass(frozen=True, eq=False)
class LinearMapModel:
    """Rows are x = Gamma z with z an i.i.d. vector: the covariance is
    Var(z) * Gamma Gamma^T.  Gamma must be p x m with p <= m."""

    gamma: np.ndarray
    z: Distribution

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[0] > gamma.shape[1]:
            raise DataError(
                f"Gamma must be p x m with p <= m, got shape {gamma.shape}"
            )
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def identity(cls, p: int, z: Distribution) -> "LinearMapModel":
        """The null model: independent columns, covariance Var(z) * I."""
        return cls(np.eye(p), z)

    @property
    def p(self) -> int:
        return self.gamma.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        Z = self.z.sample(rng, (n, self.gamma.shape[1]))
        return Z @ self.gamma.T

    def population_covariance(self) -> np.ndarray:
        return self.z.variance * (self.gamma @ self.gamma.T)


@dataclass(frozen=True)
class BlockDiagonalModel:
    """Four independent blocks of q columns; within a block the covariance is
    Var(U_b) * [(1-rho) I + rho J], realized as X_b = U_b L^T with L the
    Cholesky factor of (1-rho) I + rho J."""

    q: int
    rho: float
    dists: tuple[Distribution, Distribution, Distribution, Distribution]

    def __post_init__(self) -> None:
        if self.q < 1:
            raise DataError(f"block size q must be >= 1, got {self.q}")
        if not 0.0 <= self.rho < 1.0:
            raise DataError(f"rho must be in [0, 1), got {self.rho}")
        if len(self.dists) != 4:
            raise DataError(f"need exactly 4 block distributions, got {len(self.dists)}")

    @classmethod
    def uniform(cls, q: int, rho: float, dist: Distribution) -> "BlockDiagonalModel":
        return cls(q, rho, (dist,) * 4)

    @classmethod
    def hybrid(cls, q: int, rho: float) -> "BlockDiagonalModel":
        return cls(q, rho, HYBRID_DISTRIBUTIONS)

    @property
    def p(self) -> int:
        return 4 * self.q

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        L = np.linalg.cholesky(compound_symmetry_matrix(self.q, self.rho))
        blocks = [dist.sample(rng, (n, self.q)) @ L.T for dist in self.dists]
        return np.hstack(blocks)

    def population_covariance(self) -> np.ndarray:
        base = compound_symmetry_matrix(self.q, self.rho)
        out = np.zeros((self.p, self.p))
        for b, dist in enumerate(self.dists):
            sl = slice(b * self.q, (b + 1) * self.q)
            out[sl, sl] = dist.variance * base
        return out


@dataclass(frozen=True)
class MovingAverageModel:
    """Moving-average columns over an i.i.d. sequence z:

    order 2:  x_j = z_j + 2 z_{j+1}
    order 3:  x_j = z_j + 2 z_{j+1} + z_{j+2}
    """

    p: int
    order: int
    z: Distribution

    _WEIGHTS = {2: (1.0, 2.0), 3: (1.0, 2.0, 1.0)}

    def __post_init__(self) -> None:
        if self.p < 1:
            raise DataError(f"dimension must be >= 1, got {self.p}")
        if self.order not in self._WEIGHTS:
            raise DataError(f"order must be 2 or 3, got {self.order}")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        w = self._WEIGHTS[self.order]
        Z = self.z.sample(rng, (n, self.p + len(w) - 1))
        X = np.zeros((n, self.p))
        for lag, weight in enumerate(w):
            X += weight * Z[:, lag : lag + self.p]
        return X

    def population_covariance(self) -> np.ndarray:
        w = np.array(self._WEIGHTS[self.order])
        var_z = self.z.variance
        out = np.zeros((self.p, self.p))
        for lag in range(len(w)):
            value = var_z * float(np.dot(w[: len(w) - lag], w[lag:]))
            out += value * np.eye(self.p, k=lag)
            if lag:
                out += value * np.eye(self.p, k=-lag)
        return out


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Rows are x = L u with L the Cholesky factor of a prescribed covariance
    matrix and u an i.i.d. vector.  The population covariance is
    Var(u) * sigma."""

    sigma: np.ndarray
    u: Distribution

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=float)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise DataError("covariance matrix is not positive definite") from None
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        U = self.u.sample(rng, (n, self.p))
        return U @ self._chol.T

    def population_covariance(self) -> np.ndarray:
        return self.u.variance * self.sigma


def sigma_alternative_diag(
    p: int, lam: float, sigma0_sq: float = 1.0, sigma1_sq: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """First sphericity alternative: sigma0^2 I plus a variance spike of
    sigma1^2 on the first floor(lam * p) coordinates.  Returns (Sigma, Gamma)
    with Gamma Gamma^T = Sigma."""
    if not 0.0 < lam < 1.0:
        raise DataError(f"lambda must be in (0, 1), got {lam}")
    k = int(np.floor(lam * p))
    if k == 0:
        warnings.warn(
            f"floor(lambda*p) = 0 at p={p}: the alternative collapses to the null",
            UserWarning,
            stacklevel=2,
        )
    diag = np.concatenate(
        [np.full(k, sigma0_sq + sigma1_sq), np.full(p - k, sigma0_sq)]
    )
    return np.diag(diag), np.diag(np.sqrt(diag))


def sigma_alternative_cs(
    p: int, rho: float, sigma0_sq: float = 1.0, sigma1_sq: float = 2.0
) -> tuple[np.ndarray, np.ndarray]:
    """Second sphericity alternative: (1-rho) sigma0^2 I + rho sigma1^2 J.
    Returns (Sigma, Gamma) with Gamma the p x (p+1) factor
    [sqrt((1-rho) sigma0^2) I | sqrt(rho sigma1^2) 1]."""
    if not 0.0 < rho < 1.0:
        raise DataError(f"rho must be in (0, 1), got {rho}")
    sigma = (1 - rho) * sigma0_sq * np.eye(p) + rho * sigma1_sq * np.ones((p, p))
    gamma = np.hstack(
        [
            np.sqrt((1 - rho) * sigma0_sq) * np.eye(p),
            np.full((p, 1), np.sqrt(rho * sigma1_sq)),
        ]
    )
    return sigma, gamma


def sparse_cai_pair(
    p: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sparse-difference covariance pair (Sigma_null, Sigma_alt, Delta).

    Sigma* has unit diagonal and off-diagonal 0.5 * Bernoulli(0.05); Delta has
    exactly 32 entries of 0.9 (16 random below-diagonal positions mirrored
    above); shifts delta_0 and delta_1 make both outputs positive definite
    with smallest eigenvalue at least 0.05.
    """
    if p < 9:
        raise DataError(f"sparse pair needs p >= 9 for 16 lower positions, got {p}")
    lower = np.tril_indices(p, k=-1)
    star = np.zeros((p, p))
    star[lower] = 0.5 * rng.binomial(1, 0.05, len(lower[0]))
    star = star + star.T
    np.fill_diagonal(star, 1.0)

    delta0 = abs(float(np.linalg.eigvalsh(star)[0])) + 0.05
    base = (star + delta0 * np.eye(p)) / (1 + delta0)

    delta = np.zeros((p, p))
    chosen = rng.choice(len(lower[0]), size=16, replace=False)
    delta[lower[0][chosen], lower[1][chosen]] = 0.9
    delta = delta + delta.T

    delta1 = (
        abs(
            min(
                float(np.linalg.eigvalsh(base)[0]),
                float(np.linalg.eigvalsh(base + delta)[0]),
            )
        )
        + 0.05
    )
    sigma_null = base + delta1 * np.eye(p)
    sigma_alt = base + delta + delta1 * np.eye(p)
    for name, sigma in (("null", sigma_null), ("alternative", sigma_alt)):
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise InternalError(
                f"sparse {name} covariance failed Cholesky despite the "
                "eigenvalue shift"
            ) from None
    return sigma_null, sigma_alt, delta


def ssnr(sample: np.ndarray) -> float:
    """Sample signal-to-noise ratio: sample mean over sample standard
    deviation (divisor n-1)."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise DataError(f"SSNR needs at least 2 values, got {x.size}")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise DegenerateStatisticError("sample standard deviation is zero")
    return float(np.mean(x)) / sd
