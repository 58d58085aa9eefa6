"""Probability models for contaminated stream monitoring.

The observation model is a two-component gross error mixture: with
probability 1 - epsilon a draw comes from the nominal Gaussian location
family, with probability epsilon from an arbitrary outlier distribution.
Streams are independent; a change scenario shifts the nominal location of
the first m streams from time nu onward.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoDensityError

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class NominalFamily:
    """Gaussian location family: pre-change location, minimal post-change location, scale.

    theta1 - theta0 is the smallest shift magnitude the detectors are designed
    to catch; sigma is shared by every member of the family.
    """

    theta0: float
    theta1: float
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.theta1 <= self.theta0:
            raise ConfigError(f"theta1 ({self.theta1}) must exceed theta0 ({self.theta0})")

    @property
    def is_standard(self) -> bool:
        """True for the (theta0, theta1, sigma) = (0, 1, 1) normalization."""
        return self.theta0 == 0.0 and self.theta1 == 1.0 and self.sigma == 1.0


def nominal_pdf(x, theta: float, fam: NominalFamily):
    """Gaussian density with mean theta and scale fam.sigma; vectorized in x."""
    x = np.asarray(x, dtype=float)
    z = (x - theta) / fam.sigma
    return np.exp(-0.5 * z * z) / (SQRT_2PI * fam.sigma)


@dataclass(frozen=True)
class OutlierSpec:
    """Outlier distribution: gaussian, point mass, or tabulated density.

    custom_table uses linear interpolation between grid points and zero
    density outside the grid; sampling inverts the trapezoid CDF.
    """

    kind: str
    mean: float = 0.0
    sd: float = 1.0
    location: float = 0.0
    grid_x: np.ndarray | None = field(default=None, repr=False)
    grid_density: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "point_mass", "custom_table"):
            raise ConfigError(f"unknown outlier kind {self.kind!r}")
        if self.kind == "gaussian" and self.sd <= 0:
            raise ConfigError(f"gaussian outlier sd must be positive, got {self.sd}")
        if self.kind == "custom_table":
            x = np.asarray(self.grid_x, dtype=float)
            dens = np.asarray(self.grid_density, dtype=float)
            if x.ndim != 1 or x.size < 2 or x.shape != dens.shape:
                raise ConfigError("custom_table needs matching 1-d grids with >= 2 points")
            if np.any(np.diff(x) <= 0):
                raise ConfigError("custom_table grid must be strictly increasing")
            if np.any(dens < 0):
                raise ConfigError("custom_table densities must be nonnegative")
            total = np.trapezoid(dens, x)
            if abs(total - 1.0) > 1e-6:
                raise ConfigError(f"custom_table must integrate to 1 (trapezoid), got {total:.8f}")
            object.__setattr__(self, "grid_x", x)
            object.__setattr__(self, "grid_density", dens)

    @classmethod
    def gaussian_outlier(cls, mean: float = 0.0, sd: float = 3.0) -> "OutlierSpec":
        return cls(kind="gaussian", mean=mean, sd=sd)

    @classmethod
    def point_mass_outlier(cls, location: float) -> "OutlierSpec":
        return cls(kind="point_mass", location=location)

    @classmethod
    def table_outlier(cls, grid_x, grid_density) -> "OutlierSpec":
        return cls(kind="custom_table", grid_x=np.asarray(grid_x, dtype=float),
                   grid_density=np.asarray(grid_density, dtype=float))

    def pdf(self, x):
        """Density g(x). Raises NoDensityError for a point mass."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            z = (x - self.mean) / self.sd
            return np.exp(-0.5 * z * z) / (SQRT_2PI * self.sd)
        if self.kind == "point_mass":
            raise NoDensityError("point-mass outliers have no density")
        return np.interp(x, self.grid_x, self.grid_density, left=0.0, right=0.0)

    def expectation(self) -> float:
        """E_g[X]; exists for every supported kind."""
        if self.kind == "gaussian":
            return self.mean
        if self.kind == "point_mass":
            return self.location
        x, dens = self.grid_x, self.grid_density
        return float(np.trapezoid(x * dens, x))

    def sample(self, rng: np.random.Generator, size):
        """Draw samples of the given shape."""
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.sd, size)
        if self.kind == "point_mass":
            return np.full(size, self.location)
        return self._sample_table(rng, size)

    def _sample_table(self, rng, size):
        # inverse CDF of the piecewise-linear density; CDF is piecewise quadratic
        x, dens = self.grid_x, self.grid_density
        seg_area = 0.5 * (dens[:-1] + dens[1:]) * np.diff(x)
        cum = np.concatenate([[0.0], np.cumsum(seg_area)])
        total = cum[-1]
        u = rng.random(size) * total
        flat = np.ravel(u)
        idx = np.clip(np.searchsorted(cum, flat, side="right") - 1, 0, len(seg_area) - 1)
        x0, d0 = x[idx], dens[idx]
        h = np.diff(x)[idx]
        slope = (dens[idx + 1] - d0) / h
        target = flat - cum[idx]
        lin = slope == 0.0
        t = np.empty_like(flat)
        with np.errstate(divide="ignore", invalid="ignore"):
            t[lin] = np.where(d0[lin] > 0, target[lin] / d0[lin], 0.0)
            disc = np.sqrt(np.maximum(d0[~lin] ** 2 + 2.0 * slope[~lin] * target[~lin], 0.0))
            t[~lin] = (disc - d0[~lin]) / slope[~lin]
        return (x0 + np.clip(t, 0.0, h)).reshape(np.shape(u))


@dataclass(frozen=True)
class GrossErrorModel:
    """Contamination mixture h_theta = (1 - epsilon) * f_theta + epsilon * g."""

    epsilon: float
    nominal: NominalFamily
    outlier: OutlierSpec

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    def with_epsilon(self, epsilon: float) -> "GrossErrorModel":
        return GrossErrorModel(epsilon, self.nominal, self.outlier)


def mixture_pdf(x, theta: float, model: GrossErrorModel):
    """Mixture density (1 - eps) * f_theta(x) + eps * g(x).

    Point-mass outliers are rejected: the mixture has no density then.
    """
    if model.epsilon > 0 and model.outlier.kind == "point_mass":
        raise NoDensityError("mixture with a point-mass outlier has no density")
    base = (1.0 - model.epsilon) * nominal_pdf(x, theta, model.nominal)
    if model.epsilon == 0.0:
        return base
    return base + model.epsilon * model.outlier.pdf(x)


@dataclass(frozen=True)
class ChangeScenario:
    """K independent streams; the first m shift to theta_post from time nu on.

    nu = math.inf means no change ever occurs (the false-alarm regime).
    Affected streams are streams 1..m; exchangeability makes the choice of
    subset immaterial for i.i.d. streams.
    """

    K: int
    m: int
    nu: float
    theta_post: float

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if not 1 <= self.m <= self.K:
            raise ConfigError(f"m must lie in [1, K], got m={self.m}, K={self.K}")
        if not (self.nu == math.inf or (float(self.nu).is_integer() and self.nu >= 1)):
            raise ConfigError(f"nu must be a positive integer or inf, got {self.nu}")

    @classmethod
    def no_change(cls, K: int) -> "ChangeScenario":
        return cls(K=K, m=1, nu=math.inf, theta_post=math.inf)

    @classmethod
    def immediate(cls, K: int, m: int, theta_post: float) -> "ChangeScenario":
        return cls(K=K, m=m, nu=1, theta_post=theta_post)

    def validate_against(self, fam: NominalFamily):
        if self.nu != math.inf and self.theta_post < fam.theta1:
            raise ConfigError(
                f"theta_post ({self.theta_post}) must be >= theta1 ({fam.theta1}) "
                "for a finite change time")


@dataclass(frozen=True)
class MixtureStreamSampler:
    """Block sampler for the engine: draws K x n observation blocks.

    Each replicate owns a private generator, so paths are identical across
    runs that differ only in thresholds (common random numbers).
    """

    model: GrossErrorModel
    scenario: ChangeScenario

    @property
    def K(self) -> int:
        return self.scenario.K

    def draw(self, rng: np.random.Generator, t0: int, n: int) -> np.ndarray:
        """Observations for time steps t0+1 .. t0+n, shape (K, n)."""
        sc, model = self.scenario, self.model
        fam = model.nominal
        theta = np.full((sc.K, n), fam.theta0)
        if sc.nu != math.inf:
            post = np.arange(t0 + 1, t0 + n + 1) >= sc.nu
            if post.any():
                theta[:sc.m, post] = sc.theta_post
        values = rng.normal(theta, fam.sigma)
        if model.epsilon > 0.0:
            mask = rng.random((sc.K, n)) < model.epsilon
            values = np.where(mask, model.outlier.sample(rng, (sc.K, n)), values)
        return values


def sample_matrix(model: GrossErrorModel, scenario: ChangeScenario,
                  horizon: int, seed: int) -> np.ndarray:
    """Simulate a K x horizon observation matrix under the change scenario.

    Entry (k, t) is drawn from h_{theta0} before the change (or on unaffected
    streams) and from h_{theta_post} on affected streams from time nu on.
    Identical seeds give bit-identical matrices.
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if scenario.nu != math.inf:
        scenario.validate_against(model.nominal)
    rng = np.random.default_rng(seed)
    return MixtureStreamSampler(model, scenario).draw(rng, 0, horizon)
