"""Profile monitoring pipeline: Haar features, standardization, synthetic pools.

A profile of dyadic length is decomposed by the orthonormal Haar transform
(scaling coefficient first, then detail coefficients coarse to fine); the
first p coefficients are z-scored against a baseline fitted on in-control
profiles and fed to the stream detectors as a K = p dimensional observation.

The bundled generator fabricates a forming-force-like dataset: a smooth
baseline curve with i.i.d. noise, a small localized fault (a gentle shape
change plus a sharp glitch) and a large wide fault, for studies where no
real profile data is available.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibration import CalibrationResult, RunEstimate, calibrate_threshold, run_lengths
from .errors import ConfigError, DegenerateCoefficientError

SQRT2 = math.sqrt(2.0)


def _check_dyadic(n: int):
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigError(f"signal length must be a power of two >= 2, got {n}")


def haar_transform(signal) -> np.ndarray:
    """Full-depth orthonormal Haar coefficients of a dyadic-length signal.

    Output order: overall scaling coefficient, then detail levels from
    coarsest to finest.  The transform is orthonormal, so Parseval holds
    exactly up to rounding.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ConfigError("signal must be one-dimensional")
    _check_dyadic(x.size)
    out = np.empty(x.size)
    a = x
    pos = x.size
    while a.size > 1:
        detail = (a[0::2] - a[1::2]) / SQRT2
        out[pos - detail.size:pos] = detail
        pos -= detail.size
        a = (a[0::2] + a[1::2]) / SQRT2
    out[0] = a[0]
    return out


def inverse_haar_transform(coefficients) -> np.ndarray:
    """Inverse of haar_transform; provided for round-trip verification."""
    c = np.asarray(coefficients, dtype=float)
    _check_dyadic(c.size)
    a = c[:1].copy()
    pos = 1
    while pos < c.size:
        detail = c[pos:2 * pos]
        nxt = np.empty(2 * pos)
        nxt[0::2] = (a + detail) / SQRT2
        nxt[1::2] = (a - detail) / SQRT2
        a = nxt
        pos *= 2
    return a


@dataclass(frozen=True)
class BaselineStats:
    """Per-coefficient mean and standard deviation of the in-control pool."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray

    @property
    def p(self) -> int:
        return len(self.mu_hat)


def _transform_pool(pool, p: int) -> np.ndarray:
    signals = np.asarray(pool, dtype=float)
    if signals.ndim != 2:
        raise ConfigError("pool must be a 2-d array: one signal per row")
    if p > signals.shape[1]:
        raise ConfigError(f"p={p} exceeds signal length {signals.shape[1]}")
    return np.array([haar_transform(s)[:p] for s in signals])


def fit_baseline(training_pool, p: int) -> BaselineStats:
    """Per-coefficient mean and sd (denominator n-1) of the first p coefficients."""
    coeffs = _transform_pool(training_pool, p)
    if coeffs.shape[0] < 2:
        raise ConfigError("need at least 2 training signals")
    mu = coeffs.mean(axis=0)
    sd = coeffs.std(axis=0, ddof=1)
    degenerate = np.flatnonzero(sd == 0.0)
    if degenerate.size:
        raise DegenerateCoefficientError(int(degenerate[0]))
    return BaselineStats(mu_hat=mu, sigma_hat=sd)


def retain_and_standardize(coefficients, p: int, stats: BaselineStats) -> np.ndarray:
    """z-score the first p coefficients against the fitted baseline."""
    c = np.asarray(coefficients, dtype=float)
    if p != stats.p:
        raise ConfigError(f"stats were fitted for p={stats.p}, got p={p}")
    if p > c.size:
        raise ConfigError(f"p={p} exceeds coefficient count {c.size}")
    return (c[:p] - stats.mu_hat) / stats.sigma_hat


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileGeneratorConfig:
    """Shapes and magnitudes of the synthetic forming-force profiles.

    fault1 is a small localized deviation (smooth shape change, a mid-scale
    ripple and one sharp glitch, all inside a sparse support window); fault2
    is a large wide deviation.  Magnitudes are in noise-sd units, default
    ratio 1:5.
    """

    length: int = 2048
    baseline_amplitude: float = 80.0
    noise_sd: float = 1.0
    fault1_magnitude: float = 2.8
    fault2_magnitude: float = 14.0
    fault1_center: float = 0.67
    fault1_width: float = 0.30
    fault1_ripple: float = 1.0
    fault1_ripple_period: int = 64
    fault1_glitch: float = 12.0
    fault1_glitch_width: int = 14
    fault2_center: float = 0.35
    fault2_width: float = 0.34
    amplitude_jitter: float = 0.2

    def __post_init__(self):
        _check_dyadic(self.length)
        if self.noise_sd <= 0:
            raise ConfigError("noise_sd must be positive")


@dataclass(frozen=True)
class ProfilePool:
    """Normal and faulty profile samples, one signal per row."""

    normal: np.ndarray
    fault1: np.ndarray
    fault2: np.ndarray

    def __post_init__(self):
        for name in ("normal", "fault1", "fault2"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ConfigError(f"{name} pool must be a nonempty 2-d array")


def _raised_cosine(length: int, center: int, width: int) -> np.ndarray:
    t = np.arange(length)
    z = (t - center) / (width / 2.0)
    return np.where(np.abs(z) < 1.0, 0.5 * (1.0 + np.cos(np.pi * z)), 0.0)


def baseline_curve(config: ProfileGeneratorConfig) -> np.ndarray:
    """Smooth in-control mean profile."""
    t = np.linspace(0.0, 1.0, config.length)
    return config.baseline_amplitude * np.exp(-((t - 0.5) / 0.18) ** 2) * (
        1.0 + 0.05 * np.sin(8.0 * np.pi * t))


def fault_deviations(config: ProfileGeneratorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Mean deviation curves of the two fault modes."""
    L = config.length
    c1 = int(config.fault1_center * L)
    w1 = int(config.fault1_width * L)
    window = _raised_cosine(L, c1, w1)
    ripple = config.fault1_ripple * np.sin(
        2.0 * np.pi * np.arange(L) / config.fault1_ripple_period) * window
    glitch = config.fault1_glitch * _raised_cosine(
        L, int(0.6 * L), config.fault1_glitch_width)
    dev1 = config.fault1_magnitude * config.noise_sd * (window + ripple + glitch)
    dev2 = config.fault2_magnitude * config.noise_sd * _raised_cosine(
        L, int(config.fault2_center * L), int(config.fault2_width * L))
    return dev1, dev2


def synth_pool(config: ProfileGeneratorConfig | None = None,
               counts: tuple[int, int, int] = (307, 69, 69),
               seed: int = 0) -> ProfilePool:
    """Deterministic synthetic pool: baseline plus per-sample jittered deviations."""
    config = config or ProfileGeneratorConfig()
    if min(counts) < 1:
        raise ConfigError("pool counts must be positive")
    rng = np.random.default_rng(seed)
    base = baseline_curve(config)
    dev1, dev2 = fault_deviations(config)

    def pool(n: int, dev: np.ndarray) -> np.ndarray:
        amps = 1.0 + config.amplitude_jitter * (2.0 * rng.random(n) - 1.0)
        noise = rng.normal(0.0, config.noise_sd, (n, config.length))
        return base + np.outer(amps, dev) + noise

    return ProfilePool(normal=pool(counts[0], np.zeros(config.length)),
                       fault1=pool(counts[1], dev1),
                       fault2=pool(counts[2], dev2))


POOL_FILES = {"normal": "normal.csv", "fault1": "fault1.csv", "fault2": "fault2.csv"}


def write_signals_csv(signals: np.ndarray, path) -> None:
    """One signal per row, plain comma-separated values."""
    np.savetxt(path, np.asarray(signals, dtype=float), delimiter=",")


def read_signals_csv(path) -> np.ndarray:
    signals = np.loadtxt(path, delimiter=",", ndmin=2)
    if signals.shape[1] < 2:
        raise ConfigError(f"{path}: expected one signal per row")
    return signals


def save_pool(pool: ProfilePool, directory) -> None:
    """Write the three pools as normal.csv / fault1.csv / fault2.csv."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, filename in POOL_FILES.items():
        write_signals_csv(getattr(pool, name), directory / filename)


def load_pool(directory) -> ProfilePool:
    """Read a pool written by save_pool (or assembled by hand)."""
    directory = Path(directory)
    arrays = {}
    for name, filename in POOL_FILES.items():
        path = directory / filename
        if not path.exists():
            raise ConfigError(f"missing pool file: {path}")
        arrays[name] = read_signals_csv(path)
    return ProfilePool(**arrays)


# ---------------------------------------------------------------------------
# Case study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoolStreamSampler:
    """Streams standardized coefficient rows drawn from mixed pools.

    Before nu the row comes from pre_pools with pre_probs; from nu on, from
    post_pools with post_probs.  Row indices for every pool are drawn each
    block regardless of the mixture outcome, so paths are reproducible and
    threshold-independent.
    """

    pre_pools: tuple
    pre_probs: tuple
    post_pools: tuple = ()
    post_probs: tuple = ()
    nu: float = math.inf

    def __post_init__(self):
        for probs, pools in ((self.pre_probs, self.pre_pools),
                             (self.post_probs, self.post_pools)):
            if len(probs) != len(pools):
                raise ConfigError("one probability per pool required")
            if probs and abs(sum(probs) - 1.0) > 1e-9:
                raise ConfigError("mixture probabilities must sum to 1")

    @property
    def K(self) -> int:
        return self.pre_pools[0].shape[1]

    def _draw_phase(self, rng, pools, probs, n: int) -> np.ndarray:
        u = rng.random(n)
        idx = [rng.integers(0, pool.shape[0], n) for pool in pools]
        edges = np.cumsum(probs)
        which = np.searchsorted(edges, u, side="right")
        which = np.minimum(which, len(pools) - 1)
        rows = np.empty((n, self.K))
        for pi, pool in enumerate(pools):
            sel = which == pi
            if sel.any():
                rows[sel] = pool[idx[pi][sel]]
        return rows.T

    def draw(self, rng: np.random.Generator, t0: int, n: int) -> np.ndarray:
        if self.nu == math.inf:
            return self._draw_phase(rng, self.pre_pools, self.pre_probs, n)
        times = np.arange(t0 + 1, t0 + n + 1)
        pre = self._draw_phase(rng, self.pre_pools, self.pre_probs, n)
        post = self._draw_phase(rng, self.post_pools, self.post_probs, n)
        return np.where(times >= self.nu, post, pre)


@dataclass(frozen=True)
class CaseStudyRow:
    scheme: str
    b: float
    arl: RunEstimate
    delay: RunEstimate


def standardized_pools(pool: ProfilePool, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """z-scored first-p coefficient matrices, baseline fitted on the normal pool."""
    stats = fit_baseline(pool.normal, p)
    out = []
    for signals in (pool.normal, pool.fault1, pool.fault2):
        coeffs = _transform_pool(signals, p)
        out.append((coeffs - stats.mu_hat) / stats.sigma_hat)
    return tuple(out)


def case_study_run(pool: ProfilePool, schemes, target_arl: float = 300.0, *,
                   mix_pre: tuple[float, float] = (0.9, 0.1),
                   mix_post: tuple[float, float] = (0.9, 0.1),
                   pre_outlier: str = "fault1",
                   p: int | None = None, reps: int = 100, seed: int = 0,
                   rel_tol: float = 0.1, cap: int | None = None,
                   threads: int = 1) -> list[CaseStudyRow]:
    """Calibrate each scheme on the contaminated in-control stream, then time
    its detection of the persistent fault.

    The in-control stream mixes normal rows with pre_outlier rows at
    mix_pre; the faulty stream mixes fault1 rows (the persistent change)
    with fault2 rows (transient outliers) at mix_post.
    """
    if pre_outlier not in ("fault1", "fault2"):
        raise ConfigError("pre_outlier must be 'fault1' or 'fault2'")
    if target_arl <= 1:
        raise ConfigError("target_arl must exceed 1")
    zn, z1, z2 = standardized_pools(pool, p or pool.normal.shape[1] // 4)
    pre_out = z1 if pre_outlier == "fault1" else z2
    pre_sampler = PoolStreamSampler(pre_pools=(zn, pre_out), pre_probs=tuple(mix_pre))
    post_sampler = PoolStreamSampler(pre_pools=(zn,), pre_probs=(1.0,),
                                     post_pools=(z1, z2), post_probs=tuple(mix_post),
                                     nu=1)
    run_cap = cap if cap is not None else int(20 * target_arl)
    rows = []
    for i, scheme in enumerate(schemes):
        cal: CalibrationResult = calibrate_threshold(
            scheme, pre_sampler, target_arl, rel_tol=rel_tol,
            reps_schedule=(max(50, reps // 2), reps), seed=seed + i,
            cap=run_cap, threads=threads)
        calibrated = scheme.with_threshold(cal.b)
        lengths, censored = run_lengths(calibrated, post_sampler, reps,
                                        run_cap, seed + 1000 + i, threads=threads)
        rows.append(CaseStudyRow(scheme=scheme.label, b=cal.b, arl=cal.arl,
                                 delay=RunEstimate.from_lengths(lengths, censored)))
    return rows
