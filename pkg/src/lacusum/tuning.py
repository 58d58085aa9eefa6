"""Tuning quantities: information numbers, MGF roots, efficiency, design formulas.

Everything here is an expectation of the local increment Y under the
contaminated model, or a function of two such expectations:

  * info number      I(theta, eps, alpha) = E_{h_theta}[Y]
  * MGF root         lambda(eps, alpha):  E_{h_theta0}[exp(lambda * Y)] = 1
  * efficiency       e(eps, alpha) = lambda*I at alpha over lambda*I at 0, minus 1

plus the closed-form design rules for the soft threshold d and the global
threshold b, and the non-asymptotic ARL lower bound they derive from.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from .detectors import LocalParams, lalpha_increment
from .errors import ConfigError, MgfDivergenceError, NoPositiveRootError, NumericError, QuadratureError
from .models import GrossErrorModel, NominalFamily

MC_MIN_SAMPLES = 100_000


@dataclass(frozen=True)
class QuadratureConfig:
    """How expectations are evaluated: deterministic quadrature or Monte Carlo."""

    method: str = "gauss_hermite_mixture"
    tolerance: float = 1e-6
    n_samples: int = 1_000_000
    seed: int = 0
    nodes: int = 201

    def __post_init__(self):
        if self.method not in ("gauss_hermite_mixture", "monte_carlo"):
            raise ConfigError(f"unknown quadrature method {self.method!r}")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.method == "monte_carlo" and self.n_samples < MC_MIN_SAMPLES:
            raise ConfigError(f"monte_carlo needs >= {MC_MIN_SAMPLES} samples")
        if self.nodes < 3:
            raise ConfigError("need at least 3 quadrature nodes")

    @classmethod
    def monte_carlo(cls, n_samples: int = 1_000_000, seed: int = 0,
                    tolerance: float = 1e-6) -> "QuadratureConfig":
        return cls(method="monte_carlo", n_samples=n_samples, seed=seed, tolerance=tolerance)

    @classmethod
    def quadrature(cls, nodes: int = 201, tolerance: float = 1e-6) -> "QuadratureConfig":
        return cls(method="gauss_hermite_mixture", nodes=nodes, tolerance=tolerance)


@dataclass(frozen=True)
class TuningReport:
    """Summary of one configuration's tuning quantities."""

    lambda_: float
    info: float
    efficiency: float
    alpha_oracle: float
    d_opt: float
    b_gamma: float
    d_mode: str


def _gh_points(n: int):
    t, w = roots_hermite(n)
    return t * math.sqrt(2.0), w / math.sqrt(math.pi)


def mixture_nodes(model: GrossErrorModel, theta: float, n_nodes: int):
    """Quadrature nodes and probability weights for E_{h_theta}[phi(X)].

    Gaussian components use Gauss-Hermite; tabulated outliers use trapezoid
    weights on their own grid; a point mass is a single node.
    """
    t, w = _gh_points(n_nodes)
    fam = model.nominal
    xs = [theta + fam.sigma * t]
    ws = [(1.0 - model.epsilon) * w]
    if model.epsilon > 0.0:
        out = model.outlier
        if out.kind == "gaussian":
            xs.append(out.mean + out.sd * t)
            ws.append(model.epsilon * w)
        elif out.kind == "point_mass":
            xs.append(np.array([out.location]))
            ws.append(np.array([model.epsilon]))
        else:
            g = out.grid_x
            dens = out.grid_density
            dx = np.diff(g)
            trap = np.zeros_like(g)
            trap[:-1] += 0.5 * dx
            trap[1:] += 0.5 * dx
            xs.append(g)
            ws.append(model.epsilon * dens * trap)
    return np.concatenate(xs), np.concatenate(ws)


def _mixture_sample(model: GrossErrorModel, theta: float, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    values = rng.normal(theta, model.nominal.sigma, n)
    if model.epsilon > 0.0:
        mask = rng.random(n) < model.epsilon
        values = np.where(mask, model.outlier.sample(rng, n), values)
    return values


def info_number_closed_form(theta: float, alpha: float) -> float:
    """Contamination-free info number for the (0, 1, 1)-normalized family."""
    if alpha == 0.0:
        return theta - 0.5
    c = (2.0 * math.pi) ** (-alpha / 2.0)
    s = 2.0 * (1.0 + alpha)
    return (c / (alpha * math.sqrt(1.0 + alpha))) * (
        math.exp(-alpha * (theta - 1.0) ** 2 / s) - math.exp(-alpha * theta**2 / s))


def info_number(theta: float, epsilon: float, alpha: float, model: GrossErrorModel,
                qc: QuadratureConfig | None = None) -> float:
    """Expected local increment under the contaminated post-change model.

    Uses the closed form in the contamination-free, standard-normalized case;
    otherwise integrates the increment against the mixture.  Quadrature is
    validated by node doubling; disagreement beyond tolerance raises
    QuadratureError carrying the residual.
    """
    qc = qc or QuadratureConfig()
    model = model.with_epsilon(epsilon)
    fam = model.nominal
    if theta < fam.theta1:
        warnings.warn(f"info number evaluated below theta1 ({theta} < {fam.theta1}); "
                      "detectors are designed for shifts of at least theta1",
                      stacklevel=2)
    if epsilon == 0.0 and fam.is_standard:
        return info_number_closed_form(theta, alpha)
    p = LocalParams(alpha=alpha, fam=fam)
    if qc.method == "monte_carlo":
        rng = np.random.default_rng(qc.seed)
        x = _mixture_sample(model, theta, qc.n_samples, rng)
        return float(np.mean(lalpha_increment(x, p)))
    x, w = mixture_nodes(model, theta, qc.nodes)
    coarse = float(np.dot(w, lalpha_increment(x, p)))
    x2, w2 = mixture_nodes(model, theta, 2 * qc.nodes - 1)
    fine = float(np.dot(w2, lalpha_increment(x2, p)))
    residual = abs(fine - coarse)
    if residual > max(qc.tolerance, 1e-8 * max(1.0, abs(fine))):
        raise QuadratureError(f"info quadrature residual {residual:.3e}", residual=residual)
    return fine


def solve_mgf_root(values: np.ndarray, weights: np.ndarray | None = None,
                   tolerance: float = 1e-6, hint: float | None = None) -> float:
    """Unique positive root of E[exp(lambda * Y)] = 1 for a weighted sample of Y.

    Requires E[Y] < 0 (otherwise no positive root exists); the MGF is convex
    with value 1 at zero, so the root is bracketed by geometric expansion from
    lambda = 1 (or a caller-supplied hint) and then bisected until
    |E[exp(lambda Y)] - 1| < tolerance.
    """
    y = np.asarray(values, dtype=float)
    if weights is None:
        w = np.full(y.shape, 1.0 / y.size)
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    mean = float(np.dot(w, y))
    if mean >= 0.0:
        raise NoPositiveRootError(
            f"E[Y] = {mean:.6g} >= 0: no positive MGF root exists")

    def phi(lam: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.dot(w, np.exp(lam * y)))

    # walk down until the MGF dips below 1, then expand upward
    lo = hint if hint and hint > 0 else 1.0
    val = phi(lo)
    if not math.isfinite(val):
        raise MgfDivergenceError(f"MGF not finite at lambda = {lo:g}", last_finite_lambda=0.0)
    while val >= 1.0:
        lo /= 2.0
        if lo < 1e-12:
            raise NoPositiveRootError("MGF never dips below 1 near the origin")
        val = phi(lo)
    hi = max(2.0 * lo, 1.0)
    val = phi(hi)
    while math.isfinite(val) and val < 1.0:
        lo = hi
        hi *= 2.0
        if hi > 1e9:
            raise NoPositiveRootError("no upper bracket found below lambda = 1e9")
        val = phi(hi)
    if not math.isfinite(val):
        raise MgfDivergenceError(
            f"MGF diverged at lambda = {hi:g} before a root was bracketed",
            last_finite_lambda=lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = phi(mid)
        if abs(v - 1.0) < tolerance:
            return mid
        if v < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _increment_values(model: GrossErrorModel, theta: float, alpha: float,
                      qc: QuadratureConfig, rng: np.random.Generator | None = None):
    """(Y values, weights) for the increment under h_theta, per the chosen method."""
    p = LocalParams(alpha=alpha, fam=model.nominal)
    if qc.method == "monte_carlo":
        rng = rng or np.random.default_rng(qc.seed)
        x = _mixture_sample(model, theta, qc.n_samples, rng)
        return lalpha_increment(x, p), None
    x, w = mixture_nodes(model, theta, qc.nodes)
    return lalpha_increment(x, p), w


def solve_lambda(epsilon: float, alpha: float, model: GrossErrorModel,
                 qc: QuadratureConfig | None = None) -> float:
    """Positive root lambda(eps, alpha) of the pre-change increment MGF.

    At (eps, alpha) = (0, 0) the increment is the log-likelihood ratio and
    E_{f0}[f1/f0] = 1 identically, so the root is exactly 1.
    """
    qc = qc or QuadratureConfig()
    model = model.with_epsilon(epsilon)
    if epsilon == 0.0 and alpha == 0.0:
        return 1.0
    y, w = _increment_values(model, model.nominal.theta0, alpha, qc)
    return solve_mgf_root(y, w, tolerance=qc.tolerance)


def efficiency_improvement(epsilon: float, alpha: float, model: GrossErrorModel,
                           qc: QuadratureConfig | None = None) -> float:
    """Relative gain of lambda*I at (eps, alpha) over the alpha = 0 baseline."""
    qc = qc or QuadratureConfig()
    if alpha == 0.0:
        return 0.0
    theta1 = model.nominal.theta1
    num = solve_lambda(epsilon, alpha, model, qc) * info_number(theta1, epsilon, alpha, model, qc)
    den = solve_lambda(epsilon, 0.0, model, qc) * info_number(theta1, epsilon, 0.0, model, qc)
    return num / den - 1.0


@dataclass(frozen=True)
class GridRow:
    """One alpha grid point: root, info number, objective, efficiency."""

    alpha: float
    lambda_: float | None
    info: float | None
    objective: float | None
    efficiency: float | None


def tuning_grid(epsilon: float, model: GrossErrorModel, alpha_max: float = 2.0,
                step: float = 0.01, qc: QuadratureConfig | None = None) -> list[GridRow]:
    """Evaluate lambda, I, lambda*I and e over the alpha grid with one shared sample.

    The same pre- and post-change draws are reused at every grid point
    (common random numbers), which keeps the argmax stable; grid points with
    no positive root are recorded with None entries and skipped.
    """
    if step <= 0:
        raise ConfigError("grid step must be positive")
    qc = qc or QuadratureConfig()
    model = model.with_epsilon(epsilon)
    fam = model.nominal
    n_pts = int(round(alpha_max / step)) + 1
    alphas = np.round(np.arange(n_pts) * step, 10)

    if qc.method == "monte_carlo":
        rng = np.random.default_rng(qc.seed)
        x0 = _mixture_sample(model, fam.theta0, qc.n_samples, rng)
        x1 = _mixture_sample(model, fam.theta1, qc.n_samples, rng)
        w0 = w1 = None
    else:
        x0, w0 = mixture_nodes(model, fam.theta0, qc.nodes)
        x1, w1 = mixture_nodes(model, fam.theta1, qc.nodes)

    def averaged(values, weights):
        return float(np.mean(values)) if weights is None else float(np.dot(weights, values))

    rows = []
    prev_lam = None
    for a in alphas:
        p = LocalParams(alpha=float(a), fam=fam)
        if a == 0.0 and epsilon == 0.0:
            lam = 1.0
        else:
            try:
                lam = solve_mgf_root(lalpha_increment(x0, p), w0,
                                     tolerance=qc.tolerance, hint=prev_lam)
            except (NoPositiveRootError, MgfDivergenceError):
                rows.append(GridRow(float(a), None, None, None, None))
                continue
        prev_lam = lam
        info = averaged(lalpha_increment(x1, p), w1)
        rows.append(GridRow(float(a), lam, info, lam * info, None))

    base = next((r.objective for r in rows if r.alpha == 0.0 and r.objective is not None), None)
    if base is not None:
        rows = [GridRow(r.alpha, r.lambda_, r.info, r.objective,
                        None if r.objective is None else r.objective / base - 1.0)
                for r in rows]
    return rows


def alpha_oracle(epsilon: float, model: GrossErrorModel, alpha_max: float = 2.0,
                 step: float = 0.01, qc: QuadratureConfig | None = None) -> float:
    """Grid argmax of lambda * I at theta1; ties break toward smaller alpha."""
    rows = tuning_grid(epsilon, model, alpha_max, step, qc)
    best_alpha, best = None, -math.inf
    for r in rows:
        if r.objective is not None and r.objective > best:
            best, best_alpha = r.objective, r.alpha
    if best_alpha is None:
        raise NumericError("no grid point admits a positive MGF root")
    return best_alpha


# ---------------------------------------------------------------------------
# Design formulas
# ---------------------------------------------------------------------------

def d_opt(lambda_: float, K: int, m: int, gamma: float,
          mode: str | None = None) -> float:
    """First-order optimal soft-threshold level, clamped at zero.

    simplified: log(K/m) / lambda, valid when log(gamma) << K.
    exact: the unique minimizer of the delay bound b_gamma(d)/m + d.
    Default mode picks simplified when log(gamma) <= K, exact otherwise.
    """
    if not 1 <= m <= K:
        raise ConfigError(f"need 1 <= m <= K, got m={m}, K={K}")
    if gamma <= 1 or lambda_ <= 0:
        raise ConfigError("need gamma > 1 and lambda > 0")
    if mode is None:
        mode = "simplified" if math.log(gamma) <= K else "exact"
    if mode == "simplified":
        return max(math.log(K / m) / lambda_, 0.0)
    if mode != "exact":
        raise ConfigError(f"unknown d_opt mode {mode!r}")
    lg = math.log(4.0 * gamma)
    root = math.sqrt(m + lg / 4.0) - 0.5 * math.sqrt(lg)
    return max(math.log(K / root**2) / lambda_, 0.0)


def b_gamma(lambda_: float, K: int, d: float, gamma: float) -> float:
    """Conservative global threshold meeting the ARL constraint gamma."""
    if gamma <= 1 or lambda_ <= 0:
        raise ConfigError("need gamma > 1 and lambda > 0")
    return (math.sqrt(math.log(4.0 * gamma)) +
            math.sqrt(K * math.exp(-lambda_ * d))) ** 2 / lambda_


def delay_budget(lambda_: float, K: int, m: int, gamma: float, d: float) -> float:
    """The convex objective b_gamma(d)/m + d minimized by the exact d_opt."""
    return b_gamma(lambda_, K, d, gamma) / m + d


def arl_lower_bound(lambda_: float, b: float, d: float, K: int) -> float | None:
    """Non-asymptotic ARL lower bound; None when its hypothesis fails.

    Requires lambda * b > K * exp(-lambda * d).
    """
    if lambda_ <= 0:
        raise ConfigError("lambda must be positive")
    tail = K * math.exp(-lambda_ * d)
    if lambda_ * b <= tail:
        return None
    return 0.25 * math.exp((math.sqrt(lambda_ * b) - math.sqrt(tail)) ** 2)


def tuning_report(epsilon: float, model: GrossErrorModel, K: int, m: int, gamma: float,
                  alpha_max: float = 2.0, step: float = 0.01,
                  qc: QuadratureConfig | None = None) -> TuningReport:
    """Full tuning summary at the grid-oracle alpha."""
    qc = qc or QuadratureConfig()
    a_star = alpha_oracle(epsilon, model, alpha_max, step, qc)
    lam = solve_lambda(epsilon, a_star, model, qc)
    info = info_number(model.nominal.theta1, epsilon, a_star, model, qc)
    eff = efficiency_improvement(epsilon, a_star, model, qc)
    mode = "simplified" if math.log(gamma) <= K else "exact"
    d = d_opt(lam, K, m, gamma, mode)
    return TuningReport(lambda_=lam, info=info, efficiency=eff, alpha_oracle=a_star,
                        d_opt=d, b_gamma=b_gamma(lam, K, d, gamma), d_mode=mode)
