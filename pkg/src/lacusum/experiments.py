"""Simulation studies: delay tables, contamination robustness curves, tuning curves.

Detection delay is estimated with the change at time 1 (the worst case for
CUSUM-type statistics, whose local state is then at its reflecting floor).
Every cell derives its seed from (master seed, scheme index, scenario index),
so tables are reproducible and cells can run in any order.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .breakdown import breakdown_grid
from .calibration import RunEstimate, run_lengths
from .detectors import LAlphaScheme, Scheme
from .errors import ConfigError
from .models import ChangeScenario, GrossErrorModel, MixtureStreamSampler
from .tuning import QuadratureConfig, info_number, tuning_grid

DEFAULT_M_GRID = (1, 3, 5, 8, 10, 15, 20, 30, 50, 100)


@dataclass(frozen=True)
class ExperimentSpec:
    """A delay study: calibrated schemes crossed with change scenarios."""

    schemes: tuple
    model_pre: GrossErrorModel
    model_post: GrossErrorModel
    scenarios: tuple
    gamma: float
    reps: int = 200
    seed: int = 0
    cap: int = 100_000
    threads: int = 1


@dataclass(frozen=True)
class DelayRow:
    scheme: str
    parameter: float
    delay: RunEstimate | None
    delay_bound_ratio: float | None = None
    error: str | None = None


def simulate_delay(scheme: Scheme, model_post: GrossErrorModel, scenario: ChangeScenario,
                   reps: int, seed: int, cap: int = 100_000,
                   threads: int = 1) -> RunEstimate:
    """Mean detection delay with the change at time 1.

    The first scenario.m streams draw from the contaminated post-change
    distribution from the first observation on; the rest stay pre-change.
    """
    if scenario.nu != 1:
        raise ConfigError("delay simulation requires a scenario with nu = 1")
    scenario.validate_against(model_post.nominal)
    sampler = MixtureStreamSampler(model_post, scenario)
    lengths, censored = run_lengths(scheme, sampler, reps, cap, seed, threads=threads)
    return RunEstimate.from_lengths(lengths, censored)


def _delay_bound_ratio(scheme: Scheme, model: GrossErrorModel, scenario: ChangeScenario,
                   observed: float) -> float | None:
    """Observed delay over the first-order bound (b/m + d) / I_theta; report only."""
    if not isinstance(scheme, LAlphaScheme) or scheme.rule.kind != "soft_threshold":
        return None
    try:
        info = info_number(scenario.theta_post, model.epsilon, scheme.params.alpha,
                           model, QuadratureConfig())
    except Exception:
        return None
    if info <= 0:
        return None
    bound = (scheme.rule.b / scenario.m + scheme.rule.d) / info
    return observed / bound


def run_delay_table(spec: ExperimentSpec) -> list[DelayRow]:
    """Delay of every scheme under every scenario; errors recorded per cell.

    The row parameter is the affected-stream count when scenarios share a
    post-change location, otherwise the post-change location.
    """
    thetas = {s.theta_post for s in spec.scenarios}
    by_theta = len(thetas) > 1
    rows = []
    for i, scheme in enumerate(spec.schemes):
        for j, scenario in enumerate(spec.scenarios):
            param = scenario.theta_post if by_theta else scenario.m
            seed = _cell_seed(spec.seed, i, j)
            try:
                est = simulate_delay(scheme, spec.model_post, scenario,
                                     spec.reps, seed, spec.cap, spec.threads)
                ratio = _delay_bound_ratio(scheme, spec.model_post, scenario, est.mean)
                rows.append(DelayRow(scheme.label, float(param), est, ratio))
            except Exception as exc:  # record and keep going
                rows.append(DelayRow(scheme.label, float(param), None, None, str(exc)))
    return rows


def _cell_seed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence((seed, i, j)).generate_state(1)[0])


@dataclass(frozen=True)
class CurvePoint:
    scheme: str
    epsilon: float
    log_arl: float
    se_log: float
    estimate: RunEstimate


def arl_vs_epsilon_curve(schemes, model: GrossErrorModel, eps_grid, reps: int,
                         seed: int, K: int, cap: int, threads: int = 1) -> list[CurvePoint]:
    """log ARL as contamination grows, at thresholds fixed once (not re-calibrated).

    The delta-method standard error of the log is se / mean.
    """
    points = []
    for i, scheme in enumerate(schemes):
        for j, eps in enumerate(eps_grid):
            sampler = MixtureStreamSampler(model.with_epsilon(float(eps)),
                                           ChangeScenario.no_change(K))
            lengths, censored = run_lengths(scheme, sampler, reps, cap,
                                            _cell_seed(seed, i, j), threads=threads)
            est = RunEstimate.from_lengths(lengths, censored)
            points.append(CurvePoint(scheme.label, float(eps), math.log(est.mean),
                                     est.std_error / est.mean, est))
    return points


@dataclass(frozen=True)
class TuningCurveGrids:
    """Grids behind the four diagnostic curve families."""

    theta_grid: tuple = tuple(np.round(np.arange(0.6, 4.001, 0.05), 10))
    info_alphas: tuple = (0.21, 0.51)
    eff_alpha_max: float = 1.0
    eff_alpha_step: float = 0.01
    eff_epsilons: tuple = (0.0, 0.05, 0.1)
    eps_grid: tuple = tuple(np.round(np.arange(0.0, 0.1501, 0.01), 10))
    eps_curve_alpha: float = 0.21
    breakdown_alpha_max: float = 2.0
    breakdown_step: float = 0.01


def tuning_curves(model: GrossErrorModel, grids: TuningCurveGrids | None = None,
                  qc: QuadratureConfig | None = None) -> dict[str, list[tuple]]:
    """CSV-ready series for the four tuning diagnostics.

    info_vs_theta:      (alpha, theta, info)
    efficiency_vs_alpha:(epsilon, alpha, efficiency)
    efficiency_vs_eps:  (epsilon, efficiency)  at the curve alpha
    breakdown_vs_alpha: (alpha, d_alpha, m_alpha, eps_star)
    """
    grids = grids or TuningCurveGrids()
    qc = qc or QuadratureConfig()
    fam = model.nominal

    with warnings.catch_warnings():
        # the diagnostic scan deliberately covers shifts below theta1
        warnings.simplefilter("ignore", UserWarning)
        info_series = [(a, th, info_number(float(th), 0.0, a, model, qc))
                       for a in grids.info_alphas for th in grids.theta_grid]

    eff_alpha_series = []
    for eps in grids.eff_epsilons:
        for row in tuning_grid(float(eps), model, grids.eff_alpha_max,
                               grids.eff_alpha_step, qc):
            if row.efficiency is not None:
                eff_alpha_series.append((float(eps), row.alpha, row.efficiency))

    eff_eps_series = []
    a = grids.eps_curve_alpha
    for eps in grids.eps_grid:
        rows = tuning_grid(float(eps), model, a, a, qc)  # just alpha in {0, a}
        e = next((r.efficiency for r in rows if r.alpha == a), None)
        if e is not None:
            eff_eps_series.append((float(eps), e))

    bd_series = [(r.alpha, r.d_alpha, r.m_alpha, r.eps_star)
                 for r in breakdown_grid(fam, grids.breakdown_alpha_max,
                                         grids.breakdown_step)]

    return {
        "info_vs_theta": info_series,
        "efficiency_vs_alpha": eff_alpha_series,
        "efficiency_vs_eps": eff_eps_series,
        "breakdown_vs_alpha": bd_series,
    }
