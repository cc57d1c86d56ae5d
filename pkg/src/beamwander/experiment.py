"""Monte Carlo orchestration: ensembles over atmosphere and source
realizations, slow-detector averaging, wander statistics, cn2 sweeps.

Averaging convention: for each atmosphere realization the turbulence
screens are frozen and the final-plane intensity is averaged over n_src
independent source-coherence draws (a detector slow compared to source
fluctuations but fast compared to the atmosphere).  The centroid of
that averaged intensity is one wander sample; rw2 is the mean of
|centroid|^2 over atmosphere realizations.

Seeding: every random stream is derived from the master seed through
SeedSequence spawn keys (0, atm, screen) for turbulence and
(1, atm, draw) for source screens, so results are bit-identical for any
worker count, and sweeps sharing a master seed reuse the same
atmospheres at every grid point (common random numbers).
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
from joblib import Parallel, delayed

from . import analytics
from .exceptions import (
    DegenerateInputError,
    InputMismatchError,
    ParameterDomainError,
)
from .phase_screen import (
    SimGrid,
    SourceParams,
    generate_source_coherence_screen,
    generate_turbulence_screen,
    lambda_c_for_ratio,
)
from .propagation import (
    PropagationPlan,
    apply_screen,
    initial_field,
    make_plan,
    propagate,
)
from .spectra import TurbulenceParams

#: Below this many atmosphere realizations the stats carry a low-statistics flag.
MIN_REPORTED_ATMOSPHERES = 30

#: Setup check: final window should cover this many analytic beam radii.
_WINDOW_CHECK_FACTOR = 8.0


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo scenario: physics, discretization, ensemble sizes.

    grid is the launch grid and must equal plan.launch_grid.  window_cap
    records an explicit window override (None = automatic ladder) so
    sweeps can rebuild plans per point under the same constraint.
    """

    src: SourceParams
    turb: TurbulenceParams
    geom: analytics.GeometryParams
    grid: SimGrid
    plan: PropagationPlan
    n_atm: int
    n_src: int
    master_seed: int
    workers: int = 1
    window_cap: float | None = None

    def __post_init__(self) -> None:
        if self.n_atm < 1:
            raise ParameterDomainError(f"n_atm must be >= 1, got {self.n_atm}")
        if self.n_src < 1:
            raise ParameterDomainError(f"n_src must be >= 1, got {self.n_src}")
        if self.workers < 1:
            raise ParameterDomainError(f"workers must be >= 1, got {self.workers}")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ParameterDomainError(
                f"master_seed must be a nonnegative integer, got {self.master_seed!r}"
            )
        if self.grid != self.plan.launch_grid:
            raise InputMismatchError(
                f"config grid {self.grid} does not match plan launch grid "
                f"{self.plan.launch_grid}"
            )


def make_config(
    src: SourceParams,
    turb: TurbulenceParams,
    geom: analytics.GeometryParams,
    n: int = 512,
    n_screens: int | None = None,
    window: float | None = None,
    n_atm: int = 200,
    n_src: int = 16,
    master_seed: int = 0,
    workers: int = 1,
) -> ExperimentConfig:
    """Build an ExperimentConfig with a freshly planned propagation."""
    plan = make_plan(src, turb, geom, n=n, n_screens=n_screens, window=window)
    return ExperimentConfig(
        src=src,
        turb=turb,
        geom=geom,
        grid=plan.launch_grid,
        plan=plan,
        n_atm=n_atm,
        n_src=n_src,
        master_seed=master_seed,
        workers=workers,
        window_cap=window,
    )


@dataclasses.dataclass(frozen=True)
class WanderStats:
    """Wander and radius statistics from one Monte Carlo run.

    rw2_mean is the ensemble mean of |centroid|^2 (both transverse
    components), rw2_se its standard error.  rb2_longterm is the
    about-axis second moment of the slow-detector intensity,
    rb2_shortterm the about-centroid one; the two differ by rw2_mean
    (parallel-axis identity).  diagnostics carries run-health fields,
    including window_overflow, which invalidates the run when true.
    """

    rw2_mean: float
    rw2_se: float
    rb2_longterm: float
    rb2_shortterm: float
    n_atm: int
    n_src: int
    master_seed: int
    diagnostics: dict


def _marginals(intensity, grid: SimGrid):
    inten = np.asarray(intensity, dtype=float)
    if inten.shape != (grid.n, grid.n):
        raise InputMismatchError(
            f"intensity shape {inten.shape} does not match grid n = {grid.n}"
        )
    total = float(inten.sum())
    if not math.isfinite(total) or total <= 0.0:
        raise DegenerateInputError(
            f"total intensity must be finite and positive, got {total}"
        )
    return inten.sum(axis=1), inten.sum(axis=0), total


def centroid(intensity, grid: SimGrid) -> np.ndarray:
    """First moment of intensity, m; normalized by the same field's power."""
    mx, my, total = _marginals(intensity, grid)
    c = grid.coords()
    return np.array([float(mx @ c) / total, float(my @ c) / total])


def mean_square_radius(intensity, grid: SimGrid, about: str = "axis") -> float:
    """Second moment of intensity, m^2, about the axis or the centroid."""
    if about == "axis":
        ax = ay = 0.0
    elif about == "centroid":
        ax, ay = centroid(intensity, grid)
    else:
        raise ParameterDomainError(
            f"about must be 'axis' or 'centroid', got {about!r}"
        )
    mx, my, total = _marginals(intensity, grid)
    c = grid.coords()
    return (float(mx @ (c - ax) ** 2) + float(my @ (c - ay) ** 2)) / total


def _one_atmosphere(
    plan: PropagationPlan,
    src: SourceParams,
    turb: TurbulenceParams,
    master_seed: int,
    n_src: int,
    atm_idx: int,
):
    """One wander sample: frozen screens, slow-detector intensity, centroid."""
    screens = [
        generate_turbulence_screen(
            plan.screen_grids[i],
            turb,
            plan.dz_layer,
            plan.q0,
            seed=np.random.SeedSequence(master_seed, spawn_key=(0, atm_idx, i)),
        )
        for i in range(plan.n_screens)
    ]
    base = initial_field(plan.launch_grid, src)
    if src.coherent:
        final, diag = propagate(base, plan, screens)
        mean_intensity = final.intensity()
        diags = [diag]
    else:
        acc = None
        diags = []
        for j in range(n_src):
            sseed = np.random.SeedSequence(master_seed, spawn_key=(1, atm_idx, j))
            sscreen = generate_source_coherence_screen(
                plan.launch_grid, src.lambda_c, seed=sseed
            )
            final, diag = propagate(apply_screen(base, sscreen), plan, screens)
            acc = final.intensity() if acc is None else acc + final.intensity()
            diags.append(diag)
        mean_intensity = acc / n_src
    grid = plan.final_grid
    c = centroid(mean_intensity, grid)
    rb2_long = mean_square_radius(mean_intensity, grid, about="axis")
    rb2_short = mean_square_radius(mean_intensity, grid, about="centroid")
    return (
        float(c[0] ** 2 + c[1] ** 2),
        rb2_long,
        rb2_short,
        max(d.absorbed_fraction for d in diags),
        any(d.window_overflow for d in diags),
        min(d.paraxial_fraction for d in diags),
        max(d.max_screen_phase_rms for d in diags),
        diags[0].n_regrids,
    )


def run_wander_experiment(config: ExperimentConfig) -> WanderStats:
    """Run the full atmosphere ensemble and reduce to WanderStats.

    Deterministic given (config, master_seed) for any worker count:
    realizations are pure functions of their index and are reduced in
    index order.  A final window below 8 analytic beam radii only warns;
    the binding check is cumulative absorbed power (> 1% in any
    realization sets diagnostics["window_overflow"], invalidating the
    run).
    """
    rb2_an = analytics.beam_radius_squared(config.src, config.turb, config.geom)
    if config.plan.final_grid.window < _WINDOW_CHECK_FACTOR * math.sqrt(rb2_an):
        warnings.warn(
            f"final window {config.plan.final_grid.window:g} m is below "
            f"{_WINDOW_CHECK_FACTOR:g} analytic beam radii "
            f"({_WINDOW_CHECK_FACTOR * math.sqrt(rb2_an):g} m); "
            "expect absorbed-power invalidation",
            stacklevel=2,
        )
    args = (config.plan, config.src, config.turb, config.master_seed, config.n_src)
    if config.workers > 1:
        rows = Parallel(n_jobs=config.workers)(
            delayed(_one_atmosphere)(*args, a) for a in range(config.n_atm)
        )
    else:
        rows = [_one_atmosphere(*args, a) for a in range(config.n_atm)]

    w2 = np.array([r[0] for r in rows])
    rb2_long = np.array([r[1] for r in rows])
    rb2_short = np.array([r[2] for r in rows])
    rw2_mean = float(np.mean(w2))
    rw2_se = (
        float(np.std(w2, ddof=1) / math.sqrt(config.n_atm))
        if config.n_atm > 1
        else float("nan")
    )
    rb2_longterm = float(np.mean(rb2_long))
    rb2_shortterm = float(np.mean(rb2_short))
    strong = analytics.strong_turbulence_condition(config.src, config.turb, config.geom)
    prediction = analytics.wander_variance_weak(config.src, config.turb, config.geom)
    diagnostics = {
        "absorbed_fraction_max": max(r[3] for r in rows),
        "window_overflow": any(r[4] for r in rows),
        "paraxial_fraction_min": min(r[5] for r in rows),
        "max_screen_phase_rms": max(r[6] for r in rows),
        "n_regrids": rows[0][7],
        "final_window": config.plan.final_grid.window,
        "decomposition_residual": rb2_longterm - rb2_shortterm - rw2_mean,
        "parallel_axis_residual_max": float(np.max(np.abs(rb2_long - rb2_short - w2))),
        "low_statistics": config.n_atm < MIN_REPORTED_ATMOSPHERES,
        "weak_theory_regime": prediction.regime,
        "strong_turbulence": strong.strong,
        "strong_turbulence_margin": strong.margin,
    }
    return WanderStats(
        rw2_mean=rw2_mean,
        rw2_se=rw2_se,
        rb2_longterm=rb2_longterm,
        rb2_shortterm=rb2_shortterm,
        n_atm=config.n_atm,
        n_src=config.n_src,
        master_seed=config.master_seed,
        diagnostics=diagnostics,
    )


@dataclasses.dataclass(frozen=True)
class SweepRow:
    """One (cn2, coherence ratio) point of a sweep curve.

    ratio is rw2_mean / rb2_longterm (the dimensionless wander curve).
    status is "ok", "invalid:window-overflow", or "error:<ExceptionName>"
    (stats is None in the error case).
    """

    cn2: float
    r1_ratio: float
    rw2_mean: float
    rw2_se: float
    rb2_sim: float
    rb2_analytic: float
    ratio: float
    n_atm: int
    n_src: int
    seed: int
    status: str
    stats: WanderStats | None


def sweep_cn2(
    config: ExperimentConfig,
    cn2_values,
    coherence_ratios,
) -> list:
    """Run the wander experiment over a cn2 grid for each coherence ratio.

    Rows are ordered ratio-major (cn2 ascending within each ratio).  The
    propagation plan is rebuilt per point (window ladder and validity
    checks depend on cn2); all points share config.master_seed, so the
    same atmospheres drive every point (smooth response curves).
    Per-point failures become rows with an error status and the sweep
    continues.
    """
    cn2_values = [float(v) for v in cn2_values]
    coherence_ratios = [float(r) for r in coherence_ratios]
    if not cn2_values or not coherence_ratios:
        raise ParameterDomainError("cn2_values and coherence_ratios must be nonempty")
    if any(b < a for a, b in zip(cn2_values, cn2_values[1:])):
        raise ParameterDomainError("cn2_values must be ascending")
    if any(not 0.0 < r <= 1.0 for r in coherence_ratios):
        raise ParameterDomainError("coherence ratios must be in (0, 1]")

    rows = []
    for r1_ratio in coherence_ratios:
        lam = lambda_c_for_ratio(config.src.r0, r1_ratio)
        src = SourceParams(r0=config.src.r0, q0=config.src.q0, lambda_c=lam)
        for cn2 in cn2_values:
            turb = dataclasses.replace(config.turb, cn2=cn2)
            rb2_analytic = analytics.beam_radius_squared(src, turb, config.geom)
            try:
                point = make_config(
                    src,
                    turb,
                    config.geom,
                    n=config.grid.n,
                    n_screens=config.plan.n_screens,
                    window=config.window_cap,
                    n_atm=config.n_atm,
                    n_src=config.n_src,
                    master_seed=config.master_seed,
                    workers=config.workers,
                )
                stats = run_wander_experiment(point)
            except Exception as exc:  # noqa: BLE001 - per-point isolation by contract
                rows.append(
                    SweepRow(
                        cn2=cn2,
                        r1_ratio=r1_ratio,
                        rw2_mean=float("nan"),
                        rw2_se=float("nan"),
                        rb2_sim=float("nan"),
                        rb2_analytic=rb2_analytic,
                        ratio=float("nan"),
                        n_atm=config.n_atm,
                        n_src=config.n_src,
                        seed=config.master_seed,
                        status=f"error:{type(exc).__name__}",
                        stats=None,
                    )
                )
                continue
            status = (
                "invalid:window-overflow"
                if stats.diagnostics["window_overflow"]
                else "ok"
            )
            rows.append(
                SweepRow(
                    cn2=cn2,
                    r1_ratio=r1_ratio,
                    rw2_mean=stats.rw2_mean,
                    rw2_se=stats.rw2_se,
                    rb2_sim=stats.rb2_longterm,
                    rb2_analytic=rb2_analytic,
                    ratio=stats.rw2_mean / stats.rb2_longterm,
                    n_atm=stats.n_atm,
                    n_src=stats.n_src,
                    seed=config.master_seed,
                    status=status,
                    stats=stats,
                )
            )
    return rows
