"""Monte Carlo orchestration: moments, averaging, determinism, sweeps.

All runs here use a deliberately small desk configuration (n = 64,
window 0.32 m, few realizations) so the whole file stays fast; the
statistical acceptance checks live in test_acceptance.py.
"""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beamwander import (
    DegenerateInputError,
    ExperimentConfig,
    InputMismatchError,
    ParameterDomainError,
    SimGrid,
    SourceParams,
    TurbulenceParams,
    centroid,
    lambda_c_for_ratio,
    make_config,
    mean_square_radius,
    run_wander_experiment,
    sweep_cn2,
)
from beamwander.analytics import GeometryParams

from conftest import L0_INNER


def _small_config(cn2=1e-16, ratio=1.0, n_atm=4, n_src=2, seed=7, workers=1):
    lam = lambda_c_for_ratio(0.04, ratio)
    return make_config(
        SourceParams(r0=0.04, q0=1e7, lambda_c=lam),
        TurbulenceParams(cn2=cn2, L0=1e3, l0=L0_INNER),
        GeometryParams(z=5e3),
        n=64,
        window=0.32,
        n_atm=n_atm,
        n_src=n_src,
        master_seed=seed,
        workers=workers,
    )


# --------------------------------------------------------------- moments


def test_centroid_symmetric_gaussian(grid_small):
    # narrow enough that the tail is zero at the (asymmetric) grid edge
    c = grid_small.coords()
    intensity = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / 2e-4)
    assert np.max(np.abs(centroid(intensity, grid_small))) < 1e-12 * grid_small.window


def test_centroid_single_pixel(grid_small):
    intensity = np.zeros((64, 64))
    intensity[40, 13] = 2.5
    cx, cy = centroid(intensity, grid_small)
    coords = grid_small.coords()
    assert cx == coords[40]
    assert cy == coords[13]


def test_centroid_translated_gaussian(grid_small):
    c = grid_small.coords()
    intensity = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / 2e-4)
    shifted = np.roll(intensity, 5, axis=0)
    cx, cy = centroid(shifted, grid_small)
    assert cx == pytest.approx(5 * grid_small.dx, abs=grid_small.dx / 100.0)
    assert abs(cy) < 1e-12


def test_centroid_zero_intensity(grid_small):
    with pytest.raises(DegenerateInputError):
        centroid(np.zeros((64, 64)), grid_small)
    with pytest.raises(DegenerateInputError):
        mean_square_radius(np.zeros((64, 64)), grid_small)


def test_mean_square_radius_about_validation(grid_small):
    intensity = np.ones((64, 64))
    with pytest.raises(ParameterDomainError):
        mean_square_radius(intensity, grid_small, about="edge")


def test_mean_square_radius_translation_invariance(grid_small):
    c = grid_small.coords()
    intensity = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / 2e-4)
    shifted = np.roll(intensity, 4, axis=1)
    a = mean_square_radius(intensity, grid_small, about="centroid")
    b = mean_square_radius(shifted, grid_small, about="centroid")
    assert b == pytest.approx(a, rel=1e-9)


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_parallel_axis_identity(seed):
    grid = SimGrid(n=64, dx=0.005)
    intensity = np.random.default_rng(seed).random((64, 64))
    axis = mean_square_radius(intensity, grid, about="axis")
    short = mean_square_radius(intensity, grid, about="centroid")
    cx, cy = centroid(intensity, grid)
    assert axis == pytest.approx(short + cx * cx + cy * cy, rel=1e-9)


# ---------------------------------------------------------------- config


def test_config_validation():
    good = _small_config()
    with pytest.raises(ParameterDomainError):
        dataclasses.replace(good, n_atm=0)
    with pytest.raises(ParameterDomainError):
        dataclasses.replace(good, n_src=0)
    with pytest.raises(ParameterDomainError):
        dataclasses.replace(good, workers=0)
    with pytest.raises(ParameterDomainError):
        dataclasses.replace(good, master_seed=-1)
    with pytest.raises(InputMismatchError):
        dataclasses.replace(good, grid=SimGrid(n=64, dx=0.01))


def test_make_config_records_window_cap():
    cfg = _small_config()
    assert cfg.window_cap == 0.32
    assert cfg.grid == cfg.plan.launch_grid


# ------------------------------------------------------------ experiment


def test_vacuum_coherent_run_has_no_wander():
    cfg = _small_config(cn2=0.0, ratio=1.0, n_atm=2, n_src=1)
    stats = run_wander_experiment(cfg)
    assert stats.rw2_mean <= 1e-10 * 0.04 ** 2
    assert stats.diagnostics["window_overflow"] is False
    assert stats.diagnostics["max_screen_phase_rms"] == 0.0
    # deterministic field: both radii equal the vacuum moment
    assert stats.rb2_longterm == pytest.approx(stats.rb2_shortterm, rel=1e-9)


def test_run_deterministic_and_worker_independent():
    a = run_wander_experiment(_small_config(ratio=0.5, seed=11))
    b = run_wander_experiment(_small_config(ratio=0.5, seed=11))
    c = run_wander_experiment(_small_config(ratio=0.5, seed=11, workers=2))
    assert a == b
    assert c.rw2_mean == a.rw2_mean
    assert c.rb2_longterm == a.rb2_longterm
    assert c.rb2_shortterm == a.rb2_shortterm
    d = run_wander_experiment(_small_config(ratio=0.5, seed=12))
    assert d.rw2_mean != a.rw2_mean


def test_coherent_bypass_ignores_n_src():
    one = run_wander_experiment(_small_config(ratio=1.0, n_src=1, seed=3))
    five = run_wander_experiment(_small_config(ratio=1.0, n_src=5, seed=3))
    assert five.rw2_mean == one.rw2_mean
    assert five.rb2_longterm == one.rb2_longterm


def test_decomposition_identity_is_exact():
    stats = run_wander_experiment(_small_config(ratio=0.5, n_atm=6, seed=5))
    assert abs(stats.diagnostics["decomposition_residual"]) <= 1e-10 * stats.rb2_longterm
    assert stats.diagnostics["parallel_axis_residual_max"] <= 1e-10 * stats.rb2_longterm
    # and therefore well within the 3-combined-SE contract
    assert abs(stats.rb2_longterm - stats.rb2_shortterm - stats.rw2_mean) <= max(
        3.0 * stats.rw2_se, 1e-10 * stats.rb2_longterm
    )


def test_low_statistics_flag():
    small = run_wander_experiment(_small_config(n_atm=4, n_src=1, ratio=1.0))
    assert small.diagnostics["low_statistics"] is True
    big = run_wander_experiment(_small_config(n_atm=30, n_src=1, ratio=1.0))
    assert big.diagnostics["low_statistics"] is False
    assert big.rw2_se > 0.0


def test_window_check_warns_when_beam_outgrows_cap():
    cfg = _small_config(cn2=1e-15, n_atm=1, n_src=1, ratio=1.0)
    with pytest.warns(UserWarning, match="analytic beam radii"):
        run_wander_experiment(cfg)


# ----------------------------------------------------------------- sweep


def test_sweep_zero_cn2_point():
    cfg = _small_config(n_atm=2, n_src=1)
    rows = sweep_cn2(cfg, [0.0], [1.0, 0.5])
    assert [r.r1_ratio for r in rows] == [1.0, 0.5]
    assert all(r.status == "ok" for r in rows)
    assert all(r.seed == cfg.master_seed for r in rows)
    # coherent curve: no turbulence means a deterministic, centered beam
    assert rows[0].ratio == pytest.approx(0.0, abs=1e-12)
    # partial coherence keeps a finite source-jitter floor at n_src = 1;
    # it sits orders of magnitude below the turbulent signal
    assert 0.0 < rows[1].ratio < 0.1


def test_sweep_input_validation():
    cfg = _small_config(n_atm=2, n_src=1)
    with pytest.raises(ParameterDomainError):
        sweep_cn2(cfg, [], [1.0])
    with pytest.raises(ParameterDomainError):
        sweep_cn2(cfg, [1e-15], [])
    with pytest.raises(ParameterDomainError):
        sweep_cn2(cfg, [1e-15, 1e-16], [1.0])
    with pytest.raises(ParameterDomainError):
        sweep_cn2(cfg, [1e-16], [0.0])
    with pytest.raises(ParameterDomainError):
        sweep_cn2(cfg, [1e-16], [1.5])


def test_sweep_isolates_per_point_failures():
    # the second point needs far more than the configured 10 screens to
    # respect the per-layer phase cap, so its plan refuses; the sweep
    # must record that and continue
    cfg = _small_config(n_atm=2, n_src=1)
    rows = sweep_cn2(cfg, [1e-16, 5e-12], [1.0])
    assert len(rows) == 2
    assert rows[0].status == "ok"
    assert rows[1].status == "error:StepSizeError"
    assert math.isnan(rows[1].rw2_mean)
    assert math.isfinite(rows[1].rb2_analytic)
    assert rows[1].stats is None


def test_sweep_rows_ordered_and_broadening_monotone():
    cfg = _small_config(n_atm=6, n_src=1)
    rows = sweep_cn2(cfg, [1e-17, 1e-16], [1.0])
    assert [(r.r1_ratio, r.cn2) for r in rows] == [(1.0, 1e-17), (1.0, 1e-16)]
    assert all(r.status == "ok" for r in rows)
    assert rows[1].rb2_sim >= rows[0].rb2_sim
    # the simulated radius is bracketed by the vacuum moment and the
    # full broadening theory (the n = 64 desk grid under-resolves part
    # of the small-scale spread, so exact tracking is not expected here)
    vacuum = 8.0e-4 * (1.0 + 4.0 * 5e3 ** 2 / (1e7 ** 2 * 0.04 ** 4))
    for r in rows:
        assert 0.95 * vacuum <= r.rb2_sim <= 1.05 * r.rb2_analytic
