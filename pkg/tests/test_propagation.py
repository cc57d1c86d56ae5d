"""Split-step paraxial propagation: steps, screens, absorber, plans."""

import math

import numpy as np
import pytest

from beamwander import (
    ComplexField,
    InputMismatchError,
    ParameterDomainError,
    PhaseScreen,
    ResolutionError,
    SimGrid,
    SourceParams,
    StepSizeError,
    TurbulenceParams,
    absorbing_window,
    angular_spectrum_step,
    apply_screen,
    beam_radius_squared,
    centroid,
    initial_field,
    make_plan,
    mean_square_radius,
    propagate,
)
from beamwander.analytics import GeometryParams
from beamwander.propagation import max_step_length

from conftest import L0_INNER, total_power


def _zero_screens_for(plan):
    return [
        PhaseScreen(grid=g, values=np.zeros((g.n, g.n)), role="turbulence-layer", seed=None)
        for g in plan.screen_grids
    ]


# --------------------------------------------------------- initial field


def test_initial_field_moments(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    assert field.z == 0.0
    assert field.power() == pytest.approx(1.0, rel=1e-12)
    i = field.intensity()
    assert mean_square_radius(i, grid_desk) == pytest.approx(8.0e-4, rel=0.005)
    assert np.max(np.abs(centroid(i, grid_desk))) < 1e-12
    assert field.paraxial_power_fraction(src_4cm.q0) > 0.999


def test_initial_field_under_resolved(grid_desk):
    # needs r0 >= 8 dx = 0.04
    with pytest.raises(ResolutionError):
        initial_field(grid_desk, SourceParams(r0=0.039, q0=1e7))


def test_vacuum_diffraction_closed_form():
    # r0 = 1 cm over 5 km: <r^2> = (r0^2/2)(1 + 4 z^2/(q0^2 r0^4))
    grid = SimGrid(n=512, dx=1.25e-3)
    src = SourceParams(r0=0.01, q0=1e7)
    field = initial_field(grid, src)
    for _ in range(5):
        field = angular_spectrum_step(field, 1000.0, src.q0)
    assert field.z == pytest.approx(5e3)
    expected = (0.01 ** 2 / 2.0) * (1.0 + 4.0 * 5e3 ** 2 / (1e7 ** 2 * 0.01 ** 4))
    msr = mean_square_radius(field.intensity(), grid)
    assert msr == pytest.approx(expected, rel=0.005)
    turb_off = TurbulenceParams(cn2=0.0, L0=1e3, l0=L0_INNER)
    assert expected == pytest.approx(
        beam_radius_squared(src, turb_off, GeometryParams(z=5e3)), rel=1e-12
    )


# ---------------------------------------------------------- vacuum steps


def test_step_zero_is_identity(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    out = angular_spectrum_step(field, 0.0, src_4cm.q0)
    assert np.array_equal(out.values, field.values)
    assert out.z == field.z


def test_step_rejects_negative(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    with pytest.raises(ParameterDomainError):
        angular_spectrum_step(field, -1.0, src_4cm.q0)


def test_step_rejects_aliasing_dz(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    dz_max = max_step_length(grid_desk, src_4cm.q0)
    with pytest.raises(StepSizeError) as err:
        angular_spectrum_step(field, dz_max * 1.01, src_4cm.q0)
    assert err.value.suggested_max == pytest.approx(dz_max)


def test_step_semigroup(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    one = angular_spectrum_step(field, 800.0, src_4cm.q0)
    two = angular_spectrum_step(
        angular_spectrum_step(field, 400.0, src_4cm.q0), 400.0, src_4cm.q0
    )
    diff = np.linalg.norm(two.values - one.values) / np.linalg.norm(one.values)
    assert diff < 1e-12


def test_step_conserves_power(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    out = angular_spectrum_step(field, 900.0, src_4cm.q0)
    assert abs(out.power() - field.power()) / field.power() < 1e-9


def test_tilt_translates_centroid():
    # linear phase a x moves the far centroid by a z / q0
    grid = SimGrid(n=256, dx=1e-3)
    src = SourceParams(r0=0.01, q0=1e7)
    field = initial_field(grid, src)
    a = 250.0
    ramp = PhaseScreen(
        grid=grid,
        values=a * grid.coords()[:, None] * np.ones((1, grid.n)),
        role="turbulence-layer",
        seed=None,
    )
    field = apply_screen(field, ramp)
    field = angular_spectrum_step(field, 400.0, src.q0)
    cx, cy = centroid(field.intensity(), grid)
    assert cx == pytest.approx(a * 400.0 / src.q0, rel=0.005)
    assert abs(cy) < 1e-12


# --------------------------------------------------------------- screens


def test_apply_screen_zero_identity(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    zero = PhaseScreen(
        grid=grid_desk, values=np.zeros((256, 256)), role="turbulence-layer", seed=None
    )
    out = apply_screen(field, zero)
    assert np.array_equal(out.values, field.values)


def test_apply_screen_uniform_is_global_phase(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    c = 0.735
    uniform = PhaseScreen(
        grid=grid_desk, values=np.full((256, 256), c), role="turbulence-layer", seed=None
    )
    out = apply_screen(field, uniform)
    np.testing.assert_allclose(out.values, field.values * np.exp(1j * c), rtol=1e-13)
    np.testing.assert_allclose(out.intensity(), field.intensity(), rtol=1e-12, atol=1e-300)


def test_apply_screen_grid_mismatch(grid_desk, grid_small, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    other = PhaseScreen(
        grid=grid_small, values=np.zeros((64, 64)), role="turbulence-layer", seed=None
    )
    with pytest.raises(InputMismatchError):
        apply_screen(field, other)


def test_turbulence_screen_is_unitary(grid_desk, src_4cm, turb_weak):
    from beamwander import generate_turbulence_screen

    field = initial_field(grid_desk, src_4cm)
    screen = generate_turbulence_screen(grid_desk, turb_weak, dz=500.0, q0=1e7, seed=12)
    out = apply_screen(field, screen)
    assert out.power() == pytest.approx(field.power(), rel=1e-12)


# -------------------------------------------------------------- absorber


def test_absorber_leaves_confined_beam(grid_desk, src_4cm):
    field = initial_field(grid_desk, src_4cm)
    out, absorbed = absorbing_window(field)
    diff = np.linalg.norm(out.values - field.values) / np.linalg.norm(field.values)
    assert diff < 1e-12
    assert absorbed < 1e-12


def test_absorber_zero_field(grid_desk):
    field = ComplexField(grid=grid_desk, values=np.zeros((256, 256), complex), z=0.0)
    out, absorbed = absorbing_window(field)
    assert not out.values.any()
    assert absorbed == 0.0


def test_absorber_bookkeeping_on_wide_field(grid_desk):
    # uniform field overlaps the mask ramp; the reported loss must equal
    # the actual power difference and the center must stay untouched
    values = np.ones((256, 256), complex)
    field = ComplexField(grid=grid_desk, values=values, z=0.0)
    out, absorbed = absorbing_window(field)
    assert absorbed > 0.0
    assert absorbed == pytest.approx(field.power() - out.power(), rel=1e-12)
    n = 256
    core = slice(n // 2 - 20, n // 2 + 20)
    np.testing.assert_array_equal(out.values[core, core], values[core, core])


# ------------------------------------------------------------------ plan


def test_plan_defaults(src_4cm, turb_sweep):
    plan_10k = make_plan(src_4cm, turb_sweep, GeometryParams(z=1e4), n=256)
    plan_5k = make_plan(src_4cm, turb_sweep, GeometryParams(z=5e3), n=256)
    assert plan_10k.n_screens == 20
    assert plan_5k.n_screens == 10
    assert plan_5k.dz_layer <= 5e3 / 10.0
    # screens at segment midpoints
    np.testing.assert_allclose(
        plan_5k.screen_positions, (np.arange(10) + 0.5) * 500.0, rtol=1e-12
    )
    # launch window is 32 r0
    assert plan_5k.launch_grid.window == pytest.approx(32 * 0.04)
    # vacuum pieces cover the full path
    assert sum(dz for op, dz in plan_5k.steps if op == "vac") == pytest.approx(5e3)
    assert sum(1 for op, _ in plan_5k.steps if op == "screen") == 10


def test_plan_rejects_sparse_screens(src_4cm, turb_sweep):
    with pytest.raises(ParameterDomainError):
        make_plan(src_4cm, turb_sweep, GeometryParams(z=1e4), n=256, n_screens=9)


def test_plan_enforces_phase_variance_cap(src_4cm):
    # 10 screens over 10 km at cn2 = 5e-13 puts ~1031 rad^2 of tilt
    # phase on each layer; the plan must refuse and size the fix
    heavy = TurbulenceParams(cn2=5e-13, L0=1e3, l0=L0_INNER)
    with pytest.raises(StepSizeError) as err:
        make_plan(src_4cm, heavy, GeometryParams(z=1e4), n=256, n_screens=10)
    assert err.value.suggested_max == pytest.approx(1e4 / 12.0)
    # the default 20-screen layout stays under the cap
    plan = make_plan(src_4cm, heavy, GeometryParams(z=1e4), n=256)
    assert plan.n_screens == 20


def test_plan_window_ladder(src_4cm, turb_sweep):
    # strong spreading run: the window must grow to cover the final beam
    hot = TurbulenceParams(cn2=1e-13, L0=1e3, l0=L0_INNER)
    plan = make_plan(src_4cm, hot, GeometryParams(z=1e4), n=256)
    rb2 = beam_radius_squared(src_4cm, hot, GeometryParams(z=1e4))
    assert plan.final_grid.window >= 8.5 * math.sqrt(rb2)
    widths = [w for _, w in plan.window_profile]
    assert widths == sorted(widths)
    # an explicit window caps the ladder
    capped = make_plan(src_4cm, hot, GeometryParams(z=1e4), n=256, window=2.56)
    assert capped.final_grid.window <= 2.56 + 1e-9


# ------------------------------------------------------------- propagate


def test_propagate_zero_screens_is_vacuum(src_4cm, turb_sweep):
    plan = make_plan(src_4cm, turb_sweep, GeometryParams(z=5e3), n=256)
    assert not any(op == "regrid" for op, _ in plan.steps)
    field = initial_field(plan.launch_grid, src_4cm)
    out, diag = propagate(field, plan, _zero_screens_for(plan))
    manual = field
    for op, dz in plan.steps:
        if op == "vac":
            manual = angular_spectrum_step(manual, dz, src_4cm.q0)
    diff = np.linalg.norm(out.values - manual.values) / np.linalg.norm(manual.values)
    assert diff < 1e-10
    assert out.z == pytest.approx(5e3)
    assert diag.absorbed_fraction < 1e-10
    assert diag.window_overflow is False
    assert diag.max_screen_phase_rms == 0.0


def test_propagate_validates_inputs(src_4cm, turb_sweep):
    plan = make_plan(src_4cm, turb_sweep, GeometryParams(z=5e3), n=256)
    field = initial_field(plan.launch_grid, src_4cm)
    screens = _zero_screens_for(plan)
    with pytest.raises(InputMismatchError):
        propagate(field, plan, screens[:-1])
    wrong_grid = SimGrid(n=plan.launch_grid.n, dx=plan.launch_grid.dx * 2)
    with pytest.raises(InputMismatchError):
        propagate(
            ComplexField(grid=wrong_grid, values=field.values, z=0.0), plan, screens
        )
    bad = screens[:5] + [
        PhaseScreen(grid=wrong_grid, values=np.zeros((256, 256)), role="turbulence-layer", seed=None)
    ] + screens[6:]
    with pytest.raises(InputMismatchError):
        propagate(field, plan, bad)


def test_propagate_tilt_oracle():
    # one tilted screen in an otherwise empty plan: the centroid lands
    # at a (z - z_screen) / q0 even across window regrids
    src = SourceParams(r0=0.01, q0=1e7)
    turb_off = TurbulenceParams(cn2=0.0, L0=1e3, l0=L0_INNER)
    plan = make_plan(src, turb_off, GeometryParams(z=5e3), n=256)
    field = initial_field(plan.launch_grid, src)
    screens = _zero_screens_for(plan)
    a = 21.0
    g0 = plan.screen_grids[0]
    screens[0] = PhaseScreen(
        grid=g0,
        values=a * g0.coords()[:, None] * np.ones((1, g0.n)),
        role="turbulence-layer",
        seed=None,
    )
    out, diag = propagate(field, plan, screens)
    expected = a * (5e3 - plan.screen_positions[0]) / src.q0
    cx, cy = centroid(out.intensity(), out.grid)
    assert cx == pytest.approx(expected, rel=0.005)
    assert abs(cy) < 1e-12
    assert diag.n_regrids >= 1
    assert abs(diag.regrid_power_change) < 1e-9
    assert diag.paraxial_fraction > 0.999
    assert diag.max_screen_phase_rms == pytest.approx(
        float(np.sqrt(np.mean(screens[0].values ** 2)))
    )


def test_propagate_power_accounting(grid_desk, src_4cm, turb_sweep):
    from beamwander import generate_turbulence_screen

    plan = make_plan(src_4cm, turb_sweep, GeometryParams(z=5e3), n=256)
    field = initial_field(plan.launch_grid, src_4cm)
    screens = [
        generate_turbulence_screen(g, turb_sweep, dz=plan.dz_layer, q0=src_4cm.q0, seed=i)
        for i, g in enumerate(plan.screen_grids)
    ]
    out, diag = propagate(field, plan, screens)
    # without absorption the split-step chain is unitary; everything
    # missing from the output is what the absorber took
    assert out.power() + diag.absorbed_fraction * field.power() == pytest.approx(
        field.power(), rel=1e-9
    )
    assert diag.window_overflow is False


def test_grid_refinement_stability(src_4cm):
    # vacuum baseline at fixed window: doubling n changes <r^2> by < 1%
    turb_off = TurbulenceParams(cn2=0.0, L0=1e3, l0=L0_INNER)
    results = []
    for n in (256, 512):
        plan = make_plan(src_4cm, turb_off, GeometryParams(z=5e3), n=n, window=1.28)
        field = initial_field(plan.launch_grid, src_4cm)
        out, _ = propagate(field, plan, _zero_screens_for(plan))
        results.append(mean_square_radius(out.intensity(), out.grid))
    assert results[1] == pytest.approx(results[0], rel=0.01)
