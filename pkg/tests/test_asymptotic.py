import numpy as np
import pytest

from contact_kam import (ContactModel, LaxParams, Orbit, PeriodicGrid,
                         ScalarField, busemann_solution, characteristic_orbit,
                         classify_minimizer, heteroclinic_connect,
                         integrate_orbit, minimality_test, obstruction_check,
                         pseudograph_attainment, semi_infinite_orbit,
                         weak_kam_limit)
from contact_kam.asymptotic import PreconditionError

Z_BAR = np.array([np.pi / 2, 0.25, 0.0])
Z_LOW = np.array([-np.pi / 2, -0.25, 0.0])


@pytest.fixture(scope="module")
def mono_setup():
    model = ContactModel.constant_rate(1.0)
    grid = PeriodicGrid(256)
    params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=8.0)
    return model, grid, params


@pytest.fixture(scope="module")
def ex63_fields():
    model = ContactModel.example_63()
    grid = PeriodicGrid(512)
    params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=8.0)
    phi = ScalarField(grid, 0.2 * np.sin(grid.nodes))
    um = weak_kam_limit(model, phi, params, "backward", tol=1e-6, t_max=60.0)
    vp = weak_kam_limit(model, phi, params, "forward", tol=1e-6, t_max=60.0)
    assert um.converged and vp.converged
    return model, grid, params, phi, um.field, vp.field


def test_characteristic_monotone_case(mono_setup):
    model, grid, params = mono_setup
    phi = ScalarField(grid, 0.25 + 0.1 * np.sin(grid.nodes))
    char = characteristic_orbit(model, phi, x_target=1.0, t=2.0, params=params)
    assert char.max_witness_defect <= 5.0 * grid.dx
    # the recovered source jet lies on the initial field
    x0 = char.source_jet[0]
    assert char.source_jet[1] == pytest.approx(float(phi(x0)), abs=1e-12)


def test_characteristic_zero_momentum_classical(classical):
    grid = PeriodicGrid(256)
    params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=8.0)
    phi = ScalarField.constant(grid, 0.0)
    char = characteristic_orbit(classical, phi, x_target=0.7, t=1.0, params=params)
    assert np.max(np.abs(char.orbit.states[:, 2])) < 1e-12
    assert np.max(np.abs(char.dp_curve.xs - char.dp_curve.xs[0])) < 1e-12


def test_characteristic_defect_shrinks_with_resolution(mono_setup):
    model, _, _ = mono_setup
    defects = []
    for n in [128, 256, 512]:
        grid = PeriodicGrid(n)
        params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=8.0)
        phi = ScalarField(grid, 0.25 + 0.1 * np.sin(grid.nodes))
        char = characteristic_orbit(model, phi, x_target=1.0, t=1.5, params=params)
        defects.append(char.max_witness_defect)
    assert defects[2] < defects[0]


def test_characteristic_requires_smooth_field(mono_setup):
    model, grid, params = mono_setup
    kinked = ScalarField(grid, np.abs(grid.nodes) * 2.0)
    with pytest.raises(PreconditionError):
        characteristic_orbit(model, kinked, 1.0, 1.0, params)


def test_semi_infinite_monotone(mono_setup):
    model, grid, params = mono_setup
    phi = ScalarField.from_function(grid, np.sin)
    res = semi_infinite_orbit(model, phi, params, horizons=[4.0, 6.0, 8.0])
    tail = res.orbit.tail(0.2)
    assert abs(tail[-1][1] - 0.25) <= 1e-2
    assert abs(tail[-1][2]) <= 1e-2
    assert res.tail_distance <= 1e-2


def test_semi_infinite_ex63(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    start = ScalarField.constant(grid, 1.0)
    res = semi_infinite_orbit(model, start, params, horizons=[6.0, 8.0, 10.0],
                              u_minus=um)
    # tail approaches the upper rest point
    from contact_kam import phase_distance

    assert phase_distance(res.omega_estimate, Z_BAR) <= 1e-2
    # tail u-defect shrinks along the window
    half = len(res.tail_u_defects) // 2
    assert res.tail_u_defects[half:].mean() <= res.tail_u_defects[:half].mean()


def test_attainment_monotone(mono_setup):
    model, _, _ = mono_setup
    grid = PeriodicGrid(512)
    params = LaxParams(grid=grid, tau=1.0 / 16.0, v_max=8.0)
    phi = ScalarField.from_function(grid, np.sin)
    um = weak_kam_limit(model, phi, params, "backward", tol=1e-6, t_max=40.0)
    d10 = pseudograph_attainment(model, phi, um.field, params, T=10.0,
                                 sample_count=512, h=2e-3)
    assert d10 <= 2e-2
    d5 = pseudograph_attainment(model, phi, um.field, params, T=5.0,
                                sample_count=512, h=2e-3)
    assert d10 <= d5 + 5.0 * grid.dx
    # sampling refinement stays within the discretization floor
    d10_half = pseudograph_attainment(model, phi, um.field, params, T=10.0,
                                      sample_count=256, h=2e-3)
    assert abs(d10_half - d10) <= 5.0 * grid.dx


@pytest.fixture(scope="module")
def ex63_heteroclinic(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    return heteroclinic_connect(model, phi, params, t_span=12.0)


def test_heteroclinic_ex63(ex63_fields, ex63_heteroclinic):
    model, grid, params, phi, um, vp = ex63_fields
    result = ex63_heteroclinic
    assert result.alpha_distance <= 1e-2
    assert result.omega_distance <= 1e-2
    assert result.max_abs_h >= 1e-3
    assert result.alpha_abs_h <= 1e-3
    assert result.omega_abs_h <= 1e-3
    # orbit leaves both rest points in the expected order (u climbs)
    assert result.crossing_state[1] > vp(result.crossing_state[0])
    assert result.crossing_state[1] < um(result.crossing_state[0])
    # one-sided ordering bounds: above v_+ after the crossing, below u_-
    # before it
    assert result.diagnostics["post_crossing_min_u_minus_vplus"] >= -5 * grid.dx
    assert result.diagnostics["pre_crossing_max_u_minus_uminus"] <= 5 * grid.dx


def test_heteroclinic_precondition(mono_setup):
    model, grid, params = mono_setup
    phi = ScalarField.from_function(grid, np.sin)
    # monotone model: forward limit sits above the backward one at some nodes,
    # so the ordering precondition must fail
    with pytest.raises(PreconditionError):
        heteroclinic_connect(model, phi, params)


def test_obstruction_consistent_and_violation(ex63_fields, ex63_heteroclinic):
    model, grid, params, phi, um, vp = ex63_fields
    result = ex63_heteroclinic
    report = obstruction_check(model, result.orbit, um, vp, tol=1e-2)
    assert report.verdict == "Consistent"
    assert report.ordering_applicable and report.ordering_ok
    # feeding the time-reversed data constructs a violation of the check itself
    reversed_orbit = Orbit(ts=result.orbit.ts,
                           states=result.orbit.states[::-1].copy(),
                           h=result.orbit.h, model=model)
    report2 = obstruction_check(model, reversed_orbit, um, vp, tol=1e-2)
    assert report2.verdict == "Violation"


def test_classify_cases(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    r = classify_minimizer(model, um, vp, np.pi / 2, 0.25, params=params)
    assert r.case == 2
    r = classify_minimizer(model, um, vp, -np.pi / 2, -0.25, params=params)
    assert r.case == 4
    r = classify_minimizer(model, um, vp, 0.0, 0.0, params=params)
    assert r.case == 3
    u_plus_at_0 = vp(0.0)
    r = classify_minimizer(model, um, vp, 0.0, u_plus_at_0 - 0.5, params=params)
    assert r.case == 5
    assert r.evidence["forward_diverged_minus"]
    r = classify_minimizer(model, um, vp, 0.0, um(0.0) + 0.5, params=params)
    assert r.case == 1
    assert r.evidence["backward_diverged_plus"]


def test_classify_case2_closed_under_flow(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    orbit = integrate_orbit(model, Z_BAR, (0.0, 2.0), h=1e-3)
    for k in [0, len(orbit.ts) // 2, -1]:
        z = orbit.states[k]
        r = classify_minimizer(model, um, vp, z[0], z[1])
        assert r.case == 2


def test_busemann_from_upper_rest_point(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    orbit = integrate_orbit(model, Z_BAR, (0.0, 1.0), h=1e-3)
    res = busemann_solution(model, orbit, params,
                            s_grid=np.arange(0.5, 20.0, 0.5),
                            t_sequence=[0.0, 0.25, 0.5], tol=1e-3)
    assert res.stabilized
    assert res.monotone_defect <= 1e-6
    assert np.max(np.abs(res.field.values - um.values)) <= 1e-2
    assert res.residual <= 1e-3


def test_busemann_monotone_model(mono_setup):
    model, grid, params = mono_setup
    fp = np.array([0.0, 0.25, 0.0])
    # constant orbit at any point of the stationary-solution graph
    states = np.tile(fp, (11, 1))
    orbit = Orbit(ts=np.linspace(0, 1, 11), states=states, h=0.1, model=model)
    res = busemann_solution(model, orbit, params,
                            s_grid=np.arange(0.5, 15.0, 0.5),
                            t_sequence=[0.0, 0.5], tol=1e-3)
    assert np.max(np.abs(res.field.values - 0.25)) <= 1e-3


def test_minimality_fixed_point_orbit(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    orbit = integrate_orbit(model, Z_BAR, (0.0, 6.0), h=1e-3)
    rep_g = minimality_test(model, orbit, params, "global", pair_count=8)
    assert rep_g.max_defect <= 5.0 * grid.dx
    rep_s = minimality_test(model, orbit, params, "semi_static", pair_count=8)
    assert rep_s.max_defect <= 5.0 * grid.dx


def test_minimality_generic_orbit_fails(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    orbit = integrate_orbit(model, (0.3, 0.8, 0.6), (0.0, 4.0), h=1e-3)
    rep = minimality_test(model, orbit, params, "global", pair_count=10)
    assert rep.max_defect > 5.0 * grid.dx


def test_heteroclinic_semistatic_fails(ex63_fields, ex63_heteroclinic):
    model, grid, params, phi, um, vp = ex63_fields
    result = ex63_heteroclinic
    rep_s = minimality_test(model, result.orbit, params, "semi_static",
                            pair_count=10)
    assert rep_s.max_defect > 10.0 * 5.0 * grid.dx


def test_classify_boundary_ambiguity(ex63_fields):
    model, grid, params, phi, um, vp = ex63_fields
    # with an equality band wider than half the gap, a midpoint seed sits in
    # both bands and is flagged as a boundary case
    gap = float(np.min(um.values - vp.values))
    mid = 0.5 * (um(0.0) + vp(0.0))
    r = classify_minimizer(model, um, vp, 0.0, mid, class_tol=0.6 * gap)
    assert r.boundary
    assert r.case in (2, 4)
