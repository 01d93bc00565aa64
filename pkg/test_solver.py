"""
Tests for the radial solver, blow-up detection and lower-bound verification
"""

import math

import numpy as np
import pytest

from certificate import Certificate
from error_recovery import BoundViolated, InvalidArgument
from problem_spec import BumpProfile, GridParams, ProblemSpec
from solver import (
    RadialGrid,
    SolveTrace,
    detect_blowup,
    key_identity_residual,
    lower_bound_rhs,
    read_trace,
    solve,
    verify_lower_bounds,
    write_trace,
)

BLOWUP_EPS = 50.0


def blowup_spec(dr=2.0 ** -8, **changes):
    return ProblemSpec(n=3, mu=2.0, p=1.5, grid=GridParams(dr=dr, cfl=0.9, t_max=20.0), **changes)


@pytest.fixture(scope="module")
def blowup_trace():
    return solve(blowup_spec(output_stride=1), BLOWUP_EPS, snapshot_times=(0.05,))


def simple_certificate():
    return Certificate(
        n=3, mu=2.0, p=1.5, R=1.0, c0=0.5, c_fg=1.0, c_phi=1.0, c_phi_r=1.0,
        c1=1e-2, c2=1e-2, c3=0.5 / 196.0, c4=1.0, log_c4=0.0, alpha=12.0, beta=14.0,
        s_p_inf=20.0, t0=9.0, gamma=2.0, lifespan_exponent=0.75,
    )


def synthetic_trace(spec, times, G, G1, Lp, step_times=None, step_max=None):
    times = np.asarray(times, dtype=float)

    def full(value):
        return np.full(times.shape, float(value))

    return SolveTrace(
        spec=spec, eps=1.0, form="original", times=times,
        G=full(G), G1=full(G1), Lp=full(Lp), Lpsi=full(0.0),
        max_abs_u=full(1.0), support_radius=times + spec.R,
        step_times=np.zeros(0) if step_times is None else step_times,
        step_max=np.zeros(0) if step_max is None else step_max,
    )


# ==================== GRID ====================


def test_grid_covers_light_cone():
    spec = blowup_spec(dr=2.0 ** -6)
    grid = RadialGrid.from_spec(spec)
    assert grid.r[0] == 0.0
    assert grid.L >= spec.grid.t_max + spec.R + 2.0 * grid.dr
    assert grid.cone_index(spec.grid.t_max, spec.R) <= grid.M - 1
    assert grid.cone_index(0.0, spec.R) == int(round(spec.R / grid.dr)) + 1

    volume = grid.weights(3).sum()
    assert volume == pytest.approx(4.0 * math.pi * grid.L ** 3 / 3.0, rel=1e-3)


# ==================== SOLVE ====================


def test_zero_data_stays_zero():
    spec = blowup_spec(dr=2.0 ** -6).scaled_data(0.0).with_grid(t_max=2.0)
    trace = solve(spec, 1.0)
    assert trace.terminated_reason == "t_max"
    assert trace.blowup is None
    assert np.all(trace.G == 0) and np.all(trace.Lp == 0)
    assert np.all(trace.support_radius == 0)

    report = verify_lower_bounds(trace, simple_certificate(), spec, 1.0)
    assert report.skipped and report.ok


def test_solve_rejects_bad_arguments():
    spec = blowup_spec(dr=2.0 ** -6)
    with pytest.raises(InvalidArgument):
        solve(spec, 0.0)
    with pytest.raises(InvalidArgument):
        solve(spec, 1.0, form="hyperbolic")


def test_blowup_detected(blowup_trace):
    assert blowup_trace.terminated_reason == "blowup"
    assert blowup_trace.blowup is not None
    assert 0 < blowup_trace.t_num < 20.0
    assert 0 <= blowup_trace.blowup.threshold_sensitivity < blowup_trace.t_num
    assert blowup_trace.max_abs_u[-1] >= 1e6


def test_support_inside_light_cone(blowup_trace):
    dr = blowup_trace.spec.grid.dr
    assert np.all(blowup_trace.support_radius <= blowup_trace.times + 1.0 + 2.0 * dr)


def test_space_integral_increases(blowup_trace):
    assert np.all(np.diff(blowup_trace.G) > 0)


def test_key_identity_converges(blowup_trace):
    coarse = solve(blowup_spec(dr=2.0 ** -7, output_stride=1), BLOWUP_EPS)
    cutoff = 0.5 * min(coarse.t_num, blowup_trace.t_num)

    fine_res = blowup_trace.key_residual[blowup_trace.times <= cutoff].max()
    coarse_res = coarse.key_residual[coarse.times <= cutoff].max()
    assert fine_res < 1e-3
    assert fine_res < 0.6 * coarse_res
    assert np.array_equal(blowup_trace.key_residual, key_identity_residual(blowup_trace, 2.0))


def test_output_stride_only_thins_the_trace(blowup_trace):
    sparse = solve(blowup_spec(output_stride=4), BLOWUP_EPS)
    assert sparse.t_num == blowup_trace.t_num
    assert len(sparse.times) < len(blowup_trace.times)

    # records before the final one fall on every fourth step
    shared = sparse.times[:-1]
    assert np.array_equal(shared, blowup_trace.times[:4 * len(shared):4])
    assert np.array_equal(sparse.G[:-1], blowup_trace.G[:4 * len(shared):4])

    cutoff = 0.5 * blowup_trace.t_num
    window = shared <= cutoff
    dense_res = blowup_trace.key_residual[:4 * len(shared):4][window]
    sparse_res = sparse.key_residual[:-1][window]
    assert np.max(np.abs(sparse_res - dense_res)) < 5e-3
    assert sparse_res.max() < 5e-3


def test_unit_data_blowup_diagnostics():
    spec = ProblemSpec(n=3, mu=2.0, p=1.5).with_grid(dr=2.0 ** -6, t_max=120.0)
    trace = solve(spec, 1.0, refine=True)
    assert trace.terminated_reason == "blowup"
    assert trace.blowup.threshold_sensitivity < 0.05 * trace.t_num
    delta = trace.blowup.dt_refinement_delta
    assert math.isfinite(delta)
    assert delta < 0.02 * trace.t_num


def test_snapshot_kept(blowup_trace):
    t_snap, profile = blowup_trace.profiles[0.05]
    assert abs(t_snap - 0.05) <= blowup_trace.spec.grid.dt
    assert profile.max() > 0


def _manufactured_error(dr):
    mu, p = 2.0, 1.5
    spec = ProblemSpec(n=3, mu=mu, p=p, grid=GridParams(dr=dr, cfl=0.5, t_max=1.0))

    def q(r):
        return np.clip(1.0 - r ** 2, 0.0, None)

    def exact(t, r):
        return math.exp(-t) * q(r) ** 6

    def forcing(t, r):
        f = q(r) ** 6
        lap = -36.0 * q(r) ** 5 + 120.0 * r ** 2 * q(r) ** 4
        u = math.exp(-t) * f
        return math.exp(-t) * (f - lap) - mu / (1.0 + t) * u - u ** p

    trace = solve(spec, 1.0, forcing=forcing,
                  initial=(lambda r: exact(0.0, r), lambda r: -exact(0.0, r)),
                  snapshot_times=(1.0,))
    t, u = trace.profiles[1.0]
    r = RadialGrid.from_spec(spec).r
    return np.max(np.abs(u - exact(t, r)))


def test_manufactured_solution_second_order():
    order = math.log2(_manufactured_error(2.0 ** -5) / _manufactured_error(2.0 ** -6))
    assert 1.4 <= order <= 2.6, f"observed order {order}"


def _liouville_gap(mu, dr):
    spec = ProblemSpec(n=3, mu=mu, p=1.5, R=2.0,
                       f_profile=BumpProfile(1.0, 6), g_profile=BumpProfile(1.0, 6),
                       grid=GridParams(dr=dr, cfl=0.5, t_max=1.0))
    _, u = solve(spec, 0.5, snapshot_times=(1.0,)).profiles[1.0]
    _, w = solve(spec, 0.5, form="liouville", snapshot_times=(1.0,)).profiles[1.0]
    return np.max(np.abs(u - w)) / np.max(np.abs(u))


def test_liouville_form_agrees():
    for mu in (2.0, 1.5):
        assert _liouville_gap(mu, 2.0 ** -9) <= 1e-4, f"mu={mu}"


def test_liouville_gap_second_order():
    order = math.log2(_liouville_gap(2.0, 2.0 ** -7) / _liouville_gap(2.0, 2.0 ** -8))
    assert 1.4 <= order <= 2.6, f"observed order {order}"


def test_origin_is_even(blowup_trace):
    _, u = blowup_trace.profiles[0.05]
    assert np.all(np.isfinite(u))
    # one-sided second-order u_r(0)
    slope = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * blowup_trace.spec.grid.dr)
    assert abs(slope) <= 1e-6


# ==================== BLOW-UP DETECTION ====================


def test_detect_blowup_on_exponential_profile():
    spec = blowup_spec(dr=2.0 ** -6)
    steps = np.linspace(0.0, 20.0, 2001)
    trace = synthetic_trace(spec, [0.0], 1.0, 1.0, 1.0, step_times=steps, step_max=np.exp(steps))
    record = detect_blowup(trace, 1e6)
    assert record.t_num == pytest.approx(math.log(1e6), rel=1e-12)
    assert record.threshold_sensitivity == pytest.approx(math.log(100.0), rel=1e-9)

    assert detect_blowup(trace, 1e12) is None
    with pytest.raises(InvalidArgument):
        detect_blowup(trace, 10.0)


# ==================== LOWER BOUNDS ====================


def test_verify_accepts_large_functionals():
    spec = blowup_spec(dr=2.0 ** -6)
    trace = synthetic_trace(spec, np.linspace(0.0, 20.0, 41), 1e100, 1e100, 1e200)
    report = verify_lower_bounds(trace, simple_certificate(), spec, 1.0)
    assert report.ok
    assert report.checks["Lp"].points > 0
    assert report.checks["holder_test_function"].points > 0
    assert report.to_dict()["ok"] is True


def test_verify_strict_raises_on_violation():
    spec = blowup_spec(dr=2.0 ** -6)
    trace = synthetic_trace(spec, np.linspace(0.0, 20.0, 41), 1e100, 1e100, 1e-300)
    report = verify_lower_bounds(trace, simple_certificate(), spec, 1.0)
    assert not report.ok
    assert not report.checks["Lp"].ok
    with pytest.raises(BoundViolated):
        verify_lower_bounds(trace, simple_certificate(), spec, 1.0, strict=True)


def test_lower_bounds_scale_with_eps():
    cert = simple_certificate()
    base = lower_bound_rhs(cert, 1e-3, 15.0)
    doubled = lower_bound_rhs(cert, 2e-3, 15.0)
    assert doubled["Lp"] - base["Lp"] == pytest.approx(1.5 * math.log(2.0))
    assert doubled["G"] - base["G"] == pytest.approx(1.5 * math.log(2.0))
    assert doubled["G1"] - base["G1"] == pytest.approx(math.log(2.0))


def test_hoelder_step_holds_on_solution(blowup_trace):
    report = verify_lower_bounds(blowup_trace, simple_certificate(), blowup_trace.spec, BLOWUP_EPS)
    check = report.checks["holder_test_function"]
    assert check.points > 0
    assert check.ok


# ==================== PERSISTENCE ====================


def test_trace_files(blowup_trace, tmp_path):
    csv_path, meta_path = write_trace(blowup_trace, tmp_path / "trace.csv")
    assert meta_path.name == "trace.meta.json"

    loaded = read_trace(csv_path)
    assert loaded.spec == blowup_trace.spec
    assert loaded.eps == BLOWUP_EPS
    assert loaded.t_num == blowup_trace.t_num
    assert loaded.terminated_reason == "blowup"
    assert np.array_equal(loaded.G, blowup_trace.G)
    assert np.array_equal(loaded.times, blowup_trace.times)
    assert np.all(np.isnan(loaded.Lpsi))
