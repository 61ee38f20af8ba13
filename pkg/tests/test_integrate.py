import numpy as np
import pytest
from scipy.integrate import solve_ivp

from swrom import ntswe
from swrom.integrate import (IntegrationError, IntegratorConfig, Trajectory, _B, _P,
                             finite_difference, integrate, sample_derivatives)

from conftest import particle_rest, rel


def test_continuous_extension_matches_step_at_s1():
    np.testing.assert_allclose(_P.sum(axis=1), _B, atol=1e-14)


def test_exponential_decay():
    traj = integrate(lambda y: -y, np.array([1.0]), IntegratorConfig(t_end=1.0, rtol=1e-10, atol=1e-12))
    assert abs(traj.states[0, -1] - np.exp(-1)) < 1e-9
    np.testing.assert_allclose(traj.states[0], np.exp(-traj.times), rtol=1e-8)


def test_rotation_keeps_radius():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    cfg = IntegratorConfig(t_end=2 * np.pi, rtol=1e-10, atol=1e-12, sample_dt=np.pi / 50)
    traj = integrate(lambda y: A @ y, np.array([1.0, 0.0]), cfg)
    np.testing.assert_allclose(np.hypot(*traj.states), 1.0, atol=1e-8)
    np.testing.assert_allclose(traj.states[:, -1], [1.0, 0.0], atol=1e-8)


def test_sample_times_are_exact_multiples():
    cfg = IntegratorConfig(t_end=60.0, sample_dt=0.1)
    t = cfg.sample_times()
    assert t.size == 601
    np.testing.assert_array_equal(t, np.arange(601) * 0.1)
    shifted = IntegratorConfig(t_end=80.0, t_start=60.0, sample_dt=0.1).sample_times()
    assert shifted.size == 201 and shifted[0] == 600 * 0.1


def test_trajectory_hits_sample_times():
    cfg = IntegratorConfig(t_end=3.0, sample_dt=0.25)
    traj = integrate(lambda y: np.cos(y), np.array([0.3]), cfg)
    np.testing.assert_array_equal(traj.times, cfg.sample_times())
    assert traj.states.shape == (1, 13)
    assert traj.stats["steps"] > 0


def test_quadratic_polynomial_is_integrated_exactly():
    # y' = 2t via an autonomous system (t, y).
    f = lambda z: np.array([1.0, 2 * z[0]])
    traj = integrate(f, np.zeros(2), IntegratorConfig(t_end=5.0, sample_dt=0.5))
    np.testing.assert_allclose(traj.states[1], traj.times ** 2, rtol=1e-12, atol=1e-12)


def test_tolerance_monotonicity():
    f = lambda y: np.array([y[1], -np.sin(y[0])])
    y0 = np.array([2.0, 0.0])
    ref = solve_ivp(lambda t, y: f(y), (0, 10), y0, method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1]
    errs = [np.linalg.norm(integrate(f, y0, IntegratorConfig(t_end=10.0, rtol=tol, atol=tol)).states[:, -1] - ref)
            for tol in (1e-4, 1e-6, 1e-8)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_rest_state_stays_flat(grid8):
    theta = np.pi / 4
    p = ntswe.PhysicalParams(theta)
    w0 = particle_rest(grid8, theta)
    traj = integrate(lambda w: ntswe.rhs(grid8, w, p), w0, IntegratorConfig(t_end=5.0))
    assert np.max(np.abs(traj.states - w0[:, None])) < 1e-14


@pytest.fixture(scope="module")
def coarse_fom():
    g = ntswe.geostrophic_grid(12)
    theta = np.pi / 4
    p = ntswe.PhysicalParams(theta)
    f = lambda w: ntswe.rhs(g, w, p)
    w0 = ntswe.initial_geostrophic(g, theta)
    traj = integrate(f, w0, IntegratorConfig(t_end=4.0, rtol=1e-10, atol=1e-10))
    return g, f, w0, traj


def test_fom_against_independent_integrator(coarse_fom):
    g, f, w0, traj = coarse_fom
    ref = solve_ivp(lambda t, w: f(w), (0, 4.0), w0, method="DOP853", rtol=1e-12, atol=1e-12,
                    t_eval=traj.times)
    assert rel(traj.states, ref.y) < 1e-7


def test_fom_conserves_mass(coarse_fom):
    g, f, w0, traj = coarse_fom
    n = g.size
    mass = traj.states[2 * n:].sum(axis=0)
    assert np.max(np.abs(mass - mass[0])) / mass[0] < 1e-10


def test_fd_derivatives_close_to_exact(coarse_fom):
    g, f, w0, traj = coarse_fom
    exact = sample_derivatives(traj, f, "exact")
    fd = sample_derivatives(traj, mode="fd")
    assert rel(fd, exact) < 1e-2


def test_exact_derivative_mode(coarse_fom):
    g, f, w0, traj = coarse_fom
    d = sample_derivatives(traj, f)
    np.testing.assert_array_equal(d[:, 3], f(traj.states[:, 3]))


def test_finite_difference_exact_for_quadratics():
    t = np.arange(7) * 0.3
    X = np.vstack([t ** 2, 3 * t - 1])
    D = finite_difference(X, 0.3)
    np.testing.assert_allclose(D, np.vstack([2 * t, np.full_like(t, 3.0)]), atol=1e-12)


def test_derivative_mode_errors():
    traj = Trajectory(np.arange(2) * 0.1, np.zeros((1, 2)))
    with pytest.raises(ValueError):
        sample_derivatives(traj, mode="fd")
    with pytest.raises(ValueError):
        sample_derivatives(traj, mode="exact")
    with pytest.raises(ValueError):
        sample_derivatives(traj, lambda y: y, mode="spline")


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=1.0, rtol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=1.0, sample_dt=-0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(t_end=0.05, sample_dt=0.1)


def test_max_steps_exceeded():
    with pytest.raises(IntegrationError, match="max_steps"):
        integrate(lambda y: -y, np.ones(1), IntegratorConfig(t_end=10.0, max_steps=3))


def test_blow_up_is_reported():
    with pytest.raises(IntegrationError) as info:
        integrate(lambda y: y ** 2, np.ones(1), IntegratorConfig(t_end=2.0))
    assert 0.9 < info.value.t < 1.001


def test_non_finite_initial_state():
    with pytest.raises(IntegrationError):
        integrate(lambda y: y, np.array([np.nan]), IntegratorConfig(t_end=1.0))
