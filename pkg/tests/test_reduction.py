import numpy as np
import pytest

from deltaproc import (
    ControlSchedule,
    RescalingDomainError,
    Trajectory,
    augment_initial_state,
    augment_state,
    integrate,
    map_solution_back,
    rescale_time,
)


def tan_trajectory(t_end=np.pi / 4.0, step=1e-4):
    """x = tan t under u = 1 for dx/dt = x^2 + u^2."""
    schedule = ControlSchedule.constant([1.0], 0.0, t_end)
    return integrate(lambda t, x, u: x**2 + u**2, [0.0], schedule, step=step)


class TestAugmentState:
    def test_unit_integrand_measures_elapsed_time(self):
        aug = augment_state(lambda t, x, u: np.zeros_like(x), lambda x, u: 1.0)
        schedule = ControlSchedule.constant([0.0], 0.0, 2.5)
        traj = integrate(aug, augment_initial_state([1.0]), schedule, step=1e-3)
        assert traj.final_state[0] == pytest.approx(2.5, abs=1e-9)

    def test_quadratic_control_cost(self):
        aug = augment_state(lambda t, x, u: np.zeros_like(x), lambda x, u: float(u[0] ** 2))
        schedule = ControlSchedule.constant([1.0], 0.0, 2.0)
        traj = integrate(aug, augment_initial_state([0.0]), schedule, step=1e-3)
        assert traj.final_state[0] == pytest.approx(2.0, abs=1e-9)

    def test_tan_cost_integral(self):
        aug = augment_state(lambda t, x, u: x**2 + u**2, lambda x, u: float(x[0] ** 2 + 1.0))
        schedule = ControlSchedule.constant([1.0], 0.0, np.pi / 4.0)
        traj = integrate(aug, augment_initial_state([0.0]), schedule, step=1e-4)
        # integral of tan^2 + 1 = tan; tan(pi/4) = 1
        assert traj.final_state[0] == pytest.approx(1.0, abs=1e-5)


class TestRescaleTime:
    def test_identity_for_unit_integrand(self):
        traj = tan_trajectory(step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: 1.0)
        np.testing.assert_allclose(rescaled.tau, traj.t - traj.t[0], atol=1e-9)

    def test_constant_stretch(self):
        traj = tan_trajectory(t_end=0.5, step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: 3.0)
        assert rescaled.total_cost == pytest.approx(1.5, abs=1e-9)
        np.testing.assert_allclose(rescaled.tau, 3.0 * (traj.t - traj.t[0]), atol=1e-9)

    def test_tan_total_cost(self):
        traj = tan_trajectory(step=1e-4)
        rescaled = rescale_time(traj, lambda x, u: float(x[0] ** 2 + 1.0))
        assert rescaled.total_cost == pytest.approx(1.0, abs=1e-5)

    def test_monotone_tau(self):
        traj = tan_trajectory(step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: float(x[0] ** 2 + 1.0))
        assert np.all(np.diff(rescaled.tau) > 0.0)

    def test_nonpositive_integrand_rejected(self):
        traj = tan_trajectory(step=1e-2)
        with pytest.raises(RescalingDomainError):
            rescale_time(traj, lambda x, u: float(x[0]) - 0.5)


class TestMapSolutionBack:
    def test_identity_rescaling(self):
        traj = tan_trajectory(step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: 1.0)
        sched = ControlSchedule(((0.0, 0.3, [1.0]), (0.3, 0.7, [-1.0])))
        back = map_solution_back(sched, rescaled)
        for (a, b, _), (a2, b2, _) in zip(sched.segments, back.segments):
            assert a2 == pytest.approx(a, abs=1e-9)
            assert b2 == pytest.approx(b, abs=1e-9)

    def test_constant_rescaling_divides_boundaries(self):
        traj = tan_trajectory(t_end=0.5, step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: 2.0)
        sched = ControlSchedule(((0.0, 0.4, [1.0]), (0.4, 1.0, [0.0])))
        back = map_solution_back(sched, rescaled)
        assert back.segments[0][1] == pytest.approx(0.2, abs=1e-9)
        assert back.segments[1][1] == pytest.approx(0.5, abs=1e-9)

    def test_round_trip_on_tan_rescaling(self):
        traj = tan_trajectory(step=1e-4)
        f0 = lambda x, u: float(x[0] ** 2 + 1.0)
        rescaled = rescale_time(traj, f0)
        boundaries_t = (0.0, 0.3, np.pi / 4.0)
        tau_bounds = [np.interp(t, traj.t, rescaled.tau) for t in boundaries_t]
        sched_tau = ControlSchedule(
            ((tau_bounds[0], tau_bounds[1], [1.0]), (tau_bounds[1], tau_bounds[2], [-1.0]))
        )
        back = map_solution_back(sched_tau, rescaled)
        recovered = [back.segments[0][0], back.segments[0][1], back.segments[1][1]]
        np.testing.assert_allclose(recovered, boundaries_t, atol=1e-6)

    def test_out_of_range_boundary(self):
        traj = tan_trajectory(t_end=0.5, step=1e-3)
        rescaled = rescale_time(traj, lambda x, u: 1.0)
        sched = ControlSchedule.constant([1.0], 0.0, 5.0)
        with pytest.raises(RescalingDomainError):
            map_solution_back(sched, rescaled)


class TestCostConsistency:
    def test_augmented_cost_equals_rescaled_duration(self):
        f0 = lambda x, u: float(x[0] ** 2 + 1.0)
        aug = augment_state(lambda t, x, u: x**2 + u**2, f0)
        schedule = ControlSchedule.constant([1.0], 0.0, np.pi / 4.0)
        aug_traj = integrate(aug, augment_initial_state([0.0]), schedule, step=1e-4)
        plain = tan_trajectory(step=1e-4)
        rescaled = rescale_time(plain, f0)
        assert aug_traj.final_state[0] == pytest.approx(rescaled.total_cost, abs=1e-6)
