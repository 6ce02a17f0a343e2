import math

import numpy as np
import pytest

from scenario_verify.metrics import h_g, min_pairwise_distance, rho
from scenario_verify.robot_sim import (
    DomainSpec,
    SimConfig,
    SimulationFault,
    WorldState,
    barrier_residual,
    cbf_qp_filter,
    lyapunov_controller,
    rollout,
    sample_initial_conditions,
    si_to_unicycle,
    simulate_trajectory,
    step,
)
from scenario_verify.seeding import RngSeed

CFG2 = SimConfig(robot_count=2)


class TestController:
    def test_fixed_point(self):
        assert lyapunov_controller([0.3, -0.2, 1.0], [0.3, -0.2]).tolist() == [0.0, 0.0]

    def test_saturation(self):
        u = lyapunov_controller([0.0, 0.0, 0.0], [1.0, 0.0], SimConfig(k_p=1.0, v_max=0.2))
        np.testing.assert_allclose(u, [0.2, 0.0], atol=1e-15)

    def test_below_saturation_is_proportional(self):
        u = lyapunov_controller([0.0, 0.0, 0.0], [0.05, 0.1], SimConfig(k_p=1.0))
        np.testing.assert_allclose(u, [0.05, 0.1])

    def test_mirror(self):
        pose = [0.1, 0.2, 0.0]
        a = lyapunov_controller(pose, [0.4, 0.3])
        b = lyapunov_controller(pose, [0.1 - 0.3, 0.2 - 0.1])
        np.testing.assert_allclose(a, -b, atol=1e-15)

    def test_magnitude_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            u = lyapunov_controller(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 2))
            assert np.hypot(*u) <= 0.2 + 1e-15


class TestUnicycleMap:
    def test_aligned(self):
        c = si_to_unicycle([0, 0, math.pi / 3], 0.1 * np.array([math.cos(math.pi / 3), math.sin(math.pi / 3)]))
        assert c.v == pytest.approx(0.1)
        assert c.omega == pytest.approx(0.0, abs=1e-14)

    def test_perpendicular(self):
        # omega = 0.1 / 0.05 = 2.0, positive when the command points to the left
        left = si_to_unicycle([0, 0, 0], [0.0, 0.1], SimConfig(lookahead=0.05))
        right = si_to_unicycle([0, 0, 0], [0.0, -0.1], SimConfig(lookahead=0.05))
        assert left.v == pytest.approx(0.0, abs=1e-15) and left.omega == pytest.approx(2.0)
        assert right.omega == pytest.approx(-2.0)

    def test_zero(self):
        assert si_to_unicycle([0.2, 0.1, 2.0], [0.0, 0.0]) == (0.0, 0.0)

    def test_clamped(self):
        c = si_to_unicycle([0, 0, 0], [5.0, 5.0])
        assert c.v == 0.2 and c.omega == 3.6


class TestFilter:
    def test_inactive_returns_nominal(self):
        w = WorldState([[0.0, 0.0, 0.0], [1.0, 0.0, math.pi]])
        nominal = np.array([[0.05, 0.02], [-0.03, 0.01]])
        np.testing.assert_allclose(cbf_qp_filter(w, nominal, CFG2), nominal, atol=1e-6)

    def test_active_constraint_tight_and_kkt(self):
        cfg = CFG2
        # look-ahead points just outside the barrier radius, closing at full speed
        gap = cfg.barrier_radius + 0.002
        x_left = -gap / 2 - cfg.lookahead
        w = WorldState([[x_left, 0.0, 0.0], [-x_left, 0.0, math.pi]])
        nominal = np.array([[0.2, 0.0], [-0.2, 0.0]])
        u = cbf_qp_filter(w, nominal, cfg)
        res = barrier_residual(w, u, cfg)
        assert abs(res) <= 1e-8  # active constraint met with equality
        assert barrier_residual(w, nominal, cfg) > 0  # nominal violated it
        # stationarity: u - u_nom is a nonnegative multiple of the constraint normal
        dp = np.array([-gap, 0.0])
        a = np.concatenate([2 * dp, -2 * dp])
        diff = (u - nominal).reshape(-1)
        lam = diff @ a / (a @ a)
        assert lam >= 0
        np.testing.assert_allclose(diff, lam * a, atol=1e-12)

    def test_mirror_symmetric_scene(self):
        cfg = CFG2
        w = WorldState([[-0.13, 0.01, 0.0], [0.13, -0.01, math.pi]])
        nominal = np.array([[0.2, 0.03], [-0.2, -0.03]])
        u = cbf_qp_filter(w, nominal, cfg)
        np.testing.assert_allclose(u[0], -u[1], atol=1e-12)

    def test_minimality_when_far_apart(self):
        cfg = SimConfig(robot_count=4)
        rng = np.random.default_rng(5)
        for _ in range(100):
            pos = np.array([[-0.8, -0.4], [0.8, -0.4], [-0.8, 0.4], [0.8, 0.4]]) + rng.uniform(-0.1, 0.1, (4, 2))
            assert np.min(min_pairwise_distance(np.column_stack([pos, np.zeros(4)]))) > 2 * cfg.barrier_radius
            w = WorldState(np.column_stack([pos, rng.uniform(0, 2 * np.pi, 4)]))
            nominal = rng.uniform(-0.14, 0.14, (4, 2))
            np.testing.assert_allclose(cbf_qp_filter(w, nominal, cfg), nominal, atol=1e-6)

    def test_permutation_equivariance(self):
        cfg = SimConfig(robot_count=3)
        rng = np.random.default_rng(9)
        for _ in range(50):
            poses = np.column_stack([rng.uniform(-0.2, 0.2, (3, 2)), rng.uniform(0, 2 * np.pi, 3)])
            nominal = rng.uniform(-0.2, 0.2, (3, 2))
            perm = rng.permutation(3)
            a = cbf_qp_filter(WorldState(poses), nominal, cfg)
            b = cbf_qp_filter(WorldState(poses[perm]), nominal[perm], cfg)
            np.testing.assert_allclose(a[perm], b, atol=1e-6)

    def test_residual_within_tolerance(self):
        cfg = SimConfig(robot_count=3)
        rng = np.random.default_rng(10)
        for _ in range(200):
            poses = np.column_stack([rng.uniform(-0.25, 0.25, (3, 2)), rng.uniform(0, 2 * np.pi, 3)])
            u = cbf_qp_filter(WorldState(poses), rng.uniform(-0.2, 0.2, (3, 2)), cfg)
            if np.any(u != 0):
                assert barrier_residual(WorldState(poses), u, cfg) <= cfg.qp_tol


class TestStep:
    def test_at_goals_only_time_moves(self):
        w = WorldState([[0.0, 0.0, 1.0], [0.6, 0.3, 4.0]], time=1.5)
        new = step(w, [[0.0, 0.0], [0.6, 0.3]], CFG2)
        assert new.poses.tobytes() == w.poses.tobytes()
        assert new.time == pytest.approx(1.55)

    def test_single_robot_advances_at_max_speed(self):
        cfg = SimConfig(robot_count=1)
        new = step(WorldState([[0.0, 0.0, 0.0]]), [[0.5, 0.0]], cfg)
        np.testing.assert_allclose(new.poses[0], [cfg.v_max * cfg.dt, 0.0, 0.0], atol=1e-15)

    def test_deterministic(self):
        w = WorldState([[0.0, 0.0, 1.0], [0.3, 0.1, 2.0]])
        goals = [[0.5, 0.2], [-0.5, -0.1]]
        assert step(w, goals, CFG2).poses.tobytes() == step(w, goals, CFG2).poses.tobytes()

    def test_heading_wrapped(self):
        cfg = SimConfig(robot_count=1)
        w = WorldState([[0.0, 0.0, 2 * math.pi - 1e-4]])
        new = step(w, [[0.0, 0.5]], cfg)  # turns left through 2*pi
        assert 0.0 <= new.poses[0, 2] < 2 * math.pi

    def test_workspace_clamp(self):
        cfg = SimConfig(robot_count=1)
        new = step(WorldState([[1.0, 0.0, 0.0]]), [[1.0, 0.0]], cfg, noise=[[10.0, 0.0]])
        assert new.poses[0, 0] == 1.0

    def test_nonfinite_is_a_fault(self):
        cfg = SimConfig(robot_count=1)
        with pytest.raises(SimulationFault):
            step(WorldState([[0.0, 0.0, 0.0]]), [[0.5, 0.0]], cfg, noise=[[np.nan, 0.0]])

    def test_permutation_equivariance(self):
        cfg = SimConfig(robot_count=3)
        poses = np.array([[0.0, 0.0, 0.3], [0.22, 0.05, 3.0], [-0.1, 0.25, 5.0]])
        goals = np.array([[0.5, 0.0], [-0.5, 0.1], [0.0, -0.4]])
        perm = [2, 0, 1]
        a = step(WorldState(poses), goals, cfg).poses
        b = step(WorldState(poses[perm]), goals[perm], cfg).poses
        np.testing.assert_allclose(a[perm], b, atol=1e-9)


class TestTrajectory:
    def test_zero_horizon(self):
        w = WorldState([[0.1, 0.2, 0.3], [0.5, 0.5, 0.0]])
        t = simulate_trajectory(w, [[0, 0], [1, 0]], SimConfig(robot_count=2, horizon=0.0))
        assert len(t) == 1
        assert t.states[0].tobytes() == w.poses.tobytes()

    def test_length_and_times(self):
        cfg = SimConfig(robot_count=2, horizon=2.0)
        t = simulate_trajectory(WorldState([[0, 0, 0], [0.5, 0.5, 0]]), [[0.2, 0], [0.5, 0.2]], cfg)
        assert len(t) == cfg.n_steps + 1 == 41
        assert t.times[7] == 7 * cfg.dt
        assert (len(t) - 1) * t.dt >= cfg.horizon - cfg.dt / 2

    def test_single_robot_reaches_goal(self):
        cfg = SimConfig(robot_count=1)
        t = simulate_trajectory(WorldState([[0.0, 0.0, 2.0]]), [[0.5, 0.0]], cfg)
        assert np.hypot(*(t.states[-1, 0, :2] - [0.5, 0.0])) < 0.1

    def test_head_on_swap_keeps_separation(self):
        cfg = CFG2
        w = WorldState([[-0.5, 0.0, 0.0], [0.5, 0.0, math.pi]])
        t = simulate_trajectory(w, [[0.5, 0.0], [-0.5, 0.0]], cfg)
        assert np.min(min_pairwise_distance(t.states)) >= 0.15
        assert not t.fallback_steps
        assert t.max_qp_residual <= cfg.qp_tol

    def test_offset_head_on_swap_completes(self):
        w = WorldState([[-0.5, 0.02, 0.0], [0.5, -0.02, math.pi]])
        t = simulate_trajectory(w, [[0.5, 0.0], [-0.5, 0.0]], CFG2)
        assert np.min(min_pairwise_distance(t.states)) >= 0.15
        assert rho(t) >= 0

    def test_translation_invariance(self):
        cfg = SimConfig(robot_count=2, horizon=5.0)
        poses = np.array([[-0.3, 0.0, 0.2], [0.2, 0.05, 3.0]])
        goals = np.array([[0.2, 0.0], [-0.3, 0.0]])
        shift = np.array([0.1, -0.05])
        a = simulate_trajectory(WorldState(poses), goals, cfg)
        b = simulate_trajectory(WorldState(poses + [*shift, 0.0]), goals + shift, cfg)
        np.testing.assert_allclose(b.states[..., :2], a.states[..., :2] + shift, atol=1e-9)
        np.testing.assert_allclose(b.states[..., 2], a.states[..., 2], atol=1e-9)

    def test_batch_matches_single_bitwise(self):
        cfg = SimConfig(robot_count=3, horizon=6.0)
        dom = DomainSpec(robot_count=3)
        draws = [sample_initial_conditions(dom, RngSeed(77, i)) for i in range(12)]
        x0 = np.stack([w.poses for w, _ in draws])
        goals = np.stack([g for _, g in draws])
        batch = rollout(x0, goals, cfg)
        for k, (w, g) in enumerate(draws):
            single = simulate_trajectory(w, g, cfg)
            assert single.states.tobytes() == batch.states[k].tobytes()

    def test_noise_seeded(self):
        cfg = SimConfig(robot_count=2, horizon=2.0, noise_sigma=0.05)
        w = WorldState([[-0.5, 0.0, 0.0], [0.5, 0.0, math.pi]])
        goals = [[0.5, 0.0], [-0.5, 0.0]]
        a = simulate_trajectory(w, goals, cfg, RngSeed(1, 0))
        b = simulate_trajectory(w, goals, cfg, RngSeed(1, 0))
        c = simulate_trajectory(w, goals, cfg, RngSeed(1, 1))
        assert a.states.tobytes() == b.states.tobytes()
        assert a.states.tobytes() != c.states.tobytes()

    def test_noise_off_ignores_seed(self):
        w = WorldState([[-0.5, 0.0, 0.0], [0.5, 0.0, math.pi]])
        goals = [[0.5, 0.0], [-0.5, 0.0]]
        cfg = SimConfig(robot_count=2, horizon=2.0)
        a = simulate_trajectory(w, goals, cfg, RngSeed(1, 0))
        b = simulate_trajectory(w, goals, cfg, RngSeed(2, 5))
        assert a.states.tobytes() == b.states.tobytes()


class TestInitialConditions:
    @pytest.mark.parametrize("n", [3, 6])
    def test_admissible_and_in_bounds(self, n):
        dom = DomainSpec(robot_count=n)
        for i in range(10_000):
            w, goals = sample_initial_conditions(dom, RngSeed(123, i))
            assert h_g(w.poses) >= 0.3
            assert h_g(goals) >= 0.3
            for pts in (w.poses[:, :2], goals):
                assert np.all((pts[:, 0] >= -1) & (pts[:, 0] <= 1))
                assert np.all((pts[:, 1] >= -0.6) & (pts[:, 1] <= 0.6))
            assert np.all((w.poses[:, 2] >= 0) & (w.poses[:, 2] < 2 * np.pi))

    def test_same_seed_same_draw(self):
        dom = DomainSpec(robot_count=3)
        a = sample_initial_conditions(dom, RngSeed(5, 5))
        b = sample_initial_conditions(dom, RngSeed(5, 5))
        assert a[0].poses.tobytes() == b[0].poses.tobytes()
        assert a[1].tobytes() == b[1].tobytes()

    def test_too_thin(self):
        from scenario_verify import robot_sim

        dom = DomainSpec(robot_count=20)
        old = robot_sim.REJECTION_CAP
        robot_sim.REJECTION_CAP = 640
        try:
            with pytest.raises(robot_sim.AdmissibleSetTooThin, match="admissible set too thin"):
                sample_initial_conditions(dom, RngSeed(1, 0))
        finally:
            robot_sim.REJECTION_CAP = old

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(d_qp=0.15)
        with pytest.raises(ValueError):
            SimConfig(dt=0.0)
        with pytest.raises(ValueError):
            SimConfig(lookahead=0.0)
        with pytest.raises(ValueError):
            DomainSpec(robot_count=1)
