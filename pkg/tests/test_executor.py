import math

import numpy as np
import pytest

from navpref.executor import (
    EpisodeConfig,
    PathManager,
    PathMsg,
    PlannerGains,
    StalePathError,
    VelocityCmd,
    model_runner_tick,
    planner_tick,
    run_episode,
)
from navpref.geometry import EGO_START, Pose2, Trajectory, from_frame
from navpref.metrics import LaserScan
from navpref.sim import DynamicAgent, RobotLimits, SensorFrame, World

EMPTY = World(bounds=(-20, -20, 20, 20))


def ego_straight(n=8, step=0.25):
    return Trajectory(tuple(Pose2(step * k, 0.0, 0.0) for k in range(1, n + 1)), EGO_START)


def dummy_frame(stamp=0.0):
    return SensorFrame("obs", LaserScan(0.0, 0.1, (5.0,) * 4, 10.0), (5.0, 0.0), stamp)


def goal_seeking_policy(frame):
    """Scripted stand-in for a network: head straight at the ego goal.

    Aims a little past the goal so the final target is never swallowed by the
    path manager's prune radius before the success tolerance triggers.
    """
    gx, gy = frame.goal
    d = math.hypot(gx, gy)
    if d < 1e-9:
        return Trajectory(tuple(Pose2(0, 0, 0) for _ in range(8)), EGO_START)
    reach = min(d + 0.5, 2.0)
    th = math.atan2(gy, gx)
    return Trajectory(
        tuple(Pose2(reach * k / 8 * math.cos(th), reach * k / 8 * math.sin(th), th)
              for k in range(1, 9)),
        EGO_START,
    )


class TestModelRunner:
    def test_publishes_msg(self):
        msg = model_runner_tick(lambda f: ego_straight(), dummy_frame(1.5), Pose2(1, 2, 0.3), 7)
        assert msg.seq == 7
        assert msg.stamp == 1.5
        assert msg.start_pose == Pose2(1, 2, 0.3)

    def test_failure_publishes_nothing(self):
        def broken(frame):
            raise RuntimeError("inference failed")

        assert model_runner_tick(broken, dummy_frame(), Pose2(0, 0, 0), 0) is None

    def test_none_result_publishes_nothing(self):
        assert model_runner_tick(lambda f: None, dummy_frame(), Pose2(0, 0, 0), 0) is None


class TestPathManager:
    def test_stale_seq_rejected(self):
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.0, 1))
        with pytest.raises(StalePathError):
            mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.1, 1))
        with pytest.raises(StalePathError):
            mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.1, 0))

    def test_newer_seq_replaces(self):
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.0, 1))
        mgr.accept_new_path(PathMsg(ego_straight(step=0.5), Pose2(0, 0, 0), 0.5, 2))
        tgt = mgr.update(Pose2(0, 0, 0), 0.25)
        assert tgt.x == pytest.approx(0.5)

    def test_odom_reexpression_oracle(self):
        # waypoints planned in the ego frame of a rotated, translated pose
        start = Pose2(2.0, -1.0, math.pi / 2)
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), start, 0.0, 1))
        tgt = mgr.update(start, 0.1)
        expect = from_frame(Pose2(0.25, 0.0, 0.0), start)
        assert tgt.x == pytest.approx(expect.x, abs=1e-12)
        assert tgt.y == pytest.approx(expect.y, abs=1e-12)

    def test_prunes_within_radius(self):
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.0, 1))
        tgt = mgr.update(Pose2(0.3, 0.0, 0.0), 0.25)
        # 0.25 and 0.5 are within 0.25 m of the robot; 0.75 is next
        assert tgt.x == pytest.approx(0.75)

    def test_prunes_behind(self):
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.0, 1))
        # robot past the whole path and facing forward: all behind
        assert mgr.update(Pose2(3.0, 0.0, 0.0), 0.05) is None
        assert mgr.exhausted

    def test_behind_depends_on_heading(self):
        mgr = PathManager()
        mgr.accept_new_path(PathMsg(ego_straight(), Pose2(0, 0, 0), 0.0, 1))
        # same position, facing backwards: waypoints are ahead in local frame
        tgt = mgr.update(Pose2(3.0, 0.0, math.pi), 0.05)
        assert tgt is not None

    def test_empty_manager(self):
        mgr = PathManager()
        assert mgr.update(Pose2(0, 0, 0), 0.25) is None
        assert mgr.exhausted

    def test_bad_radius(self):
        mgr = PathManager()
        with pytest.raises(ValueError):
            mgr.update(Pose2(0, 0, 0), 0.0)


class TestPlanner:
    def test_at_target_stops(self):
        cmd = planner_tick(Pose2(0.01, 0.0, 0.0), Pose2(0, 0, 0))
        assert cmd == VelocityCmd(0.0, 0.0)

    def test_straight_ahead(self):
        cmd = planner_tick(Pose2(1.0, 0.0, 0.0), Pose2(0, 0, 0))
        assert cmd.omega == 0.0
        assert cmd.v == pytest.approx(1.0)  # k_v * 1.0 clipped to v_max

    def test_turns_toward_target(self):
        left = planner_tick(Pose2(0.0, 1.0, 0.0), Pose2(0, 0, 0))
        right = planner_tick(Pose2(0.0, -1.0, 0.0), Pose2(0, 0, 0))
        assert left.omega > 0 > right.omega

    def test_never_reverses(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            tgt = Pose2(*rng.uniform(-3, 3, 2), 0.0)
            odom = Pose2(*rng.uniform(-3, 3, 2), rng.uniform(-math.pi, math.pi))
            cmd = planner_tick(tgt, odom)
            assert cmd.v >= 0.0

    def test_omega_clamped(self):
        limits = RobotLimits(1.0, 1.5)
        cmd = planner_tick(Pose2(-1.0, 0.1, 0.0), Pose2(0, 0, 0), limits=limits)
        assert abs(cmd.omega) <= 1.5

    def test_misalignment_scales_speed(self):
        ahead = planner_tick(Pose2(1.0, 0.0, 0.0), Pose2(0, 0, 0))
        side = planner_tick(Pose2(0.0, 1.0, 0.0), Pose2(0, 0, 0))
        assert side.v < ahead.v
        behind = planner_tick(Pose2(-1.0, 0.0, 0.0), Pose2(0, 0, 0))
        assert behind.v == 0.0


class TestRunEpisode:
    def test_reaches_goal_open_world(self):
        log = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (4.0, 0.0))
        assert log.success
        assert log.collisions == 0
        assert log.completion == 1.0

    def test_reaches_off_axis_goal(self):
        log = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (3.0, 2.0))
        assert log.success

    def test_broken_policy_stays_put(self):
        def broken(frame):
            raise RuntimeError("no model")

        log = run_episode(EMPTY, broken, Pose2(0, 0, 0), (4.0, 0.0))
        assert not log.success
        assert log.executed_arclen == 0.0
        assert all(r.cmd == VelocityCmd(0.0, 0.0) for r in log.rows)

    def test_static_collision_terminates(self):
        wall = World(static_segments=(((2.0, -5.0), (2.0, 5.0)),), bounds=(-20, -20, 20, 20))

        def blind(frame):
            return ego_straight(step=0.4)

        log = run_episode(wall, blind, Pose2(0, 0, 0), (6.0, 0.0))
        assert log.collided_terminated
        assert not log.success
        assert log.completion <= 0.999
        assert len(log.rows) < EpisodeConfig().max_ticks

    def test_dynamic_collision_counts_and_continues(self):
        # an agent parked on the route
        world = World(agents=(DynamicAgent(((2.0, 0.0), (2.0, 0.0)), 0.0, 0.3),),
                      bounds=(-20, -20, 20, 20))
        log = run_episode(world, goal_seeking_policy, Pose2(0, 0, 0), (4.0, 0.0))
        assert log.collisions == 1
        assert not log.collided_terminated
        assert log.success  # run continues after the bump

    def test_latency_keeps_old_path_active(self):
        # with inference slower than the period, commands must come from the
        # last delivered path rather than blocking
        cfg = EpisodeConfig(runner_latency=1.0)
        log = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (4.0, 0.0), cfg)
        assert log.success
        moving = sum(1 for r in log.rows if r.cmd.v > 0)
        assert moving > 0

    def test_latency_slows_but_preserves_goal(self):
        base = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (4.0, 0.0))
        slow = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (4.0, 0.0),
                           EpisodeConfig(runner_latency=1.0))
        assert slow.success
        assert len(slow.rows) >= len(base.rows)

    def test_seq_increases_monotonically(self):
        seqs = []

        def spy(frame):
            seqs.append(frame.stamp)
            return goal_seeking_policy(frame)

        run_episode(EMPTY, spy, Pose2(0, 0, 0), (4.0, 0.0))
        assert seqs == sorted(seqs)
        assert len(seqs) >= 2

    def test_bit_reproducible(self):
        world = World(agents=(DynamicAgent(((3.0, -1.0), (3.0, 1.0)), 0.5, 0.3),),
                      bounds=(-20, -20, 20, 20))
        a = run_episode(world, goal_seeking_policy, Pose2(0, 0, 0), (5.0, 0.0))
        b = run_episode(world, goal_seeking_policy, Pose2(0, 0, 0), (5.0, 0.0))
        assert len(a.rows) == len(b.rows)
        for ra, rb in zip(a.rows, b.rows):
            assert ra.pose == rb.pose
            assert ra.cmd == rb.cmd

    def test_timeout_truncates(self):
        cfg = EpisodeConfig(max_ticks=10)
        log = run_episode(EMPTY, goal_seeking_policy, Pose2(0, 0, 0), (8.0, 0.0), cfg)
        assert not log.success
        assert len(log.rows) == 10
        assert 0.0 <= log.completion < 1.0
