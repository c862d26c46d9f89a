import math

import numpy as np
import pytest

from navpref.geometry import Pose2, Trajectory
from navpref.metrics import (
    LaserScan,
    MetricsConfig,
    ObstacleCloud,
    deviation,
    evaluate_batch,
    histogram,
    is_near_collision,
    min_clearance,
    path_completion,
    scan_to_points,
)

from .test_geometry import random_traj


def straight_x(x0=0.0, x1=2.0, n=8):
    return Trajectory(tuple(Pose2(x0 + (x1 - x0) * k / (n - 1), 0.0, 0.0) for k in range(n)))


class TestScanToPoints:
    def test_all_no_return(self):
        scan = LaserScan(0.0, 0.1, (10.0,) * 5, 10.0)
        assert len(scan_to_points(scan)) == 0

    def test_single_beam(self):
        scan = LaserScan(0.0, 0.0, (2.0,), 10.0)
        assert np.allclose(scan_to_points(scan).points, [[2.0, 0.0]])

    def test_vertical_beam(self):
        scan = LaserScan(math.pi / 2, 0.1, (1.5,), 10.0)
        pts = scan_to_points(scan).points
        assert abs(pts[0][0]) < 1e-12
        assert pts[0][1] == pytest.approx(1.5)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            LaserScan(0.0, 0.1, (0.0,), 10.0)
        with pytest.raises(ValueError):
            LaserScan(0.0, 0.1, (11.0,), 10.0)


class TestMinClearance:
    def test_perpendicular_obstacle(self):
        cloud = ObstacleCloud(np.array([[1.0, 1.0]]))
        assert min_clearance(straight_x(), cloud) == pytest.approx(1.0, abs=1e-9)

    def test_empty_cloud_sentinel(self):
        assert min_clearance(straight_x(), ObstacleCloud(np.zeros((0, 2)))) == 10.0

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            traj = random_traj(rng)
            cloud = ObstacleCloud(rng.uniform(-2, 2, size=(50, 2)))
            got = min_clearance(traj, cloud, interp_step=0.05)
            # brute-force oracle at a much finer step
            from navpref.metrics import densify_polyline

            dense = densify_polyline(traj.positions(), 0.001)
            d = np.sqrt(((dense[:, None] - cloud.points[None]) ** 2).sum(axis=2)).min()
            assert abs(got - d) < 0.01

    def test_monotone_in_points(self):
        rng = np.random.default_rng(1)
        traj = random_traj(rng)
        pts = rng.uniform(-2, 2, size=(30, 2))
        prev = math.inf
        for k in range(1, 31):
            c = min_clearance(traj, ObstacleCloud(pts[:k]))
            assert c <= prev + 1e-12
            prev = c

    def test_rigid_transform_invariance(self):
        rng = np.random.default_rng(2)
        traj = random_traj(rng)
        pts = rng.uniform(-2, 2, size=(20, 2))
        base = min_clearance(traj, ObstacleCloud(pts))
        ang, tx, ty = 0.7, 1.3, -0.4
        c, s = math.cos(ang), math.sin(ang)
        R = np.array([[c, -s], [s, c]])
        moved_traj = Trajectory.from_array(
            np.column_stack([traj.positions() @ R.T + (tx, ty),
                             [p.theta + ang for p in traj.waypoints]])
        )
        moved_pts = pts @ R.T + (tx, ty)
        assert abs(min_clearance(moved_traj, ObstacleCloud(moved_pts)) - base) < 1e-9


class TestNearCollision:
    def test_clear(self):
        cloud = ObstacleCloud(np.array([[1.0, 1.0]]))
        assert not is_near_collision(straight_x(), cloud, robot_width=0.5)

    def test_near(self):
        cloud = ObstacleCloud(np.array([[1.0, 0.3]]))
        assert is_near_collision(straight_x(), cloud, robot_width=0.5)

    def test_boundary_strict(self):
        cloud = ObstacleCloud(np.array([[1.0, 0.5]]))
        assert not is_near_collision(straight_x(), cloud, robot_width=0.5)

    def test_monotone_in_width(self):
        rng = np.random.default_rng(3)
        traj = random_traj(rng)
        cloud = ObstacleCloud(rng.uniform(-2, 2, size=(10, 2)))
        widths = np.linspace(0.05, 3.0, 30)
        flags = [is_near_collision(traj, cloud, w) for w in widths]
        # once true, stays true
        assert flags == sorted(flags)


class TestDeviation:
    def test_identical(self):
        t = straight_x()
        assert deviation(t, t) == 0.0

    def test_constant_offset(self):
        t = straight_x()
        shifted = Trajectory.from_array(t.as_array() + [0.3, 0.0, 0.0])
        assert deviation(t, shifted) == pytest.approx(0.3, abs=1e-12)

    def test_hand_computed(self):
        rng = np.random.default_rng(4)
        a, b = random_traj(rng), random_traj(rng)
        expect = np.mean([
            math.hypot(p.x - q.x, p.y - q.y) for p, q in zip(a.waypoints, b.waypoints)
        ])
        assert deviation(a, b) == pytest.approx(expect, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            deviation(straight_x(n=8), straight_x(n=7))

    def test_metric_properties(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b, c = (random_traj(rng) for _ in range(3))
            assert deviation(a, b) == pytest.approx(deviation(b, a))
            assert deviation(a, c) <= deviation(a, b) + deviation(b, c) + 1e-12


class TestPathCompletion:
    def test_reached(self):
        assert path_completion(1.0, 4.0, True, False) == 1.0

    def test_halfway(self):
        assert path_completion(2.0, 4.0, False, False) == 0.5

    def test_collided_strictly_below_one(self):
        assert path_completion(4.0, 4.0, False, True) == 0.999

    def test_zero_plan(self):
        assert path_completion(0.0, 0.0, True, False) == 1.0
        assert path_completion(0.0, 0.0, False, False) == 0.0


class TestEvaluateBatch:
    def test_single_sample(self):
        t = straight_x()
        cloud = ObstacleCloud(np.array([[1.0, 1.0]]))
        rep = evaluate_batch([(t, t, cloud)])
        assert rep.near_collision_count == 0
        assert rep.mean_deviation == 0.0
        assert rep.mean_min_clearance == pytest.approx(1.0, abs=1e-9)

    def test_two_samples(self):
        t = straight_x()
        c1 = ObstacleCloud(np.array([[1.0, 0.3]]))
        c2 = ObstacleCloud(np.array([[1.0, 0.7]]))
        rep = evaluate_batch([(t, t, c1), (t, t, c2)])
        assert rep.near_collision_count == 1
        assert rep.mean_min_clearance == pytest.approx(0.5, abs=1e-9)

    def test_second_pass_recompute(self):
        rng = np.random.default_rng(6)
        samples = []
        for _ in range(100):
            samples.append((random_traj(rng), random_traj(rng),
                            ObstacleCloud(rng.uniform(-2, 2, size=(10, 2)))))
        rep = evaluate_batch(samples)
        devs = [deviation(p, q) for p, q, _ in samples]
        clears = [min_clearance(p, c) for p, _, c in samples]
        assert rep.mean_deviation == pytest.approx(np.mean(devs), abs=1e-12)
        assert rep.mean_min_clearance == pytest.approx(np.mean(clears), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate_batch([])


def test_histogram_bins():
    h = histogram(np.linspace(0, 1, 200))
    assert len(h["counts"]) == 50
    assert sum(h["counts"]) == 200
