import math

import numpy as np
import pytest

from mvtrack3d.assignment import (
    FORBIDDEN,
    CostMatrix,
    cosine_cost,
    mahalanobis_cost,
    solve_hungarian,
)
from mvtrack3d.core import Vec3

from oracles import assignment_oracle


class TestSolveHungarian:
    def test_zero_diagonal(self):
        result = solve_hungarian(CostMatrix(np.array([[0.0, 1.0], [1.0, 0.0]])))
        assert [(r, c) for r, c, _ in result.matches] == [(0, 0), (1, 1)]
        assert result.total_cost == 0.0

    def test_two_by_two(self):
        result = solve_hungarian(CostMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])))
        assert [(r, c) for r, c, _ in result.matches] == [(0, 0), (1, 1)]
        assert result.total_cost == 2.0

    def test_matches_brute_force_on_random_5x5(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            m = rng.uniform(0, 10, size=(5, 5))
            result = solve_hungarian(CostMatrix(m))
            k, cost = assignment_oracle(m.tolist())
            assert len(result.matches) == k
            assert result.total_cost == pytest.approx(cost, abs=1e-9)

    @pytest.mark.parametrize("shape", [(2, 4), (4, 2), (3, 5), (1, 6)])
    def test_rectangular_matches_brute_force(self, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        for _ in range(25):
            m = rng.uniform(0, 5, size=shape)
            result = solve_hungarian(CostMatrix(m))
            k, cost = assignment_oracle(m.tolist())
            assert len(result.matches) == k == min(shape)
            assert result.total_cost == pytest.approx(cost, abs=1e-9)

    def test_forbidden_entries_avoided(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            m = rng.uniform(0, 5, size=(4, 4))
            m[rng.random(size=(4, 4)) < 0.4] = FORBIDDEN
            result = solve_hungarian(CostMatrix(m))
            k, cost = assignment_oracle(m.tolist())
            assert all(math.isfinite(c) for _, _, c in result.matches)
            assert len(result.matches) == k
            assert result.total_cost == pytest.approx(cost, abs=1e-9)

    def test_all_forbidden(self):
        m = np.full((3, 2), FORBIDDEN)
        result = solve_hungarian(CostMatrix(m))
        assert result.matches == ()
        assert result.unmatched_rows == (0, 1, 2)
        assert result.unmatched_cols == (0, 1)

    def test_empty_dimensions(self):
        result = solve_hungarian(CostMatrix(np.zeros((0, 3))))
        assert result.matches == ()
        assert result.unmatched_cols == (0, 1, 2)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        m = rng.uniform(0, 1, size=(6, 6))
        assert solve_hungarian(CostMatrix(m)) == solve_hungarian(CostMatrix(m))

    def test_rejects_negative_costs(self):
        with pytest.raises(ValueError):
            CostMatrix(np.array([[-1.0]]))


class TestMahalanobisCost:
    def test_identity_covariance_is_euclidean(self):
        cm = mahalanobis_cost([(Vec3(0, 0, 0), np.eye(3))], [Vec3(3, 4, 0)], gate=10.0)
        assert cm.values[0, 0] == pytest.approx(5.0, abs=1e-12)

    def test_scaled_covariance(self):
        cm = mahalanobis_cost([(Vec3(0, 0, 0), 4.0 * np.eye(3))], [Vec3(3, 4, 0)], gate=10.0)
        assert cm.values[0, 0] == pytest.approx(2.5, abs=1e-12)

    def test_gating(self):
        cm = mahalanobis_cost([(Vec3(0, 0, 0), np.eye(3))], [Vec3(3, 4, 0)], gate=3.0)
        assert cm.values[0, 0] == FORBIDDEN

    def test_identity_matches_pairwise_euclidean(self):
        rng = np.random.default_rng(13)
        tracks = [(Vec3(*rng.uniform(-1, 1, 3)), np.eye(3)) for _ in range(4)]
        dets = [Vec3(*rng.uniform(-1, 1, 3)) for _ in range(5)]
        cm = mahalanobis_cost(tracks, dets, gate=100.0)
        for i, (mean, _) in enumerate(tracks):
            for j, d in enumerate(dets):
                expected = math.dist(
                    (mean.x, mean.y, mean.z), (d.x, d.y, d.z)
                )
                assert cm.values[i, j] == pytest.approx(expected, abs=1e-9)

    def test_non_spd_covariance_rejected(self):
        bad = np.diag([1.0, -1.0, 1.0])
        with pytest.raises(ValueError, match="positive definite"):
            mahalanobis_cost([(Vec3(0, 0, 0), bad)], [Vec3(0, 0, 0)], gate=1.0)

    def test_asymmetric_covariance_rejected(self):
        bad = np.eye(3)
        bad[0, 1] = 0.5
        with pytest.raises(ValueError, match="symmetric"):
            mahalanobis_cost([(Vec3(0, 0, 0), bad)], [Vec3(0, 0, 0)], gate=1.0)


class TestCosineCost:
    def unit(self, *v):
        a = np.zeros(8)
        a[: len(v)] = v
        return a / np.linalg.norm(a)

    def test_identical_vectors(self):
        f = self.unit(1, 2, 3)
        cm = cosine_cost([f], [f], gate=2.0)
        assert cm.values[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_vectors(self):
        cm = cosine_cost([self.unit(1, 0)], [self.unit(0, 1)], gate=2.0)
        assert cm.values[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_45_degrees(self):
        cm = cosine_cost([self.unit(1, 1)], [self.unit(1, 0)], gate=2.0)
        assert cm.values[0, 0] == pytest.approx(1 - math.sqrt(2) / 2, abs=1e-9)

    def test_values_in_range(self):
        rng = np.random.default_rng(17)
        fs = [v / np.linalg.norm(v) for v in rng.normal(size=(6, 16))]
        gs = [v / np.linalg.norm(v) for v in rng.normal(size=(7, 16))]
        cm = cosine_cost(fs, gs, gate=2.0)
        assert np.all(cm.values >= 0.0)
        assert np.all(cm.values <= 2.0)

    def test_gate(self):
        cm = cosine_cost([self.unit(1, 0)], [self.unit(0, 1)], gate=0.5)
        assert cm.values[0, 0] == FORBIDDEN

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError, match="unit norm"):
            cosine_cost([np.array([1.0, 1.0])], [np.array([1.0, 0.0])], gate=1.0)

    def test_rejects_bad_gate(self):
        f = self.unit(1)
        with pytest.raises(ValueError):
            cosine_cost([f], [f], gate=0.0)


class TestGatingMonotonicity:
    def test_shrinking_gate_never_adds_pairs(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            tracks = [(Vec3(*rng.uniform(-1, 1, 3)), np.eye(3) * 0.1) for _ in range(4)]
            dets = [Vec3(*rng.uniform(-1, 1, 3)) for _ in range(4)]
            wide = mahalanobis_cost(tracks, dets, gate=5.0)
            narrow = mahalanobis_cost(tracks, dets, gate=2.0)
            wide_pairs = {(r, c) for r, c, _ in solve_hungarian(wide).matches}
            narrow_pairs = {(r, c) for r, c, _ in solve_hungarian(narrow).matches}
            forbidden_wide = {tuple(idx) for idx in np.argwhere(~np.isfinite(wide.values))}
            assert narrow_pairs.isdisjoint(forbidden_wide)
            assert wide_pairs.isdisjoint(forbidden_wide)
