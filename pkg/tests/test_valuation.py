import numpy as np
import pytest

from bayesrisk.errors import ScoringError
from bayesrisk.field import RiskImage
from bayesrisk.valuation import (TrajectoryScore, dtw_distance, frame_percentile,
                                 rank_trajectories, trajectory_score)

SHELF_SCORES = {"1": 0.4818, "2": 0.5708, "3": 0.4498, "4": 0.6245, "5": 0.5253}
KITCHEN_SCORES = {"1": 0.5888, "2": 0.2618, "3": 0.5994, "4": 0.5180, "5": 0.4841}


def _img(values):
    return RiskImage(np.asarray(values, dtype=float))


class TestFramePercentile:
    def test_constant_image(self):
        assert frame_percentile(_img([[0.3, 0.3], [0.3, 0.3]])).p75 == 0.3

    def test_nearest_rank_four_pixels(self):
        # ceil(0.75 * 4) = 3rd order statistic
        assert frame_percentile(_img([[0.4, 0.2], [0.1, 0.3]])).p75 == pytest.approx(0.3)

    def test_uniform_concentration(self):
        rng = np.random.default_rng(0)
        score = frame_percentile(_img(rng.uniform(size=(100, 100))))
        assert abs(score.p75 - 0.75) <= 0.02

    def test_skips_invalid_pixels(self):
        score = frame_percentile(_img([[np.nan, 0.6], [0.6, np.nan]]))
        assert score.p75 == 0.6 and score.valid_pixels == 2

    def test_all_invalid_rejected(self):
        with pytest.raises(ScoringError):
            frame_percentile(_img([[np.nan]]))

    def test_custom_percentile(self):
        vals = np.arange(1, 101) / 100.0
        assert frame_percentile(_img(vals.reshape(10, 10)), p=50).p75 == pytest.approx(0.5)


class TestTrajectoryScore:
    def test_single_frame(self):
        frame = _img([[0.2, 0.8]])
        assert trajectory_score([frame]).mean_risk == frame_percentile(frame).p75

    def test_mean_of_two_frames(self):
        score = trajectory_score([_img([[0.2]]), _img([[0.4]])])
        assert score.mean_risk == pytest.approx(0.3)
        assert score.frame_count == 2

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(1)
        frames = [_img(rng.uniform(size=(6, 6))) for _ in range(20)]
        score = trajectory_score(frames, traj_id="t")
        expected = np.mean([frame_percentile(f).p75 for f in frames])
        assert score.mean_risk == pytest.approx(expected, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ScoringError):
            trajectory_score([])


class TestRanking:
    def test_shelf_fixture(self):
        scores = [TrajectoryScore(t, v, 1) for t, v in SHELF_SCORES.items()]
        ordering, least, most = rank_trajectories(scores)
        assert (least, most) == ("3", "4")
        assert ordering == ["3", "1", "5", "2", "4"]

    def test_kitchen_fixture(self):
        scores = [TrajectoryScore(t, v, 1) for t, v in KITCHEN_SCORES.items()]
        _, least, most = rank_trajectories(scores)
        assert (least, most) == ("2", "3")

    def test_single_trajectory(self):
        _, least, most = rank_trajectories([TrajectoryScore("only", 0.5, 3)])
        assert least == most == "only"

    def test_ties_break_by_id(self):
        scores = [TrajectoryScore("b", 0.5, 1), TrajectoryScore("a", 0.5, 1)]
        ordering, _, _ = rank_trajectories(scores)
        assert ordering == ["a", "b"]

    def test_empty_rejected(self):
        with pytest.raises(ScoringError):
            rank_trajectories([])


def _brute_force_dtw(a, b):
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)

    def go(i, j):
        cost = float(np.linalg.norm(a[i] - b[j]))
        if i == 0 and j == 0:
            return cost
        prev = []
        if i > 0:
            prev.append(go(i - 1, j))
        if j > 0:
            prev.append(go(i, j - 1))
        if i > 0 and j > 0:
            prev.append(go(i - 1, j - 1))
        return cost + min(prev)

    return go(a.shape[0] - 1, b.shape[0] - 1)


class TestDtw:
    def test_identical_sequences(self):
        seq = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        assert dtw_distance(seq, seq) == 0.0

    def test_single_pair_euclidean(self):
        assert dtw_distance(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 5.0

    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.normal(size=(4, 2))
            b = rng.normal(size=(5, 2))
            assert dtw_distance(a, b) == pytest.approx(_brute_force_dtw(a, b), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ScoringError):
            dtw_distance(np.zeros((0, 2)), np.zeros((3, 2)))
