import numpy as np
import pytest

from bayesrisk import bezier
from bayesrisk.bezier import (BezierCurve, EmpiricalCdf, bernstein_matrix, evaluate,
                              evaluate_at_distance, fit_to_cdf, inverse,
                              isotonic_projection, load_curve, save_curve)
from bayesrisk.errors import ContractViolation, DomainError, FormatError


def bernstein_reference(curve: BezierCurve, t):
    """Independent evaluator: explicit Bernstein-basis sum (no de Casteljau)."""
    return bernstein_matrix(np.atleast_1d(np.asarray(t, float))) @ curve.control_points


def random_monotone_cp(rng):
    cp = np.sort(rng.uniform(0.0, 1.0, bezier.NUM_CONTROL_POINTS))
    return cp


class TestEvaluate:
    def test_constant_curve(self):
        curve = BezierCurve(np.full(10, 0.42))
        for t in (0.0, 0.3, 1.0):
            assert evaluate(curve, t) == pytest.approx(0.42, abs=1e-15)

    def test_linear_control_points_identity(self):
        curve = BezierCurve(np.linspace(0.0, 1.0, 10))
        t = np.linspace(0.0, 1.0, 101)
        np.testing.assert_allclose(evaluate(curve, t), t, atol=1e-12)

    def test_matches_bernstein_sum_reference(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            curve = BezierCurve(random_monotone_cp(rng))
            assert evaluate(curve, 0.5) == pytest.approx(
                float(bernstein_reference(curve, 0.5)[0]), abs=1e-12)

    def test_fitted_curve_matches_reference_at_half(self):
        # fit a known analytic CDF, then cross-check the evaluator at t = 0.5
        edges = np.linspace(0.0, 2.0, 101)
        values = np.clip(edges[1:] / 2.0, 0.0, 1.0) ** 2
        curve, _ = fit_to_cdf(EmpiricalCdf(edges, values))
        assert evaluate(curve, 0.5) == pytest.approx(
            float(bernstein_reference(curve, 0.5)[0]), abs=1e-12)

    def test_domain_check(self):
        curve = BezierCurve(np.linspace(0, 1, 10))
        with pytest.raises(DomainError):
            evaluate(curve, 1.5)


class TestEvaluateAtDistance:
    def test_endpoints_and_midpoint(self):
        rng = np.random.default_rng(3)
        curve = BezierCurve(random_monotone_cp(rng), d_max=2.0)
        assert evaluate_at_distance(curve, 0.0) == pytest.approx(curve.control_points[0])
        assert evaluate_at_distance(curve, 2.0) == pytest.approx(curve.control_points[-1])
        assert evaluate_at_distance(curve, 5.0) == pytest.approx(curve.control_points[-1])
        assert evaluate_at_distance(curve, 1.0) == pytest.approx(evaluate(curve, 0.5))

    def test_negative_distance_rejected(self):
        curve = BezierCurve(np.linspace(0, 1, 10))
        with pytest.raises(DomainError):
            evaluate_at_distance(curve, -0.1)


class TestCurveContracts:
    def test_wrong_count(self):
        with pytest.raises(ContractViolation):
            BezierCurve(np.zeros(9))

    def test_decreasing_rejected(self):
        cp = np.linspace(0, 1, 10)
        cp[4] = 0.0
        with pytest.raises(ContractViolation):
            BezierCurve(cp)

    def test_out_of_unit_rejected(self):
        with pytest.raises(ContractViolation):
            BezierCurve(np.linspace(0, 1.5, 10))


class TestIsotonicProjection:
    def test_already_sorted_unchanged(self):
        x = np.array([0.0, 0.2, 0.5, 0.9])
        np.testing.assert_allclose(isotonic_projection(x), x)

    def test_pools_violators(self):
        np.testing.assert_allclose(isotonic_projection(np.array([1.0, 0.0])), [0.5, 0.5])

    def test_matches_quadratic_program(self):
        # brute-force check on small inputs: projection minimizes ||y - x||^2
        rng = np.random.default_rng(11)
        for _ in range(50):
            x = rng.normal(size=6)
            y = isotonic_projection(x)
            assert np.all(np.diff(y) >= -1e-12)
            base = float(((y - x) ** 2).sum())
            for _ in range(200):
                z = np.sort(x + rng.normal(scale=0.1, size=6))
                assert base <= float(((z - x) ** 2).sum()) + 1e-9


def _oracle_fit_rmse(values: np.ndarray, iters: int = 4000) -> float:
    """Independent dense fit: projected gradient on the control points."""
    t = np.linspace(0.0, 2.0, 101)[1:] / 2.0
    B = bernstein_matrix(t)
    cp = np.linspace(0.0, 1.0, 10)
    lr = 0.5 / np.linalg.norm(B.T @ B, 2)
    for _ in range(iters):
        cp = cp - lr * (B.T @ (B @ cp - values))
        cp = np.clip(isotonic_projection(cp), 0.0, 1.0)
    return float(np.sqrt(np.mean((B @ cp - values) ** 2)))


class TestFitToCdf:
    def test_step_cdf_near_origin(self):
        # all mass in the second bin: CDF jumps to 1 almost immediately.  A
        # monotone degree-9 curve cannot chase the jump all the way down to
        # zero (the L2 optimum keeps cp[0] high to serve the other 99
        # samples), so the contract is: at least as good as a dense
        # numerical fit oracle, minimum at the origin, steep rise, exact 1
        # at the far end.
        edges = np.linspace(0.0, 2.0, 101)
        values = np.ones(100)
        values[0] = 0.0
        curve, rmse = fit_to_cdf(EmpiricalCdf(edges, values))
        cp = curve.control_points
        assert cp[0] == cp.min() and cp[0] < 1.0
        assert cp[-1] == 1.0
        assert evaluate(curve, 0.15) > 0.9  # rises steeply
        assert rmse <= _oracle_fit_rmse(values) + 0.05

    def test_exact_bezier_round_trip(self):
        rng = np.random.default_rng(5)
        edges = np.linspace(0.0, 2.0, 101)
        for _ in range(10):
            cp = random_monotone_cp(rng)
            values = evaluate(BezierCurve(cp), edges[1:] / 2.0)
            curve, rmse = fit_to_cdf(EmpiricalCdf(edges, values))
            assert rmse <= 1e-3

    def test_uniform_histogram_is_near_linear(self):
        edges = np.linspace(0.0, 2.0, 101)
        values = (np.arange(100) + 1) / 100.0
        curve, _ = fit_to_cdf(EmpiricalCdf(edges, values))
        t = np.linspace(0.0, 1.0, 500)
        assert np.max(np.abs(evaluate(curve, t) - t)) <= 0.02

    def test_empty_cdf_returns_zero_curve(self):
        edges = np.linspace(0.0, 2.0, 101)
        curve, rmse = fit_to_cdf(EmpiricalCdf(edges, np.zeros(100)))
        np.testing.assert_array_equal(curve.control_points, np.zeros(10))
        assert rmse == 0.0

    def test_steep_mid_domain_cdf_is_accurate(self):
        # truncated-Gaussian-style CDF centered at 0.65 m; the fit must track
        # the rise instead of saturating into a 0/1 step
        from scipy.stats import norm
        edges = np.linspace(0.0, 2.0, 101)
        values = norm.cdf(edges[1:], loc=0.65, scale=0.05)
        curve, rmse = fit_to_cdf(EmpiricalCdf(edges, values))
        assert rmse <= _oracle_fit_rmse(values) + 0.05
        assert abs(evaluate_at_distance(curve, 0.65) - 0.5) <= 0.1
        assert evaluate_at_distance(curve, 0.25) < 0.2
        assert evaluate_at_distance(curve, 1.1) > 0.85


class TestInverse:
    def test_zero_target(self):
        curve = BezierCurve(np.linspace(0, 1, 10))
        assert inverse(curve, 0.0) == 0.0

    def test_identity_curve(self):
        curve = BezierCurve(np.linspace(0, 1, 10))
        assert inverse(curve, 0.3) == pytest.approx(0.3, abs=1e-6)

    def test_unreachable_target(self):
        curve = BezierCurve(np.full(10, 0.4))
        assert inverse(curve, 0.9) == 1.0

    def test_matches_dense_grid_scan(self):
        rng = np.random.default_rng(9)
        t_grid = np.linspace(0.0, 1.0, 200_001)
        for _ in range(5):
            curve = BezierCurve(random_monotone_cp(rng))
            lo, hi = curve.control_points[0], curve.control_points[-1]
            if hi - lo < 0.2:
                continue
            y = float(lo + 0.7 * (hi - lo))
            t_star = inverse(curve, y)
            vals = evaluate(curve, t_grid)
            scan = float(t_grid[np.argmax(vals >= y)])
            assert t_star == pytest.approx(scan, abs=1e-5)
            assert evaluate(curve, t_star) >= y - 1e-9


class TestCurveIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        curve = BezierCurve(random_monotone_cp(rng), d_max=1.75)
        path = tmp_path / "curve.txt"
        save_curve(curve, path)
        loaded = load_curve(path)
        np.testing.assert_array_equal(loaded.control_points, curve.control_points)
        assert loaded.d_max == curve.d_max

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("d_max nonsense\n")
        with pytest.raises(FormatError):
            load_curve(path)
