import numpy as np
import pytest

from reachkit import (
    LtiSystem,
    classify_spectrum,
    convolution_integral,
    expm_grid,
    matrix_exponential,
    simulate,
)
from reachkit.errors import DimensionError, IntervalError, NumericRangeError

from helpers import (
    DEMO_EIG_FAST,
    DEMO_EIG_SLOW,
    conv_integral_oracle,
    demo_system,
    eig_expm,
    random_stable_system,
)


class TestMatrixExponential:
    def test_zero_matrix(self):
        assert np.allclose(matrix_exponential(np.zeros((2, 2)), 1.0), np.eye(2), atol=1e-15)

    def test_diagonal(self):
        A = np.diag([0.3, -1.2])
        t = 0.7
        expected = np.diag(np.exp(np.array([0.3, -1.2]) * t))
        assert np.allclose(matrix_exponential(A, t), expected, rtol=1e-14)

    def test_demo_eigenvalues(self):
        # eigenvalues of exp(A) are exp of the eigenvalues of A
        E = matrix_exponential(demo_system().A, 1.0)
        got = np.sort(np.real(np.linalg.eigvals(E)))
        expected = np.sort(np.exp([0.53, 1.57]))
        assert np.allclose(got, expected, atol=1e-2)
        exact = np.sort(np.exp([DEMO_EIG_SLOW, DEMO_EIG_FAST]))
        # eigenvalue extraction itself carries ~1e-8 relative noise here
        assert np.allclose(got, exact, rtol=1e-6)

    def test_negative_time(self):
        A = demo_system().A
        assert np.allclose(
            matrix_exponential(A, -0.8) @ matrix_exponential(A, 0.8), np.eye(2), atol=1e-12
        )

    def test_accuracy_large_argument(self):
        # spectral-form references across matrix classes at ||A t|| <= 50
        S = np.array([[0.0, 50.0], [-50.0, 0.0]])
        rotation = np.array(
            [[np.cos(50.0), np.sin(50.0)], [-np.sin(50.0), np.cos(50.0)]]
        )
        assert np.linalg.norm(matrix_exponential(S, 1.0) - rotation, 2) <= 1e-12

        rng = np.random.default_rng(3)
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        lam_neg = np.array([-5.0, -3.0, -2.0, -1.0])
        A = Q @ np.diag(lam_neg) @ Q.T
        expected = Q @ np.diag(np.exp(lam_neg * 10.0)) @ Q.T
        got = matrix_exponential(A, 10.0)
        assert np.linalg.norm(got - expected, 2) <= 1e-12 * np.linalg.norm(expected, 2)

        lam_mix = np.array([-5.0, -1.0, 2.0, 5.0])
        A = Q @ np.diag(lam_mix) @ Q.T
        expected = Q @ np.diag(np.exp(lam_mix * 9.0)) @ Q.T
        got = matrix_exponential(A, 9.0)
        assert np.linalg.norm(got - expected, 2) <= 1e-12 * np.linalg.norm(expected, 2)

    def test_semigroup_property(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            sys = random_stable_system(rng, 3, 1)
            s, t = rng.uniform(-2.0, 2.0, 2)
            lhs = matrix_exponential(sys.A, s + t)
            rhs = matrix_exponential(sys.A, s) @ matrix_exponential(sys.A, t)
            # negative times make the factors grow, so normalize by size
            scale = max(1.0, np.max(np.abs(lhs)))
            assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale

    def test_inverse_property(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            sys = random_stable_system(rng, 2, 1)
            t = rng.uniform(-2.0, 2.0)
            prod = matrix_exponential(sys.A, t) @ matrix_exponential(sys.A, -t)
            assert np.max(np.abs(prod - np.eye(2))) <= 1e-10

    def test_nonsquare_raises(self):
        with pytest.raises(DimensionError):
            matrix_exponential(np.ones((2, 3)), 1.0)

    def test_overflow_raises(self):
        with pytest.raises(NumericRangeError):
            matrix_exponential(np.diag([1000.0, 1000.0]), 1000.0)


class TestExpmGrid:
    def test_matches_pointwise(self):
        sys = demo_system()
        grid = expm_grid(sys.A, 1.0, 0.0, 4097)
        times = np.linspace(1.0, 0.0, 4097)
        for k in (0, 1, 63, 64, 65, 1000, 4096):
            assert np.allclose(grid[k], eig_expm(sys.A, times[k]), atol=1e-12)

    def test_single_node(self):
        sys = demo_system()
        grid = expm_grid(sys.A, 0.5, 0.5, 1)
        assert np.allclose(grid[0], eig_expm(sys.A, 0.5), atol=1e-13)


class TestConvolutionIntegral:
    def test_integrator_constant_integrand(self):
        sys = LtiSystem(np.zeros((2, 2)), [[1.0], [0.0]])
        result = convolution_integral(sys, 1.0, 0.0, 1.0)
        assert np.allclose(result, [[1.0], [0.0]], atol=1e-14)

    def test_interval_length(self):
        sys = LtiSystem(np.zeros((2, 2)), np.eye(2))
        result = convolution_integral(sys, 1.0, 0.25, 0.75)
        assert np.allclose(result, 0.5 * np.eye(2), atol=1e-14)

    def test_demo_vs_quadrature_oracle(self):
        sys = demo_system()
        got = convolution_integral(sys, 1.0, 0.0, 1.0)
        expected = conv_integral_oracle(sys, 1.0, 0.0, 1.0)
        assert np.max(np.abs(got - expected)) <= 1e-8 * np.max(np.abs(expected))

    def test_interval_additivity(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            sys = random_stable_system(rng, 3, 2)
            a, b, c = np.sort(rng.uniform(0.0, 1.0, 3))
            left = convolution_integral(sys, 1.0, a, b)
            right = convolution_integral(sys, 1.0, b, c)
            full = convolution_integral(sys, 1.0, a, c)
            assert np.max(np.abs(left + right - full)) <= 1e-10

    def test_reversed_interval_raises(self):
        with pytest.raises(IntervalError):
            convolution_integral(demo_system(), 1.0, 0.8, 0.2)

    def test_outside_horizon_raises(self):
        with pytest.raises(IntervalError):
            convolution_integral(demo_system(), 1.0, 0.0, 1.5)


class TestSimulate:
    def test_zero_control(self):
        traj = simulate(demo_system(), lambda t: np.array([0.0]), 1.0, 50)
        assert np.allclose(traj.endpoint, 0.0, atol=1e-15)
        assert traj.times[0] == 0.0 and traj.times[-1] == 1.0

    def test_pure_integrator(self):
        sys = LtiSystem(np.zeros((2, 2)), [[1.0], [0.0]])
        traj = simulate(sys, lambda t: np.array([1.0]), 1.0, 100)
        assert np.allclose(traj.endpoint, [1.0, 0.0], atol=1e-12)

    def test_demo_matches_closed_form(self):
        sys = demo_system()
        traj = simulate(sys, lambda t: np.array([1.0]), 1.0, 10_000)
        expected = convolution_integral(sys, 1.0, 0.0, 1.0)[:, 0]
        assert np.max(np.abs(traj.endpoint - expected)) <= 1e-8

    def test_array_control_samples(self):
        sys = LtiSystem(np.zeros((2, 2)), [[1.0], [0.0]])
        steps = 64
        samples = np.ones((steps + 1, 1))
        traj = simulate(sys, samples, 1.0, steps)
        assert np.allclose(traj.endpoint, [1.0, 0.0], atol=1e-12)

    def test_rk4_fourth_order(self):
        sys = demo_system()
        control = lambda t: np.array([np.sin(3.0 * t)])
        ref = simulate(sys, control, 1.0, 6400).endpoint
        errs = []
        for steps in (100, 200, 400):
            errs.append(np.linalg.norm(simulate(sys, control, 1.0, steps).endpoint - ref))
        # halving the step should shrink the error by about 2^4
        assert errs[0] / errs[1] > 8.0
        assert errs[1] / errs[2] > 8.0


class TestClassifySpectrum:
    def test_demo_real_distinct(self):
        spec = classify_spectrum(demo_system())
        got = np.sort(np.real(spec.eigenvalues))
        assert np.allclose(got, [0.53, 1.57], atol=0.005)
        assert spec.is_planar_real_distinct

    def test_rotation_complex_pair(self):
        sys = LtiSystem([[0.0, 1.0], [-1.0, 0.0]], [[1.0], [0.0]])
        spec = classify_spectrum(sys)
        assert not spec.is_planar_real_distinct
        assert np.allclose(np.sort(np.imag(spec.eigenvalues)), [-1.0, 1.0], atol=1e-12)

    def test_repeated_eigenvalue(self):
        sys = LtiSystem(np.eye(2), [[1.0], [0.0]])
        assert not classify_spectrum(sys).is_planar_real_distinct

    def test_not_planar(self):
        rng = np.random.default_rng(5)
        sys = random_stable_system(rng, 3, 1)
        assert not classify_spectrum(sys).is_planar_real_distinct


class TestLtiSystemValidation:
    def test_b_row_mismatch(self):
        with pytest.raises(DimensionError):
            LtiSystem(np.eye(2), np.ones((3, 1)))

    def test_nonfinite_entries(self):
        with pytest.raises(ValueError):
            LtiSystem([[np.inf, 0.0], [0.0, 1.0]], [[1.0], [0.0]])

    def test_vector_b_promoted(self):
        sys = LtiSystem(np.eye(2), [1.0, 0.0])
        assert sys.B.shape == (2, 1)
        assert sys.m == 1

    def test_matrices_read_only(self):
        sys = demo_system()
        with pytest.raises(ValueError):
            sys.A[0, 0] = 5.0
