"""Unit tests for :mod:`kerninv.kernels`."""

from itertools import combinations
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from kerninv import kernels
from kerninv.kernels import (
    DimensionMismatchError,
    GramFactor,
    KernelError,
    KernelSpec,
    NonFiniteInputError,
    NotPositiveSemidefiniteError,
    NotSymmetricError,
)


def _rng(seed=0):
    """Return a seeded generator."""
    return np.random.default_rng(seed)


class KernelSpecTestCase(TestCase):
    """Tests for :class:`kerninv.kernels.KernelSpec`."""

    def test_invalid_family(self):
        """Assert that unknown families are rejected."""
        with self.assertRaises(KernelError):
            KernelSpec('polynomial', 2)

    def test_rbf_needs_bandwidth(self):
        """Assert that an RBF kernel needs a positive, finite bandwidth."""
        for bandwidth in (None, 0.0, -1.0, float('nan')):
            with self.subTest(bandwidth=bandwidth), self.assertRaises(KernelError):
                KernelSpec('rbf-gaussian', 2, bandwidth=bandwidth)

    def test_one_hot_delta(self):
        """Assert that a one-hot-delta kernel takes one column and a category count."""
        with self.assertRaises(KernelError):
            KernelSpec('one-hot-delta', 2, categories=3)
        with self.assertRaises(KernelError):
            KernelSpec('one-hot-delta', 1)
        self.assertEqual(KernelSpec('one-hot-delta', 1, categories=3).categories, 3)

    def test_json_dict(self):
        """Assert that a spec survives :meth:`to_json_dict` and back."""
        spec = KernelSpec('rbf-gaussian', 3, bandwidth=0.7)
        self.assertEqual(KernelSpec.from_json_dict(spec.to_json_dict()), spec)

    def test_repr(self):
        """Assert that ``__repr__`` names the module and the parameters."""
        self.assertEqual(
            repr(KernelSpec('linear', 2)),
            "kerninv.kernels.KernelSpec(family='linear', input_dim=2)",
        )


class GramMatrixTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.gram_matrix` and ``cross_gram``."""

    def test_identical_points(self):
        """Two identical points give an all-ones RBF Gram matrix."""
        spec = KernelSpec('rbf-gaussian', 2, bandwidth=0.5)
        gram = kernels.gram_matrix(np.array([[0.3, 0.1], [0.3, 0.1]]), spec)
        assert_allclose(gram, np.ones((2, 2)))

    def test_rbf_formula(self):
        """Points 0 and 1 with unit bandwidth give ``exp(-1/2)`` off the diagonal."""
        spec = KernelSpec('rbf-gaussian', 1, bandwidth=1.0)
        gram = kernels.gram_matrix(np.array([[0.0], [1.0]]), spec)
        assert_allclose(gram, [[1.0, np.exp(-0.5)], [np.exp(-0.5), 1.0]])

    def test_linear(self):
        """The linear Gram matrix matches pairwise dot products."""
        points = _rng().standard_normal((5, 3))
        gram = kernels.gram_matrix(points, KernelSpec('linear', 3))
        oracle = np.array(
            [[sum(a * b for a, b in zip(p, q, strict=True)) for q in points] for p in points]
        )
        assert_allclose(gram, oracle, atol=1e-12)

    def test_one_hot_delta(self):
        """Equal codes give 1, different codes give 0."""
        spec = KernelSpec('one-hot-delta', 1, categories=3)
        gram = kernels.gram_matrix(np.array([0, 2, 0, 1]), spec)
        assert_array_equal(
            gram,
            [[1, 0, 1, 0], [0, 1, 0, 0], [1, 0, 1, 0], [0, 0, 0, 1]],
        )

    def test_symmetric_unit_diagonal(self):
        """An RBF Gram matrix is exactly symmetric with a unit diagonal."""
        points = _rng(1).standard_normal((40, 4))
        gram = kernels.gram_matrix(points, KernelSpec('rbf-gaussian', 4, bandwidth=1.3))
        assert_array_equal(gram, gram.T)
        assert_array_equal(np.diag(gram), np.ones(40))

    def test_dimension_mismatch(self):
        """Assert that points of the wrong width are rejected."""
        with self.assertRaises(DimensionMismatchError):
            kernels.gram_matrix(np.zeros((3, 2)), KernelSpec('linear', 3))

    def test_non_finite(self):
        """Assert that NaN inputs are rejected."""
        with self.assertRaises(NonFiniteInputError):
            kernels.gram_matrix(np.array([[0.0], [np.nan]]), KernelSpec('linear', 1))

    def test_cross_gram_shape(self):
        """Assert that the cross Gram matrix is ``n_a x n_b``."""
        spec = KernelSpec('rbf-gaussian', 2, bandwidth=1.0)
        rng = _rng(2)
        gram = kernels.cross_gram(rng.random((4, 2)), rng.random((7, 2)), spec)
        self.assertEqual(gram.shape, (4, 7))

    def test_one_hot_out_of_range(self):
        """Assert that codes outside the category range are rejected."""
        with self.assertRaises(KernelError):
            kernels.one_hot([0, 3], 3)
        with self.assertRaises(KernelError):
            kernels.one_hot([0.5], 3)


class MedianBandwidthTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.median_bandwidth`."""

    def test_two_points(self):
        """Points 0 and 2 are at distance 2."""
        self.assertEqual(kernels.median_bandwidth(np.array([[0.0], [2.0]])), 2.0)

    def test_identical_points(self):
        """Coinciding points fall back to a unit bandwidth."""
        with self.assertLogs('kerninv.kernels', level='WARNING'):
            self.assertEqual(kernels.median_bandwidth(np.ones((5, 3))), kernels.FALLBACK_BANDWIDTH)

    def test_exhaustive_oracle(self):
        """The heuristic matches a sort-and-pick median over every pair."""
        points = _rng(3).standard_normal((50, 3))
        distances = sorted(
            float(np.sqrt(np.sum((points[i] - points[j]) ** 2)))
            for i, j in combinations(range(50), 2)
        )
        # 1225 pairs, so the median is the middle element.
        oracle = distances[len(distances) // 2]
        self.assertAlmostEqual(kernels.median_bandwidth(points), oracle, places=12)

    def test_subsample(self):
        """A subsample is seeded and used only when ``n`` exceeds ``max_points``."""
        points = _rng(4).standard_normal((300, 2))
        self.assertEqual(
            kernels.median_bandwidth(points, max_points=100, seed=7),
            kernels.median_bandwidth(points, max_points=100, seed=7),
        )
        self.assertEqual(
            kernels.median_bandwidth(points, max_points=1000),
            kernels.median_bandwidth(points),
        )

    def test_scale_equivariance(self):
        """Scaling the points scales the bandwidth."""
        points = _rng(13).standard_normal((80, 3))
        self.assertAlmostEqual(
            kernels.median_bandwidth(2.5 * points),
            2.5 * kernels.median_bandwidth(points),
            places=12,
        )

    def test_permutation_invariance(self):
        """The order of the points does not matter."""
        points = _rng(14).standard_normal((80, 3))
        shuffled = points[_rng(15).permutation(80)]
        self.assertEqual(kernels.median_bandwidth(shuffled), kernels.median_bandwidth(points))

    def test_single_point(self):
        """Assert that a single point is rejected."""
        with self.assertRaises(KernelError):
            kernels.median_bandwidth(np.zeros((1, 2)))


class CholeskyFactorTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.cholesky_factor`."""

    def test_identity(self):
        """The identity factors as itself."""
        factor = kernels.cholesky_factor(np.eye(3), tol=1e-10)
        self.assertEqual(factor.rank, 3)
        assert_array_equal(factor.factor, np.eye(3))

    def test_rank_one(self):
        """``v v^T`` with ``v = (1, 2)`` has rank 1."""
        v = np.array([[1.0], [2.0]])
        factor = kernels.cholesky_factor(v @ v.T)
        self.assertEqual(factor.factor.shape, (2, 1))
        assert_allclose(factor.gram(), [[1.0, 2.0], [2.0, 4.0]], atol=1e-12)

    def test_low_rank(self):
        """A random rank-7 PSD matrix is recovered with rank 7."""
        a = _rng(5).standard_normal((20, 7))
        gram = a @ a.T
        factor = kernels.cholesky_factor(gram)
        self.assertEqual(factor.rank, 7)
        self.assertLessEqual(np.max(np.abs(factor.gram() - gram)), 1e-8)
        self.assertEqual(factor.source, kernels.EXACT_CHOLESKY)

    def test_max_rank(self):
        """Assert that ``max_rank`` caps the number of columns."""
        a = _rng(6).standard_normal((15, 6))
        self.assertEqual(kernels.cholesky_factor(a @ a.T, max_rank=3).rank, 3)

    def test_not_symmetric(self):
        """Assert that asymmetric input is rejected."""
        with self.assertRaises(NotSymmetricError):
            kernels.cholesky_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_not_psd(self):
        """Assert that an indefinite matrix is rejected."""
        with self.assertRaises(NotPositiveSemidefiniteError):
            kernels.cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with self.assertRaises(NotPositiveSemidefiniteError):
            kernels.cholesky_factor(np.diag([1.0, -1.0]))

    def test_not_square(self):
        """Assert that a non-square matrix is rejected."""
        with self.assertRaises(DimensionMismatchError):
            kernels.cholesky_factor(np.zeros((2, 3)))

    def test_zero_matrix(self):
        """The zero matrix has rank 0."""
        self.assertEqual(kernels.cholesky_factor(np.zeros((4, 4))).rank, 0)

    def test_negative_threshold(self):
        """Eigenvalues down to ``-tol`` times the largest diagonal entry are round-off."""
        factor = kernels.cholesky_factor(np.diag([1.0, -5e-10]))
        self.assertEqual(factor.rank, 1)
        with self.assertRaises(NotPositiveSemidefiniteError) as context:
            kernels.cholesky_factor(np.array([[1.0, 1.0], [1.0, 1.0 - 4e-9]]))
        self.assertIn('below -1.000e-09', str(context.exception))

    def test_round_off_floor(self):
        """A tolerance below the round-off of the matrix falls back to the round-off."""
        self.assertEqual(kernels.cholesky_factor(np.diag([1.0, -1e-17]), tol=1e-20).rank, 1)
        with self.assertRaises(NotPositiveSemidefiniteError):
            kernels.cholesky_factor(np.diag([1.0, -1e-12]), tol=1e-20)

    def test_pivots(self):
        """The factor is lower triangular on its pivot rows and reproduces them."""
        a = _rng(12).standard_normal((10, 4))
        gram = a @ a.T
        factor = kernels.cholesky_factor(gram)
        lower = factor.factor[factor.pivots]
        assert_array_equal(lower, np.tril(lower))
        assert_allclose(lower @ lower.T, gram[np.ix_(factor.pivots, factor.pivots)], atol=1e-10)


class KernelFactorTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.kernel_factor`."""

    def test_matches_explicit(self):
        """The lazy factor reproduces the explicit Gram matrix."""
        points = _rng(7).standard_normal((60, 3))
        spec = KernelSpec('rbf-gaussian', 3, bandwidth=kernels.median_bandwidth(points))
        factor = kernels.kernel_factor(points, spec)
        self.assertLessEqual(
            np.max(np.abs(factor.gram() - kernels.gram_matrix(points, spec))),
            kernels.RECONSTRUCTION_TOL,
        )

    def test_linear_rank(self):
        """A linear kernel on ``p`` columns has rank ``p``."""
        points = _rng(8).standard_normal((30, 4))
        self.assertEqual(kernels.kernel_factor(points, KernelSpec('linear', 4)).rank, 4)

    def test_one_hot_delta_rank(self):
        """A one-hot-delta kernel has one column per category present."""
        codes = np.array([0, 1, 1, 2, 0, 2, 2])
        factor = kernels.kernel_factor(codes, KernelSpec('one-hot-delta', 1, categories=4))
        self.assertEqual(factor.rank, 3)
        assert_allclose(
            factor.gram(),
            kernels.gram_matrix(codes, KernelSpec('one-hot-delta', 1, categories=4)),
            atol=1e-12,
        )


class CenterFactorTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.center_factor`."""

    def test_constant_column(self):
        """Centering annihilates constants."""
        assert_array_equal(kernels.center_factor(np.ones((4, 1))), np.zeros((4, 1)))

    def test_subtract_mean(self):
        """``(1, 2, 3)`` centers to ``(-1, 0, 1)``."""
        centered = kernels.center_factor(np.array([[1.0], [2.0], [3.0]]))
        assert_allclose(centered, [[-1.0], [0.0], [1.0]])

    def test_explicit_oracle(self):
        """Centering matches multiplication with an explicit centering matrix."""
        matrix = _rng(9).standard_normal((30, 5))
        centering = np.eye(30) - np.ones((30, 30)) / 30
        assert_allclose(kernels.center_factor(matrix), centering @ matrix, atol=1e-12)

    def test_gram_factor(self):
        """Assert that a :class:`GramFactor` is accepted."""
        factor = GramFactor(np.array([[1.0], [3.0]]))
        assert_allclose(factor.centered(), [[-1.0], [1.0]])

    def test_idempotent(self):
        """Centering twice is centering once."""
        centered = kernels.center_factor(_rng(16).standard_normal((25, 4)))
        assert_allclose(kernels.center_factor(centered), centered, atol=1e-14)


class PivotFeaturesTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.pivot_features`."""

    def setUp(self):
        """Factor an RBF Gram matrix of rank below ``n``."""
        self.points = _rng(17).uniform(0.0, 1.0, (120, 2))
        self.spec = KernelSpec('rbf-gaussian', 2, bandwidth=kernels.median_bandwidth(self.points))
        self.factor = kernels.kernel_factor(self.points, self.spec)
        self.support = self.points[self.factor.pivots]
        self.lower = self.factor.factor[self.factor.pivots]

    def test_training_points(self):
        """The map gives back the pivoted factor of the training points."""
        self.assertLess(self.factor.rank, 120)
        features = kernels.pivot_features(self.points, self.support, self.lower, self.spec)
        assert_allclose(features, self.factor.factor, atol=1e-6)

    def test_positive_semidefinite(self):
        """Gram matrices and their factors are positive semidefinite."""
        gram = kernels.gram_matrix(self.points, self.spec)
        self.assertGreaterEqual(float(np.linalg.eigvalsh(gram)[0]), -1e-10)
        self.assertLessEqual(
            np.max(np.abs(self.factor.gram() - gram)), kernels.RECONSTRUCTION_TOL
        )

    def test_empty_factor(self):
        """An empty factor maps every point to the empty vector."""
        empty = (np.zeros((0, 2)), np.zeros((0, 0)))
        features = kernels.pivot_features(self.points, *empty, self.spec)
        self.assertEqual(features.shape, (120, 0))


class ArrayCodecTestCase(TestCase):
    """Tests for :func:`kerninv.kernels.encode_array` and ``decode_array``."""

    def test_exact(self):
        """Decoding gives back the same bits and shape, empty arrays included."""
        for array in (_rng(10).standard_normal((3, 4)), np.zeros((0, 5))):
            payload = kernels.encode_array(array)
            self.assertEqual(payload['shape'], list(array.shape))
            assert_array_equal(kernels.decode_array(payload), array)
