"""Unit tests for :mod:`kerninv.solver`."""

import json
from types import SimpleNamespace
from unittest import TestCase

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from kerninv import solver
from kerninv.data import gen_gaussian_toy
from kerninv.dependence import dep_emp, dep_emp_codes
from kerninv.kernels import (
    DimensionMismatchError,
    KernelSpec,
    gram_matrix,
    kernel_factor,
    median_bandwidth,
)
from kerninv.solver import (
    EigenPencil,
    KernelConfig,
    ModelFormatError,
    PencilError,
    SingularPencilError,
    SolverError,
)

TARGET = KernelSpec('one-hot-delta', 1, categories=16)


def _linear_config(s_dim=4):
    """Return linear input and attribute kernels with a one-hot target kernel."""
    return KernelConfig(KernelSpec('linear', 4), TARGET, KernelSpec('linear', s_dim))


def _rbf_config(dataset):
    """Return RBF input and attribute kernels with median bandwidths."""
    return KernelConfig(
        KernelSpec('rbf-gaussian', 4, bandwidth=median_bandwidth(dataset.x)),
        TARGET,
        KernelSpec('rbf-gaussian', 4, bandwidth=median_bandwidth(dataset.s)),
    )


def _full_theta(model, kernel_cfg, x):
    """Return the ``r x n`` coefficients of an exact encoder on all of ``x``."""
    theta = np.zeros((model.r, x.shape[0]))
    theta[:, kernel_factor(x, kernel_cfg.x, kernel_cfg.tol).pivots] = model.theta
    return theta


def _pencil(b, c):
    """Wrap two matrices in a pencil with arbitrary valid parameters."""
    return EigenPencil(np.asarray(b, dtype=float), np.asarray(c, dtype=float), 0.5, 1.0, 1)


class SolvePencilTestCase(TestCase):
    """Tests for :func:`kerninv.solver.solve_pencil`."""

    def test_diagonal(self):
        """``B = diag(3, 1)`` and ``C = I`` give the standard basis."""
        solution = solver.solve_pencil(_pencil(np.diag([3.0, 1.0]), np.eye(2)))
        assert_allclose(solution.eigenvalues, [3.0, 1.0])
        assert_allclose(solution.eigenvectors, np.eye(2), atol=1e-15)

    def test_decoupled_ratios(self):
        """``B = diag(2, -2)`` and ``C = diag(2, 1)`` give ``(1, -2)``."""
        solution = solver.solve_pencil(_pencil(np.diag([2.0, -2.0]), np.diag([2.0, 1.0])))
        assert_allclose(solution.eigenvalues, [1.0, -2.0])

    def test_random(self):
        """Random pencils satisfy the eigen equations and bracket every root."""
        rng = np.random.default_rng(0)
        a = rng.standard_normal((12, 12))
        m = rng.standard_normal((12, 12))
        b = (a + a.T) / 2.0
        c = m @ m.T + 12.0 * np.eye(12)
        solution = solver.solve_pencil(_pencil(b, c))
        values, vectors = solution.eigenvalues, solution.eigenvectors
        self.assertTrue(np.all(np.diff(values) <= 0.0))
        scale = np.linalg.norm(b, 2) + np.max(np.abs(values)) * np.linalg.norm(c, 2)
        self.assertLessEqual(np.max(np.abs(b @ vectors - c @ vectors * values)), 1e-10 * scale)
        assert_allclose(vectors.T @ c @ vectors, np.eye(12), atol=1e-10)
        for tau in values:
            below = np.linalg.det(b - (tau - 1e-6) * c)
            above = np.linalg.det(b - (tau + 1e-6) * c)
            self.assertLess(below * above, 0.0)

    def test_sign_convention(self):
        """The largest entry of every eigenvector is positive."""
        rng = np.random.default_rng(1)
        a = rng.standard_normal((6, 6))
        solution = solver.solve_pencil(_pencil((a + a.T) / 2.0, np.eye(6)))
        vectors = solution.eigenvectors
        peaks = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(6)]
        self.assertTrue(np.all(peaks > 0.0))

    def test_singular(self):
        """Assert that a singular ``C`` is reported."""
        with self.assertRaises(SingularPencilError):
            solver.solve_pencil(_pencil(np.eye(2), np.diag([1.0, 0.0])))
        with self.assertRaises(SingularPencilError):
            solver.solve_pencil(_pencil(np.eye(2), np.diag([1.0, 1e-12])))

    def test_empty(self):
        """A pencil of size 0 has no eigenvalues."""
        solution = solver.solve_pencil(_pencil(np.zeros((0, 0)), np.zeros((0, 0))))
        self.assertEqual(solution.eigenvalues.shape, (0,))


class EigenPencilTestCase(TestCase):
    """Tests for :class:`kerninv.solver.EigenPencil`."""

    def test_invalid(self):
        """Assert that bad shapes, asymmetry and bad parameters are rejected."""
        with self.assertRaises(PencilError):
            EigenPencil(np.eye(2), np.eye(3), 0.5, 1.0, 1)
        with self.assertRaises(PencilError):
            EigenPencil(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2), 0.5, 1.0, 1)
        for lambda_, gamma in ((1.0, 1.0), (-0.1, 1.0), (0.5, 0.0)):
            with self.subTest(lambda_=lambda_, gamma=gamma), self.assertRaises(PencilError):
                EigenPencil(np.eye(2), np.eye(2), lambda_, gamma, 1)


class OptimalDimTestCase(TestCase):
    """Tests for :func:`kerninv.solver.optimal_dim`."""

    def test_counts(self):
        """Count the eigenvalues that are not negative."""
        self.assertEqual(solver.optimal_dim([2.0, 0.0, -1.0]), 2)
        self.assertEqual(solver.optimal_dim([-0.5, -1.0]), 0)
        self.assertEqual(solver.optimal_dim([]), 0)

    def test_tolerance(self):
        """Round-off below ``1e-9 max |tau|`` counts as zero."""
        self.assertEqual(solver.optimal_dim([1.0, -1e-10]), 2)
        self.assertEqual(solver.optimal_dim([1e3, -1e-7]), 2)
        self.assertEqual(solver.optimal_dim([1.0, -1e-8]), 1)

    def test_small_scale(self):
        """The tolerance follows the scale of tiny dependence values."""
        self.assertEqual(solver.optimal_dim([1e-6, -1e-12]), 1)
        self.assertEqual(solver.optimal_dim([1e-6, -1e-16]), 2)
        self.assertEqual(solver.optimal_dim([-1e-13, -1e-3]), 1)


class BuildPencilTestCase(TestCase):
    """Tests for :func:`kerninv.solver.build_pencil` and ``PencilBlocks``."""

    def setUp(self):
        """Draw three small random factors."""
        rng = np.random.default_rng(2)
        self.factor_x = rng.standard_normal((8, 3))
        self.factor_y = rng.standard_normal((8, 2))
        self.factor_s = rng.standard_normal((8, 2))

    def test_naive_assembly(self):
        """``B`` and ``C`` match an assembly with explicit ``n x n`` matrices."""
        lambda_, gamma, n = 0.3, 0.01, 8
        pencil = solver.build_pencil(self.factor_x, self.factor_y, self.factor_s, lambda_, gamma)
        h = np.eye(n) - np.ones((n, n)) / n
        k_y = self.factor_y @ self.factor_y.T
        k_s = self.factor_s @ self.factor_s.T
        middle = (1.0 - lambda_) * h @ k_y @ h - lambda_ * h @ k_s @ h
        assert_allclose(pencil.b, self.factor_x.T @ middle @ self.factor_x / n**2, atol=1e-8)
        c = self.factor_x.T @ h @ self.factor_x / n + gamma * np.eye(3)
        assert_allclose(pencil.c, c, atol=1e-8)

    def test_lambda_endpoints(self):
        """``B`` is PSD at ``lambda = 0`` and NSD close to 1."""
        factors = (self.factor_x, self.factor_y, self.factor_s)
        psd = np.linalg.eigvalsh(solver.build_pencil(*factors, 0.0, 1.0).b)
        self.assertTrue(np.all(psd >= -1e-9))
        nsd = np.linalg.eigvalsh(solver.build_pencil(*factors, 1.0 - 1e-9, 1.0).b)
        self.assertTrue(np.all(nsd <= 1e-8))

    def test_blocks_reuse(self):
        """Cached blocks give the same pencil as a fresh assembly."""
        blocks = solver.PencilBlocks(self.factor_x, self.factor_y, self.factor_s)
        factors = (self.factor_x, self.factor_y, self.factor_s)
        for lambda_, gamma in ((0.0, 1.0), (0.7, 1e-3)):
            fresh = solver.build_pencil(*factors, lambda_, gamma)
            cached = blocks.pencil(lambda_, gamma)
            assert_array_equal(cached.b, fresh.b)
            assert_array_equal(cached.c, fresh.c)

    def test_row_mismatch(self):
        """Assert that factors with different row counts are rejected."""
        with self.assertRaises(PencilError):
            solver.build_pencil(self.factor_x, self.factor_y[:7], self.factor_s, 0.5, 1.0)

    def test_invalid_parameters(self):
        """Assert that ``lambda = 1`` and ``gamma = 0`` are rejected."""
        factors = (self.factor_x, self.factor_y, self.factor_s)
        with self.assertRaises(PencilError):
            solver.build_pencil(*factors, 1.0, 1.0)
        with self.assertRaises(PencilError):
            solver.build_pencil(*factors, 0.5, 0.0)


class KernelConfigTestCase(TestCase):
    """Tests for :class:`kerninv.solver.KernelConfig`."""

    def test_rff_needs_rbf(self):
        """Assert that random features are refused for a linear kernel."""
        with self.assertRaises(PencilError):
            KernelConfig(KernelSpec('linear', 4), TARGET, TARGET, rff_dim=10)

    def test_json_dict(self):
        """Assert that a config survives :meth:`to_json_dict` and back."""
        cfg = KernelConfig(
            KernelSpec('rbf-gaussian', 4, bandwidth=0.4), TARGET, KernelSpec('linear', 4), 50, 3
        )
        restored = KernelConfig.from_json_dict(json.loads(json.dumps(cfg.to_json_dict())))
        self.assertEqual(restored.to_json_dict(), cfg.to_json_dict())


class FitEncoderTestCase(TestCase):
    """Tests for :func:`kerninv.solver.fit_encoder` and ``encode``."""

    @classmethod
    def setUpClass(cls):
        """Sample the toy dataset once."""
        cls.toy = gen_gaussian_toy(300, seed=0)

    def _factors(self, kernel_cfg, dataset):
        """Return the target and attribute factors of ``dataset``."""
        return kernel_factor(dataset.y, kernel_cfg.y), kernel_factor(dataset.s, kernel_cfg.s)

    def test_full_dimension_at_zero(self):
        """At ``lambda = 0`` every direction is kept and the objective is ``Dep(Z, Y)``."""
        cfg = _linear_config()
        model = solver.fit_encoder(self.toy, cfg, 0.0, 1e-3)
        self.assertEqual(model.r, 4)
        self.assertAlmostEqual(model.objective, float(np.sum(model.eigenvalues)))
        factor_y, _ = self._factors(cfg, self.toy)
        gram_x = gram_matrix(self.toy.x, cfg.x)
        dep_zy = dep_emp(_full_theta(model, cfg, self.toy.x), gram_x, factor_y)
        self.assertAlmostEqual(dep_zy / model.objective, 1.0, delta=1e-6)

    def test_objective_identity(self):
        """The objective is ``(1 - lambda) Dep(Z, Y) - lambda Dep(Z, S)``."""
        cfg = _linear_config()
        lambda_ = 0.5
        model = solver.fit_encoder(self.toy, cfg, lambda_, 1e-3)
        factor_y, factor_s = self._factors(cfg, self.toy)
        z = model.encode(self.toy.x)
        attained = (1.0 - lambda_) * dep_emp_codes(z, factor_y) - lambda_ * dep_emp_codes(
            z, factor_s
        )
        self.assertAlmostEqual(attained, model.objective, delta=1e-6 * max(1.0, abs(attained)))

    def test_full_invariance(self):
        """Close to ``lambda = 1`` the representation carries no ``Dep(Z, S)``."""
        cfg = _linear_config(s_dim=1)
        data = SimpleNamespace(x=self.toy.x, y=self.toy.y, s=self.toy.s[:, :1])
        model = solver.fit_encoder(data, cfg, solver.LAMBDA_MAX, 1e-3)
        self.assertEqual(model.r, 3)
        z = model.encode(data.x)
        self.assertLessEqual(dep_emp_codes(z, data.s), 1e-6)

    def test_fixed_dimension(self):
        """An explicit ``r`` overrides the optimal dimensionality."""
        model = solver.fit_encoder(self.toy, _linear_config(), 0.0, 1e-3, r=2)
        self.assertEqual(model.directions.shape, (4, 2))
        self.assertEqual(model.theta.shape, (2, model.support.shape[0]))
        self.assertAlmostEqual(model.objective, float(np.sum(model.eigenvalues[:2])))
        with self.assertRaises(SolverError):
            solver.fit_encoder(self.toy, _linear_config(), 0.0, 1e-3, r=5)

    def test_empty_encoder(self):
        """``r = 0`` maps everything to the empty vector."""
        with self.assertLogs('kerninv.solver', level='WARNING'):
            model = solver.fit_encoder(self.toy, _linear_config(), 0.5, 1e-3, r=0)
        self.assertEqual(model.objective, 0.0)
        self.assertEqual(model.encode(self.toy.x[:7]).shape, (7, 0))

    def test_dimension_mismatch(self):
        """The error names the dimension of the data and of the model."""
        model = solver.fit_encoder(self.toy, _linear_config(), 0.0, 1e-3)
        with self.assertRaises(DimensionMismatchError) as context:
            model.encode(np.zeros((5, 3)))
        self.assertIn('3', str(context.exception))
        self.assertIn('4', str(context.exception))
        with self.assertRaises(DimensionMismatchError):
            model.encode(np.zeros(3))
        self.assertEqual(model.encode(np.zeros(4)).shape, (1, model.r))

    def test_random_features(self):
        """An RFF encoder acts on the features and keeps the objective identity."""
        bandwidth = median_bandwidth(self.toy.x)
        cfg = KernelConfig(
            KernelSpec('rbf-gaussian', 4, bandwidth=bandwidth),
            TARGET,
            KernelSpec('linear', 4),
            rff_dim=64,
            rff_seed=5,
        )
        lambda_ = 0.4
        model = solver.fit_encoder(self.toy, cfg, lambda_, 1e-2)
        self.assertEqual(model.theta.shape[1], 64)
        self.assertIsNone(model.support)
        factor_y, factor_s = self._factors(cfg, self.toy)
        z = model.encode(self.toy.x)
        attained = (1.0 - lambda_) * dep_emp_codes(z, factor_y) - lambda_ * dep_emp_codes(
            z, factor_s
        )
        self.assertAlmostEqual(attained, model.objective, delta=1e-8)
        again = solver.fit_encoder(self.toy, cfg, lambda_, 1e-2)
        assert_array_equal(again.theta, model.theta)

    def test_empty_dataset(self):
        """Assert that an empty dataset is refused."""
        data = SimpleNamespace(x=np.zeros((0, 4)), y=np.zeros((0, 1)), s=np.zeros((0, 4)))
        with self.assertRaises(SolverError):
            solver.fit_encoder(data, _linear_config(), 0.0, 1e-3)


class RbfEncoderTestCase(TestCase):
    """Tests for exact RBF encoders, whose input factor is truncated by pivoting."""

    @classmethod
    def setUpClass(cls):
        """Sample the toy dataset and build the blocks once."""
        cls.toy = gen_gaussian_toy(200, seed=0)
        cls.cfg = _rbf_config(cls.toy)
        cls.blocks = solver.PencilBlocks.from_dataset(cls.toy, cls.cfg)

    def test_truncated_factor(self):
        """The pivoted factor of the input kernel has fewer columns than samples."""
        self.assertLess(self.blocks.dim, self.toy.n)
        self.assertEqual(self.blocks.support.shape, (self.blocks.dim, 4))

    def test_encode_training_points(self):
        """Encoding the training inputs gives back ``L_X U_r``."""
        for lambda_ in (0.0, 0.3, 0.7, 0.99):
            with self.subTest(lambda_=lambda_):
                model = solver.fit_encoder(self.toy, self.cfg, lambda_, 1e-3, blocks=self.blocks)
                z = model.encode(self.toy.x)
                assert_allclose(z, self.blocks.factor_x @ model.directions, rtol=0.0, atol=1e-8)
                pivoted = kernel_factor(self.toy.x, self.cfg.x, self.cfg.tol).factor
                scale = max(1.0, float(np.max(np.abs(z))))
                assert_allclose(z, pivoted @ model.directions, rtol=0.0, atol=1e-6 * scale)

    def test_constraint(self):
        """``Cov(Z) + gamma Theta K_X Theta^T`` is the identity."""
        for lambda_, gamma in ((0.0, 1e-3), (0.3, 1e-3), (0.7, 1e-2), (0.99, 1e-3)):
            with self.subTest(lambda_=lambda_, gamma=gamma):
                model = solver.fit_encoder(self.toy, self.cfg, lambda_, gamma, blocks=self.blocks)
                z = model.encode(self.toy.x)
                centered = z - z.mean(axis=0)
                theta = _full_theta(model, self.cfg, self.toy.x)
                gram_x = gram_matrix(self.toy.x, self.cfg.x)
                metric = centered.T @ centered / self.toy.n + gamma * theta @ gram_x @ theta.T
                assert_allclose(metric, np.eye(model.r), rtol=0.0, atol=1e-6)

    def test_objective_identity(self):
        """The attained objective is the sum of the kept eigenvalues on random datasets."""
        for seed in range(10):
            data = gen_gaussian_toy(80, seed=100 + seed)
            cfg = _rbf_config(data)
            blocks = solver.PencilBlocks.from_dataset(data, cfg)
            factor_y, factor_s = kernel_factor(data.y, cfg.y), kernel_factor(data.s, cfg.s)
            for lambda_ in (0.0, 0.25, 0.5, 0.75, 0.99):
                with self.subTest(seed=seed, lambda_=lambda_):
                    model = solver.fit_encoder(data, cfg, lambda_, 1e-3, blocks=blocks)
                    z = model.encode(data.x)
                    attained = (1.0 - lambda_) * dep_emp_codes(
                        z, factor_y
                    ) - lambda_ * dep_emp_codes(z, factor_s)
                    expected = float(np.sum(model.eigenvalues[: model.r]))
                    self.assertAlmostEqual(
                        attained, expected, delta=1e-6 * max(abs(expected), 1e-12)
                    )

    def test_spectrum_decreases(self):
        """Every eigenvalue of the pencil is non-increasing in lambda."""
        grid = np.linspace(0.0, solver.LAMBDA_MAX, 8)
        spectra = np.array(
            [solver.solve_pencil(self.blocks.pencil(lambda_, 1e-3)).eigenvalues for lambda_ in grid]
        )
        slack = 1e-10 * float(np.max(np.abs(spectra)))
        self.assertTrue(np.all(np.diff(spectra, axis=0) <= slack))

    def test_full_invariance(self):
        """Close to ``lambda = 1`` the kept directions carry no ``Dep(Z, S)``."""
        model = solver.fit_encoder(self.toy, self.cfg, solver.LAMBDA_MAX, 1e-3, blocks=self.blocks)
        z = model.encode(self.toy.x)
        self.assertLessEqual(dep_emp_codes(z, kernel_factor(self.toy.s, self.cfg.s)), 1e-6)

    def test_json_restore(self):
        """A restored exact encoder reproduces the training representation."""
        model = solver.fit_encoder(self.toy, self.cfg, 0.5, 1e-3, blocks=self.blocks)
        restored = solver.EncoderModel.from_json(model.to_json())
        assert_array_equal(restored.encode(self.toy.x), model.encode(self.toy.x))
        assert_array_equal(restored.support, self.blocks.support)


class EncoderModelJsonTestCase(TestCase):
    """Tests for :meth:`kerninv.solver.EncoderModel.to_json` and ``from_json``."""

    @classmethod
    def setUpClass(cls):
        """Fit one encoder."""
        cls.toy = gen_gaussian_toy(60, seed=1)
        cls.model = solver.fit_encoder(cls.toy, _linear_config(), 0.2, 1e-3)

    def test_restore(self):
        """A restored model encodes exactly like the original."""
        restored = solver.EncoderModel.from_json(self.model.to_json())
        assert_array_equal(restored.theta, self.model.theta)
        assert_array_equal(restored.encode(self.toy.x), self.model.encode(self.toy.x))
        self.assertEqual(restored.objective, self.model.objective)
        self.assertEqual(restored.spec_x, self.model.spec_x)

    def test_incompatible_version(self):
        """Assert that another major version or garbage is refused."""
        for version in ('2.0', 'not a version'):
            attrs = self.model.to_json_dict()
            attrs['format_version'] = version
            with self.subTest(version=version), self.assertRaises(ModelFormatError):
                solver.EncoderModel.from_json(json.dumps(attrs))

    def test_compatible_version(self):
        """A newer minor version is accepted."""
        attrs = self.model.to_json_dict()
        attrs['format_version'] = '1.7'
        self.assertEqual(solver.EncoderModel.from_json(attrs).r, self.model.r)

    def test_missing_key(self):
        """Assert that an incomplete document is refused."""
        attrs = self.model.to_json_dict()
        del attrs['directions']
        with self.assertRaises(ModelFormatError):
            solver.EncoderModel.from_json(attrs)

    def test_read_only(self):
        """Assert that the coefficients cannot be modified in place."""
        with self.assertRaises(ValueError):
            self.model.directions[0, 0] = 1.0
