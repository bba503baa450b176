"""Closed-form optimal encoders from a generalized eigenvalue problem.

For a trade-off parameter ``0 <= lambda < 1`` and a regularization ``gamma``,
the encoder that maximizes

    J(Z) = (1 - lambda) Dep(Z, Y) - lambda Dep(Z, S)

over all encoders whose regularized covariance is the identity is spanned by
the leading eigenvectors of the pencil ``B u = tau C u`` with

    B = (1/n^2) L_X^T ((1 - lambda) H K_Y H - lambda H K_S H) L_X
    C = (1/n) L_X^T H L_X + gamma I

``B`` carries the ``1/n^2`` of the dependence estimator, so the sum of the
retained eigenvalues is the attained objective. Every eigenvalue that is not
negative improves it, which fixes the optimal dimensionality.

The products with ``K_Y`` and ``K_S`` are never formed: ``H K_Y H`` is
replaced by ``(H L_Y)(H L_Y)^T`` and the ``d x q`` products
``L_X^T H L_Y`` are computed first, so memory stays at ``O(n max(d, q))``.

"""

import json
import logging

import numpy as np
from packaging.version import InvalidVersion, Version, parse
import scipy.linalg

from kerninv.kernels import (
    CHOLESKY_TOL,
    DimensionMismatchError,
    KernelSpec,
    center_factor,
    decode_array,
    encode_array,
    kernel_factor,
    pivot_features,
)
from kerninv.rff import RffProjection, feature_matrix, sample_projection

logger = logging.getLogger(__name__)

#: Written into every serialized model. Readers accept the same major version.
FORMAT_VERSION = '1.0'

#: The largest admissible lambda.
LAMBDA_MAX = 1.0 - 1e-6

#: Tolerance of the eigenvalue sign test in :func:`optimal_dim`, relative to
#: the largest eigenvalue magnitude.
EIGEN_SIGN_TOL = 1e-9


class SolverError(Exception):
    """Indicates that an encoder could not be fitted or used."""


class PencilError(SolverError):
    """Indicates that the arguments of a pencil are invalid."""


class SingularPencilError(SolverError):
    """Indicates that the right-hand operator is not numerically positive definite."""


class ModelFormatError(SolverError):
    """Indicates that a serialized model cannot be read."""


class KernelConfig:
    """The kernels of a fit.

    :param x: :class:`kerninv.kernels.KernelSpec` of the encoder inputs.
    :param y: :class:`kerninv.kernels.KernelSpec` of the target.
    :param s: :class:`kerninv.kernels.KernelSpec` of the semantic attribute.
    :param rff_dim: ``None`` to factor ``K_X`` exactly, or the number of random
        Fourier features approximating it. ``x`` must then be an RBF kernel.
    :param rff_seed: Seed of the random features.
    :param tol: Pivot truncation of the Cholesky factors.
    """

    def __init__(self, x, y, s, rff_dim=None, rff_seed=0, tol=CHOLESKY_TOL):
        if rff_dim is not None:
            if x.family != 'rbf-gaussian':
                raise PencilError(
                    'Random Fourier features approximate rbf-gaussian kernels only, '
                    f'not {x.family}.'
                )
            if int(rff_dim) < 1:
                raise PencilError(f'rff_dim must be a positive integer, got {rff_dim!r}.')
            rff_dim = int(rff_dim)
        self.x = x
        self.y = y
        self.s = s
        self.rff_dim = rff_dim
        self.rff_seed = int(rff_seed)
        self.tol = float(tol)

    def __repr__(self):
        """Return a string representation of the object."""
        kv_pairs = ', '.join(f'{key}={value!r}' for key, value in vars(self).items())
        return f'{self.__module__}.{type(self).__name__}({kv_pairs})'

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        return {
            'x': self.x.to_json_dict(),
            'y': self.y.to_json_dict(),
            's': self.s.to_json_dict(),
            'rff_dim': self.rff_dim,
            'rff_seed': self.rff_seed,
            'tol': self.tol,
        }

    @classmethod
    def from_json_dict(cls, attrs):
        """Build a config from the output of :meth:`to_json_dict`."""
        return cls(
            KernelSpec.from_json_dict(attrs['x']),
            KernelSpec.from_json_dict(attrs['y']),
            KernelSpec.from_json_dict(attrs['s']),
            attrs.get('rff_dim'),
            attrs.get('rff_seed', 0),
            attrs.get('tol', CHOLESKY_TOL),
        )


class EigenPencil:
    """The pair ``(B, C)`` of a generalized eigenvalue problem.

    :param b: A symmetric ``d x d`` array.
    :param c: A symmetric positive definite ``d x d`` array.
    :param lambda_: The trade-off parameter, in ``[0, 1)``.
    :param gamma: The regularization, a positive float.
    :param n: The number of samples the operators were built from.
    :raises kerninv.solver.PencilError: If the arguments are inconsistent.
    """

    def __init__(self, b, c, lambda_, gamma, n):
        b = np.asarray(b, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape != c.shape:
            raise PencilError(
                f'B and C must be square and of equal shape, got {b.shape} and {c.shape}.'
            )
        _check_lambda_gamma(lambda_, gamma)
        scale = max(1.0, float(np.abs(b).max())) if b.size else 1.0
        if not np.allclose(b, b.T, rtol=0.0, atol=1e-9 * scale):
            raise PencilError('The left operator B is not symmetric.')
        self.b = b
        self.c = c
        self.lambda_ = float(lambda_)
        self.gamma = float(gamma)
        self.n = int(n)

    @property
    def dim(self):
        """Return ``d``."""
        return self.b.shape[0]

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(dim={self.dim}, '
            f'lambda_={self.lambda_!r}, gamma={self.gamma!r}, n={self.n})'
        )


class EigenSolution:
    """Eigenvalues in descending order and their ``C``-orthonormal eigenvectors.

    :param eigenvalues: A ``d`` vector.
    :param eigenvectors: A ``d x d`` array whose columns are the eigenvectors.
    """

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        self.eigenvectors = np.asarray(eigenvectors, dtype=np.float64)

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}'
            f'(eigenvalues={np.array2string(self.eigenvalues[:4], precision=4)}...)'
        )


def check_format_version(found, expected):
    """Raise :class:`ModelFormatError` unless ``found`` has the major version of ``expected``."""
    try:
        version = parse(str(found))
    except InvalidVersion as err:
        raise ModelFormatError(f'Unreadable format version {found!r}.') from err
    if not isinstance(version, Version) or version.major != parse(expected).major:
        raise ModelFormatError(f'Format version {found} is not compatible with {expected}.')


def _check_lambda_gamma(lambda_, gamma):
    """Raise :class:`PencilError` unless ``0 <= lambda_ < 1`` and ``gamma > 0``."""
    if not 0.0 <= lambda_ < 1.0:
        raise PencilError(f'lambda must lie in [0, 1), got {lambda_!r}.')
    if not gamma > 0.0:
        raise PencilError(f'gamma must be positive, got {gamma!r}.')


class PencilBlocks:
    """The parts of a pencil that do not depend on ``lambda`` or ``gamma``.

    ``B`` is affine in ``lambda`` and ``C`` is affine in ``gamma``, so the three
    ``d x d`` blocks below are computed once and every
    :meth:`pencil` call afterwards costs ``O(d^2)``:

    * ``target = (1/n^2) (L_X^T H L_Y)(L_X^T H L_Y)^T``
    * ``semantic = (1/n^2) (L_X^T H L_S)(L_X^T H L_S)^T``
    * ``covariance = (1/n) (H L_X)^T (H L_X)``

    :param factor_x: ``n x d`` factor of ``K_X`` (array or ``GramFactor``).
    :param factor_y: ``n x q_Y`` factor of ``K_Y``.
    :param factor_s: ``n x q_S`` factor of ``K_S``.
    :raises kerninv.solver.PencilError: If the row counts differ.
    """

    def __init__(self, factor_x, factor_y, factor_s):
        arrays = [
            np.asarray(getattr(factor, 'factor', factor), dtype=np.float64)
            for factor in (factor_x, factor_y, factor_s)
        ]
        rows = {array.shape[0] for array in arrays}
        if len(rows) != 1:
            raise PencilError(
                'The factors of X, Y and S must have the same number of rows, got '
                f'{[array.shape[0] for array in arrays]}.'
            )
        self.factor_x, factor_y, factor_s = arrays
        self.n = self.factor_x.shape[0]
        if self.n == 0:
            raise PencilError('Cannot build a pencil from zero samples.')
        centered_x = center_factor(self.factor_x)
        cross_y = centered_x.T @ factor_y
        cross_s = centered_x.T @ factor_s
        self.target = _symmetrize(cross_y @ cross_y.T) / self.n**2
        self.semantic = _symmetrize(cross_s @ cross_s.T) / self.n**2
        self.covariance = _symmetrize(centered_x.T @ centered_x) / self.n
        self.projection = None
        self.support = None
        self.lower = None
        logger.debug(
            'Pencil blocks of size %s from %s samples (Y rank %s, S rank %s).',
            self.dim,
            self.n,
            factor_y.shape[1],
            factor_s.shape[1],
        )

    @property
    def dim(self):
        """Return ``d``, the rank of the encoder-side factor."""
        return self.factor_x.shape[1]

    def pencil(self, lambda_, gamma):
        """Assemble the pencil for one ``(lambda, gamma)`` pair.

        :returns: An :class:`EigenPencil`.
        :raises kerninv.solver.PencilError: If ``lambda_`` is not in ``[0, 1)``
            or ``gamma`` is not positive.
        """
        _check_lambda_gamma(lambda_, gamma)
        b = (1.0 - lambda_) * self.target - lambda_ * self.semantic
        c = self.covariance + gamma * np.eye(self.dim)
        return EigenPencil(_symmetrize(b), _symmetrize(c), lambda_, gamma, self.n)

    @classmethod
    def from_dataset(cls, dataset, kernel_cfg):
        """Factor the kernels of ``dataset`` and build the blocks.

        The encoder side is factored exactly, or replaced with random Fourier
        features when ``kernel_cfg.rff_dim`` is set. The target and attribute
        sides are always factored exactly.

        :param dataset: Anything with ``x``, ``y`` and ``s`` arrays.
        :param kernel_cfg: A :class:`KernelConfig`.
        :raises kerninv.solver.SolverError: If the dataset is empty.
        """
        x = np.asarray(dataset.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise SolverError('Cannot fit an encoder on an empty dataset.')
        projection = support = lower = None
        if kernel_cfg.rff_dim is None:
            # Rebuilt through the pivots so that encoding the training points
            # repeats the same arithmetic.
            pivoted = kernel_factor(x, kernel_cfg.x, kernel_cfg.tol)
            support = x[pivoted.pivots]
            lower = pivoted.factor[pivoted.pivots]
            factor_x = pivot_features(x, support, lower, kernel_cfg.x)
        else:
            projection = sample_projection(
                kernel_cfg.x.bandwidth, kernel_cfg.rff_dim, x.shape[1], kernel_cfg.rff_seed
            )
            factor_x = feature_matrix(x, projection)
        factor_y = kernel_factor(dataset.y, kernel_cfg.y, kernel_cfg.tol)
        factor_s = kernel_factor(dataset.s, kernel_cfg.s, kernel_cfg.tol)
        blocks = cls(factor_x, factor_y, factor_s)
        blocks.projection = projection
        blocks.support = support
        blocks.lower = lower
        return blocks


def _symmetrize(matrix):
    """Return ``(M + M^T) / 2``."""
    return (matrix + matrix.T) / 2.0


def build_pencil(factor_x, factor_y, factor_s, lambda_, gamma):
    """Assemble ``B`` and ``C`` from the three Gram factors.

    :param factor_x: ``n x d`` factor of ``K_X``.
    :param factor_y: ``n x q_Y`` factor of ``K_Y``.
    :param factor_s: ``n x q_S`` factor of ``K_S``.
    :param lambda_: A float in ``[0, 1)``.
    :param gamma: A positive float.
    :returns: An :class:`EigenPencil`.
    :raises kerninv.solver.PencilError: On a row-count mismatch or invalid
        ``lambda_`` / ``gamma``.
    """
    _check_lambda_gamma(lambda_, gamma)
    return PencilBlocks(factor_x, factor_y, factor_s).pencil(lambda_, gamma)


def solve_pencil(pencil):
    """Solve ``B u = tau C u``.

    ``C = R^T R`` is factored with Cholesky and the symmetric problem
    ``R^-T B R^-1 v = tau v`` is solved instead; ``u = R^-1 v``. Eigenvalues
    come out in descending order (ties keep the solver's order), eigenvectors
    are ``C``-orthonormal and the sign of each is fixed so that its entry of
    largest magnitude is positive.

    :param pencil: An :class:`EigenPencil`.
    :returns: An :class:`EigenSolution`.
    :raises kerninv.solver.SingularPencilError: If ``C`` is not numerically
        positive definite.
    """
    if pencil.dim == 0:
        return EigenSolution(np.zeros(0), np.zeros((0, 0)))
    try:
        upper = scipy.linalg.cholesky(pencil.c, lower=False)
    except np.linalg.LinAlgError as err:
        raise SingularPencilError(
            f'C is not positive definite for gamma={pencil.gamma}; increase gamma.'
        ) from err
    if float(np.min(np.abs(np.diag(upper)))) ** 2 < 1e-3 * pencil.gamma:
        raise SingularPencilError(
            f'C is numerically singular for gamma={pencil.gamma}; increase gamma.'
        )
    half = scipy.linalg.solve_triangular(upper, pencil.b, trans='T')
    reduced = scipy.linalg.solve_triangular(upper, half.T, trans='T')
    values, vectors = scipy.linalg.eigh(_symmetrize(reduced))
    order = np.argsort(-values, kind='stable')
    values = values[order]
    vectors = scipy.linalg.solve_triangular(upper, vectors[:, order])
    peaks = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peaks, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return EigenSolution(values, vectors * signs)


def optimal_dim(eigenvalues):
    """Count the eigenvalues that are not negative.

    An eigenvalue counts when it is at least ``-1e-9 * max(|tau_1|, |tau_d|)``.
    The eigenvalues are dependence values, usually far below 1, so the
    tolerance is relative to their magnitude only.

    :param eigenvalues: A vector sorted in descending order.
    :returns: A non-negative integer.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.size == 0:
        return 0
    threshold = -EIGEN_SIGN_TOL * float(np.max(np.abs(eigenvalues)))
    return int(np.count_nonzero(eigenvalues >= threshold))


class EncoderModel:
    """A fitted encoder ``f(x) = Theta k(x)``.

    The encoder is kept as ``f(x) = U_r^T phi(x)`` where ``U_r`` holds the
    ``r`` leading eigenvectors of the pencil and ``phi`` is the feature map the
    pencil was built on. Exactly one of ``support`` and ``projection`` is given:

    * With an exact kernel, ``phi(x) = lower^-1 k(support, x)`` is the pivoted
      Cholesky factor extended to ``x`` by :func:`kerninv.kernels.pivot_features`.
      ``support`` holds the pivot rows of the training inputs and ``lower`` is
      the factor restricted to them.
    * With random features, ``phi`` is the feature map of ``projection``.

    :param directions: The ``m x r`` matrix ``U_r``.
    :param spec_x: :class:`kerninv.kernels.KernelSpec` of the inputs.
    :param lambda_: The trade-off parameter of the fit.
    :param gamma: The regularization of the fit.
    :param eigenvalues: The full spectrum of the pencil, descending.
    :param support: The ``m x p`` pivot points (exact kernel).
    :param lower: The ``m x m`` lower triangular factor of the kernel on
        ``support`` (exact kernel).
    :param projection: A :class:`kerninv.rff.RffProjection` (random features).
    :param objective: The attained objective. Defaults to the sum of the ``r``
        leading eigenvalues.
    """

    def __init__(
        self,
        directions,
        spec_x,
        lambda_,
        gamma,
        eigenvalues,
        support=None,
        lower=None,
        projection=None,
        objective=None,
    ):
        if (support is None) == (projection is None):
            raise SolverError('An encoder needs either support points or a projection.')
        directions = np.asarray(directions, dtype=np.float64)
        eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        if support is not None:
            support = np.asarray(support, dtype=np.float64).reshape(-1, spec_x.input_dim)
            lower = np.asarray(lower, dtype=np.float64)
            width = support.shape[0]
            if lower.shape != (width, width):
                raise SolverError(
                    f'The factor of {width} support points must be {width} x {width}, '
                    f'got {lower.shape}.'
                )
        else:
            width = projection.feature_dim
        if directions.ndim != 2 or directions.shape[0] != width:
            raise SolverError(f'Directions of shape {directions.shape} do not have {width} rows.')
        for array in (directions, eigenvalues, support, lower):
            if array is not None:
                array.setflags(write=False)
        self.directions = directions
        self.spec_x = spec_x
        self.lambda_ = float(lambda_)
        self.gamma = float(gamma)
        self.eigenvalues = eigenvalues
        self.support = support
        self.lower = lower
        self.projection = projection
        if objective is None:
            objective = float(np.sum(eigenvalues[: self.r]))
        self.objective = float(objective)

    @property
    def r(self):
        """Return the embedding dimensionality."""
        return self.directions.shape[1]

    @property
    def input_dim(self):
        """Return the dimension of the inputs the encoder accepts."""
        return self.spec_x.input_dim

    @property
    def theta(self):
        """Return the ``r x m`` coefficients on ``k(support, x)`` or on the features.

        With an exact kernel ``Theta = U_r^T lower^-1``, the minimum-norm
        coefficients on the training points with every non-pivot column
        dropped, since those are zero.
        """
        if self.projection is not None:
            return self.directions.T.copy()
        if self.directions.size == 0:
            return np.zeros((self.r, self.support.shape[0]))
        return scipy.linalg.solve_triangular(self.lower, self.directions, lower=True, trans='T').T

    def __repr__(self):
        """Return a string representation of the object."""
        kind = 'exact' if self.projection is None else 'rff'
        return (
            f'{self.__module__}.{type(self).__name__}(kind={kind!r}, r={self.r}, '
            f'lambda_={self.lambda_!r}, gamma={self.gamma!r}, objective={self.objective!r})'
        )

    def features(self, points):
        """Return ``phi(points)``, the ``m x d`` features the directions act on."""
        if self.projection is None:
            return pivot_features(points, self.support, self.lower, self.spec_x)
        return self.projection.features(points)

    def encode(self, points):
        """Map ``points`` to the representation space.

        :param points: An ``m x p`` array.
        :returns: An ``m x r`` array.
        :raises kerninv.kernels.DimensionMismatchError: If ``p`` differs from
            the training inputs.
        """
        return encode(self, points)

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        attrs = {
            'format_version': FORMAT_VERSION,
            'kind': 'exact' if self.projection is None else 'rff',
            'spec_x': self.spec_x.to_json_dict(),
            'lambda': self.lambda_,
            'gamma': self.gamma,
            'r': self.r,
            'objective': self.objective,
            'eigenvalues': encode_array(self.eigenvalues),
            'directions': encode_array(self.directions),
        }
        if self.projection is None:
            attrs['support'] = encode_array(self.support)
            attrs['lower'] = encode_array(self.lower)
        else:
            attrs['projection'] = self.projection.to_json_dict()
        return attrs

    def to_json(self):
        """Serialize the model as a JSON document."""
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, document):
        """Read a model written by :meth:`to_json`.

        :param document: A JSON string or an already decoded dict.
        :raises kerninv.solver.ModelFormatError: If the document is malformed
            or was written by an incompatible version.
        """
        try:
            attrs = json.loads(document) if isinstance(document, str | bytes) else document
            check_format_version(attrs['format_version'], FORMAT_VERSION)
            support = lower = projection = None
            if attrs['kind'] == 'exact':
                support = decode_array(attrs['support'])
                lower = decode_array(attrs['lower'])
            else:
                projection = RffProjection.from_json_dict(attrs['projection'])
            return cls(
                decode_array(attrs['directions']),
                KernelSpec.from_json_dict(attrs['spec_x']),
                attrs['lambda'],
                attrs['gamma'],
                decode_array(attrs['eigenvalues']),
                support=support,
                lower=lower,
                projection=projection,
                objective=attrs['objective'],
            )
        except (KeyError, TypeError, ValueError, SolverError) as err:
            raise ModelFormatError(f'Cannot read the model: {err}') from err


def fit_encoder(dataset, kernel_cfg, lambda_, gamma, r=None, blocks=None):
    """Fit the optimal encoder for one ``(lambda, gamma)`` pair.

    The encoder keeps the ``r`` leading eigenvectors and applies them to the
    features the pencil was built on, so encoding the training inputs gives
    back ``L_X U_r`` exactly. With the exact kernel the coefficients act on the
    pivot rows of the training inputs only; see :attr:`EncoderModel.theta`.

    :param dataset: Anything with ``x``, ``y`` and ``s`` arrays.
    :param kernel_cfg: A :class:`KernelConfig`.
    :param lambda_: A float in ``[0, 1)``.
    :param gamma: A positive float.
    :param r: The embedding dimensionality. Defaults to :func:`optimal_dim`.
    :param blocks: Optional :class:`PencilBlocks` already built for
        ``dataset`` and ``kernel_cfg``.
    :returns: An :class:`EncoderModel`.
    :raises kerninv.solver.SolverError: If the dataset is empty or ``r``
        exceeds the rank ``d`` of the encoder-side factor.
    """
    if blocks is None:
        blocks = PencilBlocks.from_dataset(dataset, kernel_cfg)
    solution = solve_pencil(blocks.pencil(lambda_, gamma))
    if r is None:
        r = optimal_dim(solution.eigenvalues)
    if not 0 <= r <= blocks.dim:
        raise SolverError(f'r={r} must lie between 0 and the factor rank d={blocks.dim}.')
    if r == 0:
        logger.warning('No eigenvalue is non-negative at lambda=%s; the encoder is empty.', lambda_)
    model = EncoderModel(
        solution.eigenvectors[:, :r],
        kernel_cfg.x,
        lambda_,
        gamma,
        solution.eigenvalues,
        support=blocks.support,
        lower=blocks.lower,
        projection=blocks.projection,
    )
    logger.debug('Fitted %r.', model)
    return model


def encode(model, points):
    """Apply a fitted encoder to new points.

    A 1-D array holds one point, or one value per point when the inputs are
    scalars.

    :param model: An :class:`EncoderModel`.
    :param points: An ``m x p`` array.
    :returns: An ``m x r`` array; ``m x 0`` for an empty encoder.
    :raises kerninv.kernels.DimensionMismatchError: If ``p`` differs from
        the training inputs.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1 and points.size % model.input_dim == 0:
        points = points.reshape(-1, model.input_dim)
    if points.ndim != 2 or points.shape[1] != model.input_dim:
        raise DimensionMismatchError(
            f'The data has dimension {points.shape[-1] if points.ndim else 0} but the model '
            f'expects dimension {model.input_dim}.'
        )
    if model.r == 0:
        return np.zeros((points.shape[0], 0))
    return model.features(points) @ model.directions
