"""Kernel evaluation, Gram matrices and their low-rank factors.

Three kernel families are supported, each described by a
:class:`kerninv.kernels.KernelSpec`:

``rbf-gaussian``
    ``k(x, x') = exp(-||x - x'||^2 / (2 sigma^2))``. The bandwidth is usually
    picked with :func:`median_bandwidth`.
``linear``
    ``k(x, x') = <x, x'>``.
``one-hot-delta``
    ``k(s, s') = 1`` iff ``s == s'``. Inputs are integer category codes and the
    kernel is evaluated as the linear kernel on their one-hot encodings.

Every consumer in this package works with a factor ``L`` such that
``L L^T`` reproduces the Gram matrix, never with the Gram matrix itself when it
can be avoided. :func:`cholesky_factor` factors an explicit matrix;
:func:`kernel_factor` builds the same factor while only ever evaluating the
kernel diagonal and the pivot columns, and :func:`pivot_features` extends that
factor to points outside the training set.

"""

import base64
import logging

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist, pdist

logger = logging.getLogger(__name__)

#: Kernel families understood by :class:`KernelSpec`.
FAMILIES = ('rbf-gaussian', 'linear', 'one-hot-delta')

#: Pivots below ``CHOLESKY_TOL * max(diag)`` are truncated.
CHOLESKY_TOL = 1e-9

#: Acceptance threshold for ``||L L^T - K||_max`` of an exact factor.
RECONSTRUCTION_TOL = 1e-7

#: Returned by :func:`median_bandwidth` when all points coincide.
FALLBACK_BANDWIDTH = 1.0

#: Source tags of :class:`GramFactor`.
EXACT_CHOLESKY = 'exact-cholesky'
RFF_DIRECT = 'rff-direct'


class KernelError(ValueError):
    """Indicates that a kernel could not be evaluated or factored."""


class DimensionMismatchError(KernelError):
    """Indicates that points do not have the dimension a kernel expects."""


class NonFiniteInputError(KernelError):
    """Indicates that an input contains NaN or infinite entries."""


class NotSymmetricError(KernelError):
    """Indicates that a matrix that should be symmetric is not."""


class NotPositiveSemidefiniteError(KernelError):
    """Indicates that a matrix that should be PSD has a negative eigenvalue."""


class KernelSpec:
    """A kernel family together with its parameters.

    :param family: One of :data:`FAMILIES`.
    :param input_dim: A positive integer. The number of columns of the points
        this kernel is evaluated on. Always 1 for ``one-hot-delta``.
    :param bandwidth: A positive float. Required for ``rbf-gaussian``, ignored
        otherwise.
    :param categories: A positive integer. The number of categories of a
        ``one-hot-delta`` kernel.
    :raises kerninv.kernels.KernelError: If the parameters do not describe a
        valid kernel.
    """

    def __init__(self, family, input_dim, bandwidth=None, categories=None):
        if family not in FAMILIES:
            raise KernelError(f'Unknown kernel family {family!r}. Valid families are {FAMILIES}.')
        if int(input_dim) < 1:
            raise KernelError(f'input_dim must be a positive integer, got {input_dim!r}.')
        self.family = family
        self.input_dim = int(input_dim)
        if family == 'rbf-gaussian':
            if bandwidth is None or not np.isfinite(bandwidth) or bandwidth <= 0:
                raise KernelError(
                    f'An rbf-gaussian kernel needs a positive bandwidth, got {bandwidth!r}.'
                )
            self.bandwidth = float(bandwidth)
        if family == 'one-hot-delta':
            if self.input_dim != 1:
                raise KernelError('A one-hot-delta kernel takes a single column of category codes.')
            if categories is None or int(categories) < 1:
                raise KernelError(
                    f'A one-hot-delta kernel needs a positive category count, got {categories!r}.'
                )
            self.categories = int(categories)

    def __repr__(self):
        """Return a string representation of the object."""
        kv_pairs = ', '.join(f'{key}={value!r}' for key, value in vars(self).items())
        return f'{self.__module__}.{type(self).__name__}({kv_pairs})'

    def __eq__(self, other):
        """Compare two specs attribute by attribute."""
        return isinstance(other, KernelSpec) and vars(self) == vars(other)

    def __hash__(self):
        """Return a hash based on the family and its parameters."""
        return hash(tuple(sorted(vars(self).items())))

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        return dict(vars(self))

    @classmethod
    def from_json_dict(cls, attrs):
        """Build a spec from the output of :meth:`to_json_dict`."""
        return cls(**attrs)


class GramFactor:
    """A full-column-rank factor ``L`` with ``L L^T`` approximating a Gram matrix.

    :param factor: An ``n x d`` array.
    :param source: :data:`EXACT_CHOLESKY` or :data:`RFF_DIRECT`.
    :param pivots: The rows chosen by a pivoted Cholesky, in pivot order.
        ``factor[pivots]`` is then lower triangular and
        ``factor = K[:, pivots] factor[pivots]^-T``.
    """

    def __init__(self, factor, source=EXACT_CHOLESKY, pivots=None):
        factor = np.asarray(factor, dtype=np.float64)
        if factor.ndim != 2:
            raise KernelError(f'A factor must be a 2-D array, got shape {factor.shape}.')
        factor.setflags(write=False)
        if pivots is not None:
            pivots = np.asarray(pivots, dtype=np.int64)
            if pivots.shape != (factor.shape[1],):
                raise KernelError(
                    f'A factor of rank {factor.shape[1]} needs as many pivots, got {pivots.size}.'
                )
            pivots.setflags(write=False)
        self.factor = factor
        self.source = source
        self.pivots = pivots

    @property
    def rank(self):
        """Return the number of columns, i.e. the numerical rank."""
        return self.factor.shape[1]

    @property
    def n(self):
        """Return the number of rows (samples)."""
        return self.factor.shape[0]

    def gram(self):
        """Return ``L L^T``. Materialises an ``n x n`` matrix."""
        return self.factor @ self.factor.T

    def centered(self):
        """Return ``H L`` as computed by :func:`center_factor`."""
        return center_factor(self.factor)

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}'
            f'(n={self.n}, rank={self.rank}, source={self.source!r})'
        )


def encode_array(array):
    """Encode a float64 array as ``{'shape': [...], 'data': <base64>}``.

    The raw little-endian bytes are stored, so decoding is exact.
    """
    array = np.ascontiguousarray(array, dtype='<f8')
    return {'shape': list(array.shape), 'data': base64.b64encode(array.tobytes()).decode('ascii')}


def decode_array(payload):
    """Invert :func:`encode_array`."""
    raw = base64.b64decode(payload['data'].encode('ascii'))
    return np.frombuffer(raw, dtype='<f8').reshape(payload['shape']).astype(np.float64)


def _as_points(points, spec):
    """Return ``points`` as a finite 2-D float array that matches ``spec``."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2 or points.shape[0] < 1:
        raise DimensionMismatchError(f'Expected a non-empty n x p array, got shape {points.shape}.')
    if points.shape[1] != spec.input_dim:
        raise DimensionMismatchError(
            f'Points have dimension {points.shape[1]} but the {spec.family} kernel expects '
            f'dimension {spec.input_dim}.'
        )
    if not np.all(np.isfinite(points)):
        raise NonFiniteInputError('Kernel inputs must not contain NaN or infinite entries.')
    return points


def one_hot(codes, categories):
    """Encode integer category codes as a one-hot matrix.

    :param codes: An ``n`` vector (or ``n x 1`` array) of codes in
        ``[0, categories)``.
    :param categories: A positive integer.
    :returns: An ``n x categories`` float array.
    :raises kerninv.kernels.KernelError: If a code is not an integer in range.
    """
    codes = np.asarray(codes, dtype=np.float64).reshape(-1)
    as_int = codes.astype(np.int64)
    if np.any(as_int != codes) or np.any(as_int < 0) or np.any(as_int >= categories):
        raise KernelError(f'Category codes must be integers in [0, {categories}).')
    encoded = np.zeros((codes.shape[0], categories))
    encoded[np.arange(codes.shape[0]), as_int] = 1.0
    return encoded


def cross_gram(a, b, spec):
    """Evaluate the kernel between every row of ``a`` and every row of ``b``.

    :returns: An ``n_a x n_b`` array.
    """
    a = _as_points(a, spec)
    b = _as_points(b, spec)
    if spec.family == 'rbf-gaussian':
        sq_dists = cdist(a, b, 'sqeuclidean')
        return np.exp(-sq_dists / (2.0 * spec.bandwidth**2))
    if spec.family == 'linear':
        return a @ b.T
    return one_hot(a, spec.categories) @ one_hot(b, spec.categories).T


def gram_matrix(points, spec):
    """Assemble the Gram matrix ``K_ij = k(x_i, x_j)``.

    :param points: An ``n x p`` array with ``p == spec.input_dim``.
    :param spec: A :class:`KernelSpec`.
    :returns: A symmetric ``n x n`` array.
    :raises kerninv.kernels.DimensionMismatchError: If ``p`` is wrong.
    :raises kerninv.kernels.NonFiniteInputError: If an entry is not finite.
    """
    points = _as_points(points, spec)
    if spec.family == 'rbf-gaussian':
        gram = cross_gram(points, points, spec)
        np.fill_diagonal(gram, 1.0)
    else:
        gram = cross_gram(points, points, spec)
    return (gram + gram.T) / 2.0


def _kernel_diagonal(points, spec):
    """Return ``k(x_i, x_i)`` for every row."""
    if spec.family == 'rbf-gaussian':
        return np.ones(points.shape[0])
    if spec.family == 'linear':
        return np.einsum('ij,ij->i', points, points)
    return np.ones(points.shape[0])


def median_bandwidth(points, max_points=None, seed=0):
    """Pick an RBF bandwidth with the median heuristic.

    The bandwidth is the median of all ``n (n - 1) / 2`` pairwise Euclidean
    distances. If the median is zero (e.g. all points are identical),
    :data:`FALLBACK_BANDWIDTH` is returned and a warning is logged.

    :param points: An ``n x p`` array, ``n >= 2``.
    :param max_points: An integer or ``None``. If given and ``n`` exceeds it,
        the median is taken over a seeded random subsample of that many points.
    :param seed: Seed of the subsample.
    :returns: A positive float.
    :raises kerninv.kernels.KernelError: If fewer than two points are given.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.shape[0] < 2:
        raise KernelError(f'The median heuristic needs at least 2 points, got {points.shape[0]}.')
    if not np.all(np.isfinite(points)):
        raise NonFiniteInputError('Kernel inputs must not contain NaN or infinite entries.')
    if max_points is not None and points.shape[0] > max_points:
        rows = np.random.default_rng(seed).choice(points.shape[0], max_points, replace=False)
        points = points[np.sort(rows)]
    median = float(np.median(pdist(points, 'euclidean')))
    if median <= 0.0:
        logger.warning('All points coincide; falling back to bandwidth %s.', FALLBACK_BANDWIDTH)
        return FALLBACK_BANDWIDTH
    return median


def _pivoted_cholesky(diagonal, column, tol, max_rank):
    """Run a pivoted Cholesky factorization on an implicit PSD matrix.

    :param diagonal: The matrix diagonal, an ``n`` vector.
    :param column: A callable mapping a row index ``i`` to column ``i`` of the
        matrix.
    :param tol: Pivots below ``tol * max(diagonal)`` stop the factorization.
    :param max_rank: Upper bound on the number of columns.
    :returns: A tuple ``(L, pivots)``: an ``n x d`` array in original row
        order and the ``d`` pivot rows in the order they were chosen.
    """
    n = diagonal.shape[0]
    residual = diagonal.astype(np.float64).copy()
    scale = float(residual.max()) if n else 0.0
    limit = n if max_rank is None else min(n, max_rank)
    factor = np.zeros((n, limit))
    pivots = []
    if scale <= 0.0:
        return factor[:, :0], np.zeros(0, dtype=np.int64)
    while len(pivots) < limit:
        rank = len(pivots)
        pivot = int(np.argmax(residual))
        pivot_value = residual[pivot]
        if pivot_value <= tol * scale:
            break
        # Schur complement column, only against the columns built so far.
        col = column(pivot) - factor[:, :rank] @ factor[pivot, :rank]
        col /= np.sqrt(pivot_value)
        # Earlier pivot rows stay zero so that factor[pivots] is triangular.
        col[pivots] = 0.0
        col[pivot] = np.sqrt(pivot_value)
        factor[:, rank] = col
        residual -= col**2
        residual[pivot] = -np.inf
        pivots.append(pivot)
    return factor[:, : len(pivots)], np.asarray(pivots, dtype=np.int64)


def cholesky_factor(gram, tol=CHOLESKY_TOL, max_rank=None):
    """Factor an explicit PSD matrix with a rank-revealing pivoted Cholesky.

    :param gram: A symmetric ``n x n`` PSD array.
    :param tol: A positive float. Trailing pivots below ``tol`` times the
        largest diagonal entry are truncated, which fixes the rank ``d``.
    :param max_rank: An optional cap on ``d``.
    :returns: A :class:`GramFactor` with source :data:`EXACT_CHOLESKY`.
    :raises kerninv.kernels.NotSymmetricError: If ``gram`` is not symmetric
        within round-off.
    :raises kerninv.kernels.NotPositiveSemidefiniteError: If ``gram`` has an
        eigenvalue below ``-tol`` relative to its largest diagonal entry. When
        ``tol`` is below the round-off ``n eps`` of an ``n x n`` matrix, the
        round-off is the threshold instead.
    """
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimensionMismatchError(f'Expected a square matrix, got shape {gram.shape}.')
    if not np.all(np.isfinite(gram)):
        raise NonFiniteInputError('A Gram matrix must not contain NaN or infinite entries.')
    magnitude = max(1.0, float(np.abs(gram).max())) if gram.size else 1.0
    if not np.allclose(gram, gram.T, rtol=0.0, atol=1e-10 * magnitude):
        raise NotSymmetricError('The matrix to factor is not symmetric.')
    gram = (gram + gram.T) / 2.0
    diagonal = np.diag(gram).copy()
    scale = max(float(diagonal.max()), 0.0) if diagonal.size else 0.0
    threshold = max(tol, gram.shape[0] * np.finfo(np.float64).eps) * max(scale, 1.0)
    if diagonal.size and float(diagonal.min()) < -threshold:
        raise NotPositiveSemidefiniteError('The matrix has a negative diagonal entry.')
    factor, pivots = _pivoted_cholesky(diagonal, lambda i: gram[:, i].copy(), tol, max_rank)
    if max_rank is None or factor.shape[1] < max_rank:
        # Whatever the factorization left behind is the Schur complement; a
        # PSD input leaves a PSD remainder.
        remainder = gram - factor @ factor.T
        lowest = float(np.linalg.eigvalsh(remainder)[0]) if remainder.size else 0.0
        if lowest < -threshold:
            raise NotPositiveSemidefiniteError(
                f'The matrix has an eigenvalue of about {lowest:.3e}, below -{threshold:.3e}.'
            )
    logger.debug('Pivoted Cholesky of a %s matrix has rank %s.', gram.shape, factor.shape[1])
    return GramFactor(factor, EXACT_CHOLESKY, pivots)


def kernel_factor(points, spec, tol=CHOLESKY_TOL, max_rank=None):
    """Factor the Gram matrix of ``points`` without materialising it.

    Only the kernel diagonal and one column per pivot are evaluated, so memory
    stays at ``O(n d)``. The result matches
    ``cholesky_factor(gram_matrix(points, spec), tol)`` up to round-off.

    :param points: An ``n x p`` array.
    :param spec: A :class:`KernelSpec`.
    :param tol: See :func:`cholesky_factor`.
    :param max_rank: An optional cap on the rank (incomplete Cholesky).
    :returns: A :class:`GramFactor` with source :data:`EXACT_CHOLESKY`.
    """
    points = _as_points(points, spec)
    if spec.family == 'one-hot-delta':
        # The kernel is linear on one-hot codes, so factor those directly.
        points = one_hot(points, spec.categories)
        spec = KernelSpec('linear', spec.categories)
    diagonal = _kernel_diagonal(points, spec)

    def column(i):
        """Return column ``i`` of the Gram matrix."""
        return cross_gram(points, points[i : i + 1], spec)[:, 0]

    factor, pivots = _pivoted_cholesky(diagonal, column, tol, max_rank)
    logger.debug(
        'Lazy pivoted Cholesky of %s points under a %s kernel has rank %s.',
        points.shape[0],
        spec.family,
        factor.shape[1],
    )
    return GramFactor(factor, EXACT_CHOLESKY, pivots)


def pivot_features(points, support, lower, spec):
    """Evaluate the pivoted Cholesky factor at new points.

    With ``support`` the pivot rows of the training points and ``lower`` the
    factor restricted to them, the training factor is
    ``K(points, support) lower^-T``. The same map extends it to any points, so
    training points go through exactly the same arithmetic as new ones.

    :param points: An ``m x p`` array.
    :param support: The ``d x p`` pivot points.
    :param lower: The ``d x d`` lower triangular factor of ``K(support, support)``.
    :param spec: A :class:`KernelSpec`.
    :returns: An ``m x d`` array.
    """
    points = _as_points(points, spec)
    lower = np.asarray(lower, dtype=np.float64)
    if lower.shape[0] == 0:
        return np.zeros((points.shape[0], 0))
    kernel_cols = cross_gram(support, points, spec)
    return scipy.linalg.solve_triangular(lower, kernel_cols, lower=True).T


def center_factor(factor):
    """Return ``H M`` where ``H = I - (1/n) 1 1^T``, without forming ``H``.

    :param factor: An ``n x d`` array (or a :class:`GramFactor`).
    :returns: An ``n x d`` array whose columns sum to zero.
    """
    if isinstance(factor, GramFactor):
        factor = factor.factor
    factor = np.asarray(factor, dtype=np.float64)
    if factor.shape[0] == 0:
        return factor.copy()
    return factor - factor.mean(axis=0, keepdims=True)
