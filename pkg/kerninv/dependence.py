"""Statistical dependence measures between representations and attributes.

The central quantity is the empirical dependence

    Dep(Z, S) = (1/n^2) ||Theta K_X H L_S||_F^2

between an encoder output ``Z = Theta K_X`` and an attribute ``S`` whose Gram
matrix factors as ``L_S L_S^T``. It sums, over the encoder components, the
squared covariances with an orthonormal basis of the attribute's RKHS.
:func:`dep_emp_codes` computes it from the encoder outputs directly;
:func:`dep_emp` and :func:`dep_emp_rff` are the exact-kernel and
random-feature spellings.

The remaining measures are diagnostics: the biased HSIC estimator, the
regularized kernel canonical correlation (normalized to ``[0, 1]``), the
demographic parity violation of hard predictions, and a Monte-Carlo estimate of
the population dependence that serves as a reference in tests.

"""

import logging

import numpy as np

from kerninv.kernels import KernelSpec, center_factor, kernel_factor, median_bandwidth

logger = logging.getLogger(__name__)

#: Default ridge of :func:`kcc_emp`.
KCC_REG = 1e-3
#: Default truncation of the incomplete Cholesky factors used by :func:`kcc_emp`.
KCC_TOL = 1e-6


class DependenceError(ValueError):
    """Indicates that a dependence measure received inconsistent inputs."""


class DependenceReport:
    """Dependence of a representation on its target and semantic attributes.

    :param dep_zs: ``Dep(Z, S)``.
    :param dep_zy: ``Dep(Z, Y)``.
    :param hsic_zs: Optional biased HSIC between ``Z`` and ``S``.
    :param kcc_zs: Optional kernel canonical correlation between ``Z`` and ``S``.
    :param dpv: Optional demographic parity violation of the predictions.
    :raises kerninv.dependence.DependenceError: If a value is out of range.
    """

    def __init__(self, dep_zs, dep_zy, hsic_zs=None, kcc_zs=None, dpv=None):
        self.dep_zs = _non_negative('dep_zs', dep_zs)
        self.dep_zy = _non_negative('dep_zy', dep_zy)
        self.hsic_zs = _non_negative('hsic_zs', hsic_zs)
        self.kcc_zs = _non_negative('kcc_zs', kcc_zs)
        self.dpv = _non_negative('dpv', dpv)
        if self.kcc_zs is not None and self.kcc_zs > 1.0 + 1e-6:
            raise DependenceError(f'kcc_zs must be at most 1, got {self.kcc_zs}.')

    def __repr__(self):
        """Return a string representation of the object."""
        kv_pairs = ', '.join(f'{key}={value!r}' for key, value in self.to_json_dict().items())
        return f'{self.__module__}.{type(self).__name__}({kv_pairs})'

    def to_json_dict(self):
        """Return the populated fields as a dict."""
        return {key: value for key, value in vars(self).items() if value is not None}


def _non_negative(name, value):
    """Return ``value`` as a float, or ``None`` when it is ``None``."""
    if value is None:
        return None
    value = float(value)
    if value < 0:
        raise DependenceError(f'{name} must be non-negative, got {value}.')
    return value


def _factor_array(factor):
    """Return the array behind ``factor``, which may be a ``GramFactor``."""
    return np.asarray(getattr(factor, 'factor', factor), dtype=np.float64)


def dep_emp_codes(z, factor):
    """Return ``(1/n^2) ||Z^T H L||_F^2`` for encoder outputs ``z``.

    :param z: An ``n x r`` array of encoder outputs (``r`` may be 0).
    :param factor: An ``n x q`` Gram factor of the attribute.
    :returns: A non-negative float.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    factor = _factor_array(factor)
    if z.shape[0] != factor.shape[0]:
        raise DependenceError(
            f'Encoder outputs have {z.shape[0]} rows but the attribute factor has '
            f'{factor.shape[0]}.'
        )
    n = z.shape[0]
    if z.shape[1] == 0 or n == 0:
        return 0.0
    cross = z.T @ center_factor(factor)
    return float(np.sum(cross**2)) / n**2


def dep_emp(theta, gram_x, factor_s):
    """Return ``(1/n^2) ||Theta K_X H L_S||_F^2``.

    :param theta: An ``r x n`` coefficient matrix.
    :param gram_x: The ``n x n`` Gram matrix of the encoder inputs.
    :param factor_s: An ``n x q`` Gram factor of the attribute.
    :returns: A non-negative float; exactly 0 when ``theta`` is 0.
    :raises kerninv.dependence.DependenceError: If the shapes do not line up.
    """
    theta = np.asarray(theta, dtype=np.float64)
    gram_x = np.asarray(gram_x, dtype=np.float64)
    if theta.ndim != 2 or gram_x.shape != (theta.shape[1], theta.shape[1]):
        raise DependenceError(
            f'Theta of shape {theta.shape} does not match a Gram matrix of shape {gram_x.shape}.'
        )
    return dep_emp_codes((theta @ gram_x).T, factor_s)


def dep_emp_rff(theta_w, factor_x, factor_s):
    """Return ``(1/n^2) ||Theta_w L_X^T H L_S||_F^2`` in ``O(n d)`` memory.

    :param theta_w: An ``r x d`` encoder expressed on the features.
    :param factor_x: The ``n x d`` feature factor of the inputs.
    :param factor_s: An ``n x q`` Gram factor of the attribute.
    :returns: A non-negative float.
    """
    theta_w = np.asarray(theta_w, dtype=np.float64)
    factor_x = _factor_array(factor_x)
    if theta_w.ndim != 2 or theta_w.shape[1] != factor_x.shape[1]:
        raise DependenceError(
            f'An encoder of shape {theta_w.shape} does not match a feature factor of shape '
            f'{factor_x.shape}.'
        )
    return dep_emp_codes(factor_x @ theta_w.T, factor_s)


def hsic_emp(gram_a, gram_b):
    """Return the biased HSIC estimate ``(1/n^2) Tr[K_A H K_B H]``.

    :param gram_a: An ``n x n`` Gram matrix.
    :param gram_b: An ``n x n`` Gram matrix.
    :returns: A float, non-negative up to round-off.
    """
    gram_a = np.asarray(gram_a, dtype=np.float64)
    gram_b = np.asarray(gram_b, dtype=np.float64)
    if gram_a.ndim != 2 or gram_a.shape != gram_b.shape or gram_a.shape[0] != gram_a.shape[1]:
        raise DependenceError(
            f'HSIC needs two square matrices of equal shape, got {gram_a.shape} and '
            f'{gram_b.shape}.'
        )
    n = gram_a.shape[0]
    # H K H, applied from both sides without forming H.
    centered_a = center_factor(center_factor(gram_a).T)
    centered_b = center_factor(center_factor(gram_b).T)
    return float(np.sum(centered_a * centered_b.T)) / n**2


def _whitened_basis(points, spec, reg, tol, max_rank):
    """Return ``(U, shrink)`` with ``R = (K~ + c I)^-1 K~ = U diag(shrink) U^T``."""
    n = points.shape[0]
    factor = center_factor(kernel_factor(points, spec, tol, max_rank).factor)
    if factor.shape[1] == 0:
        return np.zeros((n, 0)), np.zeros(0)
    left, singular, _ = np.linalg.svd(factor, full_matrices=False)
    keep = singular > singular[0] * 1e-12 if singular.size else singular > 0
    eig = singular[keep] ** 2
    return left[:, keep], eig / (eig + n * reg)


def kcc_emp(z, s, spec_z=None, spec_s=None, reg=KCC_REG, tol=KCC_TOL, max_rank=None):
    """Estimate the kernel canonical correlation between ``z`` and ``s``.

    The regularized estimate is the top singular value of ``R_Z R_S`` where
    ``R = (K~ + n reg I)^-1 K~`` and ``K~ = H K H``. Both ``R`` operators are
    built from incomplete Cholesky factors of the centered Gram matrices, so no
    ``n x n`` matrix is inverted.

    :param z: An ``n x r`` array (``r`` may be 0).
    :param s: An ``n x q`` array.
    :param spec_z: Kernel on ``z``; RBF with a median bandwidth by default.
    :param spec_s: Kernel on ``s``; RBF with a median bandwidth by default.
    :param reg: A positive float.
    :param tol: Pivot truncation of the incomplete Cholesky factors.
    :param max_rank: Optional cap on their rank.
    :returns: A float in ``[0, 1]``.
    :raises kerninv.dependence.DependenceError: If ``reg <= 0``, fewer than 3
        samples are given or the row counts differ.
    """
    if reg <= 0:
        raise DependenceError(f'The KCC regularization must be positive, got {reg}.')
    z = np.asarray(z, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    z = z.reshape(-1, 1) if z.ndim == 1 else z
    s = s.reshape(-1, 1) if s.ndim == 1 else s
    if z.shape[0] != s.shape[0]:
        raise DependenceError(f'z has {z.shape[0]} rows but s has {s.shape[0]}.')
    if z.shape[0] < 3:
        raise DependenceError(f'KCC needs at least 3 samples, got {z.shape[0]}.')
    if z.shape[1] == 0 or s.shape[1] == 0:
        return 0.0
    if spec_z is None:
        spec_z = KernelSpec('rbf-gaussian', z.shape[1], bandwidth=median_bandwidth(z, 2000))
    if spec_s is None:
        spec_s = KernelSpec('rbf-gaussian', s.shape[1], bandwidth=median_bandwidth(s, 2000))
    basis_z, shrink_z = _whitened_basis(z, spec_z, reg, tol, max_rank)
    basis_s, shrink_s = _whitened_basis(s, spec_s, reg, tol, max_rank)
    if shrink_z.size == 0 or shrink_s.size == 0:
        return 0.0
    coupling = shrink_z[:, None] * (basis_z.T @ basis_s) * shrink_s[None, :]
    rho = float(np.linalg.norm(coupling, 2))
    return min(max(rho, 0.0), 1.0)


def dpv(predictions, s_groups, categories=None):
    """Return the demographic parity violation ``E_Y[Var_S(P[Y | S])]``.

    For every predicted class ``y``, ``P[y | s]`` is estimated per group by
    frequency and its variance is taken uniformly over the groups; the
    variances are then averaged with the marginal frequencies of ``y``.

    :param predictions: An ``n`` vector of hard predictions.
    :param s_groups: An ``n`` vector of group labels, or of integer codes in
        ``[0, categories)`` when ``categories`` is given.
    :param categories: The number of declared groups. Every one of them takes
        part in the variance, so each needs at least one sample. Defaults to
        the groups present in ``s_groups``.
    :returns: A non-negative float.
    :raises kerninv.dependence.DependenceError: If the vectors are empty or of
        different lengths, a code is out of range or a declared group has no
        samples.
    """
    predictions = np.asarray(predictions).reshape(-1)
    s_groups = np.asarray(s_groups).reshape(-1)
    if predictions.shape != s_groups.shape:
        raise DependenceError(
            f'{predictions.shape[0]} predictions do not match {s_groups.shape[0]} group labels.'
        )
    if predictions.size == 0:
        raise DependenceError('DPV needs at least one sample per group.')
    classes, class_index = np.unique(predictions, return_inverse=True)
    if categories is None:
        groups, group_index = np.unique(s_groups, return_inverse=True)
        categories = groups.size
    else:
        codes = s_groups.astype(np.float64)
        group_index = codes.astype(np.int64)
        if np.any(group_index != codes) or np.any((group_index < 0) | (group_index >= categories)):
            raise DependenceError(f'Group codes must be integers in [0, {categories}).')
    table = np.zeros((int(categories), classes.size))
    np.add.at(table, (group_index, class_index), 1.0)
    empty = np.flatnonzero(table.sum(axis=1) == 0)
    if empty.size:
        raise DependenceError(
            f'DPV needs at least one sample per group; group(s) {empty.tolist()} have none.'
        )
    conditional = table / table.sum(axis=1, keepdims=True)
    marginal = table.sum(axis=0) / predictions.size
    return float(np.sum(marginal * conditional.var(axis=0)))


def _encode_with(encoder, points):
    """Apply ``encoder``, which is either callable or has an ``encode`` method."""
    if hasattr(encoder, 'encode'):
        return np.asarray(encoder.encode(points), dtype=np.float64)
    return np.asarray(encoder(points), dtype=np.float64)


def dep_population_mc(encoder, sampler, n_mc, seed, spec_s):
    """Monte-Carlo estimate of the population dependence ``Dep(f(X), S)``.

    The population expression sums, over the encoder components ``f_j``,

        E[f f' k] + E[f] E[f'] E[k] - 2 E[f E[f'] E[k(S, S')]]

    where primes denote an independent copy of ``(X, S)`` and ``k`` is
    ``k_S(S, S')``. Every expectation over an independent pair is estimated on
    ``n_mc`` pairs drawn from two independent batches.

    :param encoder: A fitted encoder (anything with an ``encode`` method) or a
        callable mapping an ``m x p`` array to an ``m x r`` array.
    :param sampler: A callable ``sampler(m, rng) -> (x, s)`` drawing ``m``
        i.i.d. samples with ``rng``, a ``numpy.random.Generator``.
    :param n_mc: Number of Monte-Carlo pairs.
    :param seed: Seed of the generator handed to ``sampler``.
    :param spec_s: :class:`kerninv.kernels.KernelSpec` of the attribute.
    :returns: A float, non-negative up to Monte-Carlo error.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    x, s = sampler(n_mc, rng)
    x_prime, s_prime = sampler(n_mc, rng)
    f = _encode_with(encoder, x)
    f_prime = _encode_with(encoder, x_prime)
    f = f.reshape(n_mc, -1)
    f_prime = f_prime.reshape(n_mc, -1)
    if f.shape[1] == 0:
        return 0.0
    s = np.asarray(s, dtype=np.float64).reshape(n_mc, -1)
    s_prime = np.asarray(s_prime, dtype=np.float64).reshape(n_mc, -1)
    pair_kernel = _paired_kernel(s, s_prime, spec_s)
    mean_f = 0.5 * (f.mean(axis=0) + f_prime.mean(axis=0))
    first = np.mean(f * f_prime * pair_kernel[:, None], axis=0)
    second = mean_f**2 * pair_kernel.mean()
    third = mean_f * np.mean(f * pair_kernel[:, None], axis=0)
    estimate = float(np.sum(first + second - 2.0 * third))
    logger.debug('Monte-Carlo dependence over %s pairs: %s.', n_mc, estimate)
    return estimate


def _paired_kernel(a, b, spec):
    """Return ``k(a_i, b_i)`` for every row ``i``."""
    if spec.family == 'rbf-gaussian':
        return np.exp(-np.sum((a - b) ** 2, axis=1) / (2.0 * spec.bandwidth**2))
    if spec.family == 'linear':
        return np.einsum('ij,ij->i', a, b)
    return (a[:, 0] == b[:, 0]).astype(np.float64)


def pair_diagnostics(y, s, spec_y=None, spec_s=None, reg=KCC_REG, max_rank=None):
    """Screen a (target, semantic attribute) pair before running a sweep.

    A trade-off only exists when the target depends on the attribute; a pair is
    worth studying when the target is roughly balanced and ``KCC(Y, S)`` is
    moderate.

    :param y: An ``n`` vector of target class codes.
    :param s: An ``n`` vector or ``n x q`` array.
    :returns: A dict with ``imbalance`` (the largest deviation of a class
        frequency from uniform; ``|P[Y=0] - 0.5|`` for binary targets) and
        ``kcc_ys``.
    """
    codes = np.asarray(y).reshape(-1)
    _, counts = np.unique(codes, return_counts=True)
    freqs = counts / codes.size
    imbalance = float(np.max(np.abs(freqs - 1.0 / freqs.size)))
    kcc = kcc_emp(codes.astype(np.float64), s, spec_y, spec_s, reg=reg, max_rank=max_rank)
    return {'imbalance': imbalance, 'kcc_ys': kcc}
