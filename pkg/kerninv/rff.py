"""Random Fourier features for the RBF Gaussian kernel.

The feature map ``r(x) = sqrt(2/d) cos(W x + b)``, with the rows of ``W``
drawn from ``N(0, sigma^-2 I)`` and ``b`` uniform on ``[0, 2 pi)``, satisfies
``E[r(x)^T r(x')] = exp(-||x - x'||^2 / (2 sigma^2))``. Stacking ``r(x_i)^T``
row by row therefore gives a factor of the Gram matrix directly, which is how
the encoder side of the solver avoids an ``O(n^3)`` factorization.

Only the single-cosine-with-phase variant is implemented.

"""

import logging

import numpy as np

from kerninv.kernels import (
    RFF_DIRECT,
    DimensionMismatchError,
    GramFactor,
    KernelError,
    decode_array,
    encode_array,
)

logger = logging.getLogger(__name__)


class RffProjection:
    """A sampled random Fourier feature map.

    Instances are normally created with :func:`sample_projection`.

    :param weights: A ``d x p`` array of frequencies.
    :param phases: A ``d`` vector of phases.
    :param bandwidth: The RBF bandwidth the frequencies were drawn for.
    :param seed: The seed used to draw them.
    """

    def __init__(self, weights, phases, bandwidth, seed):
        weights = np.asarray(weights, dtype=np.float64)
        phases = np.asarray(phases, dtype=np.float64)
        if weights.ndim != 2 or phases.shape != (weights.shape[0],):
            raise KernelError(
                f'Weights of shape {weights.shape} do not match phases of shape {phases.shape}.'
            )
        weights.setflags(write=False)
        phases.setflags(write=False)
        self.weights = weights
        self.phases = phases
        self.bandwidth = float(bandwidth)
        self.seed = int(seed)

    @property
    def feature_dim(self):
        """Return ``d``."""
        return self.weights.shape[0]

    @property
    def input_dim(self):
        """Return ``p``."""
        return self.weights.shape[1]

    @property
    def scale(self):
        """Return ``sqrt(2 / d)``."""
        return np.sqrt(2.0 / self.feature_dim)

    def features(self, points):
        """Evaluate ``r(x)`` on every row of ``points``.

        :param points: An ``n x p`` array.
        :returns: An ``n x d`` array.
        :raises kerninv.kernels.DimensionMismatchError: If ``p`` is wrong.
        """
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f'Points have shape {points.shape} but the projection expects dimension '
                f'{self.input_dim}.'
            )
        return self.scale * np.cos(points @ self.weights.T + self.phases)

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(feature_dim={self.feature_dim}, '
            f'input_dim={self.input_dim}, bandwidth={self.bandwidth!r}, seed={self.seed})'
        )

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        return {
            'weights': encode_array(self.weights),
            'phases': encode_array(self.phases),
            'bandwidth': self.bandwidth,
            'seed': self.seed,
        }

    @classmethod
    def from_json_dict(cls, attrs):
        """Build a projection from the output of :meth:`to_json_dict`."""
        return cls(
            decode_array(attrs['weights']),
            decode_array(attrs['phases']),
            attrs['bandwidth'],
            attrs['seed'],
        )


def sample_projection(bandwidth, feature_dim, input_dim, seed):
    """Draw a random Fourier feature map for an RBF kernel.

    The same ``seed`` always gives the same projection: frequencies and phases
    come from a PCG64 generator, normals from its ziggurat sampler.

    :param bandwidth: A positive float, the RBF ``sigma``.
    :param feature_dim: A positive integer ``d``.
    :param input_dim: A positive integer ``p``.
    :param seed: An integer.
    :returns: An :class:`RffProjection`.
    """
    if feature_dim < 1 or input_dim < 1:
        raise KernelError(
            f'feature_dim and input_dim must be positive, got {feature_dim} and {input_dim}.'
        )
    if bandwidth <= 0:
        raise KernelError(f'The bandwidth must be positive, got {bandwidth}.')
    rng = np.random.Generator(np.random.PCG64(seed))
    weights = rng.standard_normal((feature_dim, input_dim)) / bandwidth
    phases = rng.uniform(0.0, 2.0 * np.pi, size=feature_dim)
    return RffProjection(weights, phases, bandwidth, seed)


def feature_matrix(points, projection):
    """Stack the features of every point into a Gram factor.

    :param points: An ``n x p`` array.
    :param projection: An :class:`RffProjection`.
    :returns: A :class:`kerninv.kernels.GramFactor` with source
        ``rff-direct`` and rank ``d``.
    """
    features = projection.features(points)
    if features.shape[0] < projection.feature_dim:
        logger.warning(
            'Only %s samples for %s random features; the factor cannot have full column rank.',
            features.shape[0],
            projection.feature_dim,
        )
    return GramFactor(features, RFF_DIRECT)
