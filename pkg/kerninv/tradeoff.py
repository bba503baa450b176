"""Utility versus invariance trade-off curves.

:func:`sweep` fits one optimal encoder per trade-off parameter ``lambda``,
trains a linear head for the target on the training representation and
evaluates every requested split. Each evaluation is a :class:`TradeoffPoint`;
the points make up a :class:`TradeoffCurve`.

Utility is the accuracy of the head for a categorical target and the negative
mean squared error for a real one. Invariance is the kernel canonical
correlation between the representation and the semantic attribute when the
attribute is real, and the demographic parity violation of the predictions
when it is categorical.

"""

from concurrent.futures import ThreadPoolExecutor
import hashlib
import json
import logging

import inflection
import numpy as np
import pandas as pd
import scipy.linalg

from kerninv.dependence import dep_emp_codes, dpv, kcc_emp
from kerninv.kernels import KernelError, decode_array, encode_array, kernel_factor
from kerninv.solver import (
    LAMBDA_MAX,
    EncoderModel,
    KernelConfig,
    PencilBlocks,
    SolverError,
    check_format_version,
    fit_encoder,
)

logger = logging.getLogger(__name__)

#: Written into every serialized curve and bundle.
FORMAT_VERSION = '1.0'

TASKS = ('classification', 'regression')
INVARIANCE_METRICS = ('kcc', 'dpv')
SPLITS = ('train', 'val', 'test')
CSV_COLUMNS = ('lambda', 'r_opt', 'dep_zy', 'dep_zs', 'objective', 'utility', 'invariance', 'split')
PANELS = ('utility-invariance', 'depy-deps', 'invariance-deps', 'ropt-lambda', 'spectrum-lambda')

#: Default ridge of the target head.
HEAD_RIDGE = 1e-6

#: Number of leading eigenvalues kept on every point.
SPECTRUM_SIZE = 16


class SweepError(Exception):
    """Indicates that a sweep could not be completed.

    :param message: A description of the problem.
    :param lambda_: The trade-off parameter being processed, if any.
    """

    def __init__(self, message, lambda_=None):
        super().__init__(message)
        self.lambda_ = lambda_


class TradeoffPoint:
    """One evaluated encoder.

    :param lambda_: The trade-off parameter.
    :param r_opt: The embedding dimensionality of the encoder.
    :param dep_zy: ``Dep(Z, Y)`` on the split.
    :param dep_zs: ``Dep(Z, S)`` on the split.
    :param objective: The training objective of the encoder.
    :param utility: Accuracy, or negative MSE for a real target.
    :param invariance: KCC or DPV.
    :param split: ``train``, ``val`` or ``test``.
    :param gamma: The regularization the encoder was fitted with.
    :param spectrum: The leading eigenvalues of the pencil.
    """

    def __init__(
        self,
        lambda_,
        r_opt,
        dep_zy,
        dep_zs,
        objective,
        utility,
        invariance,
        split,
        gamma=None,
        spectrum=(),
    ):
        if int(r_opt) < 0:
            raise SweepError(f'r_opt must be non-negative, got {r_opt}.', lambda_)
        if dep_zy < 0 or dep_zs < 0:
            raise SweepError(f'Negative dependence ({dep_zy}, {dep_zs}).', lambda_)
        if split not in SPLITS:
            raise SweepError(f'Unknown split {split!r}; valid splits are {SPLITS}.', lambda_)
        self.lambda_ = float(lambda_)
        self.r_opt = int(r_opt)
        self.dep_zy = float(dep_zy)
        self.dep_zs = float(dep_zs)
        self.objective = float(objective)
        self.utility = float(utility)
        self.invariance = float(invariance)
        self.split = split
        self.gamma = None if gamma is None else float(gamma)
        self.spectrum = [float(value) for value in spectrum]

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(lambda_={self.lambda_!r}, '
            f'r_opt={self.r_opt}, utility={self.utility!r}, invariance={self.invariance!r}, '
            f'split={self.split!r})'
        )

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        attrs = dict(vars(self))
        attrs['lambda'] = attrs.pop('lambda_')
        return attrs

    @classmethod
    def from_json_dict(cls, attrs):
        """Build a point from the output of :meth:`to_json_dict`."""
        attrs = dict(attrs)
        return cls(attrs.pop('lambda'), **attrs)


class TradeoffCurve:
    """The points of a sweep, grouped by split and ordered by ``lambda``.

    :param points: An iterable of :class:`TradeoffPoint`.
    :param digest: A hex digest of the dataset, kernels and settings.
    :raises kerninv.tradeoff.SweepError: If ``lambda`` is not strictly
        increasing within a split.
    """

    def __init__(self, points, digest=''):
        self.points = sorted(points, key=lambda point: (SPLITS.index(point.split), point.lambda_))
        self.digest = digest
        self.models = {}
        for split in self.splits:
            lambdas = [point.lambda_ for point in self.points_for(split)]
            if any(later <= earlier for earlier, later in zip(lambdas, lambdas[1:], strict=False)):
                raise SweepError(f'lambda values of the {split} split are not strictly increasing.')
            dims = [point.r_opt for point in self.points_for(split)]
            if any(later > earlier for earlier, later in zip(dims, dims[1:], strict=False)):
                logger.warning('r_opt increases with lambda on the %s split.', split)

    @property
    def splits(self):
        """Return the splits present, in canonical order."""
        return [split for split in SPLITS if any(point.split == split for point in self.points)]

    def points_for(self, split):
        """Return the points of one split, ordered by ``lambda``."""
        return [point for point in self.points if point.split == split]

    def __len__(self):
        """Return the number of points."""
        return len(self.points)

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(points={len(self.points)}, '
            f'splits={self.splits}, digest={self.digest[:12]!r})'
        )

    def to_frame(self):
        """Return the points as a ``pandas.DataFrame`` with the CSV columns."""
        rows = [
            [getattr(point, 'lambda_' if column == 'lambda' else column) for column in CSV_COLUMNS]
            for point in self.points
        ]
        return pd.DataFrame(rows, columns=list(CSV_COLUMNS))

    def to_csv(self, path):
        """Write the curve as CSV."""
        self.to_frame().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')

    def to_json(self):
        """Serialize the curve as a JSON document."""
        return json.dumps(
            {
                'format_version': FORMAT_VERSION,
                'digest': self.digest,
                'points': [point.to_json_dict() for point in self.points],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, document):
        """Read a curve written by :meth:`to_json`.

        :raises kerninv.solver.ModelFormatError: If the format version is not
            compatible.
        """
        attrs = json.loads(document) if isinstance(document, str | bytes) else document
        check_format_version(attrs['format_version'], FORMAT_VERSION)
        return cls(
            [TradeoffPoint.from_json_dict(point) for point in attrs['points']],
            attrs.get('digest', ''),
        )


class LinearHead:
    """An affine map from representations to target predictions.

    :param weights: An ``r x k`` array.
    :param intercept: A ``k`` vector.
    :param task: ``classification`` or ``regression``.
    """

    def __init__(self, weights, intercept, task):
        if task not in TASKS:
            raise SweepError(f'Unknown task {task!r}; valid tasks are {TASKS}.')
        self.weights = np.asarray(weights, dtype=np.float64)
        self.intercept = np.asarray(intercept, dtype=np.float64).reshape(-1)
        self.task = task

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(task={self.task!r}, '
            f'shape={self.weights.shape})'
        )

    def decision(self, z):
        """Return the raw outputs ``z W + b``."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2:
            z = z.reshape(-1, self.weights.shape[0])
        return z @ self.weights + self.intercept

    def predict(self, z):
        """Return class codes (classification) or target values (regression)."""
        outputs = self.decision(z)
        if self.task == 'classification':
            return np.argmax(outputs, axis=1)
        return outputs

    def score(self, z, y):
        """Return the accuracy, or the negative mean squared error."""
        predictions = self.predict(z)
        y = np.asarray(y, dtype=np.float64)
        if self.task == 'classification':
            return float(np.mean(predictions == y.reshape(-1)))
        return -float(np.mean((predictions - y.reshape(predictions.shape)) ** 2))

    def to_json_dict(self):
        """Return a dict suitable for JSON encoding."""
        return {
            'weights': encode_array(self.weights),
            'intercept': encode_array(self.intercept),
            'task': self.task,
        }

    @classmethod
    def from_json_dict(cls, attrs):
        """Build a head from the output of :meth:`to_json_dict`."""
        return cls(decode_array(attrs['weights']), decode_array(attrs['intercept']), attrs['task'])


def train_target_head(z, y, task, ridge=HEAD_RIDGE, classes=None):
    """Fit a ridge least-squares head with an unpenalized intercept.

    Classification regresses one-hot targets and predicts the argmax. A
    representation with no columns, or only constant columns, yields a
    constant predictor: the majority class or the target mean.

    :param z: An ``n x r`` array.
    :param y: Class codes (classification) or an ``n`` / ``n x q`` array.
    :param task: ``classification`` or ``regression``.
    :param ridge: A non-negative float.
    :param classes: The number of classes. Defaults to ``max(y) + 1``.
    :returns: A :class:`LinearHead`.
    """
    if task not in TASKS:
        raise SweepError(f'Unknown task {task!r}; valid tasks are {TASKS}.')
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        z = z.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if task == 'classification':
        codes = y.reshape(-1).astype(np.int64)
        classes = int(codes.max()) + 1 if classes is None else int(classes)
        targets = np.zeros((codes.shape[0], classes))
        targets[np.arange(codes.shape[0]), codes] = 1.0
    else:
        targets = y.reshape(y.shape[0], -1)
    if z.shape[0] != targets.shape[0]:
        raise SweepError(f'{z.shape[0]} representations do not match {targets.shape[0]} targets.')
    z_mean = z.mean(axis=0)
    t_mean = targets.mean(axis=0)
    centered = z - z_mean
    weights = np.zeros((z.shape[1], targets.shape[1]))
    if z.shape[1] == 0 or np.allclose(centered, 0.0):
        logger.debug('Degenerate representation; the head predicts a constant.')
    else:
        gram = centered.T @ centered + ridge * np.eye(z.shape[1])
        weights = scipy.linalg.solve(gram, centered.T @ (targets - t_mean), assume_a='sym')
    return LinearHead(weights, t_mean - z_mean @ weights, task)


def kernel_ridge_equivalent(ridge, gamma, n):
    """Return the kernel ridge regression a head on a full encoder amounts to.

    When the encoder keeps all ``d`` directions, ``U`` is invertible and
    ``U U^T = C^-1``, so a head with ridge ``rho`` trained on ``Z = H L_X U``
    predicts ``shrink * K (K + mu I)^-1 y_c + mean(y)`` with ``K = H L_X L_X^T H``
    and ``y_c`` the centered targets. This holds for every ``lambda``, on the
    training points and on new ones.

    :param ridge: The ridge ``rho`` of the head.
    :param gamma: The regularization of the encoder.
    :param n: The number of training samples.
    :returns: A ``(mu, shrink)`` tuple with ``mu = rho gamma / (1 + rho / n)``
        and ``shrink = 1 / (1 + rho / n)``.
    """
    shrink = 1.0 / (1.0 + ridge / n)
    return ridge * gamma * shrink, shrink


def _task_of(dataset):
    """Return the task implied by the target of ``dataset``."""
    return 'classification' if dataset.y_categorical else 'regression'


def _invariance_of(dataset, invariance):
    """Resolve ``invariance`` (``None`` means automatic) for ``dataset``."""
    if invariance is None:
        if dataset.s_categorical and dataset.y_categorical:
            return 'dpv'
        return 'kcc'
    if invariance not in INVARIANCE_METRICS:
        raise SweepError(
            f'Unknown invariance metric {invariance!r}; valid metrics are {INVARIANCE_METRICS}.'
        )
    if invariance == 'dpv' and not (dataset.s_categorical and dataset.y_categorical):
        raise SweepError('DPV needs a categorical target and a categorical semantic attribute.')
    return invariance


class EvaluationFactors:
    """Gram factors of the target and attribute of one split.

    :param dataset: The split.
    :param kernel_cfg: A :class:`kerninv.solver.KernelConfig`.
    """

    def __init__(self, dataset, kernel_cfg):
        self.y = kernel_factor(dataset.y, kernel_cfg.y, kernel_cfg.tol)
        self.s = kernel_factor(dataset.s, kernel_cfg.s, kernel_cfg.tol)


def evaluate(model, head, dataset, kernel_cfg, split='test', invariance=None, factors=None):
    """Evaluate an encoder and its head on one split.

    :param model: A :class:`kerninv.solver.EncoderModel`.
    :param head: A :class:`LinearHead`.
    :param dataset: The split to evaluate on.
    :param kernel_cfg: The :class:`kerninv.solver.KernelConfig` of the fit.
    :param split: The name recorded on the point.
    :param invariance: ``kcc``, ``dpv`` or ``None`` to pick from the
        attribute type.
    :param factors: Optional :class:`EvaluationFactors` of ``dataset``.
    :returns: A :class:`TradeoffPoint`.
    """
    invariance = _invariance_of(dataset, invariance)
    if factors is None:
        factors = EvaluationFactors(dataset, kernel_cfg)
    z = model.encode(dataset.x)
    if invariance == 'kcc':
        score = kcc_emp(z, dataset.s, spec_s=kernel_cfg.s)
    else:
        categories = getattr(kernel_cfg.s, 'categories', None)
        score = dpv(head.predict(z), dataset.s[:, 0], categories)
    return TradeoffPoint(
        model.lambda_,
        model.r,
        dep_emp_codes(z, factors.y),
        dep_emp_codes(z, factors.s),
        model.objective,
        head.score(z, dataset.y),
        score,
        split,
        gamma=model.gamma,
        spectrum=model.eigenvalues[:SPECTRUM_SIZE],
    )


class TradeoffModel:
    """An encoder together with everything needed to evaluate it again.

    :param encoder: A :class:`kerninv.solver.EncoderModel`.
    :param head: A :class:`LinearHead`.
    :param kernel_cfg: The :class:`kerninv.solver.KernelConfig` of the fit.
    :param invariance: The invariance metric used by the sweep.
    :param preprocessing: How the training inputs were prepared: the
        ``divisors`` of :func:`kerninv.data.preprocess`, whether categorical
        inputs were ``one_hot`` expanded and the training ``categories`` of
        every categorical column.
    """

    def __init__(self, encoder, head, kernel_cfg, invariance=None, preprocessing=None):
        self.encoder = encoder
        self.head = head
        self.kernel_cfg = kernel_cfg
        self.invariance = invariance
        self.preprocessing = dict(preprocessing or {})

    def __repr__(self):
        """Return a string representation of the object."""
        return f'{self.__module__}.{type(self).__name__}(encoder={self.encoder!r})'

    def evaluate(self, dataset, split='test'):
        """Evaluate on ``dataset``; see :func:`evaluate`."""
        return evaluate(
            self.encoder, self.head, dataset, self.kernel_cfg, split, self.invariance
        )

    def to_json(self):
        """Serialize the bundle as a JSON document."""
        return json.dumps(
            {
                'format_version': FORMAT_VERSION,
                'encoder': self.encoder.to_json_dict(),
                'head': self.head.to_json_dict(),
                'kernels': self.kernel_cfg.to_json_dict(),
                'invariance': self.invariance,
                'preprocessing': self.preprocessing,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, document):
        """Read a bundle written by :meth:`to_json`.

        :raises kerninv.solver.ModelFormatError: If the document cannot be read.
        """
        attrs = json.loads(document) if isinstance(document, str | bytes) else document
        check_format_version(attrs['format_version'], FORMAT_VERSION)
        return cls(
            EncoderModel.from_json(attrs['encoder']),
            LinearHead.from_json_dict(attrs['head']),
            KernelConfig.from_json_dict(attrs['kernels']),
            attrs.get('invariance'),
            attrs.get('preprocessing'),
        )


def lambda_grid(count=70, spacing='linear', refine=0):
    """Build a sorted grid of trade-off parameters in ``[0, 1 - 1e-6]``.

    :param count: The number of base points.
    :param spacing: ``linear`` spaces them uniformly in ``lambda``;
        ``log-complement`` spaces ``1 - lambda`` logarithmically between 1 and
        ``1e-6``.
    :param refine: Number of extra points ``1 - 10^-k`` with ``k`` uniform in
        ``[2, 6]``, added to resolve the region close to full invariance.
    :returns: A strictly increasing numpy array.
    """
    if count < 1:
        raise SweepError(f'A lambda grid needs at least one point, got {count}.')
    if spacing == 'linear':
        grid = np.linspace(0.0, LAMBDA_MAX, count) if count > 1 else np.zeros(1)
    elif spacing == 'log-complement':
        grid = 1.0 - np.logspace(0.0, -6.0, count) if count > 1 else np.zeros(1)
    else:
        raise SweepError(f'Unknown spacing {spacing!r}; use linear or log-complement.')
    if refine:
        grid = np.concatenate([grid, 1.0 - np.logspace(-2.0, -6.0, int(refine))])
    return np.unique(np.clip(grid, 0.0, LAMBDA_MAX))


def _check_grid(grid):
    """Return ``grid`` as an array after checking it is sorted and in range."""
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0:
        raise SweepError('The lambda grid is empty.')
    if np.any(grid < 0.0) or np.any(grid > LAMBDA_MAX):
        raise SweepError(f'Every lambda must lie in [0, {LAMBDA_MAX}].')
    if np.any(np.diff(grid) <= 0.0):
        raise SweepError('The lambda grid must be strictly increasing.')
    return grid


def config_digest(dataset, kernel_cfg, settings):
    """Return a SHA-256 hex digest of a dataset, its kernels and sweep settings."""
    digest = hashlib.sha256()
    for array in (dataset.x, dataset.y, dataset.s):
        digest.update(np.ascontiguousarray(array, dtype='<f8').tobytes())
    digest.update(json.dumps(kernel_cfg.to_json_dict(), sort_keys=True).encode())
    digest.update(json.dumps(settings, sort_keys=True, default=float).encode())
    return digest.hexdigest()


def select_gamma(train, val, kernel_cfg, lambda_, gammas, ridge=HEAD_RIDGE, blocks=None, r=None):
    """Pick the ``gamma`` with the best validation utility at one ``lambda``.

    Ties go to the larger ``gamma``.

    :returns: A float from ``gammas``.
    """
    if blocks is None:
        blocks = PencilBlocks.from_dataset(train, kernel_cfg)
    task = _task_of(train)
    best_gamma = best_utility = None
    for gamma in sorted(gammas):
        model = fit_encoder(train, kernel_cfg, lambda_, gamma, r=r, blocks=blocks)
        head = train_target_head(
            model.encode(train.x), train.y, task, ridge, train.y_classes
        )
        utility = head.score(model.encode(val.x), val.y)
        logger.debug('lambda=%s gamma=%s: validation utility %s.', lambda_, gamma, utility)
        if best_utility is None or utility >= best_utility:
            best_gamma, best_utility = gamma, utility
    return float(best_gamma)


def sweep(
    splits,
    kernel_cfg,
    lambda_grid,
    gamma,
    gammas=None,
    fixed_r=None,
    workers=1,
    evaluate_on=('train', 'test'),
    invariance=None,
    ridge=HEAD_RIDGE,
    keep_models=False,
):
    """Trace the trade-off curve over ``lambda_grid``.

    The kernel factors of the training split and the evaluation factors of
    every split are computed once. Each ``lambda`` is then fitted from scratch
    on the cached blocks; fits may run on several threads and the points are
    ordered by ``lambda`` regardless of completion order.

    :param splits: A dict with ``train`` and the splits to evaluate, or a
        ``(train, val, test)`` tuple.
    :param kernel_cfg: A :class:`kerninv.solver.KernelConfig`.
    :param lambda_grid: A strictly increasing sequence in ``[0, 1 - 1e-6]``.
    :param gamma: The regularization, used when ``gammas`` is not given.
    :param gammas: Optional candidates; ``gamma`` is then picked per
        ``lambda`` by validation utility.
    :param fixed_r: Fit every encoder with this dimensionality instead of the
        optimal one.
    :param workers: Number of threads.
    :param evaluate_on: The splits to evaluate.
    :param invariance: ``kcc``, ``dpv`` or ``None`` for automatic.
    :param ridge: Ridge of the target head.
    :param keep_models: Keep a :class:`TradeoffModel` per ``lambda`` in
        ``curve.models``.
    :returns: A :class:`TradeoffCurve`.
    :raises kerninv.tradeoff.SweepError: If the grid is invalid or a fit
        fails; ``lambda_`` names the failing value.
    """
    if not isinstance(splits, dict):
        splits = dict(zip(SPLITS, splits, strict=True))
    grid = _check_grid(lambda_grid)
    train = splits['train']
    if gammas is not None and 'val' not in splits:
        raise SweepError('Selecting gamma needs a validation split.')
    unknown = [name for name in evaluate_on if name not in splits]
    if unknown:
        raise SweepError(f'No data for split(s) {unknown}.')
    metric = _invariance_of(train, invariance)
    task = _task_of(train)
    try:
        blocks = PencilBlocks.from_dataset(train, kernel_cfg)
        factors = {name: EvaluationFactors(splits[name], kernel_cfg) for name in evaluate_on}
    except (SolverError, KernelError) as err:
        raise SweepError(f'Cannot factor the kernels: {err}') from err
    logger.info(
        'Sweeping %s lambdas over %s training samples (d=%s).', grid.size, train.n, blocks.dim
    )

    def run(lambda_):
        """Fit, train the head and evaluate at one ``lambda``."""
        lambda_ = float(lambda_)
        try:
            chosen = gamma
            if gammas is not None:
                chosen = select_gamma(
                    train, splits['val'], kernel_cfg, lambda_, gammas, ridge, blocks, fixed_r
                )
            model = fit_encoder(train, kernel_cfg, lambda_, chosen, r=fixed_r, blocks=blocks)
            head = train_target_head(model.encode(train.x), train.y, task, ridge, train.y_classes)
            points = [
                evaluate(model, head, splits[name], kernel_cfg, name, metric, factors[name])
                for name in evaluate_on
            ]
        except (SolverError, KernelError, ValueError) as err:
            raise SweepError(f'The fit at lambda={lambda_!r} failed: {err}', lambda_) from err
        logger.debug('lambda=%s: r=%s, objective=%s.', lambda_, model.r, model.objective)
        if model.r == blocks.dim:
            mu, shrink = kernel_ridge_equivalent(ridge, model.gamma, train.n)
            logger.debug(
                'lambda=%s: the head is kernel ridge with mu=%s scaled by %s.', lambda_, mu, shrink
            )
        return lambda_, points, TradeoffModel(
            model, head, kernel_cfg, metric, {'divisors': train.divisors or {}}
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, grid))
    else:
        results = [run(lambda_) for lambda_ in grid]
    settings = {
        'lambda_grid': [float(value) for value in grid],
        'gamma': gamma,
        'gammas': gammas,
        'fixed_r': fixed_r,
        'ridge': ridge,
        'invariance': metric,
        'evaluate_on': list(evaluate_on),
    }
    curve = TradeoffCurve(
        [point for _, points, _ in results for point in points],
        config_digest(train, kernel_cfg, settings),
    )
    if keep_models:
        curve.models = {lambda_: bundle for lambda_, _, bundle in results}
    return curve


def _panel_utility_invariance(points):
    """Utility against invariance."""
    return ('invariance', 'utility'), [(p.invariance, p.utility) for p in points]


def _panel_depy_deps(points):
    """Target dependence against attribute dependence."""
    return ('dep_zs', 'dep_zy'), [(p.dep_zs, p.dep_zy) for p in points]


def _panel_invariance_deps(points):
    """Invariance against attribute dependence."""
    return ('dep_zs', 'invariance'), [(p.dep_zs, p.invariance) for p in points]


def _panel_ropt_lambda(points):
    """Optimal dimensionality against 1 - lambda."""
    return ('one_minus_lambda', 'r_opt'), [(1.0 - p.lambda_, p.r_opt) for p in points]


def _panel_spectrum_lambda(points):
    """Every kept eigenvalue against 1 - lambda, with its index."""
    rows = [
        (1.0 - p.lambda_, index, value)
        for p in points
        for index, value in enumerate(p.spectrum, start=1)
    ]
    return ('one_minus_lambda', 'k', 'eigenvalue'), rows


def plot_data(curve, panel, split='test'):
    """Extract the series of one figure panel.

    :param curve: A :class:`TradeoffCurve`.
    :param panel: One of :data:`PANELS`.
    :param split: The split whose points are used.
    :returns: A ``(header, rows)`` tuple.
    :raises kerninv.tradeoff.SweepError: If the panel is unknown or the split
        is absent.
    """
    if panel not in PANELS:
        raise SweepError(f'Unknown panel {panel!r}; valid panels are {PANELS}.')
    points = curve.points_for(split)
    if not points:
        raise SweepError(f'The curve has no points for the {split} split.')
    return globals()[f'_panel_{inflection.underscore(panel)}'](points)


def write_plot_data(curve, panel, path, split='test'):
    """Write the series of one panel as a whitespace-separated text file."""
    header, rows = plot_data(curve, panel, split)
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write('# ' + ' '.join(header) + '\n')
        for row in rows:
            handle.write(' '.join(repr(value) for value in row) + '\n')
