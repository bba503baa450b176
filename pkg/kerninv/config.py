"""Run configurations: what to sweep, on which data, with which kernels.

A run configuration is a JSON document validated against
:data:`RUN_CONFIG_FIELDS`. Every knob has a default, so the smallest valid
configuration is ``{}``: the Gaussian toy dataset, median-heuristic RBF
kernels (one-hot-delta for categorical columns), ``gamma = 1e-3`` and a
70-point grid refined towards ``lambda = 1``.

Configurations are read from explicit paths, or stored under labels in an XDG
configuration file (``~/.config/kerninv/run_configs.json``), the way
:class:`RunConfig.get` and :meth:`RunConfig.save` manage them.

"""

import hashlib
import json
import logging
from os.path import isfile, join
from threading import Lock

from xdg import BaseDirectory

from kerninv.config_fields import (
    BooleanField,
    DictField,
    FloatField,
    IntegerField,
    ListField,
    OneOfField,
    StringField,
    ValidationError,
)

logger = logging.getLogger(__name__)

#: The largest admissible lambda.
LAMBDA_MAX = 1.0 - 1e-6


class ConfigFileError(Exception):
    """Indicates an error occurred when locating a configuration file."""


class ConfigValidationError(ValidationError):
    """Indicates that a run configuration is invalid.

    ``paths`` lists every offending field, e.g. ``['gamma', 'kernels.x.family']``.
    """


def _get_config_file_path(xdg_config_dir, xdg_config_file):
    """Search ``XDG_CONFIG_DIRS`` for a config file and return the first found.

    :param xdg_config_dir: A string. The name of the directory that is suffixed
        to the end of each of the ``XDG_CONFIG_DIRS`` paths.
    :param xdg_config_file: A string. The name of the configuration file that
        is being searched for.
    :returns: A ``str`` path to a configuration file.
    :raises kerninv.config.ConfigFileError: When no configuration file can be
        found.
    """
    for config_dir in BaseDirectory.load_config_paths(xdg_config_dir):
        path = join(config_dir, xdg_config_file)
        if isfile(path):
            return path
    raise ConfigFileError(
        'No configuration files could be located after searching for a file '
        f'named "{xdg_config_file}" in the standard XDG configuration paths, such as '
        f'"~/.config/{xdg_config_dir}/".'
    )


def _kernel_fields(family, rff=False):
    """Return the fields of one kernel entry."""
    fields = {
        'family': StringField(
            choices=('rbf-gaussian', 'linear', 'one-hot-delta'), default=family, nullable=True
        ),
        'bandwidth': OneOfField(
            (StringField(choices=('median',)), FloatField(min_val=0.0, exclusive_min=True)),
            default='median',
        ),
    }
    if rff:
        fields['rff'] = OneOfField(
            (
                StringField(choices=('off',)),
                DictField(
                    {
                        'dim': IntegerField(min_val=1, max_val=100000, required=True),
                        'seed': IntegerField(min_val=0, max_val=2**32 - 1, default=0),
                    }
                ),
            ),
            default='off',
        )
    return DictField(fields, default={})


#: The layout of a run configuration. A ``null`` kernel family means "pick from
#: the column type": one-hot-delta for a categorical column, RBF otherwise.
RUN_CONFIG_FIELDS = DictField(
    {
        'dataset': DictField(
            {
                'source': StringField(choices=('toy', 'csv'), default='toy'),
                'n': IntegerField(min_val=3, max_val=10**7, default=18000),
                'seed': IntegerField(min_val=0, max_val=2**32 - 1, default=0),
                'csv': StringField(nullable=True, default=None),
                'schema': StringField(nullable=True, default=None),
                'split': ListField(
                    FloatField(min_val=0.0, max_val=1.0, exclusive_min=True),
                    min_len=3,
                    max_len=3,
                    default=[1 / 3, 1 / 3, 1 / 3],
                ),
                'split_seed': IntegerField(min_val=0, max_val=2**32 - 1, default=0),
                'preprocess': StringField(choices=('max-divide', 'none'), default='max-divide'),
                'one_hot': BooleanField(default=True),
                'drop': ListField(StringField(), default=[]),
            },
            default={},
        ),
        'kernels': DictField(
            {
                'x': _kernel_fields('rbf-gaussian', rff=True),
                'y': _kernel_fields(None),
                's': _kernel_fields(None),
                'tol': FloatField(min_val=0.0, max_val=1e-2, exclusive_min=True, default=1e-9),
                'bandwidth_points': IntegerField(min_val=2, max_val=10**6, default=2000),
            },
            default={},
        ),
        'gamma': FloatField(min_val=0.0, exclusive_min=True, default=1e-3),
        'gammas': ListField(
            FloatField(min_val=0.0, exclusive_min=True), min_len=1, nullable=True, default=None
        ),
        'lambda_grid': DictField(
            {
                'count': IntegerField(min_val=1, max_val=10000, default=70),
                'spacing': StringField(choices=('linear', 'log-complement'), default='linear'),
                'refine': IntegerField(min_val=0, max_val=1000, default=10),
                'values': ListField(
                    FloatField(min_val=0.0, max_val=LAMBDA_MAX),
                    min_len=1,
                    nullable=True,
                    default=None,
                ),
            },
            default={},
        ),
        'fixed_r': IntegerField(min_val=0, nullable=True, default=None),
        'workers': IntegerField(min_val=1, max_val=256, default=1),
        'evaluate_on': ListField(
            StringField(choices=('train', 'val', 'test')), min_len=1, default=['train', 'test']
        ),
        'invariance': StringField(choices=('kcc', 'dpv'), nullable=True, default=None),
        'ridge': FloatField(min_val=0.0, default=1e-6),
        'seed': IntegerField(min_val=0, max_val=2**32 - 1, default=0),
        'output_dir': StringField(default='kerninv-out'),
    }
)


def _cross_checks(attrs):
    """Return problems that involve more than one field."""
    problems = []
    dataset = attrs['dataset']
    if abs(sum(dataset['split']) - 1.0) > 1e-9:
        problems.append(('dataset.split', f'fractions sum to {sum(dataset["split"])}, not 1'))
    if dataset['source'] == 'csv':
        problems.extend(
            (f'dataset.{key}', 'is required when source is csv')
            for key in ('csv', 'schema')
            if not dataset[key]
        )
    x_kernel = attrs['kernels']['x']
    if x_kernel['rff'] != 'off' and x_kernel['family'] not in ('rbf-gaussian', None):
        problems.append(('kernels.x.rff', 'random features need an rbf-gaussian kernel'))
    values = attrs['lambda_grid']['values']
    if values is not None and any(b <= a for a, b in zip(values, values[1:], strict=False)):
        problems.append(('lambda_grid.values', 'must be strictly increasing'))
    return problems


class RunConfig:
    """A validated run configuration.

    The top-level keys of :data:`RUN_CONFIG_FIELDS` become attributes, with
    defaults filled in.

    :param attrs: The configuration as a dict.
    :raises kerninv.config.ConfigValidationError: If a value is invalid.
    """

    # Used to lock access to the configuration file when performing certain
    # operations, such as saving.
    _file_lock = Lock()
    # The name of the directory appended to ``XDG_CONFIG_DIRS``.
    _xdg_config_dir = 'kerninv'
    # The name of the file in which run configurations are stored.
    _xdg_config_file = 'run_configs.json'

    def __init__(self, **attrs):
        try:
            validated = RUN_CONFIG_FIELDS.validate(attrs)
        except ValidationError as err:
            raise ConfigValidationError(err.problems) from err
        problems = _cross_checks(validated)
        if problems:
            raise ConfigValidationError(problems)
        for key, value in validated.items():
            setattr(self, key, value)

    def __repr__(self):
        """Return a string representation of the object."""
        kv_pairs = ', '.join(f'{key}={value!r}' for key, value in vars(self).items())
        return f'{self.__module__}.{type(self).__name__}({kv_pairs})'

    def to_json_dict(self):
        """Return the configuration, defaults included, as a dict."""
        return json.loads(json.dumps(vars(self)))

    def digest(self):
        """Return a SHA-256 hex digest of the canonical JSON form."""
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def from_file(cls, path):
        """Read a configuration from a JSON file.

        :raises kerninv.config.ConfigValidationError: If the file is not a
            valid configuration.
        """
        with open(path, encoding='utf-8') as config_file:
            try:
                attrs = json.load(config_file)
            except json.JSONDecodeError as err:
                raise ConfigValidationError([('', f'{path} is not valid JSON: {err}')]) from err
        if not isinstance(attrs, dict):
            raise ConfigValidationError([('', f'{path} must hold a JSON object')])
        return cls(**attrs)

    @classmethod
    def load(cls, spec):
        """Read a configuration from a path, or from a label as ``label:<name>``."""
        if spec.startswith('label:'):
            return cls.get(spec[len('label:') :])
        return cls.from_file(spec)

    @classmethod
    def gen_value(cls):
        """Return a random valid configuration for the toy dataset."""
        attrs = RUN_CONFIG_FIELDS.gen_value()
        attrs['dataset'].update(source='toy', split=[0.5, 0.25, 0.25], drop=[])
        attrs['kernels']['x']['family'] = 'rbf-gaussian'
        attrs['lambda_grid']['values'] = None
        attrs['gammas'] = None
        return cls(**attrs)

    @classmethod
    def delete(cls, label='default', path=None):
        """Delete a run configuration.

        This method is thread safe.

        :param label: A string. The configuration identified by ``label`` is
            deleted.
        :param path: A string. The configuration file to be manipulated.
            Defaults to what is returned by
            :func:`kerninv.config._get_config_file_path`.
        :returns: ``None``
        """
        if path is None:
            path = _get_config_file_path(cls._xdg_config_dir, cls._xdg_config_file)
        with cls._file_lock:
            with open(path) as config_file:
                config = json.load(config_file)
            del config[label]
            with open(path, 'w') as config_file:
                json.dump(config, config_file)

    @classmethod
    def get(cls, label='default', path=None):
        """Read a run configuration from the labelled configuration file.

        :param label: A string. The configuration identified by ``label`` is
            read.
        :param path: A string. The configuration file to be manipulated.
            Defaults to what is returned by
            :func:`kerninv.config._get_config_file_path`.
        :returns: A brand new :class:`kerninv.config.RunConfig`.
        :raises kerninv.config.ConfigFileError: If no file exists or it holds
            no configuration called ``label``.
        """
        if path is None:
            path = _get_config_file_path(cls._xdg_config_dir, cls._xdg_config_file)
        with open(path) as config_file:
            config = json.load(config_file)
        if label not in config:
            raise ConfigFileError(f'{path} holds no configuration labelled {label!r}.')
        return cls(**config[label])

    @classmethod
    def get_labels(cls, path=None):
        """Get all run configuration labels.

        :param path: A string. The configuration file to be manipulated.
            Defaults to what is returned by
            :func:`kerninv.config._get_config_file_path`.
        :returns: Run configuration labels, where each label is a string.
        """
        if path is None:
            path = _get_config_file_path(cls._xdg_config_dir, cls._xdg_config_file)
        with open(path) as config_file:
            return tuple(json.load(config_file).keys())

    def save(self, label='default', path=None):
        """Save the current run configuration to a file.

        This method is thread safe.

        :param label: A string. An identifier for the current configuration.
            If a configuration identified by ``label`` already exists in the
            destination configuration file, it is replaced.
        :param path: A string. The configuration file to be manipulated. By
            default, an XDG-compliant configuration file is used. A
            configuration file is created if one does not exist already.
        :returns: ``None``
        """
        if path is None:
            path = join(BaseDirectory.save_config_path(self._xdg_config_dir), self._xdg_config_file)
        with self._file_lock:
            # Either read an existing config or make an empty one. Then update
            # the config and write it out.
            try:
                with open(path) as config_file:
                    config = json.load(config_file)
            except OSError:
                config = {}
            config[label] = self.to_json_dict()
            with open(path, 'w') as config_file:
                json.dump(config, config_file)
        logger.debug('Saved run configuration %r to %s.', label, path)
