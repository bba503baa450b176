"""Datasets: the Gaussian toy generator, CSV ingestion, preprocessing and splits.

A :class:`Dataset` holds three float64 arrays: the inputs ``x`` (``n x p``),
the target ``y`` and the semantic attribute ``s`` (``n x q`` each). A
categorical target or attribute is a single column of integer codes in
``[0, k)``; its labels live in the matching :class:`ColumnMeta`.

CSV files come with a JSON schema naming the role and type of every column::

    {"age": {"role": "x", "type": "continuous"},
     "sex": {"role": "s", "type": "categorical"},
     "income": {"role": "y", "type": "categorical"}}

"""

import json
import logging

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

#: Threshold of the toy target bits, the upper quartile of a standard normal.
TOY_THRESHOLD = 0.6744

#: Scale of the observation noise of the toy inputs.
TOY_NOISE = 0.005

ROLES = ('x', 'y', 's')
KINDS = ('continuous', 'categorical')
POLICIES = ('max-divide', 'none')


class DataError(ValueError):
    """Indicates that a dataset is malformed or cannot be built."""


class CsvFormatError(DataError):
    """Indicates that a CSV cell or file could not be parsed.

    :param message: A description of the problem.
    :param row: The 1-based line number in the file, if known.
    :param column: The column name, if known.
    """

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumnError(DataError):
    """Indicates that a column named by a schema or a caller does not exist."""


class EmptySplitError(DataError):
    """Indicates that a split would contain no samples."""


class ColumnMeta:
    """Name, role and type of one column.

    :param name: The column name.
    :param role: One of ``x``, ``y`` or ``s``.
    :param kind: ``continuous`` or ``categorical``.
    :param categories: The labels of a categorical column, code order.
    """

    def __init__(self, name, role, kind='continuous', categories=None):
        if role not in ROLES:
            raise DataError(f'Column {name!r} has role {role!r}; valid roles are {ROLES}.')
        if kind not in KINDS:
            raise DataError(f'Column {name!r} has type {kind!r}; valid types are {KINDS}.')
        self.name = name
        self.role = role
        self.kind = kind
        self.categories = list(categories) if categories is not None else None
        if kind == 'categorical' and not self.categories:
            raise DataError(f'Categorical column {name!r} needs at least one category.')

    @property
    def categorical(self):
        """Return whether the column holds category codes."""
        return self.kind == 'categorical'

    def __repr__(self):
        """Return a string representation of the object."""
        kv_pairs = ', '.join(f'{key}={value!r}' for key, value in vars(self).items())
        return f'{self.__module__}.{type(self).__name__}({kv_pairs})'

    def __eq__(self, other):
        """Compare two columns attribute by attribute."""
        return isinstance(other, ColumnMeta) and vars(self) == vars(other)

    __hash__ = None


def _as_columns(values, n=None):
    """Return ``values`` as a 2-D float64 array."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if n is not None and values.shape[0] != n:
        raise DataError(f'Expected {n} rows, got {values.shape[0]}.')
    return values


class Dataset:
    """Inputs, target and semantic attribute of ``n`` samples.

    :param x: An ``n x p`` array.
    :param y: An ``n`` vector or ``n x q_Y`` array.
    :param s: An ``n`` vector or ``n x q_S`` array.
    :param x_meta: One :class:`ColumnMeta` per column of ``x``.
    :param y_meta: One :class:`ColumnMeta` per column of ``y``.
    :param s_meta: One :class:`ColumnMeta` per column of ``s``.
    :raises kerninv.data.DataError: If an entry is not finite, a category code
        is out of range or a categorical target or attribute is mixed with
        other columns.
    """

    def __init__(self, x, y, s, x_meta, y_meta, s_meta):
        x = _as_columns(x)
        n = x.shape[0]
        self.x = x
        self.y = _as_columns(y, n)
        self.s = _as_columns(s, n)
        self.x_meta = list(x_meta)
        self.y_meta = list(y_meta)
        self.s_meta = list(s_meta)
        self.divisors = None
        for role, values, meta in (
            ('x', self.x, self.x_meta),
            ('y', self.y, self.y_meta),
            ('s', self.s, self.s_meta),
        ):
            if len(meta) != values.shape[1]:
                raise DataError(
                    f'The {role} part has {values.shape[1]} columns but {len(meta)} descriptions.'
                )
            if not np.all(np.isfinite(values)):
                raise DataError(f'The {role} part contains NaN or infinite entries.')
            for index, column in enumerate(meta):
                if column.categorical:
                    codes = values[:, index]
                    k = len(column.categories)
                    if np.any(codes != np.floor(codes)) or np.any(codes < 0) or np.any(codes >= k):
                        raise DataError(f'Column {column.name!r} has codes outside [0, {k}).')
            if role != 'x' and len(meta) > 1 and any(column.categorical for column in meta):
                raise DataError(
                    f'A categorical {role} must be a single column, got {len(meta)} columns.'
                )

    @property
    def n(self):
        """Return the number of samples."""
        return self.x.shape[0]

    @property
    def y_categorical(self):
        """Return whether the target is a single categorical column."""
        return self.y_meta[0].categorical

    @property
    def s_categorical(self):
        """Return whether the semantic attribute is a single categorical column."""
        return self.s_meta[0].categorical

    @property
    def y_classes(self):
        """Return the number of target classes, or ``None`` for a real target."""
        return len(self.y_meta[0].categories) if self.y_categorical else None

    @property
    def s_groups(self):
        """Return the number of attribute groups, or ``None`` for a real attribute."""
        return len(self.s_meta[0].categories) if self.s_categorical else None

    def subset(self, indices):
        """Return the samples at ``indices`` as a new dataset."""
        subset = Dataset(
            self.x[indices],
            self.y[indices],
            self.s[indices],
            self.x_meta,
            self.y_meta,
            self.s_meta,
        )
        subset.divisors = self.divisors
        return subset

    def schema(self):
        """Return the schema describing this dataset's columns."""
        return {
            column.name: {'role': column.role, 'type': column.kind}
            for column in self.x_meta + self.y_meta + self.s_meta
        }

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}(n={self.n}, p={self.x.shape[1]}, '
            f'y={[column.name for column in self.y_meta]}, '
            f's={[column.name for column in self.s_meta]})'
        )


class SplitSpec:
    """Fractions of the train, validation and test splits.

    :param fractions: Three positive floats that sum to 1.
    :param seed: Seed of the shuffle.
    """

    def __init__(self, fractions=(1 / 3, 1 / 3, 1 / 3), seed=0):
        fractions = tuple(float(fraction) for fraction in fractions)
        if len(fractions) != 3 or any(fraction <= 0 for fraction in fractions):
            raise DataError(f'Expected three positive fractions, got {fractions}.')
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise DataError(f'The split fractions must sum to 1, got {sum(fractions)}.')
        self.fractions = fractions
        self.seed = int(seed)

    def __repr__(self):
        """Return a string representation of the object."""
        return (
            f'{self.__module__}.{type(self).__name__}'
            f'(fractions={self.fractions}, seed={self.seed})'
        )


def gen_gaussian_toy(n, seed):
    """Sample the Gaussian toy dataset.

    With ``U`` and ``N`` independent standard normal 4-vectors,

    * ``X = cos(pi U / 6) + 0.005 N``
    * ``S = [sin(pi U_1 / 6), sin(pi U_2 / 6), cos(pi U_3 / 6), cos(pi U_4 / 6)]``
    * ``Y = sum_i 2^(i-1) 1{|U_i| > 0.6744}``, a 16-class label whose least
      significant bit is ``Y_1``.

    ``S`` depends on ``X`` but ``[S_1, S_2]`` is only mean independent of
    ``[X_1, X_2]``. Sampling uses a PCG64 generator and its ziggurat normal
    sampler, so a seed reproduces the dataset on every platform.

    :param n: A positive integer.
    :param seed: An integer.
    :returns: A :class:`Dataset`.
    :raises kerninv.data.DataError: If ``n < 1``.
    """
    if n < 1:
        raise DataError(f'The toy dataset needs at least one sample, got n={n}.')
    rng = np.random.Generator(np.random.PCG64(seed))
    latent = rng.standard_normal((n, 4))
    noise = rng.standard_normal((n, 4))
    angle = np.pi * latent / 6.0
    x = np.cos(angle) + TOY_NOISE * noise
    s = np.hstack([np.sin(angle[:, :2]), np.cos(angle[:, 2:])])
    bits = (np.abs(latent) > TOY_THRESHOLD).astype(np.int64)
    y = bits @ (2 ** np.arange(4))
    return Dataset(
        x,
        y.astype(np.float64),
        s,
        [ColumnMeta(f'x{i}', 'x') for i in range(1, 5)],
        [ColumnMeta('y', 'y', 'categorical', [str(code) for code in range(16)])],
        [ColumnMeta(f's{i}', 's') for i in range(1, 5)],
    )


def read_schema(path):
    """Read a schema file and check every entry.

    :returns: A dict mapping column names to ``{'role': ..., 'type': ...}``.
    :raises kerninv.data.DataError: If an entry has an unknown role or type,
        or a role has no column.
    """
    with open(path, encoding='utf-8') as handle:
        schema = json.load(handle)
    if not isinstance(schema, dict):
        raise DataError(f'The schema in {path} must be a JSON object.')
    for name, entry in schema.items():
        if entry.get('role') not in ROLES or entry.get('type', 'continuous') not in KINDS:
            raise DataError(f'Column {name!r} of {path} has an invalid entry {entry!r}.')
    for role in ROLES:
        if not any(entry['role'] == role for entry in schema.values()):
            raise DataError(f'The schema in {path} assigns no column to role {role!r}.')
    return schema


def write_schema(schema, path):
    """Write ``schema`` as JSON."""
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(schema, handle, indent=2, sort_keys=False)
        handle.write('\n')


def load_csv(path, schema):
    """Read a dataset from a CSV file.

    Continuous columns are parsed as float64. Categorical columns are
    dictionary-encoded, codes following the order in which labels first
    appear.

    :param path: A comma-separated UTF-8 file with a header row.
    :param schema: A schema dict, or the path of a schema file.
    :returns: A :class:`Dataset`.
    :raises kerninv.data.MissingColumnError: If a schema column is absent.
    :raises kerninv.data.CsvFormatError: If the file is empty or a continuous
        cell is not a number.
    """
    if not isinstance(schema, dict):
        schema = read_schema(schema)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError as err:
        raise CsvFormatError(f'{path} is empty.') from err
    if frame.shape[0] == 0:
        raise CsvFormatError(f'{path} has a header but no data rows.', row=2)
    missing = [name for name in schema if name not in frame.columns]
    if missing:
        raise MissingColumnError(f'{path} has no column(s) {missing}.')
    parts = {role: ([], []) for role in ROLES}
    for name, entry in schema.items():
        cells = frame[name].str.strip()
        kind = entry.get('type', 'continuous')
        if kind == 'continuous':
            values = pd.to_numeric(cells, errors='coerce').to_numpy(dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                row = int(bad[0])
                raise CsvFormatError(
                    f'{path}, line {row + 2}, column {name!r}: {frame[name].iloc[row]!r} is not '
                    'a finite number.',
                    row=row + 2,
                    column=name,
                )
            meta = ColumnMeta(name, entry['role'])
        else:
            codes, labels = pd.factorize(cells, sort=False)
            values = codes.astype(np.float64)
            meta = ColumnMeta(name, entry['role'], kind, [str(label) for label in labels])
        parts[entry['role']][0].append(values)
        parts[entry['role']][1].append(meta)
    logger.debug('Read %s rows and %s columns from %s.', frame.shape[0], len(schema), path)
    arrays = {role: np.column_stack(values) for role, (values, _) in parts.items()}
    return Dataset(
        arrays['x'], arrays['y'], arrays['s'], parts['x'][1], parts['y'][1], parts['s'][1]
    )


def save_csv(dataset, path, schema_path=None):
    """Write ``dataset`` as CSV, and its schema if ``schema_path`` is given.

    Categorical columns are written with their labels, so :func:`load_csv`
    reads back the same codes. Floats use the shortest representation that
    parses back to the same value.
    """
    columns = {}
    for values, meta in (
        (dataset.x, dataset.x_meta),
        (dataset.y, dataset.y_meta),
        (dataset.s, dataset.s_meta),
    ):
        for index, column in enumerate(meta):
            if column.categorical:
                labels = np.asarray(column.categories, dtype=object)
                columns[column.name] = labels[values[:, index].astype(np.int64)]
            else:
                columns[column.name] = [repr(float(value)) for value in values[:, index]]
    pd.DataFrame(columns).to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    if schema_path is not None:
        write_schema(dataset.schema(), schema_path)
    logger.debug('Wrote %s rows to %s.', dataset.n, path)


def _one_hot_columns(dataset):
    """Expand categorical input columns into one indicator column per label."""
    blocks = []
    meta = []
    for index, column in enumerate(dataset.x_meta):
        values = dataset.x[:, index]
        if not column.categorical:
            blocks.append(values.reshape(-1, 1))
            meta.append(column)
            continue
        codes = values.astype(np.int64)
        block = np.zeros((dataset.n, len(column.categories)))
        block[np.arange(dataset.n), codes] = 1.0
        blocks.append(block)
        meta.extend(ColumnMeta(f'{column.name}={label}', 'x') for label in column.categories)
    return np.hstack(blocks), meta


def preprocess(dataset, policy='max-divide', one_hot=False, divisors=None):
    """Normalize the inputs of ``dataset``.

    With ``max-divide`` every continuous input column is divided by its
    largest absolute value. Pass the ``divisors`` of the processed training
    split when processing validation or test data, so all splits share the
    training scale. A column whose maximum is zero is left unchanged.

    :param dataset: A :class:`Dataset`.
    :param policy: ``max-divide`` or ``none``, either for all columns or as a
        dict mapping column names to a policy (missing names mean ``none``).
    :param one_hot: Whether to expand categorical input columns first.
    :param divisors: Optional dict of column name to divisor.
    :returns: A new :class:`Dataset` whose ``divisors`` attribute holds the
        divisors that were applied.
    """
    if one_hot:
        x, x_meta = _one_hot_columns(dataset)
    else:
        x, x_meta = dataset.x.copy(), list(dataset.x_meta)
    fitted = {}
    for index, column in enumerate(x_meta):
        column_policy = policy.get(column.name, 'none') if isinstance(policy, dict) else policy
        if column_policy not in POLICIES:
            raise DataError(f'Unknown policy {column_policy!r}; valid policies are {POLICIES}.')
        if column.categorical or column_policy == 'none':
            continue
        if divisors is not None and column.name in divisors:
            divisor = divisors[column.name]
        else:
            divisor = float(np.max(np.abs(x[:, index]))) if x.shape[0] else 0.0
            if divisor == 0.0:
                logger.warning('Column %r is constant zero; leaving it unchanged.', column.name)
                divisor = 1.0
        x[:, index] /= divisor
        fitted[column.name] = divisor
    processed = Dataset(x, dataset.y, dataset.s, x_meta, dataset.y_meta, dataset.s_meta)
    processed.divisors = fitted
    return processed


def split(dataset, spec):
    """Shuffle ``dataset`` and cut it into train, validation and test parts.

    :param dataset: A :class:`Dataset` with at least 3 samples.
    :param spec: A :class:`SplitSpec`.
    :returns: A ``(train, val, test)`` tuple of datasets.
    :raises kerninv.data.EmptySplitError: If a part would be empty.
    """
    n = dataset.n
    n_train = int(round(spec.fractions[0] * n))
    n_val = int(round(spec.fractions[1] * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise EmptySplitError(
            f'Splitting {n} samples by {spec.fractions} gives sizes '
            f'{(n_train, n_val, n_test)}; every part needs a sample.'
        )
    order = np.random.Generator(np.random.PCG64(spec.seed)).permutation(n)
    cuts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    return tuple(dataset.subset(indices) for indices in cuts)


def drop_columns(dataset, names):
    """Remove input columns by name.

    :raises kerninv.data.MissingColumnError: If a name is not an input column.
    """
    present = [column.name for column in dataset.x_meta]
    missing = [name for name in names if name not in present]
    if missing:
        raise MissingColumnError(f'No input column(s) {missing}; the inputs are {present}.')
    keep = [index for index, name in enumerate(present) if name not in names]
    if not keep:
        raise DataError('Dropping every input column leaves nothing to encode.')
    pruned = Dataset(
        dataset.x[:, keep],
        dataset.y,
        dataset.s,
        [dataset.x_meta[index] for index in keep],
        dataset.y_meta,
        dataset.s_meta,
    )
    pruned.divisors = dataset.divisors
    return pruned


def category_labels(dataset):
    """Return the labels of every categorical column, keyed by column name."""
    return {
        column.name: list(column.categories)
        for column in dataset.x_meta + dataset.y_meta + dataset.s_meta
        if column.categorical
    }


def align_categories(dataset, labels):
    """Recode categorical columns so that codes follow reference label lists.

    :func:`load_csv` numbers labels in order of first appearance, which depends
    on the file. Aligning a freshly loaded split with the labels of the
    training data makes its codes mean the same classes.

    :param dataset: A :class:`Dataset`.
    :param labels: A dict mapping column names to label lists, as returned by
        :func:`category_labels`. Columns not named are left alone.
    :returns: A new :class:`Dataset`.
    :raises kerninv.data.DataError: If a column holds a label missing from
        its reference list.
    """
    parts = []
    for values, meta in (
        (dataset.x, dataset.x_meta),
        (dataset.y, dataset.y_meta),
        (dataset.s, dataset.s_meta),
    ):
        values = values.copy()
        aligned = []
        for index, column in enumerate(meta):
            if not column.categorical or column.name not in labels:
                aligned.append(column)
                continue
            reference = list(labels[column.name])
            unknown = sorted(set(column.categories) - set(reference))
            if unknown:
                raise DataError(f'Column {column.name!r} has labels {unknown} unseen in training.')
            mapping = np.array([reference.index(label) for label in column.categories])
            values[:, index] = mapping[values[:, index].astype(np.int64)]
            aligned.append(ColumnMeta(column.name, column.role, column.kind, reference))
        parts.append((values, aligned))
    (x, x_meta), (y, y_meta), (s, s_meta) = parts
    result = Dataset(x, y, s, x_meta, y_meta, s_meta)
    result.divisors = dataset.divisors
    return result
