"""The ``kerninv`` command line.

Subcommands::

    kerninv gen-toy --n 18000 --seed 0 --out toy.csv
    kerninv sweep --config run.json          # or --config label:<name>
    kerninv eval --model model.json --data test.csv --schema toy.schema.json
    kerninv plot-data --curve curve.json --panel utility-invariance --out panel.txt

Exit codes: 0 on success, 2 for invalid input (configuration, schema, data or
arguments), 3 for numerical failures and 4 for I/O problems.

"""

import argparse
from importlib import metadata
import json
import logging
import os
import sys
import time

import inflection
import numpy as np
import pandas as pd

from kerninv.config import ConfigFileError, RunConfig
from kerninv.config_fields import ValidationError
from kerninv.data import (
    DataError,
    SplitSpec,
    align_categories,
    category_labels,
    drop_columns,
    gen_gaussian_toy,
    load_csv,
    preprocess,
    save_csv,
    split,
)
from kerninv.dependence import DependenceError, DependenceReport
from kerninv.kernels import KernelError, KernelSpec, median_bandwidth
from kerninv.solver import KernelConfig, ModelFormatError, SolverError
from kerninv.tradeoff import (
    PANELS,
    SPLITS,
    SweepError,
    TradeoffCurve,
    TradeoffModel,
    TradeoffPoint,
    lambda_grid,
    sweep,
    write_plot_data,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _schema_path_for(out_path):
    """Return the schema path written next to a dataset file."""
    return os.path.splitext(out_path)[0] + '.schema.json'


def cmd_gen_toy(n, seed, out_path, schema_path=None):
    """Write the Gaussian toy dataset and its schema.

    :returns: The path of the schema file.
    """
    dataset = gen_gaussian_toy(n, seed)
    schema_path = schema_path or _schema_path_for(out_path)
    save_csv(dataset, out_path, schema_path)
    logger.info('Wrote %s toy samples to %s.', n, out_path)
    return schema_path


def _load_dataset(cfg):
    """Build the raw dataset a configuration describes."""
    source = cfg.dataset
    if source['source'] == 'toy':
        dataset = gen_gaussian_toy(source['n'], source['seed'])
    else:
        dataset = load_csv(source['csv'], source['schema'])
    if source['drop']:
        dataset = drop_columns(dataset, source['drop'])
    return dataset


def _prepare_splits(cfg, dataset):
    """Split and preprocess ``dataset``; val and test reuse the train scale."""
    raw = split(dataset, SplitSpec(cfg.dataset['split'], cfg.dataset['split_seed']))
    policy = cfg.dataset['preprocess']
    one_hot = cfg.dataset['one_hot']
    train = preprocess(raw[0], policy, one_hot)
    prepared = [train] + [preprocess(part, policy, one_hot, train.divisors) for part in raw[1:]]
    return dict(zip(SPLITS, raw, strict=True)), dict(zip(SPLITS, prepared, strict=True))


def _kernel_spec(entry, values, meta, bandwidth_points, seed):
    """Resolve one kernel entry of a configuration against training data."""
    categorical = len(meta) == 1 and meta[0].categorical
    family = entry['family'] or ('one-hot-delta' if categorical else 'rbf-gaussian')
    if family == 'one-hot-delta':
        if not categorical:
            raise KernelError(
                f'one-hot-delta needs a single categorical column, not {[c.name for c in meta]}.'
            )
        return KernelSpec(family, 1, categories=len(meta[0].categories))
    if family == 'linear':
        return KernelSpec(family, values.shape[1])
    bandwidth = entry['bandwidth']
    if bandwidth == 'median':
        bandwidth = median_bandwidth(values, bandwidth_points, seed)
    return KernelSpec(family, values.shape[1], bandwidth=bandwidth)


def build_kernel_config(cfg, train):
    """Turn the ``kernels`` section of a configuration into a ``KernelConfig``.

    Median-heuristic bandwidths are computed on the training split.
    """
    kernels = cfg.kernels
    specs = {
        role: _kernel_spec(
            kernels[role],
            getattr(train, role),
            getattr(train, f'{role}_meta'),
            kernels['bandwidth_points'],
            cfg.seed,
        )
        for role in ('x', 'y', 's')
    }
    rff = kernels['x']['rff']
    rff_dim, rff_seed = (None, 0) if rff == 'off' else (rff['dim'], rff['seed'])
    return KernelConfig(specs['x'], specs['y'], specs['s'], rff_dim, rff_seed, kernels['tol'])


def _grid_of(cfg):
    """Return the lambda grid of a configuration."""
    grid = cfg.lambda_grid
    if grid['values'] is not None:
        return np.asarray(grid['values'], dtype=np.float64)
    return lambda_grid(grid['count'], grid['spacing'], grid['refine'])


def _versions():
    """Return the versions of the packages a sweep depends on."""
    versions = {}
    for package in ('kerninv', 'numpy', 'scipy', 'pandas'):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = None
    return versions


def _write_json(path, document):
    """Write ``document``, a dict or a JSON string, to ``path``."""
    with open(path, 'w', encoding='utf-8') as handle:
        if isinstance(document, str):
            handle.write(document)
        else:
            json.dump(document, handle, indent=2, sort_keys=True)
        handle.write('\n')


def cmd_sweep(config_path):
    """Run a sweep and write its curve, plot data, models and manifest.

    Everything goes to the ``output_dir`` of the configuration::

        curve.csv  curve.json  manifest.json
        data/{train,val,test}.csv  data/schema.json
        models/lambda-000.json ...
        plot-data/<panel>-<split>.txt

    :returns: The path of the manifest.
    """
    timings = {}
    started = time.perf_counter()
    cfg = RunConfig.load(config_path)
    out = cfg.output_dir
    for sub in ('data', 'models', 'plot-data'):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    raw, splits = _prepare_splits(cfg, _load_dataset(cfg))
    kernel_cfg = build_kernel_config(cfg, splits['train'])
    grid = _grid_of(cfg)
    timings['prepare'] = time.perf_counter() - started

    started = time.perf_counter()
    curve = sweep(
        splits,
        kernel_cfg,
        grid,
        cfg.gamma,
        gammas=cfg.gammas,
        fixed_r=cfg.fixed_r,
        workers=cfg.workers,
        evaluate_on=cfg.evaluate_on,
        invariance=cfg.invariance,
        ridge=cfg.ridge,
        keep_models=True,
    )
    timings['sweep'] = time.perf_counter() - started

    started = time.perf_counter()
    files = []

    def record(*parts):
        path = os.path.join(out, *parts)
        files.append(os.path.relpath(path, out))
        return path

    curve.to_csv(record('curve.csv'))
    _write_json(record('curve.json'), curve.to_json())
    for name, part in raw.items():
        save_csv(part, record('data', f'{name}.csv'))
    _write_json(record('data', 'schema.json'), raw['train'].schema())
    labels = category_labels(raw['train'])
    for index, lambda_ in enumerate(sorted(curve.models)):
        bundle = curve.models[lambda_]
        bundle.preprocessing.update(
            one_hot=cfg.dataset['one_hot'], categories=labels, drop=cfg.dataset['drop']
        )
        _write_json(record('models', f'lambda-{index:03d}.json'), bundle.to_json())
    for panel in PANELS:
        for name in curve.splits:
            write_plot_data(curve, panel, record('plot-data', f'{panel}-{name}.txt'), name)
    timings['write'] = time.perf_counter() - started

    manifest_path = os.path.join(out, 'manifest.json')
    _write_json(
        manifest_path,
        {
            'config_digest': cfg.digest(),
            'curve_digest': curve.digest,
            'config': cfg.to_json_dict(),
            'kernels': kernel_cfg.to_json_dict(),
            'versions': _versions(),
            'wall_times': timings,
            'files': files,
        },
    )
    logger.info('Sweep of %s lambdas written to %s.', len(grid), out)
    return manifest_path


def cmd_eval(model_path, dataset_path, schema_path, split_name='test'):
    """Evaluate a saved model on a dataset.

    The dataset is prepared exactly like the training data of the model:
    categories are aligned with the training labels and the inputs scaled by
    the training divisors.

    :returns: A dict with the dependence report, the utility and ``r``.
    """
    with open(model_path, encoding='utf-8') as handle:
        bundle = TradeoffModel.from_json(handle.read())
    preparation = bundle.preprocessing
    dataset = load_csv(dataset_path, schema_path)
    present = {column.name for column in dataset.x_meta}
    drop = [name for name in preparation.get('drop', []) if name in present]
    if drop:
        dataset = drop_columns(dataset, drop)
    dataset = align_categories(dataset, preparation.get('categories', {}))
    divisors = preparation.get('divisors', {})
    dataset = preprocess(
        dataset,
        {name: 'max-divide' for name in divisors},
        preparation.get('one_hot', False),
        divisors,
    )
    point = bundle.evaluate(dataset, split_name)
    if bundle.invariance == 'dpv':
        report = DependenceReport(point.dep_zs, point.dep_zy, dpv=point.invariance)
    else:
        report = DependenceReport(point.dep_zs, point.dep_zy, kcc_zs=point.invariance)
    return {
        'report': report.to_json_dict(),
        'utility': point.utility,
        'r': point.r_opt,
        'lambda': point.lambda_,
        'split': split_name,
    }


def _read_curve(path):
    """Read a curve from its JSON or CSV form."""
    if path.endswith('.csv'):
        frame = pd.read_csv(path)
        points = [
            TradeoffPoint(
                row['lambda'],
                row['r_opt'],
                row['dep_zy'],
                row['dep_zs'],
                row['objective'],
                row['utility'],
                row['invariance'],
                row['split'],
            )
            for row in frame.to_dict('records')
        ]
        return TradeoffCurve(points)
    with open(path, encoding='utf-8') as handle:
        return TradeoffCurve.from_json(handle.read())


def cmd_plot_data(curve_path, panel, out_path, split_name='test'):
    """Write the series of one figure panel."""
    write_plot_data(_read_curve(curve_path), panel, out_path, split_name)
    return out_path


def _build_parser():
    """Return the argument parser, one subparser per ``cmd_*`` function."""
    parser = argparse.ArgumentParser(
        prog='kerninv',
        description='Utility versus invariance trade-offs of kernel representations.',
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', required=True)

    gen_toy = commands.add_parser(inflection.dasherize('gen_toy'), help=cmd_gen_toy.__doc__)
    gen_toy.add_argument('--n', type=int, default=18000)
    gen_toy.add_argument('--seed', type=int, default=0)
    gen_toy.add_argument('--out', required=True)
    gen_toy.add_argument('--schema', default=None)

    sweep_cmd = commands.add_parser('sweep', help='run a lambda sweep')
    sweep_cmd.add_argument('--config', required=True, help='a JSON file or label:<name>')

    eval_cmd = commands.add_parser('eval', help='evaluate a saved model')
    eval_cmd.add_argument('--model', required=True)
    eval_cmd.add_argument('--data', required=True)
    eval_cmd.add_argument('--schema', required=True)
    eval_cmd.add_argument('--split', default='test', choices=SPLITS)

    plot = commands.add_parser(inflection.dasherize('plot_data'), help='write plot data')
    plot.add_argument('--curve', required=True)
    plot.add_argument('--panel', required=True, choices=PANELS)
    plot.add_argument('--out', required=True)
    plot.add_argument('--split', default='test', choices=SPLITS)
    return parser


def _dispatch(args):
    """Run the subcommand selected by ``args``."""
    command = inflection.underscore(args.command)
    if command == 'gen_toy':
        cmd_gen_toy(args.n, args.seed, args.out, args.schema)
    elif command == 'sweep':
        print(cmd_sweep(args.config))
    elif command == 'eval':
        print(json.dumps(cmd_eval(args.model, args.data, args.schema, args.split), indent=2))
    else:
        cmd_plot_data(args.curve, args.panel, args.out, args.split)


def exit_code_for(err):
    """Map an exception to the exit code of the command line."""
    if isinstance(err, ConfigFileError | ModelFormatError | OSError):
        return EXIT_IO
    if isinstance(err, SolverError | SweepError | DependenceError):
        return EXIT_NUMERICAL
    if isinstance(err, ValidationError | KernelError | DataError | ValueError | KeyError):
        return EXIT_VALIDATION
    return None


def main(argv=None):
    """Run the command line and return its exit code."""
    args = _build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger('kerninv').setLevel(logging.DEBUG)
    try:
        _dispatch(args)
    except Exception as err:
        code = exit_code_for(err)
        if code is None:
            raise
        print(f'kerninv {args.command}: {err}', file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
