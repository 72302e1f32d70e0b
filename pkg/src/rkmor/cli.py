"""Command-line harness: ``rkmor run <config>`` and ``rkmor verify``.

A run configuration is an INI file::

    [system]
    kind = laplacian_1d          ; or A/E/b/c = paths to Matrix Market files
    n = 400
    seed = 0

    [grid]                       ; evaluation grid Z_e
    alpha = -3
    beta = 5
    k = 700

    [output]
    dir = out
    record_timing = false        ; wall times in summary.csv

    [algorithm.arksm]
    l_max = 20

    [algorithm.two_sided_o2]
    alpha = -3
    beta = 5
    k = 700
    l_max = 20

    [algorithm.irka]
    l_max = 20

Exit codes of ``run``: 0 on success, 2 for configuration errors and 3 for
numerical failures.  ``verify`` exits with 0 iff every suite passes.
"""

import argparse
import configparser
import csv
import json
import logging
import platform
import sys as _sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from rkmor.errors import ConfigError, DimensionMismatch, ParseError, RKMORError
from rkmor.greedy import (ALGORITHMS, arksm, extreme_shift_bounds, hinf_sweep, irka_baseline,
                          irka_initial_shifts, two_sided_greedy)
from rkmor.model import gen_test_system, load_system, make_grid
from rkmor.remainder import error_formula_batch, transfer_batch

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_ALGO_KEYS = {
    'arksm': {'l_max', 'grid_density'},
    'irka': {'l_max', 'max_iter', 'tol'},
}
for _o in (1, 2, 3):
    _ALGO_KEYS[f'two_sided_o{_o}'] = {'l_max', 'alpha', 'beta', 'k'}


@dataclass
class RunConfig:
    """Validated contents of a run configuration file."""

    system: dict
    algorithms: list
    grid: tuple = (-3.0, 5.0, 700)
    out_dir: Path = Path('out')
    seed: int = 0
    record_timing: bool = False
    source: dict = field(default_factory=dict)


def _get(section, key, conv, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f'[{section.name}] missing key {key!r}')
        return default
    try:
        return conv(section[key])
    except ValueError as exc:
        raise ConfigError(f'[{section.name}] {key}: {exc}') from exc


def _bool(text):
    t = text.strip().lower()
    if t in ('1', 'true', 'yes', 'on'):
        return True
    if t in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {text!r}')


def _floats(text):
    return [float(x) for x in text.replace(',', ' ').split()]


def load_config(path, seed=None, out_dir=None):
    """Parse and validate a run configuration.

    Raises
    ------
    ConfigError
        For unreadable files, unknown sections or algorithms, and invalid
        values.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(';', '#'))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f'cannot read config {path}: {exc}') from exc

    if 'system' not in cp:
        raise ConfigError('missing [system] section')
    known = {'system', 'grid', 'output'}
    for name in cp.sections():
        if name not in known and not name.startswith('algorithm.'):
            raise ConfigError(f'unknown section [{name}]')

    s = cp['system']
    cfg_seed = _get(s, 'seed', int, 0)
    seed = cfg_seed if seed is None else int(seed)
    if 'kind' in s:
        system = {'kind': s['kind'].strip(), 'n': _get(s, 'n', int),
                  'descriptor': _get(s, 'descriptor', _bool, False)}
        if system['kind'] not in ('random_stable', 'laplacian_1d', 'diagonal'):
            raise ConfigError(f'unknown system kind {system["kind"]!r}')
        if system['n'] < 1:
            raise ConfigError('n must be >= 1')
        if 'eigenvalues' in s:
            system['eigenvalues'] = _get(s, 'eigenvalues', _floats)
    elif 'a' in s:
        system = {'A': s['A'], 'E': s.get('E'), 'b': _get(s, 'b', str), 'c': _get(s, 'c', str),
                  'data_root': s.get('data_root')}
    else:
        raise ConfigError('[system] needs either kind= or A=/b=/c= paths')

    grid = (-3.0, 5.0, 700)
    if 'grid' in cp:
        g = cp['grid']
        grid = (_get(g, 'alpha', float, -3.0), _get(g, 'beta', float, 5.0),
                _get(g, 'k', int, 700))
    if grid[0] > grid[1] or grid[2] < 1:
        raise ConfigError(f'invalid evaluation grid {grid}')

    o = cp['output'] if 'output' in cp else {}
    out = Path(out_dir if out_dir is not None else o.get('dir', 'out'))
    record_timing = _bool(o.get('record_timing', 'false')) if o else False

    algorithms = []
    for name in cp.sections():
        if not name.startswith('algorithm.'):
            continue
        algo = name.split('.', 1)[1]
        if algo not in ALGORITHMS:
            raise ConfigError(f'unknown algorithm {algo!r}; known: {", ".join(ALGORITHMS)}')
        sec = cp[name]
        extra = set(sec) - _ALGO_KEYS[algo]
        if extra:
            raise ConfigError(f'[{name}] unknown keys {sorted(extra)}')
        params = {'l_max': _get(sec, 'l_max', int)}
        if algo == 'arksm':
            params['grid_density'] = _get(sec, 'grid_density', float, 50.0)
            if params['l_max'] < 2:
                raise ConfigError('arksm needs l_max >= 2')
        elif algo == 'irka':
            params['max_iter'] = _get(sec, 'max_iter', int, 100)
            params['tol'] = _get(sec, 'tol', float, 1e-6)
        else:
            params['alpha'] = _get(sec, 'alpha', float, grid[0])
            params['beta'] = _get(sec, 'beta', float, grid[1])
            params['k'] = _get(sec, 'k', int, grid[2])
            if params['alpha'] > params['beta'] or params['k'] < 1:
                raise ConfigError(f'[{name}] invalid candidate grid')
        if params['l_max'] < 1:
            raise ConfigError(f'[{name}] l_max must be >= 1')
        algorithms.append((algo, params))
    if not algorithms:
        raise ConfigError('no [algorithm.*] section')
    source = {sec: dict(cp[sec]) for sec in cp.sections()}
    return RunConfig(system, algorithms, grid, out, seed, record_timing, source)


def build_system(cfg):
    """Load or generate the system of `cfg`; input errors become `ConfigError`."""
    s = cfg.system
    try:
        if 'kind' in s:
            return gen_test_system(s['kind'], s['n'], cfg.seed, s.get('eigenvalues'),
                                   s['descriptor'])
        return load_system(s['A'], s['E'], s['b'], s['c'], s['data_root'])
    except (OSError, ParseError, DimensionMismatch, ValueError) as exc:
        raise ConfigError(f'cannot build system: {exc}') from exc


def _g17(x):
    return f'{float(x):.17g}'


def _run_algorithm(sys, algo, params, grid, h, bounds):
    if algo == 'arksm':
        return arksm(sys, params['l_max'], params['grid_density'], grid, h, bounds=bounds)
    if algo == 'irka':
        init = irka_initial_shifts(bounds, params['l_max'])
        return irka_baseline(sys, init, params['max_iter'], params['tol'], grid, h)
    option = int(algo[-1])
    return two_sided_greedy(sys, params['alpha'], params['beta'], params['k'],
                            params['l_max'], option, grid, h, bounds=bounds)


def _solves_at(run, idx):
    if run.algorithm == 'irka':
        return run.solve_count
    per = 1 if run.algorithm == 'arksm' else 2
    return per * run.models[idx].order


def write_curve(path, sys, rm, grid, h):
    """Write the error curve of `rm`; rows at poles are dropped.

    Returns the number of rows written.
    """
    curve = hinf_sweep(sys, rm, grid, h)
    ef = error_formula_batch(sys, rm, grid.points)
    keep = curve.valid & np.isfinite(ef)
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['z_imag', 'abs_h', 'abs_h_tilde', 'abs_e_direct', 'abs_e_formula'])
        for i in np.flatnonzero(keep):
            w.writerow([_g17(curve.points[i].imag), _g17(abs(curve.h_values[i])),
                        _g17(abs(curve.h_tilde_values[i])), _g17(abs(curve.e_direct[i])),
                        _g17(abs(ef[i]))])
    return int(keep.sum())


def run_benchmark(cfg, log=print):
    """Execute a validated `RunConfig`; returns the exit code."""
    sys = build_system(cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    grid = make_grid(*cfg.grid)

    t = time.perf_counter()
    h = transfer_batch(sys, grid.points)
    t_samples = time.perf_counter() - t
    try:
        bounds = extreme_shift_bounds(sys)
    except RKMORError as exc:
        log(f'error: extreme eigenvalue estimation failed: {exc}')
        return EXIT_NUMERIC

    summary, timing, files = [], [('get_samples', '', _g17(t_samples))], []
    for algo, params in cfg.algorithms:
        try:
            run = _run_algorithm(sys, algo, params, grid, h, bounds)
        except RKMORError as exc:
            log(f'error: {algo} failed: {type(exc).__name__}: {exc}')
            return EXIT_NUMERIC
        for i, rm in enumerate(run.models):
            secs = run.order_times[i] if i < len(run.order_times) else None
            summary.append([algo, rm.order, _g17(run.error_history[i]), _solves_at(run, i),
                            _g17(secs) if cfg.record_timing and secs is not None else ''])
            if secs is not None:
                timing.append((algo, rm.order, _g17(secs)))
        path = out / f'curve_{algo}.csv'
        try:
            rows = write_curve(path, sys, run.final_model, grid, h)
        except RKMORError as exc:
            log(f'error: {algo} error curve failed: {exc}')
            return EXIT_NUMERIC
        files.append(path.name)
        log(f'{algo}: order {run.final_model.order}, max error '
            f'{run.error_history[-1]:.3e}, {run.solve_count} solves, {rows} curve rows')

    with open(out / 'summary.csv', 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['algorithm', 'order', 'max_error', 'solves', 'seconds'])
        w.writerows(summary)
    with open(out / 'timing.csv', 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['stage', 'order', 'seconds'])
        w.writerows(timing)
    manifest = {
        'config': cfg.source,
        'seed': cfg.seed,
        'grid': list(cfg.grid),
        'files': files + ['summary.csv', 'timing.csv'],
        'versions': {'python': platform.python_version(), 'numpy': np.__version__,
                     'scipy': scipy.__version__, 'rkmor': _version()},
    }
    with open(out / 'manifest.json', 'w') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return EXIT_OK


def _version():
    from rkmor import __version__
    return __version__


def _cmd_run(args):
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
        return run_benchmark(cfg)
    except ConfigError as exc:
        print(f'config error: {exc}', file=_sys.stderr)
        return EXIT_CONFIG
    except RKMORError as exc:
        print(f'error: {type(exc).__name__}: {exc}', file=_sys.stderr)
        return EXIT_NUMERIC


def _cmd_verify(args):
    from rkmor.verify import run_suites
    results = run_suites(args.n, args.seeds, mutate=args.mutate, dd_cases=args.dd_cases)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog='rkmor', description=__doc__.split('\n')[0])
    p.add_argument('-v', '--verbose', action='store_true', help='log progress')
    sub = p.add_subparsers(dest='command', required=True)

    r = sub.add_parser('run', help='run a benchmark configuration')
    r.add_argument('config', help='INI configuration file')
    r.add_argument('--out', help='output directory (overrides [output] dir)')
    r.add_argument('--seed', type=int, help='seed (overrides [system] seed)')
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser('verify', help='run the error-formula invariant battery')
    v.add_argument('--n', type=int, nargs='+', default=[20, 40, 100], help='dimensions')
    v.add_argument('--seeds', type=int, nargs='+', default=list(range(10)),
                   help='seeds to test')
    v.add_argument('--dd-cases', type=int, default=100, help='random divided-difference node sets')
    v.add_argument('--mutate', action='store_true',
                   help='inject a sign error into the two-sided formula (must fail)')
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format='%(levelname)s %(name)s: %(message)s')
    return args.func(args)


if __name__ == '__main__':
    raise SystemExit(main())
