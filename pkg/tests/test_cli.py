import csv
import json

import numpy as np
import pytest

from rkmor.cli import load_config, main
from rkmor.errors import ConfigError
from rkmor.model import gen_test_system, save_system

MINIMAL = """
[system]
kind = diagonal
n = 2
eigenvalues = -1, -2

[grid]
alpha = -3
beta = 5
k = 50

[algorithm.arksm]
l_max = 2
"""

BENCH = """
[system]
kind = random_stable
n = 30
seed = 3

[grid]
alpha = -2
beta = 3
k = 60

[algorithm.arksm]
l_max = 6

[algorithm.two_sided_o2]
l_max = 5
alpha = -2
beta = 3
k = 40

[algorithm.irka]
l_max = 4
"""


def write(tmp_path, text, name='cfg.ini'):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_minimal_run_is_exact(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 0
    rows = read_csv(tmp_path / 'o' / 'curve_arksm.csv')
    assert max(float(r['abs_e_direct']) for r in rows) <= 1e-8
    summary = read_csv(tmp_path / 'o' / 'summary.csv')
    assert [int(r['order']) for r in summary] == [1, 2]
    assert [int(r['solves']) for r in summary] == [1, 2]
    manifest = json.loads((tmp_path / 'o' / 'manifest.json').read_text())
    assert 'numpy' in manifest['versions'] and manifest['config']['system']['kind'] == 'diagonal'


def test_unknown_algorithm_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL.replace('algorithm.arksm', 'algorithm.foo'))
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 2
    assert 'foo' in capsys.readouterr().err


@pytest.mark.parametrize('text', [
    '[system]\nkind = diagonal\nn = 2\n',                       # no algorithm
    MINIMAL.replace('l_max = 2', 'l_max = 1'),                  # arksm order too small
    MINIMAL.replace('alpha = -3', 'alpha = 7'),                 # alpha > beta
    MINIMAL.replace('kind = diagonal', 'kind = cube'),
    MINIMAL + '\n[extra]\nx = 1\n',
    MINIMAL.replace('l_max = 2', 'l_max = two'),
    MINIMAL.replace('l_max = 2', 'l_max = 2\nspeed = 3'),
    'not an ini file',
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))
    assert main(['run', str(write(tmp_path, text)), '--out', str(tmp_path / 'o')]) == 2


def test_missing_config_file(tmp_path):
    assert main(['run', str(tmp_path / 'nope.ini')]) == 2


def test_missing_matrix_file(tmp_path):
    cfg = write(tmp_path, MINIMAL.replace('kind = diagonal\nn = 2\neigenvalues = -1, -2',
                                          'A = a.mtx\nb = b.mtx\nc = c.mtx\n'
                                          f'data_root = {tmp_path}'))
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 2


def test_matrix_market_system(tmp_path):
    sys = gen_test_system('random_stable', 12, 0, descriptor=True)
    save_system(sys, tmp_path / 'data')
    text = BENCH.replace('kind = random_stable\nn = 30\nseed = 3',
                         f'A = sys_A.mtx\nE = sys_E.mtx\nb = sys_b.mtx\nc = sys_c.mtx\n'
                         f'data_root = {tmp_path / "data"}')
    assert main(['run', str(write(tmp_path, text)), '--out', str(tmp_path / 'o')]) == 0


def test_curve_rows_and_formula_agreement(tmp_path):
    cfg = write(tmp_path, BENCH)
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 0
    for algo in ('arksm', 'two_sided_o2', 'irka'):
        rows = read_csv(tmp_path / 'o' / f'curve_{algo}.csv')
        # the grid has no poles of h or h_tilde on it here
        assert len(rows) == 2 * 60 + 1
        for r in rows:
            assert abs(float(r['abs_e_formula']) - float(r['abs_e_direct'])) <= \
                1e-7 * (1 + float(r['abs_h']))


def test_solve_accounting_in_summary(tmp_path):
    cfg = write(tmp_path, BENCH)
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 0
    rows = read_csv(tmp_path / 'o' / 'summary.csv')
    for r in rows:
        order, solves = int(r['order']), int(r['solves'])
        if r['algorithm'] == 'arksm':
            assert solves == order
        elif r['algorithm'] == 'two_sided_o2':
            assert solves == 2 * order
        else:
            assert solves % (2 * order) == 0
        assert r['seconds'] == ''


def test_summary_is_byte_identical(tmp_path):
    cfg = write(tmp_path, BENCH)
    for out in ('a', 'b'):
        assert main(['run', str(cfg), '--out', str(tmp_path / out)]) == 0
    for name in ('summary.csv', 'curve_arksm.csv', 'curve_two_sided_o2.csv', 'curve_irka.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_seed_override_changes_system(tmp_path):
    cfg = write(tmp_path, BENCH)
    main(['run', str(cfg), '--out', str(tmp_path / 'a')])
    main(['run', str(cfg), '--out', str(tmp_path / 'b'), '--seed', '4'])
    assert (tmp_path / 'a' / 'summary.csv').read_bytes() != \
        (tmp_path / 'b' / 'summary.csv').read_bytes()


def test_record_timing(tmp_path):
    cfg = write(tmp_path, MINIMAL + '\n[output]\nrecord_timing = true\n')
    assert main(['run', str(cfg), '--out', str(tmp_path / 'o')]) == 0
    rows = read_csv(tmp_path / 'o' / 'summary.csv')
    assert all(float(r['seconds']) >= 0 for r in rows)
    timing = read_csv(tmp_path / 'o' / 'timing.csv')
    assert timing[0]['stage'] == 'get_samples'


def test_numerical_failure_exit_code(tmp_path, capsys):
    # a singular mass matrix is a numerical failure of the input system
    sys = gen_test_system('diagonal', 3)
    save_system(sys, tmp_path)
    import scipy.io
    scipy.io.mmwrite(str(tmp_path / 'E0.mtx'), np.diag([1.0, 0.0, 1.0]))
    text = MINIMAL.replace('kind = diagonal\nn = 2\neigenvalues = -1, -2',
                           f'A = sys_A.mtx\nE = E0.mtx\nb = sys_b.mtx\nc = sys_c.mtx\n'
                           f'data_root = {tmp_path}')
    assert main(['run', str(write(tmp_path, text)), '--out', str(tmp_path / 'o')]) == 3
    assert 'SingularMass' in capsys.readouterr().err


def test_verify_passes_and_lists_cases(capsys):
    assert main(['verify', '--n', '20', '40', '--seeds', '0', '1', '--dd-cases', '20']) == 0
    out = capsys.readouterr().out
    for n in (20, 40):
        for seed in (0, 1):
            for mode in ('two_sided', 'one_sided', 'descriptor'):
                assert f'n={n} seed={seed} mode={mode}' in out
    for suite in ('central', 'interpolation', 'quadrature', 'divided_difference'):
        assert f'{suite}: PASS' in out


def test_verify_default_run():
    assert main(['verify']) == 0


def test_verify_detects_mutation(capsys):
    assert main(['verify', '--n', '20', '--seeds', '0', '--dd-cases', '5', '--mutate']) == 1
    assert 'central: FAIL' in capsys.readouterr().out
