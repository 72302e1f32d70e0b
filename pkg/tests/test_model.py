import numpy as np
import pytest
from hypothesis import given, strategies as st

from rkmor.errors import DimensionMismatch, ParseError, SingularMass
from rkmor.model import StateSpaceSystem, gen_test_system, load_system, make_grid, save_system
from rkmor.remainder import transfer_eval


def test_identity_mass_default():
    sys = StateSpaceSystem(np.diag([-1.0, -2.0]), None, [1, 1], [1, 1])
    assert sys.has_identity_mass
    np.testing.assert_array_equal(sys.E, np.eye(2))


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        StateSpaceSystem(np.eye(3), None, np.ones(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        StateSpaceSystem(np.ones((2, 3)), None, np.ones(2), np.ones(2))
    with pytest.raises(DimensionMismatch):
        StateSpaceSystem(np.eye(2), np.eye(3), np.ones(2), np.ones(2))


def test_singular_mass():
    with pytest.raises(SingularMass):
        StateSpaceSystem(np.eye(2), np.diag([1.0, 0.0]), np.ones(2), np.ones(2))


def test_system_is_read_only():
    sys = gen_test_system('diagonal', 3)
    with pytest.raises(ValueError):
        sys.A[0, 0] = 1.0


@given(st.floats(-4, 4), st.floats(0, 4), st.integers(1, 50))
def test_grid_structure(alpha, width, k):
    g = make_grid(alpha, alpha + width, k)
    assert len(g) == 2 * k + 1
    assert np.all(np.diff(g.points.imag) >= 0)
    np.testing.assert_array_equal(g.points.real, 0)
    np.testing.assert_array_equal(g.points[::-1], g.points.conj())
    assert g.points[k] == 0


def test_grid_values():
    g = make_grid(0, 2, 3)
    np.testing.assert_allclose(g.points.imag, [-100, -10, -1, 0, 1, 10, 100])


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(1, 0, 5)
    with pytest.raises(ValueError):
        make_grid(0, 1, 0)


def test_diagonal_transfer_function_partial_fractions():
    sys = gen_test_system('diagonal', 2, eigenvalues=[-1.0, -2.0])
    for z in (0.0, 1j, 2 - 3j):
        assert transfer_eval(sys, z) == pytest.approx(1 / (z + 1) + 1 / (z + 2), rel=1e-14)


@pytest.mark.parametrize('descriptor', [False, True])
def test_random_stable_is_stable(descriptor):
    for seed in range(20):
        sys = gen_test_system('random_stable', 15, seed, descriptor=descriptor)
        lam = np.linalg.eigvals(np.linalg.solve(sys.E, sys.A))
        assert lam.real.max() < 0


def test_generator_determinism():
    a = gen_test_system('random_stable', 10, 4, descriptor=True)
    b = gen_test_system('random_stable', 10, 4, descriptor=True)
    for name in 'AEbc':
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_laplacian_spectrum():
    n = 30
    sys = gen_test_system('laplacian_1d', n)
    j = np.arange(1, n + 1)
    ref = -4 * (n + 1) ** 2 * np.sin(j * np.pi / (2 * (n + 1))) ** 2
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(sys.A.real)), np.sort(ref), rtol=1e-10)
    np.testing.assert_array_equal(sys.b, np.ones(n))


def test_unknown_kind():
    with pytest.raises(ValueError):
        gen_test_system('nope', 3)


def test_save_load_round_trip(tmp_path):
    sys = gen_test_system('random_stable', 6, 1, descriptor=True)
    save_system(sys, tmp_path, 'x')
    back = load_system('x_A.mtx', 'x_E.mtx', 'x_b.mtx', 'x_c.mtx', data_root=tmp_path)
    for name in 'AEbc':
        np.testing.assert_array_equal(getattr(back, name), getattr(sys, name))


def test_load_without_mass(tmp_path):
    sys = gen_test_system('diagonal', 3)
    save_system(sys, tmp_path)
    back = load_system(tmp_path / 'sys_A.mtx', None, tmp_path / 'sys_b.mtx',
                       tmp_path / 'sys_c.mtx')
    assert back.has_identity_mass


def test_load_errors(tmp_path):
    (tmp_path / 'bad.mtx').write_text('this is not matrix market\n')
    sys = gen_test_system('diagonal', 3)
    save_system(sys, tmp_path)
    with pytest.raises(ParseError):
        load_system(tmp_path / 'bad.mtx', None, tmp_path / 'sys_b.mtx', tmp_path / 'sys_c.mtx')
    with pytest.raises(FileNotFoundError):
        load_system(tmp_path / 'missing.mtx', None, tmp_path / 'sys_b.mtx',
                    tmp_path / 'sys_c.mtx')
    # b given as a matrix
    with pytest.raises(DimensionMismatch):
        load_system(tmp_path / 'sys_A.mtx', None, tmp_path / 'sys_A.mtx',
                    tmp_path / 'sys_c.mtx')


def test_load_short_vector(tmp_path):
    import scipy.io
    save_system(gen_test_system('diagonal', 3), tmp_path)
    scipy.io.mmwrite(str(tmp_path / 'short.mtx'), np.ones((2, 1)))
    with pytest.raises(DimensionMismatch):
        load_system(tmp_path / 'sys_A.mtx', None, tmp_path / 'short.mtx',
                    tmp_path / 'sys_c.mtx')
