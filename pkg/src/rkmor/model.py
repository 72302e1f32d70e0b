"""SISO descriptor systems, Matrix Market ingestion and test problems."""

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse

from rkmor.errors import DimensionMismatch, ParseError, SingularMass
from rkmor.numkernel import ShiftedSolver, _factor, as_cmatrix, as_cvector, EPS


class StateSpaceSystem:
    r"""SISO system with transfer function :math:`h(z) = c^H (zE - A)^{-1} b`.

    Parameters
    ----------
    A
        State matrix (``n x n``).
    E
        Mass matrix (``n x n``); ``None`` means the identity.
    b
        Input vector.
    c
        Output vector.
    """

    def __init__(self, A, E, b, c):
        A = as_cmatrix(A, 'A')
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f'A must be square, got {A.shape}')
        E = np.eye(n, dtype=complex) if E is None else as_cmatrix(E, 'E')
        b = as_cvector(b, 'b')
        c = as_cvector(c, 'c')
        if E.shape != (n, n):
            raise DimensionMismatch(f'E has shape {E.shape}, expected {(n, n)}')
        if b.shape != (n,) or c.shape != (n,):
            raise DimensionMismatch(f'b, c must have length {n}, got {b.size}, {c.size}')
        if n and not np.array_equal(E, np.eye(n)):
            _, _, rcond = _factor(E)
            if not rcond >= EPS:
                raise SingularMass(f'E is singular (rcond={rcond:.3e})')
        for name, val in (('A', A), ('E', E), ('b', b), ('c', c)):
            val.setflags(write=False)
            setattr(self, name, val)
        self.solver = ShiftedSolver(A, E)

    def __repr__(self):
        kind = 'standard' if self.has_identity_mass else 'descriptor'
        return f'StateSpaceSystem(n={self.n}, {kind})'

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def has_identity_mass(self):
        return self.solver.identity_mass


@dataclass(frozen=True)
class SampleGrid:
    """Conjugate-symmetric sample set on the imaginary axis.

    ``points`` holds ``-i*logspace(alpha, beta, k)``, ``0`` and
    ``i*logspace(alpha, beta, k)``, sorted by imaginary part.
    """

    alpha: float
    beta: float
    k: int
    points: np.ndarray

    def __len__(self):
        return self.points.size


def make_grid(alpha, beta, k):
    """Build the sample grid with ``2k+1`` points."""
    k = int(k)
    if k < 1:
        raise ValueError('k must be >= 1')
    if alpha > beta:
        raise ValueError('alpha must not exceed beta')
    mags = np.logspace(alpha, beta, k)
    points = np.concatenate([-1j * mags[::-1], [0j], 1j * mags])
    points.setflags(write=False)
    return SampleGrid(float(alpha), float(beta), k, points)


def _read_mtx(path):
    try:
        M = scipy.io.mmread(str(path))
    except (OSError, ValueError, IndexError, TypeError) as exc:
        raise ParseError(f'{path}: {exc}') from exc
    if scipy.sparse.issparse(M):
        M = M.toarray()
    return np.asarray(M)


def _resolve(path, data_root):
    path = Path(path)
    if not path.is_absolute():
        root = data_root if data_root is not None else os.environ.get('RKMOR_DATA_ROOT', '.')
        path = Path(root) / path
    if not path.exists():
        raise FileNotFoundError(str(path))
    return path


def load_system(path_A, path_E=None, path_b=None, path_c=None, data_root=None):
    """Assemble a system from Matrix Market files.

    `b` and `c` must be single vectors (``n x 1`` or ``1 x n``).  When
    `path_E` is omitted the identity is used.  Relative paths are resolved
    against `data_root` (default: ``$RKMOR_DATA_ROOT`` or the working
    directory).
    """
    if path_b is None or path_c is None:
        raise ValueError('path_b and path_c are required')
    A = _read_mtx(_resolve(path_A, data_root))
    E = None if path_E is None else _read_mtx(_resolve(path_E, data_root))
    vecs = []
    for name, p in (('b', path_b), ('c', path_c)):
        v = _read_mtx(_resolve(p, data_root))
        if min(v.shape) != 1:
            raise DimensionMismatch(f'{name} must be a single vector, got shape {v.shape}')
        vecs.append(v.reshape(-1))
    return StateSpaceSystem(A, E, *vecs)


def save_system(sys, directory, prefix='sys'):
    """Write `sys` as array-format Matrix Market files; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in ('A', 'E', 'b', 'c'):
        val = getattr(sys, name)
        if val.ndim == 1:
            val = val.reshape(-1, 1)
        if not np.any(val.imag):
            val = val.real
        p = directory / f'{prefix}_{name}.mtx'
        scipy.io.mmwrite(str(p), np.ascontiguousarray(val), precision=17)
        paths[name] = p
    return paths


def gen_test_system(kind, n, seed=0, eigenvalues=None, descriptor=False):
    """Generate a deterministic test system.

    Parameters
    ----------
    kind
        ``'random_stable'``: Gaussian ``A`` (scaled by ``1/sqrt(n)``) and
        Gaussian ``b``, ``c``; if the pencil has an eigenvalue with
        nonnegative real part, ``2*max_real*E`` is subtracted from ``A``.
        ``'laplacian_1d'``: ``(n+1)^2 * tridiag(1, -2, 1)`` with all-ones
        ``b = c``.  ``'diagonal'``: ``A = diag(eigenvalues)`` (default
        ``-1, -2, ..., -n``) with all-ones ``b = c``.
    n
        Dimension.
    seed
        Seed for the random generator.
    eigenvalues
        Diagonal of ``A`` for ``kind='diagonal'``.
    descriptor
        For ``'random_stable'``, use a random well-conditioned ``E != I``.
    """
    n = int(n)
    if n < 1:
        raise ValueError('n must be >= 1')
    rng = np.random.default_rng(seed)
    E = None
    if kind == 'random_stable':
        A = rng.standard_normal((n, n)) / np.sqrt(n)
        b = rng.standard_normal(n)
        c = rng.standard_normal(n)
        E = np.eye(n)
        if descriptor:
            E = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
        lam = scipy.linalg.eigvals(A, E)
        mr = float(np.max(lam.real))
        if mr >= 0:
            A = A - (2 * mr if mr > 0 else 1.0) * E
    elif kind == 'laplacian_1d':
        A = (n + 1) ** 2 * (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1)
                            + np.diag(np.ones(n - 1), -1))
        b = c = np.ones(n)
    elif kind == 'diagonal':
        d = -np.arange(1.0, n + 1) if eigenvalues is None else np.asarray(eigenvalues)
        if d.shape != (n,):
            raise DimensionMismatch(f'need {n} eigenvalues, got {d.shape}')
        A = np.diag(d)
        b = c = np.ones(n)
    else:
        raise ValueError(f'unknown system kind {kind!r}')
    return StateSpaceSystem(A, E, b, c)
