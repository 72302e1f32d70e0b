"""Dense complex linear-algebra kernel.

Everything here works in complex arithmetic, also for real input.  The
functions are small wrappers around LAPACK (through SciPy) that add the
singularity checks the rest of the package relies on.
"""

import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla
from scipy.linalg import LinAlgWarning
from scipy.linalg.lapack import get_lapack_funcs

from rkmor.errors import DimensionMismatch, RankDeficient, SingularMass, SingularShift

EPS = np.finfo(float).eps


def as_cmatrix(M, name='matrix'):
    """Return `M` as a finite complex 2-D array."""
    M = np.array(M, dtype=complex, copy=True)
    if M.ndim != 2:
        raise DimensionMismatch(f'{name} must be 2-D, got shape {M.shape}')
    if not np.all(np.isfinite(M)):
        raise ValueError(f'{name} has non-finite entries')
    return M


def as_cvector(v, name='vector'):
    """Return `v` as a finite complex 1-D array."""
    v = np.array(v, dtype=complex, copy=True).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f'{name} has non-finite entries')
    return v


def _factor(M):
    """LU-factor `M` and estimate its reciprocal 1-norm condition number."""
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', LinAlgWarning)
        lu, piv = spla.lu_factor(M, check_finite=False)
    if M.shape[0] == 0:
        return lu, piv, 1.0
    anorm = np.linalg.norm(M, 1)
    if anorm == 0:
        return lu, piv, 0.0
    if np.any(np.diag(lu) == 0):
        return lu, piv, 0.0
    gecon, = get_lapack_funcs(('gecon',), (lu,))
    rcond, info = gecon(lu, anorm, norm='1')
    return lu, piv, float(rcond)


def factor_shifted(A, E, sigma):
    """Factor ``A - sigma*E``; raise `SingularShift` if it is singular."""
    lu, piv, rcond = _factor(A - sigma * E)
    if not rcond >= EPS:
        raise SingularShift(sigma, rcond)
    return lu, piv


def solve_shifted(A, E, sigma, rhs):
    """Solve ``(A - sigma*E) x = rhs``.

    Parameters
    ----------
    A, E
        Square matrices of equal size.
    sigma
        Complex shift.
    rhs
        Right-hand side vector.

    Returns
    -------
    x
        The solution as a complex vector.

    Raises
    ------
    SingularShift
        If the reciprocal condition estimate of ``A - sigma*E`` is below
        machine epsilon.
    """
    A = as_cmatrix(A, 'A')
    E = as_cmatrix(E, 'E')
    rhs = as_cvector(rhs, 'rhs')
    n = A.shape[0]
    if A.shape != (n, n) or E.shape != (n, n) or rhs.shape != (n,):
        raise DimensionMismatch('A, E must be square of equal size matching rhs')
    lu, piv = factor_shifted(A, E, complex(sigma))
    return spla.lu_solve((lu, piv), rhs, check_finite=False)


class ShiftedSolver:
    """Solver for shifted pencils ``A - sigma*E`` with cached LU factors.

    Factorizations are kept in a small LRU cache keyed by the shift, so that
    repeated solves with the same shift (e.g. when applying rational
    functions of ``E^{-1}A`` at many evaluation points) cost one triangular
    solve each.
    """

    def __init__(self, A, E, cache_size=None):
        self.A = A
        self.E = E
        n = A.shape[0]
        self.n = n
        if cache_size is None:
            cache_size = int(np.clip(4e8 / (16.0 * max(n, 1) ** 2), 4, 256))
        self.cache_size = cache_size
        self._cache = OrderedDict()
        self._mass = None
        self.identity_mass = bool(np.array_equal(E, np.eye(n)))

    def _lu(self, sigma, cache):
        key = complex(sigma)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        fac = factor_shifted(self.A, self.E, key)
        if cache:
            self._cache[key] = fac
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return fac

    def solve(self, sigma, rhs, adjoint=False, cache=True):
        """Solve ``(A - sigma E) x = rhs`` or ``(A - sigma E)^H x = rhs``."""
        lu = self._lu(sigma, cache)
        return spla.lu_solve(lu, rhs, trans=2 if adjoint else 0, check_finite=False)

    def solve_mass(self, rhs, adjoint=False):
        """Solve ``E x = rhs`` (or with ``E^H``)."""
        if self.identity_mass:
            return np.array(rhs, dtype=complex)
        if self._mass is None:
            lu, piv, rcond = _factor(self.E)
            if not rcond >= EPS:
                raise SingularMass(f'E is singular (rcond={rcond:.3e})')
            self._mass = (lu, piv)
        return spla.lu_solve(self._mass, rhs, trans=2 if adjoint else 0, check_finite=False)

    def apply_op(self, x, adjoint=False):
        """Apply ``E^{-1} A`` (or its adjoint ``A^H E^{-H}``) to `x`."""
        if adjoint:
            return self.A.conj().T @ self.solve_mass(x, adjoint=True)
        return self.solve_mass(self.A @ x)

    def apply_resolvent(self, sigma, x, adjoint=False, cache=True):
        """Apply ``(E^{-1}A - sigma I)^{-1}`` (or its adjoint) to `x`."""
        if adjoint:
            return self.E.conj().T @ self.solve(sigma, x, adjoint=True, cache=cache)
        return self.solve(sigma, self.E @ x, cache=cache)


def generalized_eig(M, N):
    """Eigenvalues of ``N^{-1} M`` (with multiplicity, unordered).

    Raises
    ------
    SingularMass
        If `N` is numerically singular.
    """
    M = as_cmatrix(M, 'M')
    N = as_cmatrix(N, 'N')
    if M.shape != N.shape or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f'incompatible pencil shapes {M.shape}, {N.shape}')
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    _, _, rcond = _factor(N)
    if not rcond >= EPS:
        raise SingularMass(f'mass matrix is singular (rcond={rcond:.3e})')
    return spla.eigvals(M, N, check_finite=False).astype(complex)


def orthonormalize_append(V, v, tol=1e-12):
    """Append `v` to the orthonormal columns of `V`.

    Uses modified Gram-Schmidt with one full re-orthogonalization pass.

    Parameters
    ----------
    V
        ``n x k`` matrix with orthonormal columns, or ``None``/empty.
    v
        Vector to append.
    tol
        Relative threshold: if the orthogonalized residual has norm below
        ``tol * ||v||`` the vector is considered dependent.

    Returns
    -------
    The ``n x (k+1)`` matrix ``[V, q]``.

    Raises
    ------
    RankDeficient
        If `v` lies numerically in ``span(V)``.
    """
    v = as_cvector(v, 'v')
    n = v.shape[0]
    if V is None:
        V = np.zeros((n, 0), dtype=complex)
    V = np.asarray(V, dtype=complex)
    if V.shape[0] != n:
        raise DimensionMismatch(f'V has {V.shape[0]} rows, v has length {n}')
    vnorm = np.linalg.norm(v)
    if vnorm == 0:
        raise RankDeficient('cannot append the zero vector')
    q = v.copy()
    for _ in range(2):
        for j in range(V.shape[1]):
            q -= (V[:, j].conj() @ q) * V[:, j]
    qnorm = np.linalg.norm(q)
    if qnorm < tol * vnorm:
        raise RankDeficient(f'residual norm ratio {qnorm / vnorm:.3e} below {tol:.1e}')
    return np.column_stack([V, q / qnorm])


@dataclass(frozen=True)
class HullBoundary:
    """Convex hull of points of the complex plane.

    Attributes
    ----------
    vertices
        Hull vertices in counterclockwise order (a subset of the input).
        For a segment, all input points in order along the segment; each
        consecutive pair is an edge.
    kind
        ``'polygon'``, ``'segment'`` or ``'point'``.
    """

    vertices: np.ndarray
    kind: str

    def contains(self, z, tol=1e-12):
        """Whether `z` lies inside or on the hull (up to `tol` times scale)."""
        z = complex(z)
        vs = self.vertices
        scale = max(1.0, float(np.max(np.abs(vs))))
        if self.kind == 'point':
            return abs(z - vs[0]) <= tol * scale
        if self.kind == 'segment':
            a, b = vs[0], vs[-1]
            d = b - a
            t = ((z - a) * np.conj(d)).real / abs(d) ** 2
            t = min(max(t, 0.0), 1.0)
            return abs(a + t * d - z) <= tol * scale
        for a, b in zip(vs, np.roll(vs, -1)):
            if _cross(b - a, z - a) < -tol * scale * abs(b - a):
                return False
        return True

    def sample(self, per_edge):
        """Discretize the boundary with `per_edge` points per edge."""
        per_edge = int(np.ceil(per_edge))
        vs = self.vertices
        if self.kind == 'point':
            return vs.copy()
        t = np.arange(per_edge) / per_edge
        if self.kind == 'segment':
            parts = [a + (b - a) * t for a, b in zip(vs[:-1], vs[1:])]
            return np.concatenate(parts + [vs[-1:]])
        return np.concatenate([a + (b - a) * t for a, b in zip(vs, np.roll(vs, -1))])


def _cross(u, w):
    return u.real * w.imag - u.imag * w.real


def complex_convex_hull(points, tol=1e-12):
    """Convex hull of complex numbers viewed as planar points.

    Andrew's monotone chain.  Collinear and single-point inputs are flagged
    via `HullBoundary.kind` instead of raising.
    """
    pts = np.unique(as_cvector(points, 'points'))  # sorted by (real, imag)
    if pts.size == 0:
        raise ValueError('need at least one point')
    if pts.size == 1:
        return HullBoundary(pts, 'point')

    def chain(seq):
        out = []
        for p in seq:
            # drop the last point on a right turn or a (relatively) straight
            # forward continuation
            while len(out) >= 2:
                u, w = out[-1] - out[-2], p - out[-2]
                cr = _cross(u, w)
                beyond = (u * np.conj(w)).real >= abs(u) ** 2
                if cr > 0 and (cr > tol * abs(u) * abs(w) or not beyond):
                    break
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    verts = np.array(lower[:-1] + upper[:-1], dtype=complex)
    if verts.size <= 2:
        # collinear input: every point subdivides the segment, ordered along it
        p1 = pts[np.argmax(np.abs(pts - pts[0]))]
        p2 = pts[np.argmax(np.abs(pts - p1))]
        if (p2.real, p2.imag) < (p1.real, p1.imag):
            p1, p2 = p2, p1
        t = ((pts - p1) * np.conj(p2 - p1)).real
        return HullBoundary(pts[np.argsort(t, kind='stable')], 'segment')
    return HullBoundary(verts, 'polygon')


def reduced_resolve_batch(Ar, Er, rhs, zs, strict=True):
    """Solve ``(z_k Er - Ar) x_k = rhs`` for all `zs` with one QZ reduction.

    The pencil is reduced once to generalized Schur form
    ``Ar = Q S Z^H, Er = Q T Z^H``; each sample point then costs a single
    triangular solve with ``z T - S``.

    Parameters
    ----------
    Ar, Er
        Small square matrices.
    rhs
        Right-hand side.
    zs
        Sample points.
    strict
        If true, raise `SingularShift` listing all singular sample indices;
        otherwise return NaN rows for them.

    Returns
    -------
    X
        Array of shape ``(len(zs), l)``; row ``k`` is ``x_k``.
    """
    Ar = as_cmatrix(Ar, 'Ar')
    Er = as_cmatrix(Er, 'Er')
    rhs = as_cvector(rhs, 'rhs')
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    l = Ar.shape[0]
    if Ar.shape != (l, l) or Er.shape != (l, l) or rhs.shape != (l,):
        raise DimensionMismatch('Ar, Er must be square of equal size matching rhs')
    X = np.empty((zs.size, l), dtype=complex)
    if zs.size == 0:
        return X
    S, T, Q, Z = spla.qz(Ar, Er, output='complex')
    y = Q.conj().T @ rhs
    trcon, = get_lapack_funcs(('trcon',), (S,))
    bad = []
    for k, z in enumerate(zs):
        R = z * T - S
        d = np.diag(R)
        if np.any(d == 0):
            rcond = 0.0
        else:
            rcond, _ = trcon(R, norm='1', uplo='U', diag='N')
        if not rcond >= EPS:
            bad.append(k)
            X[k] = np.nan
            continue
        X[k] = Z @ spla.solve_triangular(R, y, lower=False, check_finite=False)
    if bad and strict:
        raise SingularShift(zs[bad[0]], indices=bad)
    return X
