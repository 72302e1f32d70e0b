r"""Transfer-function evaluation and the explicit interpolation remainder.

For a reduced model with Ritz values :math:`\lambda_i`, right shifts
:math:`s_j` and left shifts :math:`t_j` the error of two-sided projection is

.. math::
    e(z) = \frac{1}{g_b(z) g_c(z)}
           c^H g_c(M) (zI - M)^{-1} g_b(M) E^{-1} b,
    \qquad g_b = \Lambda / \varphi, \quad g_c = \Lambda / \psi,

with :math:`M = E^{-1}A`, :math:`\Lambda(\lambda) = \prod(\lambda-\lambda_i)`,
:math:`\varphi(\lambda) = \prod(\lambda - s_j)` and
:math:`\psi(\lambda) = \prod(\lambda - t_j)`.  One-sided projection gives the
same with :math:`G_{one} = \Lambda / \varphi` in place of
:math:`g_b g_c`.  This module evaluates these expressions, the residual
closed forms behind them, divided-difference identities and the cheap error
estimates used by the greedy shift selection.
"""

from dataclasses import dataclass

import numpy as np

from rkmor.errors import PoleAtZ, RepeatedNode, SingularShift
from rkmor.krylov import ShiftSet
from rkmor.numkernel import EPS, reduced_resolve_batch


class RationalNodePoly:
    """Rational function given by numerator and denominator roots.

    ``RationalNodePoly(num, den)(z) = prod(z - num) / prod(z - den)``; with an
    empty denominator it is a monic polynomial (constant 1 if both are
    empty).
    """

    def __init__(self, numer=(), denom=()):
        self.numer = np.asarray(numer, dtype=complex).reshape(-1)
        self.denom = np.asarray(denom, dtype=complex).reshape(-1)

    def __repr__(self):
        return f'RationalNodePoly(numer={self.numer!r}, denom={self.denom!r})'

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        num = np.prod(z[..., None] - self.numer, axis=-1)
        den = np.prod(z[..., None] - self.denom, axis=-1)
        with np.errstate(divide='ignore', invalid='ignore'):
            return num / den

    def log_abs(self, z):
        """``log|f(z)|`` summed factor by factor (no overflow)."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide='ignore'):
            return (np.sum(np.log(np.abs(z[..., None] - self.numer)), axis=-1)
                    - np.sum(np.log(np.abs(z[..., None] - self.denom)), axis=-1))


def g_functions(rm):
    """The rational factors of the error formula for `rm`.

    Returns ``(g_b, g_c)`` for two-sided models and ``(G_one, None)`` for
    one-sided ones.
    """
    sh = rm.shifts
    if rm.one_sided:
        return RationalNodePoly(rm.ritz, sh.right), None
    return RationalNodePoly(rm.ritz, sh.right), RationalNodePoly(rm.ritz, sh.left)


# -- transfer functions --------------------------------------------------------

def transfer_eval(sys, z):
    """:math:`h(z) = c^H (zE - A)^{-1} b`."""
    z = complex(z)
    return -(sys.c.conj() @ sys.solver.solve(z, sys.b, cache=False))


def transfer_batch(sys, zs):
    """`transfer_eval` over `zs`; NaN where ``zE - A`` is singular."""
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    out = np.empty(zs.size, dtype=complex)
    for k, z in enumerate(zs):
        try:
            out[k] = transfer_eval(sys, z)
        except SingularShift:
            out[k] = np.nan
    return out


def reduced_transfer_batch(rm, zs, strict=False):
    """:math:`\\tilde h` over `zs` via one shared QZ reduction."""
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    X = reduced_resolve_batch(rm.Ar, rm.Er, rm.br, zs, strict=strict)
    return X @ rm.cr.conj()


def reduced_transfer_eval(rm, z):
    r""":math:`\tilde h(z) = c_r^H (z E_r - A_r)^{-1} b_r`."""
    return complex(reduced_transfer_batch(rm, [z], strict=True)[0])


# -- error curves --------------------------------------------------------------

@dataclass
class ErrorCurve:
    """Sampled error of a reduced model.

    ``valid`` flags samples where neither transfer function has a pole;
    ``max_abs_error`` is taken over valid samples only.
    """

    points: np.ndarray
    h_values: np.ndarray
    h_tilde_values: np.ndarray
    e_direct: np.ndarray
    valid: np.ndarray
    max_abs_error: float
    e_formula: np.ndarray = None

    def __len__(self):
        return self.points.size


def error_direct(sys, rm, grid, h_values=None):
    """Pointwise ``h - h_tilde`` over a grid (or array of points).

    `h_values` may carry precomputed samples of ``h`` on the grid.
    """
    zs = np.asarray(getattr(grid, 'points', grid), dtype=complex).reshape(-1)
    h = transfer_batch(sys, zs) if h_values is None else np.asarray(h_values, dtype=complex)
    ht = reduced_transfer_batch(rm, zs, strict=False)
    e = h - ht
    valid = np.isfinite(e)
    max_err = float(np.max(np.abs(e[valid]))) if np.any(valid) else float('nan')
    return ErrorCurve(zs, h, ht, e, valid, max_err)


def _pole_check(z, roots):
    for lam in roots:
        if abs(z - lam) <= 4 * EPS * max(1.0, abs(z), abs(lam)):
            raise PoleAtZ(f'z={z!r} coincides with Ritz value {lam!r}')


def _apply_g(solver, x, ritz, shifts, z, adjoint=False):
    r"""Apply :math:`g(M)/g(z)` with :math:`g = \prod(\lambda-\lambda_i)/\prod(\lambda-s_j)`.

    Factors are interleaved as
    :math:`\frac{z-s_j}{z-\lambda_j}(M-\lambda_j)(M-s_j)^{-1}` so that
    intermediate vectors stay at the scale of the result.  With
    ``adjoint=True`` the adjoint operator is applied instead.
    """
    if len(shifts) > len(ritz):
        raise ValueError('more finite shifts than Ritz values')
    for i, lam in enumerate(ritz):
        scal = 1.0 / (z - lam)
        if i < len(shifts):
            s = shifts[i]
            x = solver.apply_resolvent(s, x, adjoint=adjoint)
            scal *= z - s
        if adjoint:
            x = solver.apply_op(x, adjoint=True) - np.conj(lam) * x
            x *= np.conj(scal)
        else:
            x = solver.apply_op(x) - lam * x
            x *= scal
    return x


def error_formula(sys, rm, z, mode=None):
    """Evaluate the remainder formula for `rm` at `z`.

    Parameters
    ----------
    sys
        Full-order system.
    rm
        Reduced model carrying its shifts and Ritz values.
    z
        Evaluation point.
    mode
        ``'two_sided'`` or ``'one_sided'``; inferred from `rm` if omitted.

    Raises
    ------
    PoleAtZ
        If `z` is a Ritz value.
    SingularShift
        If `z` is a pole of ``h``.
    """
    z = complex(z)
    if mode is None:
        mode = 'one_sided' if rm.one_sided else 'two_sided'
    if mode not in ('one_sided', 'two_sided'):
        raise ValueError(f'unknown mode {mode!r}')
    _pole_check(z, rm.ritz)
    solver = sys.solver
    sh = rm.shifts
    u = _apply_g(solver, solver.solve_mass(sys.b), rm.ritz, sh.right, z)
    y = -solver.solve(z, sys.E @ u, cache=False)
    if mode == 'two_sided':
        y = _apply_g(solver, y, rm.ritz, sh.left, z)
    return complex(sys.c.conj() @ y)


def error_formula_batch(sys, rm, zs, mode=None):
    """`error_formula` over `zs`; NaN at poles."""
    zs = np.asarray(getattr(zs, 'points', zs), dtype=complex).reshape(-1)
    out = np.empty(zs.size, dtype=complex)
    for k, z in enumerate(zs):
        try:
            out[k] = error_formula(sys, rm, z, mode)
        except (PoleAtZ, SingularShift):
            out[k] = np.nan
    return out


@dataclass(frozen=True)
class ResidualPair:
    """Residuals of the projected resolvent problems at `at_z`.

    ``r_b``/``r_c`` are computed from their definitions; the ``*_closed``
    fields hold the rational closed forms (``r_c_closed`` is ``None`` for
    one-sided models).
    """

    r_b: np.ndarray
    r_c: np.ndarray
    at_z: complex
    r_b_closed: np.ndarray
    r_c_closed: np.ndarray = None


def residual_pair(sys, rm, z):
    """Residuals ``r_b = b - (zE-A) x_b`` and ``r_c = c - (zE-A)^H x_c``."""
    z = complex(z)
    _pole_check(z, rm.ritz)
    basis = rm.basis
    if basis is None:
        raise ValueError('reduced model does not carry its projection basis')
    V = basis.V
    W = V if basis.W is None else basis.W
    K = z * rm.Er - rm.Ar
    x_b = V @ np.linalg.solve(K, rm.br)
    x_c = W @ np.linalg.solve(K.conj().T, rm.cr)
    zEA = z * sys.E - sys.A
    r_b = sys.b - zEA @ x_b
    r_c = sys.c - zEA.conj().T @ x_c

    solver = sys.solver
    sh = rm.shifts
    r_b_closed = sys.E @ _apply_g(solver, solver.solve_mass(sys.b), rm.ritz, sh.right, z)
    r_c_closed = None
    if not rm.one_sided:
        r_c_closed = _apply_g(solver, sys.c, rm.ritz, sh.left, z, adjoint=True)
    return ResidualPair(r_b, r_c, z, r_b_closed, r_c_closed)


# -- divided differences -------------------------------------------------------

def divided_difference(f, nodes, tol=0.0):
    """Divided difference ``f[x_0, ..., x_m]`` by the recursive table.

    Raises
    ------
    RepeatedNode
        If two nodes coincide (within ``tol`` times their magnitude).
    """
    x = np.asarray(nodes, dtype=complex).reshape(-1)
    if x.size == 0:
        raise ValueError('need at least one node')
    for i in range(x.size):
        for j in range(i):
            if abs(x[i] - x[j]) <= tol * max(1.0, abs(x[i])) or x[i] == x[j]:
                raise RepeatedNode(f'nodes {i} and {j} coincide: {x[i]!r}')
    d = np.array([f(xi) for xi in x], dtype=complex)
    for k in range(1, x.size):
        d[k:] = (d[k:] - d[k - 1:-1]) / (x[k:] - x[:-k])
    return complex(d[-1])


def resolvent_divided_difference(z, nodes):
    """Closed form of ``H[x_1..x_m]`` for ``H(x) = 1/(z - x)``.

    Valid for repeated nodes too: ``1 / prod(z - x_i)``.
    """
    nodes = np.asarray(nodes, dtype=complex)
    return complex(1.0 / np.prod(complex(z) - nodes))


def weighted_resolvent_divided_difference(z, numer_roots, nodes):
    """Closed form of ``M[x_1..x_m]`` for ``M(x) = prod(x - t_i) / (z - x)``.

    Requires ``m >= len(numer_roots) + 1``; equals
    ``prod(z - t_i) / prod(z - x_i)``.
    """
    numer_roots = np.asarray(numer_roots, dtype=complex)
    nodes = np.asarray(nodes, dtype=complex)
    if nodes.size < numer_roots.size + 1:
        raise ValueError('closed form needs more nodes than numerator roots')
    z = complex(z)
    return complex(np.prod(z - numer_roots) / np.prod(z - nodes))


# -- quadrature exactness --------------------------------------------------------

@dataclass(frozen=True)
class QuadratureReport:
    degree: int
    trials: int
    max_discrepancy: float
    control_degree: int
    control_discrepancy: float


def _horner(apply, coeffs, v):
    y = coeffs[-1] * v
    for a in coeffs[-2::-1]:
        y = apply(y) + a * v
    return y


def weighted_start_vectors(sys, shifts):
    r"""Starting pair :math:`\varphi(M)^{-1} E^{-1} b` and :math:`\psi(M)^{-H} c`."""
    solver = sys.solver
    v = solver.solve_mass(sys.b)
    for s in shifts.right:
        v = solver.apply_resolvent(s, v)
    w = np.array(sys.c, dtype=complex)
    for t in shifts.left:
        w = solver.apply_resolvent(t, w, adjoint=True)
    return v, w


def quadrature_exactness_check(sys, lanczos, shifts, degree, trials=5, rng=None):
    r"""Compare :math:`c^H\psi(M)^{-1}P(M)\varphi(M)^{-1}E^{-1}b` with
    :math:`m_0\,e_1^H P(T)e_1` for random polynomials.

    Polynomials are drawn with standard complex Gaussian coefficients in the
    variable ``(x - center) / radius``, where center and radius enclose the
    eigenvalues of ``T``.  The discrepancy of one trial is
    ``|full - reduced| / max(|full|, |reduced|)``.  As a negative control
    the squared characteristic polynomial of ``T`` (degree ``2 * steps``)
    is evaluated; the rule maps it to zero while the full bilinear form
    equals ``m0`` times the product of the off-diagonals of ``T`` and the
    next coupling, so its discrepancy is ~1 unless Lanczos has found an
    invariant subspace.

    Parameters
    ----------
    sys
        Full-order system.
    lanczos
        `LanczosFactorization` started from `weighted_start_vectors`.
    shifts
        The `ShiftSet` defining the weights.
    degree
        Degree of the tested polynomials.
    trials
        Number of random polynomials.
    rng
        ``numpy.random.Generator`` or seed.
    """
    rng = np.random.default_rng(rng)
    v1, w1 = weighted_start_vectors(sys, shifts)
    T = lanczos.T
    theta = np.linalg.eigvals(T)
    center = np.mean(theta)
    radius = max(float(np.max(np.abs(theta - center))), EPS)
    solver = sys.solver

    def full_op(x):
        return (solver.apply_op(x) - center * x) / radius

    Tn = (T - center * np.eye(T.shape[0])) / radius
    e1 = np.zeros(T.shape[0], dtype=complex)
    e1[0] = 1.0

    def discrepancy(d):
        a = rng.standard_normal(d + 1) + 1j * rng.standard_normal(d + 1)
        full = w1.conj() @ _horner(full_op, a, v1)
        red = lanczos.m0 * (_horner(lambda x: Tn @ x, a, e1)[0])
        return abs(full - red) / max(abs(full), abs(red), np.finfo(float).tiny)

    worst = max(discrepancy(degree) for _ in range(trials))

    # control: the squared node polynomial, integrated to 0 by the rule
    nodes = (theta - center) / radius
    x, y = v1, e1
    for th in np.concatenate([nodes, nodes]):
        x = full_op(x) - th * x
        y = Tn @ y - th * y
    full = w1.conj() @ x
    red = lanczos.m0 * y[0]
    ctrl = abs(full - red) / max(abs(full), abs(red), np.finfo(float).tiny)
    return QuadratureReport(degree, trials, float(worst), 2 * T.shape[0], float(ctrl))


def rational_exactness_check(sys, rm, degree, trials=5, rng=None):
    r"""Exactness of the reduced model on :math:`P_{deg}/(\varphi\psi)`.

    Compares :math:`c^H Q(M) E^{-1} b` with
    :math:`c_r^H Q(E_r^{-1}A_r) E_r^{-1} b_r` for random ``Q = P/(phi*psi)``.
    Returns the worst relative discrepancy.
    """
    rng = np.random.default_rng(rng)
    solver = sys.solver
    sh = rm.shifts
    poles = sh.right + sh.left
    theta = rm.ritz
    center = np.mean(theta)
    radius = max(float(np.max(np.abs(theta - center))), EPS)
    Mr = np.linalg.solve(rm.Er, rm.Ar)
    I = np.eye(rm.order)
    worst = 0.0
    for _ in range(trials):
        a = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
        x = solver.solve_mass(sys.b)
        for p in poles:
            x = solver.apply_resolvent(p, x)
        x = _horner(lambda y: (solver.apply_op(y) - center * y) / radius, a, x)
        full = sys.c.conj() @ x
        xr = np.linalg.solve(rm.Er, rm.br)
        for p in poles:
            xr = np.linalg.solve(Mr - p * I, xr)
        xr = _horner(lambda y: (Mr @ y - center * y) / radius, a, xr)
        red = rm.cr.conj() @ xr
        worst = max(worst, abs(full - red) / max(abs(full), abs(red), np.finfo(float).tiny))
    return worst


# -- error estimates -----------------------------------------------------------

def log_inverse_g(rm, zs):
    r"""``log(1/|G(z)|)`` for the model's `G` (two- or one-sided)."""
    zs = np.asarray(zs, dtype=complex)
    sh = rm.shifts
    g_b = RationalNodePoly(rm.ritz, sh.right)
    if rm.one_sided:
        return -g_b.log_abs(zs)
    return -g_b.log_abs(zs) - RationalNodePoly(rm.ritz, sh.left).log_abs(zs)


def error_estimate_batch(rm, zs, option):
    """Unscaled error estimates (Options 1-3) over `zs`.

    NaN marks points that are Ritz values (poles of the estimate) or where
    the reduced pencil is singular.
    """
    if option not in (1, 2, 3):
        raise ValueError(f'option must be 1, 2 or 3, got {option!r}')
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    with np.errstate(over='ignore', invalid='ignore'):
        val = np.exp(log_inverse_g(rm, zs))
    pole = np.zeros(zs.size, dtype=bool)
    for lam in rm.ritz:
        pole |= np.abs(zs - lam) <= 4 * EPS * np.maximum(1.0, np.maximum(np.abs(zs), abs(lam)))
    val[pole] = np.nan
    if option > 1:
        X = reduced_resolve_batch(rm.Ar, rm.Er, rm.br, zs, strict=False)
        if option == 2:
            fac = np.linalg.norm(X, axis=1)
        else:
            fac = np.abs(X @ rm.cr.conj())
        val = val * fac
    return val


def error_estimate(rm, z, option):
    """Unscaled error estimate at one point.

    Raises
    ------
    PoleAtZ
        If `z` is a Ritz value.
    """
    z = complex(z)
    _pole_check(z, rm.ritz)
    val = float(error_estimate_batch(rm, [z], option)[0])
    if np.isnan(val):
        raise SingularShift(z)
    return val
