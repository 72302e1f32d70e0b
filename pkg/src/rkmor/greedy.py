r"""Greedy shift selection, the max-error sweep and an IRKA baseline.

Two greedy methods grow a reduced model one order at a time:

* `arksm` (adaptive rational Krylov, one-sided) picks the next shift on
  the boundary of the convex hull of the mirrored Ritz values and the
  extreme spectral bounds, maximizing :math:`|\varphi(z)/\Lambda(z)|`.
* `two_sided_greedy` picks :math:`s_{l+1}` on a fixed imaginary-axis grid
  by maximizing one of three cheap error estimates and takes
  :math:`t_{l+1} = \bar s_{l+1}`.

`irka_baseline` is the SISO iterative rational Krylov algorithm used as a
reference.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from rkmor.errors import (DeadlockNoCandidate, NonConvergence, RankDeficient,
                          SingularShift)
from rkmor.krylov import ProjectionBasis, ShiftSet, project, rational_basis
from rkmor.model import make_grid
from rkmor.numkernel import complex_convex_hull, generalized_eig, orthonormalize_append
from rkmor.remainder import error_direct, error_estimate_batch, log_inverse_g, transfer_batch

logger = logging.getLogger(__name__)

ALGORITHMS = ('arksm', 'two_sided_o1', 'two_sided_o2', 'two_sided_o3', 'irka')


@dataclass(frozen=True)
class GreedyRun:
    """Result of a shift-selection run.

    Attributes
    ----------
    algorithm
        One of `ALGORITHMS`.
    shifts_history
        Accepted shifts in order; ``(s, t)`` pairs for two-sided runs.  For
        IRKA the shift vector of every iteration.
    models
        Reduced model after each order (IRKA: the final model only).
    error_history
        Max error over the evaluation grid for each entry of `models`
        (empty when no grid was given).
    solve_count
        Number of shifted solves with the full-order pencil.
    order_times
        Cumulative wall time (seconds) after each entry of `models`,
        excluding error evaluation.
    metadata
        Algorithm-specific flags (convergence, saturation, ...).
    """

    algorithm: str
    shifts_history: tuple
    models: tuple
    error_history: tuple
    solve_count: int
    order_times: tuple = ()
    metadata: dict = field(default_factory=dict)

    @property
    def final_model(self):
        return self.models[-1]

    @property
    def orders(self):
        return tuple(rm.order for rm in self.models)


# -- helpers -------------------------------------------------------------------

def _near(zs, refs, rtol=1e-12):
    """Mask of `zs` within ``rtol*|z|`` of any of `refs`."""
    zs = np.asarray(zs, dtype=complex)
    mask = np.zeros(zs.shape, dtype=bool)
    tol = rtol * np.maximum(np.abs(zs), np.finfo(float).tiny)
    for r in refs:
        mask |= np.abs(zs - r) <= tol
    return mask


def _ranked(scores):
    """Candidate indices by decreasing score; ties keep the lowest index."""
    finite = np.flatnonzero(np.isfinite(scores))
    order = np.argsort(-scores[finite], kind='stable')
    return finite[order]


class _Recorder:
    """Collects per-order snapshots, timings and optional max errors."""

    def __init__(self, sys, eval_grid, h_values, keep_models):
        self.sys = sys
        self.grid = eval_grid
        self.h = h_values
        if eval_grid is not None and h_values is None:
            self.h = transfer_batch(sys, eval_grid.points)
        self.keep = keep_models
        self.models, self.errors, self.times = [], [], []
        self.t0 = time.perf_counter()
        self.paused = 0.0

    def add(self, rm):
        self.times.append(time.perf_counter() - self.t0 - self.paused)
        if self.grid is not None:
            t = time.perf_counter()
            self.errors.append(error_direct(self.sys, rm, self.grid, self.h).max_abs_error)
            self.paused += time.perf_counter() - t
        if self.keep or not self.models:
            self.models.append(rm)
        else:
            self.models[-1] = rm


def hinf_sweep(sys, rm, grid, h_values=None):
    """Sampled error curve and ``max |h - h_tilde|`` over `grid`.

    `h_values` may hold precomputed full-order samples on the same grid.
    """
    return error_direct(sys, rm, grid, h_values)


# -- extreme eigenvalues ---------------------------------------------------------

def extreme_shift_bounds(sys, dense_limit=2000):
    """Smallest- and largest-magnitude eigenvalues of the pencil ``(-A, E)``.

    Dense eigenvalues are used up to `dense_limit`; beyond that ARPACK runs
    on ``-E^{-1}A`` and its inverse from the deterministic start vector
    ``1 + k/n``.  (The all-ones vector alone is orthogonal to every
    antisymmetric eigenvector, e.g. the dominant one of ``laplacian_1d``.)

    Raises
    ------
    NonConvergence
        If ARPACK fails and the problem is too large for the dense fallback.
    """
    n = sys.n
    if n <= dense_limit or n < 4:
        return _dense_bounds(sys)
    solver = sys.solver
    v0 = (1.0 + np.arange(n) / n).astype(complex)
    op = spla.LinearOperator((n, n), matvec=lambda x: -solver.apply_op(x.ravel()),
                             dtype=complex)
    inv = spla.LinearOperator(
        (n, n), matvec=lambda x: -solver.solve(0.0, sys.E @ x.ravel()), dtype=complex)
    try:
        s_max = complex(spla.eigs(op, k=1, which='LM', v0=v0, return_eigenvectors=False)[0])
        mu = complex(spla.eigs(inv, k=1, which='LM', v0=v0, return_eigenvectors=False)[0])
    except spla.ArpackNoConvergence as exc:
        if n <= 5 * dense_limit:
            logger.warning('ARPACK did not converge (%s); using dense eigenvalues', exc)
            return _dense_bounds(sys)
        raise NonConvergence(f'extreme eigenvalues: {exc}') from exc
    return 1.0 / mu, s_max


def _dense_bounds(sys):
    lam = generalized_eig(-np.asarray(sys.A), np.asarray(sys.E))
    mag = np.abs(lam)
    return complex(lam[np.argmin(mag)]), complex(lam[np.argmax(mag)])


# -- ARKSM ---------------------------------------------------------------------

def arksm(sys, l_max, grid_density=50, eval_grid=None, h_values=None, keep_models=True,
          bounds=None, basis_tol=0.0):
    r"""Adaptive rational Krylov shift selection (one-sided).

    Parameters
    ----------
    sys
        Full-order system.
    l_max
        Target order (at least 2).
    grid_density
        Samples per edge of the hull boundary.
    eval_grid
        Optional `SampleGrid`; when given the max error is recorded for
        every order.
    h_values
        Precomputed full-order samples on `eval_grid`.
    keep_models
        Keep the reduced model of every order (otherwise only the last).
    bounds
        Precomputed ``(s_min, s_max)``.
    basis_tol
        Relative size below which a new basis direction counts as
        dependent and ends the run.  The default only stops on an exactly
        dependent direction, so each order costs one solve.

    Returns
    -------
    GreedyRun
        The first two shifts are ``s_min`` and ``s_max``; the run stops
        early (``metadata['saturated']``) if the Krylov space becomes
        invariant.
    """
    l_max = int(l_max)
    if l_max < 2:
        raise ValueError('l_max must be >= 2')
    rec = _Recorder(sys, eval_grid, h_values, keep_models)
    s_min, s_max = extreme_shift_bounds(sys) if bounds is None else bounds
    solver = sys.solver
    V = np.zeros((sys.n, 0), dtype=complex)
    shifts = []
    solves = 0
    meta = {'s_min': s_min, 's_max': s_max, 'saturated': False,
            'unstable_ritz': False, 'skipped': []}

    def accept(s):
        nonlocal V, solves
        x = solver.solve(s, sys.b)
        solves += 1
        try:
            V = orthonormalize_append(V, x, tol=basis_tol)
        except RankDeficient:
            return False
        shifts.append(s)
        rm = project(sys, ProjectionBasis(V), ShiftSet(right=shifts))
        rec.add(rm)
        return True

    seeds = [s_min] if abs(s_max - s_min) <= 1e-12 * abs(s_max) else [s_min, s_max]
    for s in seeds:
        if not accept(s):
            meta['saturated'] = True
            break
    while not meta['saturated'] and len(shifts) < l_max:
        rm = rec.models[-1]
        if np.any(rm.ritz.real > 0):
            meta['unstable_ritz'] = True
        hull = complex_convex_hull(np.concatenate([-rm.ritz, [s_min, s_max]]))
        cand = hull.sample(grid_density)
        scores = log_inverse_g(rm, cand)
        scores[_near(cand, list(shifts) + list(rm.ritz))] = np.nan
        for idx in _ranked(scores):
            try:
                ok = accept(complex(cand[idx]))
            except SingularShift as exc:
                logger.info('arksm: skipping singular candidate %r', cand[idx])
                meta['skipped'].append(exc.sigma)
                continue
            if not ok:
                meta['saturated'] = True
            break
        else:
            raise DeadlockNoCandidate(f'no admissible candidate at order {len(shifts)}')
    return GreedyRun('arksm', tuple(shifts), tuple(rec.models), tuple(rec.errors),
                     solves, tuple(rec.times), meta)


# -- two-sided greedy ------------------------------------------------------------

def two_sided_greedy(sys, alpha, beta, k, l_max, option=2, eval_grid=None, h_values=None,
                     keep_models=True, bounds=None, basis_tol=0.0):
    r"""Two-sided greedy shift selection on an imaginary-axis grid.

    Starts from :math:`s_1 = i|s_{max}|/10`, :math:`t_1 = \bar s_1` and
    adds, per order, the grid point maximizing the error estimate `option`
    (1: :math:`|\varphi\psi/\Lambda^2|`, 2: times
    :math:`\|(zE_r - A_r)^{-1} b_r\|`, 3: times :math:`|\tilde h(z)|`) as
    :math:`s`, with :math:`t = \bar s`.

    Parameters
    ----------
    alpha, beta, k
        Candidate grid ``make_grid(alpha, beta, k)``.
    l_max
        Target order.
    option
        Estimate used for the selection (1, 2 or 3).

    Other parameters are as for `arksm`.

    Raises
    ------
    DeadlockNoCandidate
        If every grid point is excluded.
    """
    l_max = int(l_max)
    if l_max < 1:
        raise ValueError('l_max must be >= 1')
    if option not in (1, 2, 3):
        raise ValueError(f'option must be 1, 2 or 3, got {option!r}')
    cand = make_grid(alpha, beta, k).points
    rec = _Recorder(sys, eval_grid, h_values, keep_models)
    if bounds is None:
        bounds = extreme_shift_bounds(sys)
    s_max = bounds[1]
    solver = sys.solver
    n = sys.n
    V = np.zeros((n, 0), dtype=complex)
    W = np.zeros((n, 0), dtype=complex)
    pairs = []
    solves = 0
    meta = {'s_max': s_max, 'saturated': False, 'skipped': []}

    def accept(s):
        nonlocal V, W, solves
        t = np.conj(s)
        x = solver.solve(s, sys.b)
        y = solver.solve(t, sys.c, adjoint=True)
        solves += 2
        try:
            V1 = orthonormalize_append(V, x, tol=basis_tol)
            W1 = orthonormalize_append(W, y, tol=basis_tol)
        except RankDeficient:
            return False
        V, W = V1, W1
        pairs.append((s, t))
        sh = ShiftSet(right=[p[0] for p in pairs], left=[p[1] for p in pairs])
        rec.add(project(sys, ProjectionBasis(V, W), sh))
        return True

    s1 = 1j * abs(s_max) / 10
    if not accept(s1):
        meta['saturated'] = True
    while not meta['saturated'] and len(pairs) < l_max:
        rm = rec.models[-1]
        scores = error_estimate_batch(rm, cand, option)
        used = [p[0] for p in pairs] + [p[1] for p in pairs]
        scores[_near(cand, used + list(rm.ritz))] = np.nan
        for idx in _ranked(scores):
            try:
                ok = accept(complex(cand[idx]))
            except SingularShift as exc:
                logger.info('two_sided: skipping singular candidate %r', cand[idx])
                meta['skipped'].append(exc.sigma)
                continue
            if not ok:
                meta['saturated'] = True
            break
        else:
            raise DeadlockNoCandidate(f'every grid point excluded at order {len(pairs)}')
    return GreedyRun(f'two_sided_o{option}', tuple(pairs), tuple(rec.models),
                     tuple(rec.errors), solves, tuple(rec.times), meta)


# -- IRKA ------------------------------------------------------------------------

def _match_distance(a, b):
    """2-norm of ``a - b`` after optimally pairing the entries."""
    cost = np.abs(a[:, None] - b[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].sum()))


def _conj_closed(shifts, tol=1e-10):
    a = np.asarray(shifts, dtype=complex)
    cost = np.abs(a[:, None] - np.conj(a)[None, :])
    rows, cols = linear_sum_assignment(cost)
    return bool(np.all(cost[rows, cols] <= tol * np.maximum(1.0, np.abs(a[rows]))))


def _irka_model(sys, shifts, tol):
    V = rational_basis(sys, shifts, 0, 'right', tol)
    W = rational_basis(sys, shifts, 0, 'left', tol)
    if V.deficient or W.deficient:
        raise RankDeficient(f'IRKA bases saturated at {V.dim}/{W.dim} of {len(shifts)}')
    sh = ShiftSet(right=shifts, left=shifts)
    return project(sys, ProjectionBasis(V.Q, W.Q), sh), V.solves + W.solves


def irka_baseline(sys, initial_shifts, max_iter=100, tol=1e-6, eval_grid=None,
                  h_values=None, basis_tol=0.0):
    r"""SISO iterative rational Krylov algorithm (Hermite interpolation).

    Each iteration builds right and left rational bases at the current
    shifts, computes the Ritz values and replaces the shifts by
    :math:`-\bar\lambda_i`, sorted.  Iteration stops when
    ``||S_j - S_{j-1}|| <= tol * ||S_j||`` or after `max_iter` iterations;
    the difference is taken after optimally matching the entries of the two
    shift vectors.

    Shifts that land in the closed left half-plane are reflected across the
    imaginary axis (``metadata['unstable_reflected']``).  A singular shift
    is perturbed by a relative ``1e-8`` and the iteration retried once.

    Raises
    ------
    ValueError
        If `initial_shifts` is not closed under conjugation.
    SingularShift
        If the retry also hits a singular pencil.
    """
    S = np.sort(np.asarray(initial_shifts, dtype=complex).reshape(-1))
    if S.size < 1:
        raise ValueError('need at least one initial shift')
    if not _conj_closed(S):
        raise ValueError('initial shifts must be closed under conjugation')
    rec = _Recorder(sys, None, None, False)
    history = [tuple(S)]
    solves = 0
    meta = {'converged': False, 'iterations': 0, 'unstable_reflected': False,
            'perturbed': []}
    rm = None
    for it in range(1, int(max_iter) + 1):
        try:
            rm, used = _irka_model(sys, S, basis_tol)
        except SingularShift as exc:
            # solves of the failed attempt are discarded with the bases
            S = np.where(S == complex(exc.sigma), S * (1 + 1e-8), S)
            meta['perturbed'].append((it, complex(exc.sigma)))
            rm, used = _irka_model(sys, S, basis_tol)
        solves += used
        meta['iterations'] = it
        S_new = -np.conj(rm.ritz)
        unstable = S_new.real <= 0
        if np.any(unstable):
            meta['unstable_reflected'] = True
            S_new = np.where(unstable, np.conj(-S_new), S_new)
        S_new = np.sort(S_new)
        # sorting alone can swap near-conjugate pairs, so compare by matching
        diff = _match_distance(S_new, S)
        S = S_new
        history.append(tuple(S))
        meta['shift_change'] = diff / np.linalg.norm(S)
        if diff <= tol * np.linalg.norm(S):
            meta['converged'] = True
            break
    rec.add(rm)
    errors = ()
    if eval_grid is not None:
        errors = (hinf_sweep(sys, rm, eval_grid, h_values).max_abs_error,)
    return GreedyRun('irka', tuple(history), tuple(rec.models), errors, solves,
                     tuple(rec.times), meta)


def irka_initial_shifts(bounds, l):
    """Real logarithmically spaced shifts between ``|s_min|`` and ``|s_max|``."""
    lo, hi = abs(bounds[0]), abs(bounds[1])
    if hi <= lo:
        hi = lo * 10
    return np.logspace(np.log10(lo), np.log10(hi), int(l)).astype(complex)
