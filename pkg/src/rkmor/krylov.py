"""Rational Krylov bases, Lanczos biorthogonalization and projection."""

import logging
from dataclasses import dataclass, field

import numpy as np

from rkmor.errors import (Breakdown, DimensionMismatch, RankDeficient, SingularMass,
                          SingularReducedMass)
from rkmor.numkernel import as_cvector, generalized_eig, orthonormalize_append

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShiftSet:
    """Right shifts ``s_j``, left shifts ``t_j`` and shifts at infinity.

    ``m_b``/``m_c`` count the standard Krylov directions (shifts at
    infinity) on the right/left.  The reduced order is
    ``len(right) + m_b`` (which must equal ``len(left) + m_c`` for
    two-sided use).
    """

    right: tuple = ()
    left: tuple = ()
    m_b: int = 0
    m_c: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'right', tuple(complex(s) for s in self.right))
        object.__setattr__(self, 'left', tuple(complex(t) for t in self.left))

    @property
    def order(self):
        return len(self.right) + self.m_b

    @property
    def left_order(self):
        return len(self.left) + self.m_c

    @property
    def two_sided(self):
        return bool(self.left) or self.m_c > 0

    def all_finite(self):
        return self.right + self.left


@dataclass(frozen=True)
class HalfBasis:
    """Orthonormal basis of one combined Krylov space.

    ``requested`` is the dimension asked for; ``Q.shape[1]`` is smaller when
    the space saturated early.
    """

    Q: np.ndarray
    requested: int
    solves: int

    @property
    def dim(self):
        return self.Q.shape[1]

    @property
    def deficient(self):
        return self.dim < self.requested


@dataclass(frozen=True)
class ProjectionBasis:
    """Right basis `V` and, for Petrov-Galerkin projection, left basis `W`."""

    V: np.ndarray
    W: np.ndarray = None
    orthonormal: bool = True

    @property
    def one_sided(self):
        return self.W is None


def _append_or_stop(Q, v, tol):
    try:
        return orthonormalize_append(Q, v, tol), True
    except RankDeficient:
        return Q, False


def rational_basis(sys, shifts, m_std=0, side='right', tol=1e-12):
    r"""Orthonormal basis of a combined (rational + standard) Krylov space.

    For ``side='right'`` the space is spanned by the vectors
    :math:`(A - s_j E)^{-1} b` for the shifts and by
    :math:`(E^{-1}A)^k E^{-1} b`, ``k < m_std``.  For ``side='left'`` it is
    spanned by :math:`(A - t_j E)^{-H} c` and
    :math:`((AE^{-1})^H)^k E^{-H} c`.

    A shift that repeats an earlier one contributes the next vector of the
    product chain :math:`(E^{-1}A - s I)^{-1} u_{prev}` (left:
    :math:`((AE^{-1})^H - \bar t I)^{-1} u_{prev}`) instead, where `u_prev`
    is the previous chain vector for that shift.

    Returns
    -------
    HalfBasis
        If the space saturates the basis is truncated; a warning is logged
        and ``deficient`` is set.

    Raises
    ------
    SingularShift
        If some shift is an eigenvalue of the pencil.
    """
    if side not in ('right', 'left'):
        raise ValueError(f'side must be right or left, got {side!r}')
    adj = side == 'left'
    solver = sys.solver
    start = sys.c if adj else sys.b
    n = sys.n
    Q = np.zeros((n, 0), dtype=complex)
    requested = len(shifts) + int(m_std)
    solves = 0
    last = {}
    ok = True
    for s in shifts:
        s = complex(s)
        if s in last:
            if adj:
                u = solver.solve(s, sys.E.conj().T @ last[s], adjoint=True)
            else:
                u = solver.apply_resolvent(s, last[s])
        else:
            u = solver.solve(s, start, adjoint=adj)
        solves += 1
        last[s] = u
        Q, ok = _append_or_stop(Q, u, tol)
        if not ok:
            break
    if ok and m_std > 0:
        u = solver.solve_mass(start, adjoint=adj)
        # Arnoldi on the standard part keeps the monomial directions well scaled
        K = None
        for k in range(int(m_std)):
            if k > 0 and adj:
                u = solver.solve_mass(sys.A.conj().T @ K[:, -1], adjoint=True)
            elif k > 0:
                u = solver.apply_op(K[:, -1])
            try:
                K = orthonormalize_append(K, u, 0.0)
            except RankDeficient:
                ok = False
                break
            Q, ok = _append_or_stop(Q, K[:, -1], tol)
            if not ok:
                break
    if Q.shape[1] < requested:
        logger.warning('%s Krylov space saturated at dimension %d of %d',
                       side, Q.shape[1], requested)
    return HalfBasis(Q, requested, solves)


def build_basis(sys, shifts, tol=1e-12):
    """Bases for a `ShiftSet`; one-sided when the set has no left part."""
    V = rational_basis(sys, shifts.right, shifts.m_b, 'right', tol)
    if not shifts.two_sided:
        return ProjectionBasis(V.Q)
    if shifts.order != shifts.left_order:
        raise DimensionMismatch(f'right order {shifts.order} != left order {shifts.left_order}')
    W = rational_basis(sys, shifts.left, shifts.m_c, 'left', tol)
    return ProjectionBasis(V.Q, W.Q)


@dataclass(frozen=True)
class LanczosFactorization:
    r"""Output of two-sided Lanczos on :math:`M = E^{-1}A`.

    ``W^H V = I``, ``M V = V T + gamma_next * next_v e_l^T`` and
    ``M^H W = W T^H + conj(beta_next) * next_w e_l^T``.  ``m0`` is the raw
    moment ``w1^H v1`` of the starting pair.  ``V[:, 0]`` and ``W[:, 0]``
    are rescaled copies of ``v1 / m0`` and ``w1`` with equal norms, so
    ``w1^H P(M) v1 = m0 * (P(T))[0, 0]`` for every polynomial of degree
    below ``2 * steps``.
    """

    V: np.ndarray
    W: np.ndarray
    T: np.ndarray
    next_v: np.ndarray
    next_w: np.ndarray
    gamma_next: complex
    beta_next: complex
    m0: complex

    @property
    def steps(self):
        return self.T.shape[0]


def lanczos_biorth(sys, v1, w1, steps, breakdown_tol=1e-12):
    r"""Nonsymmetric Lanczos biorthogonalization of :math:`E^{-1}A`.

    Runs `steps` iterations with full two-sided re-biorthogonalization.

    Raises
    ------
    Breakdown
        When ``|w_j^H v_j| < breakdown_tol * ||w_j|| ||v_j||`` for some
        ``j <= steps`` (``step`` attribute is 1-based).
    """
    v1 = as_cvector(v1, 'v1')
    w1 = as_cvector(w1, 'w1')
    n = sys.n
    steps = int(steps)
    if not 1 <= steps <= n:
        raise ValueError(f'steps must be in [1, {n}]')
    solver = sys.solver

    m0 = w1.conj() @ v1
    if abs(m0) < breakdown_tol * np.linalg.norm(w1) * np.linalg.norm(v1) or m0 == 0:
        raise Breakdown(1, abs(m0))
    V = np.zeros((n, steps), dtype=complex)
    W = np.zeros((n, steps), dtype=complex)
    T = np.zeros((steps, steps), dtype=complex)
    # equal norms for the starting pair, w^H v = 1
    rho = np.sqrt(np.linalg.norm(v1) * np.linalg.norm(w1) / abs(m0))
    V[:, 0] = v1 / m0
    W[:, 0] = w1
    scale_v = rho / np.linalg.norm(V[:, 0])
    V[:, 0] *= scale_v
    W[:, 0] /= np.conj(scale_v)

    gamma_next = beta_next = 0j
    next_v = next_w = np.zeros(n, dtype=complex)
    for j in range(steps):
        v, w = V[:, j], W[:, j]
        Mv = solver.apply_op(v)
        MHw = solver.apply_op(w, adjoint=True)
        alpha = w.conj() @ Mv
        T[j, j] = alpha
        vh = Mv - alpha * v
        wh = MHw - np.conj(alpha) * w
        if j > 0:
            vh -= T[j - 1, j] * V[:, j - 1]
            wh -= np.conj(T[j, j - 1]) * W[:, j - 1]
        for _ in range(2):
            vh -= V[:, :j + 1] @ (W[:, :j + 1].conj().T @ vh)
            wh -= W[:, :j + 1] @ (V[:, :j + 1].conj().T @ wh)
        nv, nw = np.linalg.norm(vh), np.linalg.norm(wh)
        omega = wh.conj() @ vh
        final = j == steps - 1
        if final:
            if nv == 0 or nw == 0 or abs(omega) < breakdown_tol * nv * nw:
                gamma_next = nv
                beta_next = 0j
                next_v = vh / nv if nv else vh
                next_w = wh / nw if nw else wh
            else:
                delta = np.sqrt(abs(omega))
                beta_next = omega / delta
                gamma_next = delta
                next_v = vh / delta
                next_w = wh / np.conj(beta_next)
            break
        if nv == 0 or nw == 0 or abs(omega) < breakdown_tol * nv * nw:
            raise Breakdown(j + 2, abs(omega))
        # balance the split of omega between the two vectors
        delta = np.sqrt(abs(omega)) * np.sqrt(nv / nw) if nw else np.sqrt(abs(omega))
        beta = omega / delta
        V[:, j + 1] = vh / delta
        W[:, j + 1] = wh / np.conj(beta)
        T[j + 1, j] = delta
        T[j, j + 1] = beta
    return LanczosFactorization(V, W, T, next_v, next_w, gamma_next, beta_next, m0)


@dataclass(frozen=True)
class ReducedModel:
    r"""Projected system :math:`(W^H E V, W^H A V, W^H b, V^H c)`.

    The reduced transfer function is
    :math:`\tilde h(z) = c_r^H (z E_r - A_r)^{-1} b_r`; ``ritz`` holds the
    eigenvalues of the pencil ``(Ar, Er)``.
    """

    Ar: np.ndarray
    Er: np.ndarray
    br: np.ndarray
    cr: np.ndarray
    ritz: np.ndarray
    shifts: ShiftSet = field(default_factory=ShiftSet)
    one_sided: bool = True
    basis: ProjectionBasis = field(default=None, repr=False, compare=False)

    @property
    def order(self):
        return self.Ar.shape[0]


def project(sys, basis, shifts=None):
    """Petrov-Galerkin (or Galerkin when ``basis.W is None``) projection.

    Raises
    ------
    SingularReducedMass
        If ``W^H E V`` is numerically singular.
    """
    V = np.asarray(basis.V, dtype=complex)
    W = V if basis.W is None else np.asarray(basis.W, dtype=complex)
    if V.shape != W.shape or V.shape[0] != sys.n:
        raise DimensionMismatch(f'basis shapes {V.shape}, {W.shape} do not fit n={sys.n}')
    if V.shape[1] > sys.n:
        raise DimensionMismatch('basis has more columns than rows')
    WH = W.conj().T
    Ar = WH @ sys.A @ V
    Er = WH @ sys.E @ V
    try:
        ritz = generalized_eig(Ar, Er)
    except SingularMass as exc:
        raise SingularReducedMass(str(exc)) from exc
    return ReducedModel(Ar, Er, WH @ sys.b, V.conj().T @ sys.c, ritz,
                        shifts if shifts is not None else ShiftSet(),
                        basis.W is None, basis)


def reduce(sys, shifts, tol=1e-12):
    """Build the bases for `shifts` and project; convenience wrapper."""
    return project(sys, build_basis(sys, shifts, tol), shifts)
