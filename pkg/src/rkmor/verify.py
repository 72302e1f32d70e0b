"""Invariant battery for the error formulas, run by ``rkmor verify``.

Four suites are run over generated systems:

* ``central``: the explicit error formula against ``h - h_tilde`` on a
  101-point imaginary-axis grid;
* ``interpolation``: the error vanishes at every finite shift;
* ``quadrature``: the Lanczos rule is exact up to degree ``2l-1`` and not
  exact on the squared node polynomial;
* ``divided_difference``: closed forms against the recursive table.
"""

from dataclasses import dataclass, field

import numpy as np

from rkmor.krylov import ShiftSet, lanczos_biorth, reduce
from rkmor.model import gen_test_system, make_grid
from rkmor.remainder import (divided_difference, error_direct, error_formula_batch,
                             quadrature_exactness_check, resolvent_divided_difference,
                             transfer_eval, weighted_resolvent_divided_difference,
                             weighted_start_vectors)

MODES = ('two_sided', 'one_sided', 'descriptor')
TOL = 1e-7
DD_TOL = 1e-9
CONTROL_MIN = 1e-4


@dataclass
class SuiteResult:
    name: str
    tol: float
    worst: float = 0.0
    passed: bool = True
    cases: list = field(default_factory=list)

    def record(self, label, value, ok=None):
        ok = value <= self.tol if ok is None else ok
        self.cases.append((label, float(value), bool(ok)))
        self.worst = max(self.worst, float(value))
        self.passed &= bool(ok)


def random_shifts(rng, k):
    """`k` random shifts in the right half-plane."""
    return rng.uniform(0.1, 3.0, k) + 1j * rng.uniform(-3.0, 3.0, k)


def random_case(n, seed, mode):
    """Generated system and a reduced model with random mixed shifts.

    The order is drawn from ``2..min(10, n)``; right and left shifts are
    split independently between finite values and shifts at infinity.
    """
    if mode not in MODES:
        raise ValueError(f'unknown mode {mode!r}')
    rng = np.random.default_rng([seed, n, MODES.index(mode)])
    sys = gen_test_system('random_stable', n, seed, descriptor=mode == 'descriptor')
    l = int(rng.integers(2, min(10, n) + 1))
    kb = int(rng.integers(0, l + 1))
    if mode == 'one_sided':
        shifts = ShiftSet(random_shifts(rng, kb), m_b=l - kb)
    else:
        kc = int(rng.integers(0, l + 1))
        shifts = ShiftSet(random_shifts(rng, kb), random_shifts(rng, kc), l - kb, l - kc)
    return sys, reduce(sys, shifts)


def central_discrepancy(sys, rm, grid, sign=1.0):
    """Worst ``|e_formula - e_direct| / (1 + |h| + |h_tilde|)`` over `grid`."""
    curve = error_direct(sys, rm, grid)
    ef = sign * error_formula_batch(sys, rm, grid.points)
    ok = curve.valid & np.isfinite(ef)
    r = np.abs(ef - curve.e_direct) / (1 + np.abs(curve.h_values) + np.abs(curve.h_tilde_values))
    return float(np.max(r[ok]))


def interpolation_discrepancy(sys, rm):
    """Worst ``|e(s)| / (1 + |h(s)|)`` over the finite shifts of `rm`."""
    worst = 0.0
    for s in rm.shifts.all_finite():
        curve = error_direct(sys, rm, [s])
        worst = max(worst, abs(curve.e_direct[0]) / (1 + abs(transfer_eval(sys, s))))
    return worst


def quadrature_case(n, seed):
    """Lanczos quadrature report for a two-sided case with finite shifts."""
    rng = np.random.default_rng([seed, n, 99])
    sys = gen_test_system('random_stable', n, seed, descriptor=seed % 2 == 1)
    l = int(rng.integers(2, min(6, n) + 1))
    shifts = ShiftSet(random_shifts(rng, int(rng.integers(0, l + 1))),
                      random_shifts(rng, int(rng.integers(0, l + 1))))
    v, w = weighted_start_vectors(sys, shifts)
    lz = lanczos_biorth(sys, v, w, l)
    return quadrature_exactness_check(sys, lz, shifts, 2 * l - 1, rng=rng)


def divided_difference_case(seed):
    """Relative errors of both closed forms on one random node set."""
    rng = np.random.default_rng([seed, 7])
    m = int(rng.integers(1, 7))
    nodes = rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m)
    z = 3.0 * np.exp(2j * np.pi * rng.uniform())
    ref = divided_difference(lambda x: 1 / (z - x), nodes)
    e1 = abs(resolvent_divided_difference(z, nodes) - ref) / abs(ref)
    roots = rng.uniform(-2, 2, m - 1) + 1j * rng.uniform(-2, 2, m - 1)
    ref = divided_difference(lambda x: np.prod(x - roots) / (z - x), nodes)
    e2 = abs(weighted_resolvent_divided_difference(z, roots, nodes) - ref) / max(abs(ref), 1e-300)
    return max(e1, e2)


def run_suites(ns=(20, 40, 100), seeds=range(10), mutate=False, dd_cases=100, out=print):
    """Run all suites, report through `out` and return the results.

    With ``mutate=True`` the two-sided formula is evaluated with the wrong
    sign, which the central suite must detect.
    """
    grid = make_grid(-2, 2, 50)
    central = SuiteResult('central', TOL)
    interp = SuiteResult('interpolation', TOL)
    quad = SuiteResult('quadrature', TOL)
    dd = SuiteResult('divided_difference', DD_TOL)
    for n in ns:
        for seed in seeds:
            for mode in MODES:
                sys, rm = random_case(n, seed, mode)
                sign = -1.0 if mutate and not rm.one_sided else 1.0
                label = f'n={n} seed={seed} mode={mode} l={rm.order}'
                central.record(label, central_discrepancy(sys, rm, grid, sign))
                interp.record(label, interpolation_discrepancy(sys, rm))
            rep = quadrature_case(n, seed)
            ok = rep.max_discrepancy <= TOL and rep.control_discrepancy > CONTROL_MIN
            quad.record(f'n={n} seed={seed} mode=lanczos degree={rep.degree} '
                        f'control={rep.control_discrepancy:.3e}', rep.max_discrepancy, ok)
    for seed in range(dd_cases):
        dd.record(f'nodes seed={seed}', divided_difference_case(seed))
    results = [central, interp, quad, dd]
    for res in results:
        for label, value, ok in res.cases:
            out(f'  [{res.name}] {label}: {value:.3e} {"ok" if ok else "FAIL"}')
        out(f'{res.name}: {"PASS" if res.passed else "FAIL"} '
            f'(worst {res.worst:.3e}, tol {res.tol:.0e}, {len(res.cases)} cases)')
    return results
