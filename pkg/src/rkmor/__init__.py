"""Rational Krylov model order reduction with explicit error formulas."""

from rkmor.errors import *  # noqa: F401,F403
from rkmor.greedy import (GreedyRun, arksm, extreme_shift_bounds, hinf_sweep,
                          irka_baseline, two_sided_greedy)
from rkmor.krylov import ReducedModel, ShiftSet, build_basis, lanczos_biorth, project, reduce
from rkmor.model import StateSpaceSystem, gen_test_system, load_system, make_grid, save_system
from rkmor.remainder import (error_direct, error_estimate, error_formula,
                             reduced_transfer_eval, transfer_eval)

__version__ = '0.1.0'
