"""Normalized ground states of Kirchhoff equations with critical Hartree nonlinearity.

Radial solver and certificate checker for

    -(a + b |grad u|_2^2) Lap u - lam u = mu |u|^{q-2} u
                                          + (I_alpha * |u|^{alpha+3}) |u|^{alpha+1} u

on R^3 under the mass constraint |u|_2^2 = rho^2, with 14/3 < q < 6 and
0 < alpha < 3.
"""

from .constants import (
    PhysicalParams,
    SharpConstants,
    build_constants,
    compute_A_alpha,
    compute_C_alpha,
    compute_S,
    delta_lower_bound,
    energy_threshold,
    gamma_q,
)
from .grid import RadialField, RadialGrid, dilate, grad_norm_sq, lq_norm_pow, mass_sq
from .riesz import RieszKernel, angular_kernel, build_kernel, choquard_energy, riesz_convolve
from .gn import GroundStateProfile, gn_check, shoot_ground_state
from .fiber import FiberCritical, FiberFunctionals, find_fiber_critical, project_pohozaev
from .solver import (
    ConvergenceError,
    SolveReport,
    SolverConfig,
    certify,
    energy,
    euler_lagrange_gradient,
    lagrange_multiplier,
    pohozaev,
    solve_ground_state,
)
from .bubbles import (
    BubbleFamily,
    build_bubble,
    build_family,
    check_A8,
    estimate_mu_star,
    measure_asymptotics,
    mountain_pass_upper_bound,
)

__version__ = "0.1.0"
