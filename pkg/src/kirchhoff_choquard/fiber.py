"""Dilation fiber of the constrained energy.

The mass-preserving dilation t*u = t^{3/2} u(t .) turns the energy into a
scalar function of t determined by four functionals of u:

    E_u(t) = (a/2) t^2 g2 + (b/4) t^4 g4 - (mu/q) t^{q gq} nq
             - t^{2(alpha+3)} choq / (2(alpha+3)),

with g2 = |grad u|_2^2, g4 = g2^2, nq = |u|_q^q, choq the nonlocal energy and
gq the mass-scaling exponent.  For q > 14/3 the rescaled derivative
E_u'(t)/t^3 is strictly decreasing from +inf to -inf, so E_u has exactly one
positive critical point t_u, always a strict maximum; t_u * u is the
projection of u onto the Pohozaev manifold P(u) = 0.

Root finding works on the closed-form scalars only; the projected state is
materialized by interpolation exactly once, which keeps interpolation error
out of the root find entirely.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import PhysicalParams, gamma_q
from .grid import RadialField, dilate, grad_norm_sq, lq_norm_pow, mass_sq
from .riesz import RieszKernel, choquard_energy

__all__ = [
    "FiberFunctionals",
    "FiberCritical",
    "fiber_energy",
    "fiber_derivative",
    "fiber_second_derivative",
    "find_fiber_critical",
    "project_pohozaev",
    "BracketFailure",
]


class BracketFailure(RuntimeError):
    """The fiber derivative did not change sign (functional evaluation bug)."""


@dataclass(frozen=True)
class FiberFunctionals:
    """The four scalars determining the fiber map of one state."""

    g2: float
    g4: float
    nq: float
    choq: float

    @classmethod
    def from_field(
        cls, u: RadialField, params: PhysicalParams, kernel: RieszKernel
    ) -> "FiberFunctionals":
        g2 = grad_norm_sq(u)
        return cls(
            g2=g2,
            g4=g2 * g2,
            nq=lq_norm_pow(u, params.q),
            choq=choquard_energy(kernel, u),
        )

    def scaled(self, t: float, params: PhysicalParams) -> "FiberFunctionals":
        """Functionals of t*u via the exact scaling laws."""
        gq = gamma_q(params.q)
        return FiberFunctionals(
            g2=t ** 2 * self.g2,
            g4=t ** 4 * self.g4,
            nq=t ** (params.q * gq) * self.nq,
            choq=t ** (2.0 * (params.alpha + 3.0)) * self.choq,
        )


@dataclass(frozen=True)
class FiberCritical:
    """The unique positive maximizer of the fiber map and its certificate data."""

    t_u: float
    e_at_t: float
    e2_at_t: float
    bracket: tuple[float, float]


def fiber_energy(f: FiberFunctionals, params: PhysicalParams, t: float) -> float:
    gq = gamma_q(params.q)
    al = params.alpha
    return (
        0.5 * params.a * t ** 2 * f.g2
        + 0.25 * params.b * t ** 4 * f.g4
        - params.mu / params.q * t ** (params.q * gq) * f.nq
        - t ** (2.0 * (al + 3.0)) * f.choq / (2.0 * (al + 3.0))
    )


def fiber_derivative(f: FiberFunctionals, params: PhysicalParams, t: float) -> float:
    gq = gamma_q(params.q)
    al = params.alpha
    return (
        params.a * t * f.g2
        + params.b * t ** 3 * f.g4
        - params.mu * gq * t ** (params.q * gq - 1.0) * f.nq
        - t ** (2.0 * al + 5.0) * f.choq
    )


def fiber_second_derivative(f: FiberFunctionals, params: PhysicalParams, t: float) -> float:
    gq = gamma_q(params.q)
    al = params.alpha
    return (
        params.a * f.g2
        + 3.0 * params.b * t ** 2 * f.g4
        - params.mu * gq * (params.q * gq - 1.0) * t ** (params.q * gq - 2.0) * f.nq
        - (2.0 * al + 5.0) * t ** (2.0 * al + 4.0) * f.choq
    )


def pohozaev_value(f: FiberFunctionals, params: PhysicalParams) -> float:
    """P(u) = a g2 + b g4 - mu gamma_q nq - choq from the functionals."""
    gq = gamma_q(params.q)
    return params.a * f.g2 + params.b * f.g4 - params.mu * gq * f.nq - f.choq


def find_fiber_critical(
    f: FiberFunctionals, params: PhysicalParams, t_init: float = 1.0
) -> FiberCritical:
    """Locate the unique root of E_u' by doubling bracket + safeguarded Newton."""
    if f.g2 <= 0.0 or (f.nq <= 0.0 and f.choq <= 0.0):
        raise BracketFailure("fiber map degenerate: zero field or missing functionals")

    def dphi(t):
        return fiber_derivative(f, params, t)

    lo = hi = float(t_init)
    v = dphi(lo)
    it = 0
    if v > 0.0:
        while dphi(hi) > 0.0:
            hi *= 2.0
            it += 1
            if it > 400:
                raise BracketFailure("no sign change while doubling t upward")
        lo = hi / 2.0
    elif v < 0.0:
        while dphi(lo) < 0.0:
            lo /= 2.0
            it += 1
            if it > 400:
                raise BracketFailure("no sign change while halving t downward")
        hi = lo * 2.0
    else:
        lo = hi = t_init
    bracket = (lo, hi)

    t = min(max(t_init, lo), hi)
    for _ in range(200):
        if hi - lo <= 1e-14 * hi:
            break
        d1 = fiber_derivative(f, params, t)
        if d1 > 0.0:
            lo = t
        elif d1 < 0.0:
            hi = t
        else:
            break
        d2 = fiber_second_derivative(f, params, t)
        step_ok = d2 != 0.0
        if step_ok:
            t_new = t - d1 / d2
            step_ok = lo < t_new < hi
        if not step_ok:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-14 * t:
            t = t_new
            break
        t = t_new

    return FiberCritical(
        t_u=t,
        e_at_t=fiber_energy(f, params, t),
        e2_at_t=fiber_second_derivative(f, params, t),
        bracket=bracket,
    )


def project_pohozaev(
    u: RadialField,
    params: PhysicalParams,
    kernel: RieszKernel,
    verify: bool = True,
) -> tuple[float, RadialField, FiberCritical]:
    """Project u in S_rho onto the Pohozaev manifold along its dilation fiber."""
    m2 = mass_sq(u)
    if m2 == 0.0:
        raise ValueError("cannot project the zero field")
    if abs(m2 - params.rho ** 2) > 1e-8 * params.rho ** 2:
        raise ValueError(f"field mass {m2:.6g} is not rho^2 = {params.rho ** 2:.6g}")
    f = FiberFunctionals.from_field(u, params, kernel)
    crit = find_fiber_critical(f, params)
    v = dilate(u, crit.t_u)
    if verify:
        fv = FiberFunctionals.from_field(v, params, kernel)
        p_res = pohozaev_value(fv, params)
        if abs(p_res) > 1e-4 * params.a * fv.g2:
            warnings.warn(
                f"projected state has |P| = {abs(p_res):.3e} > 1e-4 a |grad v|^2; "
                "grid too coarse for this dilation",
                RuntimeWarning,
                stacklevel=2,
            )
    return crit.t_u, v, crit
