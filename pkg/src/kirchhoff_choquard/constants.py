"""Problem parameters and the sharp constants entering the energy estimates.

The model is the Kirchhoff equation with an attractive local power term and a
critical Hartree (Riesz-convolution) term on R^3,

    -(a + b |grad u|_2^2) Lap u - lam u = mu |u|^{q-2} u
                                          + (I_alpha * |u|^{alpha+3}) |u|^{alpha+1} u,

under the mass constraint |u|_2^2 = rho^2.  Everything quantitative about the
admissible parameter regime reduces to a handful of closed-form constants:

  A_alpha   normalization of the Riesz potential I_alpha(x) = A_alpha |x|^{alpha-3},
  C_alpha   sharp Hardy-Littlewood-Sobolev constant C(3, alpha) at the symmetric
            exponent pair p = r = 6/(3+alpha),
  S         best Sobolev constant of D^{1,2}(R^3) -> L^6,
  S_alpha   critical Hartree Rayleigh constant, S_alpha = S / (A_alpha C_alpha)^{1/(alpha+3)},
  gamma_q   mass-scaling exponent 3(q-2)/(2q) of the L^q term under t*u = t^{3/2} u(t.),
  C_q       sharp Gagliardo-Nirenberg constant (computed by the shooting solver
            in :mod:`kirchhoff_choquard.gn`; optional here).

S is evaluated numerically as the Rayleigh quotient of the Aubin-Talenti
profile, which doubles as a quadrature self-check; the others are Gamma
function expressions evaluated with an internal Lanczos approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PhysicalParams",
    "SharpConstants",
    "gamma",
    "compute_A_alpha",
    "compute_C_alpha",
    "compute_S",
    "gamma_q",
    "build_constants",
    "energy_threshold",
    "delta_lower_bound",
]


# Lanczos approximation, g = 7, 9 coefficients (~15 significant digits on the
# positive real axis; negative/left half handled by reflection).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(z: float) -> float:
    """Gamma function for real arguments (Lanczos, g=7)."""
    if z < 0.5:
        # reflection formula; also covers the poles at z = 0, -1, ...
        s = math.sin(math.pi * z)
        if s == 0.0:
            raise ValueError(f"gamma pole at z={z}")
        return math.pi / (s * gamma(1.0 - z))
    z = z - 1.0
    x = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        x += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * x


@dataclass(frozen=True)
class PhysicalParams:
    """The sextuple (a, b, rho, mu, q, alpha) defining one problem instance.

    a, b       Kirchhoff coefficients (both > 0),
    rho        prescribed L^2 norm (> 0),
    mu         strength of the local |u|^{q-2}u perturbation (> 0),
    q          local exponent, 14/3 < q < 6,
    alpha      Riesz order, 0 < alpha < 3.
    """

    a: float
    b: float
    rho: float
    mu: float
    q: float
    alpha: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.rho > 0 and self.mu > 0):
            raise ValueError("a, b, rho, mu must all be positive")
        if not (14.0 / 3.0 < self.q < 6.0):
            raise ValueError(f"q={self.q} outside the supported range (14/3, 6)")
        if not (0.0 < self.alpha < 3.0):
            raise ValueError(f"alpha={self.alpha} outside (0, 3)")

    def with_(self, **kw) -> "PhysicalParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class SharpConstants:
    """Derived constants for one value of (alpha, q).

    c_q is None until provided by the Gagliardo-Nirenberg shooting solver.
    """

    a_alpha: float
    c_alpha: float
    s: float
    s_alpha: float
    gamma_q: float
    c_q: float | None = None

    def require_c_q(self) -> float:
        if self.c_q is None:
            raise ValueError("c_q not set; run the GN shooting solver first")
        return self.c_q


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 3.0):
        raise ValueError(f"alpha={alpha} outside (0, 3)")


def compute_A_alpha(alpha: float) -> float:
    """Riesz normalization Gamma((3-alpha)/2) / (2^alpha pi^{3/2} Gamma(alpha/2))."""
    _check_alpha(alpha)
    return gamma((3.0 - alpha) / 2.0) / (2.0 ** alpha * math.pi ** 1.5 * gamma(alpha / 2.0))


def compute_C_alpha(alpha: float) -> float:
    """Sharp HLS constant C(3, alpha) at p = r = 6/(3+alpha).

    C(3, alpha) = pi^{(3-alpha)/2} Gamma(alpha/2)/Gamma((3+alpha)/2)
                  * (Gamma(3/2)/Gamma(3))^{-alpha/3}.
    """
    _check_alpha(alpha)
    return (
        math.pi ** ((3.0 - alpha) / 2.0)
        * gamma(alpha / 2.0)
        / gamma((3.0 + alpha) / 2.0)
        * (gamma(1.5) / gamma(3.0)) ** (-alpha / 3.0)
    )


def gamma_q(q: float) -> float:
    """Mass-scaling exponent 3(q-2)/(2q) of |t*u|_q^q; q gamma_q > 4 iff q > 14/3."""
    if not (2.0 < q < 6.0):
        raise ValueError(f"q={q} outside (2, 6)")
    return 3.0 * (q - 2.0) / (2.0 * q)


class SobolevEstimate(NamedTuple):
    value: float
    quad_error: float


def _aubin_talenti(r: np.ndarray, eps: float) -> np.ndarray:
    return (3.0 * eps ** 2) ** 0.25 / np.sqrt(eps ** 2 + r ** 2)


def _aubin_talenti_slope(r: np.ndarray, eps: float) -> np.ndarray:
    return -((3.0 * eps ** 2) ** 0.25) * r / (eps ** 2 + r ** 2) ** 1.5


def _sobolev_quotient(eps: float, n_panels: int, n_gauss: int = 16) -> float:
    # Rayleigh quotient |grad U|_2^2 / |U|_6^2 of the Aubin-Talenti profile,
    # integrated over all of [0, inf) via the rational map r = t/(1-t).
    # Composite Gauss-Legendre keeps every node strictly inside (0, 1).
    x, wx = np.polynomial.legendre.leggauss(n_gauss)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    w = (half[:, None] * wx[None, :]).ravel()
    r = t / (1.0 - t)
    jac = 1.0 / (1.0 - t) ** 2
    du = _aubin_talenti_slope(r, eps)
    u = _aubin_talenti(r, eps)
    grad = 4.0 * math.pi * np.sum(w * jac * r ** 2 * du ** 2)
    l6 = 4.0 * math.pi * np.sum(w * jac * r ** 2 * u ** 6)
    return grad / l6 ** (1.0 / 3.0)


def compute_S(eps: float = 1.0, n_panels: int = 256) -> SobolevEstimate:
    """Best Sobolev constant of D^{1,2}(R^3) -> L^6 from the Aubin-Talenti bubble.

    Returns the Rayleigh quotient together with a Richardson-style error
    estimate (difference against the half-resolution evaluation).
    """
    coarse = _sobolev_quotient(eps, n_panels // 2)
    fine = _sobolev_quotient(eps, n_panels)
    return SobolevEstimate(fine, abs(fine - coarse))


def build_constants(params: PhysicalParams, c_q: float | None = None) -> SharpConstants:
    """Assemble all closed-form constants for the given parameters."""
    a_alpha = compute_A_alpha(params.alpha)
    c_alpha = compute_C_alpha(params.alpha)
    s = compute_S().value
    s_alpha = s / (a_alpha * c_alpha) ** (1.0 / (params.alpha + 3.0))
    return SharpConstants(
        a_alpha=a_alpha,
        c_alpha=c_alpha,
        s=s,
        s_alpha=s_alpha,
        gamma_q=gamma_q(params.q),
        c_q=c_q,
    )


def energy_threshold(params: PhysicalParams, consts: SharpConstants) -> float:
    """Compactness threshold ((alpha+2)/(2(alpha+3))) (a S_alpha)^{(alpha+3)/(alpha+2)}.

    Any constrained minimizer certified by the solver must have energy strictly
    below this level.
    """
    al = params.alpha
    return (al + 2.0) / (2.0 * (al + 3.0)) * (params.a * consts.s_alpha) ** ((al + 3.0) / (al + 2.0))


def delta_lower_bound(params: PhysicalParams, consts: SharpConstants) -> float:
    """Lower bound delta for |grad u|_2 over the Pohozaev manifold.

    Every state with P(u) = 0 satisfies
        b <= mu gamma_q C_q^q rho^{q(1-gamma_q)} |grad u|^{q gamma_q - 4}
             + S_alpha^{-(alpha+3)} |grad u|^{2(alpha+1)},
    and since both exponents are positive for q > 14/3 the right side is
    strictly increasing from 0: the unique root of h(d) = rhs(d) - b is the
    sharpest gradient lower bound this inequality yields.
    """
    c_q = consts.require_c_q()
    gq = consts.gamma_q
    q = params.q
    coef_local = params.mu * gq * c_q ** q * params.rho ** (q * (1.0 - gq))
    coef_crit = consts.s_alpha ** (-(params.alpha + 3.0))
    e_local = q * gq - 4.0
    e_crit = 2.0 * (params.alpha + 1.0)

    def h(d: float) -> float:
        return coef_local * d ** e_local + coef_crit * d ** e_crit - params.b

    hi = 1.0
    while h(hi) < 0.0:
        hi *= 2.0
    lo = hi / 2.0 if hi > 1.0 else 1e-30
    while h(lo) > 0.0:
        lo /= 2.0
    return brentq(h, lo, hi, rtol=1e-12, maxiter=200)
