"""Sharp Gagliardo-Nirenberg constants via radial shooting.

For p in (2, 6) the sharp constant in |u|_p <= C_p |grad u|_2^d |u|_2^{1-d},
d = 3(p-2)/(2p), is attained by the unique positive radial ground state of

    -Lap w + (1/d - 1) w = (2/(p d)) |w|^{p-2} w,

and then C_p = (p / (2 |w|_2^{p-2}))^{1/p}.  The ground state is found by the
classical shooting dichotomy in the initial height w(0): too high and the
profile crosses zero, too low and it turns back upward before decaying.  The
bisection is run on a batch of candidate heights integrated simultaneously
with fixed-step RK4, which keeps the whole search to a few vectorized sweeps.

The converged profile satisfies |grad w|_2 = |w|_2 and |w|_p^p = (p/2)|w|_2^2
(combine the Nehari and virial identities of the equation); both are used as
independent correctness checks in the test-suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grid import RadialField, RadialGrid

__all__ = ["GroundStateProfile", "shoot_ground_state", "gn_check", "BracketError"]

_LOW, _UNDECIDED, _HIGH = -1, 0, 1


class BracketError(RuntimeError):
    """No sign change of the shooting dichotomy in the searched height range."""


@dataclass
class GroundStateProfile:
    p: float
    shoot_height: float
    profile: RadialField
    l2_norm: float
    c_p: float
    fine_r: np.ndarray
    fine_values: np.ndarray
    mass_coeff: float  # 1/d - 1 in the field equation
    source_coeff: float  # 2/(p d)


def _ode_rhs(r: float, y: np.ndarray, z: np.ndarray, m: float, c: float, p: float):
    """Right-hand side of w'' = -2 w'/r + m w - c |w|^{p-2} w (regularized at 0)."""
    nonlin = m * y - c * np.sign(y) * np.abs(y) ** (p - 1.0)
    if r == 0.0:
        return nonlin / 3.0
    return -2.0 * z / r + nonlin


def _integrate_batch(
    heights: np.ndarray,
    m: float,
    c: float,
    p: float,
    h: float,
    n_steps: int,
    record: bool = False,
):
    """RK4 the shooting ODE for all candidate heights at once.

    Classification runs every step so that a zero crossing is caught before
    the quartic term can blow the trajectory up; decided candidates are
    frozen at a benign value.  With record=True (single candidate) no
    freezing happens and the state is clamped instead, which leaves the
    trajectory exact up to its breakdown point.

    Returns the classification array (and the recorded trajectory).
    """
    y = heights.astype(float).copy()
    status = np.zeros(y.shape, dtype=np.int8)
    ymax = 10.0 * heights
    traj = np.empty(n_steps + 1) if record else None
    if record:
        traj[0] = y[0]
    # first step from the regular series w(r) = w0 + f r^2/6 + O(r^4), which
    # keeps the 2 z / r friction term out of the RK4 stages near the origin
    f0 = m * y - c * np.sign(y) * np.abs(y) ** (p - 1.0)
    z = f0 * h / 3.0
    y = y + f0 * h ** 2 / 6.0
    r = h
    if record:
        traj[1] = y[0]
    for k in range(1, n_steps):
        k1y = z
        k1z = _ode_rhs(r, y, z, m, c, p)
        r2 = r + 0.5 * h
        y2 = y + 0.5 * h * k1y
        z2 = z + 0.5 * h * k1z
        k2z = _ode_rhs(r2, y2, z2, m, c, p)
        y3 = y + 0.5 * h * z2
        z3 = z + 0.5 * h * k2z
        k3z = _ode_rhs(r2, y3, z3, m, c, p)
        r3 = r + h
        y4 = y + h * z3
        z4 = z + h * k3z
        k4z = _ode_rhs(r3, y4, z4, m, c, p)
        y = y + h / 6.0 * (z + 2.0 * z2 + 2.0 * z3 + z4)
        z = z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        r = r3
        if record:
            traj[k + 1] = y[0]
            # clamping only bites after the shot has broken down
            np.clip(y, -1.0, ymax, out=y)
        else:
            undecided = status == _UNDECIDED
            crossed = undecided & (y < 0.0)
            turned = undecided & (z > 0.0) & (y > 0.0)
            blown = undecided & (y > ymax)
            status[crossed] = _HIGH
            status[turned | blown] = _LOW
            decided = status != _UNDECIDED
            if decided.all():
                break
            if crossed.any() or turned.any() or blown.any():
                y = np.where(decided, 0.5, y)
                z = np.where(decided, 0.0, z)
    return status, traj


def _refine_bracket(status: np.ndarray, grid_s: np.ndarray):
    """Bracket around the first low-to-high transition.

    Heights far above the ground state plunge so violently that their
    classification is numerically unreliable; everything beyond the first
    crossing threshold is therefore ignored.
    """
    highs = np.flatnonzero(status == _HIGH)
    if highs.size == 0:
        return None
    i_hi = highs.min()
    lows = np.flatnonzero(status[:i_hi] == _LOW)
    if lows.size == 0:
        return None
    return grid_s[lows.max()], grid_s[i_hi]


def shoot_ground_state(
    p: float,
    grid: RadialGrid,
    h: float = 1e-3,
    s_range: tuple[float, float] = (1e-3, 1e3),
    batch: int = 1024,
) -> GroundStateProfile:
    """Ground state of the GN extremal equation and the sharp constant C_p."""
    if not (2.0 < p < 6.0):
        raise ValueError(f"p={p} outside (2, 6)")
    d = 3.0 * (p - 2.0) / (2.0 * p)
    m = 1.0 / d - 1.0
    c = 2.0 / (p * d)
    # integrate far enough that the linearized tail e^{-sqrt(m) r} reaches ~1e-10
    r_shoot = max(30.0, 24.0 / math.sqrt(m))
    n_steps = int(round(r_shoot / h))

    s_grid = np.geomspace(s_range[0], s_range[1], 2 * batch)
    status, _ = _integrate_batch(s_grid, m, c, p, h, n_steps)
    bracket = _refine_bracket(status, s_grid)
    if bracket is None:
        raise BracketError(
            f"no shooting bracket for p={p} in heights [{s_range[0]:g}, {s_range[1]:g}]"
        )
    for _ in range(3):
        s_grid = np.linspace(bracket[0], bracket[1], batch)
        status, _ = _integrate_batch(s_grid, m, c, p, h, n_steps)
        refined = _refine_bracket(status, s_grid)
        if refined is None:
            break  # whole band undecided: below the decidability limit
        bracket = refined
        if (bracket[1] - bracket[0]) < 1e-14 * bracket[1]:
            break

    s_star = 0.5 * (bracket[0] + bracket[1])
    _, traj = _integrate_batch(np.array([s_star]), m, c, p, h, n_steps, record=True)
    fine_r = np.linspace(0.0, r_shoot, n_steps + 1)

    # Graft the linear far field C e^{-k r}/r once the amplitude drops to
    # 2e-3 of the height: there the trajectory is still two decades above the
    # unstable-mode contamination left by the finite bracket, while the
    # neglected power term is already O(1e-6) relative.  The decay rate is
    # fitted at the joint, which makes the graft C^1 and keeps the grafted
    # region an exact solution of the linearized equation.  Breakdown
    # detection (sign change or upturn) is kept as a backstop.
    dtraj = np.diff(traj)
    bad = np.flatnonzero((traj[1:] < 0.0) | (dtraj > 0.0) | (traj[1:] <= 2e-3 * s_star))
    cut = int(bad[0]) if bad.size else n_steps
    sm = math.sqrt(m)
    if 2 < cut < n_steps:
        rc = fine_r[cut]
        g = np.log(traj[cut - 1 : cut + 2] * fine_r[cut - 1 : cut + 2])
        sm_fit = -(g[2] - g[0]) / (2.0 * h)
        if not (0.5 * sm < sm_fit < 2.0 * sm):  # contaminated joint; fall back
            sm_fit = sm
        tail_c = traj[cut] * rc * math.exp(sm_fit * rc)
        traj = traj.copy()
        traj[cut + 1 :] = tail_c * np.exp(-sm_fit * fine_r[cut + 1 :]) / fine_r[cut + 1 :]
        sm = sm_fit
    else:
        tail_c = traj[-1] * fine_r[-1] * math.exp(sm * fine_r[-1])

    mass = 4.0 * math.pi * np.trapezoid(fine_r ** 2 * traj ** 2, fine_r)
    mass += 4.0 * math.pi * tail_c ** 2 * math.exp(-2.0 * sm * r_shoot) / (2.0 * sm)
    l2 = math.sqrt(mass)
    c_p = (p / (2.0 * l2 ** (p - 2.0))) ** (1.0 / p)

    interp = PchipInterpolator(fine_r, traj, extrapolate=False)
    vals = interp(grid.nodes)
    outside = grid.nodes > r_shoot
    vals[outside] = tail_c * np.exp(-sm * grid.nodes[outside]) / grid.nodes[outside]
    vals = np.nan_to_num(vals, nan=0.0)
    return GroundStateProfile(
        p=p,
        shoot_height=s_star,
        profile=RadialField(grid, vals),
        l2_norm=l2,
        c_p=c_p,
        fine_r=fine_r,
        fine_values=traj,
        mass_coeff=m,
        source_coeff=c,
    )


def gn_check(u: RadialField, p: float, c_p: float) -> float:
    """Signed margin C_p |grad u|_2^d |u|_2^{1-d} - |u|_p (nonnegative for all u)."""
    from .grid import grad_norm_sq, lq_norm_pow, mass_sq

    if not (2.0 < p < 6.0):
        raise ValueError(f"p={p} outside (2, 6)")
    d = 3.0 * (p - 2.0) / (2.0 * p)
    m2 = mass_sq(u)
    if m2 == 0.0:
        return 0.0
    return c_p * grad_norm_sq(u) ** (d / 2.0) * m2 ** ((1.0 - d) / 2.0) - lq_norm_pow(u, p) ** (
        1.0 / p
    )
