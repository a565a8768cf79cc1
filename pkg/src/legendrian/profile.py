"""The conformal factor y = rho^2 of the U(1)-invariant Legendrian cylinders.

y solves y'' = -2y(3y - 2) with y(0) = y_max, y'(0) = 0, and has the closed
form y_max - (y_max - y_min) sn^2(r t, k) in terms of the roots of
y^3 - y^2 + 4 tau^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .elliptic import Modulus, complete_E, complete_K, jacobi

TAU_MAX = 1.0 / (3.0 * math.sqrt(3.0))


class ParameterDomainError(ValueError):
    """Raised for a parameter outside its admissible range."""


def _cubic_roots(tau: float) -> tuple[float, float, float]:
    """Ordered real roots of y^3 - y^2 + 4 tau^2 (trigonometric form plus Newton polish)."""
    if tau < 1e-3:
        # the trigonometric form cancels catastrophically here; the two small roots solve
        # y sqrt(1 - y) = +-2 tau, which Newton handles from +-2 tau
        small = []
        for sign in (-1.0, 1.0):
            y = sign * 2.0 * tau
            for _ in range(6):
                q = math.sqrt(1.0 - y)
                y -= (y * q - sign * 2.0 * tau) / (q - 0.5 * y / q)
            small.append(y)
        return small[0], small[1], 1.0 - small[0] - small[1]
    c = 1.0 - 54.0 * tau * tau
    c = min(1.0, max(-1.0, c))
    base = math.acos(c) / 3.0
    roots = [1.0 / 3.0 + 2.0 / 3.0 * math.cos(base - 2.0 * math.pi * j / 3.0) for j in range(3)]
    polished = []
    for y in roots:
        for _ in range(3):
            f = y * y * y - y * y + 4.0 * tau * tau
            df = 3.0 * y * y - 2.0 * y
            if df == 0.0:
                break
            step = f / df
            y -= step
            if abs(step) < 1e-17:
                break
        polished.append(y)
    ys = sorted(polished)
    return ys[0], ys[1], ys[2]


@dataclass(frozen=True)
class TauParams:
    """tau with the cubic roots, elliptic modulus and half-period of the profile."""

    tau: float
    y_minus: float
    y_min: float
    y_max: float
    r: float
    modulus: Modulus
    p_tau: float

    @property
    def is_sphere(self) -> bool:
        return self.tau == 0.0

    @property
    def is_flat(self) -> bool:
        return self.tau == TAU_MAX

    @cached_property
    def p_hat(self) -> float:
        from .immersion import rotation_period_heuman
        return rotation_period_heuman(self)


def solve_params(tau: float) -> TauParams:
    tau = float(tau)
    if not (0.0 <= tau <= TAU_MAX * (1 + 1e-15)):
        raise ParameterDomainError(f"tau={tau} outside [0, 1/(3 sqrt 3)]")
    if tau == 0.0:
        return TauParams(0.0, 0.0, 0.0, 1.0, 1.0, Modulus(1.0, 0.0), math.inf)
    if tau >= TAU_MAX:
        return TauParams(TAU_MAX, -1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0, Modulus(0.0, 1.0), math.pi / 2)
    y_minus, y_min, y_max = _cubic_roots(tau)
    r = math.sqrt(y_max - y_minus)
    # 1 - y = 4 tau^2 / y^2 for every root; keeps y_max - y_min accurate as well
    spread = y_max - y_min
    modulus = Modulus.from_squares(spread, y_min - y_minus)
    return TauParams(tau, y_minus, y_min, y_max, r, modulus, complete_K(modulus) / r)


def ymin_to_tau(y_min: float) -> float:
    if not 0.0 <= y_min <= 2.0 / 3.0:
        raise ParameterDomainError(f"y_min={y_min} outside [0, 2/3]")
    return 0.5 * y_min * math.sqrt(1.0 - y_min)


def conformal_factor(p: TauParams, t) -> np.ndarray:
    """y(t) = rho(t)^2."""
    t = np.asarray(t, dtype=float)
    if p.tau == 0.0:
        return 1.0 / np.cosh(t) ** 2
    if p.is_flat:
        return np.full(t.shape, 2.0 / 3.0)
    # even in t by construction: sn^2 is even and cn^2 is evaluated at |t|
    _, cn, _ = jacobi(p.r * np.abs(t), p.modulus)
    return p.y_min + (p.y_max - p.y_min) * cn * cn


def conformal_factor_with_derivative(p: TauParams, t) -> tuple[np.ndarray, np.ndarray]:
    """(y, dy/dt)."""
    t = np.asarray(t, dtype=float)
    if p.tau == 0.0:
        se = 1.0 / np.cosh(t)
        return se * se, -2.0 * se * se * np.tanh(t)
    if p.is_flat:
        return np.full(t.shape, 2.0 / 3.0), np.zeros(t.shape)
    sn, cn, dn = jacobi(p.r * t, p.modulus)
    spread = p.y_max - p.y_min
    return p.y_min + spread * cn * cn, -2.0 * spread * p.r * sn * cn * dn


def one_minus_y(p: TauParams, t) -> np.ndarray:
    """1 - y(t), without cancellation where y is close to 1."""
    t = np.asarray(t, dtype=float)
    if p.tau == 0.0:
        return np.tanh(t) ** 2
    if p.is_flat:
        return np.full(t.shape, 1.0 / 3.0)
    sn, _, _ = jacobi(p.r * np.abs(t), p.modulus)
    one_minus_ymax = 4.0 * p.tau**2 / p.y_max**2
    return one_minus_ymax + (p.y_max - p.y_min) * sn * sn


def dp_dtau(p: TauParams) -> float:
    """Derivative of the half-period with respect to tau (chain rule through the roots)."""
    if not 0.0 < p.tau < TAU_MAX:
        raise ParameterDomainError("derivative defined on the open range only")
    ys = (p.y_minus, p.y_min, p.y_max)
    dy = [-8.0 * p.tau / (3.0 * y * y - 2.0 * y) for y in ys]
    dym, dymin, dymax = dy
    k, kp = p.modulus.k, p.modulus.k_prime
    K, E = complete_K(p.modulus), complete_E(p.modulus)
    r2 = p.y_max - p.y_minus
    dk2 = ((dymax - dymin) * r2 - (p.y_max - p.y_min) * (dymax - dym)) / (r2 * r2)
    dk = dk2 / (2.0 * k)
    dK = (E - kp * kp * K) / (k * kp * kp)
    dr = (dymax - dym) / (2.0 * p.r)
    return dK * dk / p.r - K * dr / (p.r * p.r)


def period_asymptotics_report(taus) -> list[dict]:
    """Rows (tau, p, p + log(tau)/2, 2 tau dp/dtau)."""
    rows = []
    for tau in taus:
        p = solve_params(tau)
        rows.append({
            "tau": float(tau),
            "p_tau": p.p_tau,
            "p_plus_half_log_tau": p.p_tau + 0.5 * math.log(tau),
            "two_tau_dp_dtau": 2.0 * tau * dp_dtau(p),
        })
    return rows


def decay_envelope_check(p: TauParams, n: int = 10_000) -> dict:
    """Worst margins of y >= (2/3) e^{-2t} and of the monotonicity of e^{2t} y on [0, p]."""
    t_end = p.p_tau if math.isfinite(p.p_tau) else 12.0
    t = np.linspace(0.0, t_end, n)
    y = conformal_factor(p, t)
    lower = y - 2.0 / 3.0 * np.exp(-2.0 * t)
    growth = np.diff(np.exp(2.0 * t) * y)
    return {
        "min_margin": float(lower.min()),
        "min_increment": float(growth.min()),
        "neck_product": float(p.y_min * math.exp(2.0 * p.p_tau)) if math.isfinite(p.p_tau) else math.nan,
    }
