"""The U(1)-invariant special Legendrian cylinders X_tau and their twisted versions.

X_tau(s, t) = (w1(t), w2(t) cos s, -w2(t) sin s) with
w1 = -i sqrt(1 - y) e^{i psi1}, w2 = sqrt(y) e^{i psi2}, and the phases fixed by
(1 - y) psi1' = 2 tau, y psi2' = -2 tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .elliptic import heuman_lambda0, third_kind_Lambda
from .profile import TAU_MAX, ParameterDomainError, TauParams, conformal_factor, conformal_factor_with_derivative, solve_params
from .symmetry import AmbientIsometry, reflection_t, translating_twist, twist


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LegendrianJet:
    """Points X and coordinate tangents X_s, X_t, each of shape (..., 3)."""

    X: np.ndarray
    Xs: np.ndarray
    Xt: np.ndarray

    def norm_defect(self) -> np.ndarray:
        return np.abs(np.sum(np.abs(self.X) ** 2, axis=-1) - 1.0)

    def contact_defect(self) -> np.ndarray:
        """max(|Im<X_s, X>|, |Im<X_t, X>|): the contact form on both tangents."""
        cs = np.imag(np.sum(np.conj(self.X) * self.Xs, axis=-1))
        ct = np.imag(np.sum(np.conj(self.X) * self.Xt, axis=-1))
        return np.maximum(np.abs(cs), np.abs(ct))

    def lagrangian_defect(self) -> np.ndarray:
        """|omega(X_s, X_t)|; zero for a Legendrian immersion."""
        return np.abs(np.imag(np.sum(np.conj(self.Xs) * self.Xt, axis=-1)))

    def metric(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gss = np.sum(np.abs(self.Xs) ** 2, axis=-1)
        gtt = np.sum(np.abs(self.Xt) ** 2, axis=-1)
        gst = np.real(np.sum(np.conj(self.Xs) * self.Xt, axis=-1))
        return gss, gst, gtt

    def take(self, idx) -> "LegendrianJet":
        return LegendrianJet(self.X[idx], self.Xs[idx], self.Xt[idx])


def lagrangian_angle(jet: LegendrianJet, rank_tol: float = 1e-12) -> np.ndarray:
    """-arg det[X | X_t | X_s] in (-pi, pi].

    The sign makes a Hamiltonian perturbation by -J grad f change the angle by
    +(Delta + 6) f to first order (a constant f = c rotates X by e^{-2ic})."""
    d = np.linalg.det(np.stack([jet.X, jet.Xt, jet.Xs], axis=-1))
    if np.any(np.abs(d) < rank_tol):
        raise ValueError("degenerate frame: X, X_t, X_s not independent")
    return np.angle(np.conj(d))


def contact_pullback(jet: LegendrianJet) -> np.ndarray:
    return jet.contact_defect()


# ---------------------------------------------------------------------------
# the cylinders X_tau


@dataclass(frozen=True)
class TorusImmersion:
    params: TauParams

    @classmethod
    def from_tau(cls, tau: float) -> "TorusImmersion":
        return cls(solve_params(tau))

    @property
    def tau(self) -> float:
        return self.params.tau

    @cached_property
    def p_hat(self) -> float:
        return self.params.p_hat

    @cached_property
    def _psi2_scale(self) -> tuple[float, float]:
        p = self.params
        # y = y_max (1 - alpha^2 sn^2(r t)) with alpha^2 = (y_max - y_min) / y_max
        alpha = math.sqrt((p.y_max - p.y_min) / p.y_max)
        return 2.0 * p.tau / (p.r * p.y_max), alpha

    def psi2(self, t) -> np.ndarray:
        p = self.params
        t = np.asarray(t, dtype=float)
        if p.is_sphere:
            return np.zeros(t.shape)
        if p.is_flat:
            return -3.0 * p.tau * t
        c, alpha = self._psi2_scale
        return -c * third_kind_Lambda(p.r * t, alpha, p.modulus)

    def phases(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(psi1, psi2); psi1 + 2 psi2 is read off the constraint 2 tau = y sqrt(1-y) cos(psi1 + 2 psi2)."""
        t = np.asarray(t, dtype=float)
        psi2 = self.psi2(t)
        _, ydot = conformal_factor_with_derivative(self.params, t)
        theta = np.arctan2(-0.5 * ydot, 2.0 * self.params.tau)
        return theta - 2.0 * psi2, psi2

    def w(self, t) -> tuple[np.ndarray, np.ndarray]:
        p = self.params
        t = np.asarray(t, dtype=float)
        y, ydot = conformal_factor_with_derivative(p, t)
        rot = np.exp(1j * self.psi2(t))
        # sqrt(1-y) e^{i(psi1 + 2 psi2)} = (2 tau - i y'/2) / y, free of square-root sign issues
        w1 = (-0.5 * ydot - 2j * p.tau) / y * np.conj(rot) ** 2
        w2 = np.sqrt(y) * rot
        return w1, w2

    def __call__(self, s, t) -> LegendrianJet:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        w1, w2 = self.w(t)
        dw1 = np.conj(w2) ** 2
        dw2 = -np.conj(w1 * w2)
        c, sn = np.cos(s), np.sin(s)
        zero = np.zeros(s.shape, dtype=complex)
        X = np.stack([w1, w2 * c, -w2 * sn], axis=-1)
        Xs = np.stack([zero, -w2 * sn, -w2 * c], axis=-1)
        Xt = np.stack([dw1, dw2 * c, -dw2 * sn], axis=-1)
        return LegendrianJet(X, Xs, Xt)

    def grid(self, ns: int, nt: int, t_range=None) -> tuple[np.ndarray, np.ndarray, LegendrianJet]:
        """Sample on s in [0, 2 pi) and a uniform t grid (default one closed torus for the given period)."""
        t0, t1 = t_range if t_range is not None else (0.0, 2.0 * self.params.p_tau)
        s = np.linspace(0.0, 2 * np.pi, ns, endpoint=False)
        t = np.linspace(t0, t1, nt, endpoint=False)
        S, T = np.meshgrid(s, t, indexing="ij")
        return S, T, self(S, T)


def immerse(ti: TorusImmersion, s, t) -> LegendrianJet:
    return ti(s, t)


def gauss_curvature(p: TauParams, t) -> np.ndarray:
    """1 - 8 tau^2 / y^3."""
    y = conformal_factor(p, t)
    return 1.0 - 8.0 * p.tau**2 / y**3


def gauss_curvature_fd(p: TauParams, t, h: float = 1e-2) -> np.ndarray:
    """-(1/2y) (log y)'' with a five-point second difference."""
    t = np.asarray(t, dtype=float)
    ly = [np.log(conformal_factor(p, t + k * h)) for k in (-2, -1, 0, 1, 2)]
    d2 = (-ly[0] + 16 * ly[1] - 30 * ly[2] + 16 * ly[3] - ly[4]) / (12 * h * h)
    return -0.5 * d2 / np.exp(ly[2])


# ---------------------------------------------------------------------------
# rotation period and closing


def rotation_period_heuman(p: TauParams) -> float:
    """pi Lambda_0(phi, k) with sin^2 phi = y_- / (y_- - y_min)."""
    if p.is_sphere:
        return math.pi / 2
    if p.is_flat:
        return math.pi / math.sqrt(3.0)
    phi = math.asin(math.sqrt(p.y_minus / (p.y_minus - p.y_min)))
    return float(math.pi * heuman_lambda0(phi, p.modulus))


def rotation_period_phase(p: TauParams) -> float:
    """-psi2(2 p_tau) from the third-kind integral of 2 tau / y."""
    if p.is_sphere:
        return math.pi / 2
    return float(-TorusImmersion(p).psi2(2.0 * p.p_tau))


def rotation_period(p: TauParams, tol: float = 1e-6) -> float:
    a, b = rotation_period_heuman(p), rotation_period_phase(p)
    if abs(a - b) > tol:
        raise ConsistencyError(f"rotation period: Heuman {a!r} vs phase {b!r}")
    return a


def rotation_period_derivative(tau: float, rel_step: float = 1e-4) -> float:
    h = tau * rel_step
    return (rotation_period_heuman(solve_params(tau + h)) - rotation_period_heuman(solve_params(tau - h))) / (2 * h)


def rotation_period_report(taus) -> list[dict]:
    rows = []
    for tau in taus:
        p = solve_params(tau)
        heu, ph = rotation_period_heuman(p), rotation_period_phase(p)
        d = rotation_period_derivative(tau)
        rows.append({
            "tau": float(tau),
            "p_hat_heuman": heu,
            "p_hat_phase": ph,
            "abs_diff": abs(heu - ph),
            "p_hat_minus_limit_plus_tau_log_tau": heu - math.pi / 2 + tau * math.log(tau),
            "scaled_remainder": (heu - math.pi / 2 + tau * math.log(tau)) / tau,
            "dp_hat_dtau": d,
            "dp_hat_over_minus_log_tau": d / -math.log(tau),
        })
    return rows


def closing_target(m_bar: int) -> float:
    m = 4 * m_bar - 1
    return 0.5 * math.pi * (1.0 + 1.0 / m)


def tau_for_rotation_period(target: float, bracket=(1e-8, 0.2), max_iter: int = 200,
                            tol: float = 1e-13) -> TauParams:
    """Invert p_hat by bisection (p_hat increases with tau)."""
    lo, hi = bracket[0], min(bracket[1], TAU_MAX)
    f_lo = rotation_period_heuman(solve_params(lo)) - target
    f_hi = rotation_period_heuman(solve_params(hi)) - target
    if f_lo * f_hi > 0:
        raise SolverError(f"rotation period {target!r} not attained on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = rotation_period_heuman(solve_params(mid)) - target
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo < 1e-17 or abs(f_mid) < tol:
            break
    return solve_params(0.5 * (lo + hi))


def closing_tau(m_bar: int, bracket=(1e-8, 0.2), max_iter: int = 200, tol: float = 1e-13) -> TauParams:
    """tau with p_hat = (pi/2)(1 + 1/m), m = 4 m_bar - 1."""
    if int(m_bar) != m_bar or m_bar < 2:
        raise ParameterDomainError("m_bar must be an integer >= 2")
    return tau_for_rotation_period(closing_target(m_bar), bracket, max_iter, tol)


def period_lattice_member(p: TauParams, k1: int, k2: int, tol: float = 1e-9) -> bool:
    """Whether (k1 pi, 2 k2 p_tau) is a period of X_tau."""
    if k2 == 0:
        return k1 % 2 == 0
    q = k2 * p.p_hat / math.pi
    if k1 % 2 == 0:
        return abs(q / 2 - round(q / 2)) < tol
    return abs(q - round(q)) < tol and round(q) % 2 == 1


def period_residual(ti, ds: float, dt: float, ns: int = 64, nt: int = 256, t_range=None) -> float:
    """sup |X(s + ds, t + dt) - X(s, t)| on a grid."""
    t0, t1 = t_range if t_range is not None else (0.0, 2.0 * ti.params.p_tau)
    s = np.linspace(0.0, 2 * np.pi, ns, endpoint=False)
    t = np.linspace(t0, t1, nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    return float(np.max(np.abs(ti(S + ds, T + dt).X - ti(S, T).X)))


# ---------------------------------------------------------------------------
# twisted and reparametrized immersions


class TwistedImmersion:
    """X_{tau, alpha}: X_tau joined on t in [1, 2] to Q_alpha X_tau, extended by the
    t-reflection and periodically by the translating-twisting map."""

    JOIN_WINDOW = (1.0, 2.0)

    def __init__(self, base: TorusImmersion, alpha: float, join_window: tuple[float, float] | None = None):
        self.base = base
        self.alpha = float(alpha)
        self.p_tau = base.params.p_tau
        self.join_window = tuple(join_window) if join_window is not None else self.JOIN_WINDOW
        if not 0.0 < self.join_window[0] < self.join_window[1] < self.p_tau:
            raise ParameterDomainError("half-period too short for the join window")
        self.period_map: AmbientIsometry = translating_twist(base.p_hat, self.alpha)
        if self.alpha == 0.0:
            self._joined = base
        else:
            from .glue import legendrian_join
            self._joined = legendrian_join(base, _Composed(twist(self.alpha), base), *self.join_window)

    @classmethod
    def from_tau(cls, tau: float, alpha: float, join_window=None) -> "TwistedImmersion":
        return cls(TorusImmersion.from_tau(tau), alpha, join_window)

    def _fundamental(self, s, t) -> LegendrianJet:
        """Values on |t| <= p_tau."""
        neg = t < 0
        jet = self._joined(s, np.abs(t))
        if np.any(neg):
            Tb = reflection_t()
            X, Xs, Xt = jet.X.copy(), jet.Xs.copy(), jet.Xt.copy()
            X[neg], Xs[neg], Xt[neg] = Tb(X[neg]), Tb(Xs[neg]), -Tb(Xt[neg])
            jet = LegendrianJet(X, Xs, Xt)
        return jet

    def __call__(self, s, t) -> LegendrianJet:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        j = np.round(t / (2 * self.p_tau))
        jet = self._fundamental(s, t - 2 * self.p_tau * j)
        ph = self.base.p_hat
        diag = np.stack([np.exp(2j * j * ph), np.exp(1j * j * (2 * self.alpha - ph)),
                         np.exp(-1j * j * (2 * self.alpha + ph))], axis=-1)
        return LegendrianJet(diag * jet.X, diag * jet.Xs, diag * jet.Xt)


class ReparametrizedImmersion:
    """X_{tau, alpha}(s, (p_tau / p_bar) t), period matched to the closing half-period p_bar."""

    def __init__(self, twisted: TwistedImmersion, p_bar: float):
        self.twisted = twisted
        self.p_bar = float(p_bar)
        self.scale = twisted.p_tau / self.p_bar
        self.period_map = twisted.period_map

    def __call__(self, s, t) -> LegendrianJet:
        jet = self.twisted(s, self.scale * np.asarray(t, dtype=float))
        return LegendrianJet(jet.X, jet.Xs, self.scale * jet.Xt)


def twisted_immerse(tw: TwistedImmersion, s, t) -> LegendrianJet:
    return tw(s, t)


def reparametrized_immerse(tau: float, alpha: float, p_bar: float, s, t) -> LegendrianJet:
    return ReparametrizedImmersion(TwistedImmersion.from_tau(tau, alpha), p_bar)(s, t)


class _Composed:
    """iso o X for an ambient isometry and an immersion."""

    def __init__(self, iso: AmbientIsometry, inner):
        self.iso, self.inner = iso, inner

    def __call__(self, s, t) -> LegendrianJet:
        return self.iso.jet(self.inner(s, t))


def compose(iso: AmbientIsometry, immersion):
    return _Composed(iso, immersion)
