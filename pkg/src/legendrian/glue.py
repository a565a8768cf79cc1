"""Legendrian interpolation, the genus-g model surface and its initial immersion.

The join of two Legendrian immersions near the real equatorial sphere works on
the Lagrangian cones: each cone is the graph of d f_i over the real 3-plane,
f_i is homogeneous of degree 2, so f_i(q) = <q, grad f_i(q)> / 2, and blending
the potentials keeps the graph Lagrangian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .immersion import (
    LegendrianJet,
    ReparametrizedImmersion,
    TorusImmersion,
    TwistedImmersion,
    closing_tau,
    compose,
    lagrangian_angle,
)
from .profile import ParameterDomainError, TauParams, conformal_factor, solve_params
from .symmetry import (
    AmbientIsometry,
    half_turn,
    polygon_rotation,
    reflection_s,
    reflection_t,
    translation,
    twist,
)


class GeometricError(RuntimeError):
    """A join or mesh construction whose geometric hypotheses fail."""


class UnsupportedGenusError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cut-off functions


def smoothstep(x, order: int = 0) -> np.ndarray:
    """Degree-7 step: 0 on (-inf, -1], 1 on [1, inf), and Psi - 1/2 odd."""
    x = np.asarray(x, dtype=float)
    c = np.clip(x, -1.0, 1.0)
    inside = np.abs(x) < 1.0
    if order == 0:
        return 0.5 + (35 * c - 35 * c**3 + 21 * c**5 - 5 * c**7) / 32.0
    if order == 1:
        return np.where(inside, 35.0 / 32.0 * (1 - c * c) ** 3, 0.0)
    if order == 2:
        return np.where(inside, -210.0 / 32.0 * c * (1 - c * c) ** 2, 0.0)
    if order == 3:
        return np.where(inside, -210.0 / 32.0 * (1 - c * c) * (1 - 5 * c * c), 0.0)
    raise ValueError("derivatives up to order 3 only")


@dataclass(frozen=True)
class CutoffSpec:
    """psi[a, b]: 0 near a, 1 near b, with the transition on the middle third of [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("cut-off needs a != b")

    def __call__(self, x, order: int = 0) -> np.ndarray:
        scale = 6.0 / (self.b - self.a)
        u = -3.0 + scale * (np.asarray(x, dtype=float) - self.a)
        return smoothstep(u, order) * scale**order

    def swapped(self) -> "CutoffSpec":
        return CutoffSpec(self.b, self.a)


def cutoff(spec: CutoffSpec, x) -> np.ndarray:
    return spec(x)


# ---------------------------------------------------------------------------
# the join


def _invert_real_projection(X, q, s0, t0, tol=1e-13, max_iter=40):
    """Solve r Re X(s, t) = q for (s, t, r) by Newton's method from (s0, t0)."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _newton_real_projection(X, q, s0, t0, tol, max_iter)


def _newton_real_projection(X, q, s0, t0, tol, max_iter):
    s, t = s0.copy(), t0.copy()
    jet = X(s, t)
    r = np.linalg.norm(q, axis=-1) / np.linalg.norm(jet.X.real, axis=-1)
    for _ in range(max_iter):
        A = jet.X.real
        R = r[:, None] * A - q
        J = np.stack([r[:, None] * jet.Xs.real, r[:, None] * jet.Xt.real, A], axis=-1)
        try:
            d = np.linalg.solve(J, R[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise GeometricError("real projection degenerate inside the join window") from exc
        if not np.all(np.isfinite(d)):
            raise GeometricError("real projection degenerate inside the join window")
        s, t, r = s - d[:, 0], t - d[:, 1], r - d[:, 2]
        jet = X(s, t)
        if np.max(np.abs(r[:, None] * jet.X.real - q)) < tol:
            break
    res = np.abs(r[:, None] * jet.X.real - q).max(axis=-1)
    if not np.all(res <= 1e3 * tol):
        bad = int(np.argmax(res))
        raise GeometricError(f"real projection not invertible near (s, t) = ({s0[bad]:.4f}, {t0[bad]:.4f})")
    return s, t, r, jet


def _param_jacobian(jet: LegendrianJet, r):
    """Columns d/ds, d/dt, d/dr of r Re X, and the same for r Im X."""
    re = np.stack([r[:, None] * jet.Xs.real, r[:, None] * jet.Xt.real, jet.X.real], axis=-1)
    im = np.stack([r[:, None] * jet.Xs.imag, r[:, None] * jet.Xt.imag, jet.X.imag], axis=-1)
    return re, im


class LegendrianJoin:
    """X0 on t <= a1', X1 on t >= a2', and the potential blend in between,
    where (a1', a2') is the middle third of (a1, a2)."""

    def __init__(self, X0, X1, a1: float, a2: float, frame: AmbientIsometry | None = None,
                 fd_step: float = 1e-3):
        if not a1 < a2:
            raise ValueError("join window must have a1 < a2")
        self.a1, self.a2 = float(a1), float(a2)
        third = (a2 - a1) / 3.0
        self.a1p, self.a2p = a1 + third, a2 - third
        self.cut = CutoffSpec(self.a1p, self.a2p)
        self.frame = frame
        if frame is not None:
            X0, X1 = compose(frame.inverse(), X0), compose(frame.inverse(), X1)
        self.X0, self.X1 = X0, X1
        self.h = fd_step

    def __call__(self, s, t) -> LegendrianJet:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        shape = s.shape
        s, t = s.ravel(), t.ravel()
        X = np.empty((s.size, 3), complex)
        Xs, Xt = np.empty_like(X), np.empty_like(X)
        for mask, fn in ((t <= self.a1p, self.X0), (t >= self.a2p, self.X1),
                         ((t > self.a1p) & (t < self.a2p), self._blend)):
            if np.any(mask):
                j = fn(s[mask], t[mask])
                X[mask], Xs[mask], Xt[mask] = j.X, j.Xs, j.Xt
        jet = LegendrianJet(X.reshape(shape + (3,)), Xs.reshape(shape + (3,)), Xt.reshape(shape + (3,)))
        return self.frame.jet(jet) if self.frame is not None else jet

    def _grad_t0_param(self, s, t):
        """Row d t / d q of the inverse of [Re X0_s, Re X0_t, Re X0] at r = 1."""
        j = self.X0(s, t)
        B = np.stack([j.Xs.real, j.Xt.real, j.X.real], axis=-1)
        return np.linalg.inv(B)[:, 1, :]

    def potentials(self, q, s_guess, t_guess):
        """(f_i, grad f_i, Hess f_i, inverse data) for i = 0, 1 at the points q of the real 3-plane."""
        out = []
        for X in (self.X0, self.X1):
            si, ti, ri, jet = _invert_real_projection(X, q, s_guess, t_guess)
            if np.any(np.abs(ti - t_guess) > (self.a2 - self.a1)):
                raise GeometricError("projected parameters leave the join window (convex-hull condition)")
            Jre, Jim = _param_jacobian(jet, ri)
            Jinv = np.linalg.inv(Jre)
            G = ri[:, None] * jet.X.imag
            H = Jim @ Jinv
            f = 0.5 * np.sum(q * G, axis=-1)
            out.append((f, G, H, (si, ti, ri, Jinv)))
        return out

    def _blend(self, s, t) -> LegendrianJet:
        j0, j1 = self.X0(s, t), self.X1(s, t)
        w = self.cut(t)[:, None]
        dw = self.cut(t, 1)[:, None]
        A0, A1 = j0.X.real, j1.X.real
        q = (1 - w) * A0 + w * A1
        q_s = (1 - w) * j0.Xs.real + w * j1.Xs.real
        q_t = (1 - w) * j0.Xt.real + w * j1.Xt.real + dw * (A1 - A0)

        (f0, G0, H0, inv0), (f1, G1, H1, _) = self.potentials(q, s, t)
        s0, t0, r0, J0inv = inv0
        # psi as a function on the plane is psi[a1', a2'] of the X0-parameter t
        c0, c1, c2 = self.cut(t0), self.cut(t0, 1), self.cut(t0, 2)
        hvec = self._grad_t0_param(s0, t0)
        grad_t0 = hvec / r0[:, None]
        h = self.h
        dh_s = (8 * (self._grad_t0_param(s0 + h, t0) - self._grad_t0_param(s0 - h, t0))
                - (self._grad_t0_param(s0 + 2 * h, t0) - self._grad_t0_param(s0 - 2 * h, t0))) / (12 * h)
        dh_t = (8 * (self._grad_t0_param(s0, t0 + h) - self._grad_t0_param(s0, t0 - h))
                - (self._grad_t0_param(s0, t0 + 2 * h) - self._grad_t0_param(s0, t0 - 2 * h))) / (12 * h)
        D_grad_t0 = np.stack([dh_s / r0[:, None], dh_t / r0[:, None], -hvec / r0[:, None] ** 2], axis=-1) @ J0inv
        grad_psi = c1[:, None] * grad_t0
        hess_psi = c2[:, None, None] * grad_t0[:, :, None] * grad_t0[:, None, :] + c1[:, None, None] * D_grad_t0

        dG = G1 - G0
        df = (f1 - f0)
        G = (1 - c0)[:, None] * G0 + c0[:, None] * G1 + df[:, None] * grad_psi
        DG = ((1 - c0)[:, None, None] * H0 + c0[:, None, None] * H1
              + dG[:, :, None] * grad_psi[:, None, :] + grad_psi[:, :, None] * dG[:, None, :]
              + df[:, None, None] * hess_psi)
        Y = q + 1j * G
        Ys = q_s + 1j * np.einsum("nij,nj->ni", DG, q_s)
        Yt = q_t + 1j * np.einsum("nij,nj->ni", DG, q_t)
        nY = np.linalg.norm(Y, axis=-1)[:, None]
        X = Y / nY
        Xs = Ys / nY - Y * np.real(np.sum(np.conj(Y) * Ys, axis=-1))[:, None] / nY**3
        Xt = Yt / nY - Y * np.real(np.sum(np.conj(Y) * Yt, axis=-1))[:, None] / nY**3
        return LegendrianJet(X, Xs, Xt)


def legendrian_join(X0, X1, a1: float, a2: float, frame: AmbientIsometry | None = None) -> LegendrianJoin:
    return LegendrianJoin(X0, X1, a1, a2, frame)


def sphere_inclusion() -> TorusImmersion:
    """X_0(s, t) = (tanh t, sech t cos s, -sech t sin s): the equatorial sphere minus the poles."""
    return TorusImmersion(solve_params(0.0))


# ---------------------------------------------------------------------------
# the model surface


def hole_radius(t: float) -> float:
    """Spherical radius of the circle X_0(., t) about e1."""
    return math.asin(1.0 / math.cosh(t))


def _radius_to_t(radius: float) -> float:
    return math.acosh(1.0 / math.sin(radius))


@dataclass(frozen=True)
class SurfaceModel:
    """Genus, closing data and the t-layout of the cylinders M_1 ... M_g.

    Every cylinder is S^1 x [a, 2 m p_bar - a]; its end circles are glued to the
    boundary circles X_0(., a) of M_0 = S^2 minus 2g discs. ``collar`` is the
    width of the band [a, a + collar] where the metric cut-off switches.
    """

    genus: int
    m_bar: int
    a: float
    collar: float
    dislocation_window: tuple[float, float]
    gluing_window: tuple[float, float]
    b: float
    twist_window: tuple[float, float] = (0.4, 1.0)
    c_range: float = 1.0
    closing: TauParams = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.genus < 3 or self.genus % 2 == 0:
            raise UnsupportedGenusError(
                f"genus {self.genus}: the symmetric construction needs odd g >= 3 "
                "(the opposite discs must be exchanged by the half turn)")
        if self.closing is None:
            object.__setattr__(self, "closing", closing_tau(self.m_bar))
        self.validate()

    # derived data
    @property
    def m(self) -> int:
        return 4 * self.m_bar - 1

    @property
    def tau_bar(self) -> float:
        return self.closing.tau

    @property
    def p_bar(self) -> float:
        return self.closing.p_tau

    @property
    def t_end(self) -> float:
        return 2 * self.m * self.p_bar - self.a

    @property
    def t_mid(self) -> float:
        return self.m * self.p_bar

    @property
    def switch(self) -> float:
        """Where the chain passes from the dislocation join to the gluing join."""
        d0, d1 = self.dislocation_window
        g0, g1 = self.gluing_window
        return 0.5 * ((d1 - (d1 - d0) / 3) + (g0 + (g1 - g0) / 3))

    def validate(self):
        d0, d1 = self.dislocation_window
        g0, g1 = self.gluing_window
        if not hole_radius(self.a) < math.pi / (2 * self.genus):
            raise GeometricError(f"a={self.a}: the 2g discs of M_0 overlap")
        if not (self.a <= d0 < d1 and g0 < g1 and self.a + self.collar <= g1):
            raise GeometricError("windows out of order")
        if not d1 - (d1 - d0) / 3 <= g0 + (g1 - g0) / 3 or g0 < d0:
            raise GeometricError("dislocation and gluing windows overlap beyond their flat thirds")
        if not g1 <= self.b < self.p_bar:
            raise GeometricError(
                f"layout does not fit: need gluing end {g1:.3f} <= b={self.b:.3f} < p_bar={self.p_bar:.3f}")
        if not self.twist_window[1] < self.b:
            raise GeometricError("twist window must lie inside the spherical regions")

    @classmethod
    def desk(cls, genus: int, m_bar: int, hole_fraction: float = 0.97, collar: float = 0.1,
             dislocation_width: float = 0.15, gluing_width: float = 0.55, neck_margin: float = 0.06,
             min_gluing_width: float = 0.25) -> "SurfaceModel":
        """Layout compressed to fit p_bar at small m_bar: holes as large as the polygon allows."""
        if genus < 3 or genus % 2 == 0:
            raise UnsupportedGenusError(f"genus {genus}: only odd g >= 3 is supported")
        closing = closing_tau(m_bar)
        a = _radius_to_t(hole_fraction * math.pi / (2 * genus))
        d = (a, a + dislocation_width)
        g0 = d[1] - dislocation_width / 3
        g1 = min(g0 + gluing_width, closing.p_tau - neck_margin)
        if g1 - g0 < min_gluing_width:
            raise GeometricError(
                f"g={genus}, m_bar={m_bar}: p_bar={closing.p_tau:.3f} leaves no room for the gluing window")
        return cls(genus, m_bar, a, collar, d, (g0, g1), g1, closing=closing)

    @classmethod
    def asymptotic(cls, genus: int, m_bar: int) -> "SurfaceModel":
        """Constants delta = pi/(100 g), sech(a+1) = sin(delta), unit windows, b = a + 6."""
        delta = math.pi / (100 * genus)
        a = _radius_to_t(delta) - 1.0
        return cls(genus, m_bar, a, 1.0, (a + 1, a + 2), (a + 2, a + 3), a + 6, (1.0, 2.0))

    # region bookkeeping on M_1 (t in [a, 2 m p_bar - a])
    def fold(self, t):
        """Distance-type coordinate: t on the first half, its T-reflection on the second."""
        t = np.asarray(t, dtype=float)
        return np.minimum(t, 2 * self.m * self.p_bar - t)

    def region_of(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(kind, index): kind 0 for S[n], 1 for Lambda[n''] (index n or n'')."""
        u = self.fold(t)
        n = np.floor(u / (2 * self.p_bar) + 0.5)
        in_sphere = np.abs(u - 2 * n * self.p_bar) <= self.b + 1e-12
        neck = np.floor((u - self.b) / (2 * self.p_bar)) + 1
        kind = np.where(in_sphere, 0, 1)
        return kind, np.where(in_sphere, n, neck).astype(int)

    def twist_windows(self, p_tau: float) -> list[tuple[float, float]]:
        """Windows (in the folded t) where the twisting joins of the periodic part sit."""
        lo, hi = (w * self.p_bar / p_tau for w in self.twist_window)
        out = []
        for n in range(1, 2 * self.m_bar):
            c = 2 * n * self.p_bar
            out += [(c - hi, c - lo), (c + lo, c + hi)]
        return out

    def breakpoints(self) -> list[float]:
        """Region boundary circles on the half cylinder [a, m p_bar], plus its ends."""
        pts = {self.a, self.t_mid}
        for n in range(0, 2 * self.m_bar + 1):
            for c in (2 * n * self.p_bar - self.b, 2 * n * self.p_bar + self.b):
                if self.a < c < self.t_mid:
                    pts.add(c)
        out = []
        for p in sorted(p for p in pts if self.a <= p <= self.t_mid):
            if not out or p - out[-1] > 1e-9:
                out.append(p)
        out[-1] = self.t_mid
        return out


@dataclass(frozen=True)
class ZetaParams:
    zeta1: float
    zeta2: float
    c1p: float
    c2p: float
    zeta1p: float
    zeta2p: float
    tau: float
    alpha: float


def normalization_constants(model: SurfaceModel) -> tuple[float, float]:
    """(c1', c2') with c1' f_t o Y = 1 and c2' f_q o Y = cos 2s on the circle t = 2 p_bar + b
    of the surface with zeta = 0."""
    from .perturb import f_q, f_t
    Xb = TorusImmersion(model.closing)
    s = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    X = Xb(s, np.full_like(s, 2 * model.p_bar + model.b)).X
    ft = f_t(X)
    fq = f_q(X)
    c1 = 1.0 / float(np.mean(ft))
    c2 = float(np.sum(fq * np.cos(2 * s)) / np.sum(np.cos(2 * s) ** 2))
    return c1, 1.0 / c2


def zeta_params(model: SurfaceModel, zeta1: float = 0.0, zeta2: float = 0.0,
                c1p: float | None = None, c2p: float | None = None, strict: bool = True) -> ZetaParams:
    """tau and alpha from m (p_hat(tau_bar) - p_hat(tau)) = c1' zeta1 and (1 - m) alpha = c2' zeta2."""
    from .immersion import tau_for_rotation_period
    if strict and max(abs(zeta1), abs(zeta2)) > model.c_range * model.tau_bar:
        raise ParameterDomainError(f"|zeta| must not exceed {model.c_range} * tau_bar = {model.c_range * model.tau_bar:.4g}")
    if c1p is None or c2p is None:
        n1, n2 = normalization_constants(model)
        c1p = n1 if c1p is None else c1p
        c2p = n2 if c2p is None else c2p
    z1p, z2p = c1p * zeta1, c2p * zeta2
    if z1p == 0.0:
        tau = model.tau_bar
    else:
        target = model.closing.p_hat - z1p / model.m
        tau = tau_for_rotation_period(target).tau
    return ZetaParams(float(zeta1), float(zeta2), float(c1p), float(c2p), float(z1p), float(z2p),
                      float(tau), float(z2p / (1 - model.m)))


# ---------------------------------------------------------------------------
# the initial immersion


class GluedSurface:
    """Y_zeta on M: the inclusion on M_0 and R^{j-1} of the cylinder map on M_j.

    The cylinder map is the dislocation join from X_0 to T_{zeta1'} Q_{zeta2'} X_0,
    then that isometry applied to the gluing join from X_0 to Q_{-alpha} of the
    reparametrized twisted torus, extended past t = m p_bar by the t-reflection.
    """

    def __init__(self, model: SurfaceModel, zeta: ZetaParams):
        self.model = model
        self.zeta = zeta
        p_bar = model.p_bar
        base = TorusImmersion.from_tau(zeta.tau)
        if not model.twist_window[1] * p_bar / base.params.p_tau < model.b:
            raise GeometricError("twist window leaves the spherical region for this tau")
        self.twisted = TwistedImmersion(base, zeta.alpha, model.twist_window)
        self.periodic = ReparametrizedImmersion(self.twisted, p_bar)
        X0 = sphere_inclusion()
        self.X0 = X0
        self.dislocation_map = translation(zeta.zeta1p) @ twist(zeta.zeta2p)
        if zeta.zeta1p == 0.0 and zeta.zeta2p == 0.0:
            self.dislocation = X0
        else:
            self.dislocation = legendrian_join(X0, compose(self.dislocation_map, X0), *model.dislocation_window)
        self.gluing = legendrian_join(X0, compose(twist(-zeta.alpha), self.periodic), *model.gluing_window)
        self.R = polygon_rotation(model.genus)
        self._R_powers = [self.R.power(j) for j in range(model.genus)]

    # cylinder maps -------------------------------------------------------
    def half_cylinder(self, s, t) -> LegendrianJet:
        """X~ on t <= m p_bar (also evaluates a bit beyond, where it is still defined)."""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        shape = s.shape
        s, t = s.ravel(), t.ravel()
        X = np.empty((s.size, 3), complex)
        Xs, Xt = np.empty_like(X), np.empty_like(X)
        left = t <= self.model.switch
        if np.any(left):
            j = self.dislocation(s[left], t[left])
            X[left], Xs[left], Xt[left] = j.X, j.Xs, j.Xt
        if np.any(~left):
            j = self.dislocation_map.jet(self.gluing(s[~left], t[~left]))
            X[~left], Xs[~left], Xt[~left] = j.X, j.Xs, j.Xt
        return LegendrianJet(X.reshape(shape + (3,)), Xs.reshape(shape + (3,)), Xt.reshape(shape + (3,)))

    def cylinder(self, s, t) -> LegendrianJet:
        """The map on M_1, extended from the first half by Y(s, t) = T~ Y(s, 2 m p_bar - t)."""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        far = t > self.model.t_mid
        tt = np.where(far, 2 * self.model.t_mid - t, t)
        jet = self.half_cylinder(s, tt)
        if np.any(far):
            Tb = reflection_t()
            X, Xs, Xt = jet.X.copy(), jet.Xs.copy(), jet.Xt.copy()
            X[far], Xs[far], Xt[far] = Tb(X[far]), Tb(Xs[far]), -Tb(Xt[far])
            jet = LegendrianJet(X, Xs, Xt)
        return jet

    def chart(self, j: int, s, t) -> LegendrianJet:
        """Y on M_j (j = 1 .. g) in the coordinates (s, t)."""
        return self._R_powers[(j - 1) % self.model.genus].jet(self.cylinder(s, t))

    def sphere(self, x) -> LegendrianJet:
        """Y on M_0: the inclusion, with a positively oriented orthonormal tangent frame."""
        x = np.asarray(x, dtype=float)
        ref = np.where(np.abs(x[..., 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        u = np.cross(ref, x)
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        v = np.cross(x, u)
        # det[x, u, v] = x . (u x v) = 1, matching det[X_0, X_0t, X_0s] > 0
        return LegendrianJet(x.astype(complex), v.astype(complex), u.astype(complex))

    # metrics ---------------------------------------------------------------
    def rho(self, t) -> np.ndarray:
        """rho_zeta on the cylinder: blends 1 near the sphere into sqrt(y_tau(t p_tau / p_bar))."""
        m = self.model
        u = m.fold(t)
        w = CutoffSpec(m.a + m.collar, m.a)(u)
        y = conformal_factor(self.twisted.base.params, np.asarray(t) * self.periodic.scale)
        return w + (1 - w) * np.sqrt(y)

    def metric(self, j: int, s, t, kind: str = "g"):
        """(g_ss, g_st, g_tt) of g = Y^* g_{S^5} or chi = rho^{-2} g on M_j."""
        gss, gst, gtt = self.chart(j, s, t).metric()
        if kind == "g":
            return gss, gst, gtt
        if kind == "chi":
            r2 = self.rho(t) ** 2
            return gss / r2, gst / r2, gtt / r2
        raise ValueError("metric kind is 'g' or 'chi'")


def build_initial_surface(m_bar: int = 3, genus: int = 3, zeta: tuple[float, float] | ZetaParams = (0.0, 0.0),
                          model: SurfaceModel | None = None) -> GluedSurface:
    if genus % 2 == 0:
        raise UnsupportedGenusError(
            f"genus {genus} is even: the construction pairs each disc with its antipode, which needs g odd")
    model = model or SurfaceModel.desk(genus, m_bar)
    if not isinstance(zeta, ZetaParams):
        zeta = zeta_params(model, *zeta)
    return GluedSurface(model, zeta)


# ---------------------------------------------------------------------------
# mesh


def _stereo(x):
    return x[..., :2] / (1.0 + x[..., 2:3])


def _unstereo(p):
    r2 = np.sum(p * p, axis=-1, keepdims=True)
    return np.concatenate([2 * p, 1 - r2], axis=-1) / (1 + r2)


def _arc(p, q, h):
    """Points on the great-circle arc from p to q (both included) with spacing about h."""
    ang = math.acos(max(-1.0, min(1.0, float(np.dot(p, q)))))
    n = max(1, int(math.ceil(ang / h)))
    w = np.linspace(0.0, 1.0, n + 1)
    pts = np.sin((1 - w)[:, None] * ang) * p + np.sin(w[:, None] * ang) * q
    return pts / math.sin(ang)


def _sphere_group(genus: int) -> list[np.ndarray]:
    """The 8g real orthogonal maps generated by R, T, S_pi and S (restricted to the real S^2)."""
    gens = [polygon_rotation(genus).matrix.real, np.diag([-1.0, 1, 1]), np.diag([1.0, -1, -1]),
            np.diag([1.0, 1, -1])]
    elems = [np.eye(3)]
    frontier = [np.eye(3)]
    while frontier:
        new = []
        for e in frontier:
            for gmat in gens:
                c = gmat @ e
                if not any(np.allclose(c, d, atol=1e-12) for d in elems):
                    elems.append(c)
                    new.append(c)
        frontier = new
    return elems


def holed_sphere_mesh(genus: int, a: float, n_s: int):
    """Triangulated S^2 minus the 2g discs beyond the circles X_0(., a) about the polygon points.

    Built on the fundamental domain {0 <= azimuth <= pi/(2g), x3 >= 0} and copied
    by the symmetry group, so the triangulation is exactly invariant.
    Returns (points (V, 3), faces (F, 3)) with outward orientation.
    """
    if n_s % 4:
        raise ValueError("n_s must be divisible by 4")
    phi0 = math.pi / (2 * genus)
    r = hole_radius(a)
    if r >= phi0:
        raise GeometricError("hole circles overlap")
    h = 2 * math.pi * math.sin(r) / n_s
    ks = np.arange(3 * n_s // 4, n_s + 1)
    sk = 2 * np.pi * ks / n_s
    hole = np.stack([np.full(sk.shape, math.tanh(a)), np.cos(sk) / math.cosh(a), -np.sin(sk) / math.cosh(a)], -1)
    hole[0] = [math.tanh(a), 0.0, 1 / math.cosh(a)]
    hole[-1] = [math.tanh(a), 1 / math.cosh(a), 0.0]
    return _symmetric_sphere_mesh(genus, h, hole, r)


def sphere_mesh(genus: int, h: float):
    """The whole S^2, triangulated invariantly under the same group with spacing about h."""
    e1 = np.array([[1.0, 0.0, 0.0]])
    return _symmetric_sphere_mesh(genus, h, e1, 0.0)


def _symmetric_sphere_mesh(genus: int, h: float, hole: np.ndarray, r: float):
    """Delaunay mesh of the fundamental domain with the arc ``hole`` (equator to meridian,
    a single point when r = 0) cut out, copied by the group and merged."""
    from scipy.spatial import Delaunay, cKDTree

    phi0 = math.pi / (2 * genus)
    north = np.array([0.0, 0.0, 1.0])
    corner = np.array([math.cos(phi0), math.sin(phi0), 0.0])
    m1 = _arc(hole[0], north, h)
    m2 = _arc(north, corner, h)
    eq = _arc(corner, hole[-1], h)
    # boundary loop: hole arc reversed runs equator -> meridian; keep counterclockwise in the plane
    loop = np.concatenate([hole[::-1][:-1], m1[:-1], m2[:-1], eq[:-1]]) if len(hole) > 1 else \
        np.concatenate([m1[:-1], m2[:-1], eq[:-1]])

    pts = [loop]
    n_rows = int(math.ceil((math.pi / 2) / h))
    for i in range(1, n_rows):
        gam = i * (math.pi / 2) / n_rows
        width = phi0 * math.sin(gam)
        n_az = int(math.floor(width / h))
        if n_az < 1:
            continue
        off = 0.5 * (i % 2)
        az = (np.arange(n_az) + 0.5 + off * 0.5) * phi0 / (n_az + 0.5 * (i % 2))
        row = np.stack([np.sin(gam) * np.cos(az), np.sin(gam) * np.sin(az), np.full(az.shape, math.cos(gam))], -1)
        pts.append(row)
    cand = np.concatenate(pts[1:]) if len(pts) > 1 else np.zeros((0, 3))
    # keep interior candidates away from the boundary
    az = np.arctan2(cand[:, 1], cand[:, 0])
    dist_hole = np.arccos(np.clip(cand[:, 0], -1, 1)) - r
    dist_m1 = np.abs(np.arcsin(np.clip(cand[:, 1], -1, 1)))
    nrm2 = np.array([-math.sin(phi0), math.cos(phi0), 0.0])
    dist_m2 = np.abs(np.arcsin(np.clip(cand @ nrm2, -1, 1)))
    dist_eq = np.arcsin(np.clip(cand[:, 2], -1, 1))
    keep = (dist_hole > (0.6 * h if r > 0 else -1.0)) & (dist_m1 > 0.5 * h) & (dist_m2 > 0.5 * h) & (dist_eq > 0.5 * h) & (az > 0)
    P = np.concatenate([loop, cand[keep]])
    nb = len(loop)

    plane = _stereo(P)
    tri = Delaunay(plane).simplices
    cen = _unstereo(plane[tri].mean(axis=1))
    cen /= np.linalg.norm(cen, axis=-1, keepdims=True)
    caz = np.arctan2(cen[:, 1], cen[:, 0])
    inside = (np.arccos(np.clip(cen[:, 0], -1, 1)) > r) & (caz > 0) & (caz < phi0) & (cen[:, 2] > 0)
    tri = tri[inside]
    # orient outward
    p0, p1, p2 = P[tri[:, 0]], P[tri[:, 1]], P[tri[:, 2]]
    flip = np.einsum("ij,ij->i", p0, np.cross(p1 - p0, p2 - p0)) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    edges = {tuple(sorted(e)) for f in tri for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0]))}
    for i in range(nb):
        if tuple(sorted((i, (i + 1) % nb))) not in edges:
            raise GeometricError("fundamental-domain triangulation does not conform to the boundary")

    all_pts, all_tri = [], []
    off = 0
    for gmat in _sphere_group(genus):
        Q = P @ gmat.T
        T = tri.copy()
        if np.linalg.det(gmat) < 0:
            T = T[:, [0, 2, 1]]
        all_pts.append(Q)
        all_tri.append(T + off)
        off += len(Q)
    Q = np.concatenate(all_pts)
    T = np.concatenate(all_tri)
    tree = cKDTree(Q)
    pairs = tree.query_pairs(1e-9 * max(1.0, h), output_type="ndarray")
    parent = np.arange(len(Q))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(Q))])
    uniq, inv = np.unique(roots, return_inverse=True)
    return Q[uniq], inv[T]


@dataclass
class SurfaceMesh:
    """Triangulated M with Y samples and tags.

    ``chart`` is 0 on M_0 and j on the interior rings of M_j; ``s``, ``t`` are the
    cylinder coordinates (nan on M_0). ``region_kind`` is 0 for S[n] and 1 for
    Lambda[n''], with ``region_index`` n or n''. ``generators`` maps R, T, S, S_pi
    to vertex permutations.
    """

    Y: np.ndarray
    faces: np.ndarray
    chart: np.ndarray
    s: np.ndarray
    t: np.ndarray
    region_kind: np.ndarray
    region_index: np.ndarray
    orbit: np.ndarray
    theta: np.ndarray
    contact_defect: np.ndarray
    generators: dict
    face_region: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.Y)

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return int(self.n_vertices - len(self.edges()) + len(self.faces))

    def check_manifold(self) -> None:
        """Every directed edge once, its reverse once: closed, oriented, no singular edges."""
        d = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        key = d[:, 0].astype(np.int64) * self.n_vertices + d[:, 1]
        rkey = d[:, 1].astype(np.int64) * self.n_vertices + d[:, 0]
        if len(np.unique(key)) != len(key):
            raise GeometricError("non-manifold or inconsistently oriented mesh (repeated directed edge)")
        if not np.all(np.isin(rkey, key)):
            raise GeometricError("mesh has boundary edges")

    def positions6(self) -> np.ndarray:
        return np.concatenate([self.Y.real, self.Y.imag], axis=1)

    def orbit_sizes(self) -> np.ndarray:
        return np.bincount(np.unique(self.orbit, return_inverse=True)[1])


def _t_grid(model: SurfaceModel, dt: float, min_per_segment: int = 4,
            fine: list[tuple[float, float]] = (), fine_per_window: int = 12) -> np.ndarray:
    """Rings on [a, 2 m p_bar - a], symmetric about m p_bar.

    Uniform within each segment between region circles (at least ``min_per_segment``
    intervals, so every neck keeps a fixed number of cross-sections), refined to
    ``fine_per_window`` intervals across each window in ``fine``.
    """
    bp = set(model.breakpoints())
    wins = [(max(lo, model.a), min(hi, model.t_mid)) for lo, hi in fine if hi > model.a and lo < model.t_mid]
    for lo, hi in wins:
        bp.update((lo, hi))
    bp = sorted(bp)
    half = [bp[0]]
    for lo, hi in zip(bp[:-1], bp[1:]):
        if hi - lo < 1e-9:
            continue
        step = dt
        for wlo, whi in wins:
            if wlo - 1e-12 <= lo and hi <= whi + 1e-12:
                step = min(dt, (whi - wlo) / fine_per_window)
        floor = min_per_segment if step == dt else 1
        n = max(floor, int(math.ceil((hi - lo) / step - 1e-9)))
        half.extend(np.linspace(lo, hi, n + 1)[1:])
    half = np.array(half)
    return np.concatenate([half, 2 * model.t_mid - half[::-1][1:]])


def transition_windows(surf: "GluedSurface") -> dict:
    """Blend regions (in the folded t) where the three parts of the Lagrangian angle live."""
    m = surf.model

    def blend(lo, hi):
        w = (hi - lo) / 3
        return (lo + w, hi - w)

    out = {"dislocation": [blend(*m.dislocation_window)] if surf.dislocation is not surf.X0 else [],
           "gluing": [blend(*m.gluing_window)],
           "twisting": []}
    if surf.zeta.alpha != 0.0:
        out["twisting"] = [blend(lo, hi) for lo, hi in m.twist_windows(surf.twisted.p_tau)]
    return out


def _union_orbits(n: int, perms) -> np.ndarray:
    parent = np.arange(n)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for p in perms:
        for i in range(n):
            a, b = find(i), find(int(p[i]))
            if a != b:
                parent[max(a, b)] = min(a, b)
    roots = np.array([find(i) for i in range(n)])
    return np.unique(roots, return_inverse=True)[1]


def build_mesh(surf: GluedSurface, n_s: int = 32, min_per_segment: int = 4,
               fine_per_window: int = 12) -> SurfaceMesh:
    from scipy.spatial import cKDTree

    model = surf.model
    g = model.genus
    if n_s % 4:
        raise ValueError("n_s must be divisible by 4")
    P, Fs = holed_sphere_mesh(g, model.a, n_s)
    fine = [w for ws in transition_windows(surf).values() for w in ws]
    tgrid = _t_grid(model, 2 * np.pi / n_s, min_per_segment, fine, fine_per_window)
    N = len(tgrid) - 1
    sgrid = 2 * np.pi * np.arange(n_s) / n_s
    n_sph = len(P)
    tree = cKDTree(P)

    def lookup(x):
        d, idx = tree.query(x)
        if np.max(d) > 1e-9:
            raise GeometricError("cylinder end ring does not match the holed sphere")
        return idx

    X0ring = np.stack([np.full(n_s, math.tanh(model.a)), np.cos(sgrid) / math.cosh(model.a),
                       -np.sin(sgrid) / math.cosh(model.a)], -1)
    Rm = surf.R.matrix.real
    Tb = np.diag([-1.0, 1.0, 1.0])
    n_int = (N - 1) * n_s
    ends = {}
    for j in range(1, g + 1):
        Rj = np.linalg.matrix_power(Rm, j - 1)
        ends[j] = (lookup(X0ring @ Rj.T), lookup(X0ring @ (Rj @ Tb).T))

    def vid(j, i, k):
        k = np.asarray(k) % n_s
        if i == 0:
            return ends[j][0][k]
        if i == N:
            return ends[j][1][k]
        return n_sph + (j - 1) * n_int + (i - 1) * n_s + k

    faces = [Fs]
    kk = np.arange(n_s)
    sig_k = np.where(kk % (n_s // 2) < n_s // 4, 1, -1)
    for j in range(1, g + 1):
        for i in range(N):
            sig = sig_k * (1 if i < N // 2 else -1)
            a_, b_ = vid(j, i, kk), vid(j, i + 1, kk)
            c_, d_ = vid(j, i + 1, kk + 1), vid(j, i, kk + 1)
            f1 = np.where(sig[:, None] > 0, np.stack([a_, b_, c_], 1), np.stack([a_, b_, d_], 1))
            f2 = np.where(sig[:, None] > 0, np.stack([a_, c_, d_], 1), np.stack([b_, c_, d_], 1))
            faces += [f1, f2]
    faces = np.concatenate(faces).astype(np.int64)

    nV = n_sph + g * n_int
    chart = np.zeros(nV, int)
    S = np.full(nV, np.nan)
    T = np.full(nV, np.nan)
    Y = np.zeros((nV, 3), complex)
    theta = np.zeros(nV)
    cdef = np.zeros(nV)
    sj = surf.sphere(P)
    Y[:n_sph] = sj.X
    theta[:n_sph] = lagrangian_angle(sj)
    cdef[:n_sph] = np.abs(sj.contact_defect())
    Sg, Tg = np.meshgrid(sgrid, tgrid[1:-1])
    cyl = surf.cylinder(Sg.ravel(), Tg.ravel())
    th_c = lagrangian_angle(cyl)
    cd_c = np.abs(cyl.contact_defect())
    for j in range(1, g + 1):
        sl = slice(n_sph + (j - 1) * n_int, n_sph + j * n_int)
        chart[sl] = j
        S[sl], T[sl] = Sg.ravel(), Tg.ravel()
        Y[sl] = surf._R_powers[j - 1](cyl.X)
        theta[sl] = th_c
        cd_c_j = cd_c
        cdef[sl] = cd_c_j

    kind = np.zeros(nV, int)
    index = np.zeros(nV, int)
    cm = chart > 0
    kind[cm], index[cm] = model.region_of(T[cm])
    tc = tgrid[:-1] + 0.5 * np.diff(tgrid)
    fk, fi = model.region_of(tc)
    face_region = np.full((len(faces), 2), (0, 0))
    nf_cyl = 2 * n_s
    for j in range(g):
        for i in range(N):
            base = len(Fs) + (j * N + i) * nf_cyl
            face_region[base:base + nf_cyl] = (fk[i], fi[i])

    # generator permutations
    gens = {}
    sph_maps = {"R": Rm, "T": Tb, "S": np.diag([1.0, 1, -1]), "S_pi": np.diag([1.0, -1, -1])}
    cyl_maps = {
        "R": lambda j, i, k: (j % g + 1, i, k),
        "T": lambda j, i, k: ((1 - j) % g + 1, N - i, k),
        "S": lambda j, i, k: (j, i, -k),
        "S_pi": lambda j, i, k: ((1 - j) % g + 1, i, k + n_s // 2),
    }
    for name in sph_maps:
        perm = np.empty(nV, np.int64)
        perm[:n_sph] = lookup(P @ sph_maps[name].T)
        for j in range(1, g + 1):
            for i in range(1, N):
                j2, i2, k2 = cyl_maps[name](j, i, kk)
                perm[vid(j, i, kk)] = vid(j2, i2, k2)
        if len(np.unique(perm)) != nV:
            raise GeometricError(f"generator {name} is not a permutation of the mesh")
        gens[name] = perm
    orbit = _union_orbits(nV, gens.values())
    m = SurfaceMesh(Y, faces, chart, S, T, kind, index, orbit, theta, cdef, gens, face_region)
    m.check_manifold()
    return m


AMBIENT_GENERATORS = {"R": None, "T": reflection_t, "S": reflection_s, "S_pi": half_turn}


def mesh_equivariance_defects(mesh: SurfaceMesh, genus: int) -> dict:
    """sup |g~(Y(p)) - Y(g p)| over the vertices for the four generators."""
    out = {}
    for name, perm in mesh.generators.items():
        amb = polygon_rotation(genus) if name == "R" else AMBIENT_GENERATORS[name]()
        out[name] = float(np.max(np.abs(amb(mesh.Y) - mesh.Y[perm])))
    return out


def triangle_quality(points: np.ndarray, faces: np.ndarray) -> float:
    """Smallest interior angle (radians) over the triangles."""
    p = points[faces]
    angs = []
    for i in range(3):
        u = p[:, (i + 1) % 3] - p[:, i]
        v = p[:, (i + 2) % 3] - p[:, i]
        c = np.sum(u * v, -1) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))
        angs.append(np.arccos(np.clip(c, -1, 1)))
    return float(np.min(angs))


# ---------------------------------------------------------------------------
# Lagrangian angle


@dataclass(frozen=True)
class AngleField:
    """theta on a grid of the half cylinder [a, m p_bar] of M_1.

    theta on the other charts follows from the symmetries (R and S preserve it,
    T reverses its sign) and theta = 0 on M_0.
    """

    s: np.ndarray
    t: np.ndarray
    theta: np.ndarray
    area: np.ndarray
    contact_defect: np.ndarray


def lagrangian_angle_field(surf: GluedSurface, n_s: int = 64, dt: float = 0.02,
                           fine_per_window: int = 60) -> AngleField:
    fine = [w for ws in transition_windows(surf).values() for w in ws]
    full = _t_grid(surf.model, dt, 2, fine, fine_per_window)
    t = full[full <= surf.model.t_mid + 1e-12]
    s = 2 * np.pi * np.arange(n_s) / n_s
    S, T = np.meshgrid(s, t, indexing="ij")
    jet = surf.cylinder(S, T)
    gss, gst, gtt = jet.metric()
    dA = np.sqrt(np.maximum(gss * gtt - gst**2, 0.0))
    wt = np.gradient(t)
    area = dA * (2 * np.pi / n_s) * wt[None, :]
    return AngleField(S, T, lagrangian_angle(jet), area, np.abs(jet.contact_defect()))


def _mask(t, windows):
    m = np.zeros(np.shape(t), bool)
    for lo, hi in windows:
        m |= (t >= lo) & (t <= hi)
    return m


def decompose(surf: GluedSurface, field: AngleField | None = None) -> dict:
    """theta split into the gluing, dislocation and twisting parts by their supports.

    Returns the three component arrays, the remainder outside all supports and
    the sup norms; the parts add up to theta exactly where the supports are disjoint.
    """
    field = field or lagrangian_angle_field(surf)
    wins = transition_windows(surf)
    out = {}
    covered = np.zeros(field.t.shape, bool)
    for name in ("gluing", "dislocation", "twisting"):
        m = _mask(field.t, wins[name])
        out[name] = np.where(m, field.theta, 0.0)
        covered |= m
    out["outside"] = np.where(covered, 0.0, field.theta)
    out["sup"] = {k: float(np.max(np.abs(out[k]))) for k in ("gluing", "dislocation", "twisting", "outside")}
    out["outside_mass"] = float(np.sum(np.abs(out["outside"]) * field.area))
    out["sum_defect"] = float(np.max(np.abs(out["gluing"] + out["dislocation"] + out["twisting"]
                                            + out["outside"] - field.theta)))
    return out


def theta_scaling_report(genus: int = 3, m_bars=(3, 4, 5), n_s: int = 32) -> list[dict]:
    """sup |theta_gluing| / tau_bar for zeta = 0 across m_bar."""
    rows = []
    for mb in m_bars:
        surf = build_initial_surface(mb, genus)
        d = decompose(surf, lagrangian_angle_field(surf, n_s=n_s))
        rows.append({"m_bar": mb, "tau_bar": surf.model.tau_bar, "theta_gluing_sup": d["sup"]["gluing"],
                     "ratio": d["sup"]["gluing"] / surf.model.tau_bar})
    return rows


def dislocation_scaling_report(genus: int = 3, m_bar: int = 3, zeta0: float = 1e-6, halvings: int = 2,
                               n_s: int = 32) -> list[dict]:
    """sup |theta_dislocation| / |zeta'| as zeta is halved."""
    model = SurfaceModel.desk(genus, m_bar)
    c1, c2 = normalization_constants(model)
    rows = []
    for k in range(halvings + 1):
        z = zeta0 / 2**k
        surf = GluedSurface(model, zeta_params(model, z, z, c1, c2))
        d = decompose(surf, lagrangian_angle_field(surf, n_s=n_s))
        norm = math.hypot(surf.zeta.zeta1p, surf.zeta.zeta2p)
        rows.append({"zeta": z, "zeta_prime_norm": norm, "theta_dislocation_sup": d["sup"]["dislocation"],
                     "ratio": d["sup"]["dislocation"] / norm})
    return rows


def twisting_scaling_report(tau: float, alphas, window=(0.4, 1.0), n_s: int = 32) -> list[dict]:
    """sup |theta| / |alpha| for X_{tau, alpha} over its twist window."""
    rows = []
    base = TorusImmersion.from_tau(tau)
    lo, hi = window
    w = (hi - lo) / 3
    t = np.linspace(lo + w, hi - w, 241)
    s = 2 * np.pi * np.arange(n_s) / n_s
    S, T = np.meshgrid(s, t, indexing="ij")
    for al in alphas:
        th = lagrangian_angle(TwistedImmersion(base, al, window)(S, T))
        rows.append({"alpha": float(al), "theta_sup": float(np.max(np.abs(th))),
                     "ratio": float(np.max(np.abs(th)) / abs(al))})
    return rows


def metric_equivalence_report(surf1: GluedSurface, surf2: GluedSurface, n: int = 1, kind: str = "g",
                              n_s: int = 32, n_t: int = 41) -> dict:
    """Extreme eigenvalues of h1 relative to h2 on the spherical region S[n] (n >= 1)."""
    m = surf1.model
    c = 2 * n * m.p_bar
    s = 2 * np.pi * np.arange(n_s) / n_s
    S, T = np.meshgrid(s, np.linspace(c - m.b, c + m.b, n_t), indexing="ij")
    h1 = surf1.metric(1, S, T, kind)
    h2 = surf2.metric(1, S, T, kind)
    A = np.stack([np.stack([h1[0], h1[1]], -1), np.stack([h1[1], h1[2]], -1)], -2)
    B = np.stack([np.stack([h2[0], h2[1]], -1), np.stack([h2[1], h2[2]], -1)], -2)
    L = np.linalg.cholesky(B)
    Li = np.linalg.inv(L)
    ev = np.linalg.eigvalsh(Li @ A @ np.swapaxes(Li, -1, -2))
    return {"min_ratio": float(ev.min()), "max_ratio": float(ev.max())}


# ---------------------------------------------------------------------------
# export


def write_obj(mesh: SurfaceMesh, path, subspace: np.ndarray | None = None) -> None:
    """OBJ of a real 3-dimensional projection (default: the real parts)."""
    pos = mesh.positions6() @ (subspace.T if subspace is not None else np.eye(6)[:3].T)
    with open(path, "w", encoding="utf-8") as fh:
        for p in pos:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def write_ply(mesh: SurfaceMesh, path) -> None:
    """Binary little-endian PLY with 6 real coordinates, region, orbit and theta per vertex."""
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {mesh.n_vertices}"]
    header += [f"property double {n}" for n in ("x", "y", "z", "u", "v", "w")]
    header += ["property int region_kind", "property int region_index", "property int orbit",
               "property double theta", f"element face {len(mesh.faces)}",
               "property list uchar int vertex_indices", "end_header"]
    vdt = np.dtype([(n, "<f8") for n in ("x", "y", "z", "u", "v", "w")]
                   + [("rk", "<i4"), ("ri", "<i4"), ("orbit", "<i4"), ("theta", "<f8")])
    v = np.empty(mesh.n_vertices, vdt)
    pos = mesh.positions6()
    for i, n in enumerate(("x", "y", "z", "u", "v", "w")):
        v[n] = pos[:, i]
    v["rk"], v["ri"], v["orbit"], v["theta"] = mesh.region_kind, mesh.region_index, mesh.orbit, mesh.theta
    fdt = np.dtype([("n", "u1"), ("i", "<i4", (3,))])
    f = np.empty(len(mesh.faces), fdt)
    f["n"] = 3
    f["i"] = mesh.faces
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(v.tobytes())
        fh.write(f.tobytes())


def write_angle_csv(field: AngleField, parts: dict, path) -> None:
    import csv
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", "theta", "theta_gluing", "theta_dislocation", "theta_twisting"])
        for row in zip(field.s.ravel(), field.t.ravel(), field.theta.ravel(), parts["gluing"].ravel(),
                       parts["dislocation"].ravel(), parts["twisting"].ravel()):
            w.writerow([f"{x:.17g}" for x in row])
