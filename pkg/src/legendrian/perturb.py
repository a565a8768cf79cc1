"""Hamiltonian perturbations of Legendrian immersions and the Killing functions.

A function f on a Legendrian surface L is extended to the cone over a tubular
neighbourhood by H(z) = |z|^2 f(pi(z / |z|)), pi the closest-point projection
onto L. The flow of V = -J grad H commutes with dilations and preserves
Lagrangian cones, so its time-1 image of L, projected back to S^5, is the
Legendrian perturbation X_f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .immersion import LegendrianJet, lagrangian_angle


class PerturbationTooLargeError(ValueError):
    """The flow left the region where the closest-point projection is defined."""


def f_t(X) -> np.ndarray:
    """Hamiltonian of the translations T~_x: -|z1|^2/2 + (|z2|^2 + |z3|^2)/4."""
    a = np.abs(np.asarray(X)) ** 2
    return -0.5 * a[..., 0] + 0.25 * (a[..., 1] + a[..., 2])


def f_q(X) -> np.ndarray:
    """Hamiltonian of the twists Q~_x: (|z3|^2 - |z2|^2)/2."""
    a = np.abs(np.asarray(X)) ** 2
    return 0.5 * (a[..., 2] - a[..., 1])


def _re(a, b) -> np.ndarray:
    """Real inner product of C^3 vectors viewed in R^6."""
    return np.real(np.sum(np.conj(a) * b, axis=-1))


# ---------------------------------------------------------------------------
# Hermitian quadratics


@dataclass(frozen=True)
class HermitianQuadratic:
    """f(z) = sum a_ij z_i conj(z_j) with a Hermitian and trace free."""

    matrix: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        if a.shape != (3, 3):
            raise ValueError("quadratic form must be 3x3")
        if np.max(np.abs(a - a.conj().T)) > 0:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(a)) > 1e-14:
            raise ValueError("matrix is not trace free")
        object.__setattr__(self, "matrix", a)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.real(np.sum(np.conj(z) * (z @ self.matrix.T), axis=-1))

    def gradient(self, z) -> np.ndarray:
        """Real gradient in R^6, written as a complex vector: 2 a z."""
        return 2.0 * np.asarray(z, dtype=complex) @ self.matrix.T

    def vector_field(self, z) -> np.ndarray:
        return -1j * self.gradient(z)

    def flow(self, x: float) -> np.ndarray:
        """exp(-2 i a x), the time-x map of -J grad f."""
        w, U = np.linalg.eigh(self.matrix)
        return (U * np.exp(-2j * w * x)) @ U.conj().T


F_T = HermitianQuadratic(np.diag([-0.5, 0.25, 0.25]), "f_t")
F_Q = HermitianQuadratic(np.diag([0.0, -0.5, 0.5]), "f_q")


def killing_field(q: HermitianQuadratic) -> tuple[Callable, Callable]:
    if not isinstance(q, HermitianQuadratic):
        q = HermitianQuadratic(q)
    return q, q.vector_field


def integrate_killing_flow(q: HermitianQuadratic, z0, x: float, steps: int = 64) -> np.ndarray:
    """Classical RK4 for dz/dx = -J grad f, independent of the matrix exponential."""
    z = np.asarray(z0, dtype=complex)
    h = x / steps
    for _ in range(steps):
        k1 = q.vector_field(z)
        k2 = q.vector_field(z + 0.5 * h * k1)
        k3 = q.vector_field(z + 0.5 * h * k2)
        k4 = q.vector_field(z + h * k3)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


# ---------------------------------------------------------------------------
# scalar fields on a parametrized surface


class ScalarField:
    """f on parameter space, evaluated together with its first derivatives."""

    def __init__(self, fn: Callable, tags: tuple[str, ...] = ()):
        self._fn = fn
        self.tags = tuple(tags)

    def __call__(self, s, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        return self._fn(s, t)

    def scaled(self, c: float) -> "ScalarField":
        return ScalarField(lambda s, t: tuple(c * v for v in self._fn(s, t)), self.tags)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        def fn(s, t):
            a, b = self._fn(s, t), other._fn(s, t)
            return a[0] + b[0], a[1] + b[1], a[2] + b[2]
        return ScalarField(fn, tuple(set(self.tags) & set(other.tags)))

    @classmethod
    def zero(cls) -> "ScalarField":
        return cls(lambda s, t: (np.zeros(s.shape),) * 3, ("odd_t", "even_t"))

    @classmethod
    def from_function(cls, fn: Callable, h: float = 1e-4, tags=()) -> "ScalarField":
        """Derivatives of a plain function by fourth-order central differences."""
        def full(s, t):
            ds = (-fn(s + 2 * h, t) + 8 * fn(s + h, t) - 8 * fn(s - h, t) + fn(s - 2 * h, t)) / (12 * h)
            dt = (-fn(s, t + 2 * h) + 8 * fn(s, t + h) - 8 * fn(s, t - h) + fn(s, t - 2 * h)) / (12 * h)
            return fn(s, t), ds, dt
        return cls(full, tags)

    @classmethod
    def from_ambient(cls, q: HermitianQuadratic, immersion, tags=()) -> "ScalarField":
        """q o X with derivatives <grad q, X_s>, <grad q, X_t>."""
        def fn(s, t):
            j = immersion(s, t)
            g = q.gradient(j.X)
            return q(j.X), _re(g, j.Xs), _re(g, j.Xt)
        return cls(fn, tags)

    @classmethod
    def bump(cls, center: tuple[float, float], radius: float, harmonic: int = 0) -> "ScalarField":
        """The C^5 bump (1 - r^2/R^2)^6 around a point, times cos(k s)."""
        s0, t0 = center

        def fn(s, t):
            ds = np.angle(np.exp(1j * (s - s0)))
            dt = t - t0
            q = 1.0 - (ds * ds + dt * dt) / radius**2
            inside = q > 0
            qp = np.where(inside, q, 0.0)
            b = qp**6
            db = 6 * qp**5 * (-2.0 / radius**2)
            c, dc = np.cos(harmonic * s), -harmonic * np.sin(harmonic * s)
            return b * c, db * ds * c + b * dc, db * dt * c
        return cls(fn)

    def check_tags(self, s, t, center: float = 0.0) -> dict:
        """Largest violation of the declared parities under t -> 2 center - t and s -> -s."""
        out = {}
        f0 = self(s, t)[0]
        if "odd_t" in self.tags:
            out["odd_t"] = float(np.max(np.abs(self(s, 2 * center - t)[0] + f0)))
        if "even_t" in self.tags:
            out["even_t"] = float(np.max(np.abs(self(s, 2 * center - t)[0] - f0)))
        if "even_s" in self.tags:
            out["even_s"] = float(np.max(np.abs(self(-s, t)[0] - f0)))
        return out


# ---------------------------------------------------------------------------
# closest-point projection and the flow


@dataclass
class _Atlas:
    """Charts (immersion, field) and, per flowed point, which chart tracks it."""

    immersions: list
    fields: list
    fd_step: float = 1e-5
    newton_iters: int = 2
    min_det_ratio: float = 0.25

    def second_jet(self, k: int, u, v):
        X = self.immersions[k]
        h = self.fd_step
        j = X(u, v)
        ju_p, ju_m = X(u + h, v), X(u - h, v)
        jv_p, jv_m = X(u, v + h), X(u, v - h)
        Xuu = (ju_p.Xs - ju_m.Xs) / (2 * h)
        Xuv = 0.5 * ((ju_p.Xt - ju_m.Xt) + (jv_p.Xs - jv_m.Xs)) / (2 * h)
        Xvv = (jv_p.Xt - jv_m.Xt) / (2 * h)
        return j, Xuu, Xuv, Xvv

    def _hessian(self, x, j, Xuu, Xuv, Xvv):
        d = x - j.X
        M = np.empty(x.shape[:-1] + (2, 2))
        M[..., 0, 0] = -_re(j.Xs, j.Xs) + _re(d, Xuu)
        M[..., 0, 1] = M[..., 1, 0] = -_re(j.Xs, j.Xt) + _re(d, Xuv)
        M[..., 1, 1] = -_re(j.Xt, j.Xt) + _re(d, Xvv)
        G = np.stack([_re(d, j.Xs), _re(d, j.Xt)], axis=-1)
        return M, G

    def project(self, k: int, x, u, v):
        """Newton iterations (fixed count, so the map is smooth) for the closest point."""
        for _ in range(self.newton_iters):
            j, Xuu, Xuv, Xvv = self.second_jet(k, u, v)
            M, G = self._hessian(x, j, Xuu, Xuv, Xvv)
            step = np.linalg.solve(M, G[..., None])[..., 0]
            u, v = u - step[..., 0], v - step[..., 1]
        j, Xuu, Xuv, Xvv = self.second_jet(k, u, v)
        M, G = self._hessian(x, j, Xuu, Xuv, Xvv)
        g = np.stack([np.stack([_re(j.Xs, j.Xs), _re(j.Xs, j.Xt)], -1),
                      np.stack([_re(j.Xs, j.Xt), _re(j.Xt, j.Xt)], -1)], -2)
        ratio = np.linalg.det(-M) / np.linalg.det(g)
        if not np.all(ratio > self.min_det_ratio):
            raise PerturbationTooLargeError(
                f"closest-point projection degenerate (det ratio {np.nanmin(ratio):.3g})")
        return u, v, j, M

    def velocity(self, chart, z, u, v):
        """-J grad H at z, and the refreshed projection parameters."""
        V = np.empty_like(z)
        u, v = u.copy(), v.copy()
        r = np.linalg.norm(z, axis=-1)
        x = z / r[:, None]
        for k in np.unique(chart):
            sel = chart == k
            uk, vk, j, M = self.project(k, x[sel], u[sel], v[sel])
            f, fu, fv = self.fields[k](uk, vk)
            c = np.linalg.solve(np.swapaxes(M, -1, -2), np.stack([fu, fv], -1)[..., None])[..., 0]
            grad = -(c[:, :1] * j.Xs + c[:, 1:] * j.Xt)
            grad -= _re(grad, x[sel])[:, None] * x[sel]
            gradH = 2.0 * z[sel] * f[:, None] + r[sel][:, None] * grad
            V[sel] = -1j * gradH
            u[sel], v[sel] = uk, vk
        return V, u, v


@dataclass
class FlowReport:
    drift: float
    max_distance: float


def _flow(atlas: _Atlas, chart, u0, v0, steps: int) -> tuple[np.ndarray, FlowReport]:
    z = np.empty((len(u0), 3), complex)
    for k in np.unique(chart):
        sel = chart == k
        z[sel] = atlas.immersions[k](u0[sel], v0[sel]).X
    u, v = u0.copy(), v0.copy()
    h = 1.0 / steps
    drift = 0.0
    for _ in range(steps):
        k1, u, v = atlas.velocity(chart, z, u, v)
        k2, _, _ = atlas.velocity(chart, z + 0.5 * h * k1, u, v)
        k3, _, _ = atlas.velocity(chart, z + 0.5 * h * k2, u, v)
        k4, u4, v4 = atlas.velocity(chart, z + h * k3, u, v)
        z = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        n = np.linalg.norm(z, axis=-1)
        drift = max(drift, float(np.max(np.abs(n - 1.0))))
        z = z / n[:, None]
        u, v = u4, v4
    dist = 0.0
    for k in np.unique(chart):
        sel = chart == k
        uk, vk, j, _ = atlas.project(k, z[sel], u[sel], v[sel])
        dist = max(dist, float(np.max(np.linalg.norm(z[sel] - j.X, axis=-1))))
    return z, FlowReport(drift, dist)


_STENCIL = ((2, -1.0), (1, 8.0), (-1, -8.0), (-2, 1.0))


def perturb_points(immersions, fields, chart, u, v, steps: int = 16, tangent_step: float = 1e-3):
    """Jet of X_f at chart points, tangents by fourth-order differences of the flow map."""
    chart = np.asarray(chart, dtype=int).ravel()
    u, v = np.asarray(u, float).ravel(), np.asarray(v, float).ravel()
    atlas = _Atlas(list(immersions), list(fields))
    h = tangent_step
    n = len(u)
    us = [u] + [u + k * h for k, _ in _STENCIL] + [u] * 4
    vs = [v] + [v] * 4 + [v + k * h for k, _ in _STENCIL]
    z, rep = _flow(atlas, np.tile(chart, 9), np.concatenate(us), np.concatenate(vs), steps)
    z = z.reshape(9, n, 3)
    Xs = sum(c * z[1 + i] for i, (_, c) in enumerate(_STENCIL)) / (12 * h)
    Xt = sum(c * z[5 + i] for i, (_, c) in enumerate(_STENCIL)) / (12 * h)
    return LegendrianJet(z[0], Xs, Xt), rep


def hamiltonian_perturb(immersion, field: ScalarField, s, t, steps: int = 16,
                        tangent_step: float = 1e-3) -> tuple[LegendrianJet, FlowReport]:
    """X_f on the sample points (s, t) of a single-chart immersion."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    jet, rep = perturb_points([immersion], [field], np.zeros(s.size, int), s, t, steps, tangent_step)
    shape = s.shape + (3,)
    return LegendrianJet(jet.X.reshape(shape), jet.Xs.reshape(shape), jet.Xt.reshape(shape)), rep


# ---------------------------------------------------------------------------
# the linearization


def laplace_beltrami(immersion, field: ScalarField, s, t, h: float = 1e-3) -> np.ndarray:
    """div_g grad_g f in the coordinates (s, t), by fourth-order differences of the flux."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))

    def flux(ss, tt):
        gss, gst, gtt = immersion(ss, tt).metric()
        _, fs, ft = field(ss, tt)
        det = gss * gtt - gst * gst
        root = np.sqrt(det)
        return root * (gtt * fs - gst * ft) / det, root * (gss * ft - gst * fs) / det

    div = np.zeros(s.shape)
    for k, c in _STENCIL:
        div += c * flux(s + k * h, t)[0] / (12 * h)
        div += c * flux(s, t + k * h)[1] / (12 * h)
    gss, gst, gtt = immersion(s, t).metric()
    return div / np.sqrt(gss * gtt - gst * gst)


def linearized_operator(immersion, field: ScalarField, s, t, R: float = 1.0) -> np.ndarray:
    """(Delta + 6 R^-2) f, with Delta taken for the metric of R X."""
    return (laplace_beltrami(immersion, field, s, t) + 6.0 * field(s, t)[0]) / R**2


def angle_change(immersion, field: ScalarField, s, t, steps: int = 16) -> np.ndarray:
    """theta(X_f) - theta(X), wrapped to (-pi, pi]."""
    jet, _ = hamiltonian_perturb(immersion, field, s, t, steps)
    base, _ = hamiltonian_perturb(immersion, ScalarField.zero(), s, t, steps)
    return np.angle(np.exp(1j * (lagrangian_angle(jet) - lagrangian_angle(base))))


def linearization_residual(immersion, phi: ScalarField, varphi: ScalarField, s, t, R: float = 1.0,
                           steps: int = 16) -> float:
    """sup |theta_{phi + varphi} - theta_phi - (Delta + 6 R^-2) varphi| on the sample points.

    The target sphere has radius R: a field f on R X is a field f / R^2 on X."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    a, _ = hamiltonian_perturb(immersion, (phi + varphi).scaled(R**-2), s, t, steps)
    b, _ = hamiltonian_perturb(immersion, phi.scaled(R**-2), s, t, steps)
    d = np.angle(np.exp(1j * (lagrangian_angle(a) - lagrangian_angle(b))))
    return float(np.max(np.abs(d - linearized_operator(immersion, varphi, s, t, R))))


def residual_scaling(immersion, phi: ScalarField, bump: ScalarField, s, t, eps=(1e-2, 1e-3, 1e-4),
                     R: float = 1.0) -> dict:
    """Residuals for varphi = eps * bump and the least-squares log-log slope."""
    res = [linearization_residual(immersion, phi, bump.scaled(e), s, t, R) for e in eps]
    slope = float(np.polyfit(np.log(eps), np.log(res), 1)[0])
    return {"eps": list(map(float, eps)), "residual": res, "slope": slope}


# ---------------------------------------------------------------------------
# normalized kernel functions


def sphere_l2_norms(n: int = 48) -> tuple[float, float]:
    """||f_t||, ||f_q|| in L^2 of the unit S^2 (Gauss-Legendre in cos, trapezoid in angle)."""
    c, w = np.polynomial.legendre.leggauss(n)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    C, P = np.meshgrid(c, phi, indexing="ij")
    S = np.sqrt(1 - C * C)
    x = np.stack([C, S * np.cos(P), S * np.sin(P)], -1).astype(complex)
    wt = w[:, None] * (2 * np.pi / (2 * n))
    return (math.sqrt(float(np.sum(wt * f_t(x) ** 2))), math.sqrt(float(np.sum(wt * f_q(x) ** 2))))


def normalized_kernel_functions(mesh) -> tuple[np.ndarray, np.ndarray]:
    """f_t o Y / ||f_t||, f_q o Y / ||f_q|| on the mesh vertices."""
    nt, nq = sphere_l2_norms()
    return f_t(mesh.Y) / nt, f_q(mesh.Y) / nq


def kernel_restrictions(surf, n_values, n_s: int = 16, n_t: int = 41) -> dict:
    """Largest difference between the pulled back f^_i on S~[n'] for different n'."""
    m = surf.model
    nt, nq = sphere_l2_norms()
    s = 2 * np.pi * np.arange(n_s) / n_s
    x = np.linspace(-m.b, m.b, n_t)
    S, T = np.meshgrid(s, x, indexing="ij")
    vals = []
    for n in n_values:
        X = surf.cylinder(S, T + 2 * n * m.p_bar).X
        vals.append((f_t(X) / nt, f_q(X) / nq))
    out = {"f1": 0.0, "f2": 0.0}
    for a in vals[1:]:
        out["f1"] = max(out["f1"], float(np.max(np.abs(a[0] - vals[0][0]))))
        out["f2"] = max(out["f2"], float(np.max(np.abs(a[1] - vals[0][1]))))
    return out
