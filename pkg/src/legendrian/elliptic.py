"""Jacobi elliptic functions and elliptic integrals for real modulus in [0, 1].

All routines accept numpy arrays for the argument and a scalar :class:`Modulus`.
The complementary modulus is carried alongside k so that quantities near k = 1
keep full relative accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_EPS = np.finfo(float).eps


class EllipticDomainError(ValueError):
    """Raised when an argument lies outside the domain of a routine."""


@dataclass(frozen=True)
class Modulus:
    """Elliptic modulus k with its complement k' = sqrt(1 - k^2)."""

    k: float
    k_prime: float

    def __post_init__(self):
        if not (0.0 <= self.k <= 1.0 and 0.0 <= self.k_prime <= 1.0):
            raise EllipticDomainError(f"modulus out of range: k={self.k}, k'={self.k_prime}")
        if abs(self.k**2 + self.k_prime**2 - 1.0) > 8 * _EPS:
            raise EllipticDomainError("k^2 + k'^2 != 1")

    @classmethod
    def from_k(cls, k: float) -> "Modulus":
        k = float(k)
        if not 0.0 <= k <= 1.0:
            raise EllipticDomainError(f"k={k} outside [0, 1]")
        return cls(k, float(np.sqrt((1.0 - k) * (1.0 + k))))

    @classmethod
    def from_k_prime(cls, kp: float) -> "Modulus":
        kp = float(kp)
        if not 0.0 <= kp <= 1.0:
            raise EllipticDomainError(f"k'={kp} outside [0, 1]")
        return cls(float(np.sqrt((1.0 - kp) * (1.0 + kp))), kp)

    @classmethod
    def from_squares(cls, k2: float, kp2: float) -> "Modulus":
        """Build from k^2 and k'^2 computed independently (renormalized to sum 1)."""
        s = k2 + kp2
        return cls(float(np.sqrt(k2 / s)), float(np.sqrt(kp2 / s)))

    @property
    def h(self) -> float:
        """1 - k, accurate when k is close to 1."""
        return self.k_prime**2 / (1.0 + self.k)

    @property
    def m(self) -> float:
        return self.k**2

    def complement(self) -> "Modulus":
        return Modulus(self.k_prime, self.k)


def _as_modulus(m) -> Modulus:
    return m if isinstance(m, Modulus) else Modulus.from_k(m)


# ---------------------------------------------------------------------------
# complete integrals


def _agm_sequence(kp: float):
    a, b = 1.0, kp
    cs = [np.sqrt(max(0.0, (1.0 - kp) * (1.0 + kp)))]
    while True:
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        cs.append(c)
        if abs(c) <= 4 * _EPS * a:
            return a, cs


def complete_K(m) -> float:
    m = _as_modulus(m)
    if m.k_prime == 0.0:
        raise EllipticDomainError("divergent integral: K(1) is infinite")
    a, _ = _agm_sequence(m.k_prime)
    return float(np.pi / (2.0 * a))


def complete_E(m) -> float:
    m = _as_modulus(m)
    if m.k_prime == 0.0:
        return 1.0
    a, cs = _agm_sequence(m.k_prime)
    s = sum(2.0 ** (n - 1) * c * c for n, c in enumerate(cs))
    return float(np.pi / (2.0 * a) * (1.0 - s))


def complete_KE(m) -> tuple[float, float]:
    return complete_K(m), complete_E(m)


def dK_dk(m) -> float:
    m = _as_modulus(m)
    K, E = complete_KE(m)
    return (E - m.k_prime**2 * K) / (m.k * m.k_prime**2)


def dE_dk(m) -> float:
    m = _as_modulus(m)
    K, E = complete_KE(m)
    return (E - K) / m.k


def expansions_near_k1(h: float) -> tuple[float, float]:
    """Logarithmic expansions of K and E about k = 1 through second order in h = 1 - k."""
    log_term = np.log(8.0 / h)
    kp = 0.5 * np.pi * (1.0 + 0.5 * h + 5.0 / 16.0 * h * h)
    jp = 0.5 * np.pi * (h + 0.25 * h * h)
    K = kp / np.pi * log_term - 0.25 * h - 7.0 / 32.0 * h * h
    E = jp / np.pi * log_term + 1.0 - 0.5 * h - 5.0 / 16.0 * h * h
    return float(K), float(E)


# ---------------------------------------------------------------------------
# Jacobi functions


def _sncndn_descending(u, k: float, kp: float):
    # AGM / descending Landen scheme, accurate while k' is not small
    a = [1.0]
    c = [k]
    b = kp
    while abs(c[-1]) > _EPS * a[-1]:
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = np.sqrt(a[-1] * b)
        a.append(an)
    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    phis = [phi]
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c[j] / a[j] * np.sin(phi), -1.0, 1.0)))
        phis.append(phi)
    phi0 = phis[-1]
    sn = np.sin(phi0)
    cn = np.cos(phi0)
    if n >= 1:
        dn = cn / np.cos(phis[-2] - phi0)
    else:
        dn = np.ones_like(u)
    return sn, cn, dn


def _sncndn_ascending(u, k: float, kp: float):
    # ascending Landen: maps k towards 1, where hyperbolic forms take over
    if kp < 1e-9:
        sh, ch = np.sinh(u), np.cosh(u)
        th, se = np.tanh(u), 1.0 / np.cosh(u)
        q = 0.25 * kp * kp
        sn = th - q * (u - sh * ch) * se * se
        cn = se + q * (u - sh * ch) * th * se
        dn = se + q * (u + sh * ch) * th * se
        return sn, cn, dn
    k2p = kp * kp / (1.0 + k) ** 2
    k2 = 2.0 * np.sqrt(k) / (1.0 + k)
    w = u / (1.0 + k2p)
    s, c, d = _sncndn_ascending(w, k2, k2p) if k2p < 0.5 else _sncndn_descending(w, k2, k2p)
    sn = (1.0 + k2p) * s * c / d
    cn = (1.0 + k2p) / (k2 * k2) * (d * d - k2p) / d
    dn = (1.0 - k2p) / (k2 * k2) * (d * d + k2p) / d
    return sn, cn, dn


def _sncndn_core(u, m: Modulus):
    if m.k_prime < 0.5:
        return _sncndn_ascending(u, m.k, m.k_prime)
    return _sncndn_descending(u, m.k, m.k_prime)


def jacobi(u, m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (sn, cn, dn) of u for modulus m; vectorized in u."""
    m = _as_modulus(m)
    u = np.asarray(u, dtype=float)
    if m.k == 0.0:
        return np.sin(u), np.cos(u), np.ones_like(u)
    if m.k_prime == 0.0:
        se = 1.0 / np.cosh(u)
        return np.tanh(u), se, se.copy()
    K = complete_K(m)
    kp = m.k_prime
    sign = np.where(u < 0, -1.0, 1.0)
    x = np.mod(np.abs(u), 4.0 * K)
    quad = np.minimum(np.floor(x / K), 3.0)
    w = x - quad * K
    refl = w > 0.5 * K
    wr = np.where(refl, K - w, w)
    s0, c0, d0 = _sncndn_core(wr, m)
    # values at w from values at K - w
    s = np.where(refl, c0 / d0, s0)
    c = np.where(refl, kp * s0 / d0, c0)
    d = np.where(refl, kp / d0, d0)
    sn = np.select([quad == 0, quad == 1, quad == 2], [s, c / d, -s], -c / d)
    cn = np.select([quad == 0, quad == 1, quad == 2], [c, -kp * s / d, -c], kp * s / d)
    dn = np.select([quad == 0, quad == 1, quad == 2], [d, kp / d, d], kp / d)
    return sign * sn, cn, dn


def amplitude(u, m) -> np.ndarray:
    """Continuous amplitude am(u) with sin(am u) = sn u."""
    m = _as_modulus(m)
    u = np.asarray(u, dtype=float)
    if m.k_prime == 0.0:
        return np.arctan(np.sinh(u))
    if m.k == 0.0:
        return u.copy()
    K = complete_K(m)
    j = np.round(u / (2.0 * K))
    v = u - 2.0 * K * j
    sn, cn, _ = jacobi(v, m)
    return np.arctan2(sn, cn) + j * np.pi


# ---------------------------------------------------------------------------
# Carlson symmetric integrals (duplication with fifth-order series)


def carlson_RF(x, y, z):
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    x, y, z = x.copy(), y.copy(), z.copy()
    for _ in range(60):
        A = (x + y + z) / 3.0
        dev = np.max(np.abs(np.stack([A - x, A - y, A - z])) / A) if A.size else 0.0
        if dev < 1e-4:
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sy * sz + sz * sx
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
    A = (x + y + z) / 3.0
    X, Y = 1.0 - x / A, 1.0 - y / A
    Z = -(X + Y)
    E2 = X * Y - Z * Z
    E3 = X * Y * Z
    return (1.0 - E2 / 10.0 + E3 / 14.0 + E2 * E2 / 24.0 - 3.0 * E2 * E3 / 44.0) / np.sqrt(A)


def carlson_RC(x, y):
    """RC(x, y) = RF(x, y, y) for x > 0, y > 0, via elementary functions."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    t = (y - x) / x
    small = np.abs(t) <= 1e-3
    ts = np.where(small, 0.0, t)
    r = np.sqrt(np.abs(ts))
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(ts > 0, np.arctan(r), np.arctanh(np.minimum(r, 1.0 - _EPS))) / r
    ser = 1.0 - t / 3.0 + t**2 / 5.0 - t**3 / 7.0 + t**4 / 9.0 - t**5 / 11.0
    return np.where(small, ser, g) / np.sqrt(x)


def carlson_RD(x, y, z):
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    x, y, z = x.copy(), y.copy(), z.copy()
    A0 = (x + y + 3.0 * z) / 5.0
    x0, y0 = x.copy(), y.copy()
    A = A0.copy()
    acc = np.zeros(x.shape)
    f = 1.0
    for _ in range(60):
        Q = np.max(np.abs(np.stack([A0 - x0, A0 - y0, A0 - z])) / A) if A.size else 0.0
        if f * Q < 1e-4:
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sy * sz + sz * sx
        acc += f / (sz * (z + lam))
        f *= 0.25
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        A = 0.25 * (A + lam)
    X = f * (A0 - x0) / A
    Y = f * (A0 - y0) / A
    Z = -(X + Y) / 3.0
    E2 = X * Y - 6.0 * Z * Z
    E3 = (3.0 * X * Y - 8.0 * Z * Z) * Z
    E4 = 3.0 * (X * Y - Z * Z) * Z * Z
    E5 = X * Y * Z**3
    ser = (1.0 - 3.0 * E2 / 14.0 + E3 / 6.0 + 9.0 * E2 * E2 / 88.0 - 3.0 * E4 / 22.0
           - 9.0 * E2 * E3 / 52.0 + 3.0 * E5 / 26.0)
    return f * A ** (-1.5) * ser + 3.0 * acc


def carlson_RJ(x, y, z, p):
    """RJ for x, y, z >= 0 (at most one zero) and p > 0."""
    x, y, z, p = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z, p)))
    x, y, z, p = x.copy(), y.copy(), z.copy(), p.copy()
    A0 = (x + y + z + 2.0 * p) / 5.0
    x0, y0, z0 = x.copy(), y.copy(), z.copy()
    delta = (p - x) * (p - y) * (p - z)
    A = A0.copy()
    acc = np.zeros(x.shape)
    f = 1.0
    for _ in range(60):
        Q = np.max(np.abs(np.stack([A0 - x0, A0 - y0, A0 - z0, A0 - p])) / A) if A.size else 0.0
        if f * Q < 1e-4:
            break
        sx, sy, sz, sp = np.sqrt(x), np.sqrt(y), np.sqrt(z), np.sqrt(p)
        lam = sx * sy + sy * sz + sz * sx
        d = (sp + sx) * (sp + sy) * (sp + sz)
        e = f**3 * delta / (d * d)
        acc += f / d * carlson_RC(1.0, 1.0 + e)
        f *= 0.25
        x, y, z, p = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam), 0.25 * (p + lam)
        A = 0.25 * (A + lam)
    X = f * (A0 - x0) / A
    Y = f * (A0 - y0) / A
    Z = f * (A0 - z0) / A
    P = -(X + Y + Z) / 2.0
    E2 = X * Y + X * Z + Y * Z - 3.0 * P * P
    E3 = X * Y * Z + 2.0 * E2 * P + 4.0 * P**3
    E4 = (2.0 * X * Y * Z + E2 * P + 3.0 * P**3) * P
    E5 = X * Y * Z * P * P
    ser = (1.0 - 3.0 * E2 / 14.0 + E3 / 6.0 + 9.0 * E2 * E2 / 88.0 - 3.0 * E4 / 22.0
           - 9.0 * E2 * E3 / 52.0 + 3.0 * E5 / 26.0)
    return f * A ** (-1.5) * ser + 6.0 * acc


# ---------------------------------------------------------------------------
# incomplete integrals


def _reduce_phi(phi):
    # phi = j*pi + rest, rest in [-pi/2, pi/2]
    phi = np.asarray(phi, dtype=float)
    j = np.round(phi / np.pi)
    return j, phi - j * np.pi


def _F_principal(phi, m: Modulus):
    s, c = np.sin(phi), np.cos(phi)
    return s * carlson_RF(c * c, 1.0 - m.m * s * s, 1.0)


def _D_minus_F_principal(phi, m: Modulus):
    s, c = np.sin(phi), np.cos(phi)
    return -(m.m / 3.0) * s**3 * carlson_RD(c * c, 1.0 - m.m * s * s, 1.0)


def incomplete_F(phi, m) -> np.ndarray:
    """F(phi, k) = int_0^phi dx / sqrt(1 - k^2 sin^2 x), any real phi."""
    m = _as_modulus(m)
    j, rest = _reduce_phi(phi)
    base = _F_principal(rest, m)
    if np.any(j != 0):
        if m.k_prime == 0.0:
            raise EllipticDomainError("F(phi, 1) diverges for |phi| >= pi/2")
        base = base + 2.0 * j * complete_K(m)
    return base


def incomplete_D(phi, m) -> np.ndarray:
    """D(phi, k) = int_0^phi sqrt(1 - k^2 sin^2 x) dx, any real phi."""
    m = _as_modulus(m)
    j, rest = _reduce_phi(phi)
    s = np.sin(rest)
    if m.k_prime == 0.0:
        base = s
    else:
        base = _F_principal(rest, m) + _D_minus_F_principal(rest, m)
    return base + 2.0 * j * complete_E(m)


def incomplete_Pi(phi, n: float, m) -> np.ndarray:
    """int_0^phi dx / ((1 - n sin^2 x) sqrt(1 - k^2 sin^2 x)) for n < 1, any real phi."""
    m = _as_modulus(m)
    if n >= 1.0:
        raise EllipticDomainError("characteristic n >= 1 makes the integrand singular")

    def principal(ph):
        s, c = np.sin(ph), np.cos(ph)
        d2 = 1.0 - m.m * s * s
        out = s * carlson_RF(c * c, d2, 1.0)
        if n != 0.0:
            out = out + (n / 3.0) * s**3 * carlson_RJ(c * c, d2, 1.0, 1.0 - n * s * s)
        return out

    j, rest = _reduce_phi(phi)
    base = principal(rest)
    if np.any(j != 0):
        if m.k_prime == 0.0:
            raise EllipticDomainError("third-kind integral diverges at k = 1 past pi/2")
        base = base + 2.0 * j * principal(np.array(0.5 * np.pi))
    return base


def third_kind_Lambda(u, alpha: float, m) -> np.ndarray:
    """int_0^u dt / (1 - alpha^2 sn^2(t, k)), for alpha^2 < 1."""
    m = _as_modulus(m)
    a2 = alpha * alpha
    if a2 >= 1.0:
        raise EllipticDomainError("alpha^2 >= 1: integrand singular on the path")
    return incomplete_Pi(amplitude(u, m), a2, m)


def third_kind_complete_reduction(alpha: float, m) -> float:
    """Complete third-kind integral via the Heuman combination, valid for 0 < k < alpha < 1."""
    m = _as_modulus(m)
    if not (0.0 < m.k < alpha < 1.0):
        raise EllipticDomainError(f"reduction needs 0 < k < alpha < 1 (k={m.k}, alpha={alpha})")
    a2 = alpha * alpha
    c = alpha / np.sqrt((a2 - m.m) * (1.0 - a2))
    sin_phi = np.sqrt(a2 - m.m) / (alpha * m.k_prime)
    phi = float(np.arcsin(min(1.0, sin_phi)))
    return float(c * 0.5 * np.pi * heuman_lambda0(phi, m))


def heuman_lambda0(phi, m) -> np.ndarray:
    """Heuman's Lambda_0(phi, k) for phi in [0, pi/2]."""
    m = _as_modulus(m)
    mc = m.complement()
    phi = np.asarray(phi, dtype=float)
    if m.k_prime == 0.0:
        return 2.0 * phi / np.pi
    if m.h < 1e-8:
        K, E = expansions_near_k1(m.h)
    else:
        K, E = complete_KE(m)
    FF = _F_principal(phi, mc)
    DmF = _D_minus_F_principal(phi, mc)
    return 2.0 / np.pi * (K * DmF + E * FF)


def heuman_lambda0_dk(phi, m) -> np.ndarray:
    m = _as_modulus(m)
    K, E = complete_KE(m)
    s, c = np.sin(phi), np.cos(phi)
    return 2.0 * (E - K) * s * c / (np.pi * m.k * np.sqrt(1.0 - m.k_prime**2 * s * s))


def heuman_lambda0_dphi(phi, m) -> np.ndarray:
    m = _as_modulus(m)
    K, E = complete_KE(m)
    s = np.sin(phi)
    w = m.k_prime**2 * s * s
    return 2.0 * (E - w * K) / (np.pi * np.sqrt(1.0 - w))
