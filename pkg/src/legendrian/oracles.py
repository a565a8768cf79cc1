"""Independent reference computations used to check the library.

Nothing here imports the rest of the package; every routine is a plain quadrature
or ODE integration written separately from the production code paths.
"""

import numpy as np
from scipy import integrate

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(40)


def gauss(f, a, b, panels=64):
    """Composite Gauss-Legendre quadrature of f on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * np.dot(_WEIGHTS, f(mid + half * _NODES))
    return total


def quad(f, a, b):
    val, _ = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val


def K_oracle(k):
    return gauss(lambda x: 1.0 / np.sqrt(1.0 - k * k * np.sin(x) ** 2), 0.0, np.pi / 2)


def E_oracle(k):
    return gauss(lambda x: np.sqrt(1.0 - k * k * np.sin(x) ** 2), 0.0, np.pi / 2)


def F_oracle(phi, k):
    return quad(lambda x: 1.0 / np.sqrt(1.0 - k * k * np.sin(x) ** 2), 0.0, phi)


def D_oracle(phi, k):
    return quad(lambda x: np.sqrt(1.0 - k * k * np.sin(x) ** 2), 0.0, phi)


def Pi_oracle(phi, n, k):
    return quad(lambda x: 1.0 / ((1.0 - n * np.sin(x) ** 2) * np.sqrt(1.0 - k * k * np.sin(x) ** 2)), 0.0, phi)


def sn_ode_oracle(u_end, k):
    """sn, cn, dn by integrating their first-order system with a tight RK solver."""
    def rhs(_, z):
        s, c, d = z
        return [c * d, -s * d, -k * k * s * c]
    sol = integrate.solve_ivp(rhs, (0.0, u_end), [0.0, 1.0, 1.0], method="DOP853", rtol=1e-13, atol=1e-14)
    return sol.y[:, -1]


def profile_ode_oracle(tau, t_end, n_out=None):
    """Integrate y'' = 4y - 6y^2 from the maximum of the profile."""
    ymax = _largest_root(tau)

    def rhs(_, z):
        return [z[1], 4.0 * z[0] - 6.0 * z[0] ** 2]
    t_eval = None if n_out is None else np.linspace(0.0, t_end, n_out)
    sol = integrate.solve_ivp(rhs, (0.0, t_end), [ymax, 0.0], method="DOP853", rtol=1e-13, atol=1e-14,
                              t_eval=t_eval, dense_output=True)
    return sol


def _largest_root(tau):
    roots = np.roots([1.0, -1.0, 0.0, 4.0 * tau * tau])
    return float(np.max(roots.real))


def w_ode_oracle(tau, t_end, n_out=201):
    """Integrate w1' = conj(w2)^2, w2' = -conj(w1 w2) from the profile maximum.

    Returns (t, w1, w2) on a uniform grid of [0, t_end].
    """
    ymax = _largest_root(tau)

    def rhs(_, z):
        w1 = z[0] + 1j * z[1]
        w2 = z[2] + 1j * z[3]
        d1 = np.conj(w2) ** 2
        d2 = -np.conj(w1 * w2)
        return [d1.real, d1.imag, d2.real, d2.imag]
    t = np.linspace(0.0, t_end, n_out)
    z0 = [0.0, -np.sqrt(max(0.0, 1.0 - ymax)), np.sqrt(ymax), 0.0]
    sol = integrate.solve_ivp(rhs, (0.0, t_end), z0, method="DOP853", rtol=1e-13, atol=1e-14, t_eval=t)
    if not sol.success:
        raise RuntimeError(f"w-system integration failed: {sol.message}")
    return t, sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def sphere_quadrature(f, n=200):
    """Integral over the unit sphere of f(x) for x in R^3 (Gauss-Legendre in cos, uniform in angle)."""
    z, wz = np.polynomial.legendre.leggauss(n)
    phi = np.linspace(0.0, 2 * np.pi, 2 * n, endpoint=False)
    Z, PHI = np.meshgrid(z, phi, indexing="ij")
    R = np.sqrt(1.0 - Z * Z)
    pts = np.stack([R * np.cos(PHI), R * np.sin(PHI), Z], axis=-1)
    return float(np.sum(wz[:, None] * f(pts)) * (2 * np.pi / (2 * n)))


def rotation_period_oracle(tau):
    """(p, p_hat): half-period of y and the integral of 2 tau / y over a full period,
    from the second-order profile ODE with an event at the minimum of y."""
    ymax = _largest_root(tau)

    def rhs(_, z):
        return [z[1], 4.0 * z[0] - 6.0 * z[0] ** 2, 2.0 * tau / z[0]]

    def at_min(_, z):
        return z[1]
    at_min.terminal = True
    at_min.direction = 1
    # start slightly past the maximum so the event does not fire at t = 0
    h = 1e-6
    y0 = ymax + 0.5 * h * h * (4.0 * ymax - 6.0 * ymax ** 2)
    v0 = h * (4.0 * ymax - 6.0 * ymax ** 2)
    sol = integrate.solve_ivp(rhs, (h, 200.0), [y0, v0, 2.0 * tau * h / ymax], method="DOP853",
                              rtol=1e-13, atol=1e-15, events=at_min)
    p = float(sol.t_events[0][0])
    return p, 2.0 * float(sol.y_events[0][0][2])
