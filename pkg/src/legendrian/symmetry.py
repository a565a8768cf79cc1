"""Isometries of C^3 (possibly antiholomorphic) and symmetries of the cylinder.

An :class:`AmbientIsometry` acts by z -> U z or z -> U conj(z). Both are real
linear, so the same formula moves points and tangent vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AmbientIsometry:
    matrix: np.ndarray
    conjugate_first: bool = False
    name: str = field(default="", compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError("isometry matrix must be 3x3")
        object.__setattr__(self, "matrix", m)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.conjugate_first:
            z = np.conj(z)
        return z @ self.matrix.T

    def __matmul__(self, other: "AmbientIsometry") -> "AmbientIsometry":
        """Composition self o other."""
        inner = np.conj(other.matrix) if self.conjugate_first else other.matrix
        return AmbientIsometry(self.matrix @ inner, self.conjugate_first != other.conjugate_first,
                               f"{self.name}*{other.name}")

    def inverse(self) -> "AmbientIsometry":
        if self.conjugate_first:
            return AmbientIsometry(self.matrix.T.copy(), True, f"{self.name}^-1")
        return AmbientIsometry(self.matrix.conj().T, False, f"{self.name}^-1")

    def power(self, n: int) -> "AmbientIsometry":
        out = identity()
        base = self if n >= 0 else self.inverse()
        for _ in range(abs(n)):
            out = base @ out
        return out

    def distance(self, other: "AmbientIsometry") -> float:
        if self.conjugate_first != other.conjugate_first:
            return np.inf
        return float(np.max(np.abs(self.matrix - other.matrix)))

    def unitarity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(3))))

    def jet(self, jet):
        """Image of a jet; tangents transform by the same real-linear map."""
        from .immersion import LegendrianJet
        return LegendrianJet(self(jet.X), self(jet.Xs), self(jet.Xt))


def identity() -> AmbientIsometry:
    return AmbientIsometry(np.eye(3), False, "Id")


def translation(x: float) -> AmbientIsometry:
    """Diagonal (e^{ix}, e^{-ix/2}, e^{-ix/2}): sliding along the e1 circle."""
    return AmbientIsometry(np.diag([np.exp(1j * x), np.exp(-0.5j * x), np.exp(-0.5j * x)]), False, f"T~{x:g}")


def rotation(x: float) -> AmbientIsometry:
    """Rotation in the (e2, e3) plane with axis the e1 circle."""
    c, s = np.cos(x), np.sin(x)
    return AmbientIsometry(np.array([[1, 0, 0], [0, c, s], [0, -s, c]]), False, f"S~{x:g}")


def twist(x: float) -> AmbientIsometry:
    """Diagonal (1, e^{ix}, e^{-ix}): twisting around the e1 circle."""
    return AmbientIsometry(np.diag([1.0, np.exp(1j * x), np.exp(-1j * x)]), False, f"Q~{x:g}")


def reflection_t() -> AmbientIsometry:
    """(w1, w2, w3) -> (-conj w1, conj w2, conj w3)."""
    return AmbientIsometry(np.diag([-1.0, 1.0, 1.0]), True, "T_~")


def reflection_t_at(x: float) -> AmbientIsometry:
    return translation(2.0 * x) @ reflection_t()


def reflection_s() -> AmbientIsometry:
    """(w1, w2, w3) -> (w1, w2, -w3)."""
    return AmbientIsometry(np.diag([1.0, 1.0, -1.0]), False, "S_~")


def half_turn() -> AmbientIsometry:
    """(w1, w2, w3) -> (w1, -w2, -w3), the rotation by pi."""
    return AmbientIsometry(np.diag([1.0, -1.0, -1.0]), False, "S~pi")


def polygon_rotation(genus: int) -> AmbientIsometry:
    """Rotation by 2 pi / g in the real (e1, e2) plane."""
    c, s = np.cos(2 * np.pi / genus), np.sin(2 * np.pi / genus)
    return AmbientIsometry(np.array([[c, s, 0], [-s, c, 0], [0, 0, 1]]), False, "R~")


def translating_twist(p_hat: float, alpha: float) -> AmbientIsometry:
    """The period map T~_{2 p_hat} Q~_{2 alpha}."""
    return translation(2.0 * p_hat) @ twist(2.0 * alpha)


# ---------------------------------------------------------------------------
# cylinder symmetries: affine maps (s, t) -> (ss*s + cs, st*t + ct)


@dataclass(frozen=True)
class CylinderSymmetry:
    s_sign: int = 1
    s_shift: float = 0.0
    t_sign: int = 1
    t_shift: float = 0.0
    name: str = field(default="", compare=False)

    def __call__(self, s, t):
        return self.s_sign * np.asarray(s) + self.s_shift, self.t_sign * np.asarray(t) + self.t_shift

    def __matmul__(self, other: "CylinderSymmetry") -> "CylinderSymmetry":
        return CylinderSymmetry(self.s_sign * other.s_sign, self.s_sign * other.s_shift + self.s_shift,
                                self.t_sign * other.t_sign, self.t_sign * other.t_shift + self.t_shift,
                                f"{self.name}*{other.name}")

    def pull_jet(self, immersion, s, t):
        """Jet of the composite immersion o self at (s, t)."""
        from .immersion import LegendrianJet
        s2, t2 = self(s, t)
        j = immersion(s2, t2)
        return LegendrianJet(j.X, self.s_sign * j.Xs, self.t_sign * j.Xt)

    def same_as(self, other: "CylinderSymmetry", period_s: float = 2 * np.pi) -> bool:
        ds = (self.s_shift - other.s_shift) / period_s
        return (self.s_sign == other.s_sign and self.t_sign == other.t_sign
                and abs(ds - round(ds)) < 1e-14 and abs(self.t_shift - other.t_shift) < 1e-14)


def cyl_translate(x: float) -> CylinderSymmetry:
    return CylinderSymmetry(1, 0.0, 1, float(x), f"T{x:g}")


def cyl_rotate(x: float) -> CylinderSymmetry:
    return CylinderSymmetry(1, float(x), 1, 0.0, f"S{x:g}")


def cyl_reflect_t(x: float = 0.0) -> CylinderSymmetry:
    """t -> 2x - t."""
    return CylinderSymmetry(1, 0.0, -1, 2.0 * x, f"T_{x:g}")


def cyl_reflect_s(x: float = 0.0) -> CylinderSymmetry:
    """s -> 2x - s."""
    return CylinderSymmetry(-1, 2.0 * x, 1, 0.0, f"S_{x:g}")


# ---------------------------------------------------------------------------
# checks


def equivariance_defect(immersion, amb: AmbientIsometry, dom: CylinderSymmetry, s, t,
                        tangents: bool = True) -> float:
    """sup |amb o X - X o dom| over the sample points (optionally including tangents)."""
    s, t = np.broadcast_arrays(np.asarray(s, float), np.asarray(t, float))
    lhs = amb.jet(immersion(s, t))
    rhs = dom.pull_jet(immersion, s, t)
    parts = [lhs.X - rhs.X]
    if tangents:
        parts += [lhs.Xs - rhs.Xs, lhs.Xt - rhs.Xt]
    return float(max(np.max(np.abs(p)) for p in parts))


def holomorphic_volume(u, v, w):
    return np.linalg.det(np.stack([u, v, w], axis=-1))


def kahler_form(u, v):
    return np.imag(np.sum(np.conj(u) * v, axis=-1))


def check_commutation_table(samples=(0.3, -1.1, 2.7), genus: int = 3) -> list[dict]:
    """Matrix-level group identities among the named isometries."""
    rows = []
    Tb, Sb, Spi = reflection_t(), reflection_s(), half_turn()
    J = AmbientIsometry(1j * np.eye(3), False, "J")
    R = polygon_rotation(genus)

    def add(name, lhs, rhs):
        rows.append({"identity": name, "defect": lhs.distance(rhs)})

    for x, y in itertools.product(samples, samples):
        T, Q = translation(x), twist(y)
        diag_family = [T, Q, Spi, Sb]
        for a, b in itertools.combinations(diag_family, 2):
            add(f"commute({a.name},{b.name})", a @ b, b @ a)
        for a in diag_family:
            add(f"commute({a.name},J)", a @ J, J @ a)
        add(f"Tb T~{x:g} Tb = T~{-x:g}", Tb @ translation(x) @ Tb, translation(-x))
        add(f"Tb Q~{y:g} Tb = Q~{-y:g}", Tb @ twist(y) @ Tb, twist(-y))
        add(f"Tb_{x:g} = T~{2 * x:g} Tb", reflection_t_at(x), translation(2 * x) @ Tb)
        add(f"T~{x:g} T~{y:g} = T~{x + y:g}", translation(x) @ translation(y), translation(x + y))
        add(f"S~{x:g} S~{y:g} = S~{x + y:g}", rotation(x) @ rotation(y), rotation(x + y))
    add("commute(Tb,Spi)", Tb @ Spi, Spi @ Tb)
    add("commute(Tb,Sb)", Tb @ Sb, Sb @ Tb)
    add("Tb J = -J Tb", Tb @ J, AmbientIsometry(-1j * np.eye(3)) @ Tb)
    add("S~pi = half turn", rotation(np.pi), Spi)
    for g in (genus, 5, 7):
        Rg = polygon_rotation(g)
        add(f"R~^{g} = Id", Rg.power(g), identity())
    add("Tb R Tb = R^-1", Tb @ R @ Tb, R.inverse())
    add("Sb R Sb = R", Sb @ R @ Sb, R)
    add("Spi R Spi = R^-1", Spi @ R @ Spi, R.inverse())
    for iso in (Tb, Sb, Spi):
        add(f"{iso.name}^2 = Id", iso @ iso, identity())
    return rows


def check_form_pullbacks(seed: int = 0, n: int = 16) -> list[dict]:
    """Pullbacks of the holomorphic volume form and the Kahler form."""
    rng = np.random.default_rng(seed)
    u, v, w = (rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3)) for _ in range(3))
    Om = holomorphic_volume(u, v, w)
    om = kahler_form(u, v)
    rows = []

    def add(name, value):
        rows.append({"identity": name, "defect": float(np.max(np.abs(value)))})

    Tb, Sb = reflection_t(), reflection_s()
    add("Tb* Omega = -conj Omega", holomorphic_volume(Tb(u), Tb(v), Tb(w)) + np.conj(Om))
    add("Tb* omega = -omega", kahler_form(Tb(u), Tb(v)) + om)
    add("Sb* Omega = -Omega", holomorphic_volume(Sb(u), Sb(v), Sb(w)) + Om)
    add("Sb* omega = omega", kahler_form(Sb(u), Sb(v)) - om)
    for iso in (translation(0.7), twist(-0.4), rotation(1.3), polygon_rotation(3), half_turn()):
        add(f"{iso.name}* Omega = Omega", holomorphic_volume(iso(u), iso(v), iso(w)) - Om)
        add(f"{iso.name}* omega = omega", kahler_form(iso(u), iso(v)) - om)
    return rows
