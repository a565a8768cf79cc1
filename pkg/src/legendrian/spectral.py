"""Discrete L = Delta + 6 on triangle meshes: cotangent stiffness, lumped mass,
symmetry-restricted Dirichlet eigenproblems, the neck model and one linear
correction step for the Lagrangian angle.

Sign conventions: K is the positive semidefinite cotangent stiffness, so the
discrete Laplacian is -M^{-1} K and L = Delta + 6 is the pencil (-K + 6 M_V, M),
M_V the mass weighted by the potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class AssemblyError(ValueError):
    pass


class SpectralError(RuntimeError):
    """Eigen-solver failure or an ambiguous near-kernel cut."""


# ---------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class DiscreteOperator:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    potential_mass: sp.csr_matrix
    boundary: np.ndarray
    faces: np.ndarray

    @property
    def n(self) -> int:
        return self.stiffness.shape[0]

    @property
    def L(self) -> sp.csr_matrix:
        """-K + M_V: the weak form of Delta + V."""
        return (-self.stiffness + self.potential_mass).tocsr()

    def apply(self, f) -> np.ndarray:
        """Pointwise (Delta + V) f with the lumped mass."""
        return (self.L @ f) / self.mass.diagonal()

    def laplacian(self, f) -> np.ndarray:
        return -(self.stiffness @ f) / self.mass.diagonal()

    def symmetry_defects(self) -> dict:
        K, M = self.stiffness, self.mass
        return {"stiffness": float(abs(K - K.T).max()) if K.nnz else 0.0,
                "mass": float(abs(M - M.T).max()) if M.nnz else 0.0,
                "row_sum": float(np.max(np.abs(K @ np.ones(self.n))))}


def _boundary_vertices(faces: np.ndarray) -> np.ndarray:
    e = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    u, c = np.unique(e, axis=0, return_counts=True)
    return np.unique(u[c == 1])


def assemble(vertices=None, faces=None, corners=None, potential=6.0, mass_weight=None,
             consistent: bool = False, min_area: float = 1e-14) -> DiscreteOperator:
    """Cotangent stiffness and mass of a triangle mesh in any R^d (complex input is read as R^2d).

    ``corners`` (F, 3, d) gives per-face corner coordinates, for meshes whose
    vertices are only defined up to a period (tori, unrolled cylinders).
    ``potential`` V is scalar or per vertex; ``mass_weight`` w rescales the mass
    vertexwise (for chi = rho^-2 g pass w = rho^-2 and V = 6 rho^2).
    """
    faces = np.asarray(faces, dtype=np.int64)
    if corners is None:
        v = np.asarray(vertices)
        if np.iscomplexobj(v):
            v = np.concatenate([v.real, v.imag], axis=-1)
        corners = v[faces]
        n = len(v)
    else:
        corners = np.asarray(corners, dtype=float)
        n = int(faces.max()) + 1 if vertices is None else len(vertices)
    e0 = corners[:, 2] - corners[:, 1]
    e1 = corners[:, 0] - corners[:, 2]
    e2 = corners[:, 1] - corners[:, 0]
    l0, l1, l2 = (np.sum(e * e, axis=-1) for e in (e0, e1, e2))
    d = np.sum(e1 * e2, axis=-1)
    area2 = np.sqrt(np.maximum(l1 * l2 - d * d, 0.0))
    bad = np.flatnonzero(area2 < 2 * min_area)
    if len(bad):
        raise AssemblyError(f"{len(bad)} degenerate triangles, first faces {bad[:10].tolist()}")
    # cot of the angle at corner k, opposite edge k
    cot0 = -np.sum(e1 * e2, axis=-1) / area2
    cot1 = -np.sum(e2 * e0, axis=-1) / area2
    cot2 = -np.sum(e0 * e1, axis=-1) / area2
    i, j, k = faces[:, 0], faces[:, 1], faces[:, 2]
    rows = np.concatenate([j, k, k, i, i, j])
    cols = np.concatenate([k, j, i, k, j, i])
    w = 0.5 * np.concatenate([cot0, cot0, cot1, cot1, cot2, cot2])
    K = sp.coo_matrix((-w, (rows, cols)), shape=(n, n)).tocsr()
    K = (K - sp.diags(np.asarray(K.sum(axis=1)).ravel())).tocsr()
    area = 0.5 * area2
    weight = np.ones(n) if mass_weight is None else np.broadcast_to(np.asarray(mass_weight, float), (n,))
    pot = np.broadcast_to(np.asarray(potential, float), (n,))
    if consistent:
        r = np.concatenate([i, j, k, i, j, j, k, k, i])
        c = np.concatenate([i, j, k, j, i, k, j, i, k])
        vals = np.concatenate([area / 6] * 3 + [area / 12] * 6)
        M0 = sp.coo_matrix((vals, (r, c)), shape=(n, n)).tocsr()
        sw = sp.diags(np.sqrt(weight))
        M = (sw @ M0 @ sw).tocsr()
        sv = sp.diags(np.sqrt(weight * np.abs(pot)) * np.sign(pot))
        MV = (sp.diags(np.sqrt(weight * np.abs(pot))) @ M0 @ sv).tocsr()
        MV = 0.5 * (MV + MV.T)
    else:
        m = np.bincount(faces.ravel(), weights=np.repeat(area / 3, 3), minlength=n)
        M = sp.diags(m * weight).tocsr()
        MV = sp.diags(m * weight * pot).tocsr()
    return DiscreteOperator(K, M, MV, _boundary_vertices(faces), faces)


# ---------------------------------------------------------------------------
# structured grids


def cylinder_grid(n_s: int, x, alternate: bool = True):
    """Faces and unrolled per-face corners (s, x) of the periodic grid S^1 x {x_k}.

    With ``alternate`` the diagonal of cell (i, k) alternates with i + k so that
    the pattern is invariant under s -> -s and x -> -x; eigenvalues converge but
    the lumped operator is not pointwise consistent there. Parallel diagonals
    give the same stencil at every vertex, which is what pointwise checks need."""
    x = np.asarray(x, dtype=float)
    n_x = len(x)
    idx = lambda i, k: (i % n_s) * n_x + k
    ds = 2 * np.pi / n_s
    faces, corners = [], []
    for i in range(n_s):
        for k in range(n_x - 1):
            a, b, c, d = idx(i, k), idx(i + 1, k), idx(i + 1, k + 1), idx(i, k + 1)
            pa, pb = (i * ds, x[k]), ((i + 1) * ds, x[k])
            pc, pd = ((i + 1) * ds, x[k + 1]), (i * ds, x[k + 1])
            if not alternate or (i + k) % 2 == 0:
                faces += [(a, b, c), (a, c, d)]
                corners += [(pa, pb, pc), (pa, pc, pd)]
            else:
                faces += [(a, b, d), (b, c, d)]
                corners += [(pa, pb, pd), (pb, pc, pd)]
    S, X = np.meshgrid(ds * np.arange(n_s), x, indexing="ij")
    return np.array(faces), np.array(corners), S.ravel(), X.ravel()


def surface_grid(immersion, n_s: int, t, alternate: bool = False):
    """Faces and per-face corners in R^6 of an immersed cylinder sampled on S^1 x {t_k}."""
    faces, corners, S, T = cylinder_grid(n_s, t, alternate)
    cs = corners[..., 0]
    ct = corners[..., 1]
    X = immersion(cs, ct).X
    return faces, np.concatenate([X.real, X.imag], axis=-1), S, T


# ---------------------------------------------------------------------------
# symmetry projectors


def _compose(p, q):
    return p[q]


class SymmetryProjector:
    """Average over the group generated by vertex permutations, weighted by a +-1 character."""

    def __init__(self, generators: dict, character: dict | None = None):
        character = character or {}
        gens = [(np.asarray(generators[k]), int(character.get(k, 1))) for k in generators]
        n = len(gens[0][0])
        ident = np.arange(n)
        elems = {ident.tobytes(): (ident, 1)}
        frontier = [(ident, 1)]
        while frontier:
            new = []
            for p, c in frontier:
                for g, cg in gens:
                    q = _compose(g, p)
                    key = q.tobytes()
                    if key in elems:
                        if elems[key][1] != c * cg:
                            raise ValueError("character is not a homomorphism on the generated group")
                        continue
                    elems[key] = (q, c * cg)
                    new.append((q, c * cg))
            frontier = new
        self.elements = list(elems.values())
        self.n = n
        self.basis = self._basis()

    def is_invariant(self, mask) -> bool:
        mask = np.asarray(mask, bool)
        return all(np.array_equal(mask[p], mask) for p, _ in self.elements)

    @property
    def order(self) -> int:
        return len(self.elements)

    def _basis(self) -> sp.csr_matrix:
        # column for orbit of w: c(v) = sum over g with g(v) = w of chi(g)
        P = np.stack([p for p, _ in self.elements])
        chi = np.array([c for _, c in self.elements], dtype=float)
        reps = P.min(axis=0)
        rows, cols, vals = [], [], []
        col_of = {}
        for v in range(self.n):
            w = reps[v]
            acc = float(np.sum(chi[P[:, v] == w]))
            if acc == 0.0:
                continue
            col = col_of.setdefault(w, len(col_of))
            rows.append(v)
            cols.append(col)
            vals.append(acc)
        B = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, len(col_of))).tocsc()
        norms = np.sqrt(np.asarray(B.multiply(B).sum(axis=0)).ravel())
        return (B @ sp.diags(1.0 / norms)).tocsr()

    def matrix(self) -> sp.csr_matrix:
        return (self.basis @ self.basis.T).tocsr()

    def apply(self, f) -> np.ndarray:
        return self.basis @ (self.basis.T @ f)

    def check(self, op: DiscreteOperator) -> dict:
        P = self.matrix()
        out = {"idempotent": float(abs(P @ P - P).max()) if P.nnz else 0.0}
        for name, A in (("stiffness", op.stiffness), ("mass", op.mass)):
            C = P @ A - A @ P
            out[name] = float(abs(C).max()) if C.nnz else 0.0
        return out


# ---------------------------------------------------------------------------
# eigenproblems


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def near_zero(self, gap_ratio: float = 10.0) -> int:
        """Size of the cluster at 0: the first k with |lambda_{k+1}| >= gap_ratio |lambda_k|."""
        a = np.abs(self.values)
        for k in range(1, len(a)):
            if a[k] >= gap_ratio * a[k - 1]:
                return k
        return 0


def _interior(op: DiscreteOperator, region) -> np.ndarray:
    """Region vertices not adjacent to the outside and not on the mesh boundary."""
    region = np.asarray(region, bool)
    F = op.faces
    touches_out = np.zeros(op.n, bool)
    bad_face = ~region[F].all(axis=1)
    touches_out[F[bad_face].ravel()] = True
    inside = region & ~touches_out
    inside[op.boundary] = False
    return inside


def dirichlet_eigs(op: DiscreteOperator, region=None, projector: SymmetryProjector | None = None,
                   count: int = 6, sigma: float = 0.0, pencil: str = "L") -> EigenResult:
    """Eigenpairs of (Delta + V) (or -Delta with pencil='K') nearest sigma, Dirichlet outside ``region``."""
    region = np.ones(op.n, bool) if region is None else np.asarray(region, bool)
    inside = _interior(op, region)
    A_full = op.L if pencil == "L" else op.stiffness
    B = sp.eye(op.n, format="csr")[:, np.flatnonzero(inside)]
    if projector is not None:
        if not projector.is_invariant(region):
            raise ValueError("region is not invariant under the symmetry group")
        B = projector.basis
        keep = np.asarray(abs(B[~inside]).sum(axis=0)).ravel() == 0
        B = B[:, np.flatnonzero(keep)]
    A = (B.T @ A_full @ B).tocsc()
    M = (B.T @ op.mass @ B).tocsc()
    dim = A.shape[0]
    if dim == 0:
        raise SpectralError("no interior degrees of freedom")
    if dim <= max(200, count + 2):
        from scipy.linalg import eigh
        w, V = eigh(A.toarray(), M.toarray())
    else:
        try:
            w, V = spla.eigsh(A, k=min(count, dim - 2), M=M, sigma=sigma, which="LM", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise SpectralError("eigen-solver did not converge") from exc
    order = np.argsort(np.abs(w - sigma))[:count]
    w, V = w[order], V[:, order]
    res = np.linalg.norm(A @ V - (M @ V) * w, axis=0) / np.linalg.norm(M @ V, axis=0)
    return EigenResult(w, np.asarray(B @ V), res)


def mass_overlap(op: DiscreteOperator, u, v) -> float:
    Mu, Mv = op.mass @ u, op.mass @ v
    return float(abs(u @ Mv) / math.sqrt((u @ Mu) * (v @ Mv)))


def _interior_solve(op: DiscreteOperator, values, free) -> np.ndarray:
    """u with u = values off ``free`` and (L u)_i = 0 for i in ``free``."""
    free = np.asarray(free, bool)
    u = np.asarray(values, dtype=float).copy()
    L = op.L.tocsr()
    I, Bd = np.flatnonzero(free), np.flatnonzero(~free)
    rhs = -(L[I][:, Bd] @ u[Bd])
    u[I] = spla.spsolve(L[I][:, I].tocsc(), rhs)
    return u


# ---------------------------------------------------------------------------
# the neck model


@dataclass
class NeckSolution:
    """Dirichlet solution of L_chi V = 0 on a neck of chi-length ell.

    ``x`` is the distance from the circle C+ where the data is 1 (or cos 2s);
    the data vanishes on C-. ``profile`` is V on s = 0 (for cos 2s data the
    cos 2s coefficient), ``reference`` the same for Delta_chi alone.
    """

    ell: float
    harmonic: str
    x: np.ndarray
    profile: np.ndarray
    reference: np.ndarray
    constants: dict
    decay_rate: float
    lowest_eigenvalue: float

    @property
    def c(self) -> float:
        """The lowest Dirichlet eigenvalue of -L_chi times ell^2."""
        return self.lowest_eigenvalue * self.ell**2


def neck_length(p, b: float) -> float:
    """ell = 2 p_tau - 2 b for a neck ending at distance b from both sphere centres."""
    return 2.0 * p.p_tau - 2.0 * b


def neck_model(ell: float, p, harmonic: str = "const", n_s: int = 32, dx: float = 0.05,
               with_potential: bool = True) -> NeckSolution:
    """L_chi = Delta_chi + 6 rho^2 on S^1 x [0, ell], centred at the waist of y_tau.

    The coordinates are the flat ones of chi = ds^2 + dt^2 along the profile of
    ``p``; ``with_potential=False`` drops 6 rho^2 so that the closed forms are exact.
    """
    from .profile import conformal_factor

    if ell <= 0:
        raise ValueError("neck length must be positive")
    if harmonic not in ("const", "cos2s"):
        raise ValueError("harmonic is 'const' or 'cos2s'")
    n_x = max(8, int(math.ceil(ell / dx)))
    x = np.linspace(0.0, ell, n_x + 1)
    faces, corners, S, Xv = cylinder_grid(n_s, x)
    y = conformal_factor(p, p.p_tau + Xv - 0.5 * ell) if with_potential else np.zeros_like(Xv)
    op = assemble(faces=faces, corners=corners, vertices=Xv, potential=6.0 * y)
    near = np.isclose(Xv, 0.0)
    far = np.isclose(Xv, ell)
    data = np.zeros_like(Xv)
    data[near] = 1.0 if harmonic == "const" else np.cos(2 * S[near])
    free = ~(near | far)
    V = _interior_solve(op, data, free)
    flat = V if not with_potential else _interior_solve(
        assemble(faces=faces, corners=corners, vertices=Xv, potential=0.0), data, free)

    xbar = ell - x
    rows = V.reshape(n_s, n_x + 1)
    if harmonic == "const":
        profile = rows.mean(axis=0)
        reference = xbar / ell
        mid = (x >= 0.25 * ell) & (x <= 0.75 * ell)
        A = np.stack([xbar[mid] / ell, x[mid] / ell], -1)
        (A1, A1m), *_ = np.linalg.lstsq(A, profile[mid], rcond=None)
        constants = {"A1": float(A1), "A1_minus": float(A1m)}
        rate = math.nan
    else:
        c2 = np.cos(2 * S.reshape(n_s, n_x + 1)[:, 0])
        profile = (c2 @ rows) / (c2 @ c2)
        reference = np.sinh(2 * xbar) / np.sinh(2 * ell)
        mid = (x >= 0.25 * ell) & (x <= 0.75 * ell)
        flat_profile = (c2 @ flat.reshape(n_s, n_x + 1)) / (c2 @ c2)
        # against the flat solution on the same grid, so that mesh error cancels
        constants = {"A2": float(np.median(profile[mid] / flat_profile[mid])),
                     "A2_continuum": float(np.median(profile[mid] / reference[mid]))}
        rate = float(-np.polyfit(x[mid], np.log(np.abs(profile[mid])), 1)[0])
    eig = dirichlet_eigs(op, count=1, sigma=0.0)
    lowest = float(-eig.values[0])
    return NeckSolution(float(ell), harmonic, x, profile, reference, constants, rate, lowest)


# ---------------------------------------------------------------------------
# the linear correction step


@dataclass
class LinearStepReport:
    near_kernel: int
    eigenvalues: np.ndarray
    gap_ratio: float
    discrete_residual: float
    orthogonality: float


def least_squares_step(op: DiscreteOperator, projector: SymmetryProjector, rhs, count: int = 12,
                       gap_ratio: float = 10.0) -> tuple[np.ndarray, LinearStepReport]:
    """f in the symmetric subspace with (Delta + V) f = rhs up to the near-kernel.

    Near-kernel directions (the eigen-cluster at 0, cut where consecutive |lambda|
    jump by ``gap_ratio``) are removed from both rhs and f. With no cut among the
    ``count`` smallest eigenvalues the kernel is taken empty if |lambda| >= 1
    throughout, and SpectralError is raised otherwise.
    """
    rhs = np.asarray(rhs, dtype=float)
    B = projector.basis
    A = (B.T @ op.L @ B).tocsc()
    M = (B.T @ op.mass @ B).tocsc()
    b = B.T @ (op.mass @ rhs)
    if not np.any(b):
        return np.zeros(op.n), LinearStepReport(0, np.zeros(0), math.inf, 0.0, 0.0)
    eig = dirichlet_eigs(op, None, projector, count=count)
    k = eig.near_zero(gap_ratio)
    a = np.abs(eig.values)
    if k == 0 and a[0] < 1.0:
        raise SpectralError(f"near-kernel cut ambiguous: |lambda| = {a[:4]}")
    ratio = float(a[k] / a[k - 1]) if k else math.inf
    W = B.T @ eig.vectors[:, :k]
    G = W.T @ (M @ W)

    def deflate(v, Mv):
        return v - W @ np.linalg.solve(G, W.T @ Mv) if k else v

    b2 = b - (M @ W) @ np.linalg.solve(G, W.T @ b) if k else b
    c = spla.spsolve(A, b2)
    c = deflate(c, M @ c)
    f = B @ c
    res = B.T @ (op.L @ f) - b
    # residual against the retained subspace, measured in the dual (mass) pairing
    res = deflate(spla.spsolve(M, res), res)
    orth = float(np.max(np.abs(res)) / max(np.max(np.abs(spla.spsolve(M, b))), 1e-300))
    disc = float(np.max(np.abs(op.apply(f) - projector.apply(rhs))))
    return f, LinearStepReport(k, eig.values, ratio, disc, orth)


def _sphere_coords(x):
    """(s, t) of points on the round S^2 in the cylinder coordinates of the inclusion."""
    x = np.asarray(x, dtype=float)
    return np.arctan2(-x[..., 2], x[..., 1]), np.arctanh(np.clip(x[..., 0], -1 + 1e-15, 1 - 1e-15))


def _inclusion_points(s, t):
    return np.stack([np.tanh(t), np.cos(s) / np.cosh(t), -np.sin(s) / np.cosh(t)], -1)


def vertex_fields(surf, mesh, f):
    """Smooth fields (chart M_1, sphere) reproducing the vertex values of a symmetric f.

    On M_1 a periodic cubic spline through the rings; on M_0 and the parts of
    the cylinders that still lie on the round sphere a quintic radial basis
    interpolant in R^3; the two are blended just past the holes.
    """
    from scipy.interpolate import RBFInterpolator, RectBivariateSpline
    from scipy.spatial import cKDTree

    from .glue import CutoffSpec
    from .perturb import ScalarField

    m = surf.model
    f = np.asarray(f, dtype=float)
    sel = np.flatnonzero(mesh.chart == 1)
    rings = np.unique(mesh.t[sel])
    n_s = len(sel) // len(rings)
    grid = f[sel].reshape(len(rings), n_s)
    sph = np.flatnonzero(mesh.chart == 0)
    P = mesh.Y[sph].real
    tree = cKDTree(P)
    sg = 2 * np.pi * np.arange(n_s) / n_s
    end = _inclusion_points(sg, np.full(n_s, m.a))
    first = f[sph[tree.query(end)[1]]]
    end[:, 0] *= -1
    last = f[sph[tree.query(end)[1]]]
    t_all = np.concatenate([[m.a], rings, [2 * m.t_mid - m.a]])
    vals = np.vstack([first, grid, last])
    pad = 4
    s_ext = np.concatenate([sg[-pad:] - 2 * np.pi, sg, sg[:pad] + 2 * np.pi])
    spline = RectBivariateSpline(t_all, s_ext, np.hstack([vals[:, -pad:], vals, vals[:, :pad]]), kx=3, ky=3, s=0)

    round_end = m.gluing_window[0] - 0.02
    cyl = mesh.chart > 0
    onsphere = cyl & ((mesh.t < round_end + 0.01) | (mesh.t > 2 * m.t_mid - round_end - 0.01))
    pts = np.concatenate([P, mesh.Y[onsphere].real])
    rbf = RBFInterpolator(pts, np.concatenate([f[sph], f[onsphere]]), kernel="quintic", degree=2)
    w = CutoffSpec(m.a + 0.01, round_end)

    def on_sphere(s, t):
        return rbf(_inclusion_points(s.ravel(), t.ravel())).reshape(s.shape)

    def on_cylinder(s, t):
        ww = w(t)
        out = (1 - ww) * on_sphere(s, t) if np.any(ww < 1) else 0.0
        sp_ = spline.ev(np.clip(t, m.a, 2 * m.t_mid - m.a), np.mod(s, 2 * np.pi))
        return ww * sp_ + out

    return ScalarField.from_function(on_cylinder), ScalarField.from_function(on_sphere)


def solve_linear_step(surf, n_s: int = 32, fine_per_window: int = 12, damping=(1.0, 0.5, 0.25, 0.125, 0.0625),
                      steps: int = 8, gap_ratio: float = 10.0):
    """One damped least-squares step (Delta_g + 6) f = -theta and its effect on theta.

    f is solved on the mesh in the class odd under T and invariant under R, S, S_pi,
    then carried by smooth interpolants and the Hamiltonian flow. theta is
    sampled on a fundamental domain of the symmetry group (the rings of M_1 with
    s in [0, pi/2] up to the middle circle, and the vertices of M_0). The first
    damping factor that keeps the flow in the tubular neighbourhood and lowers
    sup |theta| is taken; the report lists every attempt.
    """
    from .glue import build_mesh
    from .immersion import lagrangian_angle
    from .perturb import PerturbationTooLargeError, perturb_points

    mesh = build_mesh(surf, n_s, fine_per_window=fine_per_window)
    op = assemble(mesh.Y, mesh.faces)
    proj = SymmetryProjector(mesh.generators, {"T": -1})
    f, step = least_squares_step(op, proj, -mesh.theta, gap_ratio=gap_ratio)
    field_cyl, field_sph = vertex_fields(surf, mesh, f)

    m = surf.model
    on1 = (mesh.chart == 1) & (mesh.s <= np.pi / 2 + 1e-9) & (mesh.t <= m.t_mid + 1e-9)
    sph = mesh.chart == 0
    s0, t0 = _sphere_coords(mesh.Y[sph].real)
    u = np.concatenate([mesh.s[on1], s0])
    v = np.concatenate([mesh.t[on1], t0])
    chart = np.concatenate([np.zeros(on1.sum(), int), np.ones(sph.sum(), int)])
    pre = np.concatenate([mesh.theta[on1], mesh.theta[sph]])
    pre_sup = float(np.max(np.abs(pre)))
    attempts = []
    accepted = None
    for lam in damping:
        try:
            jet, flow = perturb_points([surf.cylinder, surf.X0], [field_cyl.scaled(lam), field_sph.scaled(lam)],
                                       chart, u, v, steps=steps)
        except PerturbationTooLargeError as exc:
            attempts.append({"damping": lam, "status": "outside tubular neighbourhood", "detail": str(exc)})
            continue
        post = lagrangian_angle(jet)
        post_sup = float(np.max(np.abs(post)))
        attempts.append({"damping": lam, "status": "ok", "post_sup": post_sup,
                         "worst_t": float(v[np.argmax(np.abs(post))]), "drift": flow.drift,
                         "max_distance": flow.max_distance})
        if post_sup < pre_sup:
            accepted = attempts[-1]
            break
    report = {
        "vertices": mesh.n_vertices,
        "near_kernel": step.near_kernel,
        "near_kernel_eigenvalues": [float(x) for x in step.eigenvalues],
        "gap_ratio": step.gap_ratio,
        "discrete_residual": step.discrete_residual,
        "orthogonality": step.orthogonality,
        "f_sup": float(np.max(np.abs(f))),
        "theta_sup_before": pre_sup,
        "theta_sup_after": accepted["post_sup"] if accepted else math.nan,
        "damping": accepted["damping"] if accepted else math.nan,
        "reduction_factor": accepted["post_sup"] / pre_sup if accepted else math.inf,
        "attempts": attempts,
    }
    return f, report


# ---------------------------------------------------------------------------
# suites on the sphere and the glued surface


def sphere_generators(points, genus: int = 3) -> dict:
    """Vertex permutations of R, T, S, S_pi on a symmetric mesh of the real S^2."""
    from scipy.spatial import cKDTree

    from .symmetry import polygon_rotation

    P = np.asarray(points, dtype=float)
    maps = {"R": polygon_rotation(genus).matrix.real, "T": np.diag([-1.0, 1, 1]),
            "S": np.diag([1.0, 1, -1]), "S_pi": np.diag([1.0, -1, -1])}
    tree = cKDTree(P)
    out = {}
    for name, A in maps.items():
        d, idx = tree.query(P @ A.T)
        if np.max(d) > 1e-9:
            raise ValueError(f"mesh is not invariant under {name}")
        out[name] = idx
    return out


def sphere_spectrum(h: float, genus: int = 3) -> dict:
    """-Delta on a symmetric S^2 mesh: the cluster at 6, its neighbours, and the
    smallest |lambda| of Delta + 6 on functions odd under T and invariant under R, S, S_pi."""
    from .glue import sphere_mesh

    P, F = sphere_mesh(genus, h)
    op = assemble(P, F)
    eig = dirichlet_eigs(op, count=9, sigma=6.0, pencil="K")
    w = np.sort(eig.values)
    cluster = np.sort(w[np.argsort(np.abs(w - 6.0))[:5]])
    others = np.setdiff1d(w, cluster)
    proj = SymmetryProjector(sphere_generators(P, genus), {"T": -1})
    sym = dirichlet_eigs(op, projector=proj, count=4)
    return {
        "vertices": len(P),
        "cluster": [float(x) for x in cluster],
        "cluster_error": float(np.max(np.abs(cluster - 6.0))),
        "separation": float(np.min(np.abs(others[:, None] - cluster[None, :]))) if len(others) else math.inf,
        "symmetric_min_abs": float(np.min(np.abs(sym.values))),
        "symmetric_eigenvalues": [float(x) for x in sym.values],
        "projector_defects": proj.check(op),
        "residual": float(max(eig.residuals.max(), sym.residuals.max())),
    }


def standard_region(mesh, model, n: int) -> np.ndarray:
    """Vertices of the extended standard region about S[n]: within p_bar of its centre.

    n = 0 is the sphere M_0 with its collars on every cylinder; n >= 1 lies on M_1."""
    if n == 0:
        u = np.where(mesh.chart > 0, model.fold(np.nan_to_num(mesh.t)), 0.0)
        return (mesh.chart == 0) | (u < model.p_bar)
    return (mesh.chart == 1) & (np.abs(mesh.t - 2 * n * model.p_bar) < model.p_bar)


def approximate_kernel_suite(surf, n_s: int = 32, n_values=(1, 2, 3), count: int = 6) -> dict:
    """Dirichlet spectra of Delta + 6 on the extended standard regions.

    S~[0] in the class odd under T (no eigenvalue expected in [-1, 1]); S~[n']
    in the class even under S and S_pi, with L^2 overlaps against f^_1, f^_2."""
    from .glue import build_mesh
    from .perturb import normalized_kernel_functions

    mesh = build_mesh(surf, n_s)
    m = surf.model
    op = assemble(mesh.Y, mesh.faces)
    full = SymmetryProjector(mesh.generators, {"T": -1})
    r0 = dirichlet_eigs(op, standard_region(mesh, m, 0), full, count=count)
    out = {"vertices": mesh.n_vertices, "projector_defects": full.check(op),
           "standard_0": spectrum_report("S~[0]", "odd T; even R, S, S_pi", r0)}
    out["standard_0"]["min_abs"] = float(np.min(np.abs(r0.values)))
    f1, f2 = normalized_kernel_functions(mesh)
    even = SymmetryProjector({k: mesh.generators[k] for k in ("S", "S_pi")})
    out["standard_n"] = []
    for n in n_values:
        reg = standard_region(mesh, m, n)
        r = dirichlet_eigs(op, reg, even, count=count)
        k = r.near_zero()
        ov = {name: [mass_overlap(op, r.vectors[:, i], np.where(reg, fh, 0.0)) for i in range(len(r.values))]
              for name, fh in (("f1", f1), ("f2", f2))}
        rep = spectrum_report(f"S~[{n}]", "even S, S_pi", r, ov)
        rep["best_overlap"] = {name: float(max(v)) for name, v in ov.items()}
        out["standard_n"].append(rep)
    return out


# ---------------------------------------------------------------------------
# reports and exports


def spectrum_report(region: str, symmetry_class: str, result: EigenResult, overlaps=None) -> dict:
    out = {"region": region, "symmetry_class": symmetry_class,
           "eigenvalues": [float(x) for x in result.values],
           "residuals": [float(x) for x in result.residuals],
           "near_zero": result.near_zero()}
    if overlaps is not None:
        out["overlaps"] = {k: [float(x) for x in v] for k, v in overlaps.items()}
    return out


def write_triplets(matrix, path) -> None:
    """Coordinate format: 'row col value' per nonzero, zero-based, sorted."""
    A = sp.coo_matrix(matrix)
    order = np.lexsort((A.col, A.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"% {A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i in order:
            fh.write(f"{A.row[i]} {A.col[i]} {A.data[i]:.17g}\n")
