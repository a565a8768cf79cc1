import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from legendrian.glue import (
    CutoffSpec,
    GeometricError,
    GluedSurface,
    SurfaceModel,
    UnsupportedGenusError,
    build_initial_surface,
    build_mesh,
    cutoff,
    decompose,
    holed_sphere_mesh,
    lagrangian_angle_field,
    legendrian_join,
    mesh_equivariance_defects,
    metric_equivalence_report,
    normalization_constants,
    smoothstep,
    sphere_inclusion,
    twisting_scaling_report,
    write_angle_csv,
    write_obj,
    write_ply,
    zeta_params,
)
from legendrian.immersion import TorusImmersion, compose, lagrangian_angle
from legendrian.perturb import f_q, f_t
from legendrian.profile import ParameterDomainError
from legendrian.symmetry import AmbientIsometry, polygon_rotation, translation, twist

X0 = sphere_inclusion()


# ---------------------------------------------------------------- cut-off

def test_cutoff_basic():
    c = CutoffSpec(1.0, 2.0)
    assert c(0.5) == 0.0 and c(1.0) == 0.0 and c(2.0) == 1.0 and c(3.0) == 1.0
    assert c(1.5) == pytest.approx(0.5, abs=1e-16)
    assert c(1.4) == 0.0 + cutoff(c, 1.4)
    assert c(4 / 3 - 1e-12) == 0.0 and c(5 / 3 + 1e-12) == 1.0
    with pytest.raises(ValueError):
        CutoffSpec(1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-5, 5), w=st.floats(0.1, 4), x=st.floats(-10, 10))
def test_cutoff_partition_and_monotone(a, w, x):
    c = CutoffSpec(a, a + w)
    assert c(x) + c.swapped()(x) == pytest.approx(1.0, abs=1e-15)
    assert 0.0 <= c(x) <= 1.0
    assert c(x + 1e-3) >= c(x) - 1e-15
    assert smoothstep(x) - 0.5 == pytest.approx(-(smoothstep(-x) - 0.5), abs=1e-15)


def test_cutoff_derivatives():
    c = CutoffSpec(0.0, 1.0)
    x = np.linspace(-0.2, 1.2, 701)
    h = 1e-6
    for k in (1, 2, 3):
        fd = (c(x + h, k - 1) - c(x - h, k - 1)) / (2 * h)
        assert np.max(np.abs(fd - c(x, k))) < 1e-4 * 18**k
    # derivatives up to order three vanish at the ends of the transition
    for k in (1, 2, 3):
        assert abs(smoothstep(1.0 - 1e-9, k)) < 1e-6 and abs(smoothstep(-1.0 + 1e-9, k)) < 1e-6
    with pytest.raises(ValueError):
        smoothstep(0.0, 4)


# ---------------------------------------------------------------- join

S = np.linspace(0, 2 * np.pi, 25)[:, None]
T = np.linspace(0.6, 3.4, 57)[None, :]


def test_join_identical_inputs():
    ti = TorusImmersion.from_tau(0.03)
    J = legendrian_join(ti, ti, 0.5, 1.5)
    a, b = J(S, T), ti(S, T)
    assert np.max(np.abs(a.X - b.X)) < 1e-14
    assert np.max(np.abs(a.Xt - b.Xt)) < 1e-13


@pytest.mark.parametrize("iso", [translation(1e-3), twist(1e-3), translation(0.05) @ twist(-0.04)])
def test_join_sphere_to_moved_sphere(iso):
    X1 = compose(iso, X0)
    J = legendrian_join(X0, X1, 1.0, 2.0)
    j = J(S, T)
    assert np.max(np.abs(j.contact_defect())) < 1e-7
    assert np.max(np.abs(j.lagrangian_defect())) < 1e-7
    assert np.max(j.norm_defect()) < 1e-14
    lo, hi = T <= J.a1p, T >= J.a2p
    assert np.max(np.abs(j.X - X0(S, T).X)[np.broadcast_to(lo, j.X.shape[:2])]) == 0.0
    assert np.max(np.abs(j.X - X1(S, T).X)[np.broadcast_to(hi, j.X.shape[:2])]) == 0.0
    h = 1e-6
    assert np.max(np.abs((J(S, T + h).X - J(S, T - h).X) / (2 * h) - j.Xt)) < 1e-6
    assert np.max(np.abs((J(S + h, T).X - J(S - h, T).X) / (2 * h) - j.Xs)) < 1e-6


def test_join_second_differences_have_no_jumps():
    J = legendrian_join(X0, compose(translation(1e-3), X0), 1.0, 2.0)
    s = np.full(4001, 0.4)
    t = np.linspace(1.0, 2.0, 4001)
    X = J(s, t).X
    d2 = np.abs(np.diff(X, 2, axis=0)).max(axis=1)
    # interpolation error of a smooth curve: second differences vary slowly
    assert np.max(np.abs(np.diff(d2))) < 1e-6


def test_potentials_euler_and_gradient():
    X1 = compose(translation(0.02) @ twist(0.01), X0)
    J = legendrian_join(X0, X1, 1.0, 2.0)
    s = np.array([0.3, 1.7, 4.0])
    t = np.array([1.4, 1.5, 1.6])
    q = X0(s, t).X.real * np.array([[1.0], [1.3], [0.8]])
    pots = J.potentials(q, s, t)
    h = 1e-6
    for i, (f, G, H, _) in enumerate(pots):
        # Euler: f = <q, grad f>/2, grad f = Im of the cone point over q
        assert np.max(np.abs(H - np.swapaxes(H, 1, 2))) < 1e-10
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fp = J.potentials(q + e, s, t)[i][0]
            fm = J.potentials(q - e, s, t)[i][0]
            assert np.max(np.abs((fp - fm) / (2 * h) - G[:, k])) < 1e-8
            Gp = J.potentials(q + e, s, t)[i][1]
            Gm = J.potentials(q - e, s, t)[i][1]
            assert np.max(np.abs((Gp - Gm) / (2 * h) - H[:, :, k])) < 1e-7
        # degree-2 homogeneity
        f2 = J.potentials(2 * q, s, t)[i][0]
        assert np.max(np.abs(f2 - 4 * f)) < 1e-13


def test_join_frame():
    U = AmbientIsometry(polygon_rotation(3).matrix)
    X1 = compose(translation(1e-3), X0)
    J = legendrian_join(X0, X1, 1.0, 2.0)
    JU = legendrian_join(compose(U, X0), compose(U, X1), 1.0, 2.0, frame=U)
    assert np.max(np.abs(JU(S, T).X - U(J(S, T).X))) < 1e-13


def test_join_graph_condition_error():
    with pytest.raises(GeometricError):
        legendrian_join(X0, compose(translation(3.0), X0), 1.0, 2.0)(S, T)
    with pytest.raises(ValueError):
        legendrian_join(X0, X0, 2.0, 1.0)


# ---------------------------------------------------------------- model

def test_model_validation():
    with pytest.raises(UnsupportedGenusError):
        SurfaceModel.desk(4, 3)
    with pytest.raises(UnsupportedGenusError):
        build_initial_surface(3, 4)
    with pytest.raises(GeometricError):
        SurfaceModel.desk(5, 3)
    with pytest.raises(GeometricError):
        SurfaceModel.asymptotic(3, 3)


def test_asymptotic_layout_constants():
    g = 3
    delta = math.pi / (100 * g)
    with pytest.raises(GeometricError) as err:
        SurfaceModel.asymptotic(g, 3)
    assert "p_bar" in str(err.value)
    a = math.acosh(1 / math.sin(delta)) - 1
    assert 1 / math.cosh(a + 1) == pytest.approx(math.sin(delta))


@pytest.fixture(scope="module")
def model():
    return SurfaceModel.desk(3, 3)


@pytest.fixture(scope="module")
def surf(model):
    return GluedSurface(model, zeta_params(model))


def test_regions(model):
    kind, idx = model.region_of(np.array([model.a, 2 * model.p_bar, model.p_bar, model.t_mid,
                                          2 * model.t_mid - 2 * model.p_bar]))
    assert list(kind) == [0, 0, 1, 1, 0]
    assert list(idx) == [0, 1, 1, 2 * model.m_bar, 1]
    assert model.breakpoints()[0] == model.a and model.breakpoints()[-1] == model.t_mid


def test_normalization_constants(model):
    c1, c2 = normalization_constants(model)
    s = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    X = TorusImmersion(model.closing)(s, np.full_like(s, 2 * model.p_bar + model.b)).X
    assert np.max(np.abs(c1 * f_t(X) - 1)) < 1e-12
    assert np.max(np.abs(c2 * f_q(X) - np.cos(2 * s))) < 1e-12


def test_zeta_params(model):
    z0 = zeta_params(model)
    assert z0.tau == model.tau_bar and z0.alpha == 0.0
    z = zeta_params(model, 0.5 * model.tau_bar, -0.5 * model.tau_bar)
    from legendrian.immersion import rotation_period_heuman
    from legendrian.profile import solve_params
    assert model.m * (model.closing.p_hat - rotation_period_heuman(solve_params(z.tau))) == pytest.approx(z.zeta1p, abs=1e-10)
    assert (1 - model.m) * z.alpha == pytest.approx(z.zeta2p, abs=1e-15)
    # empirical constant in |tau - tau_bar| <= C c tau_bar^2
    assert abs(z.tau - model.tau_bar) / (0.5 * model.tau_bar**2) < 10
    with pytest.raises(ParameterDomainError):
        zeta_params(model, 2 * model.tau_bar, 0.0)


# ---------------------------------------------------------------- surface

def test_surface_legendrian_and_symmetric_extension(surf, model):
    s = np.linspace(0, 2 * np.pi, 17)[:, None]
    t = np.linspace(model.a, model.t_end, 1501)[None, :]
    j = surf.cylinder(s, t)
    assert np.max(np.abs(j.contact_defect())) < 1e-7
    assert np.max(j.norm_defect()) < 1e-13
    for d in (0.05, 0.5):
        a, b = surf.half_cylinder(s, model.t_mid + d), surf.cylinder(s, model.t_mid + d)
        assert np.max(np.abs(a.X - b.X)) < 1e-10
        assert np.max(np.abs(a.Xt - b.Xt)) < 1e-10
    # the ends are the boundary circles of the holed sphere
    x = X0(s, model.a).X
    assert np.max(np.abs(surf.cylinder(s, model.a).X - x)) == 0.0


def test_sphere_chart(surf):
    x = np.random.default_rng(1).normal(size=(50, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    j = surf.sphere(x)
    assert np.max(np.abs(lagrangian_angle(j))) == 0.0
    assert np.max(np.abs(j.contact_defect())) == 0.0


def test_angle_decomposition_zero_zeta(surf):
    d = decompose(surf, lagrangian_angle_field(surf, n_s=16))
    assert d["sup"]["dislocation"] == 0.0
    assert d["sup"]["twisting"] == 0.0
    assert d["sup"]["gluing"] > 0.1
    assert d["outside_mass"] < 1e-9
    assert d["sum_defect"] == 0.0


def test_angle_decomposition_nonzero_zeta(model):
    z = zeta_params(model, 1e-6, 1e-6)
    sf = GluedSurface(model, z)
    d = decompose(sf, lagrangian_angle_field(sf, n_s=16))
    assert d["sup"]["dislocation"] > 0 and d["sup"]["twisting"] > 0
    assert d["outside_mass"] < 1e-9


def test_twisting_linear_in_alpha():
    rows = twisting_scaling_report(0.05, [4e-4, 2e-4, 1e-4])
    r = [row["ratio"] for row in rows]
    assert max(r) / min(r) < 1.1


def test_chi_on_necks(model):
    z = zeta_params(model, 0.3 * model.tau_bar, 0.0)
    sf = GluedSurface(model, z)
    s = np.linspace(0, 2 * np.pi, 8)[:, None]
    t = np.linspace(3 * model.p_bar - 0.05, 3 * model.p_bar + 0.05, 5)[None, :]
    gss, gst, gtt = sf.metric(1, s, t, "chi")
    scale = sf.twisted.p_tau / model.p_bar
    assert np.max(np.abs(gss - 1)) < 1e-12
    assert np.max(np.abs(gtt - scale**2)) < 1e-12
    assert np.max(np.abs(gst)) < 1e-12
    with pytest.raises(ValueError):
        sf.metric(1, s, t, "h")


def test_metric_equivalence(surf, model):
    for z, lo in (((0.5 * model.tau_bar, 0.0), 0.8), ((0.0, 1e-3), 0.95)):
        other = GluedSurface(model, zeta_params(model, *z))
        for kind in ("g", "chi"):
            rep = metric_equivalence_report(surf, other, 1, kind)
            assert lo < rep["min_ratio"] <= rep["max_ratio"] < 1 / lo


# ---------------------------------------------------------------- mesh

def test_holed_sphere_mesh(model):
    P, F = holed_sphere_mesh(3, model.a, 16)
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
    V, E = len(P), len(np.unique(np.sort(np.concatenate([F[:, :2], F[:, 1:], F[:, ::2]]), axis=1), axis=0))
    assert V - E + len(F) == 2 - 6  # sphere minus six discs
    with pytest.raises(ValueError):
        holed_sphere_mesh(3, model.a, 18)


@pytest.fixture(scope="module")
def mesh(surf):
    return build_mesh(surf, 16)


def test_mesh_topology(mesh):
    assert mesh.euler_characteristic() == -4
    mesh.check_manifold()
    assert mesh.positions6().shape == (mesh.n_vertices, 6)


def test_mesh_equivariance(mesh):
    d = mesh_equivariance_defects(mesh, 3)
    assert set(d) == {"R", "T", "S", "S_pi"}
    assert max(d.values()) < 1e-7
    assert mesh.contact_defect.max() < 1e-7


def test_orbits(mesh, model):
    sizes = mesh.orbit_sizes()
    assert np.all(24 % sizes == 0)
    # the central necks are mapped to themselves by T
    central = (mesh.region_kind == 1) & (mesh.region_index == 2 * model.m_bar)
    assert central.any()
    assert np.all(central[mesh.generators["T"][central]])
    # region labels are invariant under every generator
    for perm in mesh.generators.values():
        assert np.array_equal(mesh.region_kind[perm], mesh.region_kind)
        assert np.array_equal(mesh.region_index[perm], mesh.region_index)


def test_faces_cover_regions_once(mesh, model):
    assert len(mesh.face_region) == len(mesh.faces)
    kinds = set(map(tuple, mesh.face_region))
    assert (1, 2 * model.m_bar) in kinds and (0, 0) in kinds
    cyl = mesh.chart[mesh.faces].min(axis=1) > 0
    fk = mesh.face_region[:, 0]
    # a face never straddles a region circle
    kv = mesh.region_kind[mesh.faces]
    on_circle = np.isclose(np.abs(mesh.t[mesh.faces] - 0), np.inf)
    assert on_circle.sum() == 0
    neck_faces = cyl & (fk == 1)
    assert np.all(kv[neck_faces].max(axis=1) == 1)


@pytest.mark.parametrize("g,mb", [(3, 4), (5, 5)])
def test_other_parameters(g, mb):
    sf = build_initial_surface(mb, g)
    m = build_mesh(sf, 16)
    assert m.euler_characteristic() == 2 - 2 * g
    assert m.contact_defect.max() < 1e-7
    assert max(mesh_equivariance_defects(m, g).values()) < 1e-7


def test_exports(mesh, surf, tmp_path):
    write_obj(mesh, tmp_path / "m.obj")
    lines = (tmp_path / "m.obj").read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == mesh.n_vertices
    assert sum(l.startswith("f ") for l in lines) == len(mesh.faces)
    write_ply(mesh, tmp_path / "m.ply")
    raw = (tmp_path / "m.ply").read_bytes()
    head = raw[: raw.index(b"end_header\n") + 11].decode()
    assert "binary_little_endian" in head and f"element vertex {mesh.n_vertices}" in head
    vsize = 6 * 8 + 3 * 4 + 8
    assert len(raw) == len(head) + mesh.n_vertices * vsize + len(mesh.faces) * 13
    first = np.frombuffer(raw[len(head):len(head) + 48], "<f8")
    assert np.allclose(first, mesh.positions6()[0])
    f = lagrangian_angle_field(surf, n_s=4, dt=0.5)
    write_angle_csv(f, decompose(surf, f), tmp_path / "a.csv")
    rows = (tmp_path / "a.csv").read_text().splitlines()
    assert rows[0].startswith("s,t,theta") and len(rows) == f.theta.size + 1
