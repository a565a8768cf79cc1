"""The acceptance suite: eleven end-to-end criteria, each a set of named checks.

Every criterion returns measured values next to the booleans, so a failing run
says by how much it failed. ``run`` executes a selection and ``format_line``
renders the one-line summary used by the test suite and the command line.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import oracles


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: dict
    values: dict
    seconds: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self, timings: bool = False) -> dict:
        """Plain-data report; wall-clock times only on request so that reports are reproducible."""
        out = {"criterion": self.number, "title": self.title, "passed": self.passed,
               "checks": {k: bool(v) for k, v in self.checks.items()}, "values": _plain(self.values), "notes": list(self.notes)}
        if timings:
            out["seconds"] = round(self.seconds, 3)
        return out


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


# ---------------------------------------------------------------------------
# 1-7: the torus


def elliptic_identities(seed: int = 0) -> CriterionResult:
    from .elliptic import (Modulus, complete_E, complete_K, heuman_lambda0, incomplete_D, incomplete_F,
                           jacobi, third_kind_Lambda)

    rng = np.random.default_rng(seed)
    u = rng.uniform(-20, 20, 10_000)
    k = rng.uniform(0, 1, 10_000)
    pyth = dn_rel = 0.0
    for kk in np.unique(np.round(k, 3)):
        sel = np.round(k, 3) == kk
        m = Modulus.from_k(float(kk))
        sn, cn, dn = jacobi(u[sel], m)
        pyth = max(pyth, float(np.max(np.abs(sn * sn + cn * cn - 1))))
        dn_rel = max(dn_rel, float(np.max(np.abs(dn * dn + kk * kk * sn * sn - 1))))
    err = {"K": 0.0, "E": 0.0, "F": 0.0, "D": 0.0, "Lambda": 0.0, "Lambda0": 0.0}
    for kk in (0.1, 0.5, 0.8, 0.95, 0.999):
        m = Modulus.from_k(kk)
        err["K"] = max(err["K"], abs(complete_K(m) - oracles.K_oracle(kk)))
        err["E"] = max(err["E"], abs(complete_E(m) - oracles.E_oracle(kk)))
        for phi in (0.3, 1.2, 2.5):
            err["F"] = max(err["F"], abs(float(incomplete_F(phi, m)) - oracles.F_oracle(phi, kk)))
            err["D"] = max(err["D"], abs(float(incomplete_D(phi, m)) - oracles.D_oracle(phi, kk)))
        for uu, alpha in ((0.7, 0.5), (2.4, 0.8)):
            ref = oracles.quad(lambda x: 1.0 / (1.0 - alpha**2 * jacobi(x, m)[0] ** 2), 0.0, uu)
            err["Lambda"] = max(err["Lambda"], abs(float(third_kind_Lambda(uu, alpha, m)) - ref))
        kp = m.k_prime
        K, E = oracles.K_oracle(kk), oracles.E_oracle(kk)
        for phi in (0.4, 1.1):
            Fp, Dp = oracles.F_oracle(phi, kp), oracles.D_oracle(phi, kp)
            ref = 2 / math.pi * (K * Dp - K * Fp + E * Fp)
            err["Lambda0"] = max(err["Lambda0"], abs(float(heuman_lambda0(phi, m)) - ref))
    checks = {"sn^2 + cn^2 = 1": pyth < 1e-12, "dn^2 + k^2 sn^2 = 1": dn_rel < 1e-12}
    checks.update({f"{name} vs quadrature": e < 1e-10 for name, e in err.items()})
    return CriterionResult(1, "elliptic identities", checks,
                           {"pythagoras": pyth, "dn_relation": dn_rel, "quadrature_errors": err})


def conformal_factor_check() -> CriterionResult:
    from .profile import conformal_factor, conformal_factor_with_derivative, solve_params

    ode, first = {}, {}
    for tau in (0.1, 0.01, 0.001):
        p = solve_params(tau)
        t = np.linspace(0, 2 * p.p_tau, 2001)
        sol = oracles.profile_ode_oracle(tau, 2 * p.p_tau)
        ode[tau] = float(np.max(np.abs(sol.sol(t)[0] - conformal_factor(p, t))))
        y, yd = conformal_factor_with_derivative(p, t)
        first[tau] = float(np.max(np.abs(yd * yd + 4 * (y**3 - y * y + 4 * tau * tau))))
    checks = {f"ODE agreement tau={tau:g}": e < 1e-8 for tau, e in ode.items()}
    checks.update({f"first integral tau={tau:g}": e < 1e-8 for tau, e in first.items()})
    return CriterionResult(2, "conformal factor", checks, {"ode_error": ode, "first_integral": first})


def _closed_torus(n_s: int = 128, n_t: int = 1408, m_bar: int = 3):
    from .immersion import TorusImmersion, closing_tau

    p = closing_tau(m_bar)
    ti = TorusImmersion(p)
    m = 4 * m_bar - 1
    return ti, ti.grid(n_s, n_t, (0.0, 2 * m * p.p_tau))


def special_legendrian_certificate(n_s: int = 128, n_t: int = 1408) -> CriterionResult:
    from .immersion import contact_pullback, lagrangian_angle

    ti, (S, T, jet) = _closed_torus(n_s, n_t)
    contact = float(np.max(np.abs(contact_pullback(jet))))
    theta = float(np.max(np.abs(lagrangian_angle(jet))))
    return CriterionResult(3, "special Legendrian certificate",
                           {"contact pullback < 1e-8": contact < 1e-8, "|theta| < 1e-8": theta < 1e-8},
                           {"tau": ti.tau, "grid": [n_s, n_t], "contact_sup": contact, "theta_sup": theta})


def curvature_check(n_t: int = 1408) -> CriterionResult:
    from .immersion import closing_tau, gauss_curvature, gauss_curvature_fd
    from .profile import TAU_MAX, solve_params

    p = closing_tau(3)
    t = np.linspace(0, 22 * p.p_tau, n_t, endpoint=False)
    diff = float(np.max(np.abs(gauss_curvature(p, t) - gauss_curvature_fd(p, t))))
    sphere = float(np.max(np.abs(gauss_curvature(solve_params(0.0), t) - 1.0)))
    flat = float(np.max(np.abs(gauss_curvature(solve_params(TAU_MAX), t))))
    return CriterionResult(4, "curvature",
                           {"formula vs finite differences": diff < 1e-5, "sphere curvature 1": sphere == 0.0,
                            "flat torus curvature 0": flat < 1e-14},
                           {"max_difference": diff, "sphere_defect": sphere, "flat_defect": flat})


def rotation_period_check() -> CriterionResult:
    from .immersion import rotation_period_report

    rows = rotation_period_report(np.geomspace(1e-4, 0.1, 20))
    diff = max(r["abs_diff"] for r in rows)
    remainder = max(abs(r["scaled_remainder"]) for r in rows)
    at_small = rows[0]["dp_hat_over_minus_log_tau"]
    res = CriterionResult(5, "rotation period",
                          {"two routes agree to 1e-9": diff < 1e-9,
                           "remainder bounded by C tau": remainder < 3.0,
                           "derivative ratio within 10% of 1 at tau=1e-4": abs(at_small - 1) < 0.1},
                          {"max_route_difference": diff, "max_remainder_over_tau": remainder,
                           "derivative_ratio_at_1e-4": at_small,
                           "derivative_ratio_column": [r["dp_hat_over_minus_log_tau"] for r in rows]})
    if abs(at_small - 1) >= 0.1:
        res.notes.append("the derivative is -log tau - 1.61 + o(1), so the ratio approaches 1 only "
                         "logarithmically; at tau = 1e-4 it is 1 - 1.61/9.21")
    return res


def torus_closing() -> CriterionResult:
    from .immersion import TorusImmersion, closing_tau, period_residual

    p = closing_tau(3)
    ti = TorusImmersion(p)
    m = 11
    full = period_residual(ti, 0.0, 2 * m * p.p_tau, ns=64, nt=256)
    smaller = [period_residual(ti, 0.0, 2 * k * p.p_tau, ns=64, nt=256) for k in range(1, m)]
    return CriterionResult(6, "torus closing",
                           {"period residual < 1e-8": full < 1e-8, "no smaller period": min(smaller) > 1e-3},
                           {"residual": full, "smallest_residual_k_lt_11": min(smaller)})


def symmetry_suite() -> CriterionResult:
    from .immersion import ReparametrizedImmersion, TorusImmersion, TwistedImmersion, closing_tau
    from .symmetry import (check_commutation_table, check_form_pullbacks, cyl_reflect_s, cyl_reflect_t,
                           cyl_rotate, cyl_translate, equivariance_defect, half_turn, reflection_s,
                           reflection_t, reflection_t_at, rotation, translation)

    table = max(r["defect"] for r in check_commutation_table())
    forms = max(r["defect"] for r in check_form_pullbacks())
    P = closing_tau(3)
    ti = TorusImmersion(P)
    p, ph = P.p_tau, P.p_hat
    s = np.linspace(0, 2 * np.pi, 17)[:, None]
    t = np.linspace(-3 * p, 3 * p, 61)[None, :]
    eq = {}
    eq["torus: T reflection"] = equivariance_defect(ti, reflection_t(), cyl_reflect_t(0.0), s, t)
    eq["torus: S reflection"] = equivariance_defect(ti, reflection_s(), cyl_reflect_s(0.0), s, t)
    eq["torus: rotation"] = equivariance_defect(ti, rotation(0.7), cyl_rotate(0.7), s, t)
    for k in (1, 2, 3):
        eq[f"torus: reflection at {k} p"] = equivariance_defect(ti, reflection_t_at(k * ph), cyl_reflect_t(k * p), s, t)
        eq[f"torus: translation by {2 * k} p"] = equivariance_defect(
            ti, translation(2 * k * ph), cyl_translate(2 * k * p), s, t)
    tw = TwistedImmersion.from_tau(0.05, 0.03)
    q = tw.p_tau
    t2 = np.linspace(-2.5 * q, 2.5 * q, 41)[None, :]
    eq["twisted: T reflection"] = equivariance_defect(tw, reflection_t(), cyl_reflect_t(0.0), s, t2)
    eq["twisted: S reflection"] = equivariance_defect(tw, reflection_s(), cyl_reflect_s(0.0), s, t2)
    eq["twisted: half turn"] = equivariance_defect(tw, half_turn(), cyl_rotate(np.pi), s, t2)
    for k in (1, 2):
        eq[f"twisted: period map^{k}"] = equivariance_defect(tw, tw.period_map.power(k), cyl_translate(2 * k * q), s, t2)
        eq[f"twisted: reflection at {k} p"] = equivariance_defect(
            tw, tw.period_map.power(k) @ reflection_t(), cyl_reflect_t(k * q), s, t2)
    r = ReparametrizedImmersion(tw, p)
    eq["reparametrized: period map"] = equivariance_defect(r, tw.period_map, cyl_translate(2 * p), s,
                                                           np.linspace(-4, 4, 33)[None, :])
    checks = {"group identities exact to 1e-14": table <= 1e-14, "form pullbacks": forms < 1e-12,
              "equivariances < 1e-8": max(eq.values()) < 1e-8}
    return CriterionResult(7, "symmetry suite", checks,
                           {"identity_defect": table, "form_defect": forms, "equivariance": eq})


# ---------------------------------------------------------------------------
# 8-11: the glued surface


def glued_surface(genus: int = 3, m_bar: int = 3) -> CriterionResult:
    from .glue import (build_initial_surface, build_mesh, decompose, dislocation_scaling_report,
                       lagrangian_angle_field, theta_scaling_report)

    surf = build_initial_surface(m_bar, genus)
    mesh = build_mesh(surf, 32)
    m = surf.model
    s = np.linspace(0, 2 * np.pi, 33)[:, None]
    t = np.linspace(m.a, m.t_end, 3001)[None, :]
    defect = max(float(np.max(np.abs(surf.cylinder(s, t).contact_defect()))), float(mesh.contact_defect.max()))
    d = decompose(surf, lagrangian_angle_field(surf))
    theta_sup = max(d["sup"].values())
    glue_rows = theta_scaling_report(genus, (3, 4, 5))
    disl_rows = dislocation_scaling_report(genus, m_bar)
    gr = [r["ratio"] for r in glue_rows]
    dr = [r["ratio"] for r in disl_rows]
    checks = {"Legendrian defect < 1e-7": defect < 1e-7, "Euler characteristic -4": mesh.euler_characteristic() == -4,
              "theta finite": math.isfinite(theta_sup), "theta mass outside supports < 1e-9": d["outside_mass"] < 1e-9,
              "gluing ratio stable within 2": max(gr) / min(gr) < 2.0,
              "dislocation ratio stable within 2": max(dr) / min(dr) < 2.0}
    return CriterionResult(8, "glued surface", checks,
                           {"contact_defect": defect, "euler_characteristic": mesh.euler_characteristic(),
                            "vertices": mesh.n_vertices, "theta_sup": d["sup"], "outside_mass": d["outside_mass"],
                            "gluing_ratios": gr, "dislocation_ratios": dr})


def spectral_suite(h: float = 0.025, n_s: int = 32) -> CriterionResult:
    from .glue import build_initial_surface
    from .profile import solve_params
    from .spectral import approximate_kernel_suite, neck_length, neck_model, sphere_spectrum

    coarse = sphere_spectrum(h)
    fine = sphere_spectrum(h / 2)
    kernel = approximate_kernel_suite(build_initial_surface(3, 3), n_s)
    rel = coarse["cluster_error"] / 6.0
    refine = coarse["cluster_error"] / fine["cluster_error"]
    s0 = kernel["standard_0"]["min_abs"]
    std = kernel["standard_n"]
    two_modes = all(r["near_zero"] == 2 for r in std)
    overlaps = all(min(r["best_overlap"].values()) >= 0.95 for r in std)
    p = solve_params(1e-4)
    necks = [neck_model(neck_length(p, b), p) for b in (2.0, 2.5)]
    cs = [n.c for n in necks]
    checks = {"cluster of five within 5%": rel < 0.05 and len(coarse["cluster"]) == 5,
              "cluster error at least halves under refinement": refine >= 2.0,
              "symmetric kernel empty with gap >= 0.5": min(coarse["symmetric_min_abs"], s0) >= 0.5,
              "standard regions: two near-zero eigenvalues": two_modes,
              "standard regions: overlaps >= 0.95": overlaps,
              "neck constant positive and stable": min(cs) > 0 and max(cs) / min(cs) < 1.1}
    res = CriterionResult(9, "spectral suite", checks, {
        "sphere_vertices": [coarse["vertices"], fine["vertices"]],
        "cluster_errors": [coarse["cluster_error"], fine["cluster_error"]], "refinement_ratio": refine,
        "separation": coarse["separation"], "sphere_symmetric_min_abs": coarse["symmetric_min_abs"],
        "glued_vertices": kernel["vertices"], "central_region_min_abs": s0,
        "standard_regions": [{"region": r["region"], "near_zero": r["near_zero"], "eigenvalues": r["eigenvalues"],
                              "best_overlap": r["best_overlap"]} for r in std],
        "neck_lengths": [n.ell for n in necks], "neck_constants": cs})
    if not (two_modes and overlaps):
        res.notes.append("on the standard regions only the twist mode sits near zero; the translation mode "
                         "has a Dirichlet eigenvalue of order -1/p_tau, far outside the near-zero cluster")
    return res


def perturbation_linearization() -> CriterionResult:
    from .immersion import TorusImmersion
    from .perturb import ScalarField, f_t, residual_scaling
    from .spectral import assemble, surface_grid

    ti = TorusImmersion.from_tau(0.05)
    s, t = np.meshgrid(np.linspace(0, 2 * np.pi, 12, endpoint=False), np.linspace(-1, 1, 9), indexing="ij")
    sc = residual_scaling(ti, ScalarField.zero(), ScalarField.bump((1.0, 0.2), 0.8, 0), s, t, R=3.0)
    res = []
    for n in (32, 64, 128, 256):
        h = 2 * np.pi / n
        tt = np.arange(-round(1.0 / h), round(1.0 / h) + 1) * h
        faces, corners, S, T = surface_grid(ti, n, tt)
        op = assemble(faces=faces, corners=corners, vertices=S)
        r = op.apply(f_t(ti(S, T).X))
        res.append(float(np.max(np.abs(r[np.abs(T) < 0.5]))))
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    return CriterionResult(10, "perturbation linearization",
                           {"log-log slope 2.0 +- 0.1": abs(sc["slope"] - 2.0) <= 0.1,
                            "Killing residual quarters under refinement": all(3.6 < r < 4.4 for r in ratios)},
                           {"eps": sc["eps"], "residuals": sc["residual"], "slope": sc["slope"],
                            "killing_residuals": res, "killing_ratios": ratios})


def linear_correction_step() -> CriterionResult:
    from .glue import build_initial_surface
    from .spectral import solve_linear_step

    _, rep = solve_linear_step(build_initial_surface(3, 3))
    factor = rep["reduction_factor"]
    res = CriterionResult(11, "linear correction step", {"reduction factor < 1": factor < 1.0}, rep)
    if not factor < 1.0:
        res.notes.append("every damped step leaves the tubular neighbourhood of the join; the initial "
                         "angle there is of order one, so the linearization does not apply at this scale")
    return res


CRITERIA = {
    1: (elliptic_identities, 10.0),
    2: (conformal_factor_check, 30.0),
    3: (special_legendrian_certificate, 60.0),
    4: (curvature_check, None),
    5: (rotation_period_check, None),
    6: (torus_closing, None),
    7: (symmetry_suite, None),
    8: (glued_surface, 300.0),
    9: (spectral_suite, 600.0),
    10: (perturbation_linearization, None),
    11: (linear_correction_step, None),
}


def run_criterion(number: int) -> CriterionResult:
    fn, limit = CRITERIA[number]
    t0 = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - t0
    if limit is not None:
        res.checks[f"runtime < {limit:g} s"] = res.seconds < limit
    return res


def run(numbers=None) -> list[CriterionResult]:
    return [run_criterion(n) for n in (numbers or sorted(CRITERIA))]


def format_line(res: CriterionResult) -> str:
    failed = [k for k, v in res.checks.items() if not v]
    tail = "" if not failed else " (failed: " + "; ".join(failed) + ")"
    return f"criterion {res.number:2d} {'PASS' if res.passed else 'FAIL'} {res.title} [{res.seconds:.1f} s]{tail}"
