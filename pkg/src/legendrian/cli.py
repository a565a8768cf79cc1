"""Command line: legendrian {torus, surface, spectrum, table, verify}.

Options may also come from a flat key=value file given with --config; flags
override the file, which overrides the built-in defaults. Exit codes: 0 success,
1 a check failed, 2 invalid input, 3 solver or geometry failure; verify exits
with the number of failed criteria.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
MAX_EXIT = 100


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    m_bar: int = 3
    genus: int = 3
    zeta: tuple[float, float] = (0.0, 0.0)
    b_override: float | None = None
    tau: float | None = None
    grid: tuple[int, int] | None = None
    n_s: int = 32
    h: float = 0.05
    tol: float = 1e-8
    out: str | None = None
    json: str | None = None
    csv: str | None = None
    format: str = "text"
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.m_bar < 2:
            raise ConfigError(f"m_bar must be >= 2, got {self.m_bar}")
        if self.genus % 2 == 0:
            raise ConfigError(f"even genus unsupported (genus {self.genus}): the construction needs odd g")
        if self.genus < 3:
            raise ConfigError(f"genus must be an odd integer >= 3, got {self.genus}")
        if not self.tol > 0 or not self.h > 0:
            raise ConfigError("tolerances and mesh sizes must be positive")
        if self.n_s < 4:
            raise ConfigError("n_s must be at least 4")
        if self.grid is not None and min(self.grid) < 2:
            raise ConfigError("grid sizes must be at least 2")


# ---------------------------------------------------------------------------
# output helpers


def _dump_json(obj, path: str | None, stream) -> None:
    from .acceptance import _plain

    text = json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stream.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _torus_faces(n_s: int, n_t: int) -> np.ndarray:
    i, k = np.meshgrid(np.arange(n_s), np.arange(n_t), indexing="ij")
    a = i * n_t + k
    b = ((i + 1) % n_s) * n_t + k
    c = ((i + 1) % n_s) * n_t + (k + 1) % n_t
    d = i * n_t + (k + 1) % n_t
    return np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])


def _write_points_mesh(path: str, X: np.ndarray, faces: np.ndarray) -> None:
    """OBJ (real parts) or binary PLY (all six real coordinates), by suffix."""
    pos = np.concatenate([X.real, X.imag], axis=-1)
    if path.lower().endswith(".obj"):
        with open(path, "w", encoding="utf-8") as fh:
            for p in pos:
                fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            for f in faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
        return
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {len(pos)}"]
    header += [f"property double {n}" for n in ("x", "y", "z", "u", "v", "w")]
    header += [f"element face {len(faces)}", "property list uchar int vertex_indices", "end_header"]
    fdt = np.dtype([("n", "u1"), ("i", "<i4", (3,))])
    fa = np.empty(len(faces), fdt)
    fa["n"] = 3
    fa["i"] = faces
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(pos.astype("<f8").tobytes())
        fh.write(fa.tobytes())


def _emit(cfg: RunConfig, report: dict, summary: list[str], stream) -> None:
    if cfg.format == "json":
        _dump_json(report, None, stream)
    else:
        stream.write("\n".join(summary) + "\n")
    if cfg.json:
        _dump_json(report, cfg.json, stream)


# ---------------------------------------------------------------------------
# commands


def cmd_torus(cfg: RunConfig, stream) -> int:
    from .immersion import (TorusImmersion, closing_tau, contact_pullback, gauss_curvature, gauss_curvature_fd,
                            lagrangian_angle, period_residual)
    from .profile import solve_params

    params = solve_params(cfg.tau) if cfg.tau is not None else closing_tau(cfg.m_bar)
    ti = TorusImmersion(params)
    m = 4 * cfg.m_bar - 1
    n_s, n_t = cfg.grid or (128, 128 * m)
    length = 2 * m * params.p_tau
    S, T, jet = ti.grid(n_s, n_t, (0.0, length))
    contact = float(np.max(np.abs(contact_pullback(jet))))
    theta = float(np.max(np.abs(lagrangian_angle(jet))))
    t = T[0]
    curv = float(np.max(np.abs(gauss_curvature(params, t) - gauss_curvature_fd(params, t))))
    period = period_residual(ti, 0.0, length, ns=min(n_s, 64), nt=256)
    ok = contact < cfg.tol and theta < cfg.tol
    report = {
        "command": "torus", "m_bar": cfg.m_bar, "tau": params.tau, "p_tau": params.p_tau, "p_hat": ti.p_hat,
        "grid": [n_s, n_t], "t_length": length,
        "legendrian_defect": contact, "lagrangian_angle_sup": theta,
        "curvature_formula_vs_finite_difference": curv, "period_residual": period,
        "closes": period < cfg.tol, "special_legendrian": "pass" if ok else "fail",
    }
    out = cfg.out or "torus.ply"
    _write_points_mesh(out, jet.X.reshape(-1, 3), _torus_faces(n_s, n_t))
    report["mesh"] = out
    _emit(cfg, report, [f"tau = {params.tau:.17g}", f"legendrian defect = {contact:.3e}",
                        f"lagrangian angle sup = {theta:.3e}", f"period residual = {period:.3e}",
                        f"special_legendrian: {report['special_legendrian']}", f"mesh written to {out}"], stream)
    return EXIT_OK if ok else EXIT_CHECK


def _surface(cfg: RunConfig):
    import dataclasses

    from .glue import GluedSurface, SurfaceModel, zeta_params

    model = SurfaceModel.desk(cfg.genus, cfg.m_bar)
    if cfg.b_override is not None:
        model = dataclasses.replace(model, b=cfg.b_override)
    return GluedSurface(model, zeta_params(model, *cfg.zeta))


def cmd_surface(cfg: RunConfig, stream) -> int:
    from .glue import build_mesh, decompose, lagrangian_angle_field, write_angle_csv, write_obj, write_ply

    surf = _surface(cfg)
    m = surf.model
    mesh = build_mesh(surf, cfg.n_s)
    field_ = lagrangian_angle_field(surf, n_s=max(16, cfg.n_s))
    parts = decompose(surf, field_)
    out = cfg.out or "surface.ply"
    (write_obj if out.lower().endswith(".obj") else write_ply)(mesh, out)
    if cfg.csv:
        write_angle_csv(field_, parts, cfg.csv)
    defect = float(mesh.contact_defect.max())
    report = {
        "command": "surface", "genus": m.genus, "m_bar": m.m_bar, "zeta": list(cfg.zeta),
        "tau_bar": m.tau_bar, "p_bar": m.p_bar,
        "layout": {"a": m.a, "b": m.b, "dislocation_window": list(m.dislocation_window),
                   "gluing_window": list(m.gluing_window), "t_mid": m.t_mid},
        "vertices": mesh.n_vertices, "faces": len(mesh.faces), "euler_characteristic": mesh.euler_characteristic(),
        "legendrian_defect": defect, "theta_sup": parts["sup"], "theta_outside_mass": parts["outside_mass"],
        "mesh": out, "angle_csv": cfg.csv,
    }
    ok = defect < 1e-7 and mesh.euler_characteristic() == 2 - 2 * m.genus
    _emit(cfg, report, [f"vertices = {mesh.n_vertices}", f"euler characteristic = {mesh.euler_characteristic()}",
                        f"legendrian defect = {defect:.3e}",
                        "theta sup: " + ", ".join(f"{k} {v:.4g}" for k, v in parts["sup"].items()),
                        f"mesh written to {out}"], stream)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_spectrum(cfg: RunConfig, stream) -> int:
    from .profile import solve_params
    from .spectral import (approximate_kernel_suite, assemble, neck_length, neck_model, sphere_spectrum,
                           write_triplets)

    suite = cfg.extra.get("suite", "all")
    report: dict = {"command": "spectrum", "suite": suite}
    lines = []
    if suite in ("sphere", "all"):
        r = sphere_spectrum(cfg.h, cfg.genus)
        report["sphere"] = r
        lines.append(f"sphere: {r['vertices']} vertices, cluster error {r['cluster_error']:.3e}, "
                     f"symmetric min |lambda| {r['symmetric_min_abs']:.4g}")
    if suite in ("kernel", "all"):
        surf = _surface(cfg)
        r = approximate_kernel_suite(surf, cfg.n_s)
        report["kernel"] = r
        lines.append(f"central region: min |lambda| {r['standard_0']['min_abs']:.4g}")
        for row in r["standard_n"]:
            lines.append(f"{row['region']}: near zero {row['near_zero']}, overlaps "
                         + ", ".join(f"{k} {v:.3f}" for k, v in row["best_overlap"].items()))
        if cfg.extra.get("triplets"):
            from .glue import build_mesh
            mesh = build_mesh(surf, cfg.n_s)
            op = assemble(mesh.Y, mesh.faces)
            prefix = cfg.extra["triplets"]
            write_triplets(op.stiffness, f"{prefix}_stiffness.txt")
            write_triplets(op.mass, f"{prefix}_mass.txt")
            report["triplets"] = [f"{prefix}_stiffness.txt", f"{prefix}_mass.txt"]
    if suite in ("neck", "all"):
        p = solve_params(cfg.tau if cfg.tau is not None else 1e-4)
        rows = []
        for b in (1.5, 2.0, 2.5):
            ell = neck_length(p, b)
            a, c = neck_model(ell, p, "const", cfg.n_s), neck_model(ell, p, "cos2s", cfg.n_s)
            rows.append({"b": b, "ell": ell, "c": a.c, **a.constants, **c.constants, "decay_rate": c.decay_rate})
            lines.append(f"neck b={b:g}: ell {ell:.4f}, c {a.c:.4f}, A1 {a.constants['A1']:.4f}, "
                         f"A2 {c.constants['A2']:.4f}, decay {c.decay_rate:.4f}")
        report["neck"] = {"tau": p.tau, "rows": rows}
    _emit(cfg, report, lines, stream)
    return EXIT_OK


TABLES = {
    "period": ("tau", "p_tau", "p_plus_half_log_tau", "two_tau_dp_dtau"),
    "rotation": ("tau", "p_hat_heuman", "p_hat_phase", "abs_diff", "p_hat_minus_limit_plus_tau_log_tau",
                 "scaled_remainder", "dp_hat_dtau", "dp_hat_over_minus_log_tau"),
    "neck": ("tau", "y_min", "y_min_over_two_tau", "tau_roundtrip_error"),
}


def table_rows(kind: str, taus) -> list[dict]:
    from .immersion import rotation_period_report
    from .profile import period_asymptotics_report, solve_params, ymin_to_tau

    if kind == "period":
        return period_asymptotics_report(taus)
    if kind == "rotation":
        return rotation_period_report(taus)
    rows = []
    for tau in taus:
        p = solve_params(tau)
        rows.append({"tau": float(tau), "y_min": p.y_min, "y_min_over_two_tau": p.y_min / (2 * tau),
                     "tau_roundtrip_error": abs(ymin_to_tau(p.y_min) - tau)})
    return rows


def cmd_table(cfg: RunConfig, stream) -> int:
    from .profile import TAU_MAX, ParameterDomainError

    kind = cfg.extra.get("kind", "rotation")
    taus = cfg.extra.get("taus")
    if taus is None:
        taus = np.geomspace(cfg.extra.get("tau_min", 1e-4), cfg.extra.get("tau_max", 0.1), cfg.extra.get("count", 20))
    taus = [float(t) for t in taus]
    if any(not 0 < t < TAU_MAX for t in taus):
        raise ParameterDomainError(f"table values of tau must lie in (0, {TAU_MAX:.6f})")
    header = TABLES[kind]
    text = _csv_text(header, [[r[h] for h in header] for r in table_rows(kind, taus)])
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        stream.write(text)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stream) -> int:
    from . import acceptance

    numbers = cfg.extra.get("suite") or sorted(acceptance.CRITERIA)
    jobs = int(cfg.extra.get("jobs", 1))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(acceptance.run_criterion, numbers))
    else:
        results = [acceptance.run_criterion(n) for n in numbers]
    failed = sum(not r.passed for r in results)
    timings = bool(cfg.extra.get("timings"))
    report = {"command": "verify", "criteria": [r.to_dict(timings) for r in results],
              "passed": len(results) - failed, "failed": failed}
    if cfg.json:
        _dump_json(report, cfg.json, stream)
    if cfg.format == "json":
        _dump_json(report, None, stream)
    else:
        for r in results:
            stream.write(acceptance.format_line(r) + "\n")
            for note in r.notes:
                stream.write(f"    note: {note}\n")
        stream.write(f"{len(results) - failed} passed, {failed} failed\n")
    return min(failed, MAX_EXIT)


COMMANDS = {"torus": cmd_torus, "surface": cmd_surface, "spectrum": cmd_spectrum, "table": cmd_table,
            "verify": cmd_verify}


# ---------------------------------------------------------------------------
# argument parsing


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 128x1408, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _suite(text: str):
    if text == "all":
        return None
    try:
        nums = sorted({int(x) for x in text.split(",")})
    except ValueError:
        raise argparse.ArgumentTypeError("suite is 'all' or comma-separated criterion numbers") from None
    if any(not 1 <= n <= 11 for n in nums):
        raise argparse.ArgumentTypeError("criterion numbers run from 1 to 11")
    return nums


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="legendrian", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, surface: bool = False):
        p.add_argument("--config", help="flat key=value file; flags take precedence")
        p.add_argument("--json", help="write the JSON report here")
        p.add_argument("--format", choices=("text", "json"), default="text", help="report format on stdout")
        if surface:
            p.add_argument("--genus", type=int, default=3)
            p.add_argument("--m-bar", dest="m_bar", type=int, default=3)
            p.add_argument("--zeta", type=_pair, default=(0.0, 0.0), help="zeta1,zeta2")
            p.add_argument("--b", dest="b_override", type=float, help="override the spherical-region radius b")
            p.add_argument("--n-s", dest="n_s", type=int, default=32, help="points per circle")

    p = sub.add_parser("torus", help="closed special Legendrian torus: mesh and certificate")
    common(p)
    p.add_argument("--m-bar", dest="m_bar", type=int, default=3)
    p.add_argument("--tau", type=float, help="use this tau instead of the closing value")
    p.add_argument("--grid", type=_grid, help="NSxNT samples (default 128 x 128 (4 m_bar - 1))")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="mesh path, .ply or .obj (default torus.ply)")

    p = sub.add_parser("surface", help="initial glued surface: mesh and angle decomposition")
    common(p, surface=True)
    p.add_argument("--out", help="mesh path, .ply or .obj (default surface.ply)")
    p.add_argument("--csv", help="write the angle decomposition here")

    p = sub.add_parser("spectrum", help="discrete spectral suites")
    common(p, surface=True)
    p.add_argument("--suite", choices=("sphere", "kernel", "neck", "all"), default="all")
    p.add_argument("--h", type=float, default=0.05, help="edge length of the sphere mesh")
    p.add_argument("--tau", type=float, help="tau of the neck model (default 1e-4)")
    p.add_argument("--triplets", help="prefix for stiffness/mass triplet files of the glued mesh")

    p = sub.add_parser("table", help="asymptotics tables as CSV")
    common(p)
    p.add_argument("--kind", choices=sorted(TABLES), default="rotation")
    p.add_argument("--taus", type=_float_list, help="comma-separated tau values")
    p.add_argument("--tau-min", dest="tau_min", type=float, default=1e-4)
    p.add_argument("--tau-max", dest="tau_max", type=float, default=0.1)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("verify", help="run the acceptance criteria")
    common(p)
    p.add_argument("--suite", type=_suite, default=None, help="'all' or criterion numbers, e.g. 1,2,9")
    p.add_argument("--jobs", type=int, default=1, help="criteria run in this many processes")
    p.add_argument("--timings", action="store_true", help="include wall-clock seconds in the JSON report")
    return parser


def read_config(path: str) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in COMMANDS:
        return
    values = read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[known.command]
    dests = {a.dest: a for a in sub._actions}
    unknown = sorted(set(values) - set(dests) - {"config"})
    if unknown:
        raise ConfigError(f"unknown keys in {known.config}: {', '.join(unknown)}")
    # string defaults are passed through each option's type by argparse
    sub.set_defaults(**{k: v for k, v in values.items() if k != "config"})
    for k in values:
        if k in dests and dests[k].choices is not None and values[k] not in dests[k].choices:
            raise ConfigError(f"{k}={values[k]} not one of {sorted(dests[k].choices)}")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base = {f for f in RunConfig.__dataclass_fields__ if f != "extra"}
    d = vars(ns).copy()
    d.pop("config", None)
    kw = {k: d.pop(k) for k in list(d) if k in base and d[k] is not None}
    cfg = RunConfig(extra=d, **kw)
    return cfg


def main(argv=None, stream=None) -> int:
    from .glue import GeometricError, UnsupportedGenusError
    from .immersion import ConsistencyError, SolverError
    from .profile import ParameterDomainError
    from .spectral import AssemblyError, SpectralError

    argv = list(sys.argv[1:] if argv is None else argv)
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        ns = parser.parse_args(argv)
        cfg = config_from_args(ns)
        cfg.validate()
        return COMMANDS[cfg.command](cfg, stream)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    except (ConfigError, ParameterDomainError, UnsupportedGenusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GeometricError, SolverError, ConsistencyError, SpectralError, AssemblyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
