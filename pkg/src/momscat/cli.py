"""Command-line harness: scenario runs and the accuracy/conditioning studies.

Subcommands: run, gamma-sweep, refine, freq-sweep, lf-sweep, mie, mesh-info.
All results are CSV files written atomically to --out-dir; dB values carry 4
decimals, linear values 9 significant digits, so reruns are byte-identical.
Exit codes: 0 ok, 1 solver non-convergence, 2 config error, 3 I/O error.
"""

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2
EXIT_IO = 3

_SCHEMA_VERSION = "v1"


def _build_parser():
    parser = argparse.ArgumentParser(prog="momscat", description=__doc__)
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread count (set before numpy loads)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario file")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--mie-radius-override", default=None,
                       help="Mie reference radius: area, ideal, or meters")
        p.add_argument("--seed", type=int, default=None, help="reserved")

    p = sub.add_parser("run", help="solve one scenario and write far fields/errors")
    common(p)

    p = sub.add_parser("gamma-sweep", help="WMFIE weighting-factor study")
    common(p)
    p.add_argument("--gammas", default="0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--variants", default="1,2,3")

    p = sub.add_parser("refine", help="mesh-refinement study")
    common(p)
    p.add_argument("--edges", required=True, help="comma list of target edge lengths")

    p = sub.add_parser("freq-sweep", help="frequency sweep with resonance flags")
    common(p)
    p.add_argument("--f-start", type=float, required=True)
    p.add_argument("--f-stop", type=float, required=True)
    p.add_argument("--f-step", type=float, required=True)

    p = sub.add_parser("lf-sweep", help="low-frequency divergence study")
    common(p)
    p.add_argument("--decades", type=int, default=4)
    p.add_argument("--points-per-decade", type=int, default=1)

    p = sub.add_parser("mie", help="write the Mie reference far field")
    common(p)

    p = sub.add_parser("mesh-info", help="mesh statistics")
    p.add_argument("--config", default=None)
    p.add_argument("--mesh", default=None, help="mesh file instead of a scenario")
    p.add_argument("--out-dir", default=None)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    args = _build_parser().parse_args(argv)
    if args.threads is not None and "numpy" not in sys.modules:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from momscat.scenario import ConfigError

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _dispatch(args):
    if args.command == "mesh-info":
        return _cmd_mesh_info(args)
    handlers = {
        "run": _cmd_run,
        "gamma-sweep": _cmd_gamma_sweep,
        "refine": _cmd_refine,
        "freq-sweep": _cmd_freq_sweep,
        "lf-sweep": _cmd_lf_sweep,
        "mie": _cmd_mie,
    }
    return handlers[args.command](args)


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _fmt_db(x):
    return f"{x:.4f}"


def _fmt_lin(x):
    return f"{x:.8e}"


def _write_csv(out_dir, name, schema, header, rows):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# momscat {schema} schema {_SCHEMA_VERSION}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")
    os.replace(tmp, path)
    return path


def _farfield_rows(cut, amplitude):
    from momscat.postproc import bistatic_rcs

    rcs_t, rcs_p = bistatic_rcs(cut, amplitude)
    for k in range(len(cut)):
        yield (
            _fmt_db(cut.theta_deg[k]), _fmt_db(cut.phi_deg[k]),
            _fmt_lin(cut.e_theta[k].real), _fmt_lin(cut.e_theta[k].imag),
            _fmt_lin(cut.e_phi[k].real), _fmt_lin(cut.e_phi[k].imag),
            _fmt_db(rcs_t[k]), _fmt_db(rcs_p[k]),
        )


_FF_HEADER = ("theta_deg", "phi_deg", "re_e_theta", "im_e_theta",
              "re_e_phi", "im_e_phi", "rcs_theta_dbsm", "rcs_phi_dbsm")


def write_farfield_csv(out_dir, name, cut, amplitude):
    return _write_csv(out_dir, name, "farfield", _FF_HEADER, _farfield_rows(cut, amplitude))


def read_farfield_csv(path):
    import numpy as np
    from momscat.postproc import FarFieldCut

    data = np.loadtxt(path, delimiter=",", skiprows=2)
    if data.ndim == 1:
        data = data[None, :]
    return FarFieldCut(
        theta_deg=data[:, 0], phi_deg=data[:, 1],
        e_theta=data[:, 2] + 1j * data[:, 3], e_phi=data[:, 4] + 1j * data[:, 5],
    )


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def _load_scenario(args):
    from momscat.scenario import parse_scenario

    scenario = parse_scenario(args.config)
    if getattr(args, "mie_radius_override", None):
        scenario.reference_radius = args.mie_radius_override
    return scenario


def _reference_cut(scenario, mesh, theta, phi, frequency=None):
    """Reference far field per scenario config, or None."""
    if scenario.reference_kind == "none":
        return None
    if scenario.reference_kind == "mie":
        import numpy as np
        from momscat.constants import wavenumber
        from momscat.mie import mie_coefficients, mie_far_field
        from momscat.scenario import ConfigError

        if scenario.geometry_kind not in ("sphere", "file"):
            raise ConfigError("mie reference requires sphere geometry")
        radius = scenario.mie_radius(mesh)
        k0 = wavenumber(scenario.frequency if frequency is None else frequency)
        sol = mie_coefficients(radius, k0)
        e0 = scenario.amplitude * scenario.polarization / np.linalg.norm(scenario.polarization)
        return mie_far_field(sol, e0, scenario.k_dir, theta, phi)
    path = Path(scenario.reference_path)
    if not path.is_absolute():
        path = scenario.base_dir / path
    return read_farfield_csv(path)


def _solve(op, scenario):
    """Solve a formulation system; returns (solution, iterations, converged)."""
    from momscat.solvers import dense_solve, gmres

    if scenario.solver_method == "direct":
        return dense_solve(op.dense(), op.rhs), 0, True
    report = gmres(op, op.rhs, tol=scenario.solver_tol, maxit=scenario.solver_maxit)
    return report.solution, report.iterations, report.converged


def _run_formulations(scenario, mesh, space, ops, exc, theta, phi, kinds=None):
    """Solve each requested formulation; yields result dicts."""
    from momscat.formulations import make_formulation
    from momscat.postproc import far_field
    from momscat.scenario import formulation_config

    for kind in kinds or scenario.kinds:
        op = make_formulation(ops, exc, formulation_config(scenario, kind))
        sol, iterations, converged = _solve(op, scenario)
        v = op.extras["recover_magnetic"](sol) if kind == "CSIE" else None
        cut = far_field(space, sol, v, ops.k0, theta, phi)
        yield {
            "kind": kind, "solution": sol, "magnetic": v, "cut": cut,
            "iterations": iterations, "converged": converged,
        }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_run(args):
    from momscat.operators import assemble, excite_plane_wave
    from momscat.postproc import relative_error_cut
    from momscat.rwg import build_rwg_space
    from momscat.scenario import build_mesh, plane_wave

    scenario = _load_scenario(args)
    mesh = build_mesh(scenario)
    space = build_rwg_space(mesh)
    ops = assemble(space, scenario.frequency)
    exc = excite_plane_wave(space, plane_wave(scenario))
    theta, phi = scenario.cut_grid()
    reference = _reference_cut(scenario, mesh, theta, phi)

    stats_rows = []
    error_rows = []
    failed = False
    for res in _run_formulations(scenario, mesh, space, ops, exc, theta, phi):
        write_farfield_csv(args.out_dir, f"farfield_{res['kind']}.csv", res["cut"], scenario.amplitude)
        stats_rows.append((res["kind"], str(space.n), str(res["iterations"]), str(int(res["converged"]))))
        failed |= not res["converged"]
        if reference is not None:
            err = relative_error_cut(res["cut"], reference)
            error_rows.append((res["kind"], _fmt_db(err.eps_max_db), _fmt_db(err.eps_avg_db)))
    _write_csv(args.out_dir, "solve_stats.csv", "solve-stats",
               ("formulation", "n", "iterations", "converged"), stats_rows)
    if error_rows:
        _write_csv(args.out_dir, "errors.csv", "errors",
                   ("formulation", "eps_max_db", "eps_avg_db"), error_rows)
    if reference is not None:
        write_farfield_csv(args.out_dir, "farfield_REFERENCE.csv", reference, scenario.amplitude)
    return EXIT_SOLVER if failed else EXIT_OK


def _cmd_gamma_sweep(args):
    from momscat.operators import assemble, excite_plane_wave
    from momscat.postproc import far_field, relative_error_cut
    from momscat.rwg import build_rwg_space
    from momscat.scenario import ConfigError, build_mesh, plane_wave
    from momscat.formulations import make_wmfie, make_mfie

    gammas = [float(g) for g in args.gammas.split(",")]
    variants = [int(v) for v in args.variants.split(",")]
    if len(gammas) < 2 or not all(0.0 < g <= 1.0 for g in gammas):
        raise ConfigError("gamma sweep needs at least two values in (0, 1]")

    scenario = _load_scenario(args)
    if scenario.reference_kind == "none":
        raise ConfigError("gamma sweep needs a reference (mie or file)")
    mesh = build_mesh(scenario)
    space = build_rwg_space(mesh)
    ops = assemble(space, scenario.frequency)
    exc = excite_plane_wave(space, plane_wave(scenario))
    theta, phi = scenario.cut_grid()
    reference = _reference_cut(scenario, mesh, theta, phi)

    rows = []
    failed = False
    for variant in variants:
        for gamma in gammas:
            op = make_wmfie(ops, exc, variant=variant, gamma=gamma)
            sol, iterations, converged = _solve(op, scenario)
            failed |= not converged
            cut = far_field(space, sol, None, ops.k0, theta, phi)
            err = relative_error_cut(cut, reference)
            rows.append((_fmt_lin(gamma), str(variant), _fmt_db(err.eps_max_db),
                         _fmt_db(err.eps_avg_db), str(iterations)))
    _write_csv(args.out_dir, "gamma_sweep.csv", "gamma-sweep",
               ("gamma", "variant", "eps_max_db", "eps_avg_db", "iterations"), rows)
    return EXIT_SOLVER if failed else EXIT_OK


def _cmd_refine(args):
    import numpy as np
    from momscat.mesh import mesh_stats
    from momscat.operators import assemble, assemble_efie_matrix, excite_plane_wave
    from momscat.postproc import far_field, relative_error_cut, current_error
    from momscat.rwg import build_rwg_space
    from momscat.scenario import ConfigError, build_mesh, plane_wave
    from momscat.solvers import dense_solve

    edges = sorted((float(e) for e in args.edges.split(",")), reverse=True)
    if len(edges) < 3:
        raise ConfigError("refinement study needs at least 3 levels")
    scenario = _load_scenario(args)
    theta, phi = scenario.cut_grid()

    # reference: Mie for spheres, EFIE on the finest mesh otherwise
    finest = None
    if scenario.reference_kind != "mie":
        fine_scenario = _scenario_with_edge(scenario, edges[-1] / 2.0)
        fine_mesh = build_mesh(fine_scenario)
        fine_space = build_rwg_space(fine_mesh)
        efie = assemble_efie_matrix(fine_space, scenario.frequency)
        exc = excite_plane_wave(fine_space, plane_wave(scenario))
        sol = dense_solve(efie, exc.e)
        finest = far_field(fine_space, sol, None, plane_wave(scenario).k0, theta, phi)

    rows = []
    failed = False
    for edge in edges:
        level = _scenario_with_edge(scenario, edge)
        mesh = build_mesh(level)
        space = build_rwg_space(mesh)
        stats = mesh_stats(mesh)
        ops = assemble(space, scenario.frequency)
        exc = excite_plane_wave(space, plane_wave(scenario))
        reference = finest if finest is not None else _reference_cut(scenario, mesh, theta, phi)
        i_ref = None
        for res in _run_formulations(scenario, mesh, space, ops, exc, theta, phi):
            failed |= not res["converged"]
            err = relative_error_cut(res["cut"], reference)
            if res["kind"] == "EFIE":
                i_ref = res["solution"]
            eps_i = ""
            if i_ref is not None and res["kind"] != "EFIE":
                eps_i = _fmt_lin(current_error(res["solution"], i_ref))
            rows.append((_fmt_lin(edge), _fmt_lin(stats.mean_edge_length), str(space.n),
                         res["kind"], str(res["iterations"]), _fmt_db(err.eps_max_db), eps_i))
    _write_csv(args.out_dir, "refine.csv", "refine",
               ("target_edge", "mean_edge", "n", "formulation", "iterations",
                "eps_max_db", "eps_i_vs_efie"), rows)
    return EXIT_SOLVER if failed else EXIT_OK


def _scenario_with_edge(scenario, edge):
    import copy

    out = copy.copy(scenario)
    out.geometry = dict(scenario.geometry)
    out.geometry["target_edge"] = edge
    return out


def _cmd_freq_sweep(args):
    import numpy as np
    from momscat.operators import assemble, excite_plane_wave
    from momscat.postproc import relative_error_cut
    from momscat.rwg import build_rwg_space
    from momscat.scenario import ConfigError, build_mesh, plane_wave

    if args.f_step <= 0.0 or args.f_stop <= args.f_start:
        raise ConfigError("need f_stop > f_start and f_step > 0")
    freqs = np.arange(args.f_start, args.f_stop + 0.5 * args.f_step, args.f_step)
    scenario = _load_scenario(args)
    mesh = build_mesh(scenario)
    space = build_rwg_space(mesh)
    theta, phi = scenario.cut_grid()

    results = {kind: [] for kind in scenario.kinds}
    failed = False
    for f in freqs:
        ops = assemble(space, f)
        exc = excite_plane_wave(space, plane_wave(scenario, frequency=f))
        reference = _reference_cut(scenario, mesh, theta, phi, frequency=f)
        for res in _run_formulations(scenario, mesh, space, ops, exc, theta, phi):
            failed |= not res["converged"]
            eps = ""
            if reference is not None:
                eps = _fmt_db(relative_error_cut(res["cut"], reference).eps_max_db)
            results[res["kind"]].append((f, res["iterations"], res["converged"], eps))

    rows = []
    for kind in scenario.kinds:
        its = np.array([r[1] for r in results[kind]], dtype=float)
        median = float(np.median(its))
        for (f, iterations, converged, eps) in results[kind]:
            spike = int(iterations >= 1.5 * median)
            rows.append((_fmt_lin(f), kind, str(iterations), str(int(converged)), eps, str(spike)))
    _write_csv(args.out_dir, "freq_sweep.csv", "freq-sweep",
               ("frequency_hz", "formulation", "iterations", "converged",
                "eps_max_db", "resonance_flag"), rows)
    return EXIT_SOLVER if failed else EXIT_OK


def _cmd_lf_sweep(args):
    import numpy as np
    from momscat.operators import assemble, excite_plane_wave
    from momscat.postproc import lf_divergence_sweep
    from momscat.rwg import build_rwg_space
    from momscat.scenario import ConfigError, build_mesh, plane_wave
    from momscat.formulations import make_formulation
    from momscat.scenario import formulation_config

    if args.decades < 1 or args.points_per_decade < 1:
        raise ConfigError("need at least one decade and one point per decade")
    scenario = _load_scenario(args)
    mesh = build_mesh(scenario)
    space = build_rwg_space(mesh)
    n_pts = args.decades * args.points_per_decade + 1
    freqs = scenario.frequency * 10.0 ** (-np.arange(n_pts) / args.points_per_decade)

    rows = []
    for kind in scenario.kinds:
        def factory(f, kind=kind):
            ops = assemble(space, f)
            exc = excite_plane_wave(space, plane_wave(scenario, frequency=f))
            return make_formulation(ops, exc, formulation_config(scenario, kind))

        for rec in lf_divergence_sweep(space, factory, freqs):
            rows.append((_fmt_lin(rec["frequency"]), kind, _fmt_lin(rec["re_i"]),
                         _fmt_lin(rec["im_i"]), _fmt_lin(rec["re_d"]), _fmt_lin(rec["im_d"])))
    _write_csv(args.out_dir, "lf_sweep.csv", "lf-sweep",
               ("frequency_hz", "formulation", "re_i", "im_i", "re_d", "im_d"), rows)
    return EXIT_OK


def _cmd_mie(args):
    from momscat.scenario import ConfigError, build_mesh

    scenario = _load_scenario(args)
    scenario.reference_kind = "mie"
    mesh = build_mesh(scenario)
    theta, phi = scenario.cut_grid()
    cut = _reference_cut(scenario, mesh, theta, phi)
    write_farfield_csv(args.out_dir, "farfield_MIE.csv", cut, scenario.amplitude)
    return EXIT_OK


def _cmd_mesh_info(args):
    from momscat.mesh import load_mesh, mesh_stats
    from momscat.rwg import build_rwg_space
    from momscat.scenario import ConfigError, build_mesh

    if args.mesh:
        mesh = load_mesh(args.mesh)
    elif args.config:
        mesh = build_mesh(_load_scenario(args))
    else:
        raise ConfigError("mesh-info needs --config or --mesh")
    stats = mesh_stats(mesh)
    space = build_rwg_space(mesh)
    print(f"triangles:        {stats.triangle_count}")
    print(f"edges:            {stats.edge_count}")
    print(f"rwg unknowns:     {space.n}")
    print(f"mean edge length: {stats.mean_edge_length:.6g} m")
    print(f"max edge length:  {stats.max_edge_length:.6g} m")
    print(f"total area:       {stats.total_area:.6g} m^2")
    print(f"enclosed volume:  {mesh.signed_volume():.6g} m^3")
    if args.out_dir:
        _write_csv(args.out_dir, "mesh_info.csv", "mesh-info",
                   ("triangles", "edges", "rwg_unknowns", "mean_edge", "max_edge",
                    "total_area", "volume"),
                   [(str(stats.triangle_count), str(stats.edge_count), str(space.n),
                     _fmt_lin(stats.mean_edge_length), _fmt_lin(stats.max_edge_length),
                     _fmt_lin(stats.total_area), _fmt_lin(mesh.signed_volume()))])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
