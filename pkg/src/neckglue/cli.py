"""Command-line interface.

Commands
--------
validate <cfg>           hypothesis verdicts H1/H2/H3 and the neck scales
interaction <cfg>        Gamma/Lambda closed forms cross-checked by quadrature
neck --n N --beta B --eps E [--grid H] [--export P]
                         model-neck identities and FD minimality floor
spectrum --n N --k K     indicial roots, frozen-coefficient check, explicit
                         solutions (n=3, k=1)
glue <cfg> [--export P]  assemble the surface, boundary gaps, curvature,
                         one matching step (n=3)
dtn --degree L           Dirichlet-to-Neumann eigenvalues and matching solve

Exit codes: 0 all checks pass, 1 a hypothesis/check failed, 2 input error.
The config file is JSON: n, points (k n-vectors), rotations (k row-major
n x n matrices, nested or flat), A0 (row-major), epsilon, rho_star, and an
optional "options" object (quadrature_nodes, mc_samples, seed, sh_degree,
outer_spacing, neck_s_nodes, neck_angle_nodes).  NECKGLUE_THREADS caps the
BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

__all__ = ["main", "parse_config"]


def _configure_threads() -> None:
    count = os.environ.get("NECKGLUE_THREADS")
    if not count:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, count)


def parse_config(path: str):
    """Parse and validate a configuration file.

    Returns (Configuration, options dict).  Malformed JSON is reported with
    line/column anchors; semantic violations name the offending key.
    """
    import numpy as np

    from .config import Configuration

    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValueError(f"{path}: cannot read config: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: top level must be an object")

    def need(key):
        if key not in doc:
            raise ValueError(f"{path}: missing required key {key!r}")
        return doc[key]

    try:
        n = int(need("n"))
        points = np.asarray(need("points"), dtype=float)
        rotations_raw = need("rotations")
        rotations = []
        for j, rot in enumerate(rotations_raw):
            arr = np.asarray(rot, dtype=float)
            if arr.ndim == 1:
                if arr.size != n * n:
                    raise ValueError(
                        f"{path}: rotations[{j}] has {arr.size} entries, expected {n * n}"
                    )
                arr = arr.reshape(n, n)  # row-major
            rotations.append(arr)
        rotations = np.stack(rotations)
        A0 = np.asarray(need("A0"), dtype=float)
        if A0.ndim == 1:
            if A0.size != n * n:
                raise ValueError(f"{path}: A0 has {A0.size} entries, expected {n * n}")
            A0 = A0.reshape(n, n)
        epsilon = float(need("epsilon"))
        rho_star = float(need("rho_star"))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc

    try:
        config = Configuration(
            n=n, points=points, rotations=rotations, A0=A0,
            epsilon=epsilon, rho_star=rho_star,
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc

    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise ValueError(f"{path}: 'options' must be an object")
    return config, options


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def _interaction_sections(report, config, system):
    import numpy as np

    report.section("interaction", {
        "gamma": system.gamma,
        "lambda": system.lam,
        "alpha": None if system.alpha is None else system.alpha,
        "rcond": system.rcond,
        "h1": [
            {"pair": [r.j, r.jp], "residual": r.residual, "holds": r.holds}
            for r in system.h1
        ],
    })
    for r in system.h1:
        report.check(f"h1[{r.j},{r.jp}] residual", r.residual, 1e-8, op=">")
    report.check("h2 rcond", system.rcond, 1e-10, op=">")
    if system.alpha is not None:
        resid = float(np.linalg.norm(system.gamma @ system.alpha - system.lam))
        scale = max(1.0, float(np.linalg.norm(system.lam)))
        report.check("alpha solve residual", resid / scale, 1e-10)
        report.flag("h3 positivity", bool(np.min(system.alpha) > 0),
                    f"alpha = {system.alpha.tolist()}")
    else:
        report.flag("h3 positivity", False, "Gamma numerically singular")


def cmd_validate(args) -> int:
    from .config import build_interaction_system
    from .report import RunReport
    from .assembler import config_digest

    config, _ = parse_config(args.config)
    report = RunReport("validate", config_digest(config))
    system = build_interaction_system(config)
    _interaction_sections(report, config, system)
    report.time_mark("total")
    return _finish(report, args)


def cmd_interaction(args) -> int:
    import numpy as np

    from .config import build_interaction_system, gamma_entry_quadrature, \
        lambda_entry_quadrature
    from .quadrature import PRODUCT_RULE_MAX_DIM, monte_carlo_rule, product_gauss_rule
    from .report import RunReport
    from .assembler import config_digest

    config, options = parse_config(args.config)
    report = RunReport("interaction", config_digest(config))
    system = build_interaction_system(config)
    _interaction_sections(report, config, system)

    seed = args.seed if args.seed is not None else int(options.get("seed", 0))
    if config.n <= PRODUCT_RULE_MAX_DIM:
        rule = product_gauss_rule(config.n, int(options.get("quadrature_nodes", 32)))
    else:
        rule = monte_carlo_rule(config.n, int(options.get("mc_samples", 200000)), seed)
    cross = {"rule": rule.kind, "entries": []}
    for j in range(config.k):
        for jp in range(j + 1, config.k):
            est, sigma = gamma_entry_quadrature(config, j, jp, rule)
            diff = abs(est - system.gamma[j, jp])
            cross["entries"].append(
                {"pair": [j, jp], "quadrature": est, "closed_form": system.gamma[j, jp],
                 "sigma": sigma}
            )
            if rule.kind == "monte-carlo":
                report.check(f"gamma[{j},{jp}] quadrature |diff|", diff,
                             max(3.0 * sigma, 1e-12))
            else:
                report.check(f"gamma[{j},{jp}] quadrature |diff|", diff, 1e-6)
        est, sigma = lambda_entry_quadrature(config, j, rule)
        diff = abs(est - system.lam[j])
        if rule.kind == "monte-carlo":
            report.check(f"lambda[{j}] quadrature |diff|", diff, max(3.0 * sigma, 1e-12))
        else:
            report.check(f"lambda[{j}] quadrature |diff|", diff, 1e-6)
    report.section("quadrature_cross_check", cross)
    report.time_mark("total")
    return _finish(report, args)


def cmd_neck(args) -> int:
    import numpy as np

    from .geometry import mean_curvature_field
    from .neck import NeckParams, default_angle_grids, neck_patch, s_to_t, t_to_s, \
        waist_radius
    from .report import RunReport

    report = RunReport("neck")
    params = NeckParams(n=args.n, beta=args.beta, epsilon=args.eps)

    s = np.linspace(1e-3, np.pi / args.n - 1e-3, 20001)
    t = s_to_t(s, args.n)
    report.check("s<->t round trip", float(np.max(np.abs(t_to_s(t, args.n) - s))), 1e-12)
    report.check("sin(ns) cosh(nt) - 1", float(np.max(np.abs(np.sin(args.n * s) * np.cosh(args.n * t) - 1.0))), 1e-12)
    report.check("cos(ns) + tanh(nt)", float(np.max(np.abs(np.cos(args.n * s) + np.tanh(args.n * t)))), 1e-12)

    def build(h):
        t_nodes = int(round(2.4 / h)) + 1
        polar = max(9, int(round((np.pi - 1.0) / h)) | 1)
        azim = max(16, int(round(2 * np.pi / h)))
        counts = (polar,) * (args.n - 2) + (azim,)
        grids = default_angle_grids(args.n, counts, margin=0.5)
        return neck_patch(params, angle_grids=grids,
                          t_grid=np.linspace(-1.2, 1.2, t_nodes))

    h0 = args.grid if args.grid else 0.2
    sups = []
    for h in (h0, h0 / 2):
        H, valid = mean_curvature_field(build(h))
        sups.append(float(np.max(np.linalg.norm(H, axis=-1)[valid])))
    order = float(np.log2(sups[0] / sups[1]))
    report.section("minimality", {"waist_radius": waist_radius(params),
                                  "fd_sup_by_level": sups, "observed_order": order})
    report.check("minimality FD order - 2", abs(order - 2.0), 0.4)
    if args.export:
        _export(patch_list=[build(h0)], path=args.export)
        report.section("export", {"path": args.export})
    report.time_mark("total")
    return _finish(report, args)


def cmd_spectrum(args) -> int:
    import numpy as np

    from .report import RunReport
    from .spectrum import ModeSolution, decay_rate, explicit_n3_residual, \
        explicit_n3_solution, frozen_characteristic_roots, indicial_roots, verify_f0

    report = RunReport("spectrum")
    table = indicial_roots(args.n, args.k)
    sec = {
        "exact_mu": [str(v) for v in table.exact_mu],
        "exact_nu": None if table.exact_nu is None else [str(v) for v in table.exact_nu],
        "coexact": None if table.coexact is None else [str(v) for v in table.coexact],
    }
    if args.k >= 1:
        roots = frozen_characteristic_roots(args.n, args.k)
        expect = np.sort([float(table.exact_mu[0]), float(table.exact_mu[1]),
                          float(table.exact_nu[0]), float(table.exact_nu[1])])
        err = float(np.max(np.abs(np.sort(roots) - expect)))
        sec["frozen_roots"] = list(np.sort(roots))
        report.check("frozen roots vs closed form", err, 1e-12)
        rootsc = frozen_characteristic_roots(args.n, args.k, family="coexact")
        g = float(table.coexact[0])
        report.check("frozen coexact roots vs closed form",
                     float(np.max(np.abs(np.sort(rootsc) - np.array([-g, g])))), 1e-12)
    report.check("f0 residual", verify_f0(args.n, np.linspace(-5.0, 5.0, 2001)), 1e-12)
    if args.n == 3 and args.k == 1:
        report.check("explicit (a1,b1) residual", explicit_n3_residual(np.linspace(-3, 3, 241)), 1e-8)
        tneg = np.linspace(-12.0, -2.0, 400)
        a, b = explicit_n3_solution(tneg)
        rate, r2 = decay_rate(ModeSolution(3, 1, "interior", tneg, a, b), end=-1)
        sec["rate_minus_inf"] = rate
        report.check("decay rate at -inf vs 5/2", abs(rate - 2.5), 1e-2)
        tpos = np.linspace(2.0, 12.0, 400)
        a, b = explicit_n3_solution(tpos)
        rate2, _ = decay_rate(ModeSolution(3, 1, "interior", tpos, a, b), end=+1)
        sec["rate_plus_inf"] = rate2
        report.check("growth rate at +inf vs 1/2", abs(rate2 - 0.5), 1e-2)
    report.section("spectrum", sec)
    report.time_mark("total")
    return _finish(report, args)


def cmd_glue(args) -> int:
    import numpy as np

    from .assembler import GridSpec, assemble, boundary_gap, config_digest, \
        curvature_report, export_csv, export_ply
    from .config import build_interaction_system
    from .green import GreenData, balance_residual
    from .report import RunReport

    config, options = parse_config(args.config)
    report = RunReport("glue", config_digest(config))
    system = build_interaction_system(config)
    _interaction_sections(report, config, system)
    if not (system.h1_holds and system.h2 and system.h3):
        report.print_summary()
        _write_report(report, args)
        return 1

    data = GreenData(config, system.alpha)
    balance = balance_residual(data)
    report.section("balance", {"residual_per_end": balance})
    report.check("balance residual at Gamma^-1 Lambda", float(np.max(balance)), 1e-8)

    grid = GridSpec(
        neck_s_nodes=int(options.get("neck_s_nodes", 48)),
        neck_angle_nodes=options.get("neck_angle_nodes"),
        outer_spacing=options.get("outer_spacing"),
    )
    surface = assemble(config, system.alpha, grid)
    gaps = boundary_gap(surface)
    curv = curvature_report(surface)
    report.section("boundary_gap", gaps)
    report.section("curvature", curv)
    report.section("scales", surface.scales)

    if config.n == 3:
        corr = _measured_matching(config, system, surface,
                                  L=int(options.get("sh_degree", 8)))
        report.section("matching_step", corr)
        report.check("matching residual", corr["residual_norm"], 1e-10)

    if args.export:
        export_ply(surface, args.export)
        csv_path = args.export.rsplit(".", 1)[0] + ".csv"
        export_csv(surface, csv_path)
        report.section("export", {"ply": args.export, "csv": csv_path})
    report.time_mark("total")
    return _finish(report, args)


def _measured_matching(config, system, surface, L=8):
    """Measure the leading-order boundary discrepancies of the assembled
    surface per end and run one linear matching solve on them."""
    import math

    import numpy as np

    from .green import green_eval, green_gradient
    from .matching import SphereGrid, match_boundaries, sh_analyze

    grid = SphereGrid(L)
    eps = config.epsilon
    rho = config.rho_star
    data = surface.green
    discrepancies = []
    for j in range(config.k):
        params = surface.neck_params[j]
        s_star = surface.scales[j]["s_star"]
        nodes = grid.nodes.reshape(-1, 3)
        base = config.points[j] + rho * nodes
        outer_y = eps * green_eval(data, base)
        n = config.n

        def neck_y(s):
            rad = params.scale * math.sin(n * s) ** (-1.0 / n)
            return rad * math.sin(s) * (nodes @ params.rotation.T) + params.translation.y

        gap = (outer_y - neck_y(s_star)).reshape(grid.nodes.shape)
        value_gap = sh_analyze(gap, grid)

        DG = green_gradient(data, base)
        douter = eps * np.einsum("pil,pl->pi", DG, nodes)
        h = 1e-6

        def radius(s):
            return params.scale * math.cos(s) * math.sin(n * s) ** (-1.0 / n)

        drds = (radius(s_star + h) - radius(s_star - h)) / (2 * h)
        dneck = (neck_y(s_star + h) - neck_y(s_star - h)) / (2 * h) / drds
        conormal_gap = sh_analyze((rho * (douter - dneck)).reshape(grid.nodes.shape), grid)
        discrepancies.append((value_gap, conormal_gap))

    corr = match_boundaries(config, system.alpha, discrepancies, gamma=system.gamma)
    return {
        "delta_alpha": corr.delta_alpha,
        "delta_beta": corr.delta_beta,
        "phi_sup": [p.norm() for p in corr.phi],
        "phi_tilde_sup": [p.norm() for p in corr.phi_tilde],
        "residual_norm": corr.residual_norm,
    }


def cmd_dtn(args) -> int:
    import numpy as np

    from .matching import SHExpansion, dtn_solve, p_ext, p_int
    from .matching import _degrees
    from .report import RunReport

    report = RunReport("dtn")
    L = args.degree
    deg = _degrees(L)
    eigs = -(2.0 * deg + 1.0)
    report.section("dtn", {"degrees": deg.tolist(), "eigenvalues": eigs.tolist()})
    rng = np.random.default_rng(args.seed or 0)
    rhs = SHExpansion(L, rng.standard_normal((3, (L + 1) ** 2)))
    phi = dtn_solve(rhs)
    back = p_ext(phi) - p_int(phi)
    report.check("dtn round trip", float(np.max(np.abs(back.coeffs - rhs.coeffs))), 1e-12)
    # eigenvalue table is exact by construction; verify through a basis sweep
    worst = 0.0
    for slot in range((L + 1) ** 2):
        e = np.zeros((3, (L + 1) ** 2))
        e[0, slot] = 1.0
        diff = p_ext(SHExpansion(L, e)) - p_int(SHExpansion(L, e))
        worst = max(worst, float(np.max(np.abs(diff.coeffs - eigs[slot] * e))))
    report.check("dtn eigenvalues -(2k+1)", worst, 1e-15)
    report.time_mark("total")
    return _finish(report, args)


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

def _export(patch_list, path):
    from .assembler import export_csv, export_ply

    if path.endswith(".csv"):
        export_csv(patch_list, path)
    else:
        export_ply(patch_list, path)


def _write_report(report, args) -> None:
    if getattr(args, "report", None):
        report.write(args.report)


def _finish(report, args) -> int:
    report.print_summary()
    _write_report(report, args)
    return 0 if report.all_passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neckglue",
        description="numerical desingularization of plane configurations by minimal necks",
    )
    # accepted both before and after the subcommand (SUPPRESS keeps the
    # subparser from clobbering a value parsed at the top level)
    parser.add_argument("--report", default=None, help="write the JSON report to this path")
    parser.add_argument("--seed", type=int, default=None, help="Monte Carlo seed")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--report", default=argparse.SUPPRESS)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[shared], help="check H1-H3 for a configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("interaction", parents=[shared], help="Gamma/Lambda with quadrature cross-check")
    p.add_argument("config")
    p.set_defaults(func=cmd_interaction)

    p = sub.add_parser("neck", parents=[shared], help="model neck identities and minimality")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--grid", type=float, default=None,
                   help="FD grid spacing in the cylindrical chart (default 0.2)")
    p.add_argument("--export", default=None)
    p.set_defaults(func=cmd_neck)

    p = sub.add_parser("spectrum", parents=[shared], help="indicial roots and explicit solutions")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("glue", parents=[shared], help="assemble and verify the glued surface")
    p.add_argument("config")
    p.add_argument("--export", default=None)
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("dtn", parents=[shared], help="Dirichlet-to-Neumann witness")
    p.add_argument("--degree", type=int, default=8)
    p.set_defaults(func=cmd_dtn)
    return parser


def main(argv=None) -> int:
    _configure_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
