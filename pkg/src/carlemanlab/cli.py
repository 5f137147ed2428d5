"""Command-line entry point.

    carlemanlab worstcase [--epsilon E ...] [--t-end T] [--dt DT]
    carlemanlab chaos fig2 [--k K] [--seed S] [--samples N] [--t-end T]
    carlemanlab chaos fig34 [--k K] [--xi XI] [--cmax C] [--dt DT] [--t-end T]
    carlemanlab carleman SYSTEM.json --u0 U [--cmax C] [--dt DT] [--t-end T]

Common flags: ``--out DIR`` (default ``$CARLEMANLAB_OUT`` or ``./out``) and
``--svg``. Files land in ``<out>/<subcommand>/<param-slug>/``.

Exit codes: 0 success, 2 usage or malformed input, 3 numerical failure,
4 capacity exceeded.
"""

from __future__ import annotations

import argparse
import logging
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import carleman, chaos, worstcase
from .errors import CapacityError, DivergenceError, LabError, NonDissipativeError, ParseError
from .io import default_outdir, read_system, write_csv, write_json
from .quadratic_ode import reynolds_like_r, spectral_report
from .reference import IntegratorConfig
from .svg import LineChart

log = logging.getLogger("carlemanlab")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_CAPACITY = 0, 2, 3, 4
DEFAULT_SEED = 20230401


class UsageError(Exception):
    pass


def _g(x) -> str:
    return f"{x:g}"


def slug(**params) -> str:
    parts = []
    for key, val in params.items():
        if isinstance(val, (list, tuple)):
            val = "_".join(_g(v) for v in val)
        elif isinstance(val, float):
            val = _g(val)
        parts.append(f"{key}{val}")
    return "-".join(parts).replace("+", "")


def _float_list(values):
    out = []
    for v in values or []:
        for piece in str(v).split(","):
            if piece.strip():
                try:
                    out.append(float(piece))
                except ValueError:
                    raise UsageError(f"not a number: {piece!r}") from None
    return out


# -- worstcase ---------------------------------------------------------------------


def cmd_worstcase(args) -> list[Path]:
    eps_list = _float_list(args.epsilon) if args.epsilon is not None else [1e-2, 1e-3, 1e-4]
    if not eps_list:
        raise UsageError("--epsilon needs at least one value")
    for e in eps_list:
        if not 0 < e < worstcase.EPS_MAX:
            raise UsageError(f"epsilon {e} outside (0, e^-3)")
    t_end = 20.0 if args.t_end is None else args.t_end
    dt = 0.01 if args.dt is None else args.dt
    if not (t_end > 0 and dt > 0):
        raise UsageError("--t-end and --dt must be positive")
    outdir = Path(args.out) / "worstcase" / slug(eps=eps_list, t=t_end, dt=dt)
    t = dt * np.arange(carleman.n_steps(t_end, dt) + 1)
    files = []
    rows = []
    for e in eps_list:
        cur = worstcase.ratio_curves(e, t)
        cols = ["t", "S_psi", "S_phi", "S_psi_lin", "S_phi_lin"]
        files.append(write_csv(outdir / f"ratios_eps{_g(e)}.csv", cols, [cur[c] for c in cols]))
        rows.append(worstcase.overlap_table_row(e))
        if args.svg:
            ch = LineChart(title=f"ratios, eps={_g(e)}", xlabel="t", ylabel="S")
            for c in cols[1:]:
                ch.add(t, cur[c], c, dashed=c.endswith("_lin"), ylim=(-5, 5))
            files.append(ch.write(outdir / f"ratios_eps{_g(e)}.svg"))
    keys = ["epsilon", "t_star", "overlap", "overlap_numeric", "analytic_ceiling", "ceiling", "k_min"]
    files.append(write_csv(outdir / "overlap_table.csv", keys, [[r[k] for r in rows] for k in keys]))
    files.append(write_json(outdir / "summary.json", {
        "epsilon": eps_list, "overlap_table": rows,
        "all_below_ceiling": all(r["overlap"] <= worstcase.OVERLAP_CEILING for r in rows)}))
    return files


# -- chaos ---------------------------------------------------------------------------


def _chaos_k(args):
    k = chaos.DEFAULT_K if args.k is None else args.k
    if not -1.0 <= k < 0.0:
        raise UsageError(f"--k must lie in [-1, 0), got {k}")
    return k


def cmd_chaos(args) -> list[Path]:
    k = _chaos_k(args)
    xi = chaos.DEFAULT_XI if args.xi is None else args.xi
    if not xi > 0:
        raise UsageError("--xi must be positive")
    base = chaos.summary(k, xi)
    files = []
    if args.experiment == "fig2":
        seed = DEFAULT_SEED if args.seed is None else args.seed
        t_end = 400.0 if args.t_end is None else args.t_end
        samples = 100 if args.samples is None else args.samples
        workers = 1 if args.workers is None else args.workers
        if samples < 1 or workers < 1 or t_end <= 0:
            raise UsageError("--samples and --workers must be >= 1, --t-end positive")
        outdir = Path(args.out) / "chaos" / "fig2" / slug(k=k, seed=seed, n=samples, t=t_end)
        res = chaos.run_fig2(k, seed, n_samples=samples, t_end=t_end, workers=workers)
        files.append(res.trajectory.to_csv(outdir / "trajectory.csv"))
        s = res.trajectory.states
        files.append(write_csv(outdir / "xy.csv", ["x", "y"], [s[:, 0], s[:, 1]]))
        files.append(res.lyapunov.to_csv(outdir / "separation.csv"))
        files.append(write_json(outdir / "summary.json", {**base, **res.summary()}))
        if args.svg:
            ch = LineChart(title="x-y phase plot", xlabel="x", ylabel="y")
            ch.add(s[:, 0], s[:, 1], "trajectory")
            files.append(ch.write(outdir / "xy.svg"))
            ch = LineChart(title="components", xlabel="t")
            for i, name in enumerate("xyz"):
                ch.add(res.trajectory.times, s[:, i], name)
            files.append(ch.write(outdir / "components.svg"))
            est = res.lyapunov
            ch = LineChart(title=f"mean separation, lambda={est.lambda_t:.3f}", xlabel="t", logy=True)
            ch.add(est.times, est.mean_separation, "mean |du|")
            ta, tb = est.fit_window
            tw = est.times[(est.times >= ta) & (est.times <= tb)]
            ch.add(tw, np.exp(est.intercept + est.lambda_t * tw), "fit", dashed=True)
            files.append(ch.write(outdir / "separation.svg"))
    else:
        c_max = 5 if args.cmax is None else args.cmax
        dt = 1e-3 if args.dt is None else args.dt
        t_end = 10.0 if args.t_end is None else args.t_end
        if c_max < 1 or dt <= 0 or t_end <= 0:
            raise UsageError("--cmax must be >= 1, --dt and --t-end positive")
        outdir = Path(args.out) / "chaos" / "fig34" / slug(k=k, xi=xi, cmax=c_max, dt=dt, t=t_end)
        res = chaos.run_fig34(k, c_max, dt, t_end, xi=xi)
        for ic, ref in res.references.items():
            files.append(ref.to_csv(outdir / f"reference_{ic}.csv"))
        for (scheme, ic, c), curve in sorted(res.curves.items()):
            files.append(curve.to_csv(outdir / f"err_{scheme}_{ic}_C{c}.csv"))
        summ = {**base, "fig34": res.summary(),
                "decay_strictly_decreasing_expm": chaos.decay_error_ordering(res, "expm"),
                "chaos_to_decay_ratio_expm": chaos.chaos_error_ratio(res, "expm")}
        files.append(write_json(outdir / "summary.json", summ))
        if args.svg:
            for scheme in ("euler", "expm"):
                for ic in ("chaos", "decay"):
                    ch = LineChart(title=f"{ic} IC, {scheme}", xlabel="t", ylabel="|u - u_C|", logy=True)
                    for curve in chaos.curves_as_error(res, scheme, ic):
                        ch.add(curve.times, curve.err, f"C={curve.order}")
                    files.append(ch.write(outdir / f"err_{scheme}_{ic}.svg"))
    return files


# -- carleman ----------------------------------------------------------------------


def cmd_carleman(args) -> list[Path]:
    system = read_system(args.system)
    u0 = np.array(_float_list(args.u0))
    if u0.size != system.dim:
        raise UsageError(f"--u0 needs {system.dim} values, got {u0.size}")
    c = 3 if args.cmax is None else args.cmax
    dt = 1e-3 if args.dt is None else args.dt
    t_end = 1.0 if args.t_end is None else args.t_end
    if c < 1 or dt <= 0 or t_end <= 0:
        raise UsageError("--cmax must be >= 1, --dt and --t-end positive")
    name = Path(args.system).stem
    outdir = Path(args.out) / "carleman" / slug(sys=name, C=c, dt=dt, t=t_end, scheme=args.scheme)
    op = carleman.assemble(system, c)
    y0 = carleman.lift_initial(u0, c)
    M, rhs = carleman.assemble_global(op, y0, dt, t_end, size_cap=args.cap)
    traj = carleman.SCHEMES[args.scheme](op, y0, dt, t_end, keep_lifted=True)
    files = [traj.to_csv(outdir / "carleman.csv")]
    summary = {"system": name, "dim": system.dim, "order": c, "lifted_dim": op.lifted_dim,
               "nnz_A": int(op.a.nnz), "dt": dt, "t_end": t_end, "scheme": args.scheme,
               "u0": u0}
    rep = spectral_report(system)
    summary["f2_norm"] = rep.f2_spectral_norm
    summary["max_real_part"] = rep.max_real_part
    try:
        summary["R"] = reynolds_like_r(system, u0)
    except (NonDissipativeError, ValueError):
        summary["R"] = None

    glob = carleman.solve_global(M, rhs, op.lifted_dim)
    euler = traj if args.scheme == "euler" else carleman.integrate_euler(op, y0, dt, t_end, keep_lifted=True)
    scale = max(float(np.abs(euler.states).max()), np.finfo(float).tiny)
    diff_u = float(np.abs(glob[:, : system.dim] - euler.states).max()) / scale
    diff_y = float(np.abs(glob[-1] - euler.lifted_final).max()) / max(
        float(np.abs(euler.lifted_final).max()), np.finfo(float).tiny)
    summary["global_solve"] = {"rel_diff_u": diff_u, "rel_diff_final_lifted": diff_y,
                               "matches_euler": max(diff_u, diff_y) <= 1e-12,
                               "unknowns": int(M.shape[0]), "nnz": int(M.nnz)}

    cfg = IntegratorConfig()
    try:
        ref = carleman.reference_on_grid(system, u0, dt, t_end, cfg)
    except DivergenceError as exc:
        summary["reference_blowup_time"] = exc.time
        ref = None
    if ref is not None:
        files.append(ref.to_csv(outdir / "reference.csv"))
        curve = carleman.truncation_error(system, u0, c, dt, t_end, ref, args.scheme)
        files.append(curve.to_csv(outdir / "error.csv"))
        summary["max_error"] = curve.max_error
        summary["diverged"] = curve.diverged
        if args.svg:
            ch = LineChart(title=f"truncation error, C={c}", xlabel="t", ylabel="|u - u_C|", logy=True)
            ch.add(curve.times, curve.err, f"C={c}")
            files.append(ch.write(outdir / "error.svg"))
    files.append(write_json(outdir / "summary.json", summary))
    return files


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output root (default $CARLEMANLAB_OUT or ./out)")
    common.add_argument("--svg", action="store_true", help="also render SVG charts")
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--dt", type=float)
    common.add_argument("--config", help="JSON file of flag defaults, e.g. {\"k\": -0.001}")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="carlemanlab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("worstcase", parents=[common], help="ratio curves and overlap table")
    w.add_argument("--epsilon", nargs="*", help="one or more epsilons (space or comma separated)")
    w.set_defaults(func=cmd_worstcase)

    c = sub.add_parser("chaos", parents=[common], help="chaotic system with a stable fixed point")
    c.add_argument("experiment", choices=["fig2", "fig34"])
    c.add_argument("--k", type=float)
    c.add_argument("--xi", type=float)
    c.add_argument("--cmax", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--samples", type=int)
    c.add_argument("--workers", type=int)
    c.set_defaults(func=cmd_chaos)

    g = sub.add_parser("carleman", parents=[common], help="Carleman pipeline for a system file")
    g.add_argument("system", help="JSON system definition")
    g.add_argument("--u0", nargs="+", required=True)
    g.add_argument("--cmax", type=int)
    g.add_argument("--scheme", choices=sorted(carleman.SCHEMES), default="euler")
    g.add_argument("--cap", type=int, default=carleman.GLOBAL_CAP,
                   help="nonzero budget for the all-timesteps system")
    g.set_defaults(func=cmd_carleman)
    return p


def apply_config(args, path):
    """Fill flags left unset on the command line from a JSON object."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    for key, val in doc.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("func", "command", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, attr) is None:
            setattr(args, attr, val)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.config:
        try:
            apply_config(args, args.config)
        except (OSError, ValueError, UsageError) as exc:
            print(f"carlemanlab: bad config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.out is None:
        args.out = str(default_outdir())
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            files = args.func(args)
    except UsageError as exc:
        print(f"carlemanlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"carlemanlab: malformed system file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"carlemanlab: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (LabError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"carlemanlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"carlemanlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for f in files:
        log.info("wrote %s", f)
    print(f"wrote {len(files)} files under {Path(args.out)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
