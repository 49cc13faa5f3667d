"""Command line entry point: ``twopeak <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, default_config, load_config
from .galerkin import GalerkinError
from .integrate import ConvergenceError
from .reduced import ReducedError


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "eps_list", None):
        cfg = cfg.with_eps(args.eps_list)
    return cfg


def _emit(text: str, out) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    from .pipeline import _jsonable

    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def cmd_constants(args) -> int:
    from .pipeline import RunReport, constants_rows, constants_table_csv

    cfg = _config(args)
    betas = args.beta or [p.beta for p in cfg.profiles]
    n = args.n or cfg.n
    rep = RunReport(config={}, constants=constants_rows(n, betas, cfg.quadrature))
    _emit(constants_table_csv(rep), args.out)
    return 0


def cmd_verify(args) -> int:
    from .pipeline import VERIFIERS, run_verifiers

    cfg = _config(args)
    names = args.names or list(VERIFIERS)
    verdicts = run_verifiers(cfg, names)
    for name, v in verdicts.items():
        failed = [k for k, ok in v["checks"].items() if not ok]
        status = "PASS" if v["passed"] else "FAIL"
        print(f"{name}: {status}" + (f" ({', '.join(failed)})" if failed else ""), file=sys.stderr)
    if args.out:
        _emit(_dump(verdicts), args.out)
    return 0 if all(v["passed"] for v in verdicts.values()) else 1


def cmd_reduce(args) -> int:
    from .galerkin import build_space, reduced_gradients, solve_correction

    cfg = _config(args)
    eps = args.eps if args.eps is not None else max(cfg.eps_list)
    centers = [p.z + np.asarray(args.offset or np.zeros(cfg.n)) * (k == 0) for k, p in enumerate(cfg.profiles)]
    sp = build_space(cfg.n, centers, tuple(args.lam), cfg.dictionary, cfg.quadrature)
    sol = solve_correction(sp, eps, cfg.K)
    rg = reduced_gradients(sp, sol, eps, cfg.K)
    doc = sol.to_dict(sp)
    doc["reduced_gradients"] = rg.to_dict()
    _emit(_dump(doc), args.out)
    return 0


def cmd_solve_reduced(args) -> int:
    from .constants import cached_interaction_constants, expansion_model
    from .reduced import solve_full_reduced, solve_reduced

    cfg = _config(args)
    beta = tuple(args.beta) if args.beta else tuple(p.beta for p in cfg.profiles)
    n = args.n or cfg.n
    if args.m:
        root = solve_reduced(tuple(args.m), beta, n, (cfg.gamma1, cfg.gamma2))
        _emit(_dump(root.to_dict()), args.out)
        return 0
    ic = cached_interaction_constants(cfg.n, cfg.quadrature)
    model = expansion_model(cfg.n, cfg.profiles, cfg.quadrature, ic.c0, ic.c1)
    eps = args.eps if args.eps is not None else max(cfg.eps_list)
    res = solve_full_reduced(cfg.n, cfg.profiles, eps, args.source or cfg.source, model, cfg.quadrature,
                             cfg.dictionary, (cfg.gamma1, cfg.gamma2))
    _emit(_dump(res.to_dict()), args.out)
    return 0


def cmd_degree(args) -> int:
    from .reduced import brouwer_degree, g_map

    n = args.n or 6
    if args.map == "identity":
        f = lambda x: x
    elif args.map == "reflection":
        f = lambda x: np.array([x[0], -x[1]])
    else:
        m, beta = tuple(args.m or (1.0, 1.0)), tuple(args.beta or (1.5, 1.5))
        f = lambda t: g_map(t, m, beta, n)
    box = args.box or ([-1.0, 1.0, -1.0, 1.0] if args.map != "g" else [0.25, 4.0, 0.25, 4.0])
    res = brouwer_degree(f, ((box[0], box[1]), (box[2], box[3])), args.grid_res)
    doc = res.to_dict()
    if not args.certificate:
        doc.pop("certificate")
    _emit(_dump(doc), args.out)
    return 0


def cmd_pipeline(args) -> int:
    from .pipeline import emit_report, run_pipeline

    cfg = _config(args)
    verify = args.verify or ()
    report = run_pipeline(cfg, verify=tuple(verify), progress=lambda m: print(m, file=sys.stderr))
    out = Path(args.out or ".")
    paths = {k: out / v for k, v in cfg.outputs.items()}
    written = emit_report(report, paths)
    for k, v in written.items():
        print(f"{k}: {v}", file=sys.stderr)
    print(f"pipeline: {'PASS' if report.passed else 'FAIL'} ({report.timing.get('total', 0):.1f} s)", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_positivity(args) -> int:
    from .constants import cached_interaction_constants, expansion_model
    from .pipeline import solve_point

    cfg = _config(args)
    ic = cached_interaction_constants(cfg.n, cfg.quadrature)
    model = expansion_model(cfg.n, cfg.profiles, cfg.quadrature, ic.c0, ic.c1)
    eps = args.eps if args.eps is not None else max(cfg.eps_list)
    point = solve_point(cfg, eps, model)
    _emit(_dump({"eps": eps, "positivity": point["positivity"]}), args.out)
    return 0 if point["positivity"]["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: symmetric n=6 profiles)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output file (directory for 'pipeline')")
    common.add_argument("--eps-list", type=float, nargs="+", dest="eps_list", help="override the eps sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="twopeak", description="Two-peak concentration for a perturbed biharmonic problem")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("constants", parents=[common], help="structure and interaction constants as CSV")
    s.add_argument("--n", type=int)
    s.add_argument("--beta", type=float, nargs="+")
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("verify", parents=[common], help="scaling-law verification of the estimates")
    s.add_argument("names", nargs="*", help="subset of a1..a7, b1..b4 (default: all)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("reduce", parents=[common], help="solve the correction at one configuration")
    s.add_argument("--lam", type=float, nargs=2, required=True, metavar=("LAM1", "LAM2"))
    s.add_argument("--eps", type=float)
    s.add_argument("--offset", type=float, nargs="+", help="displacement of the first centre")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("solve-reduced", parents=[common], help="root of the reduced system")
    s.add_argument("--m", type=float, nargs=2, help="solve g(t) = 0 for these coefficients only")
    s.add_argument("--beta", type=float, nargs=2)
    s.add_argument("--n", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--source", choices=["model", "full"])
    s.set_defaults(func=cmd_solve_reduced)

    s = sub.add_parser("degree", parents=[common], help="winding-number degree of a planar map")
    s.add_argument("--map", choices=["g", "identity", "reflection"], default="g")
    s.add_argument("--m", type=float, nargs=2)
    s.add_argument("--beta", type=float, nargs=2)
    s.add_argument("--n", type=int)
    s.add_argument("--box", type=float, nargs=4, metavar=("X0", "X1", "Y0", "Y1"))
    s.add_argument("--grid-res", type=int, default=64, dest="grid_res")
    s.add_argument("--certificate", action="store_true", help="include the boundary samples")
    s.set_defaults(func=cmd_degree)

    s = sub.add_parser("pipeline", parents=[common], help="end-to-end construction over the eps sweep")
    s.add_argument("--verify", nargs="*", help="also run these verifiers (all if given without names)")
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("positivity", parents=[common], help="positivity of the constructed solution at one eps")
    s.add_argument("--eps", type=float)
    s.set_defaults(func=cmd_positivity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "pipeline" and args.verify is not None and len(args.verify) == 0:
        from .pipeline import VERIFIERS

        args.verify = list(VERIFIERS)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ReducedError, GalerkinError, ConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
