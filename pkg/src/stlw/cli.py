"""Command-line entry point: ``stlw run | verify-flux | grid | list``."""

import argparse
from importlib import resources
import os
import sys

from .experiments import ConfigError, build_experiment, load_config
from .grid import GridError, grid_metrics
from .gridio import GridFormatError, dump_grid, load_grid
from .report import flux_properties, run_experiment, write_flux_report, write_manifest

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_RUN = 0, 1, 2, 3


def bundled_configs():
    """Names of the configs shipped with the package."""
    root = resources.files("stlw") / "configs"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_config(name):
    """A path, or the name of a bundled config."""
    if os.path.exists(name):
        return name
    path = resources.files("stlw") / "configs" / f"{name}.ini"
    if path.is_file():
        return str(path)
    raise ConfigError(f"{name}: no such file or bundled config (see 'stlw list')")


def _threads():
    v = os.environ.get("STLW_THREADS")
    if v is None:
        return None
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"STLW_THREADS must be a positive integer, got {v!r}") from None
    if n < 1:
        raise ConfigError(f"STLW_THREADS must be a positive integer, got {v!r}")
    return n


def _load(args):
    cfg = load_config(resolve_config(args.config))
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def cmd_run(args):
    cfg = _load(args)
    exp = build_experiment(cfg, quad_refine=True if args.quad_refine else None)
    out = args.out or os.path.join("out", cfg.name)
    try:
        res = run_experiment(cfg, exp, out, args.seed)
    except (ConfigError, GridError):
        raise
    except Exception as e:
        raise RuntimeError(f"experiment {cfg.name!r}: {e}") from e
    for r in res.rows:
        print(f"h={r.h:g} L1={r.l1_error:.6g} rate={r.rate:.3f} weak={r.weak_residual:.4g} "
              f"entropy={r.entropy_residual:.4g} mass_drift={r.mass_drift:.3g}")
    for h, s, t, n, q in res.discriminator:
        print(f"h={h:g} L1_to_smoothed={s:.6g} L1_to_true={t:.6g} quasi_ratio={q:.6g}")
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    print(f"wrote {len(res.files)} files to {out}")
    return EXIT_ASSERT if args.assert_ and not res.passed else EXIT_OK


def cmd_verify_flux(args):
    cfg = _load(args)
    exp = build_experiment(cfg)
    out = args.out or os.path.join("out", cfg.name)
    os.makedirs(out, exist_ok=True)
    rep = flux_properties(cfg, exp, args.seed)
    fname = f"{cfg.name}_flux_properties.csv"
    write_flux_report(os.path.join(out, fname), rep)
    write_manifest(out, [fname])
    for k, v, ok in rep.rows():
        print(f"{'PASS' if ok else 'FAIL'} {k} = {v:.6g}")
    return EXIT_ASSERT if args.assert_ and not rep.ok else EXIT_OK


def _print_metrics(g):
    m = grid_metrics(g)
    print(f"family={g.family} cells={g.ncells} faces={g.nfaces} layers={len(g.layers)} "
          f"h_max={m.h_max:.6g} quasi_ratio={m.quasi_ratio:.6g} surface_ratio={m.surface_ratio:.6g}")


def cmd_grid(args):
    if args.action == "dump":
        cfg = _load(args)
        exp = build_experiment(cfg)
        h = args.h if args.h is not None else cfg.floats("grid", "h")[0]
        g = exp.build_grid(h)
        dump_grid(g, args.path)
        _print_metrics(g)
        print(f"wrote {args.path}")
    else:
        _print_metrics(load_grid(args.path))
    return EXIT_OK


def cmd_list(args):
    for name in bundled_configs():
        print(name)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="stlw", description="Space-time finite-volume laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="config path or bundled config name")
        sp.add_argument("--out", metavar="DIR", help="output directory [out/<name>]")
        sp.add_argument("--seed", type=int, help="seed for randomized grids and probes")
        sp.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit nonzero when an assertion fails")

    r = sub.add_parser("run", help="march, verify and write reports")
    common(r)
    r.add_argument("--quad-refine", action="store_true",
                   help="recompute residuals with doubled quadrature and report the change")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify-flux", help="check the numerical flux conditions")
    common(v)
    v.set_defaults(func=cmd_verify_flux)
    g = sub.add_parser("grid", help="dump a configured grid or load a dumped one")
    gs = g.add_subparsers(dest="action", required=True)
    d = gs.add_parser("dump")
    d.add_argument("config")
    d.add_argument("path")
    d.add_argument("--h", type=float, help="resolution [first h of the config]")
    d.add_argument("--seed", type=int)
    ld = gs.add_parser("load")
    ld.add_argument("path")
    g.set_defaults(func=cmd_grid)
    ls = sub.add_parser("list", help="list bundled configs")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _threads()
        return args.func(args)
    except (ConfigError, GridFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
