"""Command-line interface: ``heatlayer eval | figure | convergence``.

Exit codes: 0 success, 2 configuration error, 3 oracle disagreement,
4 spatial-resolution warning under ``--strict``.
"""

import argparse
import os
import sys
import tempfile
import warnings

from . import experiments as ex
from .oracle import OracleDisagreement, reference_potential
from .potentials import ResolutionWarning, evaluate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_RESOLUTION = 4


def _read_config(path, overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ex.ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return ex.parse_config(text, overrides)


def _write(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(out))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, out)


def _finish(rows, args):
    _write(ex.records_to_csv(rows, timing=args.timing), args.out)
    if any("oracle-disagreement" in r.flag for r in rows):
        return EXIT_ORACLE
    if args.strict and any("resolution" in r.flag for r in rows):
        return EXIT_RESOLUTION
    return EXIT_OK


def cmd_eval(args):
    cfg = _read_config(args.config, args.set)
    status = EXIT_OK
    for case in cfg.cases:
        for method in cfg.methods:
            for dt in cfg.dts:
                req = ex._request(case, method, dt, cfg.eps)
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", ResolutionWarning)
                    value = evaluate(req)
                print(f"case={case.name} layer={case.layer} kind={case.kind} "
                      f"method={req.method.label} dt={dt!r} value={value:.16e}")
                if any(issubclass(w.category, ResolutionWarning) for w in caught):
                    print("warning: spatial quadrature did not converge", file=sys.stderr)
                    if args.strict:
                        status = max(status, EXIT_RESOLUTION)
                if args.oracle:
                    try:
                        ref = reference_potential(req, tol=cfg.oracle_tol).value
                    except OracleDisagreement as exc:
                        print(f"oracle failed: {exc}", file=sys.stderr)
                        status = EXIT_ORACLE
                        continue
                    err = abs(value - ref)
                    rel = err / abs(ref) if ref != 0 else err
                    print(f"  oracle={ref:.16e} abs_error={err:.3e} rel_error={rel:.3e}")
    return status


def cmd_figure(args):
    cfg = ex.parse_config(ex.PRESETS[f"fig{args.which}"], args.set)
    rows = ex.run_sweep(cfg, jobs=args.jobs)
    return _finish(rows, args)


def cmd_convergence(args):
    if args.preset in ex.MODEL_PRESETS:
        kind, orders = ex.MODEL_PRESETS[args.preset]
        rows = ex.model_integral_records(kind, orders)
        return _finish(rows, args)
    if args.preset:
        text = ex.PRESETS[args.preset]
        cfg = ex.parse_config(text, args.set)
    elif args.config:
        cfg = _read_config(args.config, args.set)
    else:
        raise ex.ConfigError("convergence needs --config or --preset")
    flag = 1e-2 if args.preset == "stiffness" else args.flag_rel
    rows = ex.run_sweep(cfg, jobs=args.jobs, flag_rel=flag)
    return _finish(rows, args)


def build_parser():
    p = argparse.ArgumentParser(prog="heatlayer",
                                description="Local heat layer potentials on moving curves.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=False):
        sp.add_argument("--config", required=config_required, help="INI experiment file")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config entry (repeatable)")
        sp.add_argument("--strict", action="store_true",
                        help="exit 4 on spatial-resolution warnings")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    e = sub.add_parser("eval", help="evaluate the configured potentials")
    common(e, config_required=True)
    e.add_argument("--oracle", action="store_true", help="also print the reference error")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("figure", help="error table behind one of the three experiments")
    f.add_argument("which", type=int, choices=(1, 2, 3))
    common(f)
    f.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    f.add_argument("--timing", action="store_true", help="append a wall_time column")
    f.set_defaults(func=cmd_figure)

    c = sub.add_parser("convergence", help="error against n, k or dt")
    common(c)
    c.add_argument("--preset", choices=sorted(list(ex.PRESETS) + list(ex.MODEL_PRESETS)))
    c.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    c.add_argument("--timing", action="store_true", help="append a wall_time column")
    c.add_argument("--flag-rel", type=float, default=None,
                   help="flag rows with relative error at or above this value")
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
