"""Command-line front end.

``lab run`` executes a config (a JSON file path or a bundled recipe name),
``lab validate`` prints its diagnostics, ``lab recipes`` lists the bundled
configs, and ``lab dump-field`` expands a stored field CSV into plottable
``coordinate,value`` rows on stdout.

Exit codes: 0 when no check failed, 1 when a check failed, 2 for config
errors.  ``--threads N`` pins the BLAS/OpenMP pools before numpy is imported,
which is why this module must not import numerical code at module scope.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _pin_threads(n: int) -> None:
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description=__doc__.split("\n")[1])
    p.add_argument("--threads", type=int, default=None, help="pin BLAS/OpenMP thread count")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help)
        # accepted after the subcommand as well; SUPPRESS keeps the
        # top-level value when the flag is absent here
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="pin BLAS/OpenMP thread count")
        return sp

    run = command("run", "execute a config or bundled recipe")
    run.add_argument("config", help="JSON config path or recipe name")
    run.add_argument("--out", default=None, help="output directory override")
    run.add_argument("--tol-scale", type=float, default=1.0, help="tolerance multiplier")

    val = command("validate", "print config diagnostics")
    val.add_argument("config", help="JSON config path or recipe name")

    command("recipes", "list bundled recipe names")

    dump = command("dump-field", "expand a stored field CSV to coordinate rows")
    dump.add_argument("field_csv", help="field CSV written by 'lab run'")
    return p


def _resolve_config(token: str):
    """A recipe name or a path to a JSON config."""
    from .experiment import recipes

    book = recipes()
    if token in book:
        return book[token]
    if not os.path.exists(token):
        raise FileNotFoundError(
            f"{token!r} is neither a bundled recipe ({sorted(book)}) nor a file"
        )
    with open(token) as fh:
        return json.load(fh)


def _cmd_run(args) -> int:
    from .errors import ConfigError
    from .experiment import run

    try:
        config = _resolve_config(args.config)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        report = run(config, out_dir=args.out, tol_scale=args.tol_scale)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = args.out or config.get("output") or os.path.join("out", config["name"])
    for name, section in report["checks"].items():
        line = f"{name}: {section['verdict']}"
        if section.get("reason"):
            line += f" ({section['reason']})"
        print(line)
    print(f"report: {os.path.join(out, 'report.json')}")
    print(f"verdict: {report['verdict']}")
    return 1 if report["verdict"] == "fail" else 0


def _cmd_validate(args) -> int:
    from .experiment import validate

    try:
        config = _resolve_config(args.config)
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    diags = validate(config)
    for d in diags:
        print(d)
    if diags:
        return 2
    print("ok")
    return 0


def _cmd_recipes() -> int:
    from .experiment import list_recipes

    for name in list_recipes():
        print(name)
    return 0


def _cmd_dump_field(args) -> int:
    try:
        from .grid import load_field_csv

        vals, meta = load_field_csv(args.field_csv)
    except Exception as e:  # corrupt file, wrong format, missing path
        print(f"config error: {e}", file=sys.stderr)
        return 2
    spacing = meta["spacing"]
    origin = meta.get("origin", [0.0] * len(spacing))
    shape = meta["shape"]
    if len(shape) == 1:
        print("x0,value")
        for i in range(shape[0]):
            print(f"{origin[0] + i * spacing[0]!r},{float(vals[i])!r}")
    else:
        print("x0,x1,value")
        for i in range(shape[0]):
            x0 = origin[0] + i * spacing[0]
            for j in range(shape[1]):
                print(f"{x0!r},{origin[1] + j * spacing[1]!r},{float(vals[i, j])!r}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return 2
        _pin_threads(args.threads)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "recipes":
            return _cmd_recipes()
        return _cmd_dump_field(args)
    except BrokenPipeError:
        # downstream consumer closed the pipe (dump-field | head is the
        # normal case); reopen stdout on devnull so the exit flush is quiet
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
