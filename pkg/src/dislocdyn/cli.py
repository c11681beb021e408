"""Command line entry point: ``dislocdyn run|sweep|validate``."""
from __future__ import annotations

import argparse
import glob
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DislocDynError
from .runner import resolve_output_dir, run


def _error_line(exc: BaseException, path: str | None = None) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["errors"] = exc.errors
    if path is not None:
        payload["config"] = path
    for attr in ("admissible_dt", "index", "value", "pair"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    return json.dumps(payload, default=str)


def _exit_code(exc: BaseException) -> int:
    return 2 if isinstance(exc, (ConfigError, OSError)) else 1


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True, default=float))
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run(cfg, args.output_dir)
    print(json.dumps({"output_dir": str(res.output_dir), "files": res.files, "report": res.report}, default=float))
    return 0


def _sweep_one(path: str, base: str | None) -> tuple[str, int, str]:
    try:
        cfg = load_config(path)
        target = Path(base) if base else resolve_output_dir(cfg)
        res = run(cfg, target / Path(path).stem)
        return path, 0, str(res.output_dir)
    except (DislocDynError, OSError) as exc:
        return path, _exit_code(exc), _error_line(exc, path)


def cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        print(json.dumps({"error": "NoConfigs", "message": f"no files match {args.pattern!r}"}), file=sys.stderr)
        return 2
    status = 0
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for path, code, info in pool.map(_sweep_one, paths, [args.output_dir] * len(paths)):
            if code:
                print(info, file=sys.stderr)
                status = max(status, code)
            else:
                print(json.dumps({"config": path, "output_dir": info}))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dislocdyn", description="Dislocation dynamics simulators and diagnostics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("--output-dir", default=None, help="override the configured output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every configuration matching a glob, in parallel")
    p.add_argument("pattern")
    p.add_argument("--output-dir", default=None, help="base directory; each config writes to <base>/<config stem>")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a configuration and print the effective values")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DislocDynError, OSError) as exc:
        print(_error_line(exc, getattr(args, "config", None)), file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
