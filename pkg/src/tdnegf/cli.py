"""Command-line entry point: ``tdnegf {simulate,sweep,verify,kernel-table}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .config import CliConfig, build_lattice, build_run, describe_run
from .exceptions import ConfigError, ContractError, DivergenceError, DomainError, ResourceError
from .kernels import build_kernel_table
from .propagate import evolve

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

log = logging.getLogger("tdnegf")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def density_text(times, x, n, sep: str = ",") -> str:
    tt = np.repeat(times, len(x))
    xx = np.tile(x, len(times))
    body = "\n".join(sep.join(("%.17g" % a, "%.17g" % b, "%.17g" % c)) for a, b, c in zip(tt, xx, n.ravel()))
    return sep.join(("t", "x", "n")) + "\n" + body + "\n"


def table_text(header, rows, sep: str = ",") -> str:
    lines = [sep.join(header)]
    lines += [sep.join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _error_code(exc: BaseException) -> int:
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (ConfigError, DomainError, ContractError, ResourceError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _out_dir(cfg: CliConfig, override: str | None) -> Path:
    return Path(override if override is not None else cfg.get("output.out_dir"))


def simulate(cfg: CliConfig, out_dir: Path):
    """Run one configuration and write density and meta files; return the record."""
    fmt = cfg.output_format()
    run = build_run(cfg)
    record, _ = evolve(run)
    sep = "," if fmt == "csv" else "\t"
    write_atomic(out_dir / f"density.{fmt}", density_text(record.times, record.sites, record.n, sep))
    meta = describe_run(run, fmt)
    write_atomic(out_dir / "meta.csv", table_text(("key", "value"), meta.items()))
    return record


def _sweep_worker(values: dict, base_dir: str, key: str, value: str, out_dir: str):
    try:
        cfg = CliConfig(values, Path(base_dir)).with_value(key, value)
        record = simulate(cfg, Path(out_dir))
    except Exception as exc:  # reported per run in the summary
        return _error_code(exc), str(exc), None
    return EXIT_OK, "", record.n


def cmd_simulate(args) -> int:
    cfg = CliConfig.load(args.config)
    out = _out_dir(cfg, args.out)
    record = simulate(cfg, out)
    _info(args, f"wrote {out}/density.{cfg.output_format()} ({record.n.shape[0]} times x {record.n.shape[1]} sites), "
                f"max|n-1| = {record.max_deviation():.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = CliConfig.load(args.config)
    cfg.with_value(args.key, args.values[0]).get(args.key)  # validates the key before forking
    out = _out_dir(cfg, args.out)
    dirs = [out / f"run_{i:03d}" for i in range(len(args.values))]
    jobs = [(cfg.values, str(cfg.base_dir), args.key, v, str(d)) for v, d in zip(args.values, dirs)]
    if args.jobs == 1 or len(jobs) == 1:
        results = [_sweep_worker(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_worker, *zip(*jobs)))

    header = ["run", "key", "value", "exit_code", "max_abs_n_minus_1"] + [f"diff_{d.name}" for d in dirs]
    rows = []
    for i, (code, message, n) in enumerate(results):
        dev = float(np.max(np.abs(n - 1.0))) if n is not None else float("nan")
        diffs = []
        for _, _, other in results:
            ok = n is not None and other is not None and other.shape == n.shape
            diffs.append(float(np.max(np.abs(n - other))) if ok else float("nan"))
        rows.append([dirs[i].name, args.key, args.values[i], code, dev] + diffs)
        if code:
            print(f"{dirs[i].name}: error (exit {code}): {message}", file=sys.stderr)
    write_atomic(out / "sweep_summary.csv", table_text(header, rows))
    _info(args, f"wrote {out}/sweep_summary.csv ({len(rows)} runs)")
    return max(code for code, _, _ in results)


def cmd_verify(args) -> int:
    if args.suite not in acceptance.SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(acceptance.SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    ok = acceptance.run_suite(args.suite, echo=None if args.quiet else print)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_kernel_table(args) -> int:
    cfg = CliConfig.load(args.config)
    lat = build_lattice(cfg)
    dt, n_steps = cfg.get("run.dt"), cfg.get("run.n_steps")
    try:
        table = build_kernel_table(lat, dt, n_steps)
    except DomainError as exc:
        raise ConfigError(f"run: {exc}") from None
    k = np.arange(n_steps + 1)
    rows = zip(k, k * dt, table.samples.real, table.samples.imag)
    out = _out_dir(cfg, args.out)
    write_atomic(out / "kernel.csv", table_text(("k", "tau", "re", "im"), rows))
    _info(args, f"wrote {out}/kernel.csv ({n_steps + 1} rows)")
    return EXIT_OK


def _info(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # flags are accepted before or after the subcommand; subparser copies must not reset them
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--out", default=default(None), help="output directory (overrides output.out_dir)")
    parser.add_argument("--jobs", type=int, default=default(os.cpu_count() or 1), help="sweep worker processes")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdnegf", description="Time-dependent 1D scattering with transparent leads.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run one configuration per value of a key")
    p.add_argument("config")
    p.add_argument("key", help="config key to vary, e.g. pulse.phi_cep")
    p.add_argument("values", nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite", help=", ".join(acceptance.SUITES))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("kernel-table", help="write the lead memory kernel samples")
    p.add_argument("config")
    p.set_defaults(func=cmd_kernel_table)

    for p in sub.choices.values():
        _global_flags(p, suppress=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = _error_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
