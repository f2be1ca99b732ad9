"""renorm-lab command line: fixedpoint | cascade | verify | universal | geometry.

Exit codes: 0 success, 1 config error, 2 solver failure, 3 verification failure.
"""
import argparse
import logging
import os
import sys
import tomllib
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from renormlab import config, runner
from renormlab.api import schemas
from renormlab.api.writers import dumps, write_json
from renormlab.errors import ConfigError, RenormLabError

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


def load_config(path: Optional[Path], overrides: Optional[dict] = None) -> schemas.RunConfig:
    """TOML file (or defaults) validated into RunConfig; RENORMLAB_THREADS wins over the file."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if os.getenv("RENORMLAB_THREADS"):
        data["workers"] = config.THREADS
    try:
        return schemas.RunConfig(**data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def _pairs(items: list[str], required: tuple[str, ...]) -> dict[str, float]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError as e:
            raise ConfigError(f"{key}: {value!r} is not a number") from e
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"missing {', '.join(missing)}")
    return out


def _out_dir(args, cfg: Optional[schemas.RunConfig] = None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.output_dir) if cfg is not None else config.OUTPUT_DIR


def cmd_fixedpoint(args) -> int:
    report, _ = runner.run_fixedpoint(args.degree, args.tol)
    if args.json:
        sys.stdout.write(dumps(report))
    else:
        print(f"sigma = {report.sigma:.15g}  residual = {report.residual:.3e}  iterations = {report.iterations}")
    if args.out:
        write_json(Path(args.out) / "fixedpoint.json", report)
    return EXIT_OK


def _run_config(args) -> schemas.RunConfig:
    return load_config(args.config, {"depth": args.depth, "seed": args.seed, "family": args.family})


def cmd_cascade(args) -> int:
    cfg = _run_config(args)
    report, _ = runner.run_cascade(cfg, _out_dir(args, cfg))
    for level in report.levels:
        print(f"level {level.level}: sigma={level.sigma}  |eps|={level.eps_norm:.3e}  |delta|={level.delta_norm:.3e}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _run_config(args)
    report, _ = runner.run_verify(cfg, _out_dir(args, cfg))
    for rec in report.checks:
        if rec.status != "ok":
            print(f"{rec.status:>4}  {rec.check} {rec.label}: {rec.value} (threshold {rec.threshold})")
    if not report.passed:
        print(f"FAILED: {', '.join(report.failed)}")
        return EXIT_VERIFY
    print(f"all {len(report.checks)} checks passed")
    return EXIT_OK


def cmd_universal(args) -> int:
    cfg = _run_config(args)
    report, _ = runner.run_universal(cfg, _out_dir(args, cfg))
    rho = "n/a" if report.rho_fit is None else f"{report.rho_fit:.3g}"
    print(f"b2 = {report.b2:.12g}  b1 = {report.b1:.12g}  bF = {report.bF:.12g}  rho = {rho}")
    return EXIT_OK


def cmd_geometry(args) -> int:
    standalone = args.config is None and (args.holder or args.criterion)
    holder = None
    if args.holder:
        p = _pairs(args.holder, ("b1", "b1t"))
        holder, _ = runner.run_holder(p["b1"], p["b1t"])
        print(f"holder bound = {holder:.15g}")
    if args.criterion:
        p = _pairs(args.criterion, ("b1",))
        sigma = p.get("sigma") or runner.run_fixedpoint()[0].sigma
        rows, _ = runner.run_criterion(p["b1"], sigma, int(p.get("kmax", 5)))
        for r in rows:
            print(f"k={r.k}  n={r.n}  gap={r.gap:.6g}")
    if standalone:
        return EXIT_OK
    cfg = _run_config(args)
    if args.kmax is not None:
        cfg.kmax = args.kmax
    overlap = None
    if args.tune_overlap:
        p = _pairs(args.tune_overlap, ("k", "n", "lo", "hi"))
        overlap, cfg, _ = runner.run_overlap_tuning(cfg, int(p["k"]), int(p["n"]), p["lo"], p["hi"], args.tune_param)
        print(f"{overlap.param_name} = {overlap.param:.12g}  overlap width = {overlap.width:.3g}  ({overlap.iterations} bisections)")
    out = _out_dir(args, cfg)
    summary, _ = runner.run_geometry(cfg, out)
    if holder is not None or overlap is not None:
        summary.holder = holder
        summary.overlap = overlap
        write_json(out / "summary.json", summary)
    print(f"{summary.rows} (k, n) pairs; min dist/diam by k: {summary.min_ratio_by_k}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renorm-lab", description="Period-doubling renormalization of Henon-like maps")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    fp = sub.add_parser("fixedpoint", help="solve for the unimodal fixed point")
    fp.add_argument("--degree", type=int, default=config.FIXED_POINT_DEGREE)
    fp.add_argument("--tol", type=float, default=config.FIXED_POINT_TOL)
    fp.add_argument("--json", action="store_true", help="print the report as JSON")
    fp.add_argument("--out", default=None)
    fp.set_defaults(func=cmd_fixedpoint)

    for name, func, help_text in (
        ("cascade", cmd_cascade, "renormalize a seed map and write levels, pieces and tips"),
        ("verify", cmd_verify, "run every identity check and write verify.json"),
        ("universal", cmd_universal, "estimate b2, b1, bF and a(x)"),
        ("geometry", cmd_geometry, "box diameters, gaps and overlap"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="TOML run configuration")
        p.add_argument("--family", default=None, choices=["degenerate", "trivial-extension", "example-N", "custom-polynomial"])
        p.add_argument("--depth", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(func=func)
        if name == "geometry":
            p.add_argument("--kmax", type=int, default=None)
            p.add_argument("--holder", nargs="+", metavar="KEY=VALUE", help="b1=... b1t=...")
            p.add_argument("--criterion", nargs="+", metavar="KEY=VALUE", help="b1=... [kmax=...] [sigma=...]")
            p.add_argument("--tune-overlap", nargs="+", metavar="KEY=VALUE", help="k=... n=... lo=... hi=...")
            p.add_argument("--tune-param", default="eps_amplitude", help="map parameter to bisect")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else config.LOG_LEVEL)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return EXIT_CONFIG
    except (RenormLabError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
