"""Command-line entry point: simulate, sweep, analytic, validate."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from . import analytic as _analytic
from .config import build_params, build_sweep, load_values, sweep_values
from .engine import CSV_COLUMNS, run
from .params import ConfigError, Params
from .sweep import nonmonotonicity_report, run_sweep

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

MANIFEST = "manifest.json"
_INT_COLUMNS = {"period", "trades", "exits"}


def fmt(x: float) -> str:
    return "%.9g" % x


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def params_values(p: Params) -> dict[str, str]:
    return {k: repr(v) if isinstance(v, float) else str(v) for k, v in p.as_dict().items()}


# ---------------------------------------------------------------- writers


def write_timeseries(series, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        cols = [series.column(c) for c in CSV_COLUMNS]
        for row in zip(*cols):
            w.writerow([int(v) if c in _INT_COLUMNS else fmt(v) for c, v in zip(CSV_COLUMNS, row)])


def write_summary(summary, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "value"))
        for key, value in vars(summary).items():
            if value is None:
                text = ""
            elif isinstance(value, bool):
                text = str(value).lower()
            elif isinstance(value, int):
                text = str(value)
            else:
                text = fmt(value)
            w.writerow((key, text))


def write_analytic(preds: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("quantity", "value"))
        for key, value in preds.items():
            w.writerow((key, "" if value is None else fmt(value)))


def write_manifest(out: Path, command: str, config: dict, files: list[str], started: str, seed: int) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "started": started,
        "finished": _now(),
        "files": {name: sha256(out / name) for name in files},
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path: str | Path, command: str) -> dict:
    try:
        manifest = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("command") != command:
        raise ConfigError(f"manifest {path} was written by {manifest.get('command')!r}, not {command!r}")
    return manifest


def verify_against(manifest: dict, out: Path) -> list[str]:
    """Names of files whose digest differs from the manifest's."""
    return [name for name, digest in manifest["files"].items() if sha256(out / name) != digest]


# ---------------------------------------------------------------- commands


def _values(args) -> tuple[dict[str, str], dict | None]:
    if args.manifest:
        manifest = read_manifest(args.manifest, args.command)
        if args.config or args.set:
            raise ConfigError("--manifest cannot be combined with --config/--set")
        return {k: str(v) for k, v in manifest["config"].items()}, manifest
    return load_values(args.config, args.set), None


def _finish(manifest_in: dict | None, out: Path) -> int:
    if manifest_in is None:
        return EXIT_OK
    bad = verify_against(manifest_in, out)
    if bad:
        print(f"rerun differs from manifest in: {', '.join(bad)}", file=sys.stderr)
        return EXIT_FAIL
    print("rerun reproduces every file in the manifest")
    return EXIT_OK


def cmd_simulate(args) -> int:
    values, manifest_in = _values(args)
    params = build_params(values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    series, summary = run(params)
    write_timeseries(series, out / "timeseries.csv")
    write_summary(summary, out / "summary.csv")
    write_manifest(out, "simulate", params_values(params), ["timeseries.csv", "summary.csv"], started, params.seed)
    print(f"final price {fmt(summary.final_price)}, inefficiency {fmt(summary.inefficiency)}, "
          f"volatility {fmt(summary.volatility)}, exits {summary.exits_total}")  # fmt: skip
    return _finish(manifest_in, out)


def cmd_sweep(args) -> int:
    values, manifest_in = _values(args)
    spec = build_sweep(values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()

    def progress(done, total):
        print(f"\r{done}/{total} rows", end="" if done < total else "\n", file=sys.stderr, flush=True)

    grid = run_sweep(spec, progress=progress if args.progress else None)
    grid.write_long_csv(out / "sweep_long.csv")
    grid.write_aggregate_csv(out / "sweep_aggregate.csv")
    report = nonmonotonicity_report(grid)
    (out / "patterns.txt").write_text("\n".join(report.lines()) + "\n")
    config = params_values(spec.base_params)
    config.update({k: str(v) for k, v in sweep_values(spec).items()})
    files = ["sweep_long.csv", "sweep_aggregate.csv", "patterns.txt"]
    write_manifest(out, "sweep", config, files, started, spec.master_seed)
    print("\n".join(report.lines()))
    return _finish(manifest_in, out)


def cmd_analytic(args) -> int:
    values, manifest_in = _values(args)
    params = build_params(values)
    preds = _analytic.predictions(params)
    width = max(map(len, preds))
    for key, value in preds.items():
        print(f"{key:<{width}}  {'n/a' if value is None else fmt(value)}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        started = _now()
        write_analytic(preds, out / "analytic.csv")
        write_manifest(out, "analytic", params_values(params), ["analytic.csv"], started, params.seed)
        return _finish(manifest_in, out)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .acceptance import run_all

    results = run_all(skip=set(args.skip or ()), only=set(args.only or ()) or None, echo=print)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biasmarket", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p, out_required=True):
        p.add_argument("--config", help="flat key=value file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override (repeatable)")
        p.add_argument("--manifest", help="rerun the command recorded in this manifest and verify digests")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("simulate", help="one run -> per-period CSV")
    add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="(alpha, sigma) grid -> long and aggregated CSVs")
    add_config(p)
    p.add_argument("--progress", action="store_true", help="report progress on stderr")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analytic", help="closed-form predictions for the given parameters")
    add_config(p, out_required=False)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--skip", action="append", metavar="ID", help="criterion to skip, e.g. A9 (repeatable)")
    p.add_argument("--only", action="append", metavar="ID", help="run only these criteria (repeatable)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
