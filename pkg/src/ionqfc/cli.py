"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config, io, scenarios
from .errors import ConfigError, IonQFCError, ParameterError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONFIG = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ionqfc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named scenario")
    run.add_argument("scenario", choices=scenarios.SCENARIOS)
    run.add_argument("--config", type=Path)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--duration", type=float, help="simulated time in s (simulation scenarios)")
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")

    val = sub.add_parser("validate", help="check a config file and echo the full parameter set")
    val.add_argument("--config", type=Path, required=True)

    sw = sub.add_parser("sweep", help="sweep one parameter and print a CSV table")
    sw.add_argument("param")
    sw.add_argument("start", type=float)
    sw.add_argument("stop", type=float)
    sw.add_argument("steps", type=int)
    sw.add_argument("--config", type=Path)
    sw.add_argument("--out", type=Path, help="CSV file (default: stdout)")

    rep = sub.add_parser("replay", help="regenerate a run from its manifest.json")
    rep.add_argument("manifest", type=Path)
    rep.add_argument("--out", type=Path, required=True)

    sub.add_parser("defaults", help="print the annotated default config")
    return p


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not KEY=VALUE", key=item)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _check_writable(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from exc


def _run(args) -> int:
    cfg = config.load_config(args.config)
    sc = scenarios.Scenario(args.scenario, _overrides(args.set), args.seed, args.duration, args.out)
    if sc.duration is not None and sc.name in scenarios.SIMULATION and not sc.duration > 0:
        raise ConfigError(f"duration must be > 0, got {sc.duration:g}", key="duration")
    _check_writable(sc.output_dir)
    summary = scenarios.run_scenario(sc, cfg)
    print(json.dumps(io._clean(summary), indent=2, sort_keys=True))
    return EXIT_OK


def _validate(args) -> int:
    cfg = config.load_config(args.config)
    sys.stdout.write(config.dumps(cfg))
    return EXIT_OK


def _sweep(args) -> int:
    cfg = config.load_config(args.config)
    header, rows = scenarios.sweep(cfg, args.param, args.start, args.stop, args.steps)
    lines = [header] + [",".join(f"{x:.10g}" for x in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _replay(args) -> int:
    manifest = json.loads(args.manifest.read_text())
    sc, cfg = scenarios.scenario_from_manifest(manifest, args.out)
    _check_writable(sc.output_dir)
    scenarios.run_scenario(sc, cfg)
    new = json.loads((sc.output_dir / "manifest.json").read_text())
    bad = [name for name, h in manifest["files"].items() if new["files"].get(name) != h]
    if bad:
        print(f"replay differs for: {', '.join(bad)}", file=sys.stderr)
        return 1
    print(f"replayed {len(manifest['files'])} files identically")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"run": _run, "validate": _validate, "sweep": _sweep, "replay": _replay}
    try:
        if args.command == "defaults":
            sys.stdout.write(config.annotated_defaults())
            return EXIT_OK
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, IonQFCError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
