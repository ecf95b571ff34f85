"""Command line entry point: ``diracfdtd run``.

Exit codes: 0 success, 2 configuration error, 3 numerical blow-up, 4 I/O error.
Thread count comes from DIRACFDTD_NUM_THREADS.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kernels
from .scenario import ScenarioError, list_presets, parse_scenario, preset_text, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diracfdtd", description="Dirac wave-packet FDTD simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run (or validate) a scenario")
    r.add_argument("scenario", nargs="?", help="scenario file (INI)")
    r.add_argument("--preset", help="use a built-in preset instead of a file")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one scenario key (repeatable)")
    r.add_argument("--out", type=Path, help="output directory (default: ./out/<name>)")
    r.add_argument("--validate-only", action="store_true", help="parse and validate, then exit")
    r.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    r.add_argument("-q", "--quiet", action="store_true", help="no progress output")
    return ap


def _load(args):
    if args.preset and args.scenario:
        raise ScenarioError("give either a scenario file or --preset, not both", rule="usage")
    if args.preset:
        return parse_scenario(preset_text(args.preset), args.overrides, name=args.preset)
    if not args.scenario:
        raise ScenarioError("no scenario file or --preset given", rule="usage")
    text = Path(args.scenario).read_text(encoding="utf-8")
    return parse_scenario(text, args.overrides, name=Path(args.scenario).stem)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_presets:
        print("\n".join(list_presets()))
        return EXIT_OK
    try:
        scn = _load(args)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.validate_only:
        print(f"{scn.name}: ok (grid {scn.grid.shape}, {scn.n_steps} steps, width {scn.packet.width:.6g} nm)")
        return EXIT_OK
    kernels.configure_threads()
    out = args.out or Path("out") / scn.name

    def progress(field, i):
        if not args.quiet:
            print(f"step {i}/{scn.n_steps}  t={field.time:.6g} nm/c", file=sys.stderr)

    try:
        manifest = run_scenario(scn, out, progress=progress)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if manifest["failed"]:
        print(f"numerical blow-up: {manifest['failure']} (partial output in {out})", file=sys.stderr)
        return EXIT_BLOWUP
    if not args.quiet:
        print(f"wrote {out} (norm drift {manifest.get('norm_drift', 0):.3g}, "
              f"wall {manifest['wall_time_s']:.1f} s)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
