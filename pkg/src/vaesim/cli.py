"""Command-line interface: ``vaesim <subcommand> ...``.

Exit codes: 0 success, 1 validation failure, 2 I/O error, 3 bad arguments.
Data goes to stdout (JSON with ``--json``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import BenchGrid, CostModel, fit_cpu_model, kmax, read_csv, run_benchmark, write_csv
from .engine import RenderJob, render_offline
from .imagesource import ReflectionFit, reflector_chains
from .scenedef import SceneError, check_scene, validate_scene

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_USAGE = 0, 1, 2, 3

#: Delay-line memory rule of thumb at 44.1 kHz with 4-byte samples.
BYTES_PER_METER = 520.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(args, data: dict, text: str) -> None:
    if args.json:
        print(json.dumps(data, indent=2, default=float))
    else:
        print(text)


def _load(path: str):
    """Parse a scene file; returns (scene, diagnostics)."""
    p = Path(path)
    return check_scene(p.read_text(encoding="utf-8"), base_dir=p.parent)


def _report(diags) -> None:
    for d in diags:
        print(f"{d}", file=sys.stderr)


def cmd_render(args) -> int:
    scene, diags = _load(args.scene)
    _report(diags)
    if scene is None:
        return EXIT_INVALID
    result = render_offline(RenderJob(scene, args.duration, args.out))
    data = {"output": args.out, "channels": int(result.audio.shape[0]), "samples": int(result.audio.shape[1]),
            "clamps": result.clamp_count, "realtime_factor": result.realtime_factor}
    _emit(args, data, f"wrote {args.out}\n{result.summary()}")
    return EXIT_OK


def cmd_validate(args) -> int:
    p = Path(args.scene)
    diags = validate_scene(p.read_text(encoding="utf-8"), duration=args.duration, base_dir=p.parent)
    errors = [d for d in diags if d.severity == "error"]
    if args.json:
        print(json.dumps({"valid": not errors, "diagnostics": [d.as_dict() for d in diags]}, indent=2))
    else:
        _report(diags)
        print("valid" if not errors else f"invalid: {len(errors)} error(s)")
    return EXIT_INVALID if errors else EXIT_OK


def cmd_bench(args) -> int:
    grid = BenchGrid(K=args.K, N=args.N, P=args.P, formats=args.formats, l_d=args.ld, repetitions=args.reps)
    rows, skipped = run_benchmark(grid, duration=args.duration, inner_reps=args.inner, seed=args.seed,
                                  hoa_order=args.hoa_order,
                                  progress=None if args.quiet else lambda m: print(m, file=sys.stderr))
    for note in skipped:
        print(f"skipped {note}", file=sys.stderr)
    write_csv(rows, args.out)
    _emit(args, {"output": args.out, "rows": len(rows), "skipped": skipped},
          f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_fit_model(args) -> int:
    model = fit_cpu_model(read_csv(args.csv))
    if args.out:
        Path(args.out).write_text(model.report())
    _emit(args, {**model.coefficients, "residual": model.residual_}, model.report().rstrip())
    return EXIT_OK


def cmd_kmax(args) -> int:
    if args.model:
        model = CostModel.from_report(Path(args.model).read_text())
    else:
        coefs = [args.a0, args.a1, args.a2, args.a3, args.a4]
        if any(c is None for c in coefs):
            raise UsageError("give --model or all of --a0 .. --a4")
        model = CostModel.from_coefficients(coefs)
    k = kmax(model, args.load, args.p, args.n)
    _emit(args, {"kmax": k, "load": args.load, "P": args.p, "N": args.n}, str(k))
    return EXIT_OK


def _pair(text: str) -> tuple[float, float]:
    try:
        f, a = text.split(":")
        return float(f), float(a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FREQ:ALPHA, got {text!r}") from None


def cmd_fit_absorption(args) -> int:
    f, alpha = zip(*args.pairs)
    fit = ReflectionFit(fs=args.fs).fit(f, alpha)
    data = {"rho": fit.rho_, "delta": fit.delta_, "residual": fit.residual_}
    _emit(args, data, f"rho = {fit.rho_!r}\ndelta = {fit.delta_!r}\nresidual = {fit.residual_!r}")
    return EXIT_OK


def cmd_info(args) -> int:
    scene, diags = _load(args.scene)
    _report(diags)
    if scene is None:
        return EXIT_INVALID
    p = scene.params
    K = len(scene.sources)
    chains = len(reflector_chains(len(scene.reflectors), p.image_order)) if scene.reflectors else 0
    memory = BYTES_PER_METER * (p.fs / 44100.0) * p.max_distance * K
    data = {"name": scene.name, "sources": K, "diffuse": len(scene.diffuse), "reflectors": len(scene.reflectors),
            "obstacles": len(scene.obstacles), "receivers": len(scene.receivers),
            "image_sources": K * chains, "delay_memory_bytes": memory,
            "channels": sum(r.format.n_channels for r in scene.receivers)}
    _emit(args, data, "\n".join(f"{k}: {v}" for k, v in data.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vaesim", description="Virtual acoustic environment renderer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("render", parents=[common], help="render a scene to a WAV file")
    p.add_argument("--scene", required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", parents=[common], help="check a scene file")
    p.add_argument("scene")
    p.add_argument("--duration", type=float, help="render duration for trajectory checks")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", parents=[common], help="measure render cost over a grid")
    p.add_argument("--out", required=True, help="CSV file")
    p.add_argument("--K", type=int, nargs="+", default=[1, 10, 100, 256])
    p.add_argument("--N", type=int, nargs="+", default=[8, 48, 128])
    p.add_argument("--P", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--formats", nargs="+", default=["nsp", "vbap", "hoa2d"])
    p.add_argument("--ld", type=float, nargs="+", default=[1.0, 10000.0], help="delay-line lengths in m")
    p.add_argument("--reps", type=int, default=2)
    p.add_argument("--duration", type=float, default=10.0, help="seconds of noise per point")
    p.add_argument("--inner", type=int, default=3, help="inner repetitions (median)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hoa-order", type=int, default=3)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit-model", parents=[common], help="fit the cost model to benchmark CSV")
    p.add_argument("csv")
    p.add_argument("--out", help="write the key-value report here")
    p.set_defaults(func=cmd_fit_model)

    p = sub.add_parser("kmax", parents=[common], help="maximum source count for a target load")
    p.add_argument("--model", help="key-value report from fit-model")
    for name in ("a0", "a1", "a2", "a3", "a4"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--load", type=float, default=0.9, help="target CPU load C")
    p.add_argument("--p", type=int, default=1024, help="block size")
    p.add_argument("--n", type=int, required=True, help="output channels")
    p.set_defaults(func=cmd_kmax)

    p = sub.add_parser("fit-absorption", parents=[common], help="fit reflection filter to absorption targets")
    p.add_argument("pairs", nargs="+", type=_pair, metavar="FREQ:ALPHA")
    p.add_argument("--fs", type=float, default=44100.0)
    p.set_defaults(func=cmd_fit_absorption)

    p = sub.add_parser("info", parents=[common], help="summarize a scene")
    p.add_argument("scene")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"vaesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SceneError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"vaesim: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"vaesim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
