"""Command line: ``gazefit <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 input parse error, 3 runtime or
numerical failure. Every command writes ``manifest.json`` next to its
outputs; ``gazefit rerun <manifest>`` replays it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from gazefit import __version__
from gazefit import io
from gazefit.export import export_obj, write_svg
from gazefit.fitter import FitResult, ParamVector
from gazefit.model import synthetic_basis
from gazefit.synth import NoiseSpec, ablation_suite, evaluate_predictions, fit_scenes, format_table, generate_scenes

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_RUNTIME = 0, 1, 2, 3
LOG_ENV = "GAZEFIT_LOG_LEVEL"
MANIFEST = "manifest.json"

log = logging.getLogger("gazefit")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: dict
    config: str | None
    out: str
    seed: int
    version: str = __version__
    outputs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(**d)


# ---------------------------------------------------------------------------
# Commands. Each returns (inputs, outputs, exit code).


def _camera(args, run):
    return io.load_camera(args.camera) if args.camera else run["camera"]


def _scenes(path):
    scenes = io.load_scenes(path)
    if not scenes:
        raise InputError(f"{path}: no scenes")
    return scenes


def cmd_synth_basis(args, run, out: Path):
    basis = synthetic_basis(run["basis"], seed=args.seed)
    io.save_basis(basis, out / "basis.json")
    return {}, ["basis.json"], EXIT_OK


def cmd_gen_scenes(args, run, out: Path):
    basis = io.load_basis(args.basis)
    cam = _camera(args, run)
    noise = run["noise"]
    overrides = {k: getattr(args, k) for k in ("landmark_sigma", "target_sigma", "origin_sigma") if getattr(args, k) is not None}
    noise = NoiseSpec(**{**noise.to_dict(), **overrides})
    scenes = generate_scenes(basis, cam, args.count, run["scene_ranges"], noise, seed=args.seed)
    io.save_scenes(scenes, out / "scenes.jsonl")
    io.save_camera(cam, out / "camera.json")
    return {"basis": args.basis, "camera": args.camera}, ["scenes.jsonl", "camera.json"], EXIT_OK


def cmd_fit(args, run, out: Path):
    basis = io.load_basis(args.basis)
    cam = _camera(args, run)
    scenes = _scenes(args.scenes)
    results = fit_scenes(scenes, basis, cam, run["fit"])
    failed = [i for i, r in enumerate(results) if r is None]
    with open(out / "results.jsonl", "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(None if r is None else r.to_dict(), sort_keys=True) + "\n")
    report = evaluate_predictions(scenes, [None if r is None else r.params for r in results], basis, cam)
    io.save_report(report, out / "report.json")
    (out / "report.txt").write_text(report.summary() + "\n", encoding="utf-8")
    print(report.summary())
    if failed:
        log.error("fit failed on scenes %s", failed)
    inputs = {"basis": args.basis, "camera": args.camera, "scenes": args.scenes}
    return inputs, ["results.jsonl", "report.json", "report.txt"], EXIT_RUNTIME if failed else EXIT_OK


def _load_params(path, index: int) -> ParamVector:
    """A parameter JSON, a single fit result, or one line of a results file."""
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".jsonl"):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not 0 <= index < len(lines):
            raise InputError(f"{path}: no result at index {index}")
        data = io._decode(lines[index], path)
        if data is None:
            raise InputError(f"{path}: the fit at index {index} failed")
    else:
        data = io._decode(text, path)
    data = data.get("params", data) if isinstance(data, dict) else data
    return io._build(path, ParamVector.from_dict, data)


def cmd_export_obj(args, run, out: Path):
    basis = io.load_basis(args.basis)
    params = _load_params(args.params, args.index) if args.params else ParamVector.zeros(basis)
    export_obj(basis, params, out / "mesh.obj")
    return {"basis": args.basis, "params": args.params}, ["mesh.obj"], EXIT_OK


def cmd_plot(args, run, out: Path):
    basis = io.load_basis(args.basis)
    cam = _camera(args, run)
    scenes = _scenes(args.scenes)
    if not 0 <= args.index < len(scenes):
        raise InputError(f"{args.scenes}: no scene at index {args.index}")
    scene = scenes[args.index]
    params = _load_params(args.results, args.index) if args.results else scene.true_params
    write_svg(basis, cam, params, scene, out / "overlay.svg")
    inputs = {"basis": args.basis, "camera": args.camera, "scenes": args.scenes, "results": args.results}
    return inputs, ["overlay.svg"], EXIT_OK


def cmd_ablate(args, run, out: Path):
    basis = io.load_basis(args.basis)
    cam = _camera(args, run)
    scenes = _scenes(args.scenes)
    reports = ablation_suite(scenes, basis, cam, run["fit"])
    io.write_json(out / "ablation.json", {name: r.to_dict() for name, r in reports.items()})
    table = format_table(reports)
    (out / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return {"basis": args.basis, "camera": args.camera, "scenes": args.scenes}, ["ablation.json", "ablation.txt"], EXIT_OK


COMMANDS = {
    "synth-basis": cmd_synth_basis,
    "gen-scenes": cmd_gen_scenes,
    "fit": cmd_fit,
    "export-obj": cmd_export_obj,
    "plot": cmd_plot,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON with optional basis / scene_ranges / noise / fit / camera sections")
    common.add_argument("--out", default=".", help="output directory (created if missing)")

    parser = _Parser(prog="gazefit", description="Eye-region model fitting with binocular vergence constraints.")
    parser.add_argument("--version", action="version", version=f"gazefit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("synth-basis", parents=[common], help="write a procedural eye-region basis")

    p = sub.add_parser("gen-scenes", parents=[common], help="sample synthetic scenes as JSONL")
    p.add_argument("--basis", required=True)
    p.add_argument("--camera")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--landmark-sigma", type=float, help="pixels")
    p.add_argument("--target-sigma", type=float, help="metres")
    p.add_argument("--origin-sigma", type=float, help="metres")

    for name, text in (("fit", "fit every scene and report errors"), ("ablate", "run the loss-group ablation")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--basis", required=True)
        p.add_argument("--scenes", required=True)
        p.add_argument("--camera")

    p = sub.add_parser("export-obj", parents=[common], help="write the posed mesh as OBJ")
    p.add_argument("--basis", required=True)
    p.add_argument("--params", help="parameter JSON, fit result JSON, or results.jsonl (default: mean model)")
    p.add_argument("--index", type=int, default=0, help="line in a results.jsonl")

    p = sub.add_parser("plot", parents=[common], help="SVG overlay of fitted and true gaze rays")
    p.add_argument("--basis", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--results", help="results.jsonl from fit (default: draw the truth)")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--camera")

    p = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to this directory instead of the recorded one")
    return parser


def _setup_logging():
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _rerun(args) -> int:
    manifest = RunManifest.from_dict(io._build(args.manifest, lambda d: d, io.read_json(args.manifest)))
    argv = list(manifest.argv)
    if args.out:
        argv += ["--out", args.out]
    return main(argv)


def _run(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "rerun":
        return _rerun(args)
    if getattr(args, "count", 1) < 1:
        raise UsageError("--count must be at least 1")
    run = io.load_run_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs, outputs, code = COMMANDS[args.command](args, run, out)
    manifest = RunManifest(
        command=args.command,
        argv=list(argv),
        inputs=inputs,
        config=args.config,
        out=args.out,
        seed=args.seed,
        outputs=outputs,
    )
    io.write_json(out / MANIFEST, manifest.to_dict())
    return code


def main(argv=None) -> int:
    _setup_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except UsageError as exc:
        print(f"gazefit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.ParseError, InputError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"gazefit: input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"gazefit: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
