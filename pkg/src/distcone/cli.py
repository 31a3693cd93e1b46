"""Command-line front end.

Every subcommand prints a JSON summary on stdout (unless ``--quiet``), writes
its artifacts atomically and emits a run manifest. Exit codes: 0 success or
pass, 1 a test verdict of fail, 2 usage or data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .cone import DEFAULT_TOLERANCE, check_matrix, extend, is_admissible
from .errors import ConeError
from .laws import DiagonalLaw
from .matdist import (ball_measure_estimate, compactness_check, equivalence_test, sample_D,
                      sample_long, tightness_check)
from .polytope import enumerate_vertices
from .random_metrics import RandomMetricConfig, sample_metric
from .universal import UniversalBuilder, universality_test

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2
_GLOBAL = ("seed", "output", "tolerance", "quiet", "manifest")


def version() -> str:
    for name in ("distcone", "artifact"):
        try:
            return metadata.version(name)
        except metadata.PackageNotFoundError:
            continue
    return "0+unknown"


def emit_histogram(values, bins: int, path) -> Path:
    """CSV of bin_left, bin_right, count; empty input gives a single 0,0,0 row."""
    return io.write_text(path, io.histogram_csv(values, bins))


class _Run:
    """What a command hands back: a summary, its artifacts and an exit code."""

    def __init__(self, summary: dict, code: int = EXIT_OK, artifacts=()):
        self.summary = summary
        self.code = code
        self.artifacts = [str(p) for p in artifacts]


def cmd_validate(args) -> _Run:
    square = io.read_square(args.input)
    violations = check_matrix(square, args.tolerance)
    report = {"valid": not violations, "order": int(square.shape[0]),
              "violations": [v.to_dict() for v in violations]}
    artifacts = [io.write_json(args.output, report)] if args.output else []
    return _Run(report, EXIT_OK if not violations else EXIT_FAIL, artifacts)


def _parse_vector(text: str) -> np.ndarray:
    text = text.strip()
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        return np.asarray(json.loads(path.read_text()), dtype=float)
    return np.array([float(x) for x in text.replace(",", " ").split()])


def cmd_extend(args) -> _Run:
    r = io.read_matrix(args.input, args.tolerance)
    a = _parse_vector(args.vector)
    verdict = is_admissible(r, a)
    if not verdict:
        return _Run({"admissible": False, "violations": [v.to_dict() for v in verdict.violations]},
                    EXIT_FAIL)
    ext = extend(r, a)
    artifacts = [io.write_matrix(args.output, ext)] if args.output else []
    return _Run({"admissible": True, "order": ext.order, "upper": ext.upper.tolist()},
                EXIT_OK, artifacts)


def cmd_vertices(args) -> _Run:
    r = io.read_matrix(args.input, args.tolerance)
    poly = enumerate_vertices(r)
    artifacts = [io.write_vertices(args.output, poly.vertices)] if args.output else []
    summary = {"order": r.order, "count": len(poly.vertices), "dimension": poly.dimension}
    if not args.output:
        summary["vertices"] = poly.vertices.tolist()
    return _Run(summary, EXIT_OK, artifacts)


def cmd_build_universal(args) -> _Run:
    builder = UniversalBuilder(args.seed, diameter=args.diameter, tolerance=args.tolerance)
    r = builder.run(args.steps)
    worst = max(rec.gap - rec.bound for rec in builder.log)
    summary = {"order": r.order, "steps": args.steps, "seed": args.seed,
               "diameter": args.diameter, "max_entry": float(r.upper.max()),
               "max_gap_excess": float(worst)}
    artifacts = [io.write_matrix(args.output, r)] if args.output else []
    if args.log:
        rows = ["step,target_order,visit,gap,bound"]
        rows += [f"{x.step},{x.target_order},{x.visit},{x.gap!r},{x.bound!r}" for x in builder.log]
        artifacts.append(io.write_text(args.log, "\n".join(rows) + "\n"))
    return _Run(summary, EXIT_OK, artifacts)


def cmd_check_universal(args) -> _Run:
    r = io.read_matrix(args.input, args.tolerance)
    report = universality_test(r, args.n, args.epsilon, args.targets, args.seed)
    artifacts = [io.write_json(args.output, report.to_dict())] if args.output else []
    return _Run(report.to_dict(), EXIT_OK if report.passed else EXIT_FAIL, artifacts)


def cmd_sample_metric(args) -> _Run:
    config = RandomMetricConfig(args.order, DiagonalLaw.parse(args.law), args.seed,
                                args.allow_approximate, tolerance=args.tolerance)
    r = sample_metric(config)
    meta = {"law": str(config.diagonal_law), "seed": args.seed, "approximate": config.approximate}
    artifacts = [io.write_matrix(args.output, r, meta=meta)] if args.output else []
    summary = {"order": r.order, **meta}
    if not args.output:
        summary["upper"] = r.upper.tolist()
    return _Run(summary, EXIT_OK, artifacts)


def cmd_matdist(args) -> _Run:
    T = io.read_triple(args.triple, args.tolerance)
    E = sample_D(T, args.k, args.count, args.seed)
    artifacts = []
    if args.output:
        artifacts.append(io.write_text(args.output, io.samples_jsonl(E)))
    if args.histogram:
        artifacts.append(emit_histogram(E.matrices[:, 0, 1], args.bins, args.histogram))
    feats = E.features()
    summary = {"label": T.label, "k": args.k, "count": E.count, "seed": args.seed,
               "mean_sorted_feature": feats.mean(axis=0).tolist()}
    return _Run(summary, EXIT_OK, artifacts)


def cmd_equiv_test(args) -> _Run:
    T1 = io.read_triple(args.a, args.tolerance)
    T2 = io.read_triple(args.b, args.tolerance)
    verdict = equivalence_test(T1, T2, args.k, args.count, args.perms, args.alpha, args.seed)
    artifacts = [io.write_json(args.output, verdict.to_dict())] if args.output else []
    return _Run(verdict.to_dict(), EXIT_OK if verdict.equivalent else EXIT_FAIL, artifacts)


def cmd_compact_check(args) -> _Run:
    T = io.read_triple(args.triple, args.tolerance)
    sample = sample_long(T, args.n, args.seed, args.replicas)
    check = tightness_check if args.criterion == "tightness" else compactness_check
    result = check(sample, args.epsilon, args.anchors)
    summary = {"criterion": args.criterion, **result.to_dict()}
    artifacts = [io.write_json(args.output, summary)] if args.output else []
    return _Run(summary, EXIT_OK if result.passed else EXIT_FAIL, artifacts)


def cmd_ball_measure(args) -> _Run:
    T = io.read_triple(args.triple, args.tolerance)
    sample = sample_long(T, args.n, args.seed)
    value = ball_measure_estimate(sample, args.anchor, args.radius)
    summary = {"estimate": value, "n": args.n, "anchor": args.anchor, "radius": args.radius,
               "anchor_point": int(sample.indices[0, args.anchor])}
    artifacts = [io.write_json(args.output, summary)] if args.output else []
    return _Run(summary, EXIT_OK, artifacts)


def cmd_replay(args) -> _Run:
    manifest = json.loads(Path(args.from_manifest).read_text())
    code = main(manifest["argv"])
    return _Run({"replayed": manifest["command"], "exit_code": code}, code)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--output", "-o", help="primary output file")
    common.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                        help="slack allowed in metric inequalities")
    common.add_argument("--quiet", "-q", action="store_true", help="no summary on stdout")
    common.add_argument("--manifest", help="where to write the run manifest")

    parser = argparse.ArgumentParser(prog="distcone", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=version())
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "check a square matrix (JSON or CSV) for metric violations")
    p.add_argument("--input", "-i", required=True)

    p = add("extend", cmd_extend, "append an admissible vector as a new point")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--vector", required=True, help="comma-separated entries or a JSON file")

    p = add("vertices", cmd_vertices, "vertices of the compact part of the admissible set")
    p.add_argument("--input", "-i", required=True)

    p = add("build-universal", cmd_build_universal, "grow a prefix of a universal matrix")
    p.add_argument("--steps", type=_positive_int, required=True)
    p.add_argument("--diameter", type=float, default=None)
    p.add_argument("--log", help="CSV of per-step target gaps")

    p = add("check-universal", cmd_check_universal, "finite universality test of a matrix")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--targets", type=_positive_int, default=50)

    p = add("sample-metric", cmd_sample_metric, "sample a random distance matrix")
    p.add_argument("--order", type=_positive_int, required=True)
    p.add_argument("--law", default="exp:1.0", help="exp:<mean> or halfnormal:<scale>")
    p.add_argument("--allow-approximate", action="store_true")

    p = add("matdist", cmd_matdist, "sample k x k matrices of a metric triple (JSONL)")
    p.add_argument("--triple", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--count", type=_positive_int, default=1000)
    p.add_argument("--histogram", help="CSV histogram of the (0, 1) entry")
    p.add_argument("--bins", type=_positive_int, default=20)

    p = add("equiv-test", cmd_equiv_test, "test whether two triples have equal matrix laws")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--count", type=_positive_int, default=2000)
    p.add_argument("--perms", type=_positive_int, default=500)
    p.add_argument("--alpha", type=float, default=0.05)

    p = add("compact-check", cmd_compact_check, "compactness or tightness criterion")
    p.add_argument("--triple", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--anchors", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, default=10000)
    p.add_argument("--replicas", type=_positive_int, default=200)
    p.add_argument("--criterion", choices=("compactness", "tightness"), default="compactness")

    p = add("ball-measure", cmd_ball_measure, "ergodic estimate of a ball's measure")
    p.add_argument("--triple", required=True)
    p.add_argument("--n", type=_positive_int, default=10000)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--anchor", type=int, default=0)

    p = add("replay", cmd_replay, "re-run the command recorded in a manifest")
    p.add_argument("from_manifest", metavar="MANIFEST")
    return parser


def _manifest(args, argv: list[str], run: _Run) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in _GLOBAL + ("func", "command")}
    return {"command": args.command, "config": config, "seed": args.seed,
            "artifact_paths": run.artifacts, "version": version(), "argv": argv,
            "exit_code": run.code}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    try:
        run = args.func(args)
    except (ConeError, OSError) as exc:
        print(f"distcone {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "replay":
        return run.code
    if not args.quiet:
        sys.stdout.write(io.dumps(run.summary))
    manifest = _manifest(args, argv, run)
    if args.manifest:
        io.write_json(args.manifest, manifest)
    elif args.output:
        io.write_json(str(args.output) + ".manifest.json", manifest)
    elif not args.quiet:
        sys.stderr.write(io.dumps(manifest))
    return run.code


if __name__ == "__main__":
    sys.exit(main())
