"""Command-line entry point.

Subcommands cover the full workflow: ``simulate`` renders a scripted
sequence, ``gen`` batch-produces twins for one relation, ``run`` executes the
validation pipeline, ``eval`` scores alarms against ground truth (or derives
metrics from published raw counts), ``report`` summarizes a report document,
and ``config`` prints the built-in defaults.

Exit codes are part of the contract: 0 success, 2 configuration error,
3 I/O failure, 4 backend launch failure, 5 twin generation exhausted its
retries. Alarms never affect the exit status; the optional ``--fail-under-f1``
gate on ``eval`` exits 1 when the scored F1 falls short.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import evaluation, genproto, pipeline, simulator
from .config import RunConfig, dump_defaults, load_config
from .errors import (
    ConfigInvalid,
    ExhaustedRetries,
    HandshakeTimeout,
    IoFailure,
    LaunchFailure,
    MrTwinError,
    NoFrames,
    ProtocolVersionMismatch,
    UnsupportedTransform,
)
from .relations import id_sort_key
from .serialize import canonical_float, dumps as canonical_dumps
from .sut import SutHandle
from .transforms import generate_compliant

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_LAUNCH = 4
EXIT_EXHAUSTED = 5
EXIT_GATE = 1  # only via eval --fail-under-f1


def _load_script(path: Path) -> simulator.ScenarioScript:
    if not path.is_file():
        raise ConfigInvalid(f"script file not found: {path}")
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ConfigInvalid(f"{path}: {err}") from err
    allowed_top = {"script", "segment", "hazard"}
    unknown = set(data) - allowed_top
    if unknown:
        raise ConfigInvalid(f"{path}: unknown table(s): {', '.join(sorted(unknown))}")
    script_table = data.get("script", {})
    allowed_script = {"length_s", "frame_rate", "seed", "recovery_s", "crash_lag_s", "crash_threshold"}
    unknown = set(script_table) - allowed_script
    if unknown:
        raise ConfigInvalid(f"{path}: unknown [script] key(s): {', '.join(sorted(unknown))}")
    if "length_s" not in script_table:
        raise ConfigInvalid(f"{path}: [script] must set length_s")
    return simulator.script_from_dict({
        **script_table,
        "segments": data.get("segment", []),
        "hazards": data.get("hazard", []),
    })


def _sut_factory(cfg: RunConfig):
    if cfg.sut_kind == "stub":
        return SutHandle.stub
    return lambda: SutHandle.external(genproto.open_sut(cfg.sut_command))


def _generator_factory(cfg: RunConfig):
    if cfg.backend_kind == "builtin":
        return None
    return lambda: genproto.open_generator(
        cfg.backend_command, workdir=cfg.backend_workdir or None
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    script = _load_script(Path(args.script))
    out_dir = simulator.generate_sequence(script, Path(args.out))
    truth = simulator.ground_truth(script)
    print(f"sequence {truth.sequence_id}: {script.frame_count} frames -> {out_dir}")
    if truth.crash_times:
        times = ", ".join(format(t, ".3f") for t in truth.crash_times)
        print(f"crash events at: {times} s")
    else:
        print("crash events: none")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    registry = {d.id: d for d in cfg.enabled_definitions()}
    if args.mr not in registry:
        raise ConfigInvalid(f"relation {args.mr!r} is not enabled in the configuration")
    defn = registry[args.mr]
    frames = pipeline.load_frames(Path(args.sequence))
    if not frames:
        raise NoFrames(f"no frames under {args.sequence}")
    odd = cfg.odd_spec()
    policy = cfg.retry_policy()
    out_dir = Path(args.out) if args.out else Path(args.sequence) / f"twins_{defn.id}"
    out_dir.mkdir(parents=True, exist_ok=True)

    factory = _generator_factory(cfg)
    backend = factory() if factory else None
    entries: list[dict[str, Any]] = []
    failure: ExhaustedRetries | None = None
    try:
        for index, frame in enumerate(frames):
            spec = replace(defn.transform, seed=(cfg.seed ^ index) & ((1 << 64) - 1))
            try:
                result = generate_compliant(
                    frame.image, spec, odd, policy,
                    backend=backend, params=cfg.generator_params(),
                )
            except ExhaustedRetries as err:
                entries.append({
                    "frame_id": frame.frame_id,
                    "status": "exhausted_retries",
                    "attempts": err.attempts,
                    "violated": list(err.violated),
                })
                failure = err
                break
            twin_path = out_dir / f"{frame.frame_id}.png"
            result.twin.save(twin_path)
            entries.append({
                "frame_id": frame.frame_id,
                "status": "ok",
                "attempts": result.attempts,
                "similarity": canonical_float(result.similarity),
                "compliant": result.compliance.compliant,
            })
    finally:
        if backend is not None:
            backend.close()
        manifest = {"mr_id": defn.id, "sequence": str(args.sequence), "twins": entries}
        (out_dir / "manifest.json").write_text(canonical_dumps(manifest) + "\n")

    if failure is not None:
        raise failure
    print(f"{len(entries)} twins -> {out_dir}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    frames = pipeline.load_frames(Path(args.sequence))
    definitions = cfg.enabled_definitions()
    run_id = args.run_id or pipeline.fresh_run_id()
    out_dir = Path(cfg.runs_dir) / run_id

    sink = None
    if not args.no_save_twins:
        def sink(mr_id: str, frame: pipeline.Frame, result) -> None:
            result.twin.save(out_dir / "twins" / mr_id / f"{frame.frame_id}.png")

    report = pipeline.run_sequence(
        frames,
        definitions,
        cfg.odd_spec(),
        base_seed=cfg.seed,
        window=cfg.window,
        epsilon_t=cfg.epsilon_t,
        policy=cfg.retry_policy(),
        sut_factory=_sut_factory(cfg),
        generator_factory=_generator_factory(cfg),
        generator_params=cfg.generator_params(),
        jobs=args.jobs,
        run_id=run_id,
        config_snapshot=cfg.snapshot(),
        twin_sink=sink,
    )
    report_path = pipeline.write_report(report, out_dir / "report.jsonl")
    totals = report.totals
    print(
        f"run {report.run_id}: {totals['records']} records over {totals['frames']} frames, "
        f"{totals['alarms']} alarms, {totals['unevaluable']} unevaluable"
    )
    print(f"report -> {report_path}")
    return EXIT_OK


def _print_summaries(summaries: Sequence[evaluation.MetricSummary]) -> None:
    rows = [evaluation.SUMMARY_HEADER] + [evaluation.summary_row(s) for s in summaries]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.counts:
        summaries = [
            evaluation.metrics(method, conf)
            for method, conf in evaluation.load_counts(Path(args.counts))
        ]
        ttc: dict[str, evaluation.TtcHistogram] = {}
        out_dir = Path(args.out) if args.out else None
    else:
        if not (args.report and args.sequence):
            raise ConfigInvalid("eval needs either --counts or both --report and --sequence")
        report = pipeline.read_report(Path(args.report))
        manifest = simulator.load_manifest(Path(args.sequence))
        span = (float(manifest["span"][0]), float(manifest["span"][1]))
        truth = evaluation.load_ground_truth(
            Path(args.sequence) / "ground_truth.csv", span, float(manifest["frame_rate"])
        )
        intervals = evaluation.label_windows(truth, cfg.eval_window_s)
        mr_ids = sorted({r.mr_id for r in report.records}, key=id_sort_key)
        summaries = []
        ttc = {}
        for mr_id in mr_ids:
            alarms = pipeline.alarm_times(report, mr_id)
            summaries.append(evaluation.metrics(mr_id, evaluation.confusion(intervals, alarms)))
            ttc[mr_id] = evaluation.time_to_crash_histogram(
                alarms, truth, cfg.eval_window_s, cfg.eval_bin_width
            )
        out_dir = Path(args.out) if args.out else Path(args.report).parent

    _print_summaries(summaries)
    if out_dir is not None:
        evaluation.write_summary_csv(out_dir / "metrics.csv", summaries)
        doc = {
            "rows": [
                {
                    "method": s.method,
                    "tp": s.tp, "fp": s.fp, "tn": s.tn, "fn": s.fn,
                    "tpr": None if s.tpr is None else canonical_float(s.tpr),
                    "fpr": None if s.fpr is None else canonical_float(s.fpr),
                    "f1": None if s.f1 is None else canonical_float(s.f1),
                    "precision": None if s.precision is None else canonical_float(s.precision),
                }
                for s in summaries
            ],
            "ttc": {
                mr_id: {
                    "window_s": canonical_float(h.window_s),
                    "bin_width": canonical_float(h.bin_width),
                    "counts": list(h.counts),
                }
                for mr_id, h in ttc.items()
            },
        }
        (out_dir / "metrics.json").write_text(canonical_dumps(doc) + "\n")
        print(f"metrics -> {out_dir / 'metrics.csv'}")

    if args.fail_under_f1 is not None:
        failing = [s.method for s in summaries if s.f1 is None or s.f1 < args.fail_under_f1]
        if failing:
            print(f"F1 below {args.fail_under_f1}: {', '.join(failing)}", file=sys.stderr)
            return EXIT_GATE
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    report = pipeline.read_report(Path(args.report))
    totals = report.totals
    print(f"run {report.run_id} generated {report.generated_at}")
    print(
        f"frames={totals['frames']} records={totals['records']} "
        f"alarms={totals['alarms']} unevaluable={totals['unevaluable']}"
    )
    by_mr: dict[str, int] = {}
    for record in report.records:
        if record.alarm:
            by_mr[record.mr_id] = by_mr.get(record.mr_id, 0) + 1
    for mr_id in sorted(by_mr, key=id_sort_key):
        print(f"{mr_id}: {by_mr[mr_id]} alarms")
    reasons: dict[str, int] = {}
    for record in report.records:
        if record.unevaluable and record.reason:
            reasons[record.reason] = reasons.get(record.reason, 0) + 1
    for reason in sorted(reasons):
        print(f"unevaluable[{reason}]: {reasons[reason]}")
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    if not args.dump_defaults:
        raise ConfigInvalid("nothing to do; pass --dump-defaults")
    sys.stdout.write(dump_defaults())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrtwin",
        description="Metamorphic twin validation for lane-keeping camera pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scripted sequence to disk")
    p.add_argument("--script", required=True, help="scenario script (TOML)")
    p.add_argument("--out", required=True, help="output sequence directory")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("gen", help="batch-generate twins for one relation")
    p.add_argument("--config", default=None, help="configuration file (TOML)")
    p.add_argument("--sequence", required=True, help="sequence directory from simulate")
    p.add_argument("--mr", required=True, help="relation id, e.g. mr2")
    p.add_argument("--out", default=None, help="twin output directory")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("run", help="run the validation pipeline over a sequence")
    p.add_argument("--config", default=None, help="configuration file (TOML)")
    p.add_argument("--sequence", required=True, help="sequence directory from simulate")
    p.add_argument("--jobs", type=int, default=1, help="parallel relation workers")
    p.add_argument("--run-id", default=None, help="fixed run id (default: timestamped)")
    p.add_argument("--no-save-twins", action="store_true", help="skip writing twin images")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="score alarms against ground truth")
    p.add_argument("--config", default=None, help="configuration file (TOML)")
    p.add_argument("--report", default=None, help="report document from run")
    p.add_argument("--sequence", default=None, help="sequence directory with ground_truth.csv")
    p.add_argument("--counts", default=None, help="csv of published raw counts (method,tp,fp,tn,fn)")
    p.add_argument("--out", default=None, help="directory for metrics.csv/metrics.json")
    p.add_argument("--fail-under-f1", type=float, default=None,
                   help="exit 1 unless every scored F1 reaches this value")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="summarize a report document")
    p.add_argument("--report", required=True, help="report document from run")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("config", help="show configuration defaults")
    p.add_argument("--dump-defaults", action="store_true", help="print the default configuration")
    p.set_defaults(fn=cmd_config)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalid as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoFrames, UnsupportedTransform) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except (LaunchFailure, HandshakeTimeout, ProtocolVersionMismatch) as err:
        print(f"backend launch failure: {err}", file=sys.stderr)
        return EXIT_LAUNCH
    except ExhaustedRetries as err:
        print(f"generation failed: {err}", file=sys.stderr)
        return EXIT_EXHAUSTED
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except MrTwinError as err:
        # anything else from this package is a runtime failure of the backend
        print(f"error: {err}", file=sys.stderr)
        return EXIT_LAUNCH


if __name__ == "__main__":
    sys.exit(main())
