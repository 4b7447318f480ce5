"""Command-line front end: ingest, learn, scan, eval, sweep, synth, strings."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__, kernels
from .corpus import (
    CorpusError,
    IngestStats,
    assemble_documents,
    collect_question_meta,
    ingest_jsonl,
    parse_stackexchange_posts,
    write_jsonl,
)
from .evaluation import (
    EvaluationError,
    SynthSpec,
    evaluate,
    generate_synthetic_benchmark,
    load_labels,
    sweep_thresholds,
    threshold_sweep,
    write_bundle,
    write_metrics_tsv,
    write_sweep_tsv,
)
from .extraction import DEFAULT_MIN_LEN, extract_printable_strings, extract_wide_strings, write_strings_jsonl
from .index import CountingMode, IndexError_, build_index, kind_counts, load_index, save_index
from .inference import (
    DEFAULT_THRESHOLD,
    InferenceParams,
    Verbosity,
    format_report_text,
    report_from_dict,
    report_to_json,
    scan_batch,
)
from .model import (
    ConfigError,
    LearningParams,
    MatrixFormatError,
    learn_matrix,
    load_capability_config,
    load_matrix,
    save_matrix,
)

log = logging.getLogger("capinfer")

JOBS_ENV = "CAPINFER_JOBS"


class CLIError(Exception):
    pass


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def write_manifest(path: Path, command: str, inputs: Sequence[str], params: dict, started: float) -> None:
    manifest = {
        "command": command,
        "inputs": [os.fspath(p) for p in inputs],
        "parameters": params,
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


# --------------------------------------------------------------------------


def _detect_format(path: Path, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    if path.suffix.lower() in (".jsonl", ".json", ".ndjson"):
        return "jsonl"
    with open(path, "rb") as fh:
        head = fh.read(512).lstrip()
    return "xml" if head.startswith(b"<") else "jsonl"


def cmd_ingest(args) -> int:
    started = time.perf_counter()
    src = Path(args.input)
    if not src.is_file():
        raise CLIError(f"input not found: {src}")
    fmt = _detect_format(src, args.format)
    stats = IngestStats()
    if fmt == "xml":
        meta = None
        if args.two_pass:
            with open(src, "rb") as fh:
                meta = collect_question_meta(parse_stackexchange_posts(fh, IngestStats()))
        with open(src, "rb") as fh:
            docs = list(assemble_documents(parse_stackexchange_posts(fh, stats), stats, meta))
    else:
        with open(src, encoding="utf-8") as fh:
            docs = list(ingest_jsonl(fh, stats))
    index = build_index(docs)
    out = save_index(index, args.out_index_dir)
    if args.dump_jsonl:
        with open(args.dump_jsonl, "w", encoding="utf-8", newline="\n") as fh:
            write_jsonl(docs, fh)
    write_manifest(out / "manifest.json", "ingest", [str(src)], {"format": fmt, "two_pass": args.two_pass}, started)
    counts = kind_counts(index)
    print(f"documents: {index.doc_count} (questions {counts['question']}, answers {counts['answer']})")
    print(f"terms: {len(index.doc_freq)}")
    if stats.skipped_post_type or stats.bad_rows or stats.orphans:
        print(
            f"skipped rows: {stats.skipped_post_type} other post types, {stats.bad_rows} malformed; "
            f"orphan answers: {stats.orphans}"
        )
    return 0


def cmd_learn(args) -> int:
    started = time.perf_counter()
    configs = load_capability_config(args.config)
    index = load_index(args.index_dir)
    params = LearningParams(args.alpha, args.beta, CountingMode(args.counting))
    timings: dict[str, float] = {}
    matrix = learn_matrix(index, configs, params, timings)
    out = Path(args.out_matrix)
    save_matrix(matrix, out)
    write_manifest(
        _sidecar(out),
        "learn",
        [args.index_dir, args.config],
        {"alpha": args.alpha, "beta": args.beta, "counting": args.counting},
        started,
    )
    for name, prov in matrix.provenance.items():
        n = len(matrix.terms_for(name))
        warn = "  WARNING: query matched no documents" if prov.matched_docs == 0 else ""
        print(
            f"{name}\tmatched_docs={prov.matched_docs}\tterms={n}\t"
            f"alpha={prov.alpha:g}\tbeta={prov.beta:g}\tlearn_s={timings[name]:.3f}{warn}"
        )
    return 0


def _expand_paths(items: Sequence[str]) -> list[str]:
    out = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            out.extend(str(c) for c in sorted(p.iterdir()) if c.is_file())
        else:
            out.append(item)
    return out


def _inference_params(args) -> InferenceParams:
    return InferenceParams(
        threshold=args.threshold,
        verbosity=Verbosity(args.verbosity),
        min_string_len=args.min_string_len,
        wide_strings=args.wide_strings,
    )


def cmd_scan(args) -> int:
    started = time.perf_counter()
    params = _inference_params(args)
    if params.verbosity >= Verbosity.WITH_SNIPPETS and not args.index:
        raise CLIError("evidence requires index (pass --index)")
    matrix = load_matrix(args.matrix)
    index = load_index(args.index) if args.index else None
    paths = _expand_paths(args.files)
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    failures = 0
    try:
        for path, report, error in scan_batch(paths, matrix, params, index, args.jobs):
            if error is not None:
                failures += 1
                print(f"error: {path}: {error}", file=sys.stderr)
                if args.format == "json":
                    out_fh.write(json.dumps({"sample_id": path, "error": error}) + "\n")
                continue
            if args.format == "json":
                out_fh.write(report_to_json(report, params.verbosity) + "\n")
            else:
                out_fh.write(format_report_text(report, params.threshold, params.verbosity) + "\n\n")
    finally:
        if args.out:
            out_fh.close()
    if args.out:
        write_manifest(
            _sidecar(Path(args.out)),
            "scan",
            [args.matrix, *paths],
            {
                "threshold": params.threshold,
                "verbosity": int(params.verbosity),
                "min_string_len": params.min_string_len,
                "wide_strings": params.wide_strings,
                "jobs": args.jobs,
            },
            started,
        )
    return 1 if failures else 0


def _load_scores(args) -> dict[tuple[str, str], float]:
    """(sample_id, capability) -> probability, from stored reports or a rescan.

    Each report is keyed by its full sample_id and by its basename so that
    labels may use either.
    """
    scores: dict[tuple[str, str], float] = {}

    def add(report) -> None:
        keys = {report.sample_id, os.path.basename(report.sample_id)}
        for s in report.scores:
            for k in keys:
                scores[(k, s.capability)] = s.probability

    if args.reports:
        with open(args.reports, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "error" in obj:
                    continue
                try:
                    add(report_from_dict(obj))
                except (KeyError, TypeError, ValueError) as exc:
                    raise CLIError(f"{args.reports} line {lineno}: bad report: {exc}") from None
    elif args.matrix:
        matrix = load_matrix(args.matrix)
        params = InferenceParams(min_string_len=args.min_string_len, wide_strings=args.wide_strings)
        for path, report, error in scan_batch(_expand_paths(args.samples), matrix, params, None, args.jobs):
            if error is not None:
                raise CLIError(f"cannot scan {path}: {error}")
            add(report)
    else:
        raise CLIError("give --reports, or --matrix with --samples")
    return scores


def cmd_eval(args) -> int:
    started = time.perf_counter()
    with open(args.labels, encoding="utf-8") as fh:
        labels = load_labels(fh)
    rows = evaluate(_load_scores(args), labels, args.threshold, args.tp_ratio)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_metrics_tsv(rows, fh)
        write_manifest(
            _sidecar(Path(args.out)),
            "eval",
            [args.labels, args.reports or args.matrix],
            {"threshold": args.threshold, "tp_ratio": args.tp_ratio},
            started,
        )
    else:
        write_metrics_tsv(rows, sys.stdout)
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    with open(args.labels, encoding="utf-8") as fh:
        labels = load_labels(fh)
    points = threshold_sweep(_load_scores(args), labels, sweep_thresholds(args.steps), args.tp_ratio)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_sweep_tsv(points, fh)
        write_manifest(
            _sidecar(Path(args.out)),
            "sweep",
            [args.labels, args.reports or args.matrix],
            {"steps": args.steps, "tp_ratio": args.tp_ratio},
            started,
        )
    else:
        write_sweep_tsv(points, sys.stdout)
    return 0


def cmd_synth(args) -> int:
    started = time.perf_counter()
    with open(args.spec_json, encoding="utf-8") as fh:
        spec = SynthSpec.from_dict(json.load(fh))
    bundle = generate_synthetic_benchmark(spec)
    out = write_bundle(bundle, args.out_dir)
    write_manifest(out / "manifest.json", "synth", [args.spec_json], {"seed": spec.seed}, started)
    pos = sum(1 for s in bundle.labels if s.label.value == "positive")
    print(
        f"documents: {len(bundle.documents)}  binaries: {len(bundle.binaries)}  "
        f"labels: {len(bundle.labels)} ({pos} positive)"
    )
    return 0


def cmd_strings(args) -> int:
    data = Path(args.file).read_bytes()
    strings = extract_printable_strings(data, args.min_string_len)
    if args.wide_strings:
        strings = sorted(strings + extract_wide_strings(data, args.min_string_len))
    write_strings_jsonl(strings, sys.stdout)
    return 0


# --------------------------------------------------------------------------


def _add_extraction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-string-len", type=int, default=DEFAULT_MIN_LEN, help="shortest printable run kept (default 5)")
    p.add_argument("--wide-strings", action="store_true", help="also extract UTF-16LE strings")


def _add_score_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("labels", help="labels JSONL: {sample_id, capability, label}")
    p.add_argument("--reports", help="scan reports JSONL (scan --format json)")
    p.add_argument("--matrix", help="rescan: matrix TSV")
    p.add_argument("--samples", nargs="+", default=[], help="rescan: files or directories")
    p.add_argument("--tp-ratio", type=float, default=0.5, help="assumed positive share for normalized precision")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--out", help="write TSV here instead of stdout")
    _add_extraction_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capinfer", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND} kernels)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build an index from Posts.xml or corpus JSONL")
    p.add_argument("input")
    p.add_argument("out_index_dir")
    p.add_argument("--format", choices=["auto", "xml", "jsonl"], default="auto")
    p.add_argument("--two-pass", action="store_true", help="resolve answers that precede their question")
    p.add_argument("--dump-jsonl", help="also write the normalized corpus as JSONL")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("learn", help="learn the term-capability matrix")
    p.add_argument("index_dir")
    p.add_argument("config")
    p.add_argument("out_matrix")
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--beta", type=float, default=90.0)
    p.add_argument("--counting", choices=[m.value for m in CountingMode], default="document")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("scan", help="infer capabilities of binaries")
    p.add_argument("matrix")
    p.add_argument("files", nargs="+")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.add_argument("--verbosity", type=int, choices=[0, 1, 2], default=0)
    p.add_argument("--index", help="index directory (needed for --verbosity 2)")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--out", help="write reports here instead of stdout")
    _add_extraction_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("eval", help="per-capability metrics at one threshold")
    _add_score_source(p)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="mean precision/recall across thresholds")
    _add_score_source(p)
    p.add_argument("--steps", type=int, default=100)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic benchmark bundle")
    p.add_argument("spec_json")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("strings", help="dump extracted strings as JSONL")
    p.add_argument("file")
    _add_extraction_flags(p)
    p.set_defaults(func=cmd_strings)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (
        CLIError,
        ConfigError,
        CorpusError,
        EvaluationError,
        IndexError_,
        MatrixFormatError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
