"""Drive the full synth -> ingest -> learn -> scan -> eval chain through the CLI."""

import json
from pathlib import Path

from capinfer.cli import main


def run(*argv):
    rc = main([str(a) for a in argv])
    assert rc == 0, f"capinfer {' '.join(map(str, argv))} exited {rc}"


def full_pipeline(work: Path, spec: dict, threshold=0.37, jobs=1, steps=None):
    work.mkdir(parents=True, exist_ok=True)
    (work / "spec.json").write_text(json.dumps(spec))
    bundle = work / "bundle"
    run("-q", "synth", work / "spec.json", bundle)
    run("-q", "ingest", bundle / "corpus.jsonl", work / "index")
    run("-q", "learn", work / "index", bundle / "capabilities.json", work / "matrix.tsv")
    run("-q", "scan", work / "matrix.tsv", bundle / "binaries", "--format", "json", "--verbosity", "1",
        "--jobs", jobs, "--out", work / "reports.jsonl")
    run("-q", "eval", bundle / "labels.jsonl", "--reports", work / "reports.jsonl",
        "--threshold", threshold, "--out", work / "metrics.tsv")
    if steps:
        run("-q", "sweep", bundle / "labels.jsonl", "--reports", work / "reports.jsonl",
            "--steps", steps, "--out", work / "sweep.tsv")
    return work


def read_tsv(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split("\t")
    return [dict(zip(header, l.split("\t"))) for l in lines[1:]]
