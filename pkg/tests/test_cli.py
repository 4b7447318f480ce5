import json

import pytest

from capinfer.cli import main
from capinfer.index import load_index
from capinfer.model import load_matrix

from pipeline import full_pipeline, read_tsv

POSTS = b"""<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" Title="irc bot" Tags="&lt;irc&gt;" Body="&lt;p&gt;send &lt;code&gt;PRIVMSG&lt;/code&gt;&lt;/p&gt;"/>
  <row Id="2" PostTypeId="2" ParentId="1" Body="&lt;p&gt;and TOPIC&lt;/p&gt;"/>
  <row Id="3" PostTypeId="1" Title="rdp client" Tags="&lt;rdp&gt;" Body="mstsc"/>
</posts>
"""


def jsonl_corpus(path, n=4):
    rows = [
        {"doc_id": i, "thread_id": i, "kind": "question", "title": f"t{i}", "tags": ["irc" if i % 2 else "misc"],
         "body": "PRIVMSG channel" if i % 2 else "channel"}
        for i in range(1, n + 1)
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_ingest_xml(tmp_path, capsys):
    (tmp_path / "Posts.xml").write_bytes(POSTS)
    assert main(["ingest", str(tmp_path / "Posts.xml"), str(tmp_path / "idx")]) == 0
    index = load_index(tmp_path / "idx")
    assert index.doc_count == 3
    assert index.documents[2].title == "irc bot"
    assert "documents: 3 (questions 2, answers 1)" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "idx" / "manifest.json").read_text())
    assert manifest["command"] == "ingest" and manifest["kernel_backend"] in ("cython", "python")


def test_ingest_jsonl(tmp_path):
    assert main(["ingest", str(jsonl_corpus(tmp_path / "c.jsonl")), str(tmp_path / "idx")]) == 0
    assert load_index(tmp_path / "idx").doc_count == 4


def test_ingest_errors(tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "nope.xml"), str(tmp_path / "idx")]) != 0
    (tmp_path / "bad.jsonl").write_text('{"doc_id": 2}\n')
    assert main(["ingest", str(tmp_path / "bad.jsonl"), str(tmp_path / "idx")]) == 1
    assert "line 1: missing field: kind" in capsys.readouterr().err


@pytest.fixture
def learned(tmp_path):
    main(["-q", "ingest", str(jsonl_corpus(tmp_path / "c.jsonl", 12)), str(tmp_path / "idx")])
    (tmp_path / "caps.json").write_text(json.dumps([
        {"name": "irc", "query": "tags:irc"},
        {"name": "none", "query": "tags:nothing"},
        {"name": "tuned", "query": "tags:irc", "alpha": 5, "beta": 45},
    ]))
    assert main(["learn", str(tmp_path / "idx"), str(tmp_path / "caps.json"), str(tmp_path / "m.tsv")]) == 0
    return tmp_path


def test_learn_output(learned, capsys):
    header = [l for l in (learned / "m.tsv").read_text().splitlines() if l.startswith("#")]
    assert any('"name": "tuned"' in l and '"alpha": 5' in l for l in header)
    matrix = load_matrix(learned / "m.tsv")
    # privmsg: 6 matching docs, 6 overall
    assert matrix.lookup("irc", "privmsg") == pytest.approx(16 / 106)
    assert matrix.lookup("tuned", "privmsg") == pytest.approx(11 / 56)
    assert (learned / "m.tsv.manifest.json").exists()


def test_zero_match_warning(tmp_path, capsys):
    main(["-q", "ingest", str(jsonl_corpus(tmp_path / "c.jsonl")), str(tmp_path / "idx")])
    (tmp_path / "caps.json").write_text(json.dumps([{"name": "none", "query": "tags:nothing"}]))
    assert main(["learn", str(tmp_path / "idx"), str(tmp_path / "caps.json"), str(tmp_path / "m.tsv")]) == 0
    captured = capsys.readouterr()
    assert "matched no documents" in captured.out + captured.err


def test_learn_bad_config(tmp_path, capsys):
    main(["-q", "ingest", str(jsonl_corpus(tmp_path / "c.jsonl")), str(tmp_path / "idx")])
    (tmp_path / "caps.json").write_text(json.dumps([{"name": "irc", "query": "a"}, {"name": "irc", "query": "b"}]))
    assert main(["learn", str(tmp_path / "idx"), str(tmp_path / "caps.json"), str(tmp_path / "m.tsv")]) == 1
    assert "duplicate capability: irc" in capsys.readouterr().err


def test_scan(learned, capsys):
    sample = learned / "bot.bin"
    sample.write_bytes(b"\x00PRIVMSG\x00\x01")
    empty = learned / "empty.bin"
    empty.write_bytes(b"")
    capsys.readouterr()
    assert main(["scan", str(learned / "m.tsv"), str(sample), str(empty), "--format", "json"]) == 0
    reports = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert reports[0]["sample_id"] == str(sample)
    assert {c["name"]: c["probability"] for c in reports[1]["capabilities"]} == {"irc": 0.0, "none": 0.0, "tuned": 0.0}


def test_scan_requires_index_for_snippets(learned, capsys):
    (learned / "a.bin").write_bytes(b"PRIVMSG")
    assert main(["scan", str(learned / "m.tsv"), str(learned / "a.bin"), "--verbosity", "2"]) == 1
    assert "evidence requires index" in capsys.readouterr().err


def test_scan_with_snippets(learned, capsys):
    (learned / "a.bin").write_bytes(b"\x00PRIVMSG\x00")
    capsys.readouterr()
    rc = main(["scan", str(learned / "m.tsv"), str(learned / "a.bin"), "--verbosity", "2", "--index",
               str(learned / "idx"), "--threshold", "0.1"])
    assert rc == 0
    assert "[-] 'privmsg' t1" in capsys.readouterr().out


def test_scan_missing_file_is_an_error(learned, capsys):
    (learned / "a.bin").write_bytes(b"PRIVMSG")
    assert main(["scan", str(learned / "m.tsv"), str(learned / "a.bin"), str(learned / "gone.bin")]) == 1
    captured = capsys.readouterr()
    assert "gone.bin" in captured.err and "== " in captured.out


def test_strings(tmp_path, capsys):
    (tmp_path / "f.bin").write_bytes(b"\x00\x01PRIVMSG #chan\x00Hi\x00")
    assert main(["strings", str(tmp_path / "f.bin")]) == 0
    assert json.loads(capsys.readouterr().out) == {"offset": 2, "text": "PRIVMSG #chan"}


def test_synth_is_deterministic(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"seed": 3, "docs_per_capability": 5, "noise_docs": 10, "binaries_per_class": 2}))
    for d in ("a", "b"):
        assert main(["-q", "synth", str(spec), str(tmp_path / d)]) == 0
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file() and f.name != "manifest.json":
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


@pytest.mark.slow
def test_full_pipeline(tmp_path):
    spec = {"seed": 2, "docs_per_capability": 20, "noise_docs": 60, "binaries_per_class": 10}
    work = full_pipeline(tmp_path, spec, jobs=2, steps=1)
    rows = read_tsv(work / "metrics.tsv")
    assert [r["capability"] for r in rows] == ["cap0", "cap1", "cap2"]
    assert all(float(r["f_score"]) >= 0.9 for r in rows)
    sweep = read_tsv(work / "sweep.tsv")
    assert len(sweep) == 1 and float(sweep[0]["threshold"]) == 0.0
    for name in ("metrics.tsv", "sweep.tsv", "reports.jsonl", "matrix.tsv"):
        assert (work / f"{name}.manifest.json").exists()


def test_eval_needs_a_score_source(tmp_path, capsys):
    (tmp_path / "labels.jsonl").write_text('{"sample_id": "a", "capability": "c", "label": "positive"}\n')
    assert main(["eval", str(tmp_path / "labels.jsonl")]) == 1
    assert "--reports" in capsys.readouterr().err


def test_eval_rescan_matches_reports(tmp_path):
    work = full_pipeline(tmp_path, {"seed": 1, "docs_per_capability": 10, "noise_docs": 30, "binaries_per_class": 5})
    out = tmp_path / "rescan.tsv"
    assert main(["-q", "eval", str(work / "bundle" / "labels.jsonl"), "--matrix", str(work / "matrix.tsv"),
                 "--samples", str(work / "bundle" / "binaries"), "--out", str(out)]) == 0
    assert read_tsv(out) == read_tsv(work / "metrics.tsv")
