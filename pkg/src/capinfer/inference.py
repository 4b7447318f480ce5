"""Capability inference for binaries, with traceable evidence."""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import textwrap
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from . import kernels
from .extraction import DEFAULT_MIN_LEN, TermSet, extract_terms
from .index import InvertedIndex, document_field_terms, execute_query, parse_query
from .model import Provenance, TermCapabilityMatrix

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.37
DEFAULT_WINDOW = 240
UNAVAILABLE_TITLE = "(unavailable: index/matrix mismatch)"

__all__ = [
    "CapabilityReport",
    "CapabilityScore",
    "Evidence",
    "EvidenceBuilder",
    "InferenceParams",
    "Verbosity",
    "build_evidence",
    "format_report_text",
    "likelihood_band",
    "noisy_or",
    "report_to_dict",
    "scan_batch",
    "scan_binary",
    "scan_file",
    "score_capability",
]


class Verbosity(enum.IntEnum):
    SCORES_ONLY = 0
    WITH_TERMS = 1
    WITH_SNIPPETS = 2


@dataclass(frozen=True)
class InferenceParams:
    threshold: float = DEFAULT_THRESHOLD
    verbosity: Verbosity = Verbosity.SCORES_ONLY
    min_string_len: int = DEFAULT_MIN_LEN
    wide_strings: bool = False
    max_evidence: int = 10
    window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")


@dataclass(frozen=True)
class CapabilityScore:
    capability: str
    probability: float
    detected: bool
    contributing: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Evidence:
    term: str
    probability: float
    post_title: str
    snippet: str | None = None


@dataclass
class CapabilityReport:
    sample_id: str
    scores: list[CapabilityScore]
    evidence: dict[str, list[Evidence]] = field(default_factory=dict)
    timing_ms: float = 0.0

    def score(self, capability: str) -> CapabilityScore:
        for s in self.scores:
            if s.capability == capability:
                return s
        raise KeyError(capability)

    @property
    def detected(self) -> list[str]:
        return [s.capability for s in self.scores if s.detected]


def noisy_or(probabilities: Iterable[float]) -> float:
    """``1 - prod(1 - p)``, summed in log space for stability."""
    return kernels.noisy_or(probabilities)


def score_capability(
    terms: TermSet | Iterable[str],
    matrix: TermCapabilityMatrix,
    capability: str,
    threshold: float = DEFAULT_THRESHOLD,
) -> CapabilityScore:
    if capability not in matrix.provenance:
        raise KeyError(f"capability not in matrix: {capability}")
    if isinstance(terms, TermSet):
        terms = terms.terms
    elif not isinstance(terms, (set, frozenset)):
        terms = set(terms)
    table = matrix.terms_for(capability)
    if len(terms) <= len(table):
        hits = [(t, table[t]) for t in terms if t in table]
    else:
        hits = [(t, p) for t, p in table.items() if t in terms]
    hits.sort(key=lambda tp: (-tp[1], tp[0]))
    p = noisy_or([h[1] for h in hits])
    return CapabilityScore(capability, p, p > threshold, tuple(hits))


class EvidenceBuilder:
    """Looks up example posts for (capability, term) pairs.

    Query results are cached per capability; the index and matrix are only
    read.
    """

    def __init__(self, index: InvertedIndex, provenance: dict[str, Provenance], window: int = DEFAULT_WINDOW):
        self.index = index
        self.provenance = provenance
        self.window = window
        self._matches: dict[str, list[int]] = {}

    def _matching(self, capability: str) -> list[int]:
        ids = self._matches.get(capability)
        if ids is None:
            ids = execute_query(self.index, parse_query(self.provenance[capability].query))
            self._matches[capability] = ids
        return ids

    def build(self, capability: str, term: str, probability: float = float("nan")) -> Evidence:
        for doc_id in self._matching(capability):
            doc = self.index.documents[doc_id]
            fields = document_field_terms(doc)
            if term in fields["body"]:
                return Evidence(term, probability, doc.title, snippet_around(doc.body, term, self.window))
            if term in fields["title"] or term in fields["tags"]:
                return Evidence(term, probability, doc.title, None)
        log.warning("no %s document contains %r: index and matrix disagree", capability, term)
        return Evidence(term, probability, UNAVAILABLE_TITLE, None)


_ALNUM_RE = re.compile(r"[0-9A-Za-z]+")


def _isalnum(c: str) -> bool:
    return c.isascii() and c.isalnum()


def snippet_around(text: str, term: str, window: int = DEFAULT_WINDOW) -> str | None:
    """About ``window`` characters centred on the first token equal to ``term``,
    widened so no token is cut."""
    for m in _ALNUM_RE.finditer(text):
        if m.group().lower() != term:
            continue
        half = window // 2
        mid = (m.start() + m.end()) // 2
        start = min(max(0, mid - half), m.start())
        end = max(min(len(text), mid + half), m.end())
        while start > 0 and _isalnum(text[start - 1]) and _isalnum(text[start]):
            start -= 1
        while end < len(text) and _isalnum(text[end - 1]) and _isalnum(text[end]):
            end += 1
        return text[start:end]
    return None


def build_evidence(
    index: InvertedIndex,
    matrix_provenance: dict[str, Provenance],
    capability: str,
    term: str,
    window: int = DEFAULT_WINDOW,
) -> Evidence:
    return EvidenceBuilder(index, matrix_provenance, window).build(capability, term)


def scan_binary(
    data: bytes,
    matrix: TermCapabilityMatrix,
    params: InferenceParams = InferenceParams(),
    sample_id: str = "",
    evidence: EvidenceBuilder | None = None,
) -> CapabilityReport:
    """Score every capability in ``matrix`` against the strings in ``data``."""
    if not matrix.provenance:
        raise ValueError("matrix has no capabilities")
    if params.verbosity >= Verbosity.WITH_SNIPPETS and evidence is None:
        raise ValueError("evidence requires index")
    t0 = time.perf_counter()
    terms = extract_terms(data, params.min_string_len, params.wide_strings)
    scores = [score_capability(terms, matrix, cap, params.threshold) for cap in matrix.capabilities]
    ev: dict[str, list[Evidence]] = {}
    if evidence is not None and params.verbosity >= Verbosity.WITH_SNIPPETS:
        for s in scores:
            if s.detected:
                ev[s.capability] = [
                    evidence.build(s.capability, t, p) for t, p in s.contributing[: params.max_evidence]
                ]
    return CapabilityReport(sample_id, scores, ev, (time.perf_counter() - t0) * 1000.0)


def scan_file(
    path: str | os.PathLike,
    matrix: TermCapabilityMatrix,
    params: InferenceParams = InferenceParams(),
    evidence: EvidenceBuilder | None = None,
) -> CapabilityReport:
    with open(path, "rb") as fh:
        data = fh.read()
    return scan_binary(data, matrix, params, os.fspath(path), evidence)


# --------------------------------------------------------------------------
# Batch

_worker_state: dict = {}


def _init_worker(matrix, params, index):
    _worker_state["matrix"] = matrix
    _worker_state["params"] = params
    _worker_state["evidence"] = (
        EvidenceBuilder(index, matrix.provenance, params.window) if index is not None else None
    )


def _scan_one(path: str):
    st = _worker_state
    try:
        return path, scan_file(path, st["matrix"], st["params"], st["evidence"]), None
    except OSError as exc:
        return path, None, f"{type(exc).__name__}: {exc.strerror or exc}"


def scan_batch(
    paths: Sequence[str],
    matrix: TermCapabilityMatrix,
    params: InferenceParams = InferenceParams(),
    index: InvertedIndex | None = None,
    jobs: int = 1,
) -> Iterator[tuple[str, CapabilityReport | None, str | None]]:
    """Yield ``(path, report, error)`` per path, in input order.

    Unreadable files produce an error string instead of a report and do not
    stop the batch.
    """
    if params.verbosity >= Verbosity.WITH_SNIPPETS and index is None:
        raise ValueError("evidence requires index")
    paths = [os.fspath(p) for p in paths]
    if jobs <= 1 or len(paths) <= 1:
        _init_worker(matrix, params, index)
        for p in paths:
            yield _scan_one(p)
        return
    chunk = max(1, len(paths) // (jobs * 4))
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(matrix, params, index)) as pool:
        yield from pool.map(_scan_one, paths, chunksize=chunk)


# --------------------------------------------------------------------------
# Output


def likelihood_band(probability: float, threshold: float) -> str | None:
    if probability > 0.75:
        return "likely"
    if probability > threshold:
        return "somewhat likely"
    return None


def report_to_dict(report: CapabilityReport, verbosity: Verbosity = Verbosity.WITH_TERMS) -> dict:
    caps = []
    for s in report.scores:
        item = {
            "name": s.capability,
            "probability": s.probability,
            "detected": s.detected,
            "terms": [{"term": t, "p": p} for t, p in s.contributing] if verbosity >= Verbosity.WITH_TERMS else [],
            "evidence": [
                {"term": e.term, "p": e.probability, "post_title": e.post_title, "snippet": e.snippet}
                for e in report.evidence.get(s.capability, [])
            ],
        }
        caps.append(item)
    return {"sample_id": report.sample_id, "timing_ms": report.timing_ms, "capabilities": caps}


def report_from_dict(obj: dict) -> CapabilityReport:
    scores = [
        CapabilityScore(
            c["name"],
            float(c["probability"]),
            bool(c["detected"]),
            tuple((t["term"], float(t["p"])) for t in c.get("terms", [])),
        )
        for c in obj["capabilities"]
    ]
    return CapabilityReport(obj["sample_id"], scores, {}, float(obj.get("timing_ms", 0.0)))


def report_to_json(report: CapabilityReport, verbosity: Verbosity = Verbosity.WITH_TERMS) -> str:
    return json.dumps(report_to_dict(report, verbosity), ensure_ascii=False)


def format_report_text(
    report: CapabilityReport, threshold: float = DEFAULT_THRESHOLD, verbosity: Verbosity = Verbosity.SCORES_ONLY
) -> str:
    lines = [f"== {report.sample_id} ({report.timing_ms:.1f} ms)"]
    for s in report.scores:
        band = likelihood_band(s.probability, threshold)
        suffix = f" ({band})" if band else ""
        mark = "[*]" if s.detected else "[ ]"
        lines.append(f"{mark} {s.capability} p={s.probability:.3f}{suffix}")
        if verbosity >= Verbosity.WITH_TERMS and s.contributing:
            shown = ", ".join(f"{t}={p:.3f}" for t, p in s.contributing[:10])
            more = len(s.contributing) - 10
            lines.append(f"    terms: {shown}" + (f" (+{more} more)" if more > 0 else ""))
        for e in report.evidence.get(s.capability, []):
            lines.append("")
            lines.append(f"[-] '{e.term}' {e.post_title}")
            if e.snippet:
                flat = " ".join(e.snippet.split())
                for chunk in textwrap.wrap(flat, 88):
                    lines.append(f"[] {chunk}")
    return "\n".join(lines)
