"""Term-capability conditional probability matrix.

Each capability is a named boolean query over the document index. Every
term seen in the matching documents gets a smoothed score
``(matched + alpha) / (total + alpha + beta)``, where ``matched`` counts
matching documents containing the term and ``total`` counts documents
containing it anywhere in the index.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from decimal import Context, Decimal
from typing import Iterable, Iterator

from .index import (
    CountingMode,
    InvertedIndex,
    QueryParseError,
    document_field_terms,
    execute_query,
    parse_query,
)

log = logging.getLogger(__name__)

MATRIX_FORMAT = "capinfer-matrix 1"
DEFAULT_ALPHA = 10.0
DEFAULT_BETA = 90.0

__all__ = [
    "CapabilityConfig",
    "ConfigError",
    "LearningParams",
    "MatrixFormatError",
    "Provenance",
    "TermCapabilityEntry",
    "TermCapabilityMatrix",
    "conditional_probability",
    "learn_capability",
    "learn_matrix",
    "load_capability_config",
    "load_matrix",
    "parse_capability_config",
    "save_matrix",
]


class ConfigError(ValueError):
    pass


class MatrixFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LearningParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    counting: CountingMode = CountingMode.DOCUMENT

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class CapabilityConfig:
    name: str
    query_text: str
    alpha: float | None = None
    beta: float | None = None

    def params(self, default: LearningParams) -> LearningParams:
        return LearningParams(
            alpha=default.alpha if self.alpha is None else self.alpha,
            beta=default.beta if self.beta is None else self.beta,
            counting=default.counting,
        )


@dataclass(frozen=True)
class TermCapabilityEntry:
    term: str
    capability: str
    probability: float


@dataclass(frozen=True)
class Provenance:
    query: str
    matched_docs: int
    alpha: float
    beta: float


_NAME_RE = re.compile(r"^[^\t\r\n#][^\t\r\n]*$")
_TERM_RE = re.compile(r"^[0-9a-z]+$")


def parse_capability_config(data: object) -> list[CapabilityConfig]:
    if not isinstance(data, list):
        raise ConfigError("capability config must be a JSON array")
    configs: list[CapabilityConfig] = []
    names: set[str] = set()
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "name" not in item or "query" not in item:
            raise ConfigError(f"entry {i}: expected an object with 'name' and 'query'")
        name, query = item["name"], item["query"]
        if not isinstance(name, str) or not _NAME_RE.match(name):
            raise ConfigError(f"entry {i}: invalid capability name {name!r}")
        if name in names:
            raise ConfigError(f"duplicate capability: {name}")
        names.add(name)
        if not isinstance(query, str):
            raise ConfigError(f"capability {name}: query must be a string")
        try:
            parse_query(query)
        except QueryParseError as exc:
            raise ConfigError(
                f"capability {name}: query parse error at position {exc.position}: {exc.message}"
            ) from None
        overrides = {}
        for key in ("alpha", "beta"):
            if key in item:
                v = item[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                    raise ConfigError(f"capability {name}: {key} must be a positive number")
                overrides[key] = float(v)
        configs.append(CapabilityConfig(name, query, **overrides))
    return configs


def load_capability_config(path: str | os.PathLike) -> list[CapabilityConfig]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_capability_config(data)


def conditional_probability(t_jc: int, t_jt: int, params: LearningParams = LearningParams()) -> float:
    """Smoothed P(capability | term) from matched and total counts."""
    if t_jc < 0 or t_jt < 0:
        raise ValueError("counts must be non-negative")
    if t_jc > t_jt:
        raise ValueError(f"matched count {t_jc} exceeds total count {t_jt}")
    return (t_jc + params.alpha) / (t_jt + params.alpha + params.beta)


def _exact_decimal(t_jc: int, t_jt: int, alpha: float, beta: float) -> str:
    # 12 significant digits of the exact rational, not of the rounded float.
    ctx = Context(prec=12)
    num = Decimal(t_jc) + Decimal(alpha)
    den = Decimal(t_jt) + Decimal(alpha) + Decimal(beta)
    q = ctx.divide(num, den).normalize(ctx)
    return format(q, "f")


@dataclass
class _Learned:
    entries: list[TermCapabilityEntry]
    counts: dict[str, tuple[int, int]]
    provenance: Provenance


def _learn(index: InvertedIndex, config: CapabilityConfig, params: LearningParams) -> _Learned:
    params = config.params(params)
    matched = execute_query(index, parse_query(config.query_text))
    if not matched:
        log.warning("capability %s: query %r matched no documents", config.name, config.query_text)
    token_mode = params.counting is CountingMode.TOKEN
    counts: Counter[str] = Counter()
    for doc_id in matched:
        fields = document_field_terms(index.documents[doc_id])
        if token_mode:
            for terms in fields.values():
                counts.update(terms)
        else:
            counts.update(set().union(*fields.values()))
    entries = []
    pair_counts = {}
    for term in sorted(counts):
        t_jc = counts[term]
        t_jt = index.frequency(term, params.counting)
        pair_counts[term] = (t_jc, t_jt)
        entries.append(
            TermCapabilityEntry(term, config.name, conditional_probability(t_jc, t_jt, params))
        )
    return _Learned(
        entries, pair_counts, Provenance(config.query_text, len(matched), params.alpha, params.beta)
    )


def learn_capability(
    index: InvertedIndex, config: CapabilityConfig, params: LearningParams = LearningParams()
) -> list[TermCapabilityEntry]:
    """One entry per unique term in the documents matching ``config``'s query.

    Runs in time linear in the tokens of the matching documents. A query
    matching nothing yields ``[]`` and a logged warning.
    """
    return _learn(index, config, params).entries


@dataclass
class TermCapabilityMatrix:
    """Entries keyed by capability then term, with per-capability provenance."""

    table: dict[str, dict[str, float]] = field(default_factory=dict)
    provenance: dict[str, Provenance] = field(default_factory=dict)
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    # exact decimal text per (capability, term), filled by learning
    _exact: dict[tuple[str, str], str] = field(default_factory=dict, repr=False)

    @property
    def capabilities(self) -> list[str]:
        return list(self.provenance)

    def lookup(self, capability: str, term: str) -> float | None:
        return self.table.get(capability, {}).get(term)

    def terms_for(self, capability: str) -> dict[str, float]:
        return self.table.get(capability, {})

    def entries(self) -> Iterator[TermCapabilityEntry]:
        for cap, terms in self.table.items():
            for term, p in terms.items():
                yield TermCapabilityEntry(term, cap, p)

    def __len__(self) -> int:
        return sum(len(t) for t in self.table.values())

    def add(self, entry: TermCapabilityEntry, exact: str | None = None) -> None:
        if not 0.0 < entry.probability < 1.0:
            raise ValueError(f"probability outside (0, 1): {entry}")
        if entry.capability not in self.provenance:
            raise ValueError(f"no provenance for capability {entry.capability!r}")
        terms = self.table.setdefault(entry.capability, {})
        if entry.term in terms:
            raise ValueError(f"duplicate entry ({entry.capability}, {entry.term})")
        terms[entry.term] = entry.probability
        if exact is not None:
            self._exact[(entry.capability, entry.term)] = exact

    def exact_text(self, capability: str, term: str) -> str:
        text = self._exact.get((capability, term))
        if text is None:
            text = format(self.table[capability][term], ".12g")
        return text


def learn_matrix(
    index: InvertedIndex,
    configs: Iterable[CapabilityConfig],
    params: LearningParams = LearningParams(),
    timings: dict[str, float] | None = None,
) -> TermCapabilityMatrix:
    matrix = TermCapabilityMatrix(alpha=params.alpha, beta=params.beta)
    for config in configs:
        t0 = time.perf_counter()
        learned = _learn(index, config, params)
        prov = learned.provenance
        matrix.provenance[config.name] = prov
        matrix.table.setdefault(config.name, {})
        for entry in learned.entries:
            t_jc, t_jt = learned.counts[entry.term]
            matrix.add(entry, _exact_decimal(t_jc, t_jt, prov.alpha, prov.beta))
        if timings is not None:
            timings[config.name] = time.perf_counter() - t0
    return matrix


# --------------------------------------------------------------------------
# TSV
#
#   # capinfer-matrix 1
#   # alpha: 10
#   # beta: 90
#   # capability: {"name": ..., "query": ..., "matched_docs": ..., "alpha": ..., "beta": ...}
#   term<TAB>capability<TAB>probability


def _num(x: float) -> str:
    return format(x, ".17g")


def save_matrix(matrix: TermCapabilityMatrix, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {MATRIX_FORMAT}\n")
        fh.write(f"# alpha: {_num(matrix.alpha)}\n")
        fh.write(f"# beta: {_num(matrix.beta)}\n")
        for cap, prov in matrix.provenance.items():
            header = {
                "name": cap,
                "query": prov.query,
                "matched_docs": prov.matched_docs,
                "alpha": prov.alpha,
                "beta": prov.beta,
            }
            fh.write(f"# capability: {json.dumps(header, ensure_ascii=False)}\n")
        for cap, terms in matrix.table.items():
            for term in sorted(terms):
                fh.write(f"{term}\t{cap}\t{matrix.exact_text(cap, term)}\n")


def load_matrix(path: str | os.PathLike) -> TermCapabilityMatrix:
    matrix = TermCapabilityMatrix()
    saw_format = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, _, value = body.partition(":")
                try:
                    if body == MATRIX_FORMAT:
                        saw_format = True
                    elif key == "alpha":
                        matrix.alpha = float(value)
                    elif key == "beta":
                        matrix.beta = float(value)
                    elif key == "capability":
                        h = json.loads(value)
                        matrix.provenance[h["name"]] = Provenance(
                            h["query"], int(h["matched_docs"]), float(h["alpha"]), float(h["beta"])
                        )
                        matrix.table.setdefault(h["name"], {})
                except (ValueError, KeyError, TypeError) as exc:
                    raise MatrixFormatError(f"line {lineno}: bad header: {exc}") from None
                continue
            if not saw_format:
                raise MatrixFormatError(f"line {lineno}: missing '# {MATRIX_FORMAT}' header")
            parts = line.split("\t")
            if len(parts) != 3:
                raise MatrixFormatError(f"line {lineno}: expected 3 tab-separated fields")
            term, cap, ptext = parts
            if not _TERM_RE.match(term):
                raise MatrixFormatError(f"line {lineno}: invalid term {term!r}")
            try:
                p = float(ptext)
            except ValueError:
                raise MatrixFormatError(f"line {lineno}: invalid probability {ptext!r}") from None
            if not 0.0 < p < 1.0:
                raise MatrixFormatError(f"line {lineno}: probability {ptext} outside (0, 1)")
            if cap not in matrix.provenance:
                matrix.provenance[cap] = Provenance("", 0, matrix.alpha, matrix.beta)
            try:
                matrix.add(TermCapabilityEntry(term, cap, p), ptext)
            except ValueError as exc:
                raise MatrixFormatError(f"line {lineno}: {exc}") from None
    if not saw_format:
        raise MatrixFormatError(f"{path}: missing '# {MATRIX_FORMAT}' header")
    return matrix
