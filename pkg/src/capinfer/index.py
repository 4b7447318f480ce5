"""Field-aware inverted index and boolean field queries.

Query grammar::

    expr   := clause (("AND" | "OR") clause)*      # AND binds tighter
    clause := ["NOT"] atom
    atom   := [field ":"] token | "(" expr ")"

Adjacent clauses without an operator are ANDed. Operators are uppercase
only; ``and`` is an ordinary term. Fields are ``title``, ``tags`` and
``body``; a bare token matches any field.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Union

from . import kernels
from .corpus import Document, Kind, document_to_json, ingest_jsonl

FIELDS = ("title", "tags", "body")
INDEX_FORMAT = "capinfer-index"
INDEX_VERSION = 1

__all__ = [
    "FIELDS",
    "And",
    "AnyFieldTerm",
    "CountingMode",
    "FieldTerm",
    "IndexError_",
    "InvertedIndex",
    "Not",
    "Or",
    "Query",
    "QueryEvaluationError",
    "QueryParseError",
    "build_index",
    "corpus_stats",
    "document_field_terms",
    "execute_query",
    "format_query",
    "load_index",
    "parse_query",
    "save_index",
    "tokenize",
]


def tokenize(text: str) -> list[str]:
    """Maximal ASCII alphanumeric runs, lowercased, in order."""
    return kernels.tokenize(text)


class CountingMode(str, enum.Enum):
    DOCUMENT = "document"
    TOKEN = "token"


class IndexError_(Exception):
    """Index build or storage failure (duplicate ids, bad on-disk format)."""


# --------------------------------------------------------------------------
# Query AST


@dataclass(frozen=True)
class FieldTerm:
    field: str
    term: str


@dataclass(frozen=True)
class AnyFieldTerm:
    term: str


@dataclass(frozen=True)
class And:
    left: "Query"
    right: "Query"


@dataclass(frozen=True)
class Or:
    left: "Query"
    right: "Query"


@dataclass(frozen=True)
class Not:
    child: "Query"


Query = Union[FieldTerm, AnyFieldTerm, And, Or, Not]


def format_query(q: Query) -> str:
    """Render a Query back to grammar text (fully parenthesized)."""
    if isinstance(q, FieldTerm):
        return f"{q.field}:{q.term}"
    if isinstance(q, AnyFieldTerm):
        return q.term
    if isinstance(q, And):
        return f"({format_query(q.left)} AND {format_query(q.right)})"
    if isinstance(q, Or):
        return f"({format_query(q.left)} OR {format_query(q.right)})"
    if isinstance(q, Not):
        return f"NOT {format_query(q.child)}"
    raise TypeError(q)


class QueryParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"position {position}: {message}")
        self.position = position
        self.message = message


class QueryEvaluationError(ValueError):
    pass


_OPERATORS = {"AND", "OR", "NOT"}


def _lex(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            toks.append((c, c, i))
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            word = text[i:j]
            toks.append((word if word in _OPERATORS else "WORD", word, i))
            i = j
    return toks


def _and_all(nodes: list[Query]) -> Query:
    q = nodes[0]
    for nxt in nodes[1:]:
        q = And(q, nxt)
    return q


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def pos(self) -> int:
        tok = self.peek()
        return tok[2] if tok else len(self.text)

    def parse(self) -> Query:
        if not self.toks:
            raise QueryParseError("empty query", 0)
        q = self.expr()
        tok = self.peek()
        if tok is not None:
            if tok[0] == ")":
                raise QueryParseError("unbalanced ')'", tok[2])
            raise QueryParseError(f"unexpected {tok[1]!r}", tok[2])
        return q

    def expr(self) -> Query:
        q = self.and_expr()
        while (tok := self.peek()) is not None and tok[0] == "OR":
            self.i += 1
            q = Or(q, self.and_expr())
        return q

    def and_expr(self) -> Query:
        q = self.clause()
        while (tok := self.peek()) is not None and tok[0] not in ("OR", ")"):
            if tok[0] == "AND":
                self.i += 1
            q = And(q, self.clause())
        return q

    def clause(self) -> Query:
        tok = self.peek()
        if tok is not None and tok[0] == "NOT":
            self.i += 1
            return Not(self.atom())
        return self.atom()

    def atom(self) -> Query:
        tok = self.peek()
        if tok is None:
            raise QueryParseError("expected a term", len(self.text))
        kind, word, pos = tok
        if kind == "(":
            self.i += 1
            q = self.expr()
            close = self.peek()
            if close is None or close[0] != ")":
                raise QueryParseError("expected ')'", self.pos())
            self.i += 1
            return q
        if kind != "WORD":
            raise QueryParseError(f"unexpected {word!r}", pos)
        self.i += 1
        field = None
        value, vpos = word, pos
        head, sep, rest = word.partition(":")
        if sep and head.isalpha():
            if head.lower() not in FIELDS:
                raise QueryParseError(f"unknown field {head!r}", pos)
            field = head.lower()
            value, vpos = rest, pos + len(head) + 1
            if not value:
                raise QueryParseError("expected a term after field", vpos)
        terms = tokenize(value)
        if not terms:
            raise QueryParseError(f"no searchable term in {value!r}", vpos)
        if field is None:
            return _and_all([AnyFieldTerm(t) for t in terms])
        return _and_all([FieldTerm(field, t) for t in terms])


def parse_query(text: str) -> Query:
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# Index


def document_field_terms(doc: Document) -> dict[str, list[str]]:
    """Token lists per field; tags are tokenized like any other text."""
    return {
        "title": tokenize(doc.title),
        "tags": tokenize(" ".join(doc.tags)),
        "body": tokenize(doc.body),
    }


class InvertedIndex:
    """Immutable term -> sorted doc_id postings per field, plus corpus counts.

    Instances come from :func:`build_index` or :func:`load_index`.
    """

    def __init__(
        self,
        documents: dict[int, Document],
        postings: dict[str, dict[str, list[int]]],
        doc_freq: dict[str, int],
        token_freq: dict[str, int],
    ):
        self.documents = documents
        self.postings = postings
        self.doc_freq = doc_freq
        self.token_freq = token_freq

    @property
    def doc_count(self) -> int:
        return len(self.documents)

    def posting(self, field: str, term: str) -> list[int]:
        return self.postings[field].get(term, [])

    def any_field(self, term: str) -> set[int]:
        out: set[int] = set()
        for f in FIELDS:
            out.update(self.postings[f].get(term, ()))
        return out

    def frequency(self, term: str, mode: CountingMode = CountingMode.DOCUMENT) -> int:
        table = self.doc_freq if mode is CountingMode.DOCUMENT else self.token_freq
        return table.get(term, 0)

    def __repr__(self) -> str:
        return f"InvertedIndex(doc_count={self.doc_count}, terms={len(self.doc_freq)})"


def build_index(docs: Iterable[Document]) -> InvertedIndex:
    documents: dict[int, Document] = {}
    postings: dict[str, dict[str, list[int]]] = {f: {} for f in FIELDS}
    doc_freq: dict[str, int] = {}
    token_freq: dict[str, int] = {}
    unsorted = False
    for doc in docs:
        if doc.doc_id in documents:
            raise IndexError_(f"duplicate doc_id {doc.doc_id}")
        documents[doc.doc_id] = doc
        seen: set[str] = set()
        for field, terms in document_field_terms(doc).items():
            table = postings[field]
            for t in terms:
                token_freq[t] = token_freq.get(t, 0) + 1
            for t in set(terms):
                plist = table.get(t)
                if plist is None:
                    table[t] = [doc.doc_id]
                else:
                    if plist[-1] > doc.doc_id:
                        unsorted = True
                    plist.append(doc.doc_id)
            seen.update(terms)
        for t in seen:
            doc_freq[t] = doc_freq.get(t, 0) + 1
    if unsorted:
        for table in postings.values():
            for plist in table.values():
                plist.sort()
    return InvertedIndex(documents, postings, doc_freq, token_freq)


def corpus_stats(
    index: InvertedIndex, mode: CountingMode = CountingMode.DOCUMENT
) -> tuple[int, dict[str, int]]:
    table = index.doc_freq if mode is CountingMode.DOCUMENT else index.token_freq
    return index.doc_count, dict(table)


def _eval(index: InvertedIndex, q: Query) -> set[int]:
    if isinstance(q, FieldTerm):
        return set(index.posting(q.field, q.term))
    if isinstance(q, AnyFieldTerm):
        return index.any_field(q.term)
    if isinstance(q, Or):
        return _eval(index, q.left) | _eval(index, q.right)
    if isinstance(q, And):
        positives: list[Query] = []
        negatives: list[Query] = []
        stack = [q]
        while stack:
            node = stack.pop()
            if isinstance(node, And):
                stack.extend((node.right, node.left))
            elif isinstance(node, Not):
                negatives.append(node.child)
            else:
                positives.append(node)
        if not positives:
            raise QueryEvaluationError("AND of only negated clauses is unbounded")
        result = _eval(index, positives[0])
        for node in positives[1:]:
            if not result:
                return result
            result &= _eval(index, node)
        for node in negatives:
            if not result:
                break
            result -= _eval(index, node)
        return result
    if isinstance(q, Not):
        raise QueryEvaluationError("NOT must be combined with a positive clause via AND")
    raise TypeError(f"not a query node: {q!r}")


def execute_query(index: InvertedIndex, q: Query | str) -> list[int]:
    """Sorted doc_ids matching ``q``. Unknown terms simply match nothing."""
    if isinstance(q, str):
        q = parse_query(q)
    return sorted(_eval(index, q))


# --------------------------------------------------------------------------
# Storage
#
# <dir>/documents.jsonl   one normalized Document per line
# <dir>/postings.jsonl    {"field", "term", "docs": [...]} per line
# <dir>/terms.tsv         term, document frequency, token frequency
# <dir>/FORMAT            "capinfer-index <version>"; written last


def save_index(index: InvertedIndex, directory: str | os.PathLike) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    marker = path / "FORMAT"
    if marker.exists():
        marker.unlink()
    with open(path / "documents.jsonl", "w", encoding="utf-8") as fh:
        for doc_id in sorted(index.documents):
            fh.write(document_to_json(index.documents[doc_id]) + "\n")
    with open(path / "postings.jsonl", "w", encoding="utf-8") as fh:
        for field in FIELDS:
            table = index.postings[field]
            for term in sorted(table):
                fh.write(json.dumps({"field": field, "term": term, "docs": table[term]}) + "\n")
    with open(path / "terms.tsv", "w", encoding="utf-8") as fh:
        for term in sorted(index.doc_freq):
            fh.write(f"{term}\t{index.doc_freq[term]}\t{index.token_freq[term]}\n")
    marker.write_text(f"{INDEX_FORMAT} {INDEX_VERSION}\n")
    return path


def load_index(directory: str | os.PathLike) -> InvertedIndex:
    path = Path(directory)
    marker = path / "FORMAT"
    if not marker.exists():
        raise IndexError_(f"{path}: not an index directory (missing FORMAT marker)")
    name, _, version = marker.read_text().strip().partition(" ")
    if name != INDEX_FORMAT or version != str(INDEX_VERSION):
        raise IndexError_(f"{path}: unsupported index format {marker.read_text().strip()!r}")
    with open(path / "documents.jsonl", encoding="utf-8") as fh:
        documents = {d.doc_id: d for d in ingest_jsonl(fh)}
    postings: dict[str, dict[str, list[int]]] = {f: {} for f in FIELDS}
    with open(path / "postings.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            postings[rec["field"]][rec["term"]] = rec["docs"]
    doc_freq: dict[str, int] = {}
    token_freq: dict[str, int] = {}
    with open(path / "terms.tsv", encoding="utf-8") as fh:
        for line in fh:
            term, df, tf = line.rstrip("\n").split("\t")
            doc_freq[term] = int(df)
            token_freq[term] = int(tf)
    return InvertedIndex(documents, postings, doc_freq, token_freq)


def iter_documents(index: InvertedIndex, doc_ids: Iterable[int]) -> Iterator[Document]:
    docs = index.documents
    for i in doc_ids:
        yield docs[i]


def kind_counts(index: InvertedIndex) -> dict[str, int]:
    counts = {k.value: 0 for k in Kind}
    for doc in index.documents.values():
        counts[doc.kind.value] += 1
    return counts
