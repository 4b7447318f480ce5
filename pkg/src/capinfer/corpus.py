"""Q&A corpus ingestion: StackExchange ``Posts.xml`` and normalized JSONL."""

from __future__ import annotations

import enum
import html
import json
import logging
import re
import xml.parsers.expat
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

__all__ = [
    "CorpusError",
    "Document",
    "DuplicateDocumentError",
    "IngestStats",
    "Kind",
    "LineError",
    "RawPost",
    "XMLParseError",
    "assemble_documents",
    "collect_question_meta",
    "document_to_json",
    "ingest_jsonl",
    "parse_stackexchange_posts",
    "split_tags",
    "strip_html_to_text",
    "write_jsonl",
]


class CorpusError(Exception):
    pass


class XMLParseError(CorpusError):
    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class LineError(CorpusError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class DuplicateDocumentError(CorpusError):
    pass


class Kind(str, enum.Enum):
    QUESTION = "question"
    ANSWER = "answer"


@dataclass(frozen=True)
class RawPost:
    post_type: Kind
    id: int
    parent_id: int | None = None
    raw_title: str | None = None
    raw_tags: str | None = None
    raw_body: str = ""


@dataclass(frozen=True)
class Document:
    doc_id: int
    thread_id: int
    kind: Kind
    title: str
    tags: tuple[str, ...]
    body: str


@dataclass
class IngestStats:
    """Counters shared by the parsing and assembly stages."""

    rows: int = 0
    skipped_post_type: int = 0
    bad_rows: int = 0
    questions: int = 0
    answers: int = 0
    orphans: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)
        log.warning(msg)


# --------------------------------------------------------------------------
# Posts.xml


_POST_TYPES = {"1": Kind.QUESTION, "2": Kind.ANSWER}


def _row_to_post(attrs: dict[str, str]) -> RawPost:
    kind = _POST_TYPES[attrs["PostTypeId"]]
    if "Id" not in attrs:
        raise KeyError("Id")
    post_id = int(attrs["Id"])
    parent = attrs.get("ParentId")
    if kind is Kind.ANSWER:
        if parent is None:
            raise KeyError("ParentId")
        parent_id = int(parent)
    else:
        if "Title" not in attrs:
            raise KeyError("Title")
        parent_id = None
    return RawPost(
        post_type=kind,
        id=post_id,
        parent_id=parent_id,
        raw_title=attrs.get("Title"),
        raw_tags=attrs.get("Tags"),
        raw_body=attrs.get("Body", ""),
    )


def parse_stackexchange_posts(
    stream: IO[bytes], stats: IngestStats | None = None, chunk_size: int = 1 << 16
) -> Iterator[RawPost]:
    """Yield question and answer rows from a ``Posts.xml`` byte stream.

    The stream is fed to expat in chunks, so memory stays bounded by the
    chunk size plus the rows of one chunk. Rows of other post types are
    skipped; rows missing a required attribute are skipped and counted.
    """
    stats = stats if stats is not None else IngestStats()
    parser = xml.parsers.expat.ParserCreate()
    pending: list[RawPost] = []

    def start(name: str, attrs: dict[str, str]) -> None:
        if name != "row":
            return
        stats.rows += 1
        if attrs.get("PostTypeId") not in _POST_TYPES:
            stats.skipped_post_type += 1
            return
        try:
            pending.append(_row_to_post(attrs))
        except (KeyError, ValueError) as exc:
            stats.bad_rows += 1
            stats.warn(
                f"row at byte {parser.CurrentByteIndex}: bad or missing attribute {exc}"
            )

    parser.StartElementHandler = start
    while True:
        chunk = stream.read(chunk_size)
        try:
            parser.Parse(chunk, not chunk)
        except xml.parsers.expat.ExpatError as exc:
            raise XMLParseError(
                xml.parsers.expat.ErrorString(exc.code), parser.ErrorByteIndex
            ) from None
        if pending:
            yield from pending
            pending.clear()
        if not chunk:
            break


# --------------------------------------------------------------------------
# HTML stripping


_BLOCK_TAGS = frozenset(
    """address article aside blockquote br dd div dl dt figcaption figure footer
    form h1 h2 h3 h4 h5 h6 header hr li main nav ol p pre section table tbody td
    tfoot th thead tr ul""".split()
)
_TAG_NAME_RE = re.compile(r"</?\s*([A-Za-z][A-Za-z0-9]*)")
_MAX_TAG_LEN = 1024


def _tag_end(text: str, i: int) -> int:
    """Index just past the tag starting at ``text[i] == '<'``, or -1."""
    if text.startswith("<!--", i):
        end = text.find("-->", i + 4, i + _MAX_TAG_LEN)
        return -1 if end < 0 else end + 3
    nxt = text[i + 1 : i + 2]
    if not nxt or not (nxt.isascii() and nxt.isalpha() or nxt in "/!?"):
        return -1
    end = text.find(">", i + 1, i + _MAX_TAG_LEN)
    return -1 if end < 0 else end + 1


def _remove_tags(markup: str) -> tuple[str, bool]:
    out: list[str] = []
    pos = 0
    n = len(markup)
    need_break = False
    found = False

    def emit_text(segment: str) -> None:
        nonlocal need_break
        if not segment:
            return
        if need_break:
            if segment.isspace():
                return
            if out and not out[-1].endswith("\n") and not segment.startswith("\n"):
                out.append("\n")
            need_break = False
        out.append(segment)

    while pos < n:
        lt = markup.find("<", pos)
        while lt >= 0 and _tag_end(markup, lt) < 0:
            lt = markup.find("<", lt + 1)
        if lt < 0:
            emit_text(markup[pos:])
            break
        found = True
        emit_text(markup[pos:lt])
        end = _tag_end(markup, lt)
        m = _TAG_NAME_RE.match(markup, lt)
        if m and m.group(1).lower() in _BLOCK_TAGS:
            need_break = True
        pos = end
    return "".join(out), found


def strip_html_to_text(markup: str) -> str:
    """Reduce HTML to its literal text.

    Tags are dropped, block-level boundaries collapse to one newline, and
    entities are decoded last so that ``&lt;b&gt;`` survives as text. Text
    inside ``<code>``/``<pre>`` keeps its whitespace untouched.
    """
    text, found = _remove_tags(markup)
    # removing a tag can join a stray "<" with later text into a new tag
    while found:
        text, found = _remove_tags(text)
    return html.unescape(text).strip()


# --------------------------------------------------------------------------
# Assembly


def split_tags(raw: str | None) -> tuple[str, ...]:
    """``"<c++><winapi>"`` -> ``("c++", "winapi")``.

    A bare space- or pipe-separated list is accepted too (newer dumps use
    ``|a|b|``).
    """
    if not raw:
        return ()
    parts = re.split(r"[<>|\s]+", html.unescape(raw))
    return tuple(p.lower() for p in parts if p)


def collect_question_meta(raw_posts: Iterable[RawPost]) -> dict[int, tuple[str, tuple[str, ...]]]:
    """First pass of two-pass assembly: question id -> (title, tags)."""
    return {
        p.id: (html.unescape(p.raw_title or ""), split_tags(p.raw_tags))
        for p in raw_posts
        if p.post_type is Kind.QUESTION
    }


def assemble_documents(
    raw_posts: Iterable[RawPost],
    stats: IngestStats | None = None,
    question_meta: dict[int, tuple[str, tuple[str, ...]]] | None = None,
) -> Iterator[Document]:
    """Turn raw posts into Documents; answers inherit their question's title/tags.

    Single pass by default, so an answer seen before its question is an
    orphan. Passing ``question_meta`` from :func:`collect_question_meta`
    resolves out-of-order answers.
    """
    stats = stats if stats is not None else IngestStats()
    meta = dict(question_meta) if question_meta else {}
    for post in raw_posts:
        body = strip_html_to_text(post.raw_body or "")
        if post.post_type is Kind.QUESTION:
            title = html.unescape(post.raw_title or "")
            tags = split_tags(post.raw_tags)
            meta[post.id] = (title, tags)
            stats.questions += 1
            yield Document(post.id, post.id, Kind.QUESTION, title, tags, body)
        else:
            parent = post.parent_id
            if parent in meta:
                title, tags = meta[parent]
            else:
                stats.orphans += 1
                stats.warn(f"answer {post.id}: parent question {parent} not seen")
                title, tags = "", ()
            stats.answers += 1
            yield Document(post.id, parent, Kind.ANSWER, title, tags, body)


# --------------------------------------------------------------------------
# JSONL


_FIELD_ORDER = ("doc_id", "kind", "thread_id", "title", "tags", "body")
_BAD_TAG_RE = re.compile(r"[\s<>]")


def _validate_record(obj: object) -> Document:
    if not isinstance(obj, dict):
        raise ValueError("expected a JSON object")
    for key in _FIELD_ORDER:
        if key not in obj:
            raise ValueError(f"missing field: {key}")
    doc_id, thread_id = obj["doc_id"], obj["thread_id"]
    if not isinstance(doc_id, int) or isinstance(doc_id, bool):
        raise ValueError("doc_id must be an integer")
    if not isinstance(thread_id, int) or isinstance(thread_id, bool):
        raise ValueError("thread_id must be an integer")
    try:
        kind = Kind(obj["kind"])
    except ValueError:
        raise ValueError(f"bad kind: {obj['kind']!r}") from None
    if kind is Kind.QUESTION and thread_id != doc_id:
        raise ValueError("question thread_id must equal doc_id")
    if not isinstance(obj["title"], str) or not isinstance(obj["body"], str):
        raise ValueError("title and body must be strings")
    tags = obj["tags"]
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("tags must be a list of strings")
    for t in tags:
        if not t or t != t.lower() or _BAD_TAG_RE.search(t):
            raise ValueError(f"invalid tag: {t!r}")
    return Document(doc_id, thread_id, kind, obj["title"], tuple(tags), obj["body"])


def ingest_jsonl(lines: Iterable[str | bytes], stats: IngestStats | None = None) -> Iterator[Document]:
    """Parse normalized-corpus JSONL, one Document per non-blank line.

    Raises :class:`LineError` on a bad line and
    :class:`DuplicateDocumentError` when a doc_id repeats.
    """
    stats = stats if stats is not None else IngestStats()
    seen: dict[int, int] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            doc = _validate_record(json.loads(line))
        except json.JSONDecodeError as exc:
            raise LineError(lineno, f"invalid JSON: {exc.msg}") from None
        except ValueError as exc:
            raise LineError(lineno, str(exc)) from None
        if doc.doc_id in seen:
            raise DuplicateDocumentError(
                f"duplicate doc_id {doc.doc_id} on lines {seen[doc.doc_id]} and {lineno}"
            )
        seen[doc.doc_id] = lineno
        if doc.kind is Kind.QUESTION:
            stats.questions += 1
        else:
            stats.answers += 1
        yield doc


def document_to_json(doc: Document) -> str:
    return json.dumps(
        {
            "doc_id": doc.doc_id,
            "thread_id": doc.thread_id,
            "kind": doc.kind.value,
            "title": doc.title,
            "tags": list(doc.tags),
            "body": doc.body,
        },
        ensure_ascii=False,
    )


def write_jsonl(docs: Iterable[Document], fh: IO[str]) -> int:
    n = 0
    for doc in docs:
        fh.write(document_to_json(doc))
        fh.write("\n")
        n += 1
    return n
