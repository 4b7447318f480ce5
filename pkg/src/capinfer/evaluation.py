"""Accuracy metrics, threshold sweeps and a planted-capability benchmark."""

from __future__ import annotations

import enum
import json
import os
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .corpus import Document, Kind, document_to_json
from .model import CapabilityConfig

__all__ = [
    "ConfusionCounts",
    "EvaluationError",
    "Label",
    "LabeledSample",
    "MetricsRow",
    "SweepPoint",
    "SynthBundle",
    "SynthSpec",
    "SynthSpecError",
    "UndefinedMetricError",
    "confusion",
    "evaluate",
    "f_score",
    "fpr",
    "generate_synthetic_benchmark",
    "load_labels",
    "metrics_row",
    "normalized_precision",
    "recall",
    "sweep_thresholds",
    "threshold_sweep",
    "tpr",
    "write_bundle",
    "write_metrics_tsv",
    "write_sweep_tsv",
]


class EvaluationError(ValueError):
    pass


class UndefinedMetricError(EvaluationError):
    pass


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class LabeledSample:
    sample_id: str
    capability: str
    label: Label


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0


@dataclass(frozen=True)
class MetricsRow:
    capability: str
    counts: ConfusionCounts
    tpr: float | None
    fpr: float | None
    recall: float | None
    normalized_precision: float | None
    f_score: float | None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    mean_normalized_precision: float | None
    mean_recall: float | None
    recall_by_capability: dict[str, float] = field(default_factory=dict)
    precision_by_capability: dict[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()


# --------------------------------------------------------------------------
# Labels


def load_labels(lines: Iterable[str]) -> list[LabeledSample]:
    out = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            sample = LabeledSample(str(obj["sample_id"]), str(obj["capability"]), Label(obj["label"]))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise EvaluationError(f"labels line {lineno}: {exc}") from None
        key = (sample.sample_id, sample.capability)
        if key in seen:
            raise EvaluationError(f"labels line {lineno}: duplicate label for {key}")
        seen.add(key)
        out.append(sample)
    return out


def label_to_json(s: LabeledSample) -> str:
    return json.dumps({"sample_id": s.sample_id, "capability": s.capability, "label": s.label.value})


# --------------------------------------------------------------------------
# Metrics


def confusion(
    predictions: Mapping[str, bool], labels: Iterable[LabeledSample], capability: str
) -> ConfusionCounts:
    tp = fp = tn = fn = 0
    missing = []
    for s in labels:
        if s.capability != capability:
            continue
        if s.sample_id not in predictions:
            missing.append(s.sample_id)
            continue
        hit = predictions[s.sample_id]
        if s.label is Label.POSITIVE:
            if hit:
                tp += 1
            else:
                fn += 1
        elif hit:
            fp += 1
        else:
            tn += 1
    if missing:
        raise EvaluationError(f"no prediction for labeled samples: {', '.join(sorted(missing))}")
    return ConfusionCounts(tp, fp, tn, fn)


def tpr(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetricError("true positive rate undefined: no positive samples")
    return c.tp / (c.tp + c.fn)


recall = tpr


def fpr(c: ConfusionCounts) -> float:
    if c.fp + c.tn == 0:
        raise UndefinedMetricError("false positive rate undefined: no negative samples")
    return c.fp / (c.fp + c.tn)


def normalized_precision(tpr: float, fpr: float, true_percentage: float = 0.5) -> float:
    """Precision recomputed for an assumed positive share ``true_percentage``."""
    if not 0.0 < true_percentage < 1.0:
        raise ValueError("true_percentage must be in (0, 1)")
    if tpr == 0 and fpr == 0:
        raise UndefinedMetricError("normalized precision undefined: no detections")
    a = true_percentage * tpr
    return a / (a + (1.0 - true_percentage) * fpr)


def f_score(precision: float, recall: float) -> float:
    if precision == 0 and recall == 0:
        raise UndefinedMetricError("f-score undefined: precision and recall are both 0")
    return 2 * precision * recall / (precision + recall)


def metrics_row(capability: str, counts: ConfusionCounts, true_percentage: float = 0.5) -> MetricsRow:
    notes = []

    def attempt(fn, *args):
        try:
            return fn(*args)
        except UndefinedMetricError as exc:
            notes.append(str(exc))
            return None

    r = attempt(tpr, counts)
    fp_rate = attempt(fpr, counts)
    prec = attempt(normalized_precision, r, fp_rate, true_percentage) if None not in (r, fp_rate) else None
    f = attempt(f_score, prec, r) if None not in (prec, r) else None
    return MetricsRow(capability, counts, r, fp_rate, r, prec, f, tuple(notes))


def _predictions(
    scores: Mapping[tuple[str, str], float], labels: Sequence[LabeledSample], capability: str, threshold: float
) -> dict[str, bool]:
    return {
        s.sample_id: scores[(s.sample_id, capability)] > threshold
        for s in labels
        if s.capability == capability and (s.sample_id, capability) in scores
    }


def _capabilities(labels: Sequence[LabeledSample]) -> list[str]:
    return sorted({s.capability for s in labels})


def evaluate(
    scores: Mapping[tuple[str, str], float],
    labels: Sequence[LabeledSample],
    threshold: float = 0.37,
    true_percentage: float = 0.5,
) -> list[MetricsRow]:
    """Per-capability metrics at one threshold (detected means ``p > threshold``)."""
    return [
        metrics_row(cap, confusion(_predictions(scores, labels, cap, threshold), labels, cap), true_percentage)
        for cap in _capabilities(labels)
    ]


def sweep_thresholds(steps: int) -> list[float]:
    """``steps`` evenly spaced thresholds starting at 0: ``i / steps``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return [i / steps for i in range(steps)]


def threshold_sweep(
    scores: Mapping[tuple[str, str], float],
    labels: Sequence[LabeledSample],
    thresholds: Sequence[float],
    true_percentage: float = 0.5,
) -> list[SweepPoint]:
    if not thresholds:
        raise EvaluationError("empty thresholds list")
    for a, b in zip(thresholds, thresholds[1:]):
        if not a < b:
            raise EvaluationError("thresholds must be strictly increasing")
    if thresholds[0] < 0 or thresholds[-1] > 1:
        raise EvaluationError("thresholds must lie in [0, 1]")
    caps = _capabilities(labels)
    for cap in caps:
        missing = [s.sample_id for s in labels if s.capability == cap and (s.sample_id, cap) not in scores]
        if missing:
            raise EvaluationError(f"no score for labeled samples: {', '.join(sorted(missing))}")
    points = []
    for theta in thresholds:
        recalls: dict[str, float] = {}
        precs: dict[str, float] = {}
        notes = []
        for cap in caps:
            row = metrics_row(cap, confusion(_predictions(scores, labels, cap, theta), labels, cap), true_percentage)
            if row.recall is not None:
                recalls[cap] = row.recall
            if row.normalized_precision is not None:
                precs[cap] = row.normalized_precision
            notes.extend(f"{cap}: {n}" for n in row.notes)
        points.append(
            SweepPoint(
                theta,
                sum(precs.values()) / len(precs) if precs else None,
                sum(recalls.values()) / len(recalls) if recalls else None,
                recalls,
                precs,
                tuple(notes),
            )
        )
    return points


def _fmt(x: float | None) -> str:
    return "undefined" if x is None else format(x, ".6f")


def write_metrics_tsv(rows: Sequence[MetricsRow], fh: IO[str]) -> None:
    fh.write("capability\ttp\tfp\ttn\tfn\ttpr\tfpr\trecall\tnormalized_precision\tf_score\n")
    for r in rows:
        c = r.counts
        fh.write(
            f"{r.capability}\t{c.tp}\t{c.fp}\t{c.tn}\t{c.fn}\t{_fmt(r.tpr)}\t{_fmt(r.fpr)}\t"
            f"{_fmt(r.recall)}\t{_fmt(r.normalized_precision)}\t{_fmt(r.f_score)}\n"
        )
    defined = [r.f_score for r in rows if r.f_score is not None]
    if defined:
        fh.write(f"# mean f_score over {len(defined)} capabilities: {sum(defined) / len(defined):.6f}\n")


def write_sweep_tsv(points: Sequence[SweepPoint], fh: IO[str]) -> None:
    fh.write("threshold\tmean_normalized_precision\tmean_recall\tprecision_capabilities\n")
    for p in points:
        fh.write(
            f"{p.threshold:.6f}\t{_fmt(p.mean_normalized_precision)}\t{_fmt(p.mean_recall)}\t"
            f"{len(p.precision_by_capability)}\n"
        )


# --------------------------------------------------------------------------
# Synthetic benchmark


class SynthSpecError(ValueError):
    pass


MAX_VOCAB = 200_000
_NONPRINTABLE = bytes([b for b in range(256) if not 0x20 <= b <= 0x7E])
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class SynthSpec:
    n_capabilities: int = 3
    docs_per_capability: int = 50
    signature_terms_per_capability: int = 5
    noise_docs: int = 200
    noise_vocab_size: int = 2000
    binaries_per_class: int = 30
    seed: int = 0
    # realism knobs
    signature_inclusion: float = 0.8
    noise_terms_per_capability_doc: int = 2
    noise_terms_per_noise_doc: int = 30
    noise_strings_per_binary: int = 10
    signature_leak_docs: int = 0

    def __post_init__(self):
        for name in (
            "n_capabilities",
            "docs_per_capability",
            "signature_terms_per_capability",
            "noise_docs",
            "noise_vocab_size",
            "binaries_per_class",
        ):
            if getattr(self, name) < 1:
                raise SynthSpecError(f"{name} must be positive")
        if not 0.0 < self.signature_inclusion <= 1.0:
            raise SynthSpecError("signature_inclusion must be in (0, 1]")

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise SynthSpecError(f"unknown SynthSpec fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class SynthBundle:
    spec: SynthSpec
    documents: list[Document]
    binaries: dict[str, bytes]
    labels: list[LabeledSample]
    configs: list[CapabilityConfig]
    signatures: dict[str, list[str]]


def _vocabulary(rng: random.Random, size: int) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        w = "".join(rng.choice(_LETTERS) for _ in range(rng.randint(5, 9)))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _styled(rng: random.Random, word: str) -> str:
    style = rng.randrange(4)
    if style == 0:
        return word.upper()
    if style == 1:
        return word.capitalize()
    if style == 2:
        return word + "()"
    return word


def _binary(rng: random.Random, strings: list[str]) -> bytes:
    out = bytearray()

    def filler(lo: int, hi: int) -> None:
        out.extend(rng.choice(_NONPRINTABLE) for _ in range(rng.randint(lo, hi)))

    filler(16, 64)
    for s in strings:
        out.extend(s.encode("ascii"))
        filler(1, 48)
        if rng.random() < 0.5:
            # short printable junk below the length floor
            out.extend(rng.choice(_LETTERS).encode() * rng.randint(1, 4))
            filler(1, 8)
    return bytes(out)


def generate_synthetic_benchmark(spec: SynthSpec) -> SynthBundle:
    """Deterministic (per ``spec.seed``) corpus, binaries, labels and config.

    Each capability owns a disjoint set of signature terms that appear only
    in its tagged documents. Positive binaries embed at least two of those
    terms (one if the capability has a single signature term) among noise
    strings; negative binaries embed noise strings only.
    """
    n_sig = spec.n_capabilities * spec.signature_terms_per_capability
    if n_sig + spec.noise_vocab_size > MAX_VOCAB:
        raise SynthSpecError(
            f"spec needs {n_sig + spec.noise_vocab_size} distinct terms; the generator allows {MAX_VOCAB}"
        )
    rng = random.Random(spec.seed)
    vocab = _vocabulary(rng, n_sig + spec.noise_vocab_size)
    noise = vocab[n_sig:]
    caps = [f"cap{i}" for i in range(spec.n_capabilities)]
    signatures = {
        cap: vocab[i * spec.signature_terms_per_capability : (i + 1) * spec.signature_terms_per_capability]
        for i, cap in enumerate(caps)
    }

    docs: list[Document] = []
    next_id = 1

    def add_doc(title_words, tags, body_words):
        nonlocal next_id
        rng.shuffle(body_words)
        body = " ".join(_styled(rng, w) for w in body_words)
        docs.append(Document(next_id, next_id, Kind.QUESTION, " ".join(title_words), tuple(tags), body))
        next_id += 1

    for cap in caps:
        sig = signatures[cap]
        for _ in range(spec.docs_per_capability):
            included = [w for w in sig if rng.random() < spec.signature_inclusion] or [rng.choice(sig)]
            title = [rng.choice(sig), rng.choice(noise)]
            body = included + rng.sample(noise, min(spec.noise_terms_per_capability_doc, len(noise)))
            add_doc(title, [cap], body)
        for _ in range(spec.signature_leak_docs):
            add_doc([rng.choice(noise)], ["misc"], [rng.choice(sig)] + rng.sample(noise, 5))
    for _ in range(spec.noise_docs):
        title = rng.sample(noise, min(3, len(noise)))
        body = rng.sample(noise, min(spec.noise_terms_per_noise_doc, len(noise)))
        add_doc(title, ["misc"], body)

    binaries: dict[str, bytes] = {}
    labels: list[LabeledSample] = []
    n_noise = min(spec.noise_strings_per_binary, len(noise))
    for cap in caps:
        sig = signatures[cap]
        k_min = min(2, len(sig))
        for i in range(spec.binaries_per_class):
            chosen = rng.sample(sig, rng.randint(k_min, len(sig)))
            strings = [_styled(rng, w) for w in chosen + rng.sample(noise, n_noise)]
            rng.shuffle(strings)
            name = f"{cap}_pos_{i:03d}.bin"
            binaries[name] = _binary(rng, strings)
            labels.append(LabeledSample(name, cap, Label.POSITIVE))
        for i in range(spec.binaries_per_class):
            strings = [_styled(rng, w) for w in rng.sample(noise, n_noise)]
            name = f"{cap}_neg_{i:03d}.bin"
            binaries[name] = _binary(rng, strings)
            labels.append(LabeledSample(name, cap, Label.NEGATIVE))

    configs = [CapabilityConfig(cap, f"tags:{cap}") for cap in caps]
    return SynthBundle(spec, docs, binaries, labels, configs, signatures)


def write_bundle(bundle: SynthBundle, out_dir: str | os.PathLike) -> Path:
    """Layout: corpus.jsonl, capabilities.json, labels.jsonl, synth_spec.json, binaries/."""
    out = Path(out_dir)
    (out / "binaries").mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for d in bundle.documents:
            fh.write(document_to_json(d) + "\n")
    with open(out / "capabilities.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump([{"name": c.name, "query": c.query_text} for c in bundle.configs], fh, indent=2)
        fh.write("\n")
    with open(out / "labels.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for s in bundle.labels:
            fh.write(label_to_json(s) + "\n")
    with open(out / "synth_spec.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(asdict(bundle.spec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, data in bundle.binaries.items():
        (out / "binaries" / name).write_bytes(data)
    return out
