"""Infer high-level software capabilities of binaries from their printable
strings, using term/capability statistics learned from a Q&A corpus."""

from .kernels import BACKEND
from .corpus import Document, Kind, RawPost, strip_html_to_text
from .index import InvertedIndex, build_index, execute_query, parse_query, tokenize
from .model import (
    CapabilityConfig,
    LearningParams,
    TermCapabilityMatrix,
    conditional_probability,
    learn_capability,
    learn_matrix,
    load_matrix,
    save_matrix,
)
from .extraction import extract_printable_strings, extract_terms, terms_from_strings
from .inference import InferenceParams, noisy_or, scan_binary, score_capability

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CapabilityConfig",
    "Document",
    "InferenceParams",
    "InvertedIndex",
    "Kind",
    "LearningParams",
    "RawPost",
    "TermCapabilityMatrix",
    "build_index",
    "conditional_probability",
    "execute_query",
    "extract_printable_strings",
    "extract_terms",
    "learn_capability",
    "learn_matrix",
    "load_matrix",
    "noisy_or",
    "parse_query",
    "save_matrix",
    "scan_binary",
    "score_capability",
    "strip_html_to_text",
    "terms_from_strings",
    "tokenize",
]
