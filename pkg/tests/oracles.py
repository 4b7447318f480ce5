"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except the Query node classes,
which only carry data.
"""

import random
import string
from fractions import Fraction

from capinfer.index import And, AnyFieldTerm, FieldTerm, Not, Or

ALNUM = set(string.ascii_letters + string.digits)


def scalar_tokenize(text):
    out, cur = [], []
    for ch in text:
        if ch in ALNUM:
            cur.append(ch.lower())
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def scalar_printable_runs(data, min_len=5):
    runs, start = [], None
    for i, b in enumerate(data):
        if 0x20 <= b <= 0x7E:
            if start is None:
                start = i
        else:
            if start is not None and i - start >= min_len:
                runs.append((start, bytes(data[start:i])))
            start = None
    if start is not None and len(data) - start >= min_len:
        runs.append((start, bytes(data[start:])))
    return runs


def doc_fields(doc):
    return {
        "title": set(scalar_tokenize(doc.title)),
        "tags": set(scalar_tokenize(" ".join(doc.tags))),
        "body": set(scalar_tokenize(doc.body)),
    }


def doc_matches(fields, q):
    if isinstance(q, FieldTerm):
        return q.term in fields[q.field]
    if isinstance(q, AnyFieldTerm):
        return any(q.term in f for f in fields.values())
    if isinstance(q, And):
        return doc_matches(fields, q.left) and doc_matches(fields, q.right)
    if isinstance(q, Or):
        return doc_matches(fields, q.left) or doc_matches(fields, q.right)
    if isinstance(q, Not):
        return not doc_matches(fields, q.child)
    raise TypeError(q)


def linear_scan(docs, q):
    return sorted(d.doc_id for d in docs if doc_matches(doc_fields(d), q))


def brute_learn(docs, q, alpha=10, beta=90):
    """term -> exact Fraction probability, by full corpus scan."""
    all_fields = {d.doc_id: doc_fields(d) for d in docs}
    vocab = {d: set().union(*f.values()) for d, f in all_fields.items()}
    matched = [d for d, f in all_fields.items() if doc_matches(f, q)]
    out = {}
    for term in set().union(*(vocab[d] for d in matched)) if matched else ():
        t_jc = sum(1 for d in matched if term in vocab[d])
        t_jt = sum(1 for d in vocab if term in vocab[d])
        out[term] = Fraction(t_jc + alpha, t_jt + alpha + beta)
    return out


FIELD_NAMES = ("title", "tags", "body")


def random_query(rng: random.Random, vocab, depth=3):
    """Random query in which every NOT has a positive AND sibling."""
    if depth == 0 or rng.random() < 0.35:
        term = rng.choice(vocab)
        if rng.random() < 0.5:
            return AnyFieldTerm(term)
        return FieldTerm(rng.choice(FIELD_NAMES), term)
    r = rng.random()
    if r < 0.4:
        return And(random_query(rng, vocab, depth - 1), random_query(rng, vocab, depth - 1))
    if r < 0.8:
        return Or(random_query(rng, vocab, depth - 1), random_query(rng, vocab, depth - 1))
    return And(random_query(rng, vocab, depth - 1), Not(random_query(rng, vocab, depth - 1)))


def random_vocab(rng, size):
    words = set()
    while len(words) < size:
        words.add("".join(rng.choice(string.ascii_lowercase + string.digits) for _ in range(rng.randint(1, 7))))
    return sorted(words)


def random_corpus(rng, n_docs, vocab):
    from capinfer.corpus import Document, Kind

    docs = []
    for i in range(1, n_docs + 1):
        def words(k):
            return [rng.choice(vocab) for _ in range(k)]

        title = " ".join(w.upper() if rng.random() < 0.2 else w for w in words(rng.randint(0, 5)))
        tags = tuple(sorted(set(words(rng.randint(0, 3)))))
        body = "-".join(words(rng.randint(0, 30)))
        docs.append(Document(i, i, Kind.QUESTION, title, tags, body))
    rng.shuffle(docs)
    return docs
