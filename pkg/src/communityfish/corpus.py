"""Corpus ingestion, tokenization, and bigram co-occurrence counting."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_DIGITS_RE = re.compile(r"^\d+$")


class CorpusError(ValueError):
    """Raised for malformed or degenerate corpus input."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    metadata: Mapping[str, str] = field(default_factory=dict)
    tokens: tuple[str, ...] = ()
    # lengths of token segments when a sentence splitter is configured;
    # bigrams never cross segment boundaries
    segment_lengths: tuple[int, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")
        for t in self.tokens:
            if not t or any(c.isspace() for c in t):
                raise CorpusError(f"bad token {t!r} in document {self.id}")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]

    def __post_init__(self):
        seen = set()
        for d in self.documents:
            if d.id in seen:
                raise CorpusError(f"duplicate document id {d.id!r}")
            seen.add(d.id)

    @property
    def vocabulary(self) -> Counter:
        vocab = Counter()
        for d in self.documents:
            vocab.update(d.tokens)
        return vocab

    def __len__(self):
        return len(self.documents)

    def map_documents(self, fn) -> "Corpus":
        return Corpus(tuple(fn(d) for d in self.documents))


@dataclass(frozen=True)
class TokenizerConfig:
    stopwords: frozenset[str] = frozenset()
    # optional regex; when set, text is split into sentences first and
    # bigram counting will not cross sentence boundaries
    sentence_split: str | None = None


@dataclass(frozen=True)
class BigramCounts:
    """Unordered word-pair co-occurrence counts; self-pairs are excluded."""

    pairs: Mapping[frozenset, int]
    threshold: int = 1

    def __len__(self):
        return len(self.pairs)


def load_corpus(source, format: str) -> Corpus:
    """Load a corpus from a JSONL file, a directory of .txt files, or a CSV.

    JSONL: one object per line, required key ``text``, optional ``id``
    (defaults to the 1-based line number); every other string-valued key
    becomes metadata. CSV: header row with a mandatory ``text`` column and
    optional ``id``. Text directory: every ``*.txt`` file is one document
    whose id is the filename without extension.
    """
    path = Path(source)
    if not path.exists():
        raise CorpusError(f"input not found: {path}")
    if format == "jsonl":
        docs = _load_jsonl(path)
    elif format == "text-directory":
        docs = _load_textdir(path)
    elif format == "csv":
        docs = _load_csv(path)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    if not docs:
        raise CorpusError("empty corpus")
    return Corpus(tuple(docs))


def _load_jsonl(path: Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(rec, dict) or "text" not in rec:
                raise CorpusError(f"{path}:{lineno}: record missing 'text' key")
            doc_id = str(rec.get("id", lineno))
            meta = {
                k: v
                for k, v in rec.items()
                if k not in ("id", "text") and isinstance(v, str)
            }
            docs.append(Document(id=doc_id, text=str(rec["text"]), metadata=meta))
    return docs


def _load_textdir(path: Path) -> list[Document]:
    if not path.is_dir():
        raise CorpusError(f"not a directory: {path}")
    docs = []
    for fp in sorted(path.glob("*.txt")):
        docs.append(Document(id=fp.stem, text=fp.read_text(encoding="utf-8")))
    return docs


def _load_csv(path: Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "text" not in reader.fieldnames:
            raise CorpusError(f"{path}: CSV must have a header with a 'text' column")
        for lineno, row in enumerate(reader, start=2):
            if row["text"] is None:
                raise CorpusError(f"{path}:{lineno}: missing text field")
            doc_id = row.get("id") or str(lineno - 1)
            meta = {
                k: v
                for k, v in row.items()
                if k not in ("id", "text") and v is not None
            }
            docs.append(Document(id=doc_id, text=row["text"], metadata=meta))
    return docs


def tokenize(doc: Document, rules: TokenizerConfig = TokenizerConfig()) -> Document:
    """Lowercase, Unicode-aware word tokenization.

    Punctuation and purely numeric tokens are dropped; stopwords from the
    config are removed after that. The raw text is retained on the document.
    """
    if rules.sentence_split:
        pieces = re.split(rules.sentence_split, doc.text)
    else:
        pieces = [doc.text]
    segments = []
    for piece in pieces:
        seg = [
            t
            for t in (m.group(0).lower() for m in _WORD_RE.finditer(piece))
            if not _DIGITS_RE.match(t) and t not in rules.stopwords
        ]
        if seg:
            segments.append(seg)
    tokens = tuple(t for seg in segments for t in seg)
    seg_lengths = tuple(len(s) for s in segments) if rules.sentence_split else None
    return replace(doc, tokens=tokens, segment_lengths=seg_lengths)


def apply_lemmas(doc: Document, lemma_table: Mapping[str, str]) -> Document:
    """Replace each token by its lemma when the table has one."""
    return replace(doc, tokens=tuple(lemma_table.get(t, t) for t in doc.tokens))


def count_bigrams(corpus: Corpus) -> BigramCounts:
    """Count unordered adjacent token pairs across all documents.

    Pairs of identical tokens are excluded; pairs never span document (or,
    when a sentence splitter was used, sentence) boundaries.
    """
    pairs: Counter = Counter()
    for doc in corpus.documents:
        for seg in _segments(doc):
            for u, w in zip(seg, seg[1:]):
                if u != w:
                    pairs[frozenset((u, w))] += 1
    return BigramCounts(pairs=dict(pairs), threshold=1)


def _segments(doc: Document) -> Iterable[tuple[str, ...]]:
    if doc.segment_lengths is None:
        yield doc.tokens
        return
    pos = 0
    for n in doc.segment_lengths:
        yield doc.tokens[pos : pos + n]
        pos += n


def filter_bigrams(
    counts: BigramCounts, threshold: int, strict_greater: bool = False
) -> BigramCounts:
    """Keep pairs with count >= threshold (or > threshold if strict_greater)."""
    if threshold < 1:
        raise CorpusError("bigram threshold must be >= 1")
    if strict_greater:
        kept = {p: c for p, c in counts.pairs.items() if c > threshold}
    else:
        kept = {p: c for p, c in counts.pairs.items() if c >= threshold}
    return BigramCounts(pairs=kept, threshold=threshold)


def read_stopwords(path) -> frozenset[str]:
    """One token per line, UTF-8."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(t.strip() for t in lines if t.strip())


def read_lemma_table(path) -> dict[str, str]:
    """Two-column TSV, surface form then lemma."""
    table = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(f"{path}:{lineno}: expected 2 tab-separated columns")
        table[parts[0].strip()] = parts[1].strip()
    return table
