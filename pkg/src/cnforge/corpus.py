"""Article and HS-CN pair ingestion, the shared tokenizer, rule-based
sentence segmentation, and versioned corpus snapshots.

Every component that counts or compares tokens goes through
:func:`tokenize`, so scores stay comparable across the whole pipeline.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

SNAPSHOT_FORMAT_VERSION = 1

SOURCES = ("wiki", "news", "other")
SPLITS = ("train", "dev", "test")

PAIRS_HEADER = ("pair_id", "hs", "cn", "split", "origin", "target")

# maximal runs of alphanumerics; underscore is not a word character here
TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# terminal punctuation followed by a single space and an uppercase/digit start
_SENT_SPLIT_RE = re.compile(r"[.!?]+(?= [A-Z0-9])")


class CorpusError(ValueError):
    """Corpus-level defect: duplicate ids, empty sets, bad snapshots."""


class DuplicateArticleError(CorpusError):
    def __init__(self, duplicates: Iterable[str]) -> None:
        self.duplicates = sorted(set(duplicates))
        super().__init__("duplicate article ids: " + ", ".join(self.duplicates))


@dataclass(frozen=True)
class RecordError:
    """A malformed input line that was skipped during ingestion."""

    line_no: int
    message: str


@dataclass(frozen=True)
class Article:
    article_id: str
    title: str
    body: str
    source: str = "other"


@dataclass(frozen=True)
class Sentence:
    article_id: str
    sent_index: int
    text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class HsCnPair:
    pair_id: str
    hs: str
    cn: str
    split: str
    origin: str = "original"
    target: str = ""


@dataclass
class ArticleSet:
    """Immutable-after-ingestion collection of articles.

    ``errors`` records malformed input lines that were skipped; duplicate
    article ids abort ingestion instead (see :func:`ingest_articles`).
    """

    articles: list[Article] = field(default_factory=list)
    errors: list[RecordError] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._by_id = {a.article_id: a for a in self.articles}

    def __len__(self) -> int:
        return len(self.articles)

    def __iter__(self) -> Iterator[Article]:
        return iter(self.articles)

    def __contains__(self, article_id: str) -> bool:
        return article_id in self._by_id

    def get(self, article_id: str) -> Article:
        return self._by_id[article_id]

    @property
    def counts(self) -> dict[str, int]:
        return dict(Counter(a.source for a in self.articles))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArticleSet):
            return NotImplemented
        return self.articles == other.articles


@dataclass
class PairSet:
    pairs: list[HsCnPair] = field(default_factory=list)
    errors: list[RecordError] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[HsCnPair]:
        return iter(self.pairs)

    @property
    def counts(self) -> dict[str, int]:
        counts = {split: 0 for split in SPLITS}
        for p in self.pairs:
            counts[p.split] = counts.get(p.split, 0) + 1
        return counts

    def split(self, name: str) -> list[HsCnPair]:
        return [p for p in self.pairs if p.split == name]


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; punctuation dropped, digits kept."""
    return [m.group(0).lower() for m in TOKEN_RE.finditer(text)]


@lru_cache(maxsize=1)
def abbreviations() -> frozenset[str]:
    raw = resources.files("cnforge").joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower()
        for line in raw.splitlines()
        if line.strip() and not line.startswith("#")
    )


def segment_sentences(text: str) -> list[str]:
    """Split text into sentences on terminal punctuation.

    A split happens after a ``. ! ?`` run followed by a space and an
    uppercase letter or digit, unless the word carrying the punctuation is
    on the abbreviation exception list (``data/abbreviations.txt``).
    Output joined with single spaces equals the whitespace-normalized input.
    """
    norm = " ".join(text.split())
    if not norm:
        return []
    abbrevs = abbreviations()
    segments: list[str] = []
    start = 0
    for m in _SENT_SPLIT_RE.finditer(norm):
        end = m.end()
        if end <= start:
            continue
        space = norm.rfind(" ", start, end)
        word_start = space + 1 if space >= start else start
        if norm[word_start:end].lower() in abbrevs:
            continue
        segments.append(norm[start:end])
        start = end + 1  # skip the separating space
    if start < len(norm):
        segments.append(norm[start:])
    return segments


def article_sentences(article: Article) -> list[Sentence]:
    """Segment and tokenize an article body into indexed sentences."""
    return [
        Sentence(
            article_id=article.article_id,
            sent_index=i,
            text=sent,
            tokens=tuple(tokenize(sent)),
        )
        for i, sent in enumerate(segment_sentences(article.body))
    ]


def ingest_articles(lines: Iterable[str]) -> ArticleSet:
    """Ingest a JSONL article stream ({"id","title","body","source"}).

    Malformed records are skipped and reported in ``ArticleSet.errors``
    with their line numbers. Duplicate article ids raise
    :class:`DuplicateArticleError` naming every offender.
    """
    articles: list[Article] = []
    errors: list[RecordError] = []
    seen: set[str] = set()
    duplicates: list[str] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(RecordError(line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            errors.append(RecordError(line_no, "record is not an object"))
            continue
        article_id = record.get("id")
        if not isinstance(article_id, str) or not article_id:
            errors.append(RecordError(line_no, "missing or empty id"))
            continue
        body = record.get("body")
        if not isinstance(body, str) or not body.strip():
            errors.append(RecordError(line_no, f"missing or empty body for id {article_id!r}"))
            continue
        source = record.get("source", "other")
        if source not in SOURCES:
            errors.append(RecordError(line_no, f"unknown source {source!r} for id {article_id!r}"))
            continue
        if article_id in seen:
            duplicates.append(article_id)
            continue
        seen.add(article_id)
        articles.append(
            Article(
                article_id=article_id,
                title=str(record.get("title", "")),
                body=body,
                source=source,
            )
        )
    if duplicates:
        raise DuplicateArticleError(duplicates)
    return ArticleSet(articles=articles, errors=errors)


def ingest_pairs(lines: Iterable[str]) -> PairSet:
    """Ingest a TSV HS-CN pair stream with the canonical header.

    Within each split the input order is preserved. Rows with an unknown
    split label, a wrong field count, or empty hs/cn are skipped and
    reported in ``PairSet.errors``. The origin field is stored as-is.
    """
    pairs: list[HsCnPair] = []
    errors: list[RecordError] = []
    header_seen = False
    for line_no, line in enumerate(lines, start=1):
        row = line.rstrip("\n").rstrip("\r")
        if not row.strip():
            continue
        if not header_seen:
            if tuple(row.split("\t")) != PAIRS_HEADER:
                raise CorpusError(
                    "pair file must start with header: " + "\t".join(PAIRS_HEADER)
                )
            header_seen = True
            continue
        fields = row.split("\t")
        if len(fields) != len(PAIRS_HEADER):
            errors.append(RecordError(line_no, f"expected {len(PAIRS_HEADER)} fields, got {len(fields)}"))
            continue
        pair_id, hs, cn, split, origin, target = fields
        if not pair_id:
            errors.append(RecordError(line_no, "empty pair_id"))
            continue
        if split not in SPLITS:
            errors.append(RecordError(line_no, f"unknown split {split!r} for pair {pair_id!r}"))
            continue
        if not hs.strip() or not cn.strip():
            errors.append(RecordError(line_no, f"empty hs or cn for pair {pair_id!r}"))
            continue
        pairs.append(HsCnPair(pair_id=pair_id, hs=hs, cn=cn, split=split, origin=origin, target=target))
    return PairSet(pairs=pairs, errors=errors)


def _article_record(article: Article) -> str:
    return json.dumps(
        {"id": article.article_id, "title": article.title, "body": article.body, "source": article.source},
        ensure_ascii=False,
        sort_keys=True,
    )


def save_snapshot(article_set: ArticleSet, directory: Path | str) -> Path:
    """Persist articles as JSONL plus a manifest (version, count, checksum)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = "".join(_article_record(a) + "\n" for a in article_set)
    data = payload.encode("utf-8")
    (directory / "articles.jsonl").write_bytes(data)
    manifest = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "article_count": len(article_set),
        "checksum": "sha256:" + hashlib.sha256(data).hexdigest(),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True) + "\n", "utf-8"
    )
    return directory


def load_snapshot(directory: Path | str) -> ArticleSet:
    """Load a snapshot, failing loudly on version or checksum mismatch."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise CorpusError(f"no snapshot manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text("utf-8"))
    version = manifest.get("format_version")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise CorpusError(
            f"snapshot format_version {version!r} not supported (expected {SNAPSHOT_FORMAT_VERSION})"
        )
    data = (directory / "articles.jsonl").read_bytes()
    checksum = "sha256:" + hashlib.sha256(data).hexdigest()
    if checksum != manifest.get("checksum"):
        raise CorpusError("snapshot checksum mismatch; articles.jsonl was modified")
    article_set = ingest_articles(data.decode("utf-8").splitlines())
    if len(article_set) != manifest.get("article_count"):
        raise CorpusError(
            f"snapshot article_count {manifest.get('article_count')} does not match file ({len(article_set)})"
        )
    return article_set
