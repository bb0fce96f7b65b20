"""BM25 inverted index over an article set, with versioned binary persistence.

Scoring uses the non-negative log-shifted idf variant:

    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
    score(q, d) = sum_t idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

Title tokens are indexed together with body tokens as a single field.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import ArticleSet, tokenize
from .queries import Query

INDEX_FORMAT_VERSION = 1


class IndexBuildError(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


class UnknownArticleError(KeyError):
    pass


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be non-negative")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class ScoredArticle:
    article_id: str
    score: float


class Bm25Index:
    """Immutable after build; score/search are safe for concurrent readers."""

    def __init__(
        self,
        postings: dict[str, dict[str, int]],
        doc_lengths: dict[str, int],
        params: Bm25Params,
    ) -> None:
        self._postings = postings
        self.doc_lengths = doc_lengths
        self.params = params
        self.n_docs = len(doc_lengths)
        if self.n_docs == 0:
            raise IndexBuildError("index must contain at least one document")
        self.avg_doc_len = sum(doc_lengths.values()) / self.n_docs

    @classmethod
    def build(cls, articles: ArticleSet, params: Bm25Params = Bm25Params()) -> "Bm25Index":
        if len(articles) == 0:
            raise IndexBuildError("cannot build an index from an empty article set")
        postings: dict[str, dict[str, int]] = {}
        doc_lengths: dict[str, int] = {}
        for article in articles:
            tokens = tokenize(article.title) + tokenize(article.body)
            doc_lengths[article.article_id] = len(tokens)
            for tok in tokens:
                bucket = postings.setdefault(tok, {})
                bucket[article.article_id] = bucket.get(article.article_id, 0) + 1
        return cls(postings=postings, doc_lengths=doc_lengths, params=params)

    def idf(self, term: str) -> float:
        df = len(self._postings.get(term, {}))
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def term_frequency(self, term: str, article_id: str) -> int:
        return self._postings.get(term, {}).get(article_id, 0)

    def postings(self, term: str) -> dict[str, int]:
        return dict(self._postings.get(term, {}))

    def vocabulary(self) -> list[str]:
        return sorted(self._postings)

    def _tf_factor(self, tf: int, doc_len: int) -> float:
        k1, b = self.params.k1, self.params.b
        return tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc_len / self.avg_doc_len))

    def score(self, query_terms: Sequence[str], article_id: str) -> float:
        """BM25 score of one document; terms absent from it contribute 0."""
        if article_id not in self.doc_lengths:
            raise UnknownArticleError(article_id)
        doc_len = self.doc_lengths[article_id]
        total = 0.0
        for term in query_terms:
            tf = self._postings.get(term, {}).get(article_id, 0)
            if tf == 0:
                continue
            total += self.idf(term) * self._tf_factor(tf, doc_len)
        return total

    def search(self, query: Query, k: int = 25) -> list[ScoredArticle]:
        """Top-k matching articles, score descending, ties by ascending id.

        Accumulation visits query terms in order, so a returned score is
        bit-identical to :meth:`score` on the same terms.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        acc: dict[str, float] = {}
        for term in query.terms():
            bucket = self._postings.get(term)
            if not bucket:
                continue
            idf = self.idf(term)
            for article_id, tf in bucket.items():
                contribution = idf * self._tf_factor(tf, self.doc_lengths[article_id])
                acc[article_id] = acc.get(article_id, 0.0) + contribution
        ranked = sorted(
            (item for item in acc.items() if item[1] > 0.0),
            key=lambda item: (-item[1], item[0]),
        )
        return [ScoredArticle(article_id=a, score=s) for a, s in ranked[:k]]

    # -- persistence --------------------------------------------------

    def save(self, directory: Path | str) -> Path:
        """Write manifest + doc-table + postings files, deterministically."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        doc_ids = sorted(self.doc_lengths)
        ordinal = {article_id: i for i, article_id in enumerate(doc_ids)}

        docs = bytearray()
        docs += struct.pack("<I", len(doc_ids))
        for article_id in doc_ids:
            raw = article_id.encode("utf-8")
            docs += struct.pack("<I", len(raw)) + raw
            docs += struct.pack("<I", self.doc_lengths[article_id])
        (directory / "docs.bin").write_bytes(bytes(docs))

        post = bytearray()
        post += struct.pack("<I", len(self._postings))
        for term in sorted(self._postings):
            raw = term.encode("utf-8")
            bucket = self._postings[term]
            post += struct.pack("<I", len(raw)) + raw
            post += struct.pack("<I", len(bucket))
            for article_id in sorted(bucket):
                post += struct.pack("<II", ordinal[article_id], bucket[article_id])
        (directory / "postings.bin").write_bytes(bytes(post))

        manifest = {
            "format_version": INDEX_FORMAT_VERSION,
            "n_docs": self.n_docs,
            "avg_doc_len": self.avg_doc_len,
            "k1": self.params.k1,
            "b": self.params.b,
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True) + "\n", "utf-8"
        )
        return directory

    @classmethod
    def load(cls, directory: Path | str) -> "Bm25Index":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        if not manifest_path.exists():
            raise IndexFormatError(f"no index manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text("utf-8"))
        version = manifest.get("format_version")
        if version != INDEX_FORMAT_VERSION:
            raise IndexFormatError(
                f"index format_version {version!r} not supported (expected {INDEX_FORMAT_VERSION})"
            )

        data = (directory / "docs.bin").read_bytes()
        offset = 0
        (n_docs,) = struct.unpack_from("<I", data, offset)
        offset += 4
        doc_ids: list[str] = []
        doc_lengths: dict[str, int] = {}
        for _ in range(n_docs):
            (id_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            article_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            (doc_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            doc_ids.append(article_id)
            doc_lengths[article_id] = doc_len

        data = (directory / "postings.bin").read_bytes()
        offset = 0
        (n_terms,) = struct.unpack_from("<I", data, offset)
        offset += 4
        postings: dict[str, dict[str, int]] = {}
        for _ in range(n_terms):
            (term_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            term = data[offset : offset + term_len].decode("utf-8")
            offset += term_len
            (df,) = struct.unpack_from("<I", data, offset)
            offset += 4
            bucket: dict[str, int] = {}
            for _ in range(df):
                doc_ord, tf = struct.unpack_from("<II", data, offset)
                offset += 8
                bucket[doc_ids[doc_ord]] = tf
            postings[term] = bucket

        index = cls(
            postings=postings,
            doc_lengths=doc_lengths,
            params=Bm25Params(k1=float(manifest["k1"]), b=float(manifest["b"])),
        )
        if index.n_docs != manifest.get("n_docs"):
            raise IndexFormatError("doc table does not match manifest n_docs")
        return index
