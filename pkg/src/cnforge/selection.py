"""Sentence distillation: score every sentence of the retrieved articles
against the query and keep the global top k."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Sentence
from .metrics import rouge_l_f1
from .queries import Query

TOP_SENTENCES = 5
MIN_SENTENCE_TOKENS = 3  # segmentation-noise guard; set to 0 to score every fragment


@dataclass(frozen=True)
class ScoredSentence:
    sentence: Sentence
    score: float


@dataclass(frozen=True)
class Knowledge:
    """The distilled sentences, with full provenance for audit."""

    sentences: tuple[ScoredSentence, ...]
    query: Query
    article_pool: tuple[str, ...]

    def sentence_texts(self) -> list[str]:
        return [scored.sentence.text for scored in self.sentences]

    def to_dict(self) -> dict:
        return {
            "sentences": [
                {
                    "article_id": scored.sentence.article_id,
                    "sent_index": scored.sentence.sent_index,
                    "text": scored.sentence.text,
                    "score": scored.score,
                }
                for scored in self.sentences
            ],
            "query": self.query.to_dict(),
            "article_pool": list(self.article_pool),
        }


def score_sentence(sentence: Sentence, query: Query) -> float:
    """LCS-based F1 between sentence tokens and concatenated query tokens."""
    return rouge_l_f1(sentence.tokens, query.terms())


def select_knowledge(
    pools: Sequence[tuple[str, Sequence[Sentence]]],
    query: Query,
    top_sent: int = TOP_SENTENCES,
    min_tokens: int = MIN_SENTENCE_TOKENS,
) -> Knowledge:
    """Keep the globally best ``top_sent`` sentences across the article pool.

    ``pools`` lists (article_id, sentences) in retrieval rank order. Ties
    break by (article rank, sent_index). There is deliberately no
    per-article cap, so one strong article may dominate. An empty pool
    yields zero sentences rather than an error.
    """
    if top_sent < 1:
        raise ValueError("top_sent must be >= 1")
    candidates: list[tuple[float, int, int, Sentence]] = []
    query_terms = query.terms()
    for rank, (_, sentences) in enumerate(pools):
        for sentence in sentences:
            if len(sentence.tokens) < min_tokens:
                continue
            score = rouge_l_f1(sentence.tokens, query_terms)
            candidates.append((score, rank, sentence.sent_index, sentence))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    selected = tuple(
        ScoredSentence(sentence=c[3], score=c[0]) for c in candidates[:top_sent]
    )
    return Knowledge(
        sentences=selected,
        query=query,
        article_pool=tuple(article_id for article_id, _ in pools),
    )
