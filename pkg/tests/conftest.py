"""Shared fixtures: a small curated corpus, HS-CN pair files, and seeded
synthetic corpora for oracle comparisons."""

from __future__ import annotations

import json
import random

import pytest

from cnforge.bm25 import Bm25Index
from cnforge.corpus import ArticleSet, ingest_articles, ingest_pairs

FIXTURE_ARTICLES = [
    {
        "id": "islam-disease",
        "title": "Public debate about Islam and disease",
        "source": "wiki",
        "body": (
            "Do Muslims want to heal from the disease of extremism? "
            "Being infected by religious extremism is like being infected by a disease. "
            "Islam is followed by many people and disease metaphors distort that reality."
        ),
    },
    {
        "id": "islam-tolerance",
        "title": "Islam and tolerance",
        "source": "wiki",
        "body": (
            "Islam is a religion that preaches tolerance like Christianity. "
            "Islam disease claims miss that religion islam preaches tolerance and disease does not discriminate on religious grounds. "
            "Scholars describe centuries of religious coexistence."
        ),
    },
    {
        "id": "islamic-law",
        "title": "Islamic law",
        "source": "wiki",
        "body": (
            "Islamic law is to create an environment of submission to God. "
            "Certain areas of the Muslim world have always been home to large populations of Christians. "
            "Legal traditions vary widely between regions."
        ),
    },
    {
        "id": "muslim-community",
        "title": "Muslim communities in Britain",
        "source": "news",
        "body": (
            "A Muslim woman rushed to help the victims of a stabbing in Manchester. "
            "Community groups organised food banks across the city. "
            "Volunteers included people of every faith."
        ),
    },
    {
        "id": "football-final",
        "title": "Cup final report",
        "source": "news",
        "body": (
            "The final ended with a late goal in extra time. "
            "Supporters filled the stadium hours before kickoff. "
            "The coach praised the young defenders."
        ),
    },
    {
        "id": "rainfall-patterns",
        "title": "Rainfall patterns",
        "source": "wiki",
        "body": (
            "Annual rainfall varies strongly with elevation. "
            "Monsoon systems drive most precipitation in the region. "
            "Droughts follow multi-year ocean cycles."
        ),
    },
    {
        "id": "bread-baking",
        "title": "Bread baking",
        "source": "other",
        "body": (
            "Sourdough needs time, flour, water, and patience. "
            "A hot oven gives the crust its color. "
            "Bakers fold the dough to build strength."
        ),
    },
    {
        "id": "stock-markets",
        "title": "Stock markets",
        "source": "news",
        "body": (
            "Shares fell after the surprise rate decision. "
            "Analysts expected a smaller move this quarter. "
            "Bond yields rose across maturities."
        ),
    },
    {
        "id": "coral-reefs",
        "title": "Coral reefs",
        "source": "wiki",
        "body": (
            "Reefs host a quarter of all marine species. "
            "Warming events cause widespread bleaching. "
            "Restoration projects replant nursery-grown corals."
        ),
    },
    {
        "id": "steam-engines",
        "title": "Steam engines",
        "source": "wiki",
        "body": (
            "Early engines pumped water out of mines. "
            "Later designs powered mills and locomotives. "
            "Efficiency gains came from separate condensers."
        ),
    },
]

PAIRS_HEADER_LINE = "pair_id\ths\tcn\tsplit\torigin\ttarget"

# counts: train=3, dev=1, test=1
SMALL_PAIRS_ROWS = [
    "p1\tIslam is a disease.\tLike Christianity or any other religion, islam preaches tolerance and respect for people.\ttrain\toriginal\tislam",
    "p2\tMuslims are invading our country.\tMigration statistics show nothing like an invasion, and communities benefit from newcomers.\ttrain\ttranslated\tislam",
    "p3\tThey never respect our laws.\tMost people respect the law regardless of faith, as police statistics repeatedly demonstrate.\ttrain\toriginal\tislam",
    "p4\tThe world would be better without them.\tA world without any group is an old and dangerous fantasy that history warns us about.\tdev\tparaphrase\tislam",
    "p5\tAll of them are criminals.\tCrime rates do not track religion, and collective blame is both wrong and lazy.\ttest\tparaphrase\tislam",
]

# filter fixture: short cns (under 10 tokens) must be dropped
FILTER_PAIRS_ROWS = [
    "f1\tIslam is a disease.\tNo they are not - prove this?\ttrain\toriginal\tislam",
    "f2\tIslam is a disease.\tLike Christianity or any other religion, islam preaches tolerance. Disease does not discriminate on religious grounds.\ttrain\toriginal\tislam",
    "f3\tThey hate our way of life.\tThey are people who deserve respect dignity fairness and peace.\ttrain\toriginal\tislam",
    "f4\tThey hate our way of life.\tThat claim is false and deeply unfair to everyone.\tdev\tparaphrase\tislam",
    "f5\tMuslims are invading our country.\tWhat does that even mean?\tdev\tparaphrase\tislam",
    "f6\tMuslims are invading our country.\tOfficial population figures show a small minority, nothing remotely close to an invasion of any kind.\ttest\tparaphrase\tislam",
    "f7\tAll of them are criminals.\tAny evidence?\ttest\toriginal\tislam",
    "f8\tAll of them are criminals.\tCrime rates do not track religion and collective blame is wrong, lazy, and corrosive.\ttest\toriginal\tislam",
]

# compare-configs fixture: each cn's keyphrases occur verbatim in exactly
# one article (islam-tolerance carries the combined hs+cn wording)
COMPARE_PAIRS_ROWS = [
    "cc1\tIslam is a disease.\tLike Christianity or any other, religion islam preaches tolerance and disease does not discriminate.\ttrain\toriginal\tislam",
]


def articles_jsonl_lines(articles=None) -> list[str]:
    return [json.dumps(a, ensure_ascii=False) for a in (articles or FIXTURE_ARTICLES)]


def pairs_tsv_text(rows) -> str:
    return "\n".join([PAIRS_HEADER_LINE, *rows]) + "\n"


@pytest.fixture
def article_set() -> ArticleSet:
    return ingest_articles(articles_jsonl_lines())


@pytest.fixture
def fixture_index(article_set) -> Bm25Index:
    return Bm25Index.build(article_set)


@pytest.fixture
def small_pairs():
    return ingest_pairs(pairs_tsv_text(SMALL_PAIRS_ROWS).splitlines())


@pytest.fixture
def filter_pairs():
    return ingest_pairs(pairs_tsv_text(FILTER_PAIRS_ROWS).splitlines())


def synthetic_articles(
    n_docs: int,
    seed: int,
    vocab_size: int = 40,
    sentences_per_doc: tuple[int, int] = (3, 6),
    tokens_per_sentence: tuple[int, int] = (4, 9),
) -> list[dict]:
    """Seeded random corpora for oracle comparisons.

    Sentences start with a capitalized token and end with a period, so the
    segmenter recovers them exactly. A few duplicate documents force score
    ties.
    """
    rng = random.Random(seed)
    vocab = [f"w{i}" for i in range(vocab_size)]
    docs = []
    for d in range(n_docs):
        sentences = []
        for _ in range(rng.randint(*sentences_per_doc)):
            toks = [rng.choice(vocab) for _ in range(rng.randint(*tokens_per_sentence))]
            sentences.append(toks[0].capitalize() + " " + " ".join(toks[1:]) + ".")
        docs.append({"id": f"d{d:03d}", "title": "", "body": " ".join(sentences), "source": "other"})
    if n_docs >= 6:
        # exact duplicates of one body, to exercise tie-breaking by id
        docs[2]["body"] = docs[1]["body"]
        docs[5]["body"] = docs[1]["body"]
    return docs


def synthetic_article_set(n_docs: int, seed: int, **kwargs) -> ArticleSet:
    return ingest_articles(articles_jsonl_lines(synthetic_articles(n_docs, seed, **kwargs)))
