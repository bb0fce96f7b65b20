"""cnforge: knowledge retrieval, prompt assembly, and evaluation for
knowledge-bound counter-narrative generation."""

__version__ = "0.1.0"

from .bm25 import Bm25Index, Bm25Params, ScoredArticle
from .corpus import (
    Article,
    ArticleSet,
    HsCnPair,
    PairSet,
    Sentence,
    article_sentences,
    ingest_articles,
    ingest_pairs,
    segment_sentences,
    tokenize,
)
from .gateway import (
    DecodingParams,
    GenerationRequest,
    GenerationResult,
    HttpBackend,
    StubBackend,
    backend_from_env,
    request_generation,
    stub_generate,
)
from .metrics import (
    EvalItem,
    EvalReport,
    bleu2,
    eval_report,
    kendall_tau_b,
    kn_overlap,
    novelty,
    repetition_rate,
    rouge_l_f1,
)
from .prompts import PromptSequence, TruncationPolicy, assemble_cn, assemble_kp, parse
from .queries import (
    Keyphrase,
    Query,
    QueryConfig,
    compose_query,
    extract_keyphrases,
    filter_trainable_pairs,
    parse_generated_keyphrases,
)
from .selection import Knowledge, score_sentence, select_knowledge

__all__ = [
    "__version__",
    "Article",
    "ArticleSet",
    "Bm25Index",
    "Bm25Params",
    "DecodingParams",
    "EvalItem",
    "EvalReport",
    "GenerationRequest",
    "GenerationResult",
    "HsCnPair",
    "HttpBackend",
    "Keyphrase",
    "Knowledge",
    "PairSet",
    "PromptSequence",
    "Query",
    "QueryConfig",
    "ScoredArticle",
    "Sentence",
    "StubBackend",
    "TruncationPolicy",
    "article_sentences",
    "assemble_cn",
    "assemble_kp",
    "backend_from_env",
    "bleu2",
    "compose_query",
    "eval_report",
    "extract_keyphrases",
    "filter_trainable_pairs",
    "ingest_articles",
    "ingest_pairs",
    "kendall_tau_b",
    "kn_overlap",
    "novelty",
    "parse",
    "parse_generated_keyphrases",
    "repetition_rate",
    "request_generation",
    "rouge_l_f1",
    "score_sentence",
    "segment_sentences",
    "select_knowledge",
    "stub_generate",
    "tokenize",
]
