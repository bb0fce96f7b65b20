"""Keyphrase extraction, query composition for the retrieval configs, and
the minimum-length training filter for HS-CN pairs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources

from .corpus import HsCnPair, PairSet, tokenize

MIN_CN_TOKENS = 10  # pairs whose cn has fewer tokens are not trainable
DEFAULT_MAX_KEYPHRASES = 5
MAX_PHRASE_LEN = 3


class QueryConfig(str, Enum):
    """Which keyphrase sources feed retrieval."""

    Q_HS = "q_hs"
    Q_GEN = "q_gen"
    Q_HS_GEN = "q_hs_gen"
    Q_HS_CN = "q_hs_cn"
    Q_CN = "q_cn"


# optional sources that must be supplied (non-empty) for each config
_REQUIRED_EXTRAS: dict[QueryConfig, tuple[str, ...]] = {
    QueryConfig.Q_HS: (),
    QueryConfig.Q_GEN: ("gen",),
    QueryConfig.Q_HS_GEN: ("gen",),
    QueryConfig.Q_HS_CN: ("cn",),
    QueryConfig.Q_CN: ("cn",),
}


class QueryCompositionError(ValueError):
    pass


@dataclass(frozen=True)
class Keyphrase:
    text: str  # 1-3 lowercase tokens joined with single spaces
    weight: float = 1.0

    def to_dict(self) -> dict:
        return {"text": self.text, "weight": self.weight}


@dataclass(frozen=True)
class Query:
    config: QueryConfig
    keyphrases: tuple[Keyphrase, ...]

    def terms(self) -> list[str]:
        """Concatenated keyphrase tokens, duplicates retained."""
        return [tok for kp in self.keyphrases for tok in tokenize(kp.text)]

    def to_dict(self) -> dict:
        return {
            "config": self.config.value,
            "keyphrases": [kp.to_dict() for kp in self.keyphrases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Query":
        return cls(
            config=QueryConfig(data["config"]),
            keyphrases=tuple(
                Keyphrase(text=kp["text"], weight=float(kp.get("weight", 1.0)))
                for kp in data["keyphrases"]
            ),
        )


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    raw = resources.files("cnforge").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower()
        for line in raw.splitlines()
        if line.strip() and not line.startswith("#")
    )


def extract_keyphrases(text: str, max_k: int = DEFAULT_MAX_KEYPHRASES) -> list[Keyphrase]:
    """Rank candidate n-grams (n <= 3) that do not start or end with a stopword.

    weight = frequency * n * (1 + 1 / (1 + first_occurrence_token_index)),
    i.e. a multiword boost times an early-position boost. Ties break on
    earlier first occurrence, then on phrase text.
    """
    if max_k < 1:
        raise ValueError("max_k must be positive")
    tokens = tokenize(text)
    stops = stopwords()
    stats: dict[tuple[str, ...], list[int]] = {}
    for n in range(1, MAX_PHRASE_LEN + 1):
        for i in range(len(tokens) - n + 1):
            gram = tuple(tokens[i : i + n])
            if gram[0] in stops or gram[-1] in stops:
                continue
            entry = stats.setdefault(gram, [0, i])
            entry[0] += 1
    scored = [
        (
            Keyphrase(" ".join(gram), count * len(gram) * (1.0 + 1.0 / (1.0 + first))),
            first,
        )
        for gram, (count, first) in stats.items()
    ]
    scored.sort(key=lambda item: (-item[0].weight, item[1], item[0].text))
    return [kp for kp, _ in scored[:max_k]]


def parse_generated_keyphrases(text: str) -> list[Keyphrase]:
    """Parse a comma-separated keyphrase reply into uniform-weight phrases."""
    phrases = [part.strip().lower() for part in text.split(",")]
    return [Keyphrase(p, 1.0) for p in phrases if p]


def compose_query(
    config: QueryConfig | str,
    hs_kps: list[Keyphrase],
    cn_kps: list[Keyphrase] | None = None,
    gen_kps: list[Keyphrase] | None = None,
) -> Query:
    """Assemble a query for a config, deduplicating exact text matches.

    Union configs concatenate hs keyphrases first, then the other source,
    keeping first occurrences. A config whose required source is missing
    or empty raises :class:`QueryCompositionError`, as does a fully empty
    composition.
    """
    config = QueryConfig(config)
    extras = {"cn": cn_kps, "gen": gen_kps}
    for name in _REQUIRED_EXTRAS[config]:
        if not extras[name]:
            raise QueryCompositionError(f"{config.value} requires {name} keyphrases")

    if config is QueryConfig.Q_HS:
        parts = list(hs_kps)
    elif config is QueryConfig.Q_GEN:
        parts = list(gen_kps or [])
    elif config is QueryConfig.Q_CN:
        parts = list(cn_kps or [])
    elif config is QueryConfig.Q_HS_GEN:
        parts = list(hs_kps) + list(gen_kps or [])
    else:  # Q_HS_CN
        parts = list(hs_kps) + list(cn_kps or [])

    seen: set[str] = set()
    deduped: list[Keyphrase] = []
    for kp in parts:
        if kp.text in seen:
            continue
        seen.add(kp.text)
        deduped.append(kp)
    if not deduped:
        raise QueryCompositionError(f"{config.value} composed an empty query")
    return Query(config=config, keyphrases=tuple(deduped))


def filter_trainable_pairs(pairs: PairSet) -> PairSet:
    """Drop pairs whose cn has fewer than ``MIN_CN_TOKENS`` tokens.

    Such short responses are generic and give retrieval nothing to work
    with. Split membership is unchanged; the filter is idempotent.
    """
    kept = [p for p in pairs if len(tokenize(p.cn)) >= MIN_CN_TOKENS]
    return PairSet(pairs=kept, errors=list(pairs.errors))
