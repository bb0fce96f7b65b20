"""Automatic evaluation metrics and per-model reports.

All metrics are pure functions over token sequences produced by the shared
corpus tokenizer. ``rouge_l_f1`` is the single LCS kernel used both here
and by sentence distillation.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import segment_sentences, tokenize

RR_WINDOW = 1000  # tokens per non-overlapping repetition-rate window
RR_MAX_N = 4


class MetricError(ValueError):
    pass


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length, O(len(a)*len(b)) time, O(len(b)) space."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l_f1(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS-based F1: P = LCS/|cand|, R = LCS/|ref|; 0 when there is no LCS."""
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2.0 * precision * recall / (precision + recall)


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def bleu2(
    candidates: Sequence[Sequence[str]], references: Sequence[Sequence[str]]
) -> float:
    """Corpus-level BLEU with n <= 2, no smoothing.

    Modified n-gram precisions are pooled over the whole corpus, combined
    by geometric mean, and multiplied by the brevity penalty
    exp(min(0, 1 - r/c)). Zero pooled matches at either order give 0.
    """
    if len(candidates) != len(references):
        raise MetricError("candidates and references must be parallel")
    if not candidates:
        raise MetricError("bleu2 needs at least one candidate/reference pair")
    matches = [0, 0]
    totals = [0, 0]
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for i, n in enumerate((1, 2)):
            cand_counts = Counter(ngrams(cand, n))
            ref_counts = Counter(ngrams(ref, n))
            matches[i] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
            totals[i] += sum(cand_counts.values())
    if matches[0] == 0 or matches[1] == 0 or totals[0] == 0 or totals[1] == 0:
        return 0.0
    p1 = matches[0] / totals[0]
    p2 = matches[1] / totals[1]
    brevity = math.exp(min(0.0, 1.0 - ref_len / cand_len))
    return brevity * math.sqrt(p1 * p2)


def jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def novelty(
    candidate: Sequence[str], training_cns: Iterable[Iterable[str]]
) -> float:
    """1 minus the maximum token-set Jaccard similarity to any training cn."""
    training_sets = [set(cn) for cn in training_cns]
    if not training_sets:
        raise MetricError("novelty needs a non-empty training set")
    cand_set = set(candidate)
    return 1.0 - max(jaccard(cand_set, t) for t in training_sets)


def repetition_rate(
    texts: Sequence[str], window: int = RR_WINDOW, max_n: int = RR_MAX_N
) -> float:
    """Windowed non-singleton n-gram type rate, geometric-mean combined.

    All texts are concatenated into one token stream and cut into
    non-overlapping windows (final partial window included). For each
    order n, the fraction of n-gram types occurring more than once is
    averaged over the windows that contain at least one n-gram; the rate
    is 100 times the geometric mean over n = 1..max_n.
    """
    tokens = [tok for text in texts for tok in tokenize(text)]
    if not tokens:
        raise MetricError("repetition rate needs a non-empty corpus")
    windows = [tokens[i : i + window] for i in range(0, len(tokens), window)]
    product = 1.0
    for n in range(1, max_n + 1):
        rates = []
        for w in windows:
            types = Counter(ngrams(w, n))
            if not types:
                continue
            rates.append(sum(1 for c in types.values() if c > 1) / len(types))
        mean_rate = sum(rates) / len(rates) if rates else 0.0
        product *= mean_rate
    return 100.0 * product ** (1.0 / max_n)


def kn_overlap(candidate: Sequence[str], kn: Sequence[str], n: int) -> float:
    """Fraction of the candidate's distinct n-grams found in the knowledge."""
    if n < 1:
        raise MetricError("n must be >= 1")
    if len(candidate) < n:
        warnings.warn(
            f"candidate shorter than n={n}; kn_overlap defined as 0", RuntimeWarning
        )
        return 0.0
    cand_grams = set(ngrams(candidate, n))
    kn_grams = set(ngrams(kn, n))
    return len(cand_grams & kn_grams) / len(cand_grams)


def kendall_tau_b(ranking_a: Sequence[float], ranking_b: Sequence[float]) -> float:
    """Tie-corrected rank correlation over all item pairs.

    tau_b = (C - D) / sqrt((C + D + Ta)(C + D + Tb)) where Ta/Tb count
    pairs tied in exactly one ranking; pairs tied in both count nowhere.
    Undefined (raises) when either ranking is fully tied.
    """
    if len(ranking_a) != len(ranking_b):
        raise MetricError("rankings must have equal length")
    if len(ranking_a) < 2:
        raise MetricError("rankings need at least two items")
    concordant = discordant = tied_a_only = tied_b_only = 0
    n = len(ranking_a)
    for i in range(n - 1):
        for j in range(i + 1, n):
            da = ranking_a[i] - ranking_a[j]
            db = ranking_b[i] - ranking_b[j]
            if da == 0 and db == 0:
                continue
            if da == 0:
                tied_a_only += 1
            elif db == 0:
                tied_b_only += 1
            elif (da > 0) == (db > 0):
                concordant += 1
            else:
                discordant += 1
    denom_a = concordant + discordant + tied_a_only
    denom_b = concordant + discordant + tied_b_only
    if denom_a == 0 or denom_b == 0:
        raise MetricError("tau-b undefined: one ranking is fully tied")
    return (concordant - discordant) / math.sqrt(denom_a * denom_b)


# -- reports ----------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    """One generated output with the knowledge and input it was produced from."""

    cn: str
    kn: str = ""
    hs: str = ""


@dataclass(frozen=True)
class MetricRow:
    model: str
    novelty: float
    rr: float
    bleu2: float
    rouge_l: float
    avg_words: float
    avg_sents: float
    kn_overlap_1: float
    kn_overlap_2: float
    kn_overlap_3: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


TSV_COLUMNS = (
    "model",
    "novelty",
    "rr",
    "bleu2",
    "rouge_l",
    "avg_words",
    "avg_sents",
    "kn_overlap_1",
    "kn_overlap_2",
    "kn_overlap_3",
)


@dataclass
class EvalReport:
    rows: list[MetricRow] = field(default_factory=list)
    query_config: str = ""
    split: str = ""
    n_items: int = 0

    def to_tsv(self) -> str:
        lines = [
            f"# query_config={self.query_config or '-'}\tsplit={self.split or '-'}\tn_items={self.n_items}",
            "\t".join(TSV_COLUMNS),
        ]
        for row in self.rows:
            values = [row.model] + [
                f"{getattr(row, col):.6f}" for col in TSV_COLUMNS[1:]
            ]
            lines.append("\t".join(values))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "query_config": self.query_config,
            "split": self.split,
            "n_items": self.n_items,
            "rows": [row.to_dict() for row in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def combine(cls, reports: Sequence["EvalReport"]) -> "EvalReport":
        if not reports:
            raise MetricError("cannot combine zero reports")
        first = reports[0]
        for other in reports[1:]:
            if (other.query_config, other.split, other.n_items) != (
                first.query_config,
                first.split,
                first.n_items,
            ):
                raise MetricError("cannot combine reports with different metadata")
        return cls(
            rows=[row for rep in reports for row in rep.rows],
            query_config=first.query_config,
            split=first.split,
            n_items=first.n_items,
        )


def eval_report(
    outputs: Sequence[EvalItem],
    training_cns: Sequence[str],
    refs: Sequence[str],
    model: str = "model",
    query_config: str = "",
    split: str = "",
) -> EvalReport:
    """Compute the full metric row for one model's outputs."""
    if not outputs:
        raise MetricError("eval_report needs at least one output")
    if refs is None or len(refs) != len(outputs):
        raise MetricError("eval_report needs one reference per output")
    if not training_cns:
        raise MetricError("eval_report needs training cns for novelty")

    cand_tokens = [tokenize(item.cn) for item in outputs]
    ref_tokens = [tokenize(ref) for ref in refs]
    kn_tokens = [tokenize(item.kn) for item in outputs]
    training_tokens = [tokenize(cn) for cn in training_cns]

    n = len(outputs)
    row = MetricRow(
        model=model,
        novelty=sum(novelty(c, training_tokens) for c in cand_tokens) / n,
        rr=repetition_rate([item.cn for item in outputs]),
        bleu2=bleu2(cand_tokens, ref_tokens),
        rouge_l=sum(rouge_l_f1(c, r) for c, r in zip(cand_tokens, ref_tokens)) / n,
        avg_words=sum(len(c) for c in cand_tokens) / n,
        avg_sents=sum(len(segment_sentences(item.cn)) for item in outputs) / n,
        kn_overlap_1=sum(kn_overlap(c, k, 1) for c, k in zip(cand_tokens, kn_tokens)) / n,
        kn_overlap_2=sum(kn_overlap(c, k, 2) for c, k in zip(cand_tokens, kn_tokens)) / n,
        kn_overlap_3=sum(kn_overlap(c, k, 3) for c, k in zip(cand_tokens, kn_tokens)) / n,
    )
    return EvalReport(rows=[row], query_config=query_config, split=split, n_items=n)


# -- report input files ------------------------------------------------


def load_eval_items(path: Path | str) -> list[dict]:
    """Load dataset items: JSONL with pair_id, hs, cn (reference), kn list."""
    items = []
    for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        for key in ("pair_id", "hs", "cn"):
            if key not in record:
                raise MetricError(f"{path}:{line_no}: missing {key!r}")
        record.setdefault("kn", [])
        items.append(record)
    return items


def load_outputs(path: Path | str) -> list[dict]:
    """Load model outputs: JSONL with pair_id, text, optional model."""
    outputs = []
    for line_no, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        record = json.loads(line)
        for key in ("pair_id", "text"):
            if key not in record:
                raise MetricError(f"{path}:{line_no}: missing {key!r}")
        record.setdefault("model", "model")
        outputs.append(record)
    return outputs
