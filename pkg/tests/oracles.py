"""Independent brute-force oracles used to pin expected values.

These deliberately avoid the library's implementations: LCS is found by
subsequence enumeration, BM25 by direct per-document evaluation of the
formula, tau-b via the multiplicity-based tie correction, and so on.
"""

from __future__ import annotations

import math
from collections import Counter
from itertools import combinations


def is_subsequence(needle, haystack) -> bool:
    it = iter(haystack)
    return all(any(x == y for y in it) for x in needle)


def brute_lcs(a, b) -> int:
    """Maximum length over all subsequences of ``a`` that occur in ``b``."""
    for size in range(min(len(a), len(b)), 0, -1):
        for picked in combinations(range(len(a)), size):
            if is_subsequence([a[i] for i in picked], b):
                return size
    return 0


def oracle_rouge_l_f1(candidate, reference) -> float:
    lcs = brute_lcs(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2 * p * r / (p + r)


def oracle_bm25_scores(doc_tokens: dict[str, list[str]], terms, k1=1.2, b=0.75) -> dict[str, float]:
    n_docs = len(doc_tokens)
    avg_len = sum(len(toks) for toks in doc_tokens.values()) / n_docs
    scores = {}
    for doc_id, toks in doc_tokens.items():
        total = 0.0
        for term in terms:
            tf = toks.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in doc_tokens.values() if term in other)
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            total += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avg_len))
        scores[doc_id] = total
    return scores


def oracle_bm25_topk(doc_tokens, terms, k, k1=1.2, b=0.75):
    scores = oracle_bm25_scores(doc_tokens, terms, k1=k1, b=b)
    ranked = sorted(
        ((d, s) for d, s in scores.items() if s > 0), key=lambda x: (-x[1], x[0])
    )
    return ranked[:k]


def _gram_list(tokens, n):
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def oracle_bleu2(candidates, references) -> float:
    m1 = t1 = m2 = t2 = 0
    cand_len = ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for g in set(_gram_list(cand, 1)):
            m1 += min(_gram_list(cand, 1).count(g), _gram_list(ref, 1).count(g))
        t1 += len(_gram_list(cand, 1))
        for g in set(_gram_list(cand, 2)):
            m2 += min(_gram_list(cand, 2).count(g), _gram_list(ref, 2).count(g))
        t2 += len(_gram_list(cand, 2))
    if m1 == 0 or m2 == 0 or t1 == 0 or t2 == 0:
        return 0.0
    bp = math.exp(min(0.0, 1.0 - ref_len / cand_len))
    return bp * math.sqrt((m1 / t1) * (m2 / t2))


def oracle_novelty(candidate, training) -> float:
    cand = set(candidate)
    best = 0.0
    for cn in training:
        other = set(cn)
        if not cand and not other:
            sim = 1.0
        else:
            sim = len(cand & other) / len(cand | other)
        best = max(best, sim)
    return 1.0 - best


def oracle_kn_overlap(candidate, kn, n) -> float:
    cand_set = set(_gram_list(candidate, n))
    kn_set = set(_gram_list(kn, n))
    if not cand_set:
        return 0.0
    return len(cand_set & kn_set) / len(cand_set)


def oracle_repetition_rate(tokens, window=1000, max_n=4) -> float:
    windows = [tokens[i : i + window] for i in range(0, len(tokens), window)]
    product = 1.0
    for n in range(1, max_n + 1):
        per_window = []
        for w in windows:
            counts: dict[tuple, int] = {}
            for j in range(len(w) - n + 1):
                gram = tuple(w[j : j + n])
                counts[gram] = counts.get(gram, 0) + 1
            if counts:
                repeated = sum(1 for v in counts.values() if v > 1)
                per_window.append(repeated / len(counts))
        rate = sum(per_window) / len(per_window) if per_window else 0.0
        product *= rate
    return 100.0 * product ** (1.0 / max_n)


def oracle_kendall_tau_b(a, b) -> float | None:
    """Standard multiplicity-based tie correction; None when undefined."""
    n = len(a)
    n0 = n * (n - 1) // 2
    ties_a = sum(v * (v - 1) // 2 for v in Counter(a).values())
    ties_b = sum(v * (v - 1) // 2 for v in Counter(b).values())
    concordant = discordant = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            prod = (a[i] - a[j]) * (b[i] - b[j])
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    denom = math.sqrt((n0 - ties_a) * (n0 - ties_b))
    if denom == 0:
        return None
    return (concordant - discordant) / denom
