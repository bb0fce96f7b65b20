"""Assembly and parsing of model input sequences with literal boundary
tokens and head-truncation limits."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import TOKEN_RE

HS_END = "[HS_end_token]"
KN_END = "[KN_end_token]"
CN_END = "[CN_end_token]"
KP_END = "[KP_end_token]"

BOUNDARY_TOKENS = (HS_END, KN_END, CN_END, KP_END)

# segment layout per sequence kind; the last entry's token may be absent
# in raw generator output (flagged "unterminated" instead of erroring)
_KIND_LAYOUT: dict[str, tuple[tuple[str, str], ...]] = {
    "cn_train": (("hs", HS_END), ("kn", KN_END), ("cn", CN_END)),
    "cn_infer": (("hs", HS_END), ("kn", KN_END)),
    "kp_train": (("hs", HS_END), ("kp", KP_END)),
}

KINDS = tuple(_KIND_LAYOUT)


class PromptError(ValueError):
    pass


class PromptParseError(PromptError):
    def __init__(self, message: str, token: str | None = None) -> None:
        super().__init__(message)
        self.token = token


@dataclass(frozen=True)
class TruncationPolicy:
    hs_max: int = 70
    kn_max: int = 256
    cn_max: int = 256

    def __post_init__(self) -> None:
        if min(self.hs_max, self.kn_max, self.cn_max) < 1:
            raise ValueError("truncation limits must be positive")


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class PromptSequence:
    kind: str
    text: str
    segments: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParsedSequence:
    kind: str
    segments: dict[str, str]
    warnings: tuple[str, ...] = ()

    @property
    def unterminated(self) -> bool:
        return any(w.startswith("unterminated") for w in self.warnings)


def truncate_tokens(text: str, max_tokens: int) -> str:
    """Cut text right after its ``max_tokens``-th token.

    The cut is a pure prefix: tokenizing the result yields exactly the
    first ``max_tokens`` tokens of the original. Text at or under the
    limit is returned unchanged.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be positive")
    count = 0
    for match in TOKEN_RE.finditer(text):
        count += 1
        if count == max_tokens:
            remainder_start = match.end()
            if TOKEN_RE.search(text, remainder_start):
                return text[:remainder_start]
            return text
    return text


def _check_no_boundary(name: str, value: str) -> None:
    for token in BOUNDARY_TOKENS:
        if token in value:
            raise PromptError(f"{name} segment contains boundary token {token}")


def assemble_cn(
    hs: str,
    kn_sentences: Sequence[str],
    cn: str | None = None,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> PromptSequence:
    """Build ``HS [HS_end_token] KN [KN_end_token]`` and, with a cn, the
    training form ending ``CN [CN_end_token]``.

    Knowledge sentences are joined with single spaces in rank order; each
    segment is head-truncated to the policy limit. An empty knowledge list
    leaves an empty segment between the two boundary tokens.
    """
    hs = hs.strip()
    if not hs:
        raise PromptError("hs segment must be non-empty")
    _check_no_boundary("hs", hs)
    kn_text = " ".join(s.strip() for s in kn_sentences)
    _check_no_boundary("kn", kn_text)
    hs_t = truncate_tokens(hs, policy.hs_max)
    kn_t = truncate_tokens(kn_text, policy.kn_max) if kn_text else ""
    parts = [hs_t, HS_END]
    if kn_t:
        parts.append(kn_t)
    parts.append(KN_END)
    segments = {"hs": hs_t, "kn": kn_t}
    kind = "cn_infer"
    if cn is not None:
        cn = cn.strip()
        _check_no_boundary("cn", cn)
        cn_t = truncate_tokens(cn, policy.cn_max) if cn else ""
        if cn_t:
            parts.append(cn_t)
        parts.append(CN_END)
        segments["cn"] = cn_t
        kind = "cn_train"
    return PromptSequence(kind=kind, text=" ".join(parts), segments=segments)


def assemble_kp(
    hs: str,
    keyphrases: Sequence[str],
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> PromptSequence:
    """Build ``HS [HS_end_token] kp1, kp2 [KP_end_token]``."""
    hs = hs.strip()
    if not hs:
        raise PromptError("hs segment must be non-empty")
    _check_no_boundary("hs", hs)
    phrases = [kp.strip() for kp in keyphrases if kp.strip()]
    if not phrases:
        raise PromptError("keyphrase list must be non-empty")
    kp_text = ", ".join(phrases)
    _check_no_boundary("kp", kp_text)
    hs_t = truncate_tokens(hs, policy.hs_max)
    text = " ".join([hs_t, HS_END, kp_text, KP_END])
    return PromptSequence(kind="kp_train", text=text, segments={"hs": hs_t, "kp": kp_text})


def kp_request_text(hs: str, policy: TruncationPolicy = DEFAULT_POLICY) -> str:
    """The inference-side keyphrase prompt: ``HS [HS_end_token]``."""
    hs = hs.strip()
    if not hs:
        raise PromptError("hs segment must be non-empty")
    _check_no_boundary("hs", hs)
    return f"{truncate_tokens(hs, policy.hs_max)} {HS_END}"


def parse(sequence_text: str, kind: str) -> ParsedSequence:
    """Split a sequence back into its named segments.

    Exact inverse of the matching assemble on well-formed input. A missing
    final boundary token flags the trailing segment "unterminated" instead
    of erroring (raw generator output often stops early); every other
    missing, duplicated, or out-of-place boundary token raises
    :class:`PromptParseError` naming the token.
    """
    try:
        layout = _KIND_LAYOUT[kind]
    except KeyError:
        raise PromptError(f"unknown sequence kind {kind!r}") from None
    expected = {token for _, token in layout}
    final_token = layout[-1][1]
    for token in BOUNDARY_TOKENS:
        count = sequence_text.count(token)
        if token not in expected:
            if count:
                raise PromptParseError(f"unexpected boundary token {token}", token)
        elif count > 1:
            raise PromptParseError(f"duplicated boundary token {token}", token)
        elif count == 0 and token != final_token:
            raise PromptParseError(f"missing boundary token {token}", token)

    segments: dict[str, str] = {}
    notes: list[str] = []
    pos = 0
    for name, token in layout:
        idx = sequence_text.find(token, pos)
        if idx == -1:
            if token == final_token and token not in sequence_text:
                segments[name] = sequence_text[pos:].strip()
                notes.append(f"unterminated: missing {token}")
                pos = len(sequence_text)
                break
            raise PromptParseError(f"boundary token {token} out of order", token)
        segments[name] = sequence_text[pos:idx].strip()
        pos = idx + len(token)
    else:
        if sequence_text[pos:].strip():
            notes.append(f"trailing text after {final_token}")
    return ParsedSequence(kind=kind, segments=segments, warnings=tuple(notes))
