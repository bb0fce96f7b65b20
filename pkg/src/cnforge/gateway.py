"""Broker for keyphrase- and counter-narrative-generation requests.

Real backends sit behind one HTTP endpoint (POST /v1/generate); a
deterministic in-process stub serves tests and offline runs. The env var
``CNFORGE_BACKEND_URL`` selects the backend; when unset, the stub is used.
"""

from __future__ import annotations

import os
import time
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import httpx

from .corpus import segment_sentences, tokenize
from .prompts import HS_END, KN_END, CN_END, KP_END, parse
from .queries import stopwords

BACKEND_URL_ENV = "CNFORGE_BACKEND_URL"
GENERATE_PATH = "/v1/generate"

MODES = ("cn", "keyphrases")
_MODE_PROMPT_END = {"cn": KN_END, "keyphrases": HS_END}

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 0.5
DEFAULT_TIMEOUT_S = 30.0


class GatewayError(Exception):
    """Base class for backend communication failures."""

    def __init__(self, message: str, stage: str = "generate") -> None:
        super().__init__(message)
        self.stage = stage


class GatewayRetryError(GatewayError):
    """All retryable attempts failed (timeouts, 429, 5xx)."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class GatewayProtocolError(GatewayError):
    """Backend replied with something outside the wire contract."""

    def __init__(self, message: str, payload: str = "") -> None:
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class DecodingParams:
    """Decoding knobs passed through to the backend unchanged.

    Exactly the fields of the chosen strategy must be set: nucleus takes
    ``p`` in (0, 1], beam takes a positive ``beam_width``.
    """

    strategy: str
    p: float | None = None
    beam_width: int | None = None
    max_new_tokens: int = 256
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.strategy == "nucleus":
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ValueError("nucleus decoding requires p in (0, 1]")
            if self.beam_width is not None:
                raise ValueError("nucleus decoding does not take beam_width")
        elif self.strategy == "beam":
            if self.beam_width is None or self.beam_width < 1:
                raise ValueError("beam decoding requires a positive beam_width")
            if self.p is not None:
                raise ValueError("beam decoding does not take p")
        else:
            raise ValueError(f"unknown decoding strategy {self.strategy!r}")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")

    def to_dict(self) -> dict:
        data: dict = {"strategy": self.strategy, "max_new_tokens": self.max_new_tokens}
        if self.p is not None:
            data["p"] = self.p
        if self.beam_width is not None:
            data["beam_width"] = self.beam_width
        if self.seed is not None:
            data["seed"] = self.seed
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DecodingParams":
        return cls(
            strategy=data["strategy"],
            p=data.get("p"),
            beam_width=data.get("beam_width"),
            max_new_tokens=int(data.get("max_new_tokens", 256)),
            seed=data.get("seed"),
        )


def default_decoding(mode: str, seed: int | None = None) -> DecodingParams:
    """Per-mode defaults: nucleus sampling with p = 0.9."""
    if mode not in MODES:
        raise ValueError(f"unknown generation mode {mode!r}")
    max_new = 256 if mode == "cn" else 64
    return DecodingParams(strategy="nucleus", p=0.9, max_new_tokens=max_new, seed=seed)


def beam_decoding(beam_width: int = 3, seed: int | None = None) -> DecodingParams:
    """Beam-search preset for copy-style backends."""
    return DecodingParams(strategy="beam", beam_width=beam_width, seed=seed)


@dataclass(frozen=True)
class GenerationRequest:
    mode: str
    prompt: str
    decoding: DecodingParams
    request_id: str

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown generation mode {self.mode!r}")
        end_token = _MODE_PROMPT_END[self.mode]
        if not self.prompt.rstrip().endswith(end_token):
            raise ValueError(f"{self.mode} prompt must end at {end_token}")
        if not self.request_id:
            raise ValueError("request_id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "prompt": self.prompt,
            "decoding": self.decoding.to_dict(),
            "request_id": self.request_id,
        }


@dataclass(frozen=True)
class GenerationResult:
    text: str
    backend_id: str
    latency_ms: int
    warning: str | None = None

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        if not self.text and not self.warning:
            raise ValueError("empty text requires a backend warning")

    def to_dict(self) -> dict:
        data = {
            "text": self.text,
            "backend_id": self.backend_id,
            "latency_ms": self.latency_ms,
        }
        if self.warning is not None:
            data["warning"] = self.warning
        return data


class Backend(Protocol):
    backend_id: str

    def generate(self, request: GenerationRequest) -> GenerationResult: ...


class StubBackend:
    """Deterministic offline backend.

    cn mode echoes the first knowledge sentence ("Counter: <sentence>"),
    or a fixed no-evidence line when the knowledge segment is empty.
    keyphrases mode replies with the three most frequent non-stopword
    input tokens, ties broken by first occurrence.
    """

    backend_id = "stub"

    def generate(self, request: GenerationRequest) -> GenerationResult:
        if request.mode == "cn":
            parsed = parse(request.prompt, "cn_infer")
            kn = parsed.segments.get("kn", "")
            sentences = segment_sentences(kn)
            lead = sentences[0] if sentences else "No evidence provided."
            text = f"Counter: {lead} {CN_END}"
        else:
            hs = request.prompt.split(HS_END)[0]
            stops = stopwords()
            content = [t for t in tokenize(hs) if t not in stops]
            counts = Counter(content)
            first_at = {tok: i for i, tok in reversed(list(enumerate(content)))}
            top = sorted(counts, key=lambda t: (-counts[t], first_at[t]))[:3]
            text = f"{', '.join(top)} {KP_END}" if top else KP_END
        return GenerationResult(text=text, backend_id=self.backend_id, latency_ms=0)


class HttpBackend:
    """HTTP client for the one-endpoint wire protocol.

    429 and 5xx replies and transport timeouts are retried with
    exponential backoff; the request_id makes retries idempotent on the
    backend side. Any other non-200, or a reply without the contract
    fields, is a protocol error carrying the raw payload.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = DEFAULT_TIMEOUT_S,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF_S,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.backend_id = self.base_url
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._transport = transport

    def generate(self, request: GenerationRequest) -> GenerationResult:
        url = self.base_url + GENERATE_PATH
        started = time.monotonic()
        last_error = "no attempt made"
        with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
            for attempt in range(1, self.retries + 1):
                try:
                    response = client.post(url, json=request.to_dict())
                except (httpx.TimeoutException, httpx.TransportError) as exc:
                    last_error = f"transport failure: {exc}"
                else:
                    if response.status_code == 200:
                        return self._parse_reply(response, started)
                    if response.status_code == 429 or response.status_code >= 500:
                        last_error = f"retryable status {response.status_code}"
                    else:
                        raise GatewayProtocolError(
                            f"unexpected status {response.status_code}",
                            payload=response.text,
                        )
                if attempt < self.retries:
                    time.sleep(self.backoff * (2 ** (attempt - 1)))
        raise GatewayRetryError(last_error, attempts=self.retries)

    def _parse_reply(self, response: httpx.Response, started: float) -> GenerationResult:
        try:
            payload = response.json()
        except ValueError:
            raise GatewayProtocolError("reply is not JSON", payload=response.text) from None
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise GatewayProtocolError("reply missing text field", payload=response.text)
        latency_ms = int((time.monotonic() - started) * 1000)
        try:
            return GenerationResult(
                text=payload["text"],
                backend_id=str(payload.get("backend_id", self.backend_id)),
                latency_ms=latency_ms,
                warning=payload.get("warning"),
            )
        except ValueError as exc:
            raise GatewayProtocolError(str(exc), payload=response.text) from None


def request_generation(request: GenerationRequest, backend: Backend) -> GenerationResult:
    """Send one request; the reply text is returned verbatim apart from a
    trailing-whitespace trim."""
    result = backend.generate(request)
    trimmed = result.text.rstrip()
    if trimmed == result.text:
        return result
    return GenerationResult(
        text=trimmed,
        backend_id=result.backend_id,
        latency_ms=result.latency_ms,
        warning=result.warning,
    )


def stub_generate(request: GenerationRequest) -> GenerationResult:
    return StubBackend().generate(request)


def backend_from_env(url: str | None = None) -> Backend:
    """HttpBackend for an explicit or CNFORGE_BACKEND_URL endpoint, else the stub."""
    target = url or os.environ.get(BACKEND_URL_ENV)
    if target:
        return HttpBackend(target)
    return StubBackend()
