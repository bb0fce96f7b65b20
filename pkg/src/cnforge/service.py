"""HTTP service exposing the retrieve / generate / eval pipeline, plus the
append-only run journal that records every stage output."""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .bm25 import Bm25Index, ScoredArticle
from .corpus import ArticleSet, Sentence, article_sentences, tokenize
from .gateway import (
    Backend,
    DecodingParams,
    GatewayError,
    GenerationRequest,
    default_decoding,
    request_generation,
)
from .metrics import (
    EvalItem,
    EvalReport,
    MetricError,
    eval_report,
    kn_overlap,
    load_eval_items,
    load_outputs,
    ngrams,
)
from .prompts import PromptParseError, assemble_cn, kp_request_text, parse
from .queries import (
    Keyphrase,
    Query,
    QueryCompositionError,
    QueryConfig,
    compose_query,
    extract_keyphrases,
    parse_generated_keyphrases,
)
from .selection import Knowledge, select_knowledge

EPOCH_TS = "1970-01-01T00:00:00+00:00"


class ApiError(Exception):
    """Error with the {code, message, stage} wire shape."""

    def __init__(self, code: str, message: str, stage: str, status: int = 400) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.stage = stage
        self.status = status


class RunJournal:
    """Append-only JSONL store of pipeline run records, keyed by run_id.

    The lock makes appends and lookups linearizable; the latest line for a
    run_id is its current record.
    """

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def records(self) -> Iterator[dict]:
        if not self.path.exists():
            return iter(())
        with self._lock:
            lines = self.path.read_text("utf-8").splitlines()
        return (json.loads(line) for line in lines if line.strip())

    def get(self, run_id: str) -> dict | None:
        found = None
        for record in self.records():
            if record.get("run_id") == run_id:
                found = record
        return found


@dataclass
class PipelineState:
    """Everything the endpoints need; the journal is the only mutable part."""

    backend: Backend
    journal: RunJournal
    index: Bm25Index | None = None
    articles: ArticleSet | None = None
    top_articles: int = 25
    top_sentences: int = 5
    fixed_timestamps: bool = False
    _sentence_cache: dict[str, list[Sentence]] = field(default_factory=dict)

    def now(self) -> str:
        if self.fixed_timestamps:
            return EPOCH_TS
        return datetime.now(timezone.utc).isoformat()

    def sentences_for(self, article_id: str) -> list[Sentence]:
        if article_id not in self._sentence_cache:
            assert self.articles is not None
            self._sentence_cache[article_id] = article_sentences(self.articles.get(article_id))
        return self._sentence_cache[article_id]


def _generated_keyphrases(state: PipelineState, hs: str, request_id: str) -> list[Keyphrase]:
    prompt = kp_request_text(hs)
    request = GenerationRequest(
        mode="keyphrases",
        prompt=prompt,
        decoding=default_decoding("keyphrases"),
        request_id=request_id,
    )
    result = request_generation(request, state.backend)
    reply = result.text.split("[KP_end_token]")[0]
    return parse_generated_keyphrases(reply)


def build_query(
    state: PipelineState,
    hs: str,
    config: QueryConfig,
    overrides: list[str] | None = None,
    cn: str | None = None,
    request_id: str = "",
) -> Query:
    """Compose the query for a config, honoring operator overrides.

    Overrides replace the extracted (Q_hs) or generated/cn-side source;
    union configs keep the extracted hs keyphrases and replace only the
    second source.
    """
    override_kps = (
        [Keyphrase(" ".join(tokenize(o)), 1.0) for o in overrides if o.strip()]
        if overrides
        else None
    )
    hs_kps = extract_keyphrases(hs)
    cn_kps = None
    gen_kps = None
    if config is QueryConfig.Q_HS:
        if override_kps:
            hs_kps = override_kps
    elif config in (QueryConfig.Q_CN, QueryConfig.Q_HS_CN):
        if override_kps:
            cn_kps = override_kps
        elif cn:
            cn_kps = extract_keyphrases(cn)
        else:
            raise ApiError(
                "missing_cn",
                f"{config.value} needs a cn text or keyphrase overrides",
                stage="retrieve",
            )
    else:  # Q_GEN, Q_HS_GEN
        if override_kps:
            gen_kps = override_kps
        else:
            try:
                gen_kps = _generated_keyphrases(state, hs, request_id or uuid.uuid4().hex)
            except GatewayError as exc:
                raise ApiError(
                    "gateway_error", str(exc), stage="query_generation", status=502
                ) from exc
    try:
        return compose_query(config, hs_kps, cn_kps=cn_kps, gen_kps=gen_kps)
    except QueryCompositionError as exc:
        raise ApiError("empty_query", str(exc), stage="retrieve") from exc


def run_retrieval(
    state: PipelineState, query: Query
) -> tuple[list[ScoredArticle], Knowledge]:
    assert state.index is not None
    hits = state.index.search(query, k=state.top_articles)
    pools = [(hit.article_id, state.sentences_for(hit.article_id)) for hit in hits]
    knowledge = select_knowledge(pools, query, top_sent=state.top_sentences)
    return hits, knowledge


def extract_cn(prompt_text: str, generated: str) -> tuple[str | None, bool]:
    """Pull the cn segment out of prompt + continuation; flag early stops."""
    try:
        parsed = parse(f"{prompt_text} {generated}", "cn_train")
    except PromptParseError:
        return None, True
    return parsed.segments.get("cn"), parsed.unterminated


class RetrieveIn(BaseModel):
    hs: str
    config: str = "q_hs"
    overrides: list[str] | None = None
    cn: str | None = None


class GenerateIn(BaseModel):
    run_id: str | None = None
    hs: str | None = None
    knowledge: list[str] | None = None
    decoding: dict | None = None
    seed: int | None = None


class EvalIn(BaseModel):
    dataset: str
    outputs: str
    train: str
    query_config: str = ""
    split: str = ""


class KnOverlapIn(BaseModel):
    candidate: str
    kn: str
    n: int = 1


def create_app(state: PipelineState) -> FastAPI:
    app = FastAPI(title="cnforge", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(_: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "stage": exc.stage},
        )

    @app.get("/v1/healthz")
    def healthz() -> dict:
        return {
            "status": "ok",
            "index_loaded": state.index is not None,
            "backend": state.backend.backend_id,
            "version": __version__,
        }

    @app.post("/v1/retrieve")
    def retrieve(body: RetrieveIn) -> dict:
        if state.index is None or state.articles is None:
            raise ApiError("no_index", "no index loaded", stage="retrieve", status=409)
        try:
            config = QueryConfig(body.config)
        except ValueError:
            raise ApiError(
                "bad_config", f"unknown query config {body.config!r}", stage="retrieve"
            ) from None
        run_id = uuid.uuid4().hex
        query = build_query(
            state, body.hs, config, overrides=body.overrides, cn=body.cn, request_id=run_id
        )
        hits, knowledge = run_retrieval(state, query)
        record = {
            "run_id": run_id,
            "stage": "retrieved",
            "ts": state.now(),
            "hs": body.hs,
            "query": query.to_dict(),
            "articles": [{"article_id": h.article_id, "score": h.score} for h in hits],
            "knowledge": knowledge.to_dict(),
        }
        state.journal.append(record)
        return {
            "run_id": run_id,
            "query": record["query"],
            "articles": record["articles"],
            "knowledge": record["knowledge"],
        }

    @app.post("/v1/generate")
    def generate(body: GenerateIn) -> dict:
        if body.run_id:
            record = state.journal.get(body.run_id)
            if record is None:
                raise ApiError(
                    "unknown_run", f"no run {body.run_id!r}", stage="generate", status=404
                )
            run_id = body.run_id
            hs = record["hs"]
            kn_sentences = [s["text"] for s in record.get("knowledge", {}).get("sentences", [])]
            base = dict(record)
        elif body.hs:
            run_id = uuid.uuid4().hex
            hs = body.hs
            kn_sentences = body.knowledge or []
            base = {"run_id": run_id, "hs": hs, "knowledge": {"sentences": [
                {"text": s} for s in kn_sentences
            ]}}
        else:
            raise ApiError("bad_request", "need run_id or hs", stage="generate")

        prompt = assemble_cn(hs, kn_sentences)
        decoding = (
            DecodingParams.from_dict(body.decoding)
            if body.decoding
            else default_decoding("cn", seed=body.seed)
        )
        request = GenerationRequest(
            mode="cn", prompt=prompt.text, decoding=decoding, request_id=f"{run_id}:cn"
        )
        try:
            result = request_generation(request, state.backend)
        except GatewayError as exc:
            state.journal.append(
                {
                    "run_id": run_id,
                    "stage": "error",
                    "ts": state.now(),
                    "error": {"code": "gateway_error", "message": str(exc), "stage": "generate"},
                }
            )
            raise ApiError("gateway_error", str(exc), stage="generate", status=502) from exc
        cn, unterminated = extract_cn(prompt.text, result.text)
        record = dict(base)
        record.update(
            {
                "stage": "completed",
                "ts": state.now(),
                "prompt": {"kind": prompt.kind, "text": prompt.text, "segments": prompt.segments},
                "decoding": decoding.to_dict(),
                "generation": result.to_dict(),
                "cn": cn,
                "unterminated": unterminated,
            }
        )
        state.journal.append(record)
        return {
            "run_id": run_id,
            "text": result.text,
            "cn": cn,
            "unterminated": unterminated,
            "backend_id": result.backend_id,
            "latency_ms": result.latency_ms,
        }

    @app.post("/v1/eval")
    def evaluate(body: EvalIn) -> dict:
        for name, ref in (("dataset", body.dataset), ("outputs", body.outputs), ("train", body.train)):
            if not Path(ref).exists():
                raise ApiError("bad_ref", f"{name} file not found: {ref}", stage="eval", status=404)
        try:
            report = evaluate_files(
                body.dataset, body.outputs, body.train,
                query_config=body.query_config, split=body.split,
            )
        except MetricError as exc:
            raise ApiError("eval_error", str(exc), stage="eval") from exc
        return report.to_dict()

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str) -> dict:
        record = state.journal.get(run_id)
        if record is None:
            raise ApiError("unknown_run", f"no run {run_id!r}", stage="runs", status=404)
        return record

    @app.post("/v1/metrics/kn-overlap")
    def kn_overlap_endpoint(body: KnOverlapIn) -> dict:
        cand = tokenize(body.candidate)
        kn = tokenize(body.kn)
        if body.n < 1:
            raise ApiError("bad_n", "n must be >= 1", stage="metrics")
        if len(cand) < body.n:
            return {"n": body.n, "overlap": 0.0, "matched": []}
        value = kn_overlap(cand, kn, body.n)
        matched = sorted(
            " ".join(g) for g in set(ngrams(cand, body.n)) & set(ngrams(kn, body.n))
        )
        return {"n": body.n, "overlap": value, "matched": matched}

    return app


def evaluate_files(
    dataset_path: str | Path,
    outputs_path: str | Path,
    train_path: str | Path,
    query_config: str = "",
    split: str = "",
) -> EvalReport:
    """Align a dataset with model outputs by pair_id and score every model."""
    dataset = load_eval_items(dataset_path)
    outputs = load_outputs(outputs_path)
    training_cns = load_training_cns(train_path)
    by_id = {item["pair_id"]: item for item in dataset}
    if len(by_id) != len(dataset):
        raise MetricError("dataset has duplicate pair_ids")

    models: dict[str, list[dict]] = {}
    for out in outputs:
        models.setdefault(out["model"], []).append(out)

    reports = []
    for model in sorted(models):
        outs = models[model]
        if len(outs) != len(dataset):
            raise MetricError(
                f"model {model!r} has {len(outs)} outputs for {len(dataset)} dataset items"
            )
        items = []
        refs = []
        for out in outs:
            if out["pair_id"] not in by_id:
                raise MetricError(f"output pair_id {out['pair_id']!r} not in dataset")
            ref = by_id[out["pair_id"]]
            items.append(
                EvalItem(cn=out["text"], kn=" ".join(ref.get("kn", [])), hs=ref.get("hs", ""))
            )
            refs.append(ref["cn"])
        reports.append(
            eval_report(
                items, training_cns, refs,
                model=model, query_config=query_config, split=split,
            )
        )
    return EvalReport.combine(reports)


def load_training_cns(path: str | Path) -> list[str]:
    """Training cns from a pairs TSV (train split) or a plain text file."""
    from .corpus import ingest_pairs  # local import to keep module load light

    path = Path(path)
    text = path.read_text("utf-8")
    if path.suffix == ".tsv":
        pairs = ingest_pairs(text.splitlines())
        return [p.cn for p in pairs.split("train")]
    return [line.strip() for line in text.splitlines() if line.strip()]
