/** Wire types mirroring the pipeline service's JSON contract. */

export interface KeyphraseDto {
  text: string;
  weight: number;
}

export interface QueryDto {
  config: string;
  keyphrases: KeyphraseDto[];
}

export interface ScoredArticleDto {
  article_id: string;
  score: number;
}

export interface KnowledgeSentenceDto {
  article_id: string;
  sent_index: number;
  text: string;
  score: number;
}

export interface KnowledgeDto {
  sentences: KnowledgeSentenceDto[];
  query: QueryDto;
  article_pool: string[];
}

export interface RetrieveRequest {
  hs: string;
  config: string;
  overrides?: string[];
  cn?: string;
}

export interface RetrieveResponse {
  run_id: string;
  query: QueryDto;
  articles: ScoredArticleDto[];
  knowledge: KnowledgeDto;
}

export interface GenerateRequest {
  run_id?: string;
  hs?: string;
  knowledge?: string[];
  seed?: number;
}

export interface GenerateResponse {
  run_id: string;
  text: string;
  cn: string | null;
  unterminated: boolean;
  backend_id: string;
  latency_ms: number;
}

export interface KnOverlapResponse {
  n: number;
  overlap: number;
  matched: string[];
}

export interface HealthResponse {
  status: string;
  index_loaded: boolean;
  backend: string;
  version: string;
}

export interface StageError {
  code: string;
  message: string;
  stage: string;
}
