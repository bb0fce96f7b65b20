/** Session state for the operator workflow: one message in flight at a
 * time, every action mapping 1:1 to a service endpoint call.
 *
 * Responses are tagged with a sequence number; anything superseded by a
 * newer edit is discarded so slow replies never clobber fresh state. */

import { ApiClient, toStageError } from "./api.js";
import type { KnOverlapResponse, StageError } from "./types.js";

export interface SentenceRow {
  articleId: string;
  sentIndex: number;
  text: string;
  score: number;
  selected: boolean;
}

export interface CnCandidate {
  runId: string;
  text: string;
  cn: string | null;
  unterminated: boolean;
  backendId: string;
  knowledgeUsed: string[];
  overlap: KnOverlapResponse | null;
}

export interface SessionState {
  hs: string;
  config: string;
  keyphrases: string[];
  sentences: SentenceRow[];
  candidates: CnCandidate[];
  warning: string | null;
  error: StageError | null;
  busy: boolean;
}

export const EMPTY_KN_WARNING =
  "No knowledge sentences selected: generating with an empty knowledge segment.";

type Listener = (state: SessionState) => void;

export class ConsoleSession {
  readonly state: SessionState = {
    hs: "",
    config: "q_hs",
    keyphrases: [],
    sentences: [],
    candidates: [],
    warning: null,
    error: null,
    busy: false,
  };

  private seq = 0;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient, public overlapN = 1) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** New message: extract keyphrases server-side and retrieve. */
  async submitMessage(hs: string, config = this.state.config): Promise<void> {
    this.state.hs = hs;
    this.state.config = config;
    this.state.candidates = [];
    await this.retrieve();
  }

  /** One retrieval round; overrides carry operator-edited keyphrases. */
  async retrieve(overrides?: string[]): Promise<void> {
    const mySeq = ++this.seq;
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const response = await this.api.retrieve({
        hs: this.state.hs,
        config: this.state.config,
        ...(overrides && overrides.length ? { overrides } : {}),
      });
      if (mySeq !== this.seq) return; // superseded by a newer edit
      this.state.keyphrases = response.query.keyphrases.map((kp) => kp.text);
      this.state.sentences = response.knowledge.sentences.map((s) => ({
        articleId: s.article_id,
        sentIndex: s.sent_index,
        text: s.text,
        score: s.score,
        selected: true,
      }));
      this.state.warning = null;
    } catch (err) {
      if (mySeq !== this.seq) return;
      this.state.error = toStageError(err);
    } finally {
      if (mySeq === this.seq) {
        this.state.busy = false;
        this.emit();
      }
    }
  }

  /** Chip edits re-run retrieval with the full edited chip list. */
  async editKeyphrase(index: number, text: string): Promise<void> {
    const chips = [...this.state.keyphrases];
    const trimmed = text.trim().toLowerCase();
    if (!trimmed) return this.removeKeyphrase(index);
    chips[index] = trimmed;
    await this.retrieve(chips);
  }

  async removeKeyphrase(index: number): Promise<void> {
    const chips = this.state.keyphrases.filter((_, i) => i !== index);
    await this.retrieve(chips);
  }

  async addKeyphrase(text: string): Promise<void> {
    const trimmed = text.trim().toLowerCase();
    if (!trimmed) return;
    await this.retrieve([...this.state.keyphrases, trimmed]);
  }

  toggleSentence(index: number): void {
    const row = this.state.sentences[index];
    if (!row) return;
    row.selected = !row.selected;
    this.emit();
  }

  setAllSentences(selected: boolean): void {
    for (const row of this.state.sentences) row.selected = selected;
    this.emit();
  }

  selectedKnowledge(): string[] {
    return this.state.sentences.filter((s) => s.selected).map((s) => s.text);
  }

  /** Request one candidate; an empty selection warns but still generates. */
  async generate(): Promise<void> {
    const knowledge = this.selectedKnowledge();
    this.state.warning = knowledge.length === 0 ? EMPTY_KN_WARNING : null;
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const response = await this.api.generate({ hs: this.state.hs, knowledge });
      const candidate: CnCandidate = {
        runId: response.run_id,
        text: response.text,
        cn: response.cn,
        unterminated: response.unterminated,
        backendId: response.backend_id,
        knowledgeUsed: knowledge,
        overlap: null,
      };
      const shown = candidate.cn ?? candidate.text;
      if (knowledge.length > 0 && shown) {
        // overlap values come from the service; nothing is recomputed here
        candidate.overlap = await this.api.knOverlap(shown, knowledge.join(" "), this.overlapN);
      }
      this.state.candidates = [candidate, ...this.state.candidates];
    } catch (err) {
      this.state.error = toStageError(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }
}
