/**
 * Typed client for the review service JSON API.
 *
 * Every method maps to one endpoint and returns the parsed body. Non-2xx
 * responses become ServiceError (the service always answers with a
 * {code, message, details} object); transport failures surface as whatever
 * fetch throws, so callers can tell "the server said no" from "the server
 * never answered".
 */

export interface Reference {
  id: string;
  title: string;
  source_db: string;
  authors: string[];
  year: number | null;
  venue: string;
  volume: string | null;
  pages: string | null;
  abstract: string;
  keywords: string[];
  citation_count: number | null;
  ref_type: string;
}

export type Judgment = "related" | "false-positive";

export type SessionState = "active" | "complete" | "complete-exhausted";

export interface VerdictRecord {
  judgment: Judgment;
  keywords: string[];
  notes: string;
}

export interface SessionView {
  session_id: string;
  kind: string;
  seed: number;
  state: SessionState;
  clean_streak: number;
  streak_target: number;
  target: number | null;
  judged: number;
  drawn: string[];
  verdicts: Record<string, VerdictRecord>;
  pool: string[];
  corpus_digest: string;
  corpus_size: number;
}

export interface NextResult {
  complete: boolean;
  exhausted?: boolean;
  error?: string;
  reference?: Reference;
  session: SessionView;
}

export interface CorpusStats {
  size: number;
  year_range: [number, number] | null;
  per_source: Record<string, number>;
  digest: string;
  retrieval_date: string | null;
}

export interface QueryPreview {
  query: string;
  count: number;
  ids: string[];
  truncated: boolean;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ApiClient {
  // baseUrl "" means same-origin relative requests (the service mounts the
  // built UI at / and the API beside it)
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await fetch(this.baseUrl + path, init);
    const payload = await resp.json();
    if (!resp.ok) {
      throw new ServiceError(
        resp.status,
        typeof payload.code === "string" ? payload.code : "unknown",
        typeof payload.message === "string" ? payload.message : `HTTP ${resp.status}`,
        payload.details ?? {},
      );
    }
    return payload as T;
  }

  corpusStats(): Promise<CorpusStats> {
    return this.request("GET", "/corpus/stats");
  }

  previewQuery(query: string, fields?: string[]): Promise<QueryPreview> {
    const body: Record<string, unknown> = { query };
    if (fields !== undefined) body.fields = fields;
    return this.request("POST", "/queries/preview", body);
  }

  createSession(kind: string, seed: number, target?: number): Promise<SessionView> {
    const body: Record<string, unknown> = { kind, seed };
    if (target !== undefined) body.target = target;
    return this.request("POST", "/sessions", body);
  }

  session(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}`);
  }

  next(id: string): Promise<NextResult> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}/next`);
  }

  submitVerdict(
    id: string,
    refId: string,
    judgment: Judgment,
    keywords: string[] = [],
    notes = "",
  ): Promise<SessionView> {
    return this.request("POST", `/sessions/${encodeURIComponent(id)}/verdicts`, {
      ref_id: refId,
      judgment,
      keywords,
      notes,
    });
  }
}
