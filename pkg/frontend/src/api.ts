/**
 * Typed client for the dialog service.
 *
 * Every interface here mirrors a JSON shape the service emits; field
 * names are kept in the service's snake_case so a response can be
 * compared against these types without any mapping layer.
 */

export type Reply = "Yes" | "No";
export type TerminalAnswer = "Yes" | "No" | "Irrelevant";
export type Mode = "agent" | "reading";
export type SessionStatus = "awaiting_user" | "finished" | "aborted";

/** What an agent turn can be. "RuleText" only opens reading sessions. */
export type TurnKind = "Yes" | "No" | "Irrelevant" | "FollowUp" | "RuleText";

export interface ParsedRuleShape {
  conditions: number;
  operator: string | null;
  outcome_negated: boolean;
  ambiguous: boolean;
}

export interface RuleInfo {
  rule_id: string;
  title: string;
  rule_text: string;
  source_url: string;
  question: string;
  parsed: ParsedRuleShape;
}

export interface AgentTurn {
  kind: TurnKind;
  text: string;
  /** [stage, detail] pairs; absent on reading-mode openings. */
  trace?: [string, string][];
  status: SessionStatus;
}

export interface StartSessionRequest {
  rule_id: string;
  question: string;
  scenario?: string;
  mode?: Mode;
  gold_answer?: TerminalAnswer | null;
  item_id?: string | null;
}

export interface StartSessionResponse {
  session_id: string;
  response: AgentTurn;
}

export interface ConclusionResult {
  answer: TerminalAnswer;
  correct: boolean | null;
  elapsed_ms: number;
  status: "finished";
}

export interface TranscriptTurn {
  speaker: "agent" | "user";
  ts: number;
  kind?: TurnKind;
  text?: string;
  trace?: [string, string][];
  /** Follow-ups the service resolved from the scenario, as [question, answer]. */
  resolved?: [string, string][];
  reply?: string;
}

export interface Transcript {
  session_id: string;
  rule_id: string;
  rule_title: string;
  rule_text: string;
  question: string;
  scenario: string;
  mode: Mode;
  status: SessionStatus;
  gold_answer: string | null;
  item_id: string | null;
  turns: TranscriptTurn[];
  pending_followup: string | null;
  final_answer: string | null;
  conclusion: {
    answer: string;
    correct: boolean | null;
    elapsed_ms: number;
    ts: number;
  } | null;
  created_at: number;
  updated_at: number;
}

export interface ArmSummary {
  sessions: number;
  concluded: number;
  mean_elapsed_ms: number | null;
  accuracy: number | null;
  correct_known: number;
}

export interface StudyExport {
  arms: Record<Mode, ArmSummary>;
  generated_at: number;
}

export type ErrorCode = "validation" | "not_found" | "conflict" | "pipeline";

/** A non-2xx response, carrying the service's error envelope. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: ErrorCode,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

export function isConflict(err: unknown): err is ApiError {
  return err instanceof ApiError && err.status === 409;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class RuleChatClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    // Call through a local so the browser's fetch is not invoked with
    // the client as its receiver (that throws in real browsers).
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  rules(): Promise<RuleInfo[]> {
    return this.request<RuleInfo[]>("GET", "/rules");
  }

  startSession(body: StartSessionRequest): Promise<StartSessionResponse> {
    return this.request<StartSessionResponse>("POST", "/sessions", body);
  }

  async sendReply(sessionId: string, reply: Reply): Promise<AgentTurn> {
    const out = await this.request<{ response: AgentTurn }>(
      "POST",
      `/sessions/${sessionId}/answers`,
      { reply },
    );
    return out.response;
  }

  conclude(sessionId: string, answer: TerminalAnswer): Promise<ConclusionResult> {
    return this.request<ConclusionResult>(
      "POST",
      `/sessions/${sessionId}/conclusion`,
      { answer },
    );
  }

  transcript(sessionId: string): Promise<Transcript> {
    return this.request<Transcript>("GET", `/sessions/${sessionId}/transcript`);
  }

  studyExport(): Promise<StudyExport> {
    return this.request<StudyExport>("GET", "/study/export");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const doFetch = this.fetchFn;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await doFetch(this.baseUrl + path, init);
    if (!response.ok) {
      throw await toApiError(response);
    }
    return (await response.json()) as T;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let code: ErrorCode = "pipeline";
  let detail = response.statusText || `HTTP ${response.status}`;
  try {
    const payload = (await response.json()) as { error?: string; detail?: unknown };
    if (typeof payload.error === "string") {
      code = payload.error as ErrorCode;
    }
    if (payload.detail !== undefined) {
      detail = typeof payload.detail === "string"
        ? payload.detail
        : JSON.stringify(payload.detail);
    }
  } catch {
    // body was not the JSON envelope; keep the status line
  }
  return new ApiError(response.status, code, detail);
}
