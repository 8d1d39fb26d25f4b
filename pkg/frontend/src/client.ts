// Typed fetch client for the diagnosis chat service.
// Endpoints: POST /sessions, POST /sessions/{id}/messages, GET /sessions/{id}.

export type SessionStatus = "open" | "success" | "failed";

export interface StartResponse {
  id: string;
  agent_utterance: string;
  status: SessionStatus;
  diagnosis?: string;
}

export interface ReplyResponse {
  agent_utterance: string;
  status: SessionStatus;
  diagnosis?: string;
}

export interface TranscriptTurn {
  speaker: "user" | "agent";
  utterance: string;
  [extra: string]: unknown;
}

export interface SessionRecord {
  session_id: string;
  transcript: TranscriptTurn[];
  status: SessionStatus;
  diagnosis: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText || `HTTP ${res.status}`;
    try {
      const body = await res.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

export class ChatClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  startSession(selfReport: string): Promise<StartResponse> {
    return this.fetchFn(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ self_report: selfReport }),
    }).then((r) => asJson<StartResponse>(r));
  }

  sendMessage(sessionId: string, text: string): Promise<ReplyResponse> {
    return this.fetchFn(`${this.baseUrl}/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    }).then((r) => asJson<ReplyResponse>(r));
  }

  getSession(sessionId: string): Promise<SessionRecord> {
    return this.fetchFn(`${this.baseUrl}/sessions/${sessionId}`).then((r) =>
      asJson<SessionRecord>(r),
    );
  }
}
