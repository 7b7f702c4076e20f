// REST + WebSocket client for the overhear service.
//
// The stream tracks the last seen sequence number and resumes with
// ?since=<seq> after a drop, so observers never miss or duplicate events.

import type {
  AnnotationRecord,
  AnnotationSchema,
  GameEntity,
  SessionEvent,
  StageSnapshot,
} from "./types.js";

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) throw new Error(`GET ${path} -> ${response.status}`);
    return (await response.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw new Error(`POST ${path} -> ${response.status}`);
    return (await response.json()) as T;
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.getJson("/sessions");
  }

  createSession(config: Record<string, unknown>): Promise<{ session_id: string }> {
    return this.postJson("/sessions", config);
  }

  events(sessionId: string, since = 0, limit = 1000): Promise<{ events: SessionEvent[]; next_since: number }> {
    return this.getJson(`/sessions/${sessionId}/events?since=${since}&limit=${limit}`);
  }

  stage(sessionId: string): Promise<StageSnapshot> {
    return this.getJson(`/sessions/${sessionId}/stage`);
  }

  searchEntities(type: string, q: string): Promise<{ entities: GameEntity[] }> {
    return this.getJson(`/corpus/entities?type=${encodeURIComponent(type)}&q=${encodeURIComponent(q)}`);
  }

  annotationSchema(): Promise<AnnotationSchema> {
    return this.getJson("/annotations/schema");
  }

  annotations(sessionId: string, annotator?: string): Promise<{ annotations: AnnotationRecord[] }> {
    const suffix = annotator ? `?annotator=${encodeURIComponent(annotator)}` : "";
    return this.getJson(`/sessions/${sessionId}/annotations${suffix}`);
  }

  sendFeedback(suggestionId: string, action: "accept" | "dismiss"): Promise<{ ok: boolean }> {
    return this.postJson(`/suggestions/${encodeURIComponent(suggestionId)}/feedback`, { action });
  }

  submitAnnotation(record: AnnotationRecord): Promise<{ ok: boolean }> {
    return this.postJson("/annotations", record);
  }
}

// Minimal structural WebSocket type so the stream can be driven by a fake in tests.
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamCallbacks {
  onEvent: (event: SessionEvent) => void;
  onErrorFrame?: (frame: { code: number; detail: string }) => void;
  onStatus?: (connected: boolean) => void;
}

export class EventStream {
  lastSeq = 0;
  private socket: SocketLike | null = null;
  private closed = false;
  private reconnectDelayMs = 500;

  constructor(
    private readonly wsBase: string,
    private readonly sessionId: string,
    private readonly callbacks: StreamCallbacks,
    private readonly socketFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike,
    private readonly scheduler: (fn: () => void, ms: number) => void = (fn, ms) => setTimeout(fn, ms),
  ) {}

  connect(): void {
    if (this.closed) return;
    const url = `${this.wsBase}/sessions/${this.sessionId}/stream?since=${this.lastSeq}`;
    const socket = this.socketFactory(url);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectDelayMs = 500;
      this.callbacks.onStatus?.(true);
    };
    socket.onmessage = (message) => this.handleFrame(JSON.parse(message.data));
    socket.onclose = () => {
      this.callbacks.onStatus?.(false);
      if (!this.closed) {
        this.scheduler(() => this.connect(), this.reconnectDelayMs);
        this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 10_000);
      }
    };
  }

  private handleFrame(frame: Record<string, unknown>): void {
    if (frame.type === "error" && typeof frame.code === "number") {
      this.callbacks.onErrorFrame?.(frame as unknown as { code: number; detail: string });
      return;
    }
    const event = frame as unknown as SessionEvent;
    if (typeof event.seq !== "number" || event.seq <= this.lastSeq) return;
    this.lastSeq = event.seq;
    this.callbacks.onEvent(event);
  }

  sendTextInterval(text: string, startSeconds: number): void {
    this.socket?.send(JSON.stringify({ type: "text_interval", text, start_seconds: startSeconds }));
  }

  sendAudioInterval(base64Pcm: string, startSeconds: number): void {
    this.socket?.send(JSON.stringify({ type: "audio", data: base64Pcm, start_seconds: startSeconds }));
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
