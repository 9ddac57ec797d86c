/** View state for the app: one scene, one conversation, one canvas viewport.
 * All mutation goes through methods so the invariants hold:
 *   - transcript is append-only,
 *   - highlighted ids are always a subset of the loaded payload's ids,
 *   - at most one chat request is in flight. */

import { ApiClient, ApiError, ChatResponseBody } from './api.js';
import {
  PayloadError,
  RenderPayload,
  Viewport,
  defaultViewport,
  panBy,
  parseRenderPayload,
  payloadIds,
  zoomAt,
} from './render.js';

export type Role = 'user' | 'assistant';

export interface TranscriptEntry {
  role: Role;
  text: string;
  response?: ChatResponseBody;
}

/** Human-readable form of a structured answer. */
export function formatAnswer(response: ChatResponseBody): string {
  const a = response.answer;
  if (Array.isArray(a)) {
    return a.length === 0 ? 'no matching objects' : `objects ${a.join(', ')}`;
  }
  if (typeof a === 'number') return `${a} m`;
  if (typeof a === 'string' && a.length > 0) return a;
  return response.explanation;
}

type Listener = () => void;

export class AppStore {
  sceneToken: string | null = null;
  payload: RenderPayload | null = null;
  transcript: TranscriptEntry[] = [];
  highlighted: Set<number> = new Set();
  selected: number | null = null;
  hovered: number | null = null;
  viewport: Viewport = defaultViewport();
  conversationId: string | null = null;
  /** Scene-level failure shown as the banner; null when the scene is healthy. */
  banner: string | null = null;
  /** Last failed chat message, kept so the user can retry it. */
  sendError: string | null = null;
  draft = '';
  busy = false;

  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Load a scene's render payload; a bad payload or backend error becomes
   * the banner instead of an exception. */
  async loadScene(sceneToken: string): Promise<void> {
    this.sceneToken = sceneToken;
    this.payload = null;
    this.transcript = [];
    this.highlighted = new Set();
    this.selected = null;
    this.hovered = null;
    this.conversationId = null;
    this.banner = null;
    this.sendError = null;
    this.viewport = defaultViewport();
    this.notify();
    try {
      const raw = await this.api.fetchRender(sceneToken);
      this.payload = parseRenderPayload(raw);
    } catch (err) {
      if (err instanceof PayloadError) {
        this.banner = `scene ${sceneToken} sent an unusable map: ${err.message}`;
      } else if (err instanceof ApiError) {
        this.banner = `scene ${sceneToken} failed to load: ${err.message}`;
      } else {
        this.banner = `scene ${sceneToken} failed to load`;
      }
    }
    this.notify();
  }

  /** Send one chat message. Returns false without side effects when a send
   * is already in flight or there is nothing to send. */
  async send(message: string): Promise<boolean> {
    const text = message.trim();
    if (this.busy || !this.sceneToken || this.payload === null || text === '') return false;
    this.busy = true;
    this.draft = text;
    this.sendError = null;
    this.notify();
    try {
      const result = await this.api.chat({
        scene_token: this.sceneToken,
        message: text,
        ...(this.conversationId ? { conversation_id: this.conversationId } : {}),
      });
      this.conversationId = result.conversation_id;
      this.transcript.push({ role: 'user', text });
      this.transcript.push({
        role: 'assistant',
        text: formatAnswer(result.response),
        response: result.response,
      });
      const known = payloadIds(this.payload);
      this.highlighted = new Set(
        (result.response.referenced_object_ids ?? []).filter((id) => known.has(id)),
      );
      this.draft = '';
      return true;
    } catch (err) {
      // transcript stays unchanged; the draft survives for retry
      this.sendError = err instanceof Error ? err.message : 'request failed';
      return false;
    } finally {
      this.busy = false;
      this.notify();
    }
  }

  retry(): Promise<boolean> {
    return this.send(this.draft);
  }

  selectObject(id: number | null): void {
    this.selected = id;
    this.notify();
  }

  hoverObject(id: number | null): void {
    if (id !== this.hovered) {
      this.hovered = id;
      this.notify();
    }
  }

  pan(dx: number, dy: number): void {
    this.viewport = panBy(this.viewport, dx, dy);
    this.notify();
  }

  zoom(factor: number, cx: number, cy: number): void {
    this.viewport = zoomAt(this.viewport, factor, cx, cy);
    this.notify();
  }
}
