/** Server-sent frame stream consumption with stale-frame suppression.
 *
 * The service's /stream endpoint emits `data: {...}` events carrying a
 * frame id and a base64 PNG. Event delivery order is not trusted:
 * frames pass through the same monotonic gate as single renders.
 */

import { FrameGate } from "./frameGate.js";

export interface StreamEventPayload {
  frame_id: number;
  index: number;
  png_b64: string;
  params: Record<string, unknown>;
}

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamOptions {
  frames?: number;
  passes?: string[];
  width?: number;
  height?: number;
}

export class StreamPlayer {
  private source: EventSourceLike | null = null;

  constructor(
    private readonly base: string,
    private readonly onFrame: (frame: StreamEventPayload) => void,
    private readonly onEnd: (reason: string) => void,
    private readonly factory: EventSourceFactory =
      (url) => new EventSource(url) as unknown as EventSourceLike,
    // shared with the render path: displayed ids are globally monotone
    private readonly gate: FrameGate = new FrameGate(),
  ) {}

  get playing(): boolean {
    return this.source !== null;
  }

  play(opts: StreamOptions = {}): void {
    this.stop("restart");
    const params = new URLSearchParams({
      frames: String(opts.frames ?? 24),
      passes: (opts.passes ?? []).join(","),
      width: String(opts.width ?? 640),
      height: String(opts.height ?? 360),
    });
    const expected = opts.frames ?? 24;
    let seen = 0;
    const src = this.factory(`${this.base.replace(/\/$/, "")}/stream?${params}`);
    this.source = src;
    src.onmessage = (ev) => {
      let payload: StreamEventPayload;
      try {
        payload = JSON.parse(ev.data);
      } catch {
        return;
      }
      if (!this.gate.accept(payload.frame_id)) return;
      this.onFrame(payload);
      seen += 1;
      if (seen >= expected) this.stop("complete");
    };
    src.onerror = () => this.stop("error");
  }

  stop(reason = "stopped"): void {
    if (this.source) {
      this.source.close();
      this.source = null;
      this.onEnd(reason);
    }
  }
}
