/** fetch-based client for the render service. */

import { Capabilities, FrameResult, ParamsPayload, RenderRequest, ServiceLike } from "./types.js";

export class ServiceClient implements ServiceLike {
  constructor(private readonly base: string) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async health(): Promise<{ scene_loaded: boolean }> {
    const r = await fetch(this.url("/health"));
    if (!r.ok) throw new Error(`health ${r.status}`);
    return r.json();
  }

  async getParams(): Promise<Capabilities> {
    const r = await fetch(this.url("/params"));
    if (!r.ok) throw new Error(`params ${r.status}`);
    return r.json();
  }

  async setParams(payload: ParamsPayload) {
    const r = await fetch(this.url("/params"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (r.ok) return { ok: true as const };
    const body = await r.json().catch(() => ({ error: `HTTP ${r.status}` }));
    return { ok: false as const, field: body.field, error: body.error ?? `HTTP ${r.status}` };
  }

  async render(req: RenderRequest): Promise<FrameResult> {
    const r = await fetch(this.url("/render"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!r.ok) {
      const body = await r.json().catch(() => ({}));
      throw new Error(body.error ?? `render ${r.status}`);
    }
    const blob = await r.blob();
    return {
      frameId: Number(r.headers.get("X-Frame-Id") ?? "0"),
      pngBlobUrl: URL.createObjectURL(blob),
      timings: JSON.parse(r.headers.get("X-Timings") ?? "{}"),
    };
  }

  async loadScene(path: string): Promise<{ count: number }> {
    const r = await fetch(this.url("/scene"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ path }),
    });
    if (!r.ok) throw new Error((await r.json()).error ?? `scene ${r.status}`);
    return r.json();
  }
}
