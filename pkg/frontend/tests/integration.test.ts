import { describe, expect, it } from "vitest";
import { ViewerCore, ViewerHooks } from "../src/core.js";
import { FrameResult, ParamsPayload, RenderRequest, ServiceLike } from "../src/types.js";

/** In-memory stand-in for the render service. */
class MockService implements ServiceLike {
  effective: ParamsPayload | null = null;
  paramsCalls = 0;
  renderCalls = 0;
  rejectField: string | null = null;
  frameIds: number[] | null = null;   // override the id sequence
  private nextId = 0;

  async health() {
    return { scene_loaded: true };
  }

  async getParams() {
    return { effective: {}, style_active: false, style_presets: ["warm", "dusk"] };
  }

  async setParams(payload: ParamsPayload) {
    this.paramsCalls += 1;
    if (this.rejectField) {
      return { ok: false as const, field: this.rejectField, error: "out of range" };
    }
    this.effective = JSON.parse(JSON.stringify(payload));
    return { ok: true as const };
  }

  async render(_req: RenderRequest): Promise<FrameResult> {
    this.renderCalls += 1;
    const id = this.frameIds ? this.frameIds.shift()! : ++this.nextId;
    return { frameId: id, pngBlobUrl: `blob:frame-${id}`, timings: {} };
  }
}

function makeHarness(intervalMs = 100) {
  let t = 0;
  const queue: { at: number; fn: () => void }[] = [];
  const displayed: FrameResult[] = [];
  const errors: (string | null)[] = [];
  const mock = new MockService();
  const hooks: ViewerHooks = {
    display: (f) => displayed.push(f),
    status: () => {},
    fieldError: (_field, msg) => errors.push(msg),
    presets: () => {},
    now: () => t,
    schedule: (fn, ms) => queue.push({ at: t + ms, fn }),
  };
  const core = new ViewerCore(mock, hooks, 320, 180, intervalMs);
  const flush = async () => {
    for (let guard = 0; guard < 200; guard++) {
      queue.sort((a, b) => a.at - b.at);
      const next = queue.shift();
      if (!next) break;
      t = Math.max(t, next.at);
      next.fn();
      // let the async submit settle before firing the next timer
      for (let i = 0; i < 10; i++) await Promise.resolve();
    }
    for (let i = 0; i < 10; i++) await Promise.resolve();
  };
  const drag = (values: number[], stepMs: number, apply: (v: number) => void) => {
    for (const v of values) {
      apply(v);
      t += stepMs;
    }
  };
  return { core, mock, displayed, errors, flush, drag };
}

describe("viewer against a mock service", () => {
  it("slider drag lands on the final value with bounded traffic", async () => {
    const { core, mock, displayed, flush, drag } = makeHarness();
    await core.connect();
    core.update({ passes: { ...core.state.passes, smog: true } });
    const values = Array.from({ length: 31 }, (_, i) => i / 100);
    drag(values, 10, (v) => core.update({ smogDensity: v }));
    await flush();
    expect(mock.effective?.climate.smog?.density).toBe(0.3);
    expect(mock.paramsCalls).toBeLessThanOrEqual(7);  // ~310 ms of drag, 100 ms debounce
    expect(displayed.length).toBeGreaterThan(0);
    expect(displayed[displayed.length - 1].frameId).toBe(mock.renderCalls);
  });

  it("toggling snow off excludes the pass from the next frame", async () => {
    const { core, mock, flush } = makeHarness();
    await core.connect();
    core.update({ passes: { ...core.state.passes, snow: true }, snowThickness: 0.2 });
    await flush();
    expect(mock.effective?.climate.snow?.thickness).toBe(0.2);
    core.update({ passes: { ...core.state.passes, snow: false } });
    await flush();
    expect(mock.effective?.climate.snow).toBeNull();
  });

  it("rejected params surface as an inline error and keep the last frame", async () => {
    const { core, mock, displayed, errors, flush } = makeHarness();
    await core.connect();
    core.update({ passes: { ...core.state.passes, smog: true }, smogDensity: 0.2 });
    await flush();
    const shown = displayed.length;
    mock.rejectField = "smog.density";
    core.update({ smogDensity: 0.4 });
    await flush();
    expect(errors[errors.length - 1]).toBe("out of range");
    expect(displayed.length).toBe(shown);  // last good frame retained
  });

  it("stale frame ids are never displayed", async () => {
    const { core, mock, displayed, flush } = makeHarness();
    await core.connect();
    mock.frameIds = [5, 3, 8];
    core.update({ smogDensity: 0.1 });
    await flush();
    core.update({ smogDensity: 0.2 });
    await flush();
    core.update({ smogDensity: 0.3 });
    await flush();
    expect(displayed.map((f) => f.frameId)).toEqual([5, 8]);
    const ids = displayed.map((f) => f.frameId);
    expect([...ids].sort((a, b) => a - b)).toEqual(ids);
  });

  it("connect retries with visible status and reports presets", async () => {
    let t = 0;
    const queue: { at: number; fn: () => void }[] = [];
    const statuses: string[] = [];
    let presets: string[] = [];
    const failing = new MockService();
    let failures = 2;
    const origHealth = failing.health.bind(failing);
    failing.health = async () => {
      if (failures-- > 0) throw new Error("down");
      return origHealth();
    };
    const core = new ViewerCore(failing, {
      display: () => {},
      status: (s) => statuses.push(s),
      fieldError: () => {},
      presets: (p) => { presets = p; },
      now: () => t,
      schedule: (fn, ms) => queue.push({ at: t + ms, fn }),
    });
    const done = core.connect(3, 10);
    for (let guard = 0; guard < 200; guard++) {
      for (let i = 0; i < 5; i++) await Promise.resolve();
      const next = queue.shift();
      if (next) {
        t = next.at;
        next.fn();
      }
      if (statuses[statuses.length - 1] === "connected") break;
    }
    expect(await done).toBe(true);
    expect(statuses.some((s) => s.includes("retry"))).toBe(true);
    expect(statuses[statuses.length - 1]).toBe("connected");
    expect(presets).toEqual(["warm", "dusk"]);
  });
});
