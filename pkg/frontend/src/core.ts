/** Headless viewer logic: control changes -> debounced params + render,
 * stale-frame suppression, connection status. The DOM layer only feeds
 * events in and paints what comes out.
 */

import { LatestWins, Scheduler } from "./debounce.js";
import { FrameGate } from "./frameGate.js";
import {
  activePasses,
  cameraFromOrbit,
  clampControlState,
  ControlState,
  defaultControlState,
  toParamsPayload,
} from "./state.js";
import { FrameResult, ServiceLike } from "./types.js";

export interface ViewerHooks {
  display(frame: FrameResult): void;
  status(text: string): void;
  fieldError(field: string | null, message: string | null): void;
  presets(names: string[]): void;
  now?: () => number;
  schedule?: Scheduler;
}

export class ViewerCore {
  state: ControlState;
  readonly gate = new FrameGate();
  private readonly sender: LatestWins<ControlState>;
  private inflight = 0;
  private time = 0;
  connected = false;

  constructor(
    private readonly client: ServiceLike,
    private readonly hooks: ViewerHooks,
    private readonly width = 640,
    private readonly height = 360,
    intervalMs = 100,
  ) {
    this.state = defaultControlState();
    this.sender = new LatestWins(
      (s) => void this.submit(s),
      intervalMs,
      hooks.now,
      hooks.schedule,
    );
  }

  async connect(retries = 3, retryDelayMs = 500): Promise<boolean> {
    for (let attempt = 0; attempt <= retries; attempt++) {
      try {
        const health = await this.client.health();
        const caps = await this.client.getParams();
        this.hooks.presets(caps.style_presets);
        this.connected = true;
        this.hooks.status(health.scene_loaded ? "connected" : "connected (no scene)");
        return true;
      } catch {
        this.connected = false;
        this.hooks.status(`connection failed, retry ${attempt + 1}/${retries}`);
        if (attempt < retries) {
          await new Promise((r) => (this.hooks.schedule ?? setTimeout)(() => r(null), retryDelayMs));
        }
      }
    }
    this.hooks.status("disconnected");
    return false;
  }

  /** Apply a partial control update; network traffic is debounced. */
  update(partial: Partial<ControlState>): void {
    this.state = clampControlState({ ...this.state, ...partial });
    this.sender.push(this.state);
  }

  orbitBy(dAzimuthDeg: number, dElevationDeg: number, radiusFactor = 1): void {
    const o = this.state.orbit;
    this.update({
      orbit: {
        ...o,
        azimuthDeg: o.azimuthDeg + dAzimuthDeg,
        elevationDeg: o.elevationDeg + dElevationDeg,
        radius: o.radius * radiusFactor,
      },
    });
  }

  advanceTime(dt: number): void {
    this.time += dt;
  }

  /** One params + render round trip; stale responses are dropped. */
  private async submit(s: ControlState): Promise<void> {
    if (!this.connected) return;
    this.inflight += 1;
    try {
      const ack = await this.client.setParams(toParamsPayload(s));
      if (!("ok" in ack) || ack.ok !== true) {
        const err = ack as { field?: string; error: string };
        this.hooks.fieldError(err.field ?? null, err.error);
        return; // keep the last good frame
      }
      this.hooks.fieldError(null, null);
      const frame = await this.client.render({
        camera: cameraFromOrbit(s.orbit, this.width, this.height),
        time: this.time,
        passes: activePasses(s),
        width: this.width,
        height: this.height,
      });
      if (this.gate.accept(frame.frameId)) {
        this.hooks.display(frame);
      }
    } catch (e) {
      this.hooks.status(`request failed: ${e}`);
    } finally {
      this.inflight -= 1;
    }
  }

  get pendingRequests(): number {
    return this.inflight;
  }
}
