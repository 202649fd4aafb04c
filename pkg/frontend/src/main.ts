/** DOM wiring: sliders and canvas against a running render service. */

import { ServiceClient } from "./client.js";
import { ViewerCore } from "./core.js";
import { activePasses, ControlState } from "./state.js";
import { StreamPlayer } from "./stream.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function hexToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [((v >> 16) & 255) / 255, ((v >> 8) & 255) / 255, (v & 255) / 255];
}

export function boot(): void {
  const img = el<HTMLImageElement>("frame");
  const status = el<HTMLSpanElement>("status");
  const frameIdLabel = el<HTMLSpanElement>("frame-id");
  const errorBox = el<HTMLDivElement>("error");
  const presetSelect = el<HTMLSelectElement>("style-preset");

  const client = new ServiceClient(
    (el<HTMLInputElement>("service-url") as HTMLInputElement).value || "http://127.0.0.1:8313",
  );
  const core = new ViewerCore(client, {
    display(frame) {
      const old = img.src;
      img.src = frame.pngBlobUrl;
      frameIdLabel.textContent = String(frame.frameId);
      if (old.startsWith("blob:")) URL.revokeObjectURL(old);
    },
    status(text) {
      status.textContent = text;
    },
    fieldError(field, message) {
      errorBox.textContent = message ? `${field ?? "request"}: ${message}` : "";
    },
    presets(names) {
      presetSelect.innerHTML = "<option value=''>none</option>"
        + names.map((n) => `<option>${n}</option>`).join("");
    },
  });

  const bindSlider = (id: string, apply: (v: number) => Partial<ControlState>) => {
    const input = el<HTMLInputElement>(id);
    input.addEventListener("input", () => core.update(apply(Number(input.value))));
  };
  const bindToggle = (id: string, pass: keyof ControlState["passes"]) => {
    const input = el<HTMLInputElement>(id);
    input.addEventListener("change", () =>
      core.update({ passes: { ...core.state.passes, [pass]: input.checked } }));
  };

  bindSlider("smog-density", (v) => ({ smogDensity: v }));
  bindSlider("water-height", (v) => ({ waterHeight: v }));
  bindSlider("wave-steepness", (v) => ({ waveSteepness: v }));
  bindSlider("snow-thickness", (v) => ({ snowThickness: v }));
  bindToggle("pass-smog", "smog");
  bindToggle("pass-flood", "flood");
  bindToggle("pass-snow", "snow");
  bindToggle("pass-style", "style");
  el<HTMLInputElement>("smog-color").addEventListener("input", (e) =>
    core.update({ smogColor: hexToRgb((e.target as HTMLInputElement).value) }));
  presetSelect.addEventListener("change", () =>
    core.update({ stylePreset: presetSelect.value || null,
                  passes: { ...core.state.passes, style: !!presetSelect.value } }));

  // orbit: drag rotates, wheel zooms
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  img.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
  });
  window.addEventListener("mouseup", () => (dragging = false));
  window.addEventListener("mousemove", (e) => {
    if (!dragging) return;
    core.orbitBy((e.clientX - lastX) * 0.4, (e.clientY - lastY) * 0.3);
    lastX = e.clientX;
    lastY = e.clientY;
  });
  img.addEventListener("wheel", (e) => {
    e.preventDefault();
    core.orbitBy(0, 0, e.deltaY > 0 ? 1.1 : 1 / 1.1);
  });

  // orbit playback over the server-sent frame stream, sharing the frame gate
  const baseUrl = () => el<HTMLInputElement>("service-url").value || "http://127.0.0.1:8313";
  const playButton = el<HTMLButtonElement>("play-orbit");
  const player = new StreamPlayer(
    baseUrl(),
    (frame) => {
      img.src = `data:image/png;base64,${frame.png_b64}`;
      frameIdLabel.textContent = String(frame.frame_id);
    },
    (reason) => {
      playButton.textContent = "play orbit";
      if (reason === "error") errorBox.textContent = "stream dropped";
    },
    undefined,
    core.gate,
  );
  playButton.addEventListener("click", () => {
    if (player.playing) {
      player.stop();
    } else {
      playButton.textContent = "stop";
      player.play({ frames: 24, passes: activePasses(core.state), width: 640, height: 360 });
    }
  });

  el<HTMLButtonElement>("connect").addEventListener("click", async () => {
    if (await core.connect()) core.update({});
  });
  el<HTMLButtonElement>("load-scene").addEventListener("click", async () => {
    try {
      const summary = await client.loadScene(el<HTMLInputElement>("scene-path").value);
      status.textContent = `scene loaded: ${summary.count} splats`;
      core.update({});
    } catch (e) {
      errorBox.textContent = String(e);
    }
  });
}

boot();
