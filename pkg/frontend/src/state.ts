/** Control state, range clamping, and the pure mapping to wire payloads. */

import { CameraPayload, ParamsPayload } from "./types.js";

export interface OrbitState {
  azimuthDeg: number;     // wraps mod 360
  elevationDeg: number;   // clamped to +-89
  radius: number;
  center: [number, number, number];
}

export interface ControlState {
  smogDensity: number;          // 0 .. 0.5
  smogColor: [number, number, number];
  waterHeight: number;          // offset of o_w along n_w, -2 .. 2
  waveSteepness: number;        // master 0 .. 1, scales the base wave set
  snowThickness: number;        // 0 .. 0.5
  stylePreset: string | null;
  passes: { style: boolean; snow: boolean; flood: boolean; smog: boolean };
  orbit: OrbitState;
}

export const LIMITS = {
  smogDensity: [0, 0.5] as const,
  waterHeight: [-2, 2] as const,
  waveSteepness: [0, 1] as const,
  snowThickness: [0, 0.5] as const,
  elevationDeg: [-89, 89] as const,
  minRadius: 0.5,
};

// fixed base wave set; the master steepness slider scales it uniformly
const BASE_WAVES = [
  { direction: [1, 0.2], wavelength: 3.0, steepness: 0.5 },
  { direction: [-0.4, 1], wavelength: 1.4, steepness: 0.35 },
];

export function defaultControlState(center: [number, number, number] = [0, 0, 0],
                                    radius = 10): ControlState {
  return {
    smogDensity: 0,
    smogColor: [0.7, 0.7, 0.7],
    waterHeight: 0,
    waveSteepness: 0.4,
    snowThickness: 0,
    stylePreset: null,
    passes: { style: false, snow: false, flood: false, smog: false },
    orbit: { azimuthDeg: 0, elevationDeg: 20, radius, center },
  };
}

const clampNum = (v: number, lo: number, hi: number) =>
  Math.min(hi, Math.max(lo, v));

export function clampControlState(s: ControlState): ControlState {
  return {
    ...s,
    smogDensity: clampNum(s.smogDensity, ...LIMITS.smogDensity),
    smogColor: s.smogColor.map((c) => clampNum(c, 0, 1)) as [number, number, number],
    waterHeight: clampNum(s.waterHeight, ...LIMITS.waterHeight),
    waveSteepness: clampNum(s.waveSteepness, ...LIMITS.waveSteepness),
    snowThickness: clampNum(s.snowThickness, ...LIMITS.snowThickness),
    orbit: {
      ...s.orbit,
      elevationDeg: clampNum(s.orbit.elevationDeg, ...LIMITS.elevationDeg),
      radius: Math.max(s.orbit.radius, LIMITS.minRadius),
      azimuthDeg: ((s.orbit.azimuthDeg % 360) + 360) % 360,
    },
  };
}

/** Pure mapping: control state -> set_params body. */
export function toParamsPayload(s: ControlState): ParamsPayload {
  const payload: ParamsPayload = { climate: {} };
  payload.climate.smog = s.passes.smog
    ? { density: s.smogDensity, color: [...s.smogColor] }
    : null;
  payload.climate.water = s.passes.flood
    ? {
        origin: [0, s.waterHeight, 0],
        normal: [0, 1, 0],
        waves: BASE_WAVES.map((w) => ({
          direction: [...w.direction],
          wavelength: w.wavelength,
          steepness: w.steepness * s.waveSteepness,
        })),
      }
    : null;
  payload.climate.snow = s.passes.snow
    ? { thickness: s.snowThickness, grid_spacing: 0.4 }
    : null;
  if (s.passes.style && s.stylePreset) {
    payload.style_preset = s.stylePreset;
  } else {
    payload.clear_style = true;
  }
  return payload;
}

/** Inverse of toParamsPayload for the fields the payload carries. */
export function stateFromPayload(payload: ParamsPayload, base: ControlState): ControlState {
  const s = structuredClone(base);
  const c = payload.climate ?? {};
  s.passes.smog = !!c.smog;
  if (c.smog) {
    s.smogDensity = c.smog.density;
    s.smogColor = [...c.smog.color] as [number, number, number];
  }
  s.passes.flood = !!c.water;
  if (c.water) {
    s.waterHeight = c.water.origin[1];
    s.waveSteepness = c.water.waves.length
      ? c.water.waves[0].steepness / BASE_WAVES[0].steepness
      : 0;
  }
  s.passes.snow = !!c.snow;
  if (c.snow) s.snowThickness = c.snow.thickness;
  s.stylePreset = payload.style_preset ?? (payload.clear_style ? null : s.stylePreset);
  s.passes.style = !!payload.style_preset;
  return s;
}

export function activePasses(s: ControlState): string[] {
  const order: (keyof ControlState["passes"])[] = ["style", "snow", "flood", "smog"];
  return order.filter((p) => s.passes[p]);
}

// ---------------------------------------------------------------- orbit camera

type V3 = [number, number, number];

const sub = (a: V3, b: V3): V3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const cross = (a: V3, b: V3): V3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const norm = (a: V3) => Math.hypot(a[0], a[1], a[2]);
const scale = (a: V3, s: number): V3 => [a[0] * s, a[1] * s, a[2] * s];
const normalize = (a: V3): V3 => scale(a, 1 / norm(a));

export function orbitEye(o: OrbitState): V3 {
  const az = (o.azimuthDeg * Math.PI) / 180;
  const el = (o.elevationDeg * Math.PI) / 180;
  return [
    o.center[0] + o.radius * Math.cos(el) * Math.cos(az),
    o.center[1] + o.radius * Math.sin(el),
    o.center[2] + o.radius * Math.cos(el) * Math.sin(az),
  ];
}

/** World-to-view camera looking from the orbit position at its center. */
export function cameraFromOrbit(o: OrbitState, width: number, height: number,
                                fovDeg = 60, near = 0.01, far?: number): CameraPayload {
  const eye = orbitEye(o);
  const fwd = normalize(sub(o.center, eye));
  let right = cross(fwd, [0, 1, 0]);
  if (norm(right) < 1e-9) right = cross(fwd, [1, 0, 0]);
  right = normalize(right);
  const down = cross(fwd, right);
  const rows = [right, down, fwd];
  const translation = rows.map(
    (r) => -(r[0] * eye[0] + r[1] * eye[1] + r[2] * eye[2]),
  );
  const f = (0.5 * width) / Math.tan((fovDeg * Math.PI) / 360);
  return {
    rotation: rows.flat(),
    translation,
    focal: [f, f],
    principal_point: [width / 2, height / 2],
    width,
    height,
    near,
    far: far ?? Math.max(100, 6 * o.radius),
  };
}
