/** Wire types shared with the render service (JSON over HTTP). */

export interface CameraPayload {
  rotation: number[];          // 9 floats, row-major world-to-view
  translation: number[];       // 3
  focal: number[];             // fx, fy in pixels
  principal_point: number[];   // cx, cy
  width: number;
  height: number;
  near: number;
  far: number;
}

export interface ParamsPayload {
  climate: {
    smog?: { density: number; color: number[] } | null;
    water?: {
      origin: number[];
      normal: number[];
      waves: { direction: number[]; wavelength: number; steepness: number }[];
    } | null;
    snow?: { thickness: number; grid_spacing: number } | null;
  };
  style_preset?: string;
  clear_style?: boolean;
}

export interface RenderRequest {
  camera: CameraPayload;
  time: number;
  passes: string[];
  width: number;
  height: number;
}

export interface FrameResult {
  frameId: number;
  pngBlobUrl: string;
  timings: Record<string, number>;
}

export interface Capabilities {
  effective: Record<string, unknown>;
  style_active: boolean;
  style_presets: string[];
}

/** Narrow client surface the viewer core depends on; mocked in tests. */
export interface ServiceLike {
  health(): Promise<{ scene_loaded: boolean }>;
  getParams(): Promise<Capabilities>;
  setParams(payload: ParamsPayload): Promise<{ ok: true } | { ok: false; field?: string; error: string }>;
  render(req: RenderRequest): Promise<FrameResult>;
}
