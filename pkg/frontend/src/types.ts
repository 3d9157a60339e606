/** Shared wire types for the scribbletex editing service. */

/** RGB triple, 0-255 per channel. */
export type Rgb = [number, number, number];

/** A brush stroke painted on one rendered view, in pixel coordinates. */
export interface Stroke {
  view_id: string;
  color: Rgb;
  radius: number;
  points: [number, number][];
}

export interface Brush {
  color: Rgb;
  radius: number;
}

/** Pipeline states a region moves through; the server is authoritative. */
export type RegionState =
  | "scribbled"
  | "refined"
  | "intent_predicted"
  | "patch_chosen"
  | "stamped"
  | "integrated";

export interface RegionInfo {
  id: string;
  state: RegionState;
}

export interface IntentPrediction {
  semantic: string;
  rationale: string;
  rank: number;
}

export interface SessionInfo {
  id: string;
  regions: Record<string, RegionState>;
  states: RegionState[];
  views: string[];
  config: Record<string, unknown>;
}

export interface ProgressEvent {
  index: number;
  region: string | null;
  stage: string;
  status: "started" | "finished";
  data: Record<string, unknown>;
}

export interface StageEntry {
  stage: string;
  seconds: number;
  backend_calls: number;
}

export interface RunReport {
  region: string;
  stages: StageEntry[];
  chosen_intent: IntentPrediction;
  backend_calls: Record<string, number>;
  atlas_url: string;
}
