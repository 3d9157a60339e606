/** Client-side editor state.
 *
 * Holds exactly what the browser needs between server round-trips: the open
 * session, the active view, the brush, strokes being painted right now, the
 * region list mirrored from the server, the chosen intent rank, and the
 * progress event log.  The UI performs no pipeline math — every mask and
 * image it shows comes back from server artifacts; the only optimistic
 * state is the in-progress brush stroke.
 */

import type {
  Brush,
  IntentPrediction,
  ProgressEvent,
  RegionInfo,
  RegionState,
  Stroke,
} from "./types.js";

export class EditorState {
  readonly sessionId: string;
  readonly views: string[];
  activeView: string;
  brush: Brush = { color: [255, 40, 40], radius: 8 };
  selectedIntentRank: number | null = null;

  private pending: Stroke[] = [];
  private current: Stroke | null = null;
  private regionStates = new Map<string, RegionState>();
  private intentsByRegion = new Map<string, IntentPrediction[]>();
  readonly progressLog: ProgressEvent[] = [];

  constructor(sessionId: string, views: string[]) {
    if (views.length === 0) throw new Error("session has no views");
    this.sessionId = sessionId;
    this.views = [...views];
    this.activeView = views[0];
  }

  /** Switching views drops unsubmitted strokes: strokes always reference
   * the view they were painted on, and submission is per view. */
  setActiveView(view: string): void {
    if (!this.views.includes(view)) throw new Error(`unknown view ${view}`);
    if (view !== this.activeView) {
      this.pending = [];
      this.current = null;
      this.activeView = view;
    }
  }

  setBrush(brush: Brush): void {
    if (brush.radius < 1) throw new Error("brush radius must be >= 1");
    this.brush = { color: [...brush.color] as Brush["color"], radius: brush.radius };
  }

  beginStroke(x: number, y: number): void {
    if (this.current) throw new Error("a stroke is already in progress");
    this.current = {
      view_id: this.activeView,
      color: [...this.brush.color] as Stroke["color"],
      radius: this.brush.radius,
      points: [[x, y]],
    };
  }

  extendStroke(x: number, y: number): void {
    if (!this.current) throw new Error("no stroke in progress");
    this.current.points.push([x, y]);
  }

  endStroke(): void {
    if (!this.current) throw new Error("no stroke in progress");
    this.pending.push(this.current);
    this.current = null;
  }

  /** Strokes ready to submit; all reference the active view. */
  get pendingStrokes(): Stroke[] {
    return this.pending.map((s) => ({ ...s, points: [...s.points] }));
  }

  clearPending(): void {
    this.pending = [];
  }

  /** Mirror the server's region map (the server is authoritative). */
  syncRegions(regions: Record<string, RegionState>): void {
    this.regionStates = new Map(Object.entries(regions));
  }

  setRegionState(id: string, state: RegionState): void {
    this.regionStates.set(id, state);
  }

  get regions(): RegionInfo[] {
    return [...this.regionStates.entries()]
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([id, state]) => ({ id, state }));
  }

  setIntents(region: string, intents: IntentPrediction[]): void {
    const sorted = [...intents].sort((a, b) => a.rank - b.rank);
    this.intentsByRegion.set(region, sorted);
  }

  intents(region: string): IntentPrediction[] {
    return this.intentsByRegion.get(region) ?? [];
  }

  selectIntentRank(region: string, rank: number): void {
    const known = this.intents(region);
    if (!known.some((p) => p.rank === rank)) {
      throw new Error(`region ${region} has no intent with rank ${rank}`);
    }
    this.selectedIntentRank = rank;
  }

  /** Rank sent with /run: the explicit choice, or rank 1 by default. */
  get effectiveIntentRank(): number {
    return this.selectedIntentRank ?? 1;
  }

  appendEvents(events: ProgressEvent[]): void {
    const seen = new Set(this.progressLog.map((e) => e.index));
    for (const ev of events) {
      if (!seen.has(ev.index)) {
        this.progressLog.push(ev);
        seen.add(ev.index);
      }
    }
    this.progressLog.sort((a, b) => a.index - b.index);
  }

  /** The stage currently running, if the log ends on an unfinished stage. */
  get activeStage(): string | null {
    const last = this.progressLog[this.progressLog.length - 1];
    return last && last.status === "started" ? last.stage : null;
  }
}
