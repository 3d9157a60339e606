/** Typed client for the scribbletex HTTP service.
 *
 * Every call maps one-to-one onto a service endpoint; the client performs
 * no pipeline math and talks to nothing but the service.
 */

import { serializeStrokes } from "./stroke.js";
import type {
  IntentPrediction,
  ProgressEvent,
  RunReport,
  SessionInfo,
  Stroke,
} from "./types.js";
import { parseEventStream, toProgressEvents } from "./sse.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: string,
  ) {
    super(`HTTP ${status}: ${body}`);
  }
}

export class StudioClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    return (await (await this.request(path, init)).json()) as T;
  }

  async createSession(
    mesh: Uint8Array,
    atlas: Uint8Array,
    config?: Record<string, unknown>,
  ): Promise<{ id: string; views: string[] }> {
    const form = new FormData();
    form.append("mesh", new Blob([mesh as BlobPart]), "mesh.obj");
    form.append("atlas", new Blob([atlas as BlobPart]), "atlas.png");
    if (config) form.append("config", JSON.stringify(config));
    return this.json("/sessions", { method: "POST", body: form });
  }

  async getSession(id: string): Promise<SessionInfo> {
    return this.json(`/sessions/${id}`);
  }

  viewImageUrl(id: string, view: string, kind: "color" | "geometry"): string {
    return `${this.baseUrl}/sessions/${id}/views/${view}/${kind}.png`;
  }

  async viewImage(
    id: string,
    view: string,
    kind: "color" | "geometry",
  ): Promise<Uint8Array> {
    const resp = await this.request(`/sessions/${id}/views/${view}/${kind}.png`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async addRegions(
    id: string,
    strokes: Stroke[],
    hint?: string,
  ): Promise<string[]> {
    const body = await this.json<{ regions: string[] }>(
      `/sessions/${id}/regions`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: serializeStrokes(strokes, hint),
      },
    );
    return body.regions;
  }

  async refine(
    id: string,
    region: string,
  ): Promise<{ region: string; state: string; texels: number; mask_url: string }> {
    return this.json(`/sessions/${id}/regions/${region}/refine`, {
      method: "POST",
    });
  }

  async intents(id: string, region: string): Promise<IntentPrediction[]> {
    const body = await this.json<{ intents: IntentPrediction[] }>(
      `/sessions/${id}/regions/${region}/intents`,
    );
    return body.intents;
  }

  async run(
    id: string,
    region: string,
    intentRank?: number,
  ): Promise<RunReport> {
    return this.json(`/sessions/${id}/regions/${region}/run`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(intentRank ? { intent_rank: intentRank } : {}),
    });
  }

  async runMulti(
    id: string,
    regionIds: string[],
  ): Promise<Record<string, unknown>> {
    return this.json(`/sessions/${id}/run-multi`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ region_ids: regionIds }),
    });
  }

  async exportZip(id: string): Promise<Uint8Array> {
    const resp = await this.request(`/sessions/${id}/export`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async artifact(id: string, path: string): Promise<Uint8Array> {
    const resp = await this.request(`/sessions/${id}/artifacts/${path}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  eventsUrl(id: string): string {
    return `${this.baseUrl}/sessions/${id}/events`;
  }

  async events(id: string, lastEventId?: number): Promise<ProgressEvent[]> {
    const headers: Record<string, string> = {};
    if (lastEventId !== undefined) {
      headers["Last-Event-ID"] = String(lastEventId);
    }
    const resp = await this.request(`/sessions/${id}/events`, { headers });
    return toProgressEvents(parseEventStream(await resp.text()));
  }
}
