/** Server-sent events: wire parsing and a resumable progress feed.
 *
 * The service replays its persisted event log on every connection and
 * honors `Last-Event-ID`, which matches the browser EventSource reconnect
 * contract.  For non-browser environments (tests, scripting) the feed can
 * also pull the stream over plain fetch and parse it here.
 */

import type { ProgressEvent } from "./types.js";

export interface SseMessage {
  id?: string;
  event?: string;
  data: string;
}

/** Parse a complete text/event-stream body into messages. */
export function parseEventStream(text: string): SseMessage[] {
  const messages: SseMessage[] = [];
  for (const block of text.split(/\n\n+/)) {
    const msg: SseMessage = { data: "" };
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith(":") || line.trim() === "") continue;
      const colon = line.indexOf(":");
      const field = colon === -1 ? line : line.slice(0, colon);
      let value = colon === -1 ? "" : line.slice(colon + 1);
      if (value.startsWith(" ")) value = value.slice(1);
      if (field === "data") dataLines.push(value);
      else if (field === "id") msg.id = value;
      else if (field === "event") msg.event = value;
    }
    if (dataLines.length > 0) {
      msg.data = dataLines.join("\n");
      messages.push(msg);
    }
  }
  return messages;
}

export function toProgressEvents(messages: SseMessage[]): ProgressEvent[] {
  return messages.map((m) => JSON.parse(m.data) as ProgressEvent);
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Pull-style progress feed over the events endpoint, resuming from the
 * last delivered event id on every call. */
export class ProgressFeed {
  private lastId: number | null = null;

  constructor(
    private readonly eventsUrl: string,
    private readonly fetchFn: FetchLike = fetch,
  ) {}

  async pull(): Promise<ProgressEvent[]> {
    const headers: Record<string, string> = {};
    if (this.lastId !== null) headers["Last-Event-ID"] = String(this.lastId);
    const resp = await this.fetchFn(this.eventsUrl, { headers });
    if (!resp.ok) throw new Error(`events: HTTP ${resp.status}`);
    const events = toProgressEvents(parseEventStream(await resp.text()));
    if (events.length > 0) {
      this.lastId = events[events.length - 1].index;
    }
    return events;
  }
}
