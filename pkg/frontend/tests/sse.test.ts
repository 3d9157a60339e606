import { describe, expect, it } from "vitest";

import { parseEventStream, ProgressFeed, toProgressEvents } from "../src/sse.js";

const STREAM = [
  "id: 0",
  "event: refine",
  'data: {"index": 0, "region": "r000", "stage": "refine", "status": "started", "data": {}}',
  "",
  "id: 1",
  "event: refine",
  'data: {"index": 1, "region": "r000", "stage": "refine", "status": "finished", "data": {"seconds": 0.5}}',
  "",
  "",
].join("\n");

describe("SSE parsing", () => {
  it("parses ids, event names and data", () => {
    const messages = parseEventStream(STREAM);
    expect(messages).toHaveLength(2);
    expect(messages[0].id).toBe("0");
    expect(messages[0].event).toBe("refine");
    const events = toProgressEvents(messages);
    expect(events[1].status).toBe("finished");
    expect(events[1].data.seconds).toBe(0.5);
  });

  it("ignores comments and joins multi-line data", () => {
    const messages = parseEventStream(
      ': keep-alive\ndata: {"a":\ndata:  1}\n\n',
    );
    expect(messages).toHaveLength(1);
    expect(JSON.parse(messages[0].data)).toEqual({ a: 1 });
  });

  it("returns nothing for an empty stream", () => {
    expect(parseEventStream("")).toEqual([]);
  });
});

describe("ProgressFeed", () => {
  it("resumes with Last-Event-ID and never re-delivers", async () => {
    const log = [
      '{"index": 0, "region": null, "stage": "refine", "status": "started", "data": {}}',
      '{"index": 1, "region": null, "stage": "refine", "status": "finished", "data": {}}',
      '{"index": 2, "region": null, "stage": "intent", "status": "started", "data": {}}',
    ];
    const requestedIds: (string | null)[] = [];
    const fakeFetch = async (_url: string, init?: RequestInit) => {
      const headers = (init?.headers ?? {}) as Record<string, string>;
      const last = headers["Last-Event-ID"] ?? null;
      requestedIds.push(last);
      const since = last === null ? 0 : Number(last) + 1;
      const body = log
        .slice(since)
        .map((d, i) => `id: ${since + i}\ndata: ${d}\n\n`)
        .join("");
      return new Response(body, {
        status: 200,
        headers: { "Content-Type": "text/event-stream" },
      });
    };

    const feed = new ProgressFeed("http://x/events", fakeFetch);
    const first = await feed.pull();
    expect(first.map((e) => e.index)).toEqual([0, 1, 2]);
    const second = await feed.pull();
    expect(second).toEqual([]);
    expect(requestedIds).toEqual([null, "2"]);
  });
});
