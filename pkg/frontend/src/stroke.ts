/** Canonical stroke (de)serialization.
 *
 * The server accepts strokes as `{view_id, color, radius, points}` objects;
 * the serializers here emit exactly that shape with a fixed key order and
 * 2-space indentation, so identical editor state always produces identical
 * bytes (the golden-file contract the test suite pins down).
 */

import type { Rgb, Stroke } from "./types.js";

function canonicalStroke(stroke: Stroke): Stroke {
  return {
    view_id: stroke.view_id,
    color: [stroke.color[0], stroke.color[1], stroke.color[2]],
    radius: stroke.radius,
    points: stroke.points.map(([x, y]) => [x, y] as [number, number]),
  };
}

/** One stroke as canonical JSON text. */
export function serializeStroke(stroke: Stroke): string {
  return JSON.stringify(canonicalStroke(stroke), null, 2);
}

/** The strokes-file / POST payload: `{"strokes": [...]}` plus optional hint. */
export function serializeStrokes(strokes: Stroke[], hint?: string): string {
  const payload: { strokes: Stroke[]; hint?: string } = {
    strokes: strokes.map(canonicalStroke),
  };
  if (hint !== undefined) payload.hint = hint;
  return JSON.stringify(payload, null, 2) + "\n";
}

function isRgb(value: unknown): value is Rgb {
  return (
    Array.isArray(value) &&
    value.length === 3 &&
    value.every((c) => typeof c === "number" && c >= 0 && c <= 255)
  );
}

/** Parse and validate a single stroke object. Throws on malformed input. */
export function parseStroke(raw: unknown): Stroke {
  if (typeof raw !== "object" || raw === null) {
    throw new Error("stroke must be an object");
  }
  const obj = raw as Record<string, unknown>;
  if (typeof obj.view_id !== "string" || obj.view_id.length === 0) {
    throw new Error("stroke.view_id must be a non-empty string");
  }
  if (!isRgb(obj.color)) {
    throw new Error("stroke.color must be [r, g, b] with 0-255 channels");
  }
  if (typeof obj.radius !== "number" || obj.radius < 1) {
    throw new Error("stroke.radius must be a number >= 1");
  }
  if (
    !Array.isArray(obj.points) ||
    obj.points.length === 0 ||
    !obj.points.every(
      (p) =>
        Array.isArray(p) &&
        p.length === 2 &&
        p.every((v) => typeof v === "number"),
    )
  ) {
    throw new Error("stroke.points must be a non-empty list of [x, y]");
  }
  return canonicalStroke(obj as unknown as Stroke);
}

/** Parse a strokes file (bare list or `{strokes, hint}`). */
export function parseStrokesFile(text: string): {
  strokes: Stroke[];
  hint?: string;
} {
  const data = JSON.parse(text);
  const rawList = Array.isArray(data) ? data : data.strokes;
  if (!Array.isArray(rawList)) {
    throw new Error("strokes file must be a list or have a 'strokes' key");
  }
  const strokes = rawList.map(parseStroke);
  const hint = Array.isArray(data) ? undefined : data.hint;
  return hint === undefined || hint === null ? { strokes } : { strokes, hint };
}
