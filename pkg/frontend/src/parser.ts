import {
  ObserverGroup,
  ParsedSession,
  SessionHeader,
  ViewportEvent,
} from "./types.js";

export class ParseError extends Error {
  constructor(readonly lineNo: number, message: string) {
    super(`line ${lineNo}: ${message}`);
    this.name = "ParseError";
  }
}

function asRecord(value: unknown, lineNo: number): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ParseError(lineNo, "expected a JSON object");
  }
  return value as Record<string, unknown>;
}

/**
 * Parse a session-log JSONL document (header line + viewport lines).
 * Mirrors the toolkit's ingest rules: unknown fields are ignored, boxes
 * must be non-degenerate, timestamps must be non-decreasing.
 */
export function parseSessionLog(text: string): ParsedSession {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new ParseError(1, "empty input");
  }
  let rawHeader: unknown;
  try {
    rawHeader = JSON.parse(lines[0]);
  } catch {
    throw new ParseError(1, "header is not valid JSON");
  }
  const headerObj = asRecord(rawHeader, 1);
  if (headerObj.type !== "session") {
    throw new ParseError(1, "first line is not a session header");
  }
  for (const key of ["slide_id", "observer_id", "group"]) {
    if (!(key in headerObj)) {
      throw new ParseError(1, `header missing '${key}'`);
    }
  }
  const group = headerObj.group;
  if (group !== "GU" && group !== "GEN") {
    throw new ParseError(1, `unknown group '${String(group)}'`);
  }
  const header: SessionHeader = {
    slide_id: String(headerObj.slide_id),
    observer_id: String(headerObj.observer_id),
    group: group as ObserverGroup,
  };
  if (headerObj.end_ms !== undefined) {
    header.end_ms = Number(headerObj.end_ms);
  }

  const events: ViewportEvent[] = [];
  let prevT = -1;
  for (let i = 1; i < lines.length; i++) {
    const lineNo = i + 1;
    let raw: unknown;
    try {
      raw = JSON.parse(lines[i]);
    } catch {
      throw new ParseError(lineNo, "not valid JSON");
    }
    const obj = asRecord(raw, lineNo);
    if (obj.type !== "viewport") {
      throw new ParseError(lineNo, "not a viewport event");
    }
    const numbers: number[] = [];
    for (const key of ["x0", "y0", "x1", "y1", "mag", "t_ms"]) {
      const value = Number(obj[key]);
      if (!Number.isFinite(value)) {
        throw new ParseError(lineNo, `missing or non-numeric field '${key}'`);
      }
      numbers.push(value);
    }
    const [x0, y0, x1, y1, mag, t_ms] = numbers;
    if (x0 >= x1 || y0 >= y1) {
      throw new ParseError(lineNo, "degenerate viewport box");
    }
    if (mag <= 0 || t_ms < 0) {
      throw new ParseError(lineNo, "mag must be > 0 and t_ms >= 0");
    }
    if (t_ms < prevT) {
      throw new ParseError(lineNo, "timestamps must be non-decreasing");
    }
    prevT = t_ms;
    events.push({ x0, y0, x1, y1, mag, t_ms });
  }
  return { header, events };
}
