/**
 * Line-delimited JSON model protocol, version 1.
 *
 * One JSON object per line. Requests are {kind, id, payload}; the response
 * echoes the id with kind `${kind}_ACK` or ERROR. A line that cannot be
 * parsed at all is answered with ERROR id 0.
 */

export const PROTOCOL_VERSION = 1;

export type Modality = "sequence" | "text";

export interface Request {
  kind: string;
  id: number;
  payload: Record<string, unknown>;
}

export interface Reply {
  kind: string;
  id: number;
  payload: Record<string, unknown>;
}

export class BadLine extends Error {
  /** id to blame in the ERROR reply; 0 when the line itself is unusable */
  readonly blameId: number;

  constructor(message: string, blameId = 0) {
    super(message);
    this.blameId = blameId;
  }
}

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

/** Parse one raw line into a Request, throwing BadLine on any defect. */
export function parseRequest(line: string): Request {
  let msg: unknown;
  try {
    msg = JSON.parse(line);
  } catch (err) {
    throw new BadLine(`unparseable line: ${(err as Error).message}`);
  }
  if (!isPlainObject(msg)) {
    throw new BadLine("message is not an object");
  }
  const id = msg["id"];
  if (typeof id !== "number" || !Number.isInteger(id)) {
    throw new BadLine("id must be an integer");
  }
  const kind = msg["kind"];
  if (typeof kind !== "string" || kind.length === 0) {
    throw new BadLine("kind must be a non-empty string", id);
  }
  const payload = msg["payload"];
  if (!isPlainObject(payload)) {
    throw new BadLine("payload must be an object", id);
  }
  return { kind, id, payload };
}

export function ack(req: Request, payload: Record<string, unknown>): Reply {
  return { kind: `${req.kind}_ACK`, id: req.id, payload };
}

export function errorReply(id: number, message: string): Reply {
  return { kind: "ERROR", id, payload: { message } };
}

export function serialize(reply: Reply): string {
  return JSON.stringify(reply) + "\n";
}
