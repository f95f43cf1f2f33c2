/**
 * Protocol application: one incoming line in, zero or more reply lines out.
 *
 * Kept free of process and stream handling so tests can drive it directly;
 * server.ts owns stdin/stdout wiring.
 */

import { generate } from "./generate.js";
import type { TinyModel } from "./model.js";
import {
  BadLine,
  PROTOCOL_VERSION,
  Reply,
  Request,
  ack,
  errorReply,
  parseRequest,
  serialize,
} from "./protocol.js";

const DEFAULT_GEN_LEN = 120;

export class App {
  private greeted = false;

  constructor(readonly model: TinyModel) {}

  handleLine(line: string): string[] {
    let req: Request;
    try {
      req = parseRequest(line);
    } catch (err) {
      const blame = err instanceof BadLine ? err.blameId : 0;
      return [serialize(errorReply(blame, (err as Error).message))];
    }
    try {
      return [serialize(this.dispatch(req))];
    } catch (err) {
      return [serialize(errorReply(req.id, (err as Error).message))];
    }
  }

  private dispatch(req: Request): Reply {
    if (req.kind === "HELLO") {
      return this.hello(req);
    }
    if (!this.greeted) {
      throw new Error("handshake required before any other request");
    }
    switch (req.kind) {
      case "PREDICT":
        return this.predict(req);
      case "GENERATE":
        return this.generate(req);
      default:
        throw new Error(`unknown kind ${JSON.stringify(req.kind)}`);
    }
  }

  private hello(req: Request): Reply {
    const version = req.payload["protocol_version"];
    if (version !== PROTOCOL_VERSION) {
      throw new Error(`unsupported protocol version ${JSON.stringify(version)}`);
    }
    this.greeted = true;
    return ack(req, {
      protocol_version: PROTOCOL_VERSION,
      modality: this.model.modality,
      classes: this.model.classes,
      supports_generation: true,
    });
  }

  private predict(req: Request): Reply {
    const inputs = req.payload["inputs"];
    if (!Array.isArray(inputs) || inputs.length === 0 || !inputs.every((s) => typeof s === "string")) {
      throw new Error("inputs must be a non-empty list of strings");
    }
    return ack(req, { probs: this.model.predict(inputs as string[]) });
  }

  private generate(req: Request): Reply {
    const prompt = req.payload["prompt"];
    const n = req.payload["n"];
    if (typeof prompt !== "string") {
      throw new Error("prompt must be a string");
    }
    if (typeof n !== "number" || !Number.isInteger(n) || n < 1) {
      throw new Error("n must be a positive integer");
    }
    const length = this.model.ckpt.generation?.length ?? DEFAULT_GEN_LEN;
    return ack(req, { samples: generate(prompt, n, length) });
  }
}
