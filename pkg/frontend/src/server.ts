/**
 * Entry point: serve the line protocol on stdin/stdout.
 *
 *   node dist/server.js --model fixtures/tiny_checkpoint.json
 *
 * Protocol traffic is the only thing written to stdout; diagnostics go to
 * stderr. The process exits when stdin closes.
 */

import { createInterface } from "node:readline";

import { App } from "./app.js";
import { loadCheckpoint } from "./model.js";

function parseArgs(argv: string[]): { model: string } {
  let model: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--model") {
      model = argv[++i];
    } else if (arg === "--help" || arg === "-h") {
      process.stderr.write("usage: server.js --model CHECKPOINT.json\n");
      process.exit(0);
    } else {
      process.stderr.write(`unknown argument ${arg}\n`);
      process.exit(2);
    }
  }
  if (!model) {
    process.stderr.write("missing required --model\n");
    process.exit(2);
  }
  return { model };
}

function loadApp(path: string): App {
  try {
    return new App(loadCheckpoint(path));
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    process.exit(2);
  }
}

function main(): void {
  const args = parseArgs(process.argv.slice(2));
  const app = loadApp(args.model);

  const lines = createInterface({ input: process.stdin, terminal: false });
  lines.on("line", (line) => {
    for (const reply of app.handleLine(line)) {
      process.stdout.write(reply);
    }
  });
  lines.on("close", () => process.exit(0));
}

main();
