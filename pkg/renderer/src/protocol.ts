import * as readline from "readline";

import { render, RenderRequest } from "./render";

/**
 * Newline-delimited JSON protocol: one RenderRequest per input line, one
 * RenderResponse per output line. Requests may be pipelined; responses are
 * written as their renders finish, so callers must correlate by id, never by
 * arrival order. Render failures are reported inline (ok=false); a line that
 * is not a well-formed request is a protocol violation and stops the server
 * with a nonzero code. Clean input close exits 0.
 */
export async function serveStdio(
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
  errors: NodeJS.WritableStream = process.stderr,
): Promise<number> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  const pending: Promise<void>[] = [];
  let violation = false;

  for await (const line of rl) {
    if (!line.trim()) {
      continue;
    }
    let request: RenderRequest;
    try {
      request = parseRequest(line);
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      errors.write(`protocol violation: ${message}\n`);
      violation = true;
      rl.close();
      break;
    }
    pending.push(
      render(request).then((response) => {
        output.write(`${JSON.stringify(response)}\n`);
      }),
    );
  }
  await Promise.all(pending);
  return violation ? 1 : 0;
}

export function parseRequest(line: string): RenderRequest {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    throw new Error(`input line is not JSON: ${line.slice(0, 80)}`);
  }
  if (!parsed || typeof parsed !== "object" || Array.isArray(parsed)) {
    throw new Error("request must be a JSON object");
  }
  const candidate = parsed as Partial<RenderRequest>;
  if (typeof candidate.id !== "string" || candidate.id.length === 0) {
    throw new Error("request needs a non-empty string id");
  }
  if (!candidate.spec || typeof candidate.spec !== "object") {
    throw new Error("request needs a spec object");
  }
  if (candidate.format !== undefined && candidate.format !== "svg" && candidate.format !== "png") {
    throw new Error(`unknown format ${JSON.stringify(candidate.format)}`);
  }
  return candidate as RenderRequest;
}
