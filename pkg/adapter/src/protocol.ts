import readline from "node:readline";

import type { ServedPolicy, State } from "./policy.js";

export const PROTOCOL_VERSION = 1;

/*
 * Wire schema, one JSON object per line:
 *   client -> adapter: {"type": "hello", "protocol_version": 1}
 *   adapter -> client: {"type": "hello_ack", "protocol_version": 1, "kind": ...,
 *                       "feature_count": n, "action_count": k, "policy_id": "..."}
 *   client -> adapter: {"type": "act", "state": [...]}
 *   adapter -> client: {"type": "action", "action": i}
 *   client -> adapter: {"type": "probs", "state": [...]}
 *   adapter -> client: {"type": "probs", "probs": [...]}
 * Anything the adapter cannot answer gets {"type": "error", "message": ...}
 * and the connection stays open.
 */

function writeLine(output: NodeJS.WritableStream, payload: unknown): void {
  output.write(`${JSON.stringify(payload)}\n`);
}

function checkState(policy: ServedPolicy, state: unknown): State {
  if (
    !Array.isArray(state) ||
    state.length !== policy.featureCount ||
    state.some((v) => typeof v !== "number" || !Number.isFinite(v))
  ) {
    throw new Error(`state must be an array of ${policy.featureCount} finite numbers`);
  }
  return state as State;
}

function answer(policy: ServedPolicy, request: Record<string, unknown>): Record<string, unknown> {
  switch (request.type) {
    case "hello":
      if (request.protocol_version !== PROTOCOL_VERSION) {
        throw new Error(
          `unsupported protocol version ${JSON.stringify(request.protocol_version)}`
        );
      }
      return {
        type: "hello_ack",
        protocol_version: PROTOCOL_VERSION,
        kind: policy.kind,
        feature_count: policy.featureCount,
        action_count: policy.actionCount,
        policy_id: policy.policyId,
      };
    case "act":
      return { type: "action", action: policy.act(checkState(policy, request.state)) };
    case "probs":
      return { type: "probs", probs: policy.probs(checkState(policy, request.state)) };
    default:
      throw new Error(`unknown request type ${JSON.stringify(request.type)}`);
  }
}

/** Single-threaded request loop; returns when the input stream ends. */
export async function serve(
  policy: ServedPolicy,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream
): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Number.POSITIVE_INFINITY });
  for await (const line of rl) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    let response: Record<string, unknown>;
    try {
      const request = JSON.parse(trimmed);
      if (typeof request !== "object" || request === null || Array.isArray(request)) {
        throw new Error("request must be a JSON object");
      }
      response = answer(policy, request as Record<string, unknown>);
    } catch (err) {
      response = { type: "error", message: err instanceof Error ? err.message : String(err) };
    }
    writeLine(output, response);
  }
}
