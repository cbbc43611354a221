import { PassThrough } from "node:stream";

import { describe, expect, it } from "vitest";

import type { ServedPolicy } from "../src/policy.js";
import { PROTOCOL_VERSION, serve } from "../src/protocol.js";

const stub: ServedPolicy = {
  kind: "deterministic",
  featureCount: 2,
  actionCount: 3,
  policyId: "stub-policy",
  act: (state) => (state[0] > 0 ? 2 : 0),
  probs: (state) => (state[0] > 0 ? [0, 0, 1] : [1, 0, 0]),
};

async function exchange(lines: string[]): Promise<Record<string, unknown>[]> {
  const input = new PassThrough();
  const output = new PassThrough();
  const chunks: Buffer[] = [];
  output.on("data", (chunk) => chunks.push(chunk));
  const done = serve(stub, input, output);
  for (const line of lines) input.write(`${line}\n`);
  input.end();
  await done;
  const text = Buffer.concat(chunks).toString().trim();
  if (!text) return [];
  return text.split("\n").map((line: string) => JSON.parse(line));
}

describe("serve", () => {
  it("answers hello with the policy's dimensions", async () => {
    const [ack] = await exchange([
      JSON.stringify({ type: "hello", protocol_version: PROTOCOL_VERSION }),
    ]);
    expect(ack).toEqual({
      type: "hello_ack",
      protocol_version: PROTOCOL_VERSION,
      kind: "deterministic",
      feature_count: 2,
      action_count: 3,
      policy_id: "stub-policy",
    });
  });

  it("rejects a version it does not speak", async () => {
    const [resp] = await exchange([JSON.stringify({ type: "hello", protocol_version: 99 })]);
    expect(resp.type).toBe("error");
  });

  it("answers act and probs requests", async () => {
    const responses = await exchange([
      JSON.stringify({ type: "act", state: [1, 0] }),
      JSON.stringify({ type: "probs", state: [-1, 0] }),
    ]);
    expect(responses[0]).toEqual({ type: "action", action: 2 });
    expect(responses[1]).toEqual({ type: "probs", probs: [1, 0, 0] });
  });

  it("stays alive across malformed requests", async () => {
    const responses = await exchange([
      "not json at all",
      JSON.stringify({ type: "act", state: [1] }), // wrong dimension
      JSON.stringify({ type: "warp", state: [1, 0] }),
      JSON.stringify({ type: "act", state: [1, 0] }),
    ]);
    expect(responses[0].type).toBe("error");
    expect(responses[1].type).toBe("error");
    expect(responses[2].type).toBe("error");
    expect(responses[3]).toEqual({ type: "action", action: 2 });
  });

  it("returns cleanly on end-of-input", async () => {
    const responses = await exchange([]);
    expect(responses).toEqual([]);
  });
});
