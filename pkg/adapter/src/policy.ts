import { readFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

export type State = number[];
export type PolicyKind = "deterministic" | "stochastic";

/** What the request loop needs from any loaded policy. */
export interface ServedPolicy {
  kind: PolicyKind;
  featureCount: number;
  actionCount: number;
  policyId: string;
  act(state: State): number;
  probs(state: State): number[];
}

export interface AdapterConfig {
  policy_path?: string;
  policy_id?: string;
  feature_count?: number;
  action_count?: number;
  // plugin hook for policies saved by third-party RL libraries
  plugin?: { module: string; export?: string };
}

/** Lowest index wins ties, matching the toolkit's convention. */
export function argmax(values: number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

function softmax(logits: number[]): number[] {
  const max = Math.max(...logits);
  const z = logits.map((v) => Math.exp(v - max));
  const sum = z.reduce((a, b) => a + b, 0);
  return z.map((v) => v / sum);
}

interface MlpDoc {
  type: "mlp";
  kind: PolicyKind;
  layer_sizes: number[];
  weights: number[][]; // row-major, one flat array per layer
  biases: number[][];
}

interface HyperplaneDoc {
  i: number;
  j: number;
  w: number[];
  b: number;
}

interface InterpretableDoc {
  type: "interpretable";
  action_count: number;
  hyperplanes: HyperplaneDoc[];
}

function mlpForward(doc: MlpDoc, state: State): number[] {
  let x = state;
  const layers = doc.layer_sizes.length - 1;
  for (let l = 0; l < layers; l++) {
    const inp = doc.layer_sizes[l];
    const out = doc.layer_sizes[l + 1];
    const w = doc.weights[l];
    const b = doc.biases[l];
    const y = new Array<number>(out);
    for (let r = 0; r < out; r++) {
      let acc = b[r];
      for (let c = 0; c < inp; c++) acc += w[r * inp + c] * x[c];
      y[r] = l < layers - 1 && acc < 0 ? 0 : acc; // relu on hidden layers
    }
    x = y;
  }
  return x;
}

function mlpPolicy(doc: MlpDoc, policyId: string): ServedPolicy {
  const featureCount = doc.layer_sizes[0];
  const actionCount = doc.layer_sizes[doc.layer_sizes.length - 1];
  return {
    kind: doc.kind,
    featureCount,
    actionCount,
    policyId,
    act: (state) =>
      doc.kind === "deterministic"
        ? argmax(mlpForward(doc, state))
        : argmax(softmax(mlpForward(doc, state))),
    probs: (state) => {
      if (doc.kind === "stochastic") return softmax(mlpForward(doc, state));
      const probs = new Array<number>(actionCount).fill(0);
      probs[argmax(mlpForward(doc, state))] = 1;
      return probs;
    },
  };
}

function interpretablePolicy(doc: InterpretableDoc, policyId: string): ServedPolicy {
  const featureCount = doc.hyperplanes[0].w.length;
  const decide = (h: HyperplaneDoc, state: State): number => {
    let f = h.b;
    for (let c = 0; c < h.w.length; c++) f += h.w[c] * state[c];
    return f > 0 ? h.i : h.j;
  };
  const act = (state: State): number => {
    if (doc.action_count === 2) return decide(doc.hyperplanes[0], state);
    const votes = new Array<number>(doc.action_count).fill(0);
    for (const h of doc.hyperplanes) votes[decide(h, state)] += 1;
    return argmax(votes);
  };
  return {
    kind: "deterministic",
    featureCount,
    actionCount: doc.action_count,
    policyId,
    act,
    probs: (state) => {
      const probs = new Array<number>(doc.action_count).fill(0);
      probs[act(state)] = 1;
      return probs;
    },
  };
}

/** Load a policy saved in the toolkit's JSON format. */
export function loadToolkitPolicy(path: string, policyId?: string): ServedPolicy {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  const id = policyId ?? path;
  if (doc.type === "mlp") return mlpPolicy(doc as MlpDoc, id);
  if (doc.type === "interpretable") return interpretablePolicy(doc as InterpretableDoc, id);
  throw new Error(`unknown policy document type ${JSON.stringify(doc.type)} in ${path}`);
}

/** Resolve a config to a policy: plugin module if given, toolkit JSON otherwise. */
export async function loadPolicy(config: AdapterConfig): Promise<ServedPolicy> {
  let policy: ServedPolicy;
  if (config.plugin) {
    const mod = await import(pathToFileURL(config.plugin.module).href);
    const factory = mod[config.plugin.export ?? "default"];
    if (typeof factory !== "function") {
      throw new Error(
        `plugin ${config.plugin.module} has no callable export ${config.plugin.export ?? "default"}`
      );
    }
    policy = await factory(config);
  } else {
    if (!config.policy_path) throw new Error("config needs policy_path or plugin");
    policy = loadToolkitPolicy(config.policy_path, config.policy_id);
  }
  if (config.feature_count !== undefined && policy.featureCount !== config.feature_count) {
    throw new Error(
      `policy has ${policy.featureCount} features, config declares ${config.feature_count}`
    );
  }
  if (config.action_count !== undefined && policy.actionCount !== config.action_count) {
    throw new Error(
      `policy has ${policy.actionCount} actions, config declares ${config.action_count}`
    );
  }
  return policy;
}
