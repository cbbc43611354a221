#!/usr/bin/env node
import { readFileSync } from "node:fs";

import { AdapterConfig, loadPolicy } from "./policy.js";
import { serve } from "./protocol.js";

function parseArgs(argv: string[]): AdapterConfig {
  // Either a config file:  cli.js adapter.json
  // or inline flags:       cli.js --policy policy.json [--policy-id id]
  const config: AdapterConfig = {};
  let configPath: string | undefined;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--policy") config.policy_path = argv[++i];
    else if (arg === "--policy-id") config.policy_id = argv[++i];
    else if (!arg.startsWith("-") && configPath === undefined) configPath = arg;
    else throw new Error(`unexpected argument ${arg}`);
  }
  if (configPath !== undefined) {
    Object.assign(config, JSON.parse(readFileSync(configPath, "utf8")) as AdapterConfig);
  }
  if (!config.policy_path && !config.plugin) {
    throw new Error("usage: cli.js <config.json> | cli.js --policy <policy.json>");
  }
  return config;
}

async function main(): Promise<void> {
  let policy;
  try {
    policy = await loadPolicy(parseArgs(process.argv.slice(2)));
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    process.stdout.write(`${JSON.stringify({ type: "error", message })}\n`);
    process.exit(1);
  }
  await serve(policy, process.stdin, process.stdout);
  process.exit(0);
}

void main();
