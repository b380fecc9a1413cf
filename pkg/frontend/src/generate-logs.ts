/**
 * Contract-test driver: runs the 20 scripted navigation sequences,
 * exports each recorded session in the toolkit's JSONL schema, replays
 * every exported log, and writes a summary for the cross-component
 * tests.
 *
 * Usage: node dist/generate-logs.js <output-dir>
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { parseSessionLog } from "./parser.js";
import { ReplayController } from "./replay.js";
import { allScenarios, runScenario, SCENARIO_MANIFEST } from "./scenarios.js";

function main(argv: string[]): number {
  const outDir = argv[0];
  if (!outDir) {
    console.error("usage: generate-logs <output-dir>");
    return 1;
  }
  const sessionsDir = join(outDir, "sessions");
  mkdirSync(sessionsDir, { recursive: true });
  writeFileSync(
    join(outDir, "manifest.json"),
    JSON.stringify(SCENARIO_MANIFEST) + "\n"
  );

  const summaries = [];
  for (const scenario of allScenarios()) {
    const { recorder, endMs } = runScenario(scenario);
    const jsonl = recorder.exportJsonl(endMs);
    const file = `${scenario.name}.jsonl`;
    writeFileSync(join(sessionsDir, file), jsonl);

    // replay what was actually exported, not the in-memory buffer
    const replay = new ReplayController(parseSessionLog(jsonl));
    summaries.push({
      name: scenario.name,
      file,
      event_count: recorder.eventCount,
      replay_steps: replay.play().length,
    });
  }
  writeFileSync(
    join(outDir, "expected.json"),
    JSON.stringify({ scenarios: summaries }, null, 2) + "\n"
  );
  console.log(`wrote ${summaries.length} session logs to ${outDir}`);
  return 0;
}

process.exit(main(process.argv.slice(2)));
