#!/usr/bin/env node
/**
 * panelsim-plots — render a figure from simulator output files.
 *
 * Usage:
 *   panelsim-plots --kind force-profile    --in runlog.jsonl --out force.svg
 *   panelsim-plots --kind position-profile --in runlog.jsonl --out pos.svg \
 *       --no-phase-markers
 *   panelsim-plots --kind sweep-curve      --in sweep.json   --out sweep.svg
 */

import { readFile, writeFile } from "node:fs/promises";

import {
  FIGURE_KINDS,
  FigureKind,
  forceProfile,
  positionProfile,
  sweepCurve,
} from "./plots.js";
import { parseRunlog, parseSweep } from "./runlog.js";

export interface PlotSpec {
  kind: FigureKind;
  input: string;
  output: string;
  phaseMarkers: boolean;
}

export function parseArgs(argv: string[]): PlotSpec {
  let kind: string | undefined;
  let input: string | undefined;
  let output: string | undefined;
  let phaseMarkers = true;
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--kind") kind = argv[++i];
    else if (arg === "--in") input = argv[++i];
    else if (arg === "--out") output = argv[++i];
    else if (arg === "--no-phase-markers") phaseMarkers = false;
    else throw new Error(`unknown argument '${arg}'`);
  }
  if (!kind || !input || !output) {
    throw new Error("required: --kind KIND --in FILE --out FILE");
  }
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    throw new Error(`unknown kind '${kind}'; expected one of ${FIGURE_KINDS.join(", ")}`);
  }
  return { kind: kind as FigureKind, input, output, phaseMarkers };
}

export async function run(argv: string[]): Promise<void> {
  const spec = parseArgs(argv);
  const text = await readFile(spec.input, "utf-8");
  let svg: string;
  if (spec.kind === "sweep-curve") {
    svg = sweepCurve(parseSweep(text));
  } else {
    const records = parseRunlog(text);
    svg =
      spec.kind === "position-profile"
        ? positionProfile(records, spec.phaseMarkers)
        : forceProfile(records, spec.phaseMarkers);
  }
  await writeFile(spec.output, svg);
  console.log(`wrote ${spec.output}`);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;

if (invokedDirectly) {
  run(process.argv.slice(2)).catch((err: Error) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  });
}
