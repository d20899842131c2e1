/**
 * Parsers for the simulator's documented output formats:
 *
 *   runlog.jsonl — one JSON record per logged tick
 *   trace.csv    — `panelsim export` channel dump (t first column)
 *   sweep.json   — per-point batch summaries from `panelsim batch --sweep`
 *
 * Channels use the same dotted names as the exporter, e.g.
 * `yielding.pose.y` or `driving.wrench_S.fy`; `t` and `phase` are
 * always available.
 */

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

export interface ArmSample {
  pose: number[]; // x, y, z, yaw
  twist: number[]; // vx..wz
  wrench_S: number[]; // fx..mz in the sensor frame
  command: number[];
}

export interface RunRecord {
  t: number;
  phase: string;
  arms: Record<string, ArmSample>;
  nmpc?: Record<string, unknown>;
  contacts?: { count: number; max_force_n: number };
}

export interface PhaseTransition {
  phase: string;
  t: number;
}

export interface BatchSummary {
  trials: number;
  successes: number;
  success_rate: number;
  failure_rate: number;
  failure_modalities: Record<string, { count: number; share: number }>;
}

export interface SweepPoint {
  key: string;
  value: number;
  dir: string;
  summary: BatchSummary;
}

export interface SweepFile {
  key: string;
  points: SweepPoint[];
}

export interface CsvTable {
  header: string[];
  columns: Map<string, (number | string)[]>;
}

// ---------------------------------------------------------------------------
// Channel naming (mirrors the exporter)
// ---------------------------------------------------------------------------

const POSE_AXES = ["x", "y", "z", "yaw"];
const TWIST_AXES = ["vx", "vy", "vz", "wx", "wy", "wz"];
const WRENCH_AXES = ["fx", "fy", "fz", "mx", "my", "mz"];

const FIELD_AXES: Record<string, string[]> = {
  pose: POSE_AXES,
  twist: TWIST_AXES,
  wrench_S: WRENCH_AXES,
  command: TWIST_AXES,
};

export class ChannelError extends Error {}

export function availableChannels(records: RunRecord[]): string[] {
  const names = ["t", "phase"];
  const roles = records.length > 0 ? Object.keys(records[0].arms).sort() : [];
  for (const role of roles) {
    for (const [field, axes] of Object.entries(FIELD_AXES)) {
      for (const axis of axes) names.push(`${role}.${field}.${axis}`);
    }
  }
  return names;
}

export function extractChannel(records: RunRecord[], channel: string): number[] {
  if (channel === "t") return records.map((r) => r.t);
  const parts = channel.split(".");
  if (parts.length === 3) {
    const [role, field, axis] = parts;
    const axes = FIELD_AXES[field];
    const idx = axes ? axes.indexOf(axis) : -1;
    if (idx >= 0 && records.length > 0 && role in records[0].arms) {
      return records.map((r) => r.arms[role][field as keyof ArmSample][idx]);
    }
  }
  throw new ChannelError(
    `unknown channel '${channel}'; available: ${availableChannels(records).join(", ")}`
  );
}

export function phaseTransitions(records: RunRecord[]): PhaseTransition[] {
  const out: PhaseTransition[] = [];
  let last: string | null = null;
  for (const rec of records) {
    if (rec.phase !== last) {
      out.push({ phase: rec.phase, t: rec.t });
      last = rec.phase;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File parsers
// ---------------------------------------------------------------------------

export function parseRunlog(text: string): RunRecord[] {
  const records: RunRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    try {
      records.push(JSON.parse(line) as RunRecord);
    } catch (err) {
      throw new Error(`line ${i + 1}: bad JSON record: ${(err as Error).message}`);
    }
  }
  if (records.length === 0) throw new Error("run log is empty");
  return records;
}

export function parseSweep(text: string): SweepFile {
  const sweep = JSON.parse(text) as SweepFile;
  if (!sweep.key || !Array.isArray(sweep.points) || sweep.points.length === 0) {
    throw new Error("sweep file has no points");
  }
  return sweep;
}

/** Plain CSV with a header row; numeric cells become numbers. */
export function parseCsv(text: string): CsvTable {
  // the exporter writes CRLF row terminators
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error("csv has no data rows");
  const header = lines[0].split(",");
  const columns = new Map<string, (number | string)[]>(header.map((h) => [h, []]));
  for (const line of lines.slice(1)) {
    const cells = line.split(",");
    header.forEach((h, i) => {
      const cell = cells[i];
      const num = Number(cell);
      columns.get(h)!.push(cell !== "" && Number.isFinite(num) ? num : cell);
    });
  }
  return { header, columns };
}
