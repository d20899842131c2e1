/**
 * The three figure kinds:
 *
 *   position-profile — holding-arm end-effector position vs time
 *   force-profile    — pushing-arm sensor f_y vs time, -35 N reference
 *   sweep-curve      — batch success rate vs the swept config value
 *
 * Profiles take a parsed run log; phase markers land at the exact
 * logged transition timestamps.
 */

import {
  RunRecord,
  SweepFile,
  extractChannel,
  phaseTransitions,
} from "./runlog.js";
import { ChartSpec, VLine, renderChart } from "./svg.js";

export type FigureKind = "position-profile" | "force-profile" | "sweep-curve";

export const FIGURE_KINDS: FigureKind[] = [
  "position-profile",
  "force-profile",
  "sweep-curve",
];

const PUSH_SETPOINT_N = -35;

function markers(records: RunRecord[], enabled: boolean): VLine[] {
  if (!enabled) return [];
  // skip the t=0 entry: a marker on the axis carries no information
  return phaseTransitions(records)
    .filter((p) => p.t > 0)
    .map((p) => ({ x: p.t, label: p.phase }));
}

export function positionProfile(records: RunRecord[], phaseMarkers = true): string {
  const t = extractChannel(records, "t");
  const spec: ChartSpec = {
    title: "Holding-arm end-effector position",
    subtitle: `${records.length} samples`,
    xLabel: "time [s]",
    yLabel: "position [m]",
    series: [
      { x: t, y: extractChannel(records, "yielding.pose.x"), color: "#4361ee", label: "x" },
      { x: t, y: extractChannel(records, "yielding.pose.y"), color: "#e63946", label: "y" },
      { x: t, y: extractChannel(records, "yielding.pose.z"), color: "#2d6a4f", label: "z" },
    ],
    vLines: markers(records, phaseMarkers),
  };
  return renderChart(spec);
}

export function forceProfile(records: RunRecord[], phaseMarkers = true): string {
  const t = extractChannel(records, "t");
  const spec: ChartSpec = {
    title: "Pushing-arm sensor force along the insertion axis",
    subtitle: `${records.length} samples`,
    xLabel: "time [s]",
    yLabel: "f_y [N]",
    series: [
      {
        x: t,
        y: extractChannel(records, "driving.wrench_S.fy"),
        color: "#4361ee",
        label: "f_y",
      },
    ],
    hLines: [
      {
        y: PUSH_SETPOINT_N,
        color: "#e63946",
        label: `setpoint ${PUSH_SETPOINT_N} N`,
      },
    ],
    vLines: markers(records, phaseMarkers),
  };
  return renderChart(spec);
}

export function sweepCurve(sweep: SweepFile): string {
  const values = sweep.points.map((p) => p.value);
  const rates = sweep.points.map((p) => p.summary.success_rate);
  const trials = sweep.points[0]?.summary.trials ?? 0;
  const spec: ChartSpec = {
    title: "Success rate vs swept parameter",
    subtitle: `${sweep.points.length} points, ${trials} trials each`,
    xLabel: sweep.key,
    yLabel: "success rate",
    yMin: 0,
    yMax: 1,
    series: [
      { x: values, y: rates, color: "#4361ee", label: "success rate", points: true },
    ],
  };
  return renderChart(spec);
}
