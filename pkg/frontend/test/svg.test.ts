import { describe, expect, it } from "vitest";

import { esc, niceTicks, renderChart } from "../src/svg.js";

const LINE = {
  x: [0, 1, 2, 3],
  y: [0, 1, 0, -1],
  color: "#123456",
  label: "probe",
};

describe("renderChart", () => {
  it("emits a standalone svg with the series polyline", () => {
    const svg = renderChart({
      title: "T",
      xLabel: "x",
      yLabel: "y",
      series: [LINE],
    });
    expect(svg.startsWith("<svg ")).toBe(true);
    expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    expect((svg.match(/<polyline /g) ?? []).length).toBe(1);
    expect(svg).toContain('stroke="#123456"');
    expect(svg).toContain(">probe</text>");
  });

  it("keeps exact marker times in data-t", () => {
    const svg = renderChart({
      title: "T",
      xLabel: "x",
      yLabel: "y",
      series: [LINE],
      vLines: [{ x: 1.365, label: "Grasp" }, { x: 2.5 }],
    });
    expect(svg).toContain('data-t="1.365"');
    expect(svg).toContain('data-t="2.5"');
    expect(svg).toContain(">Grasp</text>");
  });

  it("drops markers outside the data range", () => {
    const svg = renderChart({
      title: "T",
      xLabel: "x",
      yLabel: "y",
      series: [LINE],
      vLines: [{ x: 99 }],
    });
    expect(svg).not.toContain('data-t="99"');
  });

  it("draws horizontal reference lines with labels", () => {
    const svg = renderChart({
      title: "T",
      xLabel: "x",
      yLabel: "y",
      series: [LINE],
      hLines: [{ y: -0.5, color: "#e63946", label: "ref" }],
    });
    expect(svg).toContain(">ref</text>");
  });

  it("rejects empty input", () => {
    expect(() =>
      renderChart({ title: "T", xLabel: "x", yLabel: "y", series: [] })
    ).toThrow(/empty/);
  });
});

describe("niceTicks", () => {
  it("spans the range with round steps", () => {
    const ticks = niceTicks(0, 10, 5);
    expect(ticks[0]).toBe(0);
    expect(ticks[ticks.length - 1]).toBe(10);
    expect(ticks).toContain(2);
  });

  it("handles negative ranges", () => {
    const ticks = niceTicks(-40, 5, 6);
    expect(ticks[0]).toBeGreaterThanOrEqual(-40);
    expect(ticks[ticks.length - 1]).toBeLessThanOrEqual(5);
    expect(ticks).toContain(0);
  });
});

describe("esc", () => {
  it("escapes markup characters", () => {
    expect(esc("a<b&c>d")).toBe("a&lt;b&amp;c&gt;d");
  });
});
