/**
 * Figure-rendering tests against the committed canonical campaign results.
 * All four figure kinds must render straight from the runner's results CSV;
 * schema problems must be reported as explicit column diffs before any
 * output file is created.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  FIGURE_KINDS,
  modelLabel,
  renderFigure,
  renderFigureFile,
  sdcGrey,
} from "../src/figures.js";
import { parseResultsCsv, RESULTS_COLUMNS, SchemaError } from "../src/resultsCsv.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const RESULTS = path.join(HERE, "..", "..", "data", "fixtures", "results.csv");
const CSV = fs.readFileSync(RESULTS, "utf-8");

/** Minimal aggregate results CSV with one row per given model id. */
function aggregateCsv(modelIds: string[], sdc: (i: number) => number): string {
  const lines = [RESULTS_COLUMNS.join(",")];
  modelIds.forEach((m, i) => {
    lines.push(
      [
        `cfg-${i}`, m, -1, -1, "state", "zeros", "100", "all", "10", "", "", "",
        "", "", sdc(i).toFixed(4), "0.0", (1 - sdc(i)).toFixed(4), 992, "0.98",
      ].join(","),
    );
  });
  return lines.join("\n") + "\n";
}

describe("canonical campaign results", () => {
  it("every figure kind renders without error", () => {
    for (const kind of FIGURE_KINDS) {
      const svg = renderFigure(CSV, kind);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    }
  });

  it("parallel line darkness is monotone in the SDC rate", () => {
    const svg = renderFigure(CSV, "parallel");
    const lines = [...svg.matchAll(/data-sdc="([^"]+)"[^>]*stroke="rgb\((\d+),/g)].map((m) => ({
      sdc: Number(m[1]),
      grey: Number(m[2]),
    }));
    expect(lines.length).toBeGreaterThan(100);
    const bySdc = [...lines].sort((a, b) => a.sdc - b.sdc);
    for (let i = 1; i < bySdc.length; i++) {
      // higher SDC never renders lighter
      expect(bySdc[i].grey).toBeLessThanOrEqual(bySdc[i - 1].grey);
    }
    const greys = new Set(lines.map((l) => l.grey));
    expect(greys.size).toBeGreaterThan(1);
  });

  it("bitcurve draws a 32-point line for the bit sweep", () => {
    const svg = renderFigure(CSV, "bitcurve");
    const counts = [...svg.matchAll(/class="bitline" points="([^"]+)"/g)].map(
      (m) => m[1].trim().split(/\s+/).length,
    );
    expect(counts).toContain(32);
  });

  it("histogram draws one bar per bin", () => {
    const svg = renderFigure(CSV, "histogram", { bins: 12 });
    expect([...svg.matchAll(/class="hist-bar"/g)]).toHaveLength(12);
  });
});

describe("radial figure", () => {
  it("draws one spoke per model for a full 18-model grid", () => {
    const ids: string[] = [];
    for (const c of [4, 6]) {
      for (const d of [3, 4, 5]) {
        for (const u of [32, 48, 64]) ids.push(`C${c}D${d}U${u}`);
      }
    }
    expect(ids).toHaveLength(18);
    const svg = renderFigure(aggregateCsv(ids, (i) => 0.02 + 0.01 * i), "radial");
    expect([...svg.matchAll(/class="spoke"/g)]).toHaveLength(18);
    for (const id of ids) expect(svg).toContain(`>${modelLabel(id)}<`);
  });

  it("shortens grid model ids to depth-units labels", () => {
    expect(modelLabel("C4D3U32")).toBe("D3U32");
    expect(modelLabel("fixture")).toBe("fixture");
  });

  it("needs aggregate rows", () => {
    const experimentOnly = aggregateCsv(["C4D3U32"], () => 0.1).replace("-1,-1", "0,0");
    expect(() => renderFigure(experimentOnly, "radial")).toThrow(/aggregate rows/);
  });
});

describe("grey ramp", () => {
  it("maps the SDC range onto dark-for-high", () => {
    expect(sdcGrey(0, 0, 1)).toBe(225);
    expect(sdcGrey(1, 0, 1)).toBe(20);
    expect(sdcGrey(0.5, 0, 1)).toBe(Math.round(225 - 205 * 0.5));
    // degenerate range renders everything dark rather than dividing by zero
    expect(sdcGrey(0.3, 0.3, 0.3)).toBe(20);
  });
});

describe("schema enforcement", () => {
  it("rejects an empty CSV with the full missing-column list", () => {
    try {
      parseResultsCsv("");
      expect.unreachable("empty CSV must not parse");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect((err as SchemaError).missing).toEqual([...RESULTS_COLUMNS]);
      expect((err as SchemaError).unexpected).toEqual([]);
    }
  });

  it("reports the exact column diff on a mismatched header", () => {
    const header = RESULTS_COLUMNS.filter((c) => c !== "sdc_rate").concat("surprise");
    const text = header.join(",") + "\n" + header.map(() => "0").join(",") + "\n";
    try {
      parseResultsCsv(text);
      expect.unreachable("mismatched header must not parse");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect((err as SchemaError).missing).toEqual(["sdc_rate"]);
      expect((err as SchemaError).unexpected).toEqual(["surprise"]);
      expect((err as Error).message).toContain("missing columns: sdc_rate");
      expect((err as Error).message).toContain("unexpected columns: surprise");
    }
  });

  it("rejects a header-only CSV", () => {
    expect(() => parseResultsCsv(RESULTS_COLUMNS.join(",") + "\n")).toThrow(/no data rows/);
  });

  it("writes no file when rendering fails", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "figs-"));
    const bad = path.join(dir, "empty.csv");
    const out = path.join(dir, "out.svg");
    fs.writeFileSync(bad, "");
    try {
      expect(() => renderFigureFile(bad, "radial", out)).toThrow(SchemaError);
      expect(fs.existsSync(out)).toBe(false);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });

  it("writes the file when rendering succeeds", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "figs-"));
    const out = path.join(dir, "hist.svg");
    try {
      renderFigureFile(RESULTS, "histogram", out, { bins: 8 });
      const text = fs.readFileSync(out, "utf-8");
      expect(text.startsWith("<svg")).toBe(true);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});
