/**
 * Figure kinds over gibbslab CSV schemas.  Strictly read-only consumers: no
 * statistic is recomputed here beyond axis transforms.
 */

import { CsvError, numericColumn, parseCsv, requireColumns, stringColumn, Table } from "./csv.js";
import { renderScene, Series } from "./svg.js";

export interface FigureSpec {
  kind: "tail" | "coefficient" | "expected-distance" | "asclt";
  inputs: string[];
  output: string;
  title?: string;
  log_y?: boolean;
  log_x?: boolean;
}

export class SpecError extends Error {}

export function parseFigureSpec(raw: unknown): FigureSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new SpecError("figure spec must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const kinds = ["tail", "coefficient", "expected-distance", "asclt"];
  if (typeof obj.kind !== "string" || !kinds.includes(obj.kind)) {
    throw new SpecError(`spec.kind must be one of ${kinds.join("|")}`);
  }
  if (!Array.isArray(obj.inputs) || obj.inputs.length === 0 || !obj.inputs.every((i) => typeof i === "string")) {
    throw new SpecError("spec.inputs must be a nonempty array of CSV paths");
  }
  if (typeof obj.output !== "string" || !obj.output.endsWith(".svg")) {
    throw new SpecError("spec.output must be an .svg path");
  }
  for (const key of Object.keys(obj)) {
    if (!["kind", "inputs", "output", "title", "log_y", "log_x"].includes(key)) {
      throw new SpecError(`unknown spec key '${key}'`);
    }
  }
  return {
    kind: obj.kind as FigureSpec["kind"],
    inputs: obj.inputs as string[],
    output: obj.output,
    title: typeof obj.title === "string" ? obj.title : undefined,
    log_y: obj.log_y === true,
    log_x: obj.log_x === true,
  };
}

export interface Figure {
  svg: string;
  seriesCount: number;
}

export function buildFigure(spec: FigureSpec, tables: Table[]): Figure {
  switch (spec.kind) {
    case "tail":
      return tailFigure(spec, tables[0]);
    case "coefficient":
      return coefficientFigure(spec, tables[0]);
    case "expected-distance":
      return expectedDistanceFigure(spec, tables[0]);
    case "asclt":
      return ascltFigure(spec, tables[0]);
  }
}

function tailFigure(spec: FigureSpec, table: Table): Figure {
  requireColumns(table, ["u", "emp_tail", "ci_lo", "ci_hi", "bound"]);
  const u = numericColumn(table, "u");
  const emp = numericColumn(table, "emp_tail");
  const lo = numericColumn(table, "ci_lo");
  const hi = numericColumn(table, "ci_hi");
  const bound = numericColumn(table, "bound");
  const logY = spec.log_y !== false; // tails default to log-y
  const clamp = (v: number) => (logY && v <= 0 ? 1e-6 : v);
  const series: Series[] = [
    {
      name: "empirical tail",
      xs: u,
      ys: emp.map(clamp),
      errLo: lo.map(clamp),
      errHi: hi.map(clamp),
      color: "#1f77b4",
      kind: "points",
    },
    { name: "theory bound", xs: u, ys: bound.map(clamp), color: "#d62728", kind: "line" },
  ];
  const svg = renderScene(
    spec.title ?? "deviation tail vs bound",
    { label: "u", log: spec.log_x === true },
    { label: "P(|dev| >= u)", log: logY },
    series,
  );
  return { svg, seriesCount: series.length };
}

function coefficientFigure(spec: FigureSpec, table: Table): Figure {
  requireColumns(table, ["beta", "coefficient"]);
  const beta = numericColumn(table, "beta");
  const coeff = numericColumn(table, "coefficient");
  const series: Series[] = [
    { name: "Dobrushin coefficient", xs: beta, ys: coeff, color: "#1f77b4", kind: "line" },
  ];
  const hLines = [{ y: 1.0, label: "uniqueness threshold", color: "#d62728" }];
  // mark the crossing when the curve passes 1
  for (let i = 1; i < beta.length; i++) {
    const [a, b] = [coeff[i - 1] - 1, coeff[i] - 1];
    if (a <= 0 && b > 0) {
      const t = -a / (b - a);
      const bx = beta[i - 1] + t * (beta[i] - beta[i - 1]);
      series.push({
        name: `crossing at beta=${bx.toFixed(4)}`,
        xs: [bx],
        ys: [1.0],
        color: "#2ca02c",
        kind: "points",
      });
      break;
    }
  }
  const svg = renderScene(
    spec.title ?? "Dobrushin coefficient vs beta",
    { label: "beta", log: spec.log_x === true },
    { label: "c(gamma)", log: spec.log_y === true },
    series,
    hLines,
  );
  return { svg, seriesCount: series.length };
}

function expectedDistanceFigure(spec: FigureSpec, table: Table): Figure {
  requireColumns(table, ["card"]);
  const card = numericColumn(table, "card");
  const series: Series[] = [];
  const palette = ["#1f77b4", "#d62728", "#2ca02c"];
  for (const col of ["bound", "measured", "asymptotic"]) {
    if (table.header.includes(col)) {
      series.push({
        name: col,
        xs: card,
        ys: numericColumn(table, col),
        color: palette[series.length % palette.length],
        kind: col === "measured" ? "points" : "line",
      });
    }
  }
  if (series.length === 0) {
    throw new CsvError("expected-distance CSV needs at least one of: bound, measured, asymptotic");
  }
  const svg = renderScene(
    spec.title ?? "expected Kantorovich distance vs |Lambda|",
    { label: "|Lambda|", log: spec.log_x !== false },
    { label: "E d_K", log: spec.log_y !== false },
    series,
  );
  return { svg, seriesCount: series.length };
}

function ascltFigure(spec: FigureSpec, table: Table): Figure {
  requireColumns(table, ["seed", "N", "d_K"]);
  const seeds = stringColumn(table, "seed");
  const Ns = numericColumn(table, "N");
  const dks = numericColumn(table, "d_K");
  const bySeed = new Map<string, { xs: number[]; ys: number[] }>();
  seeds.forEach((s, i) => {
    if (!bySeed.has(s)) bySeed.set(s, { xs: [], ys: [] });
    bySeed.get(s)!.xs.push(Ns[i]);
    bySeed.get(s)!.ys.push(dks[i]);
  });
  const palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
  const series: Series[] = [...bySeed.entries()].map(([seed, data], i) => ({
    name: `seed ${seed}`,
    xs: data.xs,
    ys: data.ys,
    color: palette[i % palette.length],
    kind: "line" as const,
  }));
  const svg = renderScene(
    spec.title ?? "ASCLT convergence",
    { label: "N", log: spec.log_x !== false },
    { label: "d_K(A_N, G)", log: spec.log_y === true },
    series,
  );
  return { svg, seriesCount: series.length };
}

export function renderFromFiles(spec: FigureSpec, texts: string[]): Figure {
  const tables = texts.map(parseCsv);
  return buildFigure(spec, tables);
}
