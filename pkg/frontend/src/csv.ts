/** Strict readers for the experiment runner's CSV outputs. */

import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  /** column name -> values, row order preserved */
  data: Map<string, number[]>;
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length < 1) {
    throw new SchemaError("empty CSV");
  }
  const columns = lines[0].split(",");
  const data = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(`row ${i + 1}: expected ${columns.length} cells, got ${cells.length}`);
    }
    for (let j = 0; j < columns.length; j++) {
      const v = Number(cells[j]);
      if (!Number.isFinite(v) && cells[j] !== "inf") {
        throw new SchemaError(`row ${i + 1}, column ${columns[j]}: non-numeric ${cells[j]}`);
      }
      data.get(columns[j])!.push(cells[j] === "inf" ? Infinity : v);
    }
  }
  return { columns, data };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Trajectory files carry t, x_1..x_d, u_1..u_du, gamma, cost, cum_cost. */
export interface Trajectory {
  t: number[];
  x: number[][]; // x[i] is the i-th state coordinate's series
  u: number[][];
  gamma: number[];
  cost: number[];
  cumCost: number[];
}

export function asTrajectory(table: Table): Trajectory {
  const names = table.columns;
  const xCols = names.filter((c) => /^x_\d+$/.test(c));
  const uCols = names.filter((c) => /^u_\d+$/.test(c));
  const expected = ["t", ...xCols, ...uCols, "gamma", "cost", "cum_cost"];
  if (names.join(",") !== expected.join(",") || xCols.length === 0 || uCols.length === 0) {
    throw new SchemaError(
      `not a trajectory file: header ${names.join(",")} ` +
        `(want t,x_1..x_d,u_1..u_du,gamma,cost,cum_cost)`
    );
  }
  return {
    t: table.data.get("t")!,
    x: xCols.map((c) => table.data.get(c)!),
    u: uCols.map((c) => table.data.get(c)!),
    gamma: table.data.get("gamma")!,
    cost: table.data.get("cost")!,
    cumCost: table.data.get("cum_cost")!,
  };
}

export function readTrajectory(path: string): Trajectory {
  return asTrajectory(readCsv(path));
}
