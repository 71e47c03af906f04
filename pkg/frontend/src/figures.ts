/** Figure registry: each builder turns experiment CSVs into plottable panel data. */

import { existsSync, readdirSync } from "node:fs";
import { join } from "node:path";

import { readCsv, readTrajectory, SchemaError, Trajectory } from "./csv.js";
import { trailingWindowAverage } from "./series.js";

export type LineStyle = "solid" | "dashed";

export interface Series {
  label: string;
  x: number[];
  y: number[];
  style: LineStyle;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  hline?: { y: number; label: string };
}

export interface FigureData {
  id: string;
  title: string;
  panels: Panel[];
  warnings: string[];
}

function series(label: string, x: number[], y: number[], style: LineStyle = "solid"): Series {
  return { label, x: [...x], y: [...y], style };
}

function costPanels(trajs: Map<string, Trajectory>, dashed: Set<string>): Panel[] {
  const cost: Series[] = [];
  const cum: Series[] = [];
  for (const [name, traj] of trajs) {
    const style: LineStyle = dashed.has(name) ? "dashed" : "solid";
    cost.push(series(name, traj.t, traj.cost, style));
    cum.push(series(name, traj.t, traj.cumCost, style));
  }
  return [
    { title: "instantaneous cost", xLabel: "t", yLabel: "cost", series: cost },
    { title: "cumulative cost", xLabel: "t", yLabel: "cumulative cost", series: cum },
  ];
}

function loadPolicies(dir: string, experiment: string, policies: string[]): Map<string, Trajectory> {
  const out = new Map<string, Trajectory>();
  for (const policy of policies) {
    out.set(policy, readTrajectory(join(dir, `${experiment}_${policy}.csv`)));
  }
  return out;
}

function buildSirFamily(id: string, experiment: string, dir: string): FigureData {
  const trajs = loadPolicies(dir, experiment, [
    "gpc-simplex",
    "full-prevention",
    "no-prevention",
  ]);
  const panels = costPanels(trajs, new Set());
  const gpc = trajs.get("gpc-simplex")!;
  panels.push({
    title: "transmission control",
    xLabel: "t",
    yLabel: "u_2",
    series: [series("gpc-simplex u_2", gpc.t, gpc.u[1])],
  });
  return { id, title: `${experiment}: controller vs constant baselines`, panels, warnings: [] };
}

function buildSirGrid(dir: string): FigureData {
  // one sub-run per subdirectory (e.g. different cost weights)
  const subdirs = readdirSync(dir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (subdirs.length === 0) {
    throw new SchemaError(`sir-grid expects run subdirectories under ${dir}`);
  }
  const panels: Panel[] = [];
  for (const sub of subdirs) {
    const fig = buildSirFamily("sir-main", "sir", join(dir, sub));
    for (const panel of fig.panels) {
      panels.push({ ...panel, title: `${sub}: ${panel.title}` });
    }
  }
  return { id: "sir-grid", title: "epidemic control across cost settings", panels, warnings: [] };
}

function buildHospital(dir: string): FigureData {
  const warnings: string[] = [];
  const gpc = readTrajectory(join(dir, "hospital_gpc-simplex.csv"));
  const none = readTrajectory(join(dir, "hospital_no-prevention.csv"));
  const infected: Series[] = [
    series("no-prevention infected", none.t, none.x[1], "dashed"),
    series("gpc-simplex infected", gpc.t, gpc.x[1]),
    series("gpc-simplex susceptible", gpc.t, gpc.x[0]),
  ];
  const control: Series[] = [series("gpc-simplex u_1", gpc.t, gpc.u[0])];
  const refPath = join(dir, "reference.csv");
  if (existsSync(refPath)) {
    const ref = readCsv(refPath);
    for (const col of ["t", "S", "I", "u"]) {
      if (!ref.data.has(col)) {
        throw new SchemaError(`reference.csv missing column ${col}`);
      }
    }
    const t = ref.data.get("t")!;
    infected.push(series("reference infected", t, ref.data.get("I")!, "dashed"));
    infected.push(series("reference susceptible", t, ref.data.get("S")!, "dashed"));
    control.push(series("reference u", t, ref.data.get("u")!, "dashed"));
  } else {
    warnings.push("reference.csv not found; rendering controller-only panels");
  }
  return {
    id: "hospital",
    title: "hospital capacity control",
    panels: [
      {
        title: "population fractions",
        xLabel: "t",
        yLabel: "fraction",
        series: infected,
        hline: { y: 0.1, label: "y_max" },
      },
      { title: "prevention control", xLabel: "t", yLabel: "u_1", series: control },
    ],
    warnings,
  };
}

function buildRpsLoss(dir: string): FigureData {
  const trajs = loadPolicies(dir, "replicator", [
    "gpc-simplex",
    "best-response",
    "uniform-default",
  ]);
  const panels = costPanels(trajs, new Set(["best-response"]));
  return { id: "rps-loss", title: "replicator control: losses", panels, warnings: [] };
}

function buildRpsPopulation(dir: string): FigureData {
  const gpc = readTrajectory(join(dir, "replicator_gpc-simplex.csv"));
  const labels = ["rock", "paper", "scissors"];
  return {
    id: "rps-population",
    title: "population under control",
    panels: [
      {
        title: "strategy shares",
        xLabel: "t",
        yLabel: "share",
        series: gpc.x.map((col, i) => series(labels[i] ?? `x_${i + 1}`, gpc.t, col)),
      },
    ],
    warnings: [],
  };
}

function buildRpsRandomCost(dir: string): FigureData {
  const trajs = loadPolicies(dir, "replicator-random-cost", [
    "gpc-simplex",
    "best-response",
    "uniform-default",
  ]);
  const seriesList: Series[] = [];
  for (const [name, traj] of trajs) {
    const style: LineStyle = name === "best-response" ? "dashed" : "solid";
    seriesList.push(series(name, traj.t, trailingWindowAverage(traj.cost, 15), style));
  }
  return {
    id: "rps-random-cost",
    title: "replicator control under coin-flip costs",
    panels: [
      {
        title: "trailing min(t, 15)-step average loss",
        xLabel: "t",
        yLabel: "windowed loss",
        series: seriesList,
      },
    ],
    warnings: [],
  };
}

function buildLowerboundScaling(dir: string): FigureData {
  const table = readCsv(join(dir, "lowerbound_regret_table.csv"));
  for (const col of ["T", "mean_regret"]) {
    if (!table.data.has(col)) {
      throw new SchemaError(`lowerbound_regret_table.csv missing column ${col}`);
    }
  }
  return {
    id: "lowerbound-scaling",
    title: "regret growth on the two-branch instances",
    panels: [
      {
        title: "mean regret vs horizon",
        xLabel: "T",
        yLabel: "mean regret",
        series: [series("gpc-simplex", table.data.get("T")!, table.data.get("mean_regret")!)],
      },
    ],
    warnings: [],
  };
}

export const FIGURES: Record<string, (dir: string) => FigureData> = {
  "sir-main": (dir) => buildSirFamily("sir-main", "sir", dir),
  "sir-noisy": (dir) => buildSirFamily("sir-noisy", "sir-noisy", dir),
  "sir-grid": buildSirGrid,
  hospital: buildHospital,
  "rps-loss": buildRpsLoss,
  "rps-population": buildRpsPopulation,
  "rps-random-cost": buildRpsRandomCost,
  "lowerbound-scaling": buildLowerboundScaling,
};

export function buildFigure(id: string, dir: string): FigureData {
  const builder = FIGURES[id];
  if (!builder) {
    throw new SchemaError(`unknown figure ${id}; valid: ${Object.keys(FIGURES).sort().join(", ")}`);
  }
  return builder(dir);
}
