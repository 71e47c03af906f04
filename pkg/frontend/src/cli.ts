#!/usr/bin/env node
/** Render a figure from experiment CSVs: `render <figure-id> --in dir --out path`. */

import { writeFileSync } from "node:fs";

import { buildFigure, FIGURES } from "./figures.js";
import { renderSvg } from "./svg.js";

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === "list") {
    for (const id of Object.keys(FIGURES).sort()) {
      console.log(id);
    }
    return 0;
  }
  if (command !== "render") {
    console.error("usage: render <figure-id> --in <dir> --out <path> | list");
    return 2;
  }
  const id = rest[0];
  let inDir = ".";
  let outPath = "";
  for (let i = 1; i < rest.length; i++) {
    if (rest[i] === "--in") {
      inDir = rest[++i];
    } else if (rest[i] === "--out") {
      outPath = rest[++i];
    } else {
      console.error(`unknown argument ${rest[i]}`);
      return 2;
    }
  }
  if (!id || !outPath) {
    console.error("usage: render <figure-id> --in <dir> --out <path>");
    return 2;
  }
  try {
    const figure = buildFigure(id, inDir);
    for (const warning of figure.warnings) {
      console.error(`warning: ${warning}`);
    }
    writeFileSync(outPath, renderSvg(figure));
    console.log(`wrote ${outPath}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
