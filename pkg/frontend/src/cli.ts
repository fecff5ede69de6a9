/** Command line: plot --in DIR --kind K --out DIR
 *
 * Reads the kind's CSV plus manifest.json from the input directory, writes one
 * or more SVG files with deterministic names into the output directory.  All
 * inputs are parsed and all figures rendered before anything is written, so a
 * failing run leaves no partial images.  Exit codes: 0 ok, 1 missing/malformed
 * input, 2 usage error.
 */

import { existsSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { parseCsv } from "./csv.js";
import { KIND_INPUTS, Manifest, buildFigures } from "./plots.js";

export function renderReport(inDir: string, kind: string, outDir: string): string[] {
  const csvName = KIND_INPUTS[kind];
  if (!csvName) {
    throw new UsageError(`unknown kind ${JSON.stringify(kind)}; choose from ${Object.keys(KIND_INPUTS).join(", ")}`);
  }
  const csvPath = join(inDir, csvName);
  if (!existsSync(csvPath)) {
    throw new Error(`missing report file ${csvPath}`);
  }
  const table = parseCsv(readFileSync(csvPath, "utf8"));
  let manifest: Manifest = {};
  const manifestPath = join(inDir, "manifest.json");
  if (existsSync(manifestPath)) {
    manifest = JSON.parse(readFileSync(manifestPath, "utf8")) as Manifest;
  }
  const figures = buildFigures(kind, table, manifest);
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const [name, svg] of figures) {
    writeFileSync(join(outDir, name), svg);
    written.push(name);
  }
  return written;
}

export class UsageError extends Error {}

interface Args {
  inDir: string;
  kind: string;
  outDir: string;
}

export function parseArgs(argv: string[]): Args {
  if (argv[0] !== "plot") {
    throw new UsageError("usage: oscillab-plot plot --in DIR --kind KIND --out DIR");
  }
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const val = argv[i + 1];
    if (!key.startsWith("--") || val === undefined) {
      throw new UsageError(`bad argument ${key}`);
    }
    opts[key.slice(2)] = val;
  }
  for (const req of ["in", "kind", "out"]) {
    if (!(req in opts)) {
      throw new UsageError(`missing --${req}`);
    }
  }
  return { inDir: opts["in"], kind: opts["kind"], outDir: opts["out"] };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error((e as Error).message);
    return 2;
  }
  try {
    const written = renderReport(args.inDir, args.kind, args.outDir);
    for (const name of written) {
      console.log(name);
    }
    return 0;
  } catch (e) {
    if (e instanceof UsageError) {
      console.error((e as Error).message);
      return 2;
    }
    console.error((e as Error).message);
    return 1;
  }
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
