/**
 * plots render --spec fig.json
 *
 * Reads the figure spec, loads its input CSVs, writes the SVG, and exits
 * nonzero on any validation or schema error.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { CsvError } from "./csv.js";
import { parseFigureSpec, renderFromFiles, SpecError } from "./figures.js";

export function main(argv: string[]): number {
  if (argv.length < 1 || argv[0] !== "render") {
    process.stderr.write("usage: plots render --spec <figure.json>\n");
    return 2;
  }
  const specIdx = argv.indexOf("--spec");
  if (specIdx < 0 || specIdx + 1 >= argv.length) {
    process.stderr.write("missing --spec <figure.json>\n");
    return 2;
  }
  const specPath = argv[specIdx + 1];
  try {
    const raw = JSON.parse(readFileSync(specPath, "utf-8"));
    const spec = parseFigureSpec(raw);
    const texts = spec.inputs.map((p) => readFileSync(p, "utf-8"));
    const fig = renderFromFiles(spec, texts);
    writeFileSync(spec.output, fig.svg);
    process.stdout.write(
      `wrote ${spec.output} (${fig.seriesCount} series, ${fig.svg.length} bytes)\n`,
    );
    return 0;
  } catch (err) {
    if (err instanceof SpecError || err instanceof CsvError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof SyntaxError) {
      process.stderr.write(`error: spec is not valid JSON: ${err.message}\n`);
      return 2;
    }
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return 2;
    }
    throw err;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("cli.ts")) {
  process.exit(main(process.argv.slice(2)));
}
