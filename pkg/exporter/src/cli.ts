#!/usr/bin/env node
/**
 * `reco-export <embeddings|text|features|values|masks|all> --config <json>`
 *
 * Runs one export job against the configured encoder and input listing,
 * writing files the segmentation engine consumes as-is.
 */

import { fileURLToPath } from "node:url";

import {
  exportAll,
  exportDenseFeatures,
  exportImageEmbeddings,
  exportMasks,
  exportTextEmbeddings,
  exportValueFeatures,
  loadJob,
} from "./export.js";

const COMMANDS = ["embeddings", "text", "features", "values", "masks", "all"] as const;
type Command = (typeof COMMANDS)[number];

function usage(): string {
  return `usage: reco-export <${COMMANDS.join("|")}> --config <job.json>`;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (!command || !(COMMANDS as readonly string[]).includes(command)) {
    console.error(usage());
    return 2;
  }
  const flagIndex = rest.indexOf("--config");
  if (flagIndex === -1 || !rest[flagIndex + 1]) {
    console.error(usage());
    return 2;
  }
  try {
    const ctx = loadJob(rest[flagIndex + 1]);
    switch (command as Command) {
      case "embeddings": {
        const result = exportImageEmbeddings(ctx);
        console.log(
          `wrote ${result.count} embeddings -> ${result.manifestPath}` +
            (result.droppedLabels.length
              ? ` (ambiguous labels: ${result.droppedLabels.join(", ")})`
              : ""),
        );
        break;
      }
      case "text":
        console.log(`wrote ${exportTextEmbeddings(ctx).length} concept spec(s)`);
        break;
      case "features":
        console.log(`wrote ${exportDenseFeatures(ctx).length} dense feature map(s)`);
        break;
      case "values": {
        const written = exportValueFeatures(ctx);
        console.log(`wrote ${written.length - 1} value map(s) + projection`);
        break;
      }
      case "masks":
        console.log(`wrote ${exportMasks(ctx).length} mask(s)`);
        break;
      case "all":
        console.log(JSON.stringify(exportAll(ctx)));
        break;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
