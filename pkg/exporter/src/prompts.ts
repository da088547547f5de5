/**
 * Prompt templates and text-embedding ensembling.
 *
 * The bundled set holds 80 generic photo phrasings plus 5 scene
 * phrasings, 85 in total; "{}" marks the concept slot. A concept's
 * embedding is the re-normalized mean over the per-template embeddings.
 * Templates are canonicalized (deduplicated, sorted) before encoding so
 * the result depends on the template set, never its order.
 */

import type { Encoder } from "./encoder.js";

export const PROMPT_TEMPLATES: readonly string[] = [
  "a bad photo of a {}.",
  "a photo of many {}.",
  "a sculpture of a {}.",
  "a photo of the hard to see {}.",
  "a low resolution photo of the {}.",
  "a rendering of a {}.",
  "graffiti of a {}.",
  "a bad photo of the {}.",
  "a cropped photo of the {}.",
  "a tattoo of a {}.",
  "the embroidered {}.",
  "a photo of a hard to see {}.",
  "a bright photo of a {}.",
  "a photo of a clean {}.",
  "a photo of a dirty {}.",
  "a dark photo of the {}.",
  "a drawing of a {}.",
  "a photo of my {}.",
  "the plastic {}.",
  "a photo of the cool {}.",
  "a close-up photo of a {}.",
  "a black and white photo of the {}.",
  "a painting of the {}.",
  "a painting of a {}.",
  "a pixelated photo of the {}.",
  "a sculpture of the {}.",
  "a bright photo of the {}.",
  "a cropped photo of a {}.",
  "a plastic {}.",
  "a photo of the dirty {}.",
  "a jpeg corrupted photo of a {}.",
  "a blurry photo of the {}.",
  "a photo of the {}.",
  "a good photo of the {}.",
  "a rendering of the {}.",
  "a {} in a video game.",
  "a photo of one {}.",
  "a doodle of a {}.",
  "a close-up photo of the {}.",
  "a photo of a {}.",
  "the origami {}.",
  "the {} in a video game.",
  "a sketch of a {}.",
  "a doodle of the {}.",
  "a origami {}.",
  "a low resolution photo of a {}.",
  "the toy {}.",
  "a rendition of the {}.",
  "a photo of the clean {}.",
  "a photo of a large {}.",
  "a rendition of a {}.",
  "a photo of a nice {}.",
  "a photo of a weird {}.",
  "a blurry photo of a {}.",
  "a cartoon {}.",
  "art of a {}.",
  "a sketch of the {}.",
  "a embroidered {}.",
  "a pixelated photo of a {}.",
  "itap of the {}.",
  "a jpeg corrupted photo of the {}.",
  "a good photo of a {}.",
  "a plushie {}.",
  "a photo of the nice {}.",
  "a photo of the small {}.",
  "a photo of the weird {}.",
  "the cartoon {}.",
  "art of the {}.",
  "a drawing of the {}.",
  "a photo of the large {}.",
  "a black and white photo of a {}.",
  "the plushie {}.",
  "a dark photo of a {}.",
  "itap of a {}.",
  "graffiti of the {}.",
  "a toy {}.",
  "itap of my {}.",
  "a photo of a cool {}.",
  "a photo of a small {}.",
  "a tattoo of the {}.",
  "there is a {} in the scene.",
  "there is the {} in the scene.",
  "this is a {} in the scene.",
  "this is the {} in the scene.",
  "this is one {} in the scene.",
];

/** Ambiguous category names and their concrete replacements. */
export const DEFAULT_REPHRASINGS: Readonly<Record<string, string>> = {
  parking: "parking lot",
  vegetation: "tree",
};

export function fillTemplate(template: string, concept: string): string {
  if (!template.includes("{}")) {
    throw new Error(`template ${JSON.stringify(template)} has no "{}" slot`);
  }
  return template.replaceAll("{}", concept);
}

export function normalize(vec: Float64Array): Float64Array {
  let sq = 0;
  for (const v of vec) sq += v * v;
  const norm = Math.sqrt(sq);
  if (norm === 0) throw new Error("cannot normalize a zero vector");
  return Float64Array.from(vec, (v) => v / norm);
}

/**
 * Mean of the per-template text embeddings, re-normalized.
 * Duplicated templates count once; order never matters.
 */
export function ensembleTextEmbedding(
  encoder: Encoder,
  concept: string,
  templates: readonly string[] = PROMPT_TEMPLATES,
): Float64Array {
  if (templates.length === 0) throw new Error("no templates to ensemble");
  const canonical = [...new Set(templates)].sort();
  const sum = new Float64Array(encoder.embedDim);
  for (const template of canonical) {
    const emb = encoder.encodeText(fillTemplate(template, concept));
    for (let i = 0; i < sum.length; i++) sum[i] += emb[i];
  }
  for (let i = 0; i < sum.length; i++) sum[i] /= canonical.length;
  return normalize(sum);
}

export interface ConceptExport {
  name: string;
  text_embedding: number[];
  is_background: boolean;
  rephrased_from?: string;
}

/** Build the concept-spec document, applying any configured rephrasing. */
export function buildConceptSpec(
  encoder: Encoder,
  concept: string,
  options: {
    isBackground?: boolean;
    rephrasings?: Readonly<Record<string, string>>;
    templates?: readonly string[];
  } = {},
): ConceptExport {
  const rephrasings = options.rephrasings ?? DEFAULT_REPHRASINGS;
  const finalName = rephrasings[concept] ?? concept;
  const doc: ConceptExport = {
    name: finalName,
    text_embedding: [
      ...ensembleTextEmbedding(encoder, finalName, options.templates),
    ],
    is_background: options.isBackground ?? false,
  };
  if (finalName !== concept) doc.rephrased_from = concept;
  return doc;
}
