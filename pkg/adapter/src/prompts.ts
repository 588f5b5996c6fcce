/**
 * Prompt templates per relation id.
 *
 * The negative prompt is fixed; positive prompts pair a per-relation scene
 * instruction with the preservation clause so the model is always told what
 * must not move.
 */

import { WireSpec } from "./protocol";

export const NEGATIVE_PROMPT = "low quality, distorted, cartoonish, unrealistic";

export const PRESERVATION_CLAUSE = "maintain the same lane direction and angle";

export class MissingTemplate extends Error {
  constructor(mrId: string) {
    super(`no prompt template for ${mrId}`);
    this.name = "MissingTemplate";
  }
}

type TemplateFn = (spec: WireSpec) => string;

const TEMPLATES: Record<string, TemplateFn> = {
  "mr1.background": (spec) => {
    const amplitude = spec.semantic?.amplitude ?? 0;
    return `photorealistic road scene, subtly vary the background scenery beside the road (variation strength ${amplitude})`;
  },
  "mr2.snow": (spec) => {
    const density = spec.environmental?.density ?? 0;
    return `photorealistic road scene, modify the weather conditions to snow (coverage ${density})`;
  },
  "mr3.lane_narrow": (spec) => {
    const factor = spec.geometric?.lane_narrow ?? 1;
    return `photorealistic road scene, narrow the driving lane to ${factor} of its width`;
  },
};

export function templateIds(): string[] {
  return Object.keys(TEMPLATES);
}

export interface PromptPair {
  positive: string;
  negative: string;
}

export function renderPrompt(mrId: string, spec: WireSpec, negative: string = NEGATIVE_PROMPT): PromptPair {
  const template = TEMPLATES[mrId];
  if (template === undefined) {
    throw new MissingTemplate(mrId);
  }
  return {
    positive: `${template(spec)}, ${PRESERVATION_CLAUSE}`,
    negative,
  };
}
