/**
 * Adapter configuration and argv parsing.
 *
 * The model settings are fixed at the values the harness assumes
 * (strength 0.2, guidance 10.0, fp16, 1024x512); per-request params on the
 * wire may override strength, guidance, and the negative prompt.
 */

import { NEGATIVE_PROMPT } from "./prompts";

export class UsageError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "UsageError";
  }
}

export interface AdapterConfig {
  echo: boolean;
  model: string | null;
  device: string;
  workdir: string | null;
  precision: "fp16";
  strength: number;
  guidanceScale: number;
  negativePrompt: string;
  width: number;
  height: number;
}

export const DEFAULTS: Omit<AdapterConfig, "echo" | "model" | "device" | "workdir"> = {
  precision: "fp16",
  strength: 0.2,
  guidanceScale: 10.0,
  negativePrompt: NEGATIVE_PROMPT,
  width: 1024,
  height: 512,
};

export function validate(config: AdapterConfig): AdapterConfig {
  if (!(config.strength > 0 && config.strength <= 1)) {
    throw new UsageError(`strength must be in (0, 1], got ${config.strength}`);
  }
  if (!(config.guidanceScale > 0)) {
    throw new UsageError(`guidance scale must be positive, got ${config.guidanceScale}`);
  }
  if (!config.echo && config.model === null) {
    throw new UsageError("either --echo or --model <path> is required");
  }
  return config;
}

export const USAGE = "usage: sdxl-adapter (--echo | --model <path>) [--device <name>] [--workdir <dir>]";

export function parseArgs(argv: string[]): AdapterConfig {
  const config: AdapterConfig = {
    echo: false,
    model: null,
    device: "cuda",
    workdir: null,
    ...DEFAULTS,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    switch (flag) {
      case "--echo":
        config.echo = true;
        break;
      case "--model":
      case "--device":
      case "--workdir": {
        const value = argv[++i];
        if (value === undefined) {
          throw new UsageError(`${flag} requires a value`);
        }
        if (flag === "--model") config.model = value;
        else if (flag === "--device") config.device = value;
        else config.workdir = value;
        break;
      }
      default:
        throw new UsageError(`unknown flag: ${flag}`);
    }
  }
  return validate(config);
}
