/**
 * Transform backends.
 *
 * EchoBackend copies bytes and exists so the harness can exercise the wire
 * protocol without GPU weights. SdxlBackend renders prompts from the request
 * spec and hands the actual diffusion work to a bundled python worker, one
 * job per transform request.
 */

import { copyFile } from "node:fs/promises";
import { spawn } from "node:child_process";
import * as path from "node:path";

import { AdapterConfig } from "./config";
import { renderPrompt, templateIds } from "./prompts";
import { TransformRequest } from "./protocol";

export interface Backend {
  capabilities(): string[];
  transform(request: TransformRequest): Promise<void>;
}

export class EchoBackend implements Backend {
  capabilities(): string[] {
    return ["identity"];
  }

  async transform(request: TransformRequest): Promise<void> {
    await copyFile(request.input_path, request.output_path);
  }
}

/** Everything the worker needs for one img2img call. */
export interface WorkerJob {
  model: string;
  device: string;
  precision: string;
  input_path: string;
  output_path: string;
  seed: number;
  prompt: string;
  negative_prompt: string;
  strength: number;
  guidance_scale: number;
  width: number;
  height: number;
}

export function buildJob(config: AdapterConfig, request: TransformRequest): WorkerJob {
  const params = request.params ?? {};
  const negative = params.negative_prompt ?? config.negativePrompt;
  const rendered = renderPrompt(request.spec.id, request.spec, negative);
  return {
    model: config.model as string,
    device: config.device,
    precision: config.precision,
    input_path: request.input_path,
    output_path: request.output_path,
    seed: request.spec.seed,
    prompt: rendered.positive,
    negative_prompt: rendered.negative,
    strength: params.strength ?? config.strength,
    guidance_scale: params.guidance_scale ?? config.guidanceScale,
    width: config.width,
    height: config.height,
  };
}

const WORKER_SCRIPT = path.join(__dirname, "..", "worker", "sdxl_worker.py");

export class SdxlBackend implements Backend {
  constructor(private readonly config: AdapterConfig) {}

  capabilities(): string[] {
    return templateIds();
  }

  transform(request: TransformRequest): Promise<void> {
    const job = buildJob(this.config, request);
    return new Promise((resolve, reject) => {
      const child = spawn("python3", [WORKER_SCRIPT], {
        stdio: ["pipe", "inherit", "pipe"],
        cwd: this.config.workdir ?? undefined,
      });
      let stderr = "";
      child.stderr.on("data", (chunk) => {
        stderr += chunk.toString();
      });
      child.on("error", reject);
      child.on("close", (code) => {
        if (code === 0) {
          resolve();
        } else {
          const detail = stderr.trim().split("\n").pop() ?? "";
          reject(new Error(`worker exited with ${code}: ${detail}`));
        }
      });
      child.stdin.write(JSON.stringify(job));
      child.stdin.end();
    });
  }
}
