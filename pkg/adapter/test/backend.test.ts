import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import { buildJob, EchoBackend } from "../src/backend";
import { AdapterConfig, DEFAULTS } from "../src/config";
import { NEGATIVE_PROMPT, PRESERVATION_CLAUSE } from "../src/prompts";
import { TransformRequest } from "../src/protocol";

const CONFIG: AdapterConfig = {
  echo: false,
  model: "/weights/sdxl-base",
  device: "cuda",
  workdir: null,
  ...DEFAULTS,
};

function snowRequest(params?: TransformRequest["params"]): TransformRequest {
  return {
    type: "transform",
    id: 4,
    input_path: "/in/frame.png",
    output_path: "/out/frame.png",
    spec: { id: "mr2.snow", seed: 99, environmental: { weather: "snow", density: 0.5 } },
    params,
  };
}

describe("buildJob", () => {
  it("fills the job from config defaults", () => {
    const job = buildJob(CONFIG, snowRequest());
    expect(job.model).toBe("/weights/sdxl-base");
    expect(job.device).toBe("cuda");
    expect(job.precision).toBe("fp16");
    expect(job.seed).toBe(99);
    expect(job.input_path).toBe("/in/frame.png");
    expect(job.output_path).toBe("/out/frame.png");
    expect(job.strength).toBe(0.2);
    expect(job.guidance_scale).toBe(10.0);
    expect(job.negative_prompt).toBe(NEGATIVE_PROMPT);
    expect(job.width).toBe(1024);
    expect(job.height).toBe(512);
    expect(job.prompt).toContain("snow");
    expect(job.prompt).toContain(PRESERVATION_CLAUSE);
  });

  it("request params override the defaults", () => {
    const job = buildJob(
      CONFIG,
      snowRequest({ strength: 0.35, guidance_scale: 7.5, negative_prompt: "blurry" }),
    );
    expect(job.strength).toBe(0.35);
    expect(job.guidance_scale).toBe(7.5);
    expect(job.negative_prompt).toBe("blurry");
  });

  it("partial params fall back field by field", () => {
    const job = buildJob(CONFIG, snowRequest({ strength: 0.9 }));
    expect(job.strength).toBe(0.9);
    expect(job.guidance_scale).toBe(10.0);
    expect(job.negative_prompt).toBe(NEGATIVE_PROMPT);
  });
});

describe("EchoBackend", () => {
  it("serves only the identity transform", () => {
    expect(new EchoBackend().capabilities()).toEqual(["identity"]);
  });

  it("copies input bytes to the output path", async () => {
    const dir = await mkdtemp(path.join(tmpdir(), "echo-"));
    const input = path.join(dir, "in.png");
    const output = path.join(dir, "out.png");
    const payload = Buffer.from([0x89, 0x50, 0x4e, 0x47, 1, 2, 3]);
    await writeFile(input, payload);
    await new EchoBackend().transform({
      type: "transform",
      id: 1,
      input_path: input,
      output_path: output,
      spec: { id: "identity", seed: 0 },
    });
    expect(await readFile(output)).toEqual(payload);
  });
});
