import { mkdtemp, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { PassThrough } from "node:stream";
import { text } from "node:stream/consumers";

import { describe, expect, it } from "vitest";

import { Backend, EchoBackend } from "../src/backend";
import { serve } from "../src/server";

/** Run one scripted session: feed lines, wait for the loop, return replies. */
async function session(backend: Backend, lines: object[]): Promise<Record<string, unknown>[]> {
  const input = new PassThrough();
  const output = new PassThrough();
  const loop = serve(backend, input, output);
  for (const line of lines) {
    input.write(JSON.stringify(line) + "\n");
  }
  input.end();
  await loop;
  output.end();
  const raw = await text(output);
  return raw
    .split("\n")
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line));
}

function transform(id: number, specId: string, inputPath = "/none", outputPath = "/none"): object {
  return {
    type: "transform",
    id,
    input_path: inputPath,
    output_path: outputPath,
    spec: { id: specId, seed: 0 },
  };
}

class ExplodingBackend implements Backend {
  capabilities(): string[] {
    return ["identity"];
  }
  async transform(): Promise<void> {
    throw new Error("disk full");
  }
}

describe("serve", () => {
  it("speaks first: hello with version and capabilities", async () => {
    const replies = await session(new EchoBackend(), []);
    expect(replies).toHaveLength(1);
    expect(replies[0]).toEqual({ type: "hello", version: "1", capabilities: ["identity"] });
  });

  it("identity transform copies bytes and acks with the request id", async () => {
    const dir = await mkdtemp(path.join(tmpdir(), "serve-"));
    const input = path.join(dir, "in.png");
    const output = path.join(dir, "out.png");
    await writeFile(input, Buffer.from("frame-bytes"));
    const replies = await session(new EchoBackend(), [
      { type: "hello_ack", version: "1" },
      transform(1, "identity", input, output),
    ]);
    expect(replies[1]).toEqual({ type: "result", id: 1, status: "ok" });
    expect(await readFile(output, "utf8")).toBe("frame-bytes");
  });

  it("ids echo back across consecutive requests", async () => {
    const dir = await mkdtemp(path.join(tmpdir(), "serve-"));
    const input = path.join(dir, "in.png");
    await writeFile(input, "x");
    const requests = [1, 2, 3].map((id) =>
      transform(id, "identity", input, path.join(dir, `out${id}.png`)),
    );
    const replies = await session(new EchoBackend(), [{ type: "hello_ack" }, ...requests]);
    expect(replies.slice(1).map((r) => r.id)).toEqual([1, 2, 3]);
    expect(replies.slice(1).every((r) => r.status === "ok")).toBe(true);
  });

  it("unknown spec id is refused as unsupported", async () => {
    const replies = await session(new EchoBackend(), [transform(2, "mr9.fog")]);
    expect(replies[1]).toEqual({ type: "result", id: 2, status: "error", message: "unsupported" });
  });

  it("backend failure surfaces as an error result", async () => {
    const replies = await session(new ExplodingBackend(), [transform(5, "identity")]);
    expect(replies[1]).toMatchObject({ type: "result", id: 5, status: "error" });
    expect(replies[1].message).toContain("disk full");
  });

  it("unparseable and non-protocol lines are skipped", async () => {
    const input = new PassThrough();
    const output = new PassThrough();
    const loop = serve(new EchoBackend(), input, output);
    input.write("this is not json\n");
    input.write("[1, 2, 3]\n");
    input.write('{"type": "transform"}\n');
    input.end();
    await loop;
    output.end();
    const raw = await text(output);
    expect(raw.trim().split("\n")).toHaveLength(1);
  });

  it("shutdown stops the loop before later requests", async () => {
    const replies = await session(new EchoBackend(), [
      { type: "shutdown" },
      transform(1, "identity"),
    ]);
    expect(replies).toHaveLength(1);
    expect(replies[0].type).toBe("hello");
  });
});
