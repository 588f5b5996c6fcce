/**
 * Wire protocol server loop.
 *
 * The adapter speaks first: a hello advertising capabilities. After that it
 * answers transform requests one at a time until shutdown or EOF.
 */

import { createInterface } from "node:readline";
import { Readable, Writable } from "node:stream";

import { Backend } from "./backend";
import {
  helloMessage,
  isTransform,
  parseMessage,
  resultError,
  resultOk,
  writeMessage,
} from "./protocol";

export async function serve(backend: Backend, input: Readable, output: Writable): Promise<void> {
  writeMessage(output, helloMessage(backend.capabilities()));
  const supported = new Set(backend.capabilities());
  const lines = createInterface({ input, crlfDelay: Infinity });
  for await (const line of lines) {
    const message = parseMessage(line);
    if (message === null) {
      continue;
    }
    if (message.type === "shutdown") {
      return;
    }
    if (message.type === "hello_ack") {
      continue;
    }
    if (!isTransform(message)) {
      continue;
    }
    if (!supported.has(message.spec.id)) {
      writeMessage(output, resultError(message.id, "unsupported"));
      continue;
    }
    try {
      await backend.transform(message);
      writeMessage(output, resultOk(message.id));
    } catch (err) {
      writeMessage(output, resultError(message.id, err instanceof Error ? err.message : String(err)));
    }
  }
}
