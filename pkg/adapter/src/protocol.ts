/**
 * Wire grammar for generator sessions, version "1".
 *
 * One JSON object per line over stdin/stdout. This process is the child, so
 * it speaks first: a hello carrying the protocol version and the transform
 * ids it serves. Every response must echo the id of the request it answers.
 */

export const PROTOCOL_VERSION = "1";

export interface WireSpec {
  id: string;
  seed: number;
  environmental?: { weather: string | null; density: number };
  geometric?: { lane_narrow: number };
  semantic?: {
    amplitude: number;
    operation: string | null;
    argument: string | null;
    preserve: string[];
  };
}

export interface TransformParams {
  strength?: number;
  guidance_scale?: number;
  negative_prompt?: string;
}

export interface TransformRequest {
  type: "transform";
  id: number;
  input_path: string;
  output_path: string;
  spec: WireSpec;
  params?: TransformParams;
}

export type InboundMessage =
  | { type: "hello_ack"; version?: string }
  | { type: "shutdown" }
  | TransformRequest;

export function helloMessage(capabilities: string[]): object {
  return { type: "hello", version: PROTOCOL_VERSION, capabilities };
}

export function resultOk(id: number): object {
  return { type: "result", id, status: "ok" };
}

export function resultError(id: number, message: string): object {
  return { type: "result", id, status: "error", message };
}

export function writeMessage(out: NodeJS.WritableStream, message: object): void {
  out.write(JSON.stringify(message) + "\n");
}

/** Parse one inbound line; null for anything that is not a JSON object. */
export function parseMessage(line: string): Record<string, unknown> | null {
  let value: unknown;
  try {
    value = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    return null;
  }
  return value as Record<string, unknown>;
}

export function isTransform(message: Record<string, unknown>): message is TransformRequest & Record<string, unknown> {
  return (
    message.type === "transform" &&
    typeof message.id === "number" &&
    typeof message.input_path === "string" &&
    typeof message.output_path === "string" &&
    typeof message.spec === "object" &&
    message.spec !== null &&
    typeof (message.spec as WireSpec).id === "string"
  );
}
