import { EchoBackend, SdxlBackend } from "./backend";
import { parseArgs, UsageError, USAGE } from "./config";
import { serve } from "./server";

async function main(): Promise<number> {
  let config;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`${err.message}\n${USAGE}\n`);
      return 2;
    }
    throw err;
  }
  const backend = config.echo ? new EchoBackend() : new SdxlBackend(config);
  await serve(backend, process.stdin, process.stdout);
  // stdin would otherwise keep the event loop alive after shutdown
  process.stdin.destroy();
  return 0;
}

main().then(
  (code) => {
    process.exitCode = code;
  },
  (err) => {
    process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exitCode = 1;
  },
);
