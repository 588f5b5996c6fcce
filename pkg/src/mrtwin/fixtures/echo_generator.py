"""Echo generator: answers transform requests by byte-copying the source.

Modes (via --mode) deliberately break the protocol in specific ways:

* echo       -- well-behaved copy generator (default)
* no-hello   -- never sends the hello
* bad-version-- hello advertises an unknown protocol version
* silent     -- completes the handshake, never answers requests
* garbage    -- answers requests with a non-JSON line
* wrong-id   -- answers with a result whose id is off by one
* error      -- answers every request with status=error
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys


def serve(mode: str, capabilities: list[str]) -> int:
    out = sys.stdout
    if mode != "no-hello":
        version = "99" if mode == "bad-version" else "1"
        out.write(json.dumps({
            "type": "hello",
            "version": version,
            "capabilities": capabilities,
        }) + "\n")
        out.flush()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        message = json.loads(line)
        kind = message.get("type")
        if kind == "hello_ack":
            continue
        if kind == "shutdown":
            return 0
        if kind == "transform":
            if mode == "silent":
                continue
            if mode == "garbage":
                out.write("this is not json\n")
                out.flush()
                continue
            request_id = message["id"]
            if mode == "wrong-id":
                request_id = request_id + 1
            if mode == "error" or message["spec"]["id"] not in capabilities:
                out.write(json.dumps({
                    "type": "result",
                    "id": request_id,
                    "status": "error",
                    "message": "unsupported",
                }) + "\n")
                out.flush()
                continue
            shutil.copyfile(message["input_path"], message["output_path"])
            out.write(json.dumps({
                "type": "result",
                "id": request_id,
                "status": "ok",
            }) + "\n")
            out.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--mode",
        default="echo",
        choices=["echo", "no-hello", "bad-version", "silent", "garbage", "wrong-id", "error"],
    )
    parser.add_argument(
        "--capabilities",
        default="identity",
        help="comma-separated transform ids to advertise and serve",
    )
    args = parser.parse_args(argv)
    return serve(args.mode, [c for c in args.capabilities.split(",") if c])


if __name__ == "__main__":
    sys.exit(main())
