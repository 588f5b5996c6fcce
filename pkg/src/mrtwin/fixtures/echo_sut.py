"""Constant-steering SUT: answers every predict with a fixed decision.

Modes mirror the generator fixture where they make sense:

* ok           -- well-behaved constant prediction (default)
* silent       -- completes the handshake, never answers
* out-of-range -- reports steering 3.0 so clamping can be observed
* crash        -- exits abruptly on the first predict
* garbage      -- answers with a non-JSON line
"""

from __future__ import annotations

import argparse
import json
import os
import sys


def serve(mode: str, steering: float, throttle: float | None) -> int:
    out = sys.stdout
    out.write(json.dumps({
        "type": "hello",
        "version": "1",
        "capabilities": ["predict"],
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
        if kind == "predict":
            if mode == "silent":
                continue
            if mode == "crash":
                os._exit(13)
            if mode == "garbage":
                out.write("not json either\n")
                out.flush()
                continue
            value = 3.0 if mode == "out-of-range" else steering
            response = {"type": "prediction", "id": message["id"], "steering": value}
            if throttle is not None:
                response["throttle"] = throttle
            out.write(json.dumps(response) + "\n")
            out.flush()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--mode", default="ok", choices=["ok", "silent", "out-of-range", "crash", "garbage"]
    )
    parser.add_argument("--steering", type=float, default=0.25)
    parser.add_argument("--throttle", type=float, default=None)
    args = parser.parse_args(argv)
    return serve(args.mode, args.steering, args.throttle)


if __name__ == "__main__":
    sys.exit(main())
