"""Sessions with generator and SUT child processes.

Framing is newline-delimited UTF-8 JSON over the child's stdin/stdout, one
object per line. The child speaks first: it must emit a hello carrying the
protocol version and its capability list, and the harness answers with a
hello_ack before sending any request. Every request carries a monotonically
increasing id that the response must echo; an unexpected id is treated as a
malformed response, never silently skipped. All waits are bounded by a
deadline, resolved from an explicit argument, an environment variable, or
the 120 s default, in that order. The full message grammar lives in
docs/protocol.md.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    GeneratorReportedError,
    GeneratorTimeout,
    GeneratorUnavailable,
    HandshakeTimeout,
    LaunchFailure,
    MalformedResponse,
    ProtocolVersionMismatch,
    SutCrashed,
    SutTimeout,
    UnsupportedTransform,
)
from .image import png_size
from .transforms import TransformationSpec, spec_to_wire

PROTOCOL_VERSION = "1"

GENERATOR_TIMEOUT_ENV = "MRTWIN_GEN_TIMEOUT_MS"
SUT_TIMEOUT_ENV = "MRTWIN_SUT_TIMEOUT_MS"
DEFAULT_TIMEOUT_MS = 120_000

_EOF = object()


def resolve_timeout_ms(explicit: int | None, env_var: str) -> int:
    if explicit is not None:
        return explicit
    raw = os.environ.get(env_var)
    if raw is not None:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"{env_var} must be an integer, got {raw!r}") from None
    return DEFAULT_TIMEOUT_MS


class WireSession:
    """One child process plus the bookkeeping to talk to it safely.

    A session is single-owner: requests are serialized by the caller. The
    ``role`` decides which error types waits translate into, so generator
    sessions raise generator errors and SUT sessions raise SUT errors.
    """

    def __init__(self, command: Sequence[str], role: str, timeout_ms: int,
                 workdir: str | Path | None = None):
        self.role = role
        self.timeout_ms = timeout_ms
        self.capabilities: tuple[str, ...] = ()
        self._next_id = 1
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                cwd=str(workdir) if workdir else None,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as err:
            raise LaunchFailure(f"cannot start {command[0]!r}: {err}") from err
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._handshake()

    # --- plumbing ---

    def _pump(self) -> None:
        stdout = self._proc.stdout
        assert stdout is not None
        for line in stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def _timeout_error(self) -> Exception:
        if self.role == "sut":
            return SutTimeout(f"no response within {self.timeout_ms} ms")
        return GeneratorTimeout(f"no response within {self.timeout_ms} ms")

    def _gone_error(self) -> Exception:
        code = self._proc.poll()
        detail = f"process exited with code {code}" if code is not None else "stdout closed"
        if self.role == "sut":
            return SutCrashed(detail)
        return GeneratorUnavailable(detail)

    def _next_message(self, timeout_ms: int, during_handshake: bool = False) -> dict:
        try:
            line = self._lines.get(timeout=timeout_ms / 1000.0)
        except queue.Empty:
            if during_handshake:
                raise HandshakeTimeout(f"no hello within {timeout_ms} ms") from None
            raise self._timeout_error() from None
        if line is _EOF:
            if during_handshake:
                raise LaunchFailure("process ended before completing the handshake")
            raise self._gone_error()
        try:
            message = json.loads(line)
        except json.JSONDecodeError as err:
            raise MalformedResponse(f"not a JSON object: {line!r}") from err
        if not isinstance(message, dict):
            raise MalformedResponse(f"expected an object, got: {line!r}")
        return message

    def _send(self, message: dict) -> None:
        stdin = self._proc.stdin
        assert stdin is not None
        try:
            stdin.write(json.dumps(message) + "\n")
            stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise self._gone_error() from err

    def _handshake(self) -> None:
        try:
            hello = self._next_message(self.timeout_ms, during_handshake=True)
        except Exception:
            self.close()
            raise
        if hello.get("type") != "hello":
            self.close()
            raise MalformedResponse(f"expected hello, got {hello.get('type')!r}")
        version = hello.get("version")
        if version != PROTOCOL_VERSION:
            self.close()
            raise ProtocolVersionMismatch(
                f"peer speaks version {version!r}, this harness speaks {PROTOCOL_VERSION!r}"
            )
        caps = hello.get("capabilities", [])
        if not isinstance(caps, list) or not all(isinstance(c, str) for c in caps):
            self.close()
            raise MalformedResponse("hello capabilities must be a list of strings")
        self.capabilities = tuple(caps)
        self._send({"type": "hello_ack", "version": PROTOCOL_VERSION})

    def _roundtrip(self, message: dict, expect_type: str) -> dict:
        request_id = self._next_id
        self._next_id += 1
        message = {**message, "id": request_id}
        self._send(message)
        response = self._next_message(self.timeout_ms)
        if response.get("id") != request_id:
            raise MalformedResponse(
                f"response id {response.get('id')!r} does not match request id {request_id}"
            )
        if response.get("type") != expect_type:
            raise MalformedResponse(
                f"expected {expect_type!r}, got {response.get('type')!r}"
            )
        return response

    # --- requests ---

    def request_transform(
        self,
        spec: TransformationSpec,
        input_path: str | Path,
        output_path: str | Path,
        params: Mapping[str, object] | None = None,
    ) -> Path:
        """Ask the generator to synthesize a twin. Returns the output path
        once the generator confirms it and the PNG matches the source's
        dimensions."""
        if spec.id not in self.capabilities:
            raise UnsupportedTransform(
                f"{spec.id!r} not in advertised capabilities {list(self.capabilities)}"
            )
        message: dict = {
            "type": "transform",
            "input_path": str(input_path),
            "output_path": str(output_path),
            "spec": spec_to_wire(spec),
        }
        if params:
            message["params"] = dict(params)
        response = self._roundtrip(message, "result")
        status = response.get("status")
        if status == "error":
            raise GeneratorReportedError(str(response.get("message", "unspecified")))
        if status != "ok":
            raise MalformedResponse(f"result status must be ok or error, got {status!r}")
        out = Path(output_path)
        if not out.is_file():
            raise MalformedResponse(f"generator reported ok but {out} does not exist")
        try:
            produced = png_size(out)
        except Exception as err:
            raise MalformedResponse(f"generator output is not a readable PNG: {err}") from err
        expected = png_size(input_path)
        if produced != expected:
            raise MalformedResponse(
                f"twin is {produced[0]}x{produced[1]}, source is {expected[0]}x{expected[1]}"
            )
        return out

    def request_predict(self, input_path: str | Path) -> tuple[float, float | None]:
        """Ask the SUT for a decision on a frame. Returns (steering, throttle)."""
        response = self._roundtrip(
            {"type": "predict", "input_path": str(input_path)}, "prediction"
        )
        steering = response.get("steering")
        if not isinstance(steering, (int, float)) or isinstance(steering, bool):
            raise MalformedResponse(f"prediction steering must be a number, got {steering!r}")
        throttle = response.get("throttle")
        if throttle is not None and (
            not isinstance(throttle, (int, float)) or isinstance(throttle, bool)
        ):
            raise MalformedResponse(f"prediction throttle must be a number, got {throttle!r}")
        return float(steering), None if throttle is None else float(throttle)

    # --- lifecycle ---

    def close(self) -> None:
        """Shut the child down. Idempotent; never raises. An in-flight
        request is abandoned: its response, if any, is discarded."""
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.poll() is None and self._proc.stdin is not None:
                try:
                    self._proc.stdin.write(json.dumps({"type": "shutdown"}) + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError):
                    pass
            if self._proc.stdin is not None:
                try:
                    self._proc.stdin.close()
                except OSError:
                    pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
        finally:
            if self._proc.stdout is not None:
                try:
                    self._proc.stdout.close()
                except OSError:
                    pass

    def __enter__(self) -> "WireSession":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()

    def __del__(self) -> None:
        try:
            self.close()
        except Exception:
            pass


def open_generator(
    command: Sequence[str],
    timeout_ms: int | None = None,
    workdir: str | Path | None = None,
) -> WireSession:
    """Launch a generator child and complete the handshake."""
    resolved = resolve_timeout_ms(timeout_ms, GENERATOR_TIMEOUT_ENV)
    return WireSession(command, role="generator", timeout_ms=resolved, workdir=workdir)


def open_sut(
    command: Sequence[str],
    timeout_ms: int | None = None,
    workdir: str | Path | None = None,
) -> WireSession:
    """Launch an external SUT child and complete the handshake."""
    resolved = resolve_timeout_ms(timeout_ms, SUT_TIMEOUT_ENV)
    return WireSession(command, role="sut", timeout_ms=resolved, workdir=workdir)
