"""Client for the newline-delimited JSON fit/predict wire protocol.

Messages are single-line JSON objects over a stream transport (the stdio of
a child process, or a TCP connection). Requests carry a monotonically
increasing integer ``id`` and are answered strictly in order:

    {"op":"fit","xs":[[...]],"ys":[...],"id":n}   -> {"ok":true,"id":n}
    {"op":"predict","xs":[[...]],"id":n}          -> {"ok":true,"yhat":[...],"id":n}
    {"op":"ping","id":n}                          -> {"ok":true,"id":n}

Any failure is answered with {"ok":false,"error":"...","id":n}. All numbers
are finite doubles in decimal text; the client refuses to send non-finite
values and raises :class:`ProtocolError` (with the offending request and
raw response attached) on any violation from the server side.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess

import numpy as np


class ProtocolError(RuntimeError):
    """Wire-protocol failure with diagnostics attached."""

    def __init__(self, message: str, request: str | None = None, response: str | None = None):
        detail = message
        if request is not None:
            detail += f" | request: {request}"
        if response is not None:
            detail += f" | response: {response}"
        super().__init__(detail)
        self.request = request
        self.response = response


class StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command):
        if isinstance(command, str):
            command = shlex.split(command)
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"failed to start server process {command!r}: {exc}") from exc

    def send_line(self, line: str) -> None:
        if self._proc.poll() is not None:
            raise ProtocolError(f"server process exited with code {self._proc.returncode}")
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"server pipe closed: {exc}") from exc

    def recv_line(self) -> str:
        line = self._proc.stdout.readline()
        if line == "":
            raise ProtocolError(
                f"server closed the connection (exit code {self._proc.poll()})"
            )
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()


class TcpTransport:
    """Line transport over a TCP connection."""

    def __init__(self, host: str, port: int):
        try:
            self._sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise ProtocolError(f"failed to connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
            self._file.flush()
        except OSError as exc:
            raise ProtocolError(f"connection lost: {exc}") from exc

    def recv_line(self) -> str:
        line = self._file.readline()
        if line == "":
            raise ProtocolError("server closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


def open_transport(spec: str):
    """Build a transport from a spec string.

    ``stdio:<command>`` launches the command as a child process;
    ``tcp:<host>:<port>`` connects to a listening server.
    """
    if spec.startswith("stdio:"):
        return StdioTransport(spec[len("stdio:"):])
    if spec.startswith("tcp:"):
        rest = spec[len("tcp:"):]
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp transport spec: {spec!r} (want tcp:host:port)")
        return TcpTransport(host, int(port))
    raise ValueError(f"unknown transport spec: {spec!r} (want stdio:... or tcp:...)")


def encode_request(payload: dict) -> str:
    """Canonical single-line encoding shared with the server side."""
    return json.dumps(payload, separators=(",", ":"), allow_nan=False)


class ProtocolClient:
    """Sequential request/response client with a monotonic id counter."""

    def __init__(self, transport):
        self.transport = transport
        self._next_id = 1

    def request(self, payload: dict) -> dict:
        request_id = self._next_id
        self._next_id += 1
        line = encode_request({**payload, "id": request_id})
        self.transport.send_line(line)
        raw = self.transport.recv_line()
        try:
            response = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable server response: {exc}", line, raw) from exc
        if not isinstance(response, dict):
            raise ProtocolError("server response is not a JSON object", line, raw)
        if response.get("id") != request_id:
            raise ProtocolError(
                f"response id {response.get('id')!r} does not match request id {request_id}",
                line, raw,
            )
        if response.get("ok") is not True:
            raise ProtocolError(
                f"server error: {response.get('error', 'unknown failure')}", line, raw
            )
        return response

    def ping(self) -> None:
        self.request({"op": "ping"})

    def fit(self, xs, ys) -> None:
        self.request({"op": "fit", "xs": _matrix(xs), "ys": _vector(ys)})

    def predict(self, xs) -> list[float]:
        response = self.request({"op": "predict", "xs": _matrix(xs)})
        yhat = response.get("yhat")
        if not isinstance(yhat, list) or len(yhat) != len(xs):
            raise ProtocolError(
                f"predict returned {len(yhat) if isinstance(yhat, list) else yhat!r} "
                f"values for {len(xs)} queries"
            )
        return [float(v) for v in yhat]

    def close(self) -> None:
        self.transport.close()


class RemoteSurrogate:
    """Surrogate backed by a protocol client; refitted on every fit call."""

    needs_normalized_targets = True

    def __init__(self, client: ProtocolClient):
        self._client = client

    def fit(self, coords: np.ndarray, values: np.ndarray) -> None:
        self._client.fit(_matrix(coords), _vector(values))

    def predict(self, queries: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        return np.asarray(self._client.predict(_matrix(q)), dtype=float)


def _vector(values) -> list[float]:
    out = [float(v) for v in np.asarray(values, dtype=float)]
    if not all(np.isfinite(out)):
        raise ValueError("wire protocol forbids non-finite numbers")
    return out


def _matrix(rows) -> list[list[float]]:
    arr = np.atleast_2d(np.asarray(rows, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError("wire protocol forbids non-finite numbers")
    return [[float(v) for v in row] for row in arr]
