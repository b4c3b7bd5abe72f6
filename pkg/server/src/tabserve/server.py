"""Newline-delimited JSON fit/predict server.

One request per line, answered strictly in order on the same stream:

    {"op":"fit","xs":[[...]],"ys":[...],"id":n}   -> {"ok":true,"id":n}
    {"op":"predict","xs":[[...]],"id":n}          -> {"ok":true,"yhat":[...],"id":n}
    {"op":"ping","id":n}                          -> {"ok":true,"id":n}

Every failure is answered with {"ok":false,"error":"...","id":n} and the
connection stays alive; a malformed line that carries no usable id is
answered with id -1. Request ids must be integers and strictly increase;
a well-formed request with a valid id advances the counter even when its
op then fails, so retries need a fresh id. fit must precede predict. All
numbers must be finite.
"""

from __future__ import annotations

import json
import socket
import sys

import numpy as np

from .regressors import make_regressor


class ServerState:
    """One connection's protocol state: mode backend, fit status, last id."""

    def __init__(self, mode: str):
        self.mode = mode
        self.regressor = make_regressor(mode)
        self.fitted = False
        self.fitted_dim: int | None = None
        self.last_id = 0


def _encode(payload: dict) -> str:
    return json.dumps(payload, separators=(",", ":"), allow_nan=False)


def _error(message: str, request_id: int) -> str:
    return _encode({"ok": False, "error": message, "id": request_id})


def _parse_matrix(value):
    """Rows-of-numbers -> float array; None if the shape or values are unusable."""
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        return None
    try:
        matrix = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        return None
    if matrix.ndim != 2:
        return None
    return matrix


def handle_line(state: ServerState, line: str) -> str:
    """Process one request line and return the single response line."""
    try:
        message = json.loads(line)
    except json.JSONDecodeError:
        return _error("malformed message: not valid JSON", -1)
    if not isinstance(message, dict):
        return _error("malformed message: not a JSON object", -1)

    request_id = message.get("id")
    if not isinstance(request_id, int) or isinstance(request_id, bool):
        return _error("malformed message: missing or invalid id", -1)
    if request_id <= state.last_id:
        return _error(
            f"out-of-order id: expected >= {state.last_id + 1}, got {request_id}",
            request_id,
        )
    state.last_id = request_id

    op = message.get("op")
    if op == "ping":
        return _encode({"ok": True, "id": request_id})
    if op == "fit":
        return _handle_fit(state, message, request_id)
    if op == "predict":
        return _handle_predict(state, message, request_id)
    return _error(f"unknown op: {op}", request_id)


def _handle_fit(state: ServerState, message: dict, request_id: int) -> str:
    xs = _parse_matrix(message.get("xs"))
    ys = message.get("ys")
    if xs is None or not isinstance(ys, list) or len(xs) == 0 or len(xs) != len(ys):
        return _error("fit requires non-empty xs and ys of equal length", request_id)
    try:
        targets = np.asarray(ys, dtype=float)
    except (TypeError, ValueError):
        return _error("fit requires non-empty xs and ys of equal length", request_id)
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(targets))):
        return _error("non-finite number in xs or ys", request_id)
    try:
        state.regressor.fit(xs, targets)
    except Exception as exc:
        return _error(f"fit failed: {exc}", request_id)
    state.fitted = True
    state.fitted_dim = xs.shape[1]
    return _encode({"ok": True, "id": request_id})


def _handle_predict(state: ServerState, message: dict, request_id: int) -> str:
    if not state.fitted:
        return _error("predict before fit", request_id)
    raw = message.get("xs")
    if raw == []:
        return _encode({"ok": True, "yhat": [], "id": request_id})
    xs = _parse_matrix(raw)
    if xs is None:
        return _error("predict requires xs as a list of rows", request_id)
    if not np.all(np.isfinite(xs)):
        return _error("non-finite number in xs or ys", request_id)
    if xs.shape[1] != state.fitted_dim:
        return _error(
            f"predict dimension mismatch: fitted {state.fitted_dim}, got {xs.shape[1]}",
            request_id,
        )
    try:
        yhat = np.asarray(state.regressor.predict(xs), dtype=float)
    except Exception as exc:
        return _error(f"predict failed: {exc}", request_id)
    if not np.all(np.isfinite(yhat)):
        return _error("non-finite prediction", request_id)
    return _encode({"ok": True, "yhat": [float(v) for v in yhat], "id": request_id})


def serve_stream(state: ServerState, lines, write) -> None:
    """Answer requests from an iterable of lines until it is exhausted."""
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip():
            continue
        write(handle_line(state, line) + "\n")


def serve_stdio(mode: str) -> None:
    state = ServerState(mode)

    def write(text: str) -> None:
        sys.stdout.write(text)
        sys.stdout.flush()

    serve_stream(state, sys.stdin, write)


def serve_tcp(mode: str, host: str, port: int) -> None:
    """Serve a single connection, strictly sequential, then exit."""
    state = ServerState(mode)
    with socket.create_server((host, port)) as listener:
        conn, _ = listener.accept()
        with conn, conn.makefile("rw", encoding="utf-8", newline="\n") as stream:

            def write(text: str) -> None:
                stream.write(text)
                stream.flush()

            serve_stream(state, stream, write)
