"""Client for the line-delimited JSON model protocol, version 1.

One JSON object per line over a byte stream; requests carry a fresh integer
id the response must echo. Kinds: HELLO/HELLO_ACK to hand over model info,
PREDICT/PREDICT_ACK for probabilities, GENERATE/GENERATE_ACK for sampled
sequences, and ERROR for per-request failures. Requests are strictly
sequential; a timed-out connection is recovered with reset(), never reused.
"""

from __future__ import annotations

import json
import queue
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass

import numpy as np

from .classifiers import BadProbabilities, Modality, check_probabilities
from .errors import BridgeError, InputError

PROTOCOL_VERSION = 1


class ProtocolViolation(BridgeError):
    pass


class VersionMismatch(BridgeError):
    pass


class Timeout(BridgeError):
    pass


class ConnectionClosed(BridgeError):
    pass


class RemoteFailure(BridgeError):
    """The peer answered ERROR for this request."""


class UnsupportedOperation(BridgeError):
    pass


_EOF = object()


class StdioTransport:
    """Child process speaking the protocol on its stdin/stdout."""

    def __init__(self, cmd: list[str] | str):
        self.cmd = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        if not self.cmd:
            raise InputError("empty server command")
        self._proc: subprocess.Popen | None = None
        self._queue: queue.Queue = queue.Queue()

    def start(self) -> None:
        self._queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as err:
            raise ConnectionClosed(f"cannot start server: {err}") from err
        thread = threading.Thread(target=self._pump, args=(self._proc.stdout, self._queue))
        thread.daemon = True
        thread.start()

    @staticmethod
    def _pump(stream, q) -> None:
        for line in stream:
            q.put(line)
        q.put(_EOF)

    def send_line(self, data: bytes) -> None:
        if self._proc is None or self._proc.poll() is not None:
            raise ConnectionClosed("server process is not running")
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            raise ConnectionClosed(f"server closed stdin: {err}") from err

    def recv_line(self, timeout: float) -> bytes:
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise Timeout(f"no response within {timeout}s") from None
        if item is _EOF:
            raise ConnectionClosed("server closed its output")
        return item

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


class TcpTransport:
    """Protocol peer behind a TCP address."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = int(port)
        self._sock: socket.socket | None = None
        self._fh = None

    def start(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=10)
        except OSError as err:
            raise ConnectionClosed(f"cannot connect to {self.host}:{self.port}: {err}") from err
        self._fh = self._sock.makefile("rb")

    def send_line(self, data: bytes) -> None:
        if self._sock is None:
            raise ConnectionClosed("not connected")
        try:
            self._sock.sendall(data)
        except OSError as err:
            raise ConnectionClosed(f"send failed: {err}") from err

    def recv_line(self, timeout: float) -> bytes:
        if self._sock is None:
            raise ConnectionClosed("not connected")
        self._sock.settimeout(timeout)
        try:
            line = self._fh.readline()
        except socket.timeout:
            raise Timeout(f"no response within {timeout}s") from None
        except OSError as err:
            raise ConnectionClosed(f"receive failed: {err}") from err
        if not line:
            raise ConnectionClosed("peer closed the connection")
        return line

    def close(self) -> None:
        sock, self._sock = self._sock, None
        if sock is None:
            return
        try:
            sock.close()
        except OSError:
            pass
        self._fh = None


@dataclass(frozen=True)
class ServerInfo:
    protocol_version: int
    modality: Modality
    classes: tuple[str, ...]
    supports_generation: bool


class BridgeClient:
    """Sequential request/response client with handshake-carried model info."""

    def __init__(self, transport, timeout: float = 10.0):
        if timeout <= 0:
            raise InputError("timeout must be positive")
        self.transport = transport
        self.timeout = float(timeout)
        self.info: ServerInfo | None = None
        self._next_id = 1

    def __enter__(self) -> "BridgeClient":
        self.connect()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def connect(self) -> ServerInfo:
        self.transport.start()
        self._next_id = 1
        payload = self._request("HELLO", {"protocol_version": PROTOCOL_VERSION})
        version = payload.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise VersionMismatch(f"peer speaks protocol {version!r}, need {PROTOCOL_VERSION}")
        try:
            modality = Modality(payload["modality"])
        except (KeyError, ValueError) as err:
            raise ProtocolViolation(f"bad modality in handshake: {err}") from err
        classes = payload.get("classes")
        if not isinstance(classes, list) or not classes or not all(isinstance(c, str) for c in classes):
            raise ProtocolViolation("handshake must carry a non-empty class list")
        self.info = ServerInfo(
            protocol_version=version,
            modality=modality,
            classes=tuple(classes),
            supports_generation=bool(payload.get("supports_generation", False)),
        )
        return self.info

    def close(self) -> None:
        self.transport.close()
        self.info = None

    def reset(self) -> ServerInfo:
        """Recovery path after Timeout: tear down and re-handshake."""
        self.close()
        return self.connect()

    def _request(self, kind: str, payload: dict) -> dict:
        request_id = self._next_id
        self._next_id += 1
        line = json.dumps(
            {"kind": kind, "id": request_id, "payload": payload}, separators=(",", ":")
        )
        self.transport.send_line(line.encode("utf-8") + b"\n")
        raw = self.transport.recv_line(self.timeout)
        try:
            msg = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise ProtocolViolation(f"peer sent a malformed line: {err}") from err
        if not isinstance(msg, dict):
            raise ProtocolViolation("peer message is not an object")
        if msg.get("id") != request_id:
            raise ProtocolViolation(f"response id {msg.get('id')!r} does not echo {request_id}")
        got = msg.get("kind")
        reply_payload = msg.get("payload")
        if not isinstance(reply_payload, dict):
            raise ProtocolViolation("response payload must be an object")
        if got == "ERROR":
            raise RemoteFailure(str(reply_payload.get("message", "unspecified peer error")))
        if got != kind + "_ACK":
            raise ProtocolViolation(f"expected {kind}_ACK, got {got!r}")
        return reply_payload

    def _require_connection(self) -> ServerInfo:
        if self.info is None:
            raise InputError("connect() first")
        return self.info

    def predict(self, inputs: list[str]) -> np.ndarray:
        info = self._require_connection()
        if not inputs:
            raise InputError("predict needs at least one input")
        payload = self._request("PREDICT", {"inputs": list(inputs)})
        probs = payload.get("probs")
        if not isinstance(probs, list):
            raise ProtocolViolation("PREDICT_ACK payload lacks a probs list")
        try:
            matrix = np.asarray(probs, dtype=np.float64)
        except (ValueError, TypeError) as err:
            raise ProtocolViolation(f"probs is not a numeric matrix: {err}") from err
        if matrix.ndim != 2 or matrix.shape[0] != len(inputs):
            raise ProtocolViolation(f"probs shape {matrix.shape} for {len(inputs)} inputs")
        try:
            return check_probabilities(matrix, len(info.classes))
        except BadProbabilities as err:
            raise ProtocolViolation(f"peer sent invalid probabilities: {err}") from err

    def generate(self, prompt: str, n: int) -> list[str]:
        info = self._require_connection()
        if n < 1:
            raise InputError("n must be positive")
        if not info.supports_generation:
            raise UnsupportedOperation("peer does not support generation")
        payload = self._request("GENERATE", {"prompt": str(prompt), "n": int(n)})
        samples = payload.get("samples")
        if not isinstance(samples, list) or not all(isinstance(s, str) for s in samples):
            raise ProtocolViolation("GENERATE_ACK payload lacks a samples list of strings")
        if len(samples) != n:
            raise ProtocolViolation(f"asked for {n} samples, got {len(samples)}")
        return samples


class BridgeClassifier:
    """Adapter giving a connected BridgeClient the local classifier contract."""

    kind = "bridge"

    def __init__(self, client: BridgeClient):
        info = client._require_connection()
        self.client = client
        self.modality = info.modality
        self.class_names = info.classes
        self.n_classes = len(info.classes)

    def predict_proba(self, inputs) -> np.ndarray:
        return self.client.predict(list(inputs))
