"""Reference server for the line protocol, runnable as a child process.

Serves uniform probabilities (or a saved model with --model) and
deterministic generated sequences. Behavior switches deliberately break the
protocol in specific ways so client-side validation can be exercised:
bad-sum, malformed, wrong-id, bad-version, error-reply. --once-flag PATH
drops the first PREDICT of a fresh flag file, which lets a client observe a
timeout and then recover by resetting the connection.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

from ._mix import mix64, str_key
from .bridge import PROTOCOL_VERSION

BEHAVIORS = ("normal", "bad-sum", "malformed", "wrong-id", "bad-version", "error-reply")
GENERATED_BASES = "ACGT"


class FixtureApp:
    """Turns one incoming line into zero or more reply lines."""

    def __init__(
        self,
        modality: str = "sequence",
        classes: tuple[str, ...] = ("a", "b"),
        behavior: str = "normal",
        supports_generation: bool = True,
        model=None,
        once_flag: str | None = None,
        gen_len: int = 120,
    ):
        if behavior not in BEHAVIORS:
            raise ValueError(f"unknown behavior {behavior!r}")
        self.modality = modality
        self.classes = list(classes)
        self.behavior = behavior
        self.supports_generation = supports_generation
        self.model = model
        self.once_flag = once_flag
        self.gen_len = gen_len
        self.greeted = False

    def _reply(self, kind: str, msg_id, payload: dict) -> list[bytes]:
        line = json.dumps({"kind": kind, "id": msg_id, "payload": payload}, separators=(",", ":"))
        return [line.encode("utf-8") + b"\n"]

    def _error(self, msg_id, message: str) -> list[bytes]:
        return self._reply("ERROR", msg_id, {"message": message})

    def handle_line(self, raw: bytes) -> list[bytes]:
        try:
            msg = json.loads(raw.decode("utf-8"))
            if not isinstance(msg, dict):
                raise ValueError("not an object")
        except (UnicodeDecodeError, ValueError):
            return self._error(0, "unparseable line")
        msg_id = msg.get("id")
        if not isinstance(msg_id, int):
            return self._error(0, "missing integer id")
        kind = msg.get("kind")
        payload = msg.get("payload")
        if not isinstance(payload, dict):
            return self._error(msg_id, "payload must be an object")
        if kind == "HELLO":
            return self._hello(msg_id)
        if not self.greeted:
            return self._error(msg_id, "handshake required")
        if kind == "PREDICT":
            return self._predict(msg_id, payload)
        if kind == "GENERATE":
            return self._generate(msg_id, payload)
        return self._error(msg_id, f"unknown kind {kind!r}")

    def _hello(self, msg_id: int) -> list[bytes]:
        self.greeted = True
        version = 2 if self.behavior == "bad-version" else PROTOCOL_VERSION
        return self._reply(
            "HELLO_ACK",
            msg_id,
            {
                "protocol_version": version,
                "modality": self.modality,
                "classes": self.classes,
                "supports_generation": self.supports_generation,
            },
        )

    def _predict(self, msg_id: int, payload: dict) -> list[bytes]:
        inputs = payload.get("inputs")
        if not isinstance(inputs, list) or not all(isinstance(s, str) for s in inputs):
            return self._error(msg_id, "inputs must be a list of strings")
        if self.once_flag is not None and not os.path.exists(self.once_flag):
            with open(self.once_flag, "w", encoding="utf-8") as fh:
                fh.write("dropped one predict\n")
            return []  # simulate a hang; the client should time out and reset
        if self.behavior == "malformed":
            return [b"this is not json\n"]
        if self.behavior == "error-reply":
            return self._error(msg_id, "synthetic failure")
        if self.model is not None:
            rows = self.model.predict_proba(inputs).tolist()
        else:
            uniform = 1.0 / len(self.classes)
            rows = [[uniform] * len(self.classes) for _ in inputs]
        if self.behavior == "bad-sum":
            rows = [[0.9 * p for p in row] for row in rows]
        reply_id = msg_id + 1 if self.behavior == "wrong-id" else msg_id
        return self._reply("PREDICT_ACK", reply_id, {"probs": rows})

    def _generate(self, msg_id: int, payload: dict) -> list[bytes]:
        if not self.supports_generation:
            return self._error(msg_id, "generation not supported")
        prompt = payload.get("prompt")
        n = payload.get("n")
        if not isinstance(prompt, str) or not isinstance(n, int) or n < 1:
            return self._error(msg_id, "need a prompt string and positive n")
        pk = str_key(prompt)
        samples = []
        for i in range(n):
            bases = [
                GENERATED_BASES[mix64(pk, i, j) & 3] for j in range(self.gen_len)
            ]
            samples.append("".join(bases))
        return self._reply("GENERATE_ACK", msg_id, {"samples": samples})


def serve_stream(app: FixtureApp, reader, writer) -> None:
    for raw in reader:
        for reply in app.handle_line(raw):
            writer.write(reply)
        writer.flush()


def serve_socket(app: FixtureApp, listener: socket.socket) -> None:
    """Accept one connection on an already-bound listener and serve it."""
    conn, _ = listener.accept()
    with conn:
        reader = conn.makefile("rb")
        writer = conn.makefile("wb")
        serve_stream(app, reader, writer)


def _build_app(args) -> FixtureApp:
    model = None
    modality = args.modality
    classes = tuple(args.classes.split(","))
    if args.model:
        from .classifiers import load_model

        model = load_model(args.model)
        modality = model.modality.value
        classes = model.class_names
    return FixtureApp(
        modality=modality,
        classes=classes,
        behavior=args.behavior,
        supports_generation=not args.no_generation,
        model=model,
        once_flag=args.once_flag,
        gen_len=args.gen_len,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="reference line-protocol server")
    parser.add_argument("--modality", choices=("sequence", "text"), default="sequence")
    parser.add_argument("--classes", default="a,b", help="comma-separated class names")
    parser.add_argument("--model", default=None, help="serve a saved model file")
    parser.add_argument("--behavior", choices=BEHAVIORS, default="normal")
    parser.add_argument("--no-generation", action="store_true")
    parser.add_argument("--once-flag", default=None, help="drop first PREDICT until this file exists")
    parser.add_argument("--gen-len", type=int, default=120)
    parser.add_argument("--tcp-port", type=int, default=None, help="serve one TCP connection instead")
    args = parser.parse_args(argv)
    app = _build_app(args)
    if args.tcp_port is not None:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as listener:
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind(("127.0.0.1", args.tcp_port))
            listener.listen(1)
            print(f"listening on {listener.getsockname()[1]}", file=sys.stderr, flush=True)
            serve_socket(app, listener)
        return 0
    serve_stream(app, sys.stdin.buffer, sys.stdout.buffer)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
