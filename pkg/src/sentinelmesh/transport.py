"""Inter-sidecar message transports.

Frames are canonical JSON objects ``{"type": ..., "body": ...}``.  The
loopback transport carries them length-prefixed over local TCP sockets; the
in-process transport dispatches directly and is the default for benchmarking.
Both expose the same blocking ``ask`` call, and both count traffic so tests
can assert on query behaviour.
"""

from __future__ import annotations

import json
import random
import socket
import socketserver
import threading
import time
from typing import Callable


Handler = Callable[[dict], dict]


class TransportError(RuntimeError):
    pass


class TransportTimeout(TransportError):
    pass


def encode_frame(frame: dict) -> bytes:
    return json.dumps(frame, sort_keys=True, separators=(",", ":")).encode("utf-8")


def decode_frame(data: bytes) -> dict:
    return json.loads(data.decode("utf-8"))


class InProcessTransport:
    """Direct dispatch between sidecars living in one process."""

    def __init__(self) -> None:
        self._handlers: dict[str, Handler] = {}
        self.query_count = 0
        self.per_domain: dict[str, int] = {}
        self._lock = threading.Lock()

    def register(self, domain: str, handler: Handler) -> None:
        self._handlers[domain] = handler

    def ask(self, domain: str, frame: dict, timeout: float = 0.5) -> dict:
        with self._lock:
            self.query_count += 1
            self.per_domain[domain] = self.per_domain.get(domain, 0) + 1
        handler = self._handlers.get(domain)
        if handler is None:
            raise TransportError(f"no sidecar registered for domain {domain!r}")
        # round-trip through the wire encoding to keep semantics identical
        # to the socket transport
        return decode_frame(encode_frame(handler(decode_frame(encode_frame(frame)))))

    def close(self) -> None:
        self._handlers.clear()


class SimulatedTransport:
    """In-process transport with injectable latency and loss."""

    def __init__(self, latency: float = 0.0, loss_rate: float = 0.0, seed: int = 0):
        self._inner = InProcessTransport()
        self.latency = latency
        self.loss_rate = loss_rate
        self._rng = random.Random(seed)

    def register(self, domain: str, handler: Handler) -> None:
        self._inner.register(domain, handler)

    @property
    def query_count(self) -> int:
        return self._inner.query_count

    @property
    def per_domain(self) -> dict[str, int]:
        return self._inner.per_domain

    def ask(self, domain: str, frame: dict, timeout: float = 0.5) -> dict:
        if self.loss_rate and self._rng.random() < self.loss_rate:
            raise TransportTimeout(f"simulated loss talking to {domain!r}")
        if self.latency:
            time.sleep(self.latency)
        return self._inner.ask(domain, frame, timeout)

    def close(self) -> None:
        self._inner.close()


class _FrameTCPHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        try:
            header = _recv_exact(self.request, 4)
            length = int.from_bytes(header, "big")
            payload = _recv_exact(self.request, length)
            response = self.server.frame_handler(decode_frame(payload))  # type: ignore[attr-defined]
            body = encode_frame(response)
            self.request.sendall(len(body).to_bytes(4, "big") + body)
        except (ConnectionError, OSError):
            pass


def _recv_exact(sock: socket.socket, size: int) -> bytes:
    chunks = []
    remaining = size
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class LoopbackTransport:
    """Length-prefixed JSON frames over 127.0.0.1 TCP sockets."""

    def __init__(self) -> None:
        self._servers: dict[str, socketserver.ThreadingTCPServer] = {}
        self._addresses: dict[str, tuple[str, int]] = {}
        self.query_count = 0
        self.per_domain: dict[str, int] = {}
        self._lock = threading.Lock()

    def register(self, domain: str, handler: Handler) -> None:
        server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _FrameTCPHandler)
        server.daemon_threads = True
        server.frame_handler = handler  # type: ignore[attr-defined]
        # small poll interval keeps shutdown() from stalling short-lived meshes
        thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.01), daemon=True)
        thread.start()
        self._servers[domain] = server
        self._addresses[domain] = server.server_address  # type: ignore[assignment]

    def ask(self, domain: str, frame: dict, timeout: float = 0.5) -> dict:
        with self._lock:
            self.query_count += 1
            self.per_domain[domain] = self.per_domain.get(domain, 0) + 1
        address = self._addresses.get(domain)
        if address is None:
            raise TransportError(f"no sidecar listening for domain {domain!r}")
        try:
            with socket.create_connection(address, timeout=timeout) as sock:
                sock.settimeout(timeout)
                body = encode_frame(frame)
                sock.sendall(len(body).to_bytes(4, "big") + body)
                header = _recv_exact(sock, 4)
                return decode_frame(_recv_exact(sock, int.from_bytes(header, "big")))
        except socket.timeout as exc:
            raise TransportTimeout(str(exc)) from exc
        except OSError as exc:
            raise TransportError(str(exc)) from exc

    def close(self) -> None:
        for server in self._servers.values():
            server.shutdown()
            server.server_close()
        self._servers.clear()
        self._addresses.clear()
