"""Console/agent wire protocol.

Frames are newline-delimited UTF-8 JSON objects ``{"kind", "seq", "payload"}``.
The agent sends ``connect``, ``request``, ``notification`` (meaning "wait for
the next notification") and ``disconnect``. The console answers with
``response``, ``notification`` or ``error`` frames. Responses echo the
request ``seq``; notifications carry seq 0.

:class:`ConsoleEndpoint` holds the protocol state machine. It is driven
either in-process by :class:`LoopbackLink` or over TCP by
:class:`ConsoleServer` and :class:`SocketLink`.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
from dataclasses import asdict, dataclass
from typing import Protocol

from .console import Console
from .world import Deadlock

log = logging.getLogger(__name__)

KINDS = ("connect", "request", "response", "notification", "disconnect", "error")

# Error payload prefixes.
BUSY = "busy"
DEADLOCK = "deadlock"
PROTOCOL = "protocol"
NOT_CONNECTED = "not-connected"


class LinkError(RuntimeError):
    pass


class RefusedError(LinkError):
    pass


class DeadlockError(LinkError):
    pass


class ProtocolError(LinkError):
    pass


@dataclass(frozen=True)
class Frame:
    kind: str
    seq: int = 0
    payload: str = ""

    def encode(self) -> bytes:
        return (json.dumps(asdict(self)) + "\n").encode("utf-8")

    @classmethod
    def decode(cls, line: bytes | str) -> "Frame":
        text = line.decode("utf-8") if isinstance(line, bytes) else line
        data = json.loads(text)
        if not isinstance(data, dict) or set(data) != {"kind", "seq", "payload"}:
            raise ValueError("frame must have exactly kind, seq and payload")
        if data["kind"] not in KINDS:
            raise ValueError(f"unknown frame kind {data['kind']!r}")
        if not isinstance(data["seq"], int) or not isinstance(data["payload"], str):
            raise ValueError("seq must be an integer and payload a string")
        return cls(data["kind"], data["seq"], data["payload"])


def error_frame(seq: int, code: str, detail: str) -> Frame:
    return Frame("error", seq, f"{code}: {detail}")


class ConsoleEndpoint:
    """Protocol state for one console: single attached agent, one request in flight."""

    def __init__(self, console: Console):
        self.console = console
        self.attached = False
        self._outbox: list[Frame] = []
        self._lock = threading.Lock()

    def submit(self, frame: Frame) -> None:
        with self._lock:
            if self._outbox and frame.kind in ("request", "notification"):
                self._outbox.append(error_frame(frame.seq, PROTOCOL, "a request is already in flight"))
                return
            self._outbox.append(self._handle(frame))

    def submit_raw(self, line: bytes | str) -> None:
        try:
            frame = Frame.decode(line)
        except (ValueError, UnicodeDecodeError) as exc:
            with self._lock:
                self._outbox.append(error_frame(0, PROTOCOL, f"malformed frame: {exc}"))
            return
        self.submit(frame)

    def collect(self) -> list[Frame]:
        with self._lock:
            out, self._outbox = self._outbox, []
        return out

    def detach(self) -> None:
        with self._lock:
            self.attached = False

    def _handle(self, frame: Frame) -> Frame:
        if frame.kind == "connect":
            if self.attached:
                return error_frame(frame.seq, BUSY, "an agent is already attached")
            self.attached = True
            return Frame("response", frame.seq, self.console.dashboard())
        if not self.attached:
            return error_frame(frame.seq, NOT_CONNECTED, "connect first")
        if frame.kind == "request":
            return Frame("response", frame.seq, self.console.execute(frame.payload))
        if frame.kind == "notification":
            try:
                return Frame("notification", 0, self.console.wait())
            except Deadlock as exc:
                return error_frame(frame.seq, DEADLOCK, str(exc))
        if frame.kind == "disconnect":
            self.attached = False
            return Frame("response", frame.seq, "")
        return error_frame(frame.seq, PROTOCOL, f"unexpected {frame.kind} frame from agent")


def _raise_for(frame: Frame) -> Frame:
    if frame.kind != "error":
        return frame
    code, _, detail = frame.payload.partition(": ")
    if code == DEADLOCK:
        raise DeadlockError(detail)
    if code in (BUSY, NOT_CONNECTED):
        raise RefusedError(frame.payload)
    raise ProtocolError(frame.payload)


class Link(Protocol):
    def connect(self) -> str: ...
    def request(self, line: str) -> str: ...
    def await_event(self, timeout: float | None = None) -> str: ...
    def disconnect(self) -> None: ...


class LoopbackLink:
    """In-process link with the same contract as :class:`SocketLink`."""

    def __init__(self, endpoint: ConsoleEndpoint):
        self.endpoint = endpoint
        self._seq = 0

    def _exchange(self, kind: str, payload: str = "") -> Frame:
        self._seq += 1
        seq = 0 if kind == "notification" else self._seq
        self.endpoint.submit(Frame(kind, seq, payload))
        (reply,) = self.endpoint.collect()
        return _raise_for(reply)

    def connect(self) -> str:
        return self._exchange("connect").payload

    def request(self, line: str) -> str:
        return self._exchange("request", line).payload

    def await_event(self, timeout: float | None = None) -> str:
        return self._exchange("notification").payload

    def disconnect(self) -> None:
        self._exchange("disconnect")


class ConsoleServer:
    """TCP server exposing one :class:`ConsoleEndpoint` to a single client at a time."""

    def __init__(self, endpoint: ConsoleEndpoint, host: str = "127.0.0.1", port: int = 0):
        self.endpoint = endpoint
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()[:2]
        self._client: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stopping = threading.Event()

    def start(self) -> "ConsoleServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._sock.settimeout(0.2)
        while not self._stopping.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            if self._client is not None:
                conn.sendall(error_frame(0, BUSY, "an agent is already attached").encode())
                conn.close()
                continue
            self._client = conn
            threading.Thread(target=self._serve_client, args=(conn,), daemon=True).start()

    def _serve_client(self, conn: socket.socket) -> None:
        buffer = b""
        try:
            while self._client is conn:
                chunk = conn.recv(65536)
                if not chunk:
                    break
                buffer += chunk
                *lines, buffer = buffer.split(b"\n")
                was_attached = self.endpoint.attached
                # Frames that arrive together are submitted before any reply
                # is flushed, so pipelined requests are detected.
                for line in lines:
                    if line.strip():
                        self.endpoint.submit_raw(line)
                replies = self.endpoint.collect()
                if was_attached and not self.endpoint.attached:
                    # Clean disconnect: free the slot before replying so an
                    # immediate reconnect is accepted.
                    self._client = None
                for frame in replies:
                    conn.sendall(frame.encode())
        except OSError as exc:
            log.debug("client connection closed: %s", exc)
        finally:
            conn.close()
            if self._client is conn:
                self.endpoint.detach()
                self._client = None

    def close(self) -> None:
        self._stopping.set()
        self._sock.close()
        if self._client is not None:
            try:
                self._client.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=2)

    def __enter__(self) -> "ConsoleServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()


class SocketLink:
    """Blocking agent-side client for :class:`ConsoleServer`."""

    def __init__(self, host: str, port: int, timeout: float | None = 30.0):
        self.address = (host, port)
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._reader = None
        self._seq = 0

    def _send(self, frame: Frame) -> None:
        if self._sock is None:
            raise RefusedError("not connected")
        self._sock.sendall(frame.encode())

    def _receive(self, timeout: float | None) -> Frame:
        self._sock.settimeout(timeout)
        line = self._reader.readline()
        if not line:
            raise LinkError("console closed the connection")
        return Frame.decode(line)

    def _exchange(self, kind: str, payload: str = "", timeout: float | None = None) -> Frame:
        self._seq += 1
        seq = 0 if kind == "notification" else self._seq
        self._send(Frame(kind, seq, payload))
        reply = self._receive(timeout if timeout is not None else self.timeout)
        if reply.kind == "response" and reply.seq != seq:
            raise ProtocolError(f"response seq {reply.seq} does not match request {seq}")
        return _raise_for(reply)

    def connect(self) -> str:
        self._sock = socket.create_connection(self.address, timeout=self.timeout)
        self._reader = self._sock.makefile("rb")
        try:
            return self._exchange("connect").payload
        except LinkError:
            self.close()
            raise

    def request(self, line: str) -> str:
        return self._exchange("request", line).payload

    def await_event(self, timeout: float | None = None) -> str:
        return self._exchange("notification", timeout=timeout).payload

    def disconnect(self) -> None:
        try:
            self._exchange("disconnect")
        finally:
            self.close()

    def close(self) -> None:
        if self._sock is not None:
            self._reader.close()
            self._sock.close()
            self._sock = None
