"""Aggregator/client message exchange.

Wire frame (all integers little-endian)::

    offset  size  field
    0       4     magic b"FDB1"
    4       1     version (1)
    5       1     kind (1 register, 2 global_model, 3 client_update, 4 shutdown)
    6       4     round, uint32
    10      4     client_id, uint32
    14      8     n_samples, uint64
    22      8     param_len, uint64
    30      8*P   params, IEEE-754 float64

A frame is therefore ``30 + 8 * param_len`` bytes. Both transports count
exactly these frame bytes, never OS-level overhead.
"""

from __future__ import annotations

import enum
import socket
import struct
import threading
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"FDB1"
VERSION = 1
HEADER = struct.Struct("<4sBBIIQQ")
HEADER_SIZE = HEADER.size  # 30
DEFAULT_MAX_PARAMS = 1 << 27


class Kind(enum.IntEnum):
    REGISTER = 1
    GLOBAL_MODEL = 2
    CLIENT_UPDATE = 3
    SHUTDOWN = 4


class ProtocolError(Exception):
    pass


class TransportError(RuntimeError):
    pass


@dataclass
class WireMessage:
    kind: Kind
    round: int = 0
    client_id: int = 0
    n_samples: int = 0
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __eq__(self, other):
        if not isinstance(other, WireMessage):
            return NotImplemented
        return (self.kind == other.kind and self.round == other.round
                and self.client_id == other.client_id and self.n_samples == other.n_samples
                and np.array_equal(self.params, other.params))


def frame_size(param_len: int) -> int:
    return HEADER_SIZE + 8 * param_len


def encode(msg: WireMessage) -> bytes:
    params = np.ascontiguousarray(msg.params, dtype="<f8")
    head = HEADER.pack(MAGIC, VERSION, int(msg.kind), msg.round, msg.client_id,
                       msg.n_samples, params.size)
    return head + params.tobytes()


class IncompleteFrame(Exception):
    """Not enough bytes yet; feed more and retry."""


def decode(buf: bytes, max_params: int = DEFAULT_MAX_PARAMS) -> tuple[WireMessage, int]:
    """Decode one frame from the front of ``buf``; returns ``(message, bytes_consumed)``."""
    if len(buf) >= 4 and bytes(buf[:4]) != MAGIC:
        raise ProtocolError(f"bad magic {bytes(buf[:4])!r} at offset 0")
    if len(buf) < HEADER_SIZE:
        raise IncompleteFrame(HEADER_SIZE - len(buf))
    magic, version, kind, rnd, cid, n_samples, plen = HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version} at offset 4")
    try:
        kind = Kind(kind)
    except ValueError:
        raise ProtocolError(f"unknown message kind {kind} at offset 5") from None
    if plen > max_params:
        raise ProtocolError(f"param_len {plen} exceeds limit {max_params}")
    total = frame_size(plen)
    if len(buf) < total:
        raise IncompleteFrame(total - len(buf))
    params = np.frombuffer(buf, dtype="<f8", count=plen, offset=HEADER_SIZE).astype(np.float64)
    return WireMessage(kind, rnd, cid, n_samples, params), total


class FrameDecoder:
    """Streaming reassembly of frames from arbitrary byte chunks."""

    def __init__(self, max_params: int = DEFAULT_MAX_PARAMS):
        self.max_params = max_params
        self._buf = bytearray()

    def feed(self, chunk: bytes) -> list[WireMessage]:
        self._buf += chunk
        out = []
        while True:
            try:
                msg, used = decode(self._buf, self.max_params)
            except IncompleteFrame:
                return out
            del self._buf[:used]
            out.append(msg)

    @property
    def pending(self) -> int:
        return len(self._buf)


class ByteCounter:
    def __init__(self):
        self.sent = 0
        self.received = 0
        self._lock = threading.Lock()

    def add(self, sent=0, received=0):
        with self._lock:
            self.sent += sent
            self.received += received

    @property
    def total(self) -> int:
        return self.sent + self.received


# --- endpoint abstraction -------------------------------------------------
#
# A Channel carries frames in both directions between the aggregator and one
# client. Every frame is encoded to bytes even in-process so that the byte
# accounting is identical across transports.


class Channel:
    def send(self, msg: WireMessage) -> None:
        raise NotImplementedError

    def recv(self, timeout: float | None = None) -> WireMessage:
        raise NotImplementedError

    def close(self) -> None:
        pass


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket, max_params: int = DEFAULT_MAX_PARAMS):
        self.sock = sock
        self.counter = ByteCounter()
        self._decoder = FrameDecoder(max_params)
        self._ready: list[WireMessage] = []

    def send(self, msg):
        data = encode(msg)
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc
        self.counter.add(sent=len(data))

    def recv(self, timeout=None):
        self.sock.settimeout(timeout)
        while not self._ready:
            try:
                chunk = self.sock.recv(1 << 20)
            except socket.timeout:
                raise TransportError("timed out waiting for a frame") from None
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed by peer")
            self.counter.add(received=len(chunk))
            self._ready.extend(self._decoder.feed(chunk))
        return self._ready.pop(0)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def connect(host: str, port: int, timeout: float = 30.0) -> SocketChannel:
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketChannel(sock)


class TCPListener:
    """Accepts client connections for the aggregator; ``port=0`` picks a free port."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.sock = socket.create_server((host, port))
        self.host, self.port = self.sock.getsockname()[:2]

    def accept(self, n: int, timeout: float = 60.0) -> list[SocketChannel]:
        self.sock.settimeout(timeout)
        chans = []
        for _ in range(n):
            try:
                conn, _ = self.sock.accept()
            except socket.timeout:
                raise TransportError(f"only {len(chans)} of {n} clients connected") from None
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            chans.append(SocketChannel(conn))
        return chans

    def close(self):
        self.sock.close()


class AggregatorEndpoint:
    """Aggregator view over one channel per client.

    After :meth:`register` the channels are keyed by the client id carried
    in each client's register frame. The aggregator itself is single-threaded.
    """

    def __init__(self, channels: list[Channel], timeout: float | None = 300.0):
        self._unregistered = list(channels)
        self.channels: dict[int, Channel] = {}
        self.client_samples: dict[int, int] = {}
        self.timeout = timeout

    def register(self) -> list[int]:
        for ch in self._unregistered:
            msg = ch.recv(self.timeout)
            if msg.kind != Kind.REGISTER:
                raise ProtocolError(f"expected register, got {msg.kind.name}")
            if msg.client_id in self.channels:
                raise ProtocolError(f"client id {msg.client_id} registered twice")
            self.channels[msg.client_id] = ch
            self.client_samples[msg.client_id] = msg.n_samples
        self._unregistered = []
        return sorted(self.channels)

    def broadcast(self, rnd: int, params: np.ndarray) -> None:
        for cid in sorted(self.channels):
            self.channels[cid].send(WireMessage(Kind.GLOBAL_MODEL, rnd, cid, 0, params))

    def gather(self, rnd: int) -> dict[int, WireMessage]:
        """Collect one update per client for round ``rnd`` (the round barrier).

        Channels are drained in client-id order, which gives the aggregator a
        deterministic update order regardless of arrival times.
        """
        updates = {}
        for cid in sorted(self.channels):
            try:
                item = self.channels[cid].recv(self.timeout)
            except TransportError as exc:
                raise TransportError(f"client {cid} failed in round {rnd}: {exc}") from exc
            if item.kind != Kind.CLIENT_UPDATE or item.round != rnd or item.client_id != cid:
                raise ProtocolError(f"client {cid}: unexpected {item.kind.name} "
                                    f"for round {item.round} (expected round {rnd})")
            updates[cid] = item
        return updates

    def shutdown(self) -> None:
        for cid in sorted(self.channels):
            try:
                self.channels[cid].send(WireMessage(Kind.SHUTDOWN, 0, cid))
            except TransportError:
                pass

    def close(self) -> None:
        for ch in self.channels.values():
            ch.close()

    def bytes_by_client(self) -> dict[int, int]:
        return {cid: ch.counter.total for cid, ch in self.channels.items()}


class ClientSession:
    """Client-side protocol state machine.

    ``train_fn(round, global_params) -> (params, n_samples)`` performs the
    local round.
    """

    def __init__(self, client_id: int, n_samples: int, train_fn):
        self.client_id = client_id
        self.n_samples = n_samples
        self.train_fn = train_fn
        self.rounds = 0
        self.done = False

    def hello(self) -> WireMessage:
        return WireMessage(Kind.REGISTER, 0, self.client_id, self.n_samples)

    def on_message(self, msg: WireMessage) -> WireMessage | None:
        if msg.kind == Kind.SHUTDOWN:
            self.done = True
            return None
        if msg.kind != Kind.GLOBAL_MODEL:
            raise ProtocolError(f"client {self.client_id}: unexpected {msg.kind.name}")
        params, n = self.train_fn(msg.round, msg.params)
        self.rounds += 1
        return WireMessage(Kind.CLIENT_UPDATE, msg.round, self.client_id, n, params)


def client_loop(channel: Channel, session: ClientSession, timeout: float | None = 300.0) -> int:
    """Drive ``session`` over a blocking channel until shutdown; returns rounds served."""
    channel.send(session.hello())
    while not session.done:
        reply = session.on_message(channel.recv(timeout))
        if reply is not None:
            channel.send(reply)
    return session.rounds


class _DirectChannel(Channel):
    """Aggregator-side in-process channel that runs the client synchronously.

    Frames are still encoded and decoded byte-for-byte; the client handles
    each frame as soon as it is sent.
    """

    def __init__(self, session: ClientSession):
        self.session = session
        self.counter = ByteCounter()
        self.client_counter = ByteCounter()
        self._to_client = FrameDecoder()
        self._to_agg = FrameDecoder()
        self._ready: list[WireMessage] = []
        self._deliver_to_agg(session.hello())

    def _deliver_to_agg(self, msg):
        data = encode(msg)
        self.client_counter.add(sent=len(data))
        self.counter.add(received=len(data))
        self._ready.extend(self._to_agg.feed(data))

    def send(self, msg):
        data = encode(msg)
        self.counter.add(sent=len(data))
        self.client_counter.add(received=len(data))
        for m in self._to_client.feed(data):
            reply = self.session.on_message(m)
            if reply is not None:
                self._deliver_to_agg(reply)

    def recv(self, timeout=None):
        if not self._ready:
            raise TransportError(f"client {self.session.client_id} has nothing to send")
        return self._ready.pop(0)


def inproc_endpoint(sessions: list[ClientSession]) -> AggregatorEndpoint:
    return AggregatorEndpoint([_DirectChannel(s) for s in sessions])
