import socket
import time

import pytest

from llmsat.transport import (
    ConsoleEndpoint,
    ConsoleServer,
    DeadlockError,
    Frame,
    LinkError,
    LoopbackLink,
    ProtocolError,
    RefusedError,
    SocketLink,
)

from conftest import make_console

SCRIPT = [
    "get_orbit",
    "operation_periapsis --new_periapsis 95000",
    "execute_maneuver_nodes",
    None,
    "add_alarm_at_periapsis -name 'Periapsis Measurement'",
    None,
    "run_experiment -name 'Temperature Scan'",
    "send_message -message 'Temperature at periapsis: 127.0K'",
    "no_such_command",
]


def drive(link) -> list[str]:
    out = [link.connect()]
    for line in SCRIPT:
        out.append(link.await_event() if line is None else link.request(line))
    link.disconnect()
    return out


def endpoint(seed: int = 0) -> ConsoleEndpoint:
    return ConsoleEndpoint(make_console(seed=seed))


def raw_client(address):
    sock = socket.create_connection(address, timeout=5)
    return sock, sock.makefile("rb")


def test_loopback_and_socket_are_byte_identical():
    loop = drive(LoopbackLink(endpoint()))
    with ConsoleServer(endpoint()) as server:
        tcp = drive(SocketLink(*server.address))
    assert [s.encode() for s in loop] == [s.encode() for s in tcp]
    assert "Autopilot has completed" in loop[4]


def test_frame_round_trip():
    frame = Frame("request", 7, "send_message -message 'ünïcode \"quotes\"\nnewline'")
    encoded = frame.encode()
    assert encoded.endswith(b"\n") and encoded.count(b"\n") == 1
    assert Frame.decode(encoded) == frame


@pytest.mark.parametrize(
    "line",
    [b"not json", b"[]", b'{"kind": "request", "seq": 1}', b'{"kind": "launch", "seq": 1, "payload": ""}',
     b'{"kind": "request", "seq": "1", "payload": ""}', b"\xff\xfe"],
)
def test_malformed_frames_get_protocol_errors(line):
    ep = endpoint()
    ep.submit_raw(line)
    (reply,) = ep.collect()
    assert reply.kind == "error" and reply.payload.startswith("protocol: malformed frame")


def test_request_before_connect_is_refused():
    ep = endpoint()
    ep.submit(Frame("request", 1, "get_orbit"))
    (reply,) = ep.collect()
    assert reply == Frame("error", 1, "not-connected: connect first")


def test_second_agent_is_refused_in_process():
    ep = endpoint()
    LoopbackLink(ep).connect()
    with pytest.raises(RefusedError, match="busy"):
        LoopbackLink(ep).connect()


def test_second_client_is_refused_over_tcp():
    with ConsoleServer(endpoint()) as server:
        first = SocketLink(*server.address)
        first.connect()
        sock, reader = raw_client(server.address)
        reply = Frame.decode(reader.readline())
        assert reply.kind == "error" and reply.payload.startswith("busy")
        sock.close()
        assert first.request("get_ut").startswith("2045-01-03T")
        first.disconnect()


def test_pipelined_requests_are_rejected():
    ep = endpoint()
    with ConsoleServer(ep) as server:
        sock, reader = raw_client(server.address)
        sock.sendall(Frame("connect", 1).encode())
        assert Frame.decode(reader.readline()).kind == "response"
        sock.sendall(Frame("request", 2, "get_ut").encode() + Frame("request", 3, "get_met").encode())
        first = Frame.decode(reader.readline())
        second = Frame.decode(reader.readline())
        assert first.kind == "response" and first.seq == 2
        assert second == Frame("error", 3, "protocol: a request is already in flight")
        sock.close()


def test_deadlock_is_reported():
    link = LoopbackLink(endpoint())
    link.connect()
    with pytest.raises(DeadlockError):
        link.await_event()
    with ConsoleServer(endpoint()) as server:
        remote = SocketLink(*server.address)
        remote.connect()
        with pytest.raises(DeadlockError):
            remote.await_event()
        remote.disconnect()


def test_unexpected_frame_kind_from_agent():
    ep = endpoint()
    link = LoopbackLink(ep)
    link.connect()
    with pytest.raises(ProtocolError):
        link._exchange("response")


def test_reconnect_after_disconnect_keeps_world():
    ep = endpoint()
    with ConsoleServer(ep) as server:
        link = SocketLink(*server.address)
        link.connect()
        link.request("send_message -message first")
        link.disconnect()
        again = SocketLink(*server.address)
        again.connect()
        again.request("send_message -message second")
        again.disconnect()
    assert [m.body for m in ep.console.world.messages] == ["first", "second"]


def test_dropped_client_frees_the_console():
    ep = endpoint()
    with ConsoleServer(ep) as server:
        link = SocketLink(*server.address)
        link.connect()
        link.close()
        for _ in range(100):
            if not ep.attached and server._client is None:
                break
            time.sleep(0.02)
        again = SocketLink(*server.address)
        assert again.connect().startswith("SatelliteOS")
        again.disconnect()


def test_closed_server_raises_link_error():
    server = ConsoleServer(endpoint()).start()
    link = SocketLink(*server.address, timeout=2)
    link.connect()
    server.close()
    with pytest.raises((LinkError, OSError)):
        link.request("get_ut")


def test_send_without_connect():
    with pytest.raises(RefusedError):
        SocketLink("127.0.0.1", 1).request("get_ut")
