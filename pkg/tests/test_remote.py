import json
import sys
from pathlib import Path

import numpy as np
import pytest

from subsearch.remote import (
    ProtocolClient,
    ProtocolError,
    RemoteSurrogate,
    StdioTransport,
    encode_request,
    open_transport,
)

FIXTURES = json.loads(
    (Path(__file__).parent / "fixtures" / "wire_fixtures.json").read_text()
)


class FakeTransport:
    """Replays scripted responses and records what the client sent."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.sent = []

    def send_line(self, line):
        self.sent.append(line)

    def recv_line(self):
        if not self.replies:
            raise ProtocolError("server closed the connection")
        return self.replies.pop(0)

    def close(self):
        pass


class TestClientWireBytes:
    def test_requests_match_shared_fixtures(self):
        steps = FIXTURES["client_requests"]
        transport = FakeTransport([s["reply"] for s in steps])
        client = ProtocolClient(transport)
        for step in steps:
            if step["call"] == "ping":
                client.ping()
            elif step["call"] == "fit":
                client.fit(step["xs"], step["ys"])
            elif step["call"] == "predict":
                result = client.predict(step["xs"])
                assert result == step["expect_result"]
        assert transport.sent == [s["bytes"] for s in steps]

    def test_ids_increase_monotonically(self):
        transport = FakeTransport(
            ['{"ok":true,"id":1}', '{"ok":true,"id":2}', '{"ok":true,"id":3}']
        )
        client = ProtocolClient(transport)
        for _ in range(3):
            client.ping()
        ids = [json.loads(line)["id"] for line in transport.sent]
        assert ids == [1, 2, 3]

    def test_non_finite_payload_refused_before_sending(self):
        client = ProtocolClient(FakeTransport([]))
        with pytest.raises(ValueError, match="non-finite"):
            client.fit([[float("nan")]], [1.0])
        assert client.transport.sent == []


class TestClientErrorHandling:
    def test_server_error_response_raises_with_diagnostics(self):
        transport = FakeTransport(['{"ok":false,"error":"predict before fit","id":1}'])
        client = ProtocolClient(transport)
        with pytest.raises(ProtocolError, match="predict before fit"):
            client.predict([[1.0]])

    def test_mismatched_id_rejected(self):
        transport = FakeTransport(['{"ok":true,"id":7}'])
        client = ProtocolClient(transport)
        with pytest.raises(ProtocolError, match="does not match"):
            client.ping()

    def test_garbage_response_rejected(self):
        transport = FakeTransport(["{{{"])
        client = ProtocolClient(transport)
        with pytest.raises(ProtocolError, match="unparseable"):
            client.ping()

    def test_wrong_prediction_count_rejected(self):
        transport = FakeTransport(['{"ok":true,"yhat":[1.0],"id":1}'])
        client = ProtocolClient(transport)
        with pytest.raises(ProtocolError, match="values for 2 queries"):
            client.predict([[0.0], [1.0]])

    def test_eof_raises(self):
        client = ProtocolClient(FakeTransport([]))
        with pytest.raises(ProtocolError, match="closed"):
            client.ping()


class TestRemoteSurrogate:
    def test_fit_predict_round_trip(self):
        transport = FakeTransport(
            ['{"ok":true,"id":1}', '{"ok":true,"yhat":[0.5,1.5],"id":2}']
        )
        model = RemoteSurrogate(ProtocolClient(transport))
        model.fit(np.array([[0.0], [1.0]]), np.array([0.0, 2.0]))
        out = model.predict(np.array([[0.25], [0.75]]))
        np.testing.assert_array_equal(out, [0.5, 1.5])

    def test_unreachable_server_raises_protocol_error(self):
        with pytest.raises(ProtocolError, match="failed to start"):
            StdioTransport(["/nonexistent/binary"])


class TestOpenTransport:
    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError, match="unknown transport"):
            open_transport("carrier-pigeon:coop")
        with pytest.raises(ValueError, match="bad tcp"):
            open_transport("tcp:localhost")

    def test_stdio_round_trip_with_inline_responder(self):
        # A one-line responder: acknowledges every line with ok + its id.
        script = (
            "import sys, json\n"
            "for line in sys.stdin:\n"
            "    msg = json.loads(line)\n"
            "    print(json.dumps({'ok': True, 'id': msg['id']}, separators=(',', ':')), flush=True)\n"
        )
        transport = open_transport(f"stdio:{sys.executable} -c \"{script}\"")
        try:
            client = ProtocolClient(transport)
            client.ping()
            client.ping()
        finally:
            transport.close()


def test_encode_request_is_compact_single_line():
    line = encode_request({"op": "ping", "id": 1})
    assert line == '{"op":"ping","id":1}'
    assert "\n" not in line


def test_builtin_ridge_still_produces_frozen_agreement_values():
    # The shared fixtures freeze the built-in ridge's predictions on a fixed
    # dataset; any server implementation must agree with them, so guard the
    # freeze on this side too.
    from subsearch.surrogate import ContextSet, RidgeSurrogate, fit, predict

    case = FIXTURES["ridge_agreement"]
    ctx = ContextSet(len(case["xs"][0]))
    for coords, value in zip(case["xs"], case["ys"]):
        ctx.append(np.asarray(coords), value)
    model = fit(ctx, RidgeSurrogate(regularization=1e-6))
    out = predict(model, np.asarray(case["queries"]))
    np.testing.assert_allclose(out, case["predictions"], atol=1e-12)
