"""Remote wire-protocol tests against a local HTTP stub service."""
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from emblend.errors import DescriberFailure, RemoteFailure
from emblend.experts import EmbedItem, ExpertDescriptor
from emblend.remote import RemoteDescriber, RemoteExpert


class StubHandler(BaseHTTPRequestHandler):
    behavior = "ok"
    dim = 6
    seen = []
    active = 0
    max_active = 0
    lock = threading.Lock()

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            cls.active += 1
            cls.max_active = max(cls.max_active, cls.active)
        try:
            length = int(self.headers["Content-Length"])
            req = json.loads(self.rfile.read(length))
            cls.seen.append(req)
            if cls.behavior == "http_error":
                self.send_response(500)
                self.end_headers()
                return
            if req.get("task") == "describe":
                body = {"descriptions": [
                    {"id": item["id"], "text": f"description of {item['id']}"}
                    for item in req["inputs"]
                ]}
            else:
                ids = [item["id"] for item in req["inputs"]]
                if cls.behavior == "drop_one" and len(ids) > 1:
                    ids = ids[:-1]
                dim = cls.dim if cls.behavior != "wrong_dim" else cls.dim + 2
                body = {"embeddings": [
                    {"id": i, "vector": _vector_for(i, dim)} for i in ids
                ]}
            payload = json.dumps(body).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        finally:
            with cls.lock:
                cls.active -= 1


def _vector_for(item_id, dim):
    rng = np.random.default_rng(abs(hash(item_id)) % (2 ** 32))
    v = rng.normal(size=dim)
    return (v / np.linalg.norm(v)).tolist()


@pytest.fixture
def stub_server():
    StubHandler.behavior = "ok"
    StubHandler.seen = []
    StubHandler.max_active = 0
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/embed"
    server.shutdown()


def make_expert(endpoint, batch_size=32, max_in_flight=4):
    descriptor = ExpertDescriptor("remote-x", "remote", StubHandler.dim)
    return RemoteExpert(descriptor, endpoint, model="stub-model",
                        batch_size=batch_size, max_in_flight=max_in_flight)


def test_batch_cardinality_and_dim(stub_server):
    expert = make_expert(stub_server)
    items = [EmbedItem("a", "text", "hello"), EmbedItem("b", "image", "pic")]
    embs = expert.embed_batch(items)
    assert len(embs) == 2
    assert all(e.dim == StubHandler.dim for e in embs)
    assert [e.sample_id for e in embs] == ["a", "b"]


def test_request_wire_format(stub_server):
    expert = make_expert(stub_server)
    expert.embed(EmbedItem("a", "audio", "clip"))
    req = StubHandler.seen[-1]
    assert req["model"] == "stub-model"
    assert req["inputs"] == [{"id": "a", "modality": "audio", "content": "clip"}]


def test_http_error_raises(stub_server):
    StubHandler.behavior = "http_error"
    with pytest.raises(RemoteFailure):
        make_expert(stub_server).embed(EmbedItem("a", "text", "x"))


def test_missing_id_raises(stub_server):
    StubHandler.behavior = "drop_one"
    with pytest.raises(RemoteFailure):
        make_expert(stub_server).embed_batch(
            [EmbedItem("a", "text", "x"), EmbedItem("b", "text", "y")])


def test_wrong_dim_raises(stub_server):
    StubHandler.behavior = "wrong_dim"
    with pytest.raises(RemoteFailure):
        make_expert(stub_server).embed(EmbedItem("a", "text", "x"))


def test_unreachable_endpoint_raises():
    expert = make_expert("http://127.0.0.1:1/embed")
    expert.timeout = 0.2
    with pytest.raises(RemoteFailure):
        expert.embed(EmbedItem("a", "text", "x"))


def test_in_flight_bound_respected(stub_server):
    expert = make_expert(stub_server, batch_size=1, max_in_flight=2)
    items = [EmbedItem(f"i{k}", "text", "x") for k in range(12)]
    embs = expert.embed_batch(items)
    assert len(embs) == 12
    assert StubHandler.max_active <= 2


def test_describer_roundtrip(stub_server):
    describer = RemoteDescriber(stub_server, model="cap")
    text = describer.describe("s7", "video", "frames...")
    assert text == "description of s7"
    req = StubHandler.seen[-1]
    assert req["task"] == "describe"


def test_describer_failure_on_http_error(stub_server):
    StubHandler.behavior = "http_error"
    with pytest.raises(DescriberFailure):
        RemoteDescriber(stub_server, model="cap").describe("s", "video", "x")
